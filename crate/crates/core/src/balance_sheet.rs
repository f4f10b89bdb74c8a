//! Valuation of a single bank funded by vanilla debt and fractional CoCo debt.
//!
//! Every quantity here is a deterministic function of the bank's total assets
//! `a` at maturity. The bank passes through four regimes as `a` falls:
//!
//! | regime              | assets            | conversion `λ` |
//! |---------------------|-------------------|----------------|
//! | unconverted         | `a ≥ a3`          | 0              |
//! | partial conversion  | `a2 ≤ a < a3`     | in (0, 1)      |
//! | full conversion     | `a1 ≤ a < a2`     | 1              |
//! | default             | `a < a1`          | 1              |
//!
//! with `a1 = p̄⁰`, `a2 = (1+τ)p̄⁰` and `a3 = (1+τ)(p̄⁰+p̄ᶜ)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Contract parameters of a fractional CoCo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CocoTerms {
    trigger: f64,
    conversion_factor: f64,
}

impl CocoTerms {
    /// `trigger` is the equity-to-debt ratio τ at which conversion starts;
    /// `conversion_factor` is the value q of new equity per unit of converted
    /// face value and must satisfy `0 ≤ q ≤ 1`.
    pub fn new(trigger: f64, conversion_factor: f64) -> Result<Self> {
        if !(trigger.is_finite() && trigger > 0.0) {
            return Err(invalid(format!("trigger must be > 0, got {trigger}")));
        }
        if !(0.0..=1.0).contains(&conversion_factor) {
            return Err(invalid(format!(
                "conversion factor must lie in [0, 1], got {conversion_factor}"
            )));
        }
        Ok(CocoTerms {
            trigger,
            conversion_factor,
        })
    }

    /// Terms with `q > 1`. Only used to exhibit the speculative behaviour that
    /// the `q ≤ 1` restriction rules out.
    #[cfg(test)]
    pub(crate) fn speculative(trigger: f64, conversion_factor: f64) -> Self {
        CocoTerms {
            trigger,
            conversion_factor,
        }
    }

    pub fn trigger(&self) -> f64 {
        self.trigger
    }

    pub fn conversion_factor(&self) -> f64 {
        self.conversion_factor
    }

    fn exponent(&self) -> f64 {
        self.conversion_factor / self.trigger
    }
}

/// Default and conversion thresholds on total assets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoints {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

/// Which valuation regime a bank is in for a given asset level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Piece {
    Default,
    FullConversion,
    PartialConversion,
    Unconverted,
}

/// Values (or marginal values) of the three securities written on a bank.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tranches {
    pub vanilla: f64,
    pub coco: f64,
    pub original_equity: f64,
}

impl Tranches {
    pub fn total(&self) -> f64 {
        self.vanilla + self.coco + self.original_equity
    }
}

/// Liability side of one bank: vanilla and CoCo face values, the CoCo terms and
/// the recovery rate applied on default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BankSheet {
    vanilla_face: f64,
    coco_face: f64,
    terms: CocoTerms,
    recovery: f64,
    breakpoints: Breakpoints,
}

impl BankSheet {
    pub fn new(vanilla_face: f64, coco_face: f64, terms: CocoTerms, recovery: f64) -> Result<Self> {
        let sheet = Self::build(vanilla_face, coco_face, terms, recovery)?;
        if vanilla_face + coco_face <= 0.0 {
            return Err(invalid(
                "a bank needs positive total face value (pure-equity nodes must be requested explicitly)",
            ));
        }
        Ok(sheet)
    }

    /// A node without liabilities: `λ ≡ 0`, `c ≡ 0` and `E(a) = a`.
    pub fn pure_equity(terms: CocoTerms, recovery: f64) -> Result<Self> {
        Self::build(0.0, 0.0, terms, recovery)
    }

    fn build(vanilla_face: f64, coco_face: f64, terms: CocoTerms, recovery: f64) -> Result<Self> {
        if !(vanilla_face.is_finite() && vanilla_face >= 0.0) {
            return Err(invalid(format!(
                "vanilla face must be >= 0, got {vanilla_face}"
            )));
        }
        if !(coco_face.is_finite() && coco_face >= 0.0) {
            return Err(invalid(format!("coco face must be >= 0, got {coco_face}")));
        }
        if !(0.0..=1.0).contains(&recovery) {
            return Err(invalid(format!(
                "recovery must lie in [0, 1], got {recovery}"
            )));
        }
        let growth = 1.0 + terms.trigger;
        let breakpoints = Breakpoints {
            a1: vanilla_face,
            a2: growth * vanilla_face,
            a3: growth * (vanilla_face + coco_face),
        };
        Ok(BankSheet {
            vanilla_face,
            coco_face,
            terms,
            recovery,
            breakpoints,
        })
    }

    pub fn vanilla_face(&self) -> f64 {
        self.vanilla_face
    }

    pub fn coco_face(&self) -> f64 {
        self.coco_face
    }

    pub fn total_face(&self) -> f64 {
        self.vanilla_face + self.coco_face
    }

    pub fn terms(&self) -> CocoTerms {
        self.terms
    }

    pub fn recovery(&self) -> f64 {
        self.recovery
    }

    pub fn breakpoints(&self) -> Breakpoints {
        self.breakpoints
    }

    /// Face value still owed when a fraction `lambda` of the CoCo has converted.
    pub fn amount_due(&self, lambda: f64) -> f64 {
        self.vanilla_face + (1.0 - lambda) * self.coco_face
    }

    pub fn is_default(&self, a: f64) -> bool {
        a < self.breakpoints.a1
    }

    pub fn piece(&self, a: f64) -> Piece {
        let bp = &self.breakpoints;
        if a < bp.a1 {
            Piece::Default
        } else if a < bp.a2 {
            Piece::FullConversion
        } else if a < bp.a3 {
            Piece::PartialConversion
        } else {
            Piece::Unconverted
        }
    }

    /// Fraction λ(a) of CoCo face value converted to equity.
    pub fn conversion_fraction(&self, a: f64) -> f64 {
        if self.coco_face <= 0.0 {
            return 0.0;
        }
        let raw = (self.total_face() - a / (1.0 + self.terms.trigger)) / self.coco_face;
        raw.clamp(0.0, 1.0)
    }

    /// Share c(a) of the bank's equity held by former CoCo holders.
    pub fn coco_equity_fraction(&self, a: f64) -> f64 {
        if self.coco_face <= 0.0 {
            return 0.0;
        }
        let bp = &self.breakpoints;
        if a >= bp.a3 {
            return 0.0;
        }
        1.0 - ratio_power(a.max(bp.a2) / bp.a3, self.terms.exponent())
    }

    /// Equity E(a); negative values are the shortfall of a defaulted bank.
    pub fn equity(&self, a: f64) -> f64 {
        let due = self.amount_due(self.conversion_fraction(a));
        if a >= self.breakpoints.a1 {
            a - due
        } else {
            self.recovery * a - due
        }
    }

    /// Value D(a) delivered to all debt holders.
    pub fn debt_value(&self, a: f64) -> f64 {
        if a >= self.breakpoints.a1 {
            self.amount_due(self.conversion_fraction(a))
        } else {
            self.recovery * a
        }
    }

    /// Split of the bank's realised value between vanilla holders, CoCo holders
    /// (remaining debt plus converted equity) and the original shareholders.
    pub fn tranche_values(&self, a: f64) -> Tranches {
        let lambda = self.conversion_fraction(a);
        let c = self.coco_equity_fraction(a);
        if a >= self.breakpoints.a1 {
            let equity = (a - self.amount_due(lambda)).max(0.0);
            Tranches {
                vanilla: self.vanilla_face,
                coco: (1.0 - lambda) * self.coco_face + c * equity,
                original_equity: (1.0 - c) * equity,
            }
        } else {
            Tranches {
                vanilla: self.recovery * a,
                coco: 0.0,
                original_equity: 0.0,
            }
        }
    }

    /// Right derivatives of [`tranche_values`](Self::tranche_values) in `a`.
    pub fn marginals(&self, a: f64) -> Tranches {
        self.marginals_between(a, a)
    }

    /// Entrywise upper bound of the tranche marginals over `[lo, hi]`, valid
    /// when both ends sit in the same [`Piece`].
    ///
    /// Inside the partial-conversion regime the CoCo marginal decreases and
    /// the original-equity marginal increases with `a`.
    pub fn marginals_between(&self, lo: f64, hi: f64) -> Tranches {
        match self.piece(lo) {
            Piece::Default => Tranches {
                vanilla: self.recovery,
                ..Tranches::default()
            },
            Piece::FullConversion => {
                let c2 = self.coco_equity_fraction(self.breakpoints.a2);
                Tranches {
                    vanilla: 0.0,
                    coco: c2,
                    original_equity: 1.0 - c2,
                }
            }
            Piece::PartialConversion => {
                let t = self.terms.trigger;
                let q = self.terms.conversion_factor;
                let weight = (q + t) / (1.0 + t);
                let a3 = self.breakpoints.a3;
                let lo_pow = ratio_power(lo / a3, self.terms.exponent());
                let hi_pow = ratio_power(hi / a3, self.terms.exponent());
                Tranches {
                    vanilla: 0.0,
                    coco: 1.0 - weight * lo_pow,
                    original_equity: weight * hi_pow,
                }
            }
            Piece::Unconverted => Tranches {
                original_equity: 1.0,
                ..Tranches::default()
            },
        }
    }

    /// Conversion fraction written as a function of equity `v` instead of assets.
    pub fn equity_domain_lambda(&self, v: f64) -> f64 {
        if self.coco_face <= 0.0 {
            return 0.0;
        }
        let t = self.terms.trigger;
        ((t * self.total_face() - v) / (t * self.coco_face)).clamp(0.0, 1.0)
    }

    /// CoCo holders' equity share written as a function of equity `v`.
    pub fn equity_domain_c(&self, v: f64) -> f64 {
        if self.coco_face <= 0.0 {
            return 0.0;
        }
        let due = self.amount_due(self.equity_domain_lambda(v));
        1.0 - ratio_power(due / self.total_face(), self.terms.exponent())
    }

    /// Tranche values as functions of equity `v`, i.e. the payments a holder of
    /// each security receives when the bank's equity is `v`.
    pub fn equity_domain_tranches(&self, v: f64) -> Tranches {
        let lambda = self.equity_domain_lambda(v);
        let c = self.equity_domain_c(v);
        let pos = v.max(0.0);
        let neg = (-v).max(0.0);
        Tranches {
            vanilla: self.vanilla_face - neg,
            coco: (1.0 - lambda) * self.coco_face + c * pos,
            original_equity: (1.0 - c) * pos,
        }
    }
}

/// `ratio^exponent` for `ratio ∈ [0, 1]`, evaluated in log space.
fn ratio_power(ratio: f64, exponent: f64) -> f64 {
    if exponent == 0.0 {
        1.0
    } else if ratio <= 0.0 {
        0.0
    } else if ratio >= 1.0 {
        1.0
    } else {
        (exponent * ratio.ln()).exp()
    }
}
