//! Network data model and scenario transforms.
//!
//! Claim matrices are `n × (n+1)`: row `i` describes who holds bank `i`'s
//! vanilla debt, CoCo debt or original equity, and column 0 is society.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::balance_sheet::{BankSheet, CocoTerms};
use crate::clearing::FlowSystem;
use crate::error::{invalid, Error, Result};

const ROW_SUM_TOL: f64 = 1e-9;

/// Face values before any CoCo-ization.
#[derive(Debug, Clone, PartialEq)]
pub struct VanillaNetwork {
    liabilities: DMatrix<f64>,
    external_liab: Vec<f64>,
    external_assets: Vec<f64>,
}

impl VanillaNetwork {
    /// `liabilities[(i, j)]` is what bank `i` owes bank `j`.
    pub fn new(
        liabilities: DMatrix<f64>,
        external_liab: Vec<f64>,
        external_assets: Vec<f64>,
    ) -> Result<Self> {
        let n = external_assets.len();
        if liabilities.nrows() != n || liabilities.ncols() != n || external_liab.len() != n {
            return Err(invalid(format!(
                "dimension mismatch: liabilities {}x{}, external_liab {}, external_assets {n}",
                liabilities.nrows(),
                liabilities.ncols(),
                external_liab.len()
            )));
        }
        if n == 0 {
            return Err(invalid("network has no banks"));
        }
        for i in 0..n {
            if liabilities[(i, i)] != 0.0 {
                return Err(invalid(format!(
                    "bank {} owes itself {}",
                    i + 1,
                    liabilities[(i, i)]
                )));
            }
        }
        if liabilities.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("liabilities must be finite and nonnegative"));
        }
        if external_liab.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid(
                "external liabilities must be finite and nonnegative",
            ));
        }
        if let Some(i) = external_assets
            .iter()
            .position(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::NegativeAssets {
                bank: i + 1,
                value: external_assets[i],
            });
        }
        Ok(VanillaNetwork {
            liabilities,
            external_liab,
            external_assets,
        })
    }

    pub fn n(&self) -> usize {
        self.external_assets.len()
    }

    pub fn liabilities(&self) -> &DMatrix<f64> {
        &self.liabilities
    }

    pub fn external_liab(&self) -> &[f64] {
        &self.external_liab
    }

    pub fn external_assets(&self) -> &[f64] {
        &self.external_assets
    }

    /// Interbank liabilities of each bank (row sums).
    pub fn interbank_liab(&self) -> Vec<f64> {
        self.liabilities.row_iter().map(|r| r.sum()).collect()
    }

    /// Interbank assets of each bank (column sums).
    pub fn interbank_assets(&self) -> Vec<f64> {
        self.liabilities.column_iter().map(|c| c.sum()).collect()
    }

    /// Capital `x + interbank assets − interbank liabilities − external liabilities`.
    pub fn capital(&self) -> Vec<f64> {
        let ib_a = self.interbank_assets();
        let ib_l = self.interbank_liab();
        (0..self.n())
            .map(|i| self.external_assets[i] + ib_a[i] - ib_l[i] - self.external_liab[i])
            .collect()
    }

    pub fn apply_shock(&self, xi: f64) -> Result<Self> {
        check_unit("shock", xi)?;
        let mut out = self.clone();
        for x in &mut out.external_assets {
            *x *= 1.0 - xi;
        }
        Ok(out)
    }

    /// Replace a fraction `gamma` of external liabilities with interbank
    /// obligations spread in the existing interbank proportions, adjusting
    /// external assets so that every bank keeps its capital.
    pub fn interbank_shift(&self, gamma: f64) -> Result<Self> {
        check_unit("interbank fraction", gamma)?;
        if gamma == 0.0 {
            return Ok(self.clone());
        }
        let interbank_total = self.liabilities.sum();
        if interbank_total <= 0.0 {
            return Err(invalid("interbank shift needs a positive interbank total"));
        }
        let external_total: f64 = self.external_liab.iter().sum();
        let scale = (interbank_total + external_total * gamma) / interbank_total;
        let capital = self.capital();
        let liabilities = &self.liabilities * scale;
        let external_liab: Vec<f64> = self
            .external_liab
            .iter()
            .map(|l| (1.0 - gamma) * l)
            .collect();
        let row: Vec<f64> = liabilities.row_iter().map(|r| r.sum()).collect();
        let col: Vec<f64> = liabilities.column_iter().map(|c| c.sum()).collect();
        let mut external_assets = Vec::with_capacity(self.n());
        for i in 0..self.n() {
            let x = capital[i] - col[i] + row[i] + external_liab[i];
            if x < 0.0 {
                return Err(Error::NegativeAssets {
                    bank: i + 1,
                    value: x,
                });
            }
            external_assets.push(x);
        }
        Ok(VanillaNetwork {
            liabilities,
            external_liab,
            external_assets,
        })
    }
}

/// Which debt classes a scenario converts into CoCos.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    None,
    Full,
    Interbank,
    External,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::None,
        Scheme::Full,
        Scheme::Interbank,
        Scheme::External,
    ];

    /// `(beta, beta0)` for a scheme applied at CoCo fraction `fraction`.
    pub fn fractions(self, fraction: f64) -> (f64, f64) {
        match self {
            Scheme::None => (0.0, 0.0),
            Scheme::Full => (fraction, fraction),
            Scheme::Interbank => (fraction, 0.0),
            Scheme::External => (0.0, fraction),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::None => "none",
            Scheme::Full => "full",
            Scheme::Interbank => "interbank",
            Scheme::External => "external",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "vanilla" => Ok(Scheme::None),
            "full" => Ok(Scheme::Full),
            "interbank" => Ok(Scheme::Interbank),
            "external" => Ok(Scheme::External),
            other => Err(invalid(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Declarative stress experiment applied to a [`VanillaNetwork`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub scheme: Scheme,
    /// CoCo fraction of interbank debt.
    pub beta: f64,
    /// CoCo fraction of external debt.
    pub beta0: f64,
    pub trigger: f64,
    pub conversion: f64,
    pub recovery: f64,
    pub shock: f64,
    pub interbank_fraction: f64,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            scheme: Scheme::None,
            beta: 0.0,
            beta0: 0.0,
            trigger: 0.03,
            conversion: 1.0,
            recovery: 0.5,
            shock: 0.0,
            interbank_fraction: 0.0,
            seed: 0,
        }
    }
}

impl Scenario {
    /// Set `scheme` and derive `beta`, `beta0` from a single CoCo fraction.
    pub fn with_scheme(mut self, scheme: Scheme, fraction: f64) -> Self {
        let (beta, beta0) = scheme.fractions(fraction);
        self.scheme = scheme;
        self.beta = beta;
        self.beta0 = beta0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("beta", self.beta)?;
        check_unit("beta0", self.beta0)?;
        check_unit("shock", self.shock)?;
        check_unit("interbank_fraction", self.interbank_fraction)?;
        check_unit("recovery", self.recovery)?;
        CocoTerms::new(self.trigger, self.conversion)?;
        let consistent = match self.scheme {
            Scheme::None => self.beta == 0.0 && self.beta0 == 0.0,
            Scheme::Full => self.beta == self.beta0,
            Scheme::Interbank => self.beta0 == 0.0,
            Scheme::External => self.beta == 0.0,
        };
        if !consistent {
            return Err(invalid(format!(
                "scheme {} is inconsistent with beta={} beta0={}",
                self.scheme, self.beta, self.beta0
            )));
        }
        Ok(())
    }

    pub fn terms(&self) -> Result<CocoTerms> {
        CocoTerms::new(self.trigger, self.conversion)
    }

    /// Interbank shift, shock, then CoCo-ization.
    pub fn build(&self, vanilla: &VanillaNetwork) -> Result<Network> {
        self.validate()?;
        let shifted = vanilla.interbank_shift(self.interbank_fraction)?;
        let shocked = shifted.apply_shock(self.shock)?;
        cocoize(&shocked, self)
    }
}

/// Extra knobs for [`cocoize_with`].
#[derive(Debug, Clone, Default)]
pub struct CocoizeOptions {
    /// Bank-to-bank original-equity holdings (`n × n`, row = issuer). Society
    /// holds whatever each row leaves over.
    pub equity_holdings: Option<DMatrix<f64>>,
    /// Accept banks without liabilities and value them as pure equity.
    pub allow_pure_equity: bool,
}

/// CoCo-ize every bank with the scenario's uniform fractions and terms.
pub fn cocoize(vanilla: &VanillaNetwork, scenario: &Scenario) -> Result<Network> {
    scenario.validate()?;
    let n = vanilla.n();
    cocoize_with(
        vanilla,
        &vec![scenario.beta; n],
        &vec![scenario.beta0; n],
        scenario.terms()?,
        scenario.recovery,
        &CocoizeOptions::default(),
    )
}

/// CoCo-ize with per-bank fractions: bank `i` converts `beta[i]` of its
/// interbank debt and `beta0[i]` of its external debt.
pub fn cocoize_with(
    vanilla: &VanillaNetwork,
    beta: &[f64],
    beta0: &[f64],
    terms: CocoTerms,
    recovery: f64,
    options: &CocoizeOptions,
) -> Result<Network> {
    let n = vanilla.n();
    if beta.len() != n || beta0.len() != n {
        return Err(invalid(
            "per-bank CoCo fractions must have one entry per bank",
        ));
    }
    for (&b, &b0) in beta.iter().zip(beta0) {
        check_unit("beta", b)?;
        check_unit("beta0", b0)?;
    }
    let l = vanilla.liabilities();
    let l0 = vanilla.external_liab();
    let mut pi0 = DMatrix::zeros(n, n + 1);
    let mut pic = DMatrix::zeros(n, n + 1);
    let mut sheets = Vec::with_capacity(n);
    for i in 0..n {
        let interbank: f64 = l.row(i).sum();
        let vanilla_face = (1.0 - beta0[i]) * l0[i] + (1.0 - beta[i]) * interbank;
        let coco_face = beta0[i] * l0[i] + beta[i] * interbank;
        fill_claim_row(
            &mut pi0,
            i,
            (1.0 - beta0[i]) * l0[i],
            |j| (1.0 - beta[i]) * l[(i, j)],
            vanilla_face,
        );
        fill_claim_row(
            &mut pic,
            i,
            beta0[i] * l0[i],
            |j| beta[i] * l[(i, j)],
            coco_face,
        );
        let sheet = if vanilla_face + coco_face > 0.0 {
            BankSheet::new(vanilla_face, coco_face, terms, recovery)?
        } else if options.allow_pure_equity {
            BankSheet::pure_equity(terms, recovery)?
        } else {
            return Err(invalid(format!(
                "bank {} has no liabilities; enable pure-equity nodes to accept it",
                i + 1
            )));
        };
        sheets.push(sheet);
    }
    let mut pie = DMatrix::zeros(n, n + 1);
    match &options.equity_holdings {
        None => pie.column_mut(0).fill(1.0),
        Some(h) => {
            if h.nrows() != n || h.ncols() != n {
                return Err(invalid("equity holdings must be n x n"));
            }
            for i in 0..n {
                let held: f64 = h.row(i).sum();
                pie[(i, 0)] = (1.0 - held).max(0.0);
                for j in 0..n {
                    pie[(i, j + 1)] = h[(i, j)];
                }
            }
        }
    }
    Network::from_parts(
        vanilla.external_assets().to_vec(),
        sheets,
        recovery,
        pi0,
        pic,
        pie,
        options.allow_pure_equity,
    )
}

fn fill_claim_row(
    m: &mut DMatrix<f64>,
    i: usize,
    to_society: f64,
    to_bank: impl Fn(usize) -> f64,
    face: f64,
) {
    if face <= 0.0 {
        m[(i, 0)] = 1.0;
        return;
    }
    m[(i, 0)] = to_society / face;
    for j in 0..m.nrows() {
        m[(i, j + 1)] = to_bank(j) / face;
    }
}

/// A CoCo-ized system ready for clearing.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    external_assets: Vec<f64>,
    sheets: Vec<BankSheet>,
    recovery: f64,
    pi0: DMatrix<f64>,
    pic: DMatrix<f64>,
    pie: DMatrix<f64>,
}

impl Network {
    /// Assemble and validate a network from explicit claim matrices.
    pub fn from_parts(
        external_assets: Vec<f64>,
        sheets: Vec<BankSheet>,
        recovery: f64,
        pi0: DMatrix<f64>,
        pic: DMatrix<f64>,
        pie: DMatrix<f64>,
        allow_pure_equity: bool,
    ) -> Result<Self> {
        let n = external_assets.len();
        if n == 0 || sheets.len() != n {
            return Err(invalid(
                "external assets and sheets must be nonempty and of equal length",
            ));
        }
        check_unit("recovery", recovery)?;
        if let Some(i) = external_assets
            .iter()
            .position(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::NegativeAssets {
                bank: i + 1,
                value: external_assets[i],
            });
        }
        for (i, s) in sheets.iter().enumerate() {
            if s.recovery() != recovery {
                return Err(invalid(format!(
                    "bank {} uses a different recovery rate",
                    i + 1
                )));
            }
            if s.total_face() <= 0.0 && !allow_pure_equity {
                return Err(invalid(format!("bank {} has no liabilities", i + 1)));
            }
        }
        for (name, m) in [("pi0", &pi0), ("pic", &pic), ("pie", &pie)] {
            check_claims(name, m, n)?;
        }
        for i in 0..n {
            for j in 0..n {
                if pie[(i, j + 1)] >= 1.0 {
                    return Err(invalid(format!("pie[{},{}] must be < 1", i + 1, j + 1)));
                }
            }
        }
        let net = Network {
            external_assets,
            sheets,
            recovery,
            pi0,
            pic,
            pie,
        };
        net.leontief_weights()?;
        Ok(net)
    }

    pub fn n(&self) -> usize {
        self.external_assets.len()
    }

    pub fn external_assets(&self) -> &[f64] {
        &self.external_assets
    }

    pub fn sheets(&self) -> &[BankSheet] {
        &self.sheets
    }

    pub fn recovery(&self) -> f64 {
        self.recovery
    }

    pub fn pi0(&self) -> &DMatrix<f64> {
        &self.pi0
    }

    pub fn pic(&self) -> &DMatrix<f64> {
        &self.pic
    }

    pub fn pie(&self) -> &DMatrix<f64> {
        &self.pie
    }

    /// Bank-to-bank block of a claim matrix, transposed so that entry `(i, j)`
    /// is the share of bank `j`'s security held by bank `i`.
    pub(crate) fn receiver_weights(m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = m.nrows();
        m.view((0, 1), (n, n)).transpose()
    }

    /// Solve `(I − Πᵉᵀ) w = 1`; a strictly positive solution certifies that
    /// the Leontief inverse exists and is nonnegative.
    fn leontief_weights(&self) -> Result<DVector<f64>> {
        let n = self.n();
        let m = DMatrix::identity(n, n) - Self::receiver_weights(&self.pie);
        let w = m
            .lu()
            .solve(&DVector::from_element(n, 1.0))
            .ok_or(Error::SingularLeontief)?;
        if w.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(w)
        } else {
            Err(Error::SingularLeontief)
        }
    }

    /// Copy with new external assets.
    pub fn with_external_assets(&self, external_assets: Vec<f64>) -> Result<Self> {
        if external_assets.len() != self.n() {
            return Err(invalid("external asset vector has the wrong length"));
        }
        if let Some(i) = external_assets
            .iter()
            .position(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::NegativeAssets {
                bank: i + 1,
                value: external_assets[i],
            });
        }
        Ok(Network {
            external_assets,
            ..self.clone()
        })
    }

    pub fn apply_shock(&self, xi: f64) -> Result<Self> {
        check_unit("shock", xi)?;
        self.with_external_assets(
            self.external_assets
                .iter()
                .map(|x| x * (1.0 - xi))
                .collect(),
        )
    }

    /// Subtract `eps` from the external assets of each bank in `banks`
    /// (zero-based indices).
    pub fn stress_subset(&self, banks: &[usize], eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(invalid(format!("shock size must be >= 0, got {eps}")));
        }
        let mut x = self.external_assets.clone();
        for &i in banks {
            let slot = x
                .get_mut(i)
                .ok_or_else(|| invalid(format!("bank index {i} out of range")))?;
            *slot -= eps;
            if *slot < 0.0 {
                return Err(Error::NegativeAssets {
                    bank: i + 1,
                    value: *slot,
                });
            }
        }
        self.with_external_assets(x)
    }

    /// Upper corner of the box that contains every clearing vector.
    pub fn lattice_top(&self) -> Result<Vec<f64>> {
        FlowSystem::from_network(self).lattice_top()
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in [0, 1], got {v}")))
    }
}

fn check_claims(name: &str, m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n + 1 {
        return Err(invalid(format!("{name} must be {n}x{}", n + 1)));
    }
    if m.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(invalid(format!("{name} entries must lie in [0, 1]")));
    }
    for i in 0..n {
        if m[(i, i + 1)] != 0.0 {
            return Err(invalid(format!(
                "{name} has a self-claim for bank {}",
                i + 1
            )));
        }
        let sum = m.row(i).sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(invalid(format!("{name} row {} sums to {sum}", i + 1)));
        }
    }
    Ok(())
}
