//! Symmetric systems: every bank has external debt `y`, interbank debt `z`
//! spread evenly over the other `n − 1` banks, and the same external assets.
//!
//! The maximal clearing vector is then `a₊·1` for a scalar `a₊` with a
//! piecewise closed form in `x`. For strongly symmetric systems where `d`
//! banks receive a shock `ε`, the critical shocks at which the first bank and
//! all banks default are located by bisection on a two-class reduction.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::balance_sheet::{BankSheet, CocoTerms};
use crate::clearing::{ClearingConfig, Extremum, FlowSystem};
use crate::error::{invalid, Error, Result};
use crate::network::{cocoize_with, CocoizeOptions, Network, VanillaNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricParams {
    pub n: usize,
    /// External debt per bank.
    pub y: f64,
    /// Interbank debt per bank.
    pub z: f64,
    pub beta0: f64,
    pub beta: f64,
    /// Share of each bank's original equity held by the other banks together.
    pub pie: f64,
    pub terms: CocoTerms,
    pub recovery: f64,
}

/// External-asset thresholds separating the regimes of the maximal solution,
/// and the upper end `x0` of the window where a lower, defaulted solution
/// coexists with it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XBreakpoints {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub x0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Default,
    FullConversion,
    PartialConversion,
    Unconverted,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Default => "default",
            Regime::FullConversion => "full_conversion",
            Regime::PartialConversion => "partial_conversion",
            Regime::Unconverted => "unconverted",
        }
    }
}

/// Critical shock sizes; `None` when no shock up to `x` triggers the event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalEps {
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
}

impl SymmetricParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid("symmetric systems need at least two banks"));
        }
        if !(self.y >= 0.0 && self.z >= 0.0 && self.y + self.z > 0.0) {
            return Err(invalid("need y, z >= 0 and y + z > 0"));
        }
        for (name, v) in [
            ("beta", self.beta),
            ("beta0", self.beta0),
            ("recovery", self.recovery),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.pie) {
            return Err(invalid(format!("pie must lie in [0, 1), got {}", self.pie)));
        }
        Ok(())
    }

    /// Vanilla face value per bank.
    pub fn vanilla_face(&self) -> f64 {
        (1.0 - self.beta0) * self.y + (1.0 - self.beta) * self.z
    }

    /// CoCo face value per bank.
    pub fn coco_face(&self) -> f64 {
        self.beta0 * self.y + self.beta * self.z
    }

    /// Share of each bank's vanilla debt held by other banks.
    pub fn pi0(&self) -> f64 {
        ratio((1.0 - self.beta) * self.z, self.vanilla_face())
    }

    /// Share of each bank's CoCo debt held by other banks.
    pub fn pic(&self) -> f64 {
        ratio(self.beta * self.z, self.coco_face())
    }

    pub fn sheet(&self) -> Result<BankSheet> {
        BankSheet::new(
            self.vanilla_face(),
            self.coco_face(),
            self.terms,
            self.recovery,
        )
    }

    /// Combined equity share `c(a₂)πᶜ + (1 − c(a₂))πᵉ` received by other
    /// banks while the CoCo is fully converted.
    fn converted_equity_share(&self, sheet: &BankSheet) -> f64 {
        let c2 = sheet.coco_equity_fraction(sheet.breakpoints().a2);
        c2 * self.pic() + (1.0 - c2) * self.pie
    }

    /// `G(a) = (1+τ)(1−πᶜ)a + τ(πᶜ−πᵉ)(a/a₃)^{q/τ}·a`, the left-hand side of
    /// the partial-conversion fixed-point equation.
    pub fn g(&self, a: f64) -> f64 {
        let t = self.terms.trigger();
        let q = self.terms.conversion_factor();
        let a3 = (1.0 + t) * (self.y + self.z);
        let pic = self.pic();
        let power = if q == 0.0 { 1.0 } else { (a / a3).powf(q / t) };
        (1.0 + t) * (1.0 - pic) * a + t * (pic - self.pie) * power * a
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

pub fn x_breakpoints(p: &SymmetricParams) -> Result<XBreakpoints> {
    p.validate()?;
    let sheet = p.sheet()?;
    let t = p.terms.trigger();
    let x1 = (1.0 - p.beta0) * p.y;
    let k2 = p.converted_equity_share(&sheet);
    let x2 = x1 + t * (1.0 - k2) * p.vanilla_face();
    let x3 = p.y + t * (1.0 - p.pie) * (p.y + p.z);
    // a defaulted fixed point `p̄⁰x / W` stays below the default threshold
    // exactly when x < W
    let x0 = x1 + (1.0 - p.recovery) * (1.0 - p.beta) * p.z;
    Ok(XBreakpoints { x1, x2, x3, x0 })
}

/// Regime of the maximal solution at external assets `x`.
pub fn regime(p: &SymmetricParams, x: f64) -> Result<Regime> {
    let b = x_breakpoints(p)?;
    Ok(if x < b.x1 {
        Regime::Default
    } else if x < b.x2 {
        Regime::FullConversion
    } else if x < b.x3 {
        Regime::PartialConversion
    } else {
        Regime::Unconverted
    })
}

/// Defaulted fixed point `p̄⁰x / ((1−β₀)y + (1−α)(1−β)z)`.
fn defaulted_solution(p: &SymmetricParams, x: f64) -> f64 {
    let w = (1.0 - p.beta0) * p.y + (1.0 - p.recovery) * (1.0 - p.beta) * p.z;
    if w <= 0.0 {
        return x;
    }
    p.vanilla_face() * x / w
}

/// Scalar `a₊` of the maximal clearing vector `a₊·1`.
pub fn symmetric_clear(p: &SymmetricParams, x: f64) -> Result<f64> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(invalid(format!("external assets must be >= 0, got {x}")));
    }
    let b = x_breakpoints(p)?;
    let sheet = p.sheet()?;
    let bp = sheet.breakpoints();
    if x >= b.x3 {
        return Ok((x + p.z - p.pie * (p.y + p.z)) / (1.0 - p.pie));
    }
    if x >= b.x2 {
        let t = p.terms.trigger();
        let target = (1.0 + t) * (x + p.z - p.pic() * (p.y + p.z));
        return bisect_increasing(|a| p.g(a) - target, bp.a2, bp.a3);
    }
    if x >= b.x1 {
        let k2 = p.converted_equity_share(&sheet);
        return Ok((x + (1.0 - p.beta) * p.z - k2 * p.vanilla_face()) / (1.0 - k2));
    }
    Ok(defaulted_solution(p, x))
}

/// Scalar `a₋` of the minimal clearing vector.
pub fn symmetric_clear_min(p: &SymmetricParams, x: f64) -> Result<f64> {
    let b = x_breakpoints(p)?;
    if x >= b.x1 && x < b.x0 {
        Ok(defaulted_solution(p, x))
    } else {
        symmetric_clear(p, x)
    }
}

/// Root of an increasing function on `[lo, hi]`, to machine precision.
fn bisect_increasing(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    let slack = 1e-12 * hi.abs().max(1.0);
    let (flo, fhi) = (f(lo), f(hi));
    if flo > slack || fhi < -slack {
        return Err(Error::RootBracketFailure { lo, hi });
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if f(hi).abs() <= f(lo).abs() { hi } else { lo })
}

/// Explicit `n`-bank network for symmetric parameters: complete graph, equal
/// off-diagonal claims, bank-to-bank equity holdings `πᵉ/(n−1)`.
pub fn strongly_symmetric_network(p: &SymmetricParams, x: &[f64]) -> Result<Network> {
    p.validate()?;
    let n = p.n;
    if x.len() != n {
        return Err(invalid("one external asset value per bank required"));
    }
    let off = 1.0 / (n as f64 - 1.0);
    let mut l = DMatrix::from_element(n, n, p.z * off);
    l.fill_diagonal(0.0);
    let mut holdings = DMatrix::from_element(n, n, p.pie * off);
    holdings.fill_diagonal(0.0);
    let vanilla = VanillaNetwork::new(l, vec![p.y; n], x.to_vec())?;
    let opts = CocoizeOptions {
        equity_holdings: Some(holdings),
        allow_pure_equity: false,
    };
    cocoize_with(
        &vanilla,
        &vec![p.beta; n],
        &vec![p.beta0; n],
        p.terms,
        p.recovery,
        &opts,
    )
}

/// Two-node reduction: node 0 is one of the `d` stressed banks (external
/// assets `x − ε`), node 1 one of the `n − d` others.
pub fn reduced_system(p: &SymmetricParams, x: f64, d: usize, eps: f64) -> Result<FlowSystem> {
    p.validate()?;
    if d == 0 || d >= p.n {
        return Err(Error::PreconditionViolated(format!(
            "need 1 <= d < n, got d = {d}"
        )));
    }
    if eps > x {
        return Err(Error::NegativeAssets {
            bank: 1,
            value: x - eps,
        });
    }
    let m = p.n as f64 - 1.0;
    let d = d as f64;
    let share = |pi: f64| {
        DMatrix::from_row_slice(
            2,
            2,
            &[
                (d - 1.0) / m * pi,
                (p.n as f64 - d) / m * pi,
                d / m * pi,
                (p.n as f64 - d - 1.0) / m * pi,
            ],
        )
    };
    let sheet = p.sheet()?;
    FlowSystem::new(
        vec![x - eps, x],
        vec![sheet, sheet],
        share(p.pi0()),
        share(p.pic()),
        share(p.pie),
    )
}

/// Maximal clearing assets `(stressed, unstressed)` of the reduced system.
pub fn reduced_clear(
    p: &SymmetricParams,
    x: f64,
    d: usize,
    eps: f64,
    cfg: &ClearingConfig,
) -> Result<[f64; 2]> {
    let sol = reduced_system(p, x, d, eps)?.solve(Extremum::Maximal, cfg)?;
    Ok([sol.assets[0], sol.assets[1]])
}

/// Smallest shocks to `d` of the banks making, respectively, one of them and
/// all banks default in the maximal clearing solution.
pub fn critical_epsilons(
    p: &SymmetricParams,
    x: f64,
    d: usize,
    cfg: &ClearingConfig,
) -> Result<CriticalEps> {
    p.validate()?;
    if d == 0 || d >= p.n {
        return Err(Error::PreconditionViolated(format!(
            "need 1 <= d < n, got d = {d}"
        )));
    }
    let x1 = (1.0 - p.beta0) * p.y;
    if x < x1 {
        return Err(Error::PreconditionViolated(format!(
            "external assets {x} below the default threshold {x1}"
        )));
    }
    let a1 = p.vanilla_face();
    let stressed = |eps: f64| -> Result<bool> { Ok(reduced_clear(p, x, d, eps, cfg)?[0] < a1) };
    let everyone = |eps: f64| -> Result<bool> { Ok(reduced_clear(p, x, d, eps, cfg)?[1] < a1) };
    Ok(CriticalEps {
        eps1: threshold(stressed, x)?,
        eps2: threshold(everyone, x)?,
    })
}

/// `inf{ε ∈ [0, x] : event(ε)}` for an event monotone in `ε`.
fn threshold(event: impl Fn(f64) -> Result<bool>, x: f64) -> Result<Option<f64>> {
    if !event(x)? {
        return Ok(None);
    }
    if event(0.0)? {
        return Ok(Some(0.0));
    }
    let (mut lo, mut hi) = (0.0, x);
    while hi - lo > 1e-12 * x.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if event(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// System-wide default threshold from the two linear equations that hold
/// when the stressed banks are in default and the others sit exactly at
/// their default boundary. `None` outside that regime.
pub fn eps2_closed_form(p: &SymmetricParams, x: f64, d: usize) -> Option<f64> {
    p.validate().ok()?;
    let alpha = p.recovery;
    if !(alpha > 0.0 && alpha < 1.0) || p.z <= 0.0 || p.beta >= 1.0 || d == 0 || d >= p.n {
        return None;
    }
    let x1 = (1.0 - p.beta0) * p.y;
    if x <= x1 {
        return None;
    }
    let m = p.n as f64 - 1.0;
    let d = d as f64;
    let pi0 = p.pi0();
    let vs = m * (x1 - x) / (d * pi0);
    if vs >= 0.0 {
        return None;
    }
    let eps =
        x + (d - 1.0) / m * pi0 * vs - (vs + x1 + (1.0 - alpha) * (1.0 - p.beta) * p.z) / alpha;
    (0.0..=x).contains(&eps).then_some(eps)
}

/// First-default threshold when the unstressed banks stay unconverted.
/// `None` when the parameters fall outside that regime.
pub fn eps1_unconverted_closed_form(p: &SymmetricParams, x: f64, d: usize) -> Option<f64> {
    p.validate().ok()?;
    if d == 0 || d >= p.n {
        return None;
    }
    let m = p.n as f64 - 1.0;
    let d = d as f64;
    let k = (p.n as f64 - d - 1.0) / m;
    let denom = 1.0 - k * p.pie;
    let vn = (x - p.y - d / m * p.beta * p.z) / denom;
    if vn < p.terms.trigger() * (p.y + p.z) {
        return None;
    }
    let paid = (p.z + p.pie * (x + d / m * (1.0 - p.beta) * p.z - p.y - p.z)) / denom;
    let w = (p.n as f64 - d) / m;
    let eps = x + w * paid - (1.0 - p.beta0) * p.y - w * (1.0 - p.beta) * p.z;
    (0.0..=x).contains(&eps).then_some(eps)
}
