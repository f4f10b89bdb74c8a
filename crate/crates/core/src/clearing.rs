//! Fixed-point clearing.
//!
//! The engine works on a [`FlowSystem`]: external assets, one [`BankSheet`]
//! per node and three nonnegative weight matrices saying how much of each
//! payer's vanilla, CoCo and equity tranche lands on each receiver. A
//! [`Network`] maps onto a flow system through the transposed bank block of
//! its claim matrices; reduced symmetric systems map onto small ones.
//!
//! Extremal fixed points are found by monotone Picard iteration from the top
//! of the lattice (maximal) or from zero (minimal). Once the regime pattern of
//! the iterate settles, a Newton step on the active pieces is attempted. Its
//! result is only accepted when it is a fixed point to tolerance, lies on the
//! correct side of the current iterate, and an upper bound of the Jacobian
//! over the box between them has spectral radius below one, which rules out
//! any other fixed point in that box.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::balance_sheet::{BankSheet, Piece, Tranches};
use crate::error::{invalid, Error, Result};
use crate::network::Network;

/// Stopping rule for the clearing iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClearingConfig {
    /// Bound on `‖A − Φ(A)‖∞` relative to the system scale
    /// (largest face value or external asset).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ClearingConfig {
    fn default() -> Self {
        ClearingConfig {
            tol: 1e-10,
            max_iter: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Maximal,
    Minimal,
}

/// Clearing vector of a [`Network`] and the quantities derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearingResult {
    pub assets: Vec<f64>,
    pub lambda: Vec<f64>,
    pub equity: Vec<f64>,
    pub coco_fraction: Vec<f64>,
    pub defaults: Vec<bool>,
    pub society_value: f64,
    pub iterations: usize,
    /// Scaled sup-norm residual, see [`ClearingConfig::tol`].
    pub residual: f64,
    pub extremum: Extremum,
}

impl ClearingResult {
    pub fn default_count(&self) -> usize {
        self.defaults.iter().filter(|d| **d).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskMeasures {
    /// Debt payments plus converted equity received by society, over the
    /// pre-conversion face value society is owed.
    pub external_repayment_fraction: f64,
    /// Value left to the original shareholders of all banks.
    pub original_shareholder_value: f64,
    pub default_count: usize,
}

/// Fixed point of a flow system together with convergence metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub assets: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Generic clearing system `Φ(a) = x + W⁰·vanilla(a) + Wᶜ·coco(a) + Wᵉ·equity(a)`.
#[derive(Debug, Clone)]
pub struct FlowSystem {
    x: DVector<f64>,
    sheets: Vec<BankSheet>,
    w0: DMatrix<f64>,
    wc: DMatrix<f64>,
    we: DMatrix<f64>,
    scale: f64,
}

impl FlowSystem {
    /// Weight matrices are indexed `(receiver, payer)`.
    pub fn new(
        x: Vec<f64>,
        sheets: Vec<BankSheet>,
        w0: DMatrix<f64>,
        wc: DMatrix<f64>,
        we: DMatrix<f64>,
    ) -> Result<Self> {
        let n = x.len();
        if sheets.len() != n {
            return Err(invalid("one sheet per node required"));
        }
        for m in [&w0, &wc, &we] {
            if m.nrows() != n || m.ncols() != n {
                return Err(invalid("weight matrices must be n x n"));
            }
            if m.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(invalid("weights must be finite and nonnegative"));
            }
        }
        if x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("external assets must be finite and nonnegative"));
        }
        Ok(Self::assemble(x, sheets, w0, wc, we))
    }

    fn assemble(
        x: Vec<f64>,
        sheets: Vec<BankSheet>,
        w0: DMatrix<f64>,
        wc: DMatrix<f64>,
        we: DMatrix<f64>,
    ) -> Self {
        let face = sheets.iter().map(|s| s.total_face()).fold(0.0, f64::max);
        let assets = x.iter().copied().fold(0.0, f64::max);
        let scale = face.max(assets);
        FlowSystem {
            x: DVector::from_vec(x),
            sheets,
            w0,
            wc,
            we,
            scale: if scale > 0.0 { scale } else { 1.0 },
        }
    }

    pub fn from_network(net: &Network) -> Self {
        Self::assemble(
            net.external_assets().to_vec(),
            net.sheets().to_vec(),
            Network::receiver_weights(net.pi0()),
            Network::receiver_weights(net.pic()),
            Network::receiver_weights(net.pie()),
        )
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn sheets(&self) -> &[BankSheet] {
        &self.sheets
    }

    /// Magnitude used to normalise residuals.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn tranche_vectors(&self, a: &[f64]) -> [DVector<f64>; 3] {
        let n = self.n();
        let mut v = DVector::zeros(n);
        let mut c = DVector::zeros(n);
        let mut e = DVector::zeros(n);
        for (i, (s, &ai)) in self.sheets.iter().zip(a).enumerate() {
            let t = s.tranche_values(ai);
            v[i] = t.vanilla;
            c[i] = t.coco;
            e[i] = t.original_equity;
        }
        [v, c, e]
    }

    pub fn phi(&self, a: &[f64]) -> Vec<f64> {
        let [v, c, e] = self.tranche_vectors(a);
        let out = &self.x + &self.w0 * v + &self.wc * c + &self.we * e;
        out.iter().copied().collect()
    }

    /// `‖a − Φ(a)‖∞ / scale`.
    pub fn residual(&self, a: &[f64]) -> f64 {
        self.gap(a, &self.phi(a))
    }

    fn gap(&self, a: &[f64], f: &[f64]) -> f64 {
        a.iter()
            .zip(f)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
            / self.scale
    }

    /// Upper corner of the box containing every fixed point.
    pub fn lattice_top(&self) -> Result<Vec<f64>> {
        let n = self.n();
        let p0 = DVector::from_iterator(n, self.sheets.iter().map(|s| s.vanilla_face()));
        let pc = DVector::from_iterator(n, self.sheets.iter().map(|s| s.coco_face()));
        let mut rhs = &self.x + &self.w0 * &p0 + &self.wc * &pc - &self.we * (&p0 + &pc);
        for (r, s) in rhs.iter_mut().zip(&self.sheets) {
            *r = r.max(s.breakpoints().a3);
        }
        let m = DMatrix::identity(n, n) - &self.we;
        let top = m.lu().solve(&rhs).ok_or(Error::SingularLeontief)?;
        if top.iter().any(|t| !t.is_finite()) {
            return Err(Error::SingularLeontief);
        }
        Ok(top
            .iter()
            .zip(&self.sheets)
            .map(|(t, s)| t.max(s.breakpoints().a3))
            .collect())
    }

    fn pattern(&self, a: &[f64]) -> Vec<Piece> {
        self.sheets
            .iter()
            .zip(a)
            .map(|(s, &ai)| s.piece(ai))
            .collect()
    }

    fn weighted(&self, marginals: impl Iterator<Item = Tranches>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.n(), self.n());
        for (col, m) in marginals.enumerate() {
            for row in 0..self.n() {
                j[(row, col)] = self.w0[(row, col)] * m.vanilla
                    + self.wc[(row, col)] * m.coco
                    + self.we[(row, col)] * m.original_equity;
            }
        }
        j
    }

    fn jacobian(&self, a: &[f64]) -> DMatrix<f64> {
        self.weighted(self.sheets.iter().zip(a).map(|(s, &ai)| s.marginals(ai)))
    }

    fn jacobian_bound(&self, lo: &[f64], hi: &[f64]) -> DMatrix<f64> {
        self.weighted(
            self.sheets
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(s, (&l, &h))| s.marginals_between(l, h)),
        )
    }

    /// Unclamped Picard iterates, starting point included.
    pub fn picard_trace(&self, start: &[f64], steps: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(steps + 1);
        let mut a = start.to_vec();
        out.push(a.clone());
        for _ in 0..steps {
            a = self.phi(&a);
            out.push(a.clone());
        }
        out
    }

    /// Maximal or minimal fixed point.
    pub fn solve(&self, extremum: Extremum, cfg: &ClearingConfig) -> Result<Solution> {
        if !(cfg.tol > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        let mut a = match extremum {
            Extremum::Maximal => self.lattice_top()?,
            Extremum::Minimal => vec![0.0; self.n()],
        };
        let mut pattern = self.pattern(&a);
        let mut stable = 0usize;
        let mut next_try = 0usize;
        let mut backoff = 4usize;
        for iter in 0..=cfg.max_iter {
            let f = self.phi(&a);
            let res = self.gap(&a, &f);
            if res <= cfg.tol {
                return Ok(Solution {
                    assets: a,
                    iterations: iter,
                    residual: res,
                });
            }
            if iter == cfg.max_iter {
                return Err(Error::NoConvergence {
                    iterations: iter,
                    residual: res,
                    last: a,
                });
            }
            if stable >= 2 && iter >= next_try {
                if let Some(s) = self.finish(&a, extremum, cfg.tol) {
                    let residual = self.residual(&s);
                    return Ok(Solution {
                        assets: s,
                        iterations: iter + 1,
                        residual,
                    });
                }
                next_try = iter + backoff;
                backoff = (backoff * 2).min(4096);
            }
            // Clamping only removes rounding noise: Φ is monotone, so the
            // exact iterates already move in this direction.
            let next: Vec<f64> = a
                .iter()
                .zip(&f)
                .map(|(&ai, &fi)| match extremum {
                    Extremum::Maximal => fi.min(ai),
                    Extremum::Minimal => fi.max(ai),
                })
                .collect();
            let p = self.pattern(&next);
            if p == pattern {
                stable += 1;
            } else {
                pattern = p;
                stable = 0;
                next_try = 0;
                backoff = 4;
            }
            a = next;
        }
        unreachable!("loop returns on its last pass")
    }

    /// Newton on the current regime pattern, accepted only with a uniqueness
    /// certificate for the box between the candidate and the iterate.
    fn finish(&self, a: &[f64], extremum: Extremum, tol: f64) -> Option<Vec<f64>> {
        let n = self.n();
        let pattern = self.pattern(a);
        let identity = DMatrix::<f64>::identity(n, n);
        let mut s = a.to_vec();
        for _ in 0..64 {
            let f = self.phi(&s);
            if self.gap(&s, &f) <= 0.25 * tol {
                break;
            }
            let r = DVector::from_iterator(n, f.iter().zip(&s).map(|(fi, si)| fi - si));
            let delta = (&identity - self.jacobian(&s)).lu().solve(&r)?;
            for (si, d) in s.iter_mut().zip(delta.iter()) {
                *si += d;
            }
            if s.iter().any(|v| !v.is_finite()) || self.pattern(&s) != pattern {
                return None;
            }
        }
        let slack = 1e-13 * self.scale;
        for (si, &ai) in s.iter_mut().zip(a) {
            let outside = match extremum {
                Extremum::Maximal => *si > ai,
                Extremum::Minimal => *si < ai,
            };
            if outside {
                if (*si - ai).abs() > slack {
                    return None;
                }
                *si = ai;
            }
            if *si < 0.0 {
                return None;
            }
        }
        if self.pattern(&s) != pattern || self.residual(&s) > tol {
            return None;
        }
        let (lo, hi) = match extremum {
            Extremum::Maximal => (&s[..], a),
            Extremum::Minimal => (a, &s[..]),
        };
        let bound = self.jacobian_bound(lo, hi);
        let w = (&identity - bound)
            .lu()
            .solve(&DVector::from_element(n, 1.0))?;
        if w.iter().all(|v| v.is_finite() && *v > 0.0) {
            Some(s)
        } else {
            None
        }
    }
}

/// `Φ(a)` for a network.
pub fn phi(net: &Network, a: &[f64]) -> Vec<f64> {
    FlowSystem::from_network(net).phi(a)
}

/// Raw Picard iterates from `start` (for inspecting monotonicity).
pub fn picard_trace(net: &Network, start: &[f64], steps: usize) -> Vec<Vec<f64>> {
    FlowSystem::from_network(net).picard_trace(start, steps)
}

pub fn clear_max(net: &Network, cfg: &ClearingConfig) -> Result<ClearingResult> {
    clear(net, Extremum::Maximal, cfg)
}

pub fn clear_min(net: &Network, cfg: &ClearingConfig) -> Result<ClearingResult> {
    clear(net, Extremum::Minimal, cfg)
}

pub fn clear(net: &Network, extremum: Extremum, cfg: &ClearingConfig) -> Result<ClearingResult> {
    let sol = FlowSystem::from_network(net).solve(extremum, cfg)?;
    Ok(describe(net, sol, extremum))
}

fn describe(net: &Network, sol: Solution, extremum: Extremum) -> ClearingResult {
    let sheets = net.sheets();
    let a = &sol.assets;
    let society_value = society_receipts(net, a).total();
    ClearingResult {
        lambda: sheets
            .iter()
            .zip(a)
            .map(|(s, &x)| s.conversion_fraction(x))
            .collect(),
        equity: sheets.iter().zip(a).map(|(s, &x)| s.equity(x)).collect(),
        coco_fraction: sheets
            .iter()
            .zip(a)
            .map(|(s, &x)| s.coco_equity_fraction(x))
            .collect(),
        defaults: sheets
            .iter()
            .zip(a)
            .map(|(s, &x)| s.is_default(x))
            .collect(),
        society_value,
        iterations: sol.iterations,
        residual: sol.residual,
        extremum,
        assets: sol.assets,
    }
}

/// What society receives from each security class at asset vector `a`.
fn society_receipts(net: &Network, a: &[f64]) -> Tranches {
    let mut out = Tranches::default();
    for (i, (s, &ai)) in net.sheets().iter().zip(a).enumerate() {
        let t = s.tranche_values(ai);
        out.vanilla += net.pi0()[(i, 0)] * t.vanilla;
        out.coco += net.pic()[(i, 0)] * t.coco;
        out.original_equity += net.pie()[(i, 0)] * t.original_equity;
    }
    out
}

pub fn risk_measures(net: &Network, r: &ClearingResult) -> Result<RiskMeasures> {
    let owed: f64 = net
        .sheets()
        .iter()
        .enumerate()
        .map(|(i, s)| net.pi0()[(i, 0)] * s.vanilla_face() + net.pic()[(i, 0)] * s.coco_face())
        .sum();
    if owed <= 0.0 {
        return Err(Error::DivisionByZero);
    }
    let received = society_receipts(net, &r.assets);
    let original_shareholder_value = net
        .sheets()
        .iter()
        .zip(&r.assets)
        .map(|(s, &a)| s.tranche_values(a).original_equity)
        .sum();
    Ok(RiskMeasures {
        external_repayment_fraction: (received.vanilla + received.coco) / owed,
        original_shareholder_value,
        default_count: r.default_count(),
    })
}

/// `|A₀ − Σxᵢ|`. Zero up to rounding when recovery is full; with bankruptcy
/// costs it measures the value destroyed by defaults.
pub fn conservation_check(net: &Network, r: &ClearingResult) -> f64 {
    let total: f64 = net.external_assets().iter().sum();
    (r.society_value - total).abs()
}

/// Whether the maximal and minimal clearing vectors agree to `tol`, under
/// the hypotheses that guarantee uniqueness: full recovery, and every bank
/// owes society vanilla debt and is partly owned by society.
pub fn assert_unique(net: &Network, cfg: &ClearingConfig, tol: f64) -> Result<bool> {
    if net.recovery() != 1.0 {
        return Err(Error::PreconditionViolated("recovery must be 1".into()));
    }
    for (i, s) in net.sheets().iter().enumerate() {
        if net.pi0()[(i, 0)] * s.vanilla_face() <= 0.0 {
            return Err(Error::PreconditionViolated(format!(
                "bank {} owes no vanilla debt to society",
                i + 1
            )));
        }
        if net.pie()[(i, 0)] <= 0.0 {
            return Err(Error::PreconditionViolated(format!(
                "society holds none of bank {}'s equity",
                i + 1
            )));
        }
    }
    extremes_agree(net, cfg, tol)
}

/// Compare both extremal clearing vectors without checking any hypotheses.
pub fn extremes_agree(net: &Network, cfg: &ClearingConfig, tol: f64) -> Result<bool> {
    let hi = clear_max(net, cfg)?;
    let lo = clear_min(net, cfg)?;
    let gap = hi
        .assets
        .iter()
        .zip(&lo.assets)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(gap <= tol)
}

/// Maximal clearing solved in equity coordinates: iterate
/// `V ↦ E(x + W·T(V))` from the equity of the lattice top, then map back to
/// total assets.
pub fn clear_equity_domain(net: &Network, cfg: &ClearingConfig) -> Result<Vec<f64>> {
    let sys = FlowSystem::from_network(net);
    let sheets = net.sheets();
    let n = net.n();
    let inflow = |v: &[f64]| -> Vec<f64> {
        let mut van = DVector::zeros(n);
        let mut coco = DVector::zeros(n);
        let mut eq = DVector::zeros(n);
        for (i, (s, &vi)) in sheets.iter().zip(v).enumerate() {
            let t = s.equity_domain_tranches(vi);
            van[i] = t.vanilla;
            coco[i] = t.coco;
            eq[i] = t.original_equity;
        }
        (&sys.x + &sys.w0 * van + &sys.wc * coco + &sys.we * eq)
            .iter()
            .copied()
            .collect()
    };
    let top = sys.lattice_top()?;
    let mut v: Vec<f64> = sheets.iter().zip(&top).map(|(s, &a)| s.equity(a)).collect();
    for iter in 0..=cfg.max_iter {
        let a = inflow(&v);
        let next: Vec<f64> = sheets
            .iter()
            .zip(&a)
            .zip(&v)
            .map(|((s, &ai), &vi)| s.equity(ai).min(vi))
            .collect();
        let res = sys.gap(&v, &next);
        v = next;
        if res <= cfg.tol {
            return Ok(inflow(&v));
        }
        if iter == cfg.max_iter {
            return Err(Error::NoConvergence {
                iterations: iter,
                residual: res,
                last: v,
            });
        }
    }
    unreachable!("loop returns on its last pass")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance_sheet::CocoTerms;
    use crate::network::{cocoize, cocoize_with, CocoizeOptions, Scenario, Scheme, VanillaNetwork};
    use approx::assert_relative_eq;

    fn two_bank(beta1: f64) -> Network {
        let v = VanillaNetwork::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 10.0, 5.0, 0.0]),
            vec![0.0, 5.0],
            vec![6.0, 1.0],
        )
        .unwrap();
        cocoize_with(
            &v,
            &[beta1, 0.0],
            &[beta1, 0.0],
            CocoTerms::new(1.0, 1.0).unwrap(),
            0.0,
            &CocoizeOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn phi_fixed_points_of_two_bank() {
        let a = phi(&two_bank(0.05), &[11.0, 10.575]);
        assert_relative_eq!(a[0], 11.0, max_relative = 1e-14);
        assert_relative_eq!(a[1], 10.575, max_relative = 1e-14);
        let a = phi(&two_bank(0.5), &[6.0, 6.5]);
        assert_relative_eq!(a[0], 6.0, max_relative = 1e-14);
        assert_relative_eq!(a[1], 6.5, max_relative = 1e-14);
    }

    #[test]
    fn clear_max_two_bank_branches() {
        let cfg = ClearingConfig::default();
        let r = clear_max(&two_bank(0.0), &cfg).unwrap();
        assert_relative_eq!(r.assets[0], 11.0, max_relative = 1e-10);
        assert_relative_eq!(r.assets[1], 11.0, max_relative = 1e-10);
        assert_eq!(r.default_count(), 0);

        let r = clear_max(&two_bank(0.2), &cfg).unwrap();
        assert_eq!(r.defaults, vec![true, true]);
        assert_relative_eq!(r.assets[1], 1.0, max_relative = 1e-10);

        let r = clear_max(&two_bank(0.5), &cfg).unwrap();
        assert_eq!(r.defaults, vec![false, true]);
        assert_relative_eq!(r.assets[0], 6.0, max_relative = 1e-10);
        assert_relative_eq!(r.assets[1], 6.5, max_relative = 1e-10);
    }

    #[test]
    fn clear_min_two_bank() {
        let cfg = ClearingConfig::default();
        // without recovery, both banks defaulting on external assets alone is
        // self-consistent, below the solvent maximal solution
        let lo = clear_min(&two_bank(0.0), &cfg).unwrap();
        assert_eq!(lo.assets, vec![6.0, 1.0]);
        assert_eq!(lo.defaults, vec![true, true]);
        assert_eq!(lo.extremum, Extremum::Minimal);
        assert_eq!(phi(&two_bank(0.0), &lo.assets), lo.assets);

        let unique = two_bank(0.0)
            .with_external_assets(vec![16.0, 11.0])
            .unwrap();
        let hi = clear_max(&unique, &cfg).unwrap();
        let lo = clear_min(&unique, &cfg).unwrap();
        for (a, b) in hi.assets.iter().zip(&lo.assets) {
            assert_relative_eq!(*a, *b, max_relative = 1e-9);
        }
    }

    #[test]
    fn pure_equity_network_returns_external_assets() {
        let v =
            VanillaNetwork::new(DMatrix::zeros(3, 3), vec![0.0; 3], vec![1.0, 2.0, 3.0]).unwrap();
        let opts = CocoizeOptions {
            allow_pure_equity: true,
            ..Default::default()
        };
        let net = cocoize_with(
            &v,
            &[0.0; 3],
            &[0.0; 3],
            CocoTerms::new(0.1, 1.0).unwrap(),
            0.5,
            &opts,
        )
        .unwrap();
        assert_eq!(phi(&net, &[7.0, 8.0, 9.0]), vec![1.0, 2.0, 3.0]);
        let r = clear_max(&net, &ClearingConfig::default()).unwrap();
        assert_eq!(r.assets, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn risk_measures_on_solvent_network() {
        let net = two_bank(0.0)
            .with_external_assets(vec![60.0, 60.0])
            .unwrap();
        let r = clear_max(&net, &ClearingConfig::default()).unwrap();
        let m = risk_measures(&net, &r).unwrap();
        assert_eq!(m.default_count, 0);
        assert_relative_eq!(m.external_repayment_fraction, 1.0, max_relative = 1e-14);
        assert!(m.original_shareholder_value > 0.0);
    }

    #[test]
    fn repayment_fraction_undefined_without_external_debt() {
        let v = VanillaNetwork::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            vec![0.0, 0.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let net = cocoize(&v, &Scenario::default()).unwrap();
        let r = clear_max(&net, &ClearingConfig::default()).unwrap();
        assert!(matches!(
            risk_measures(&net, &r),
            Err(Error::DivisionByZero)
        ));
    }

    #[test]
    fn conservation_with_full_recovery_and_loss_without() {
        let v = VanillaNetwork::new(
            DMatrix::from_row_slice(3, 3, &[0.0, 4.0, 2.0, 3.0, 0.0, 3.0, 1.0, 5.0, 0.0]),
            vec![5.0, 3.0, 4.0],
            vec![4.0, 2.0, 9.0],
        )
        .unwrap();
        let full = Scenario {
            recovery: 1.0,
            trigger: 0.1,
            ..Scenario::default()
        }
        .with_scheme(Scheme::Interbank, 0.3);
        let net = cocoize(&v, &full).unwrap();
        let r = clear_max(&net, &ClearingConfig::default()).unwrap();
        assert!(r.default_count() > 0);
        assert!(conservation_check(&net, &r) <= 1e-9 * 15.0);

        let lossy = Scenario {
            recovery: 0.0,
            ..full
        };
        let net = cocoize(&v, &lossy).unwrap();
        let r = clear_max(&net, &ClearingConfig::default()).unwrap();
        assert!(r.default_count() > 0);
        assert!(15.0 - r.society_value > 1e-3);
    }

    #[test]
    fn uniqueness_preconditions_enforced() {
        let cfg = ClearingConfig::default();
        assert!(matches!(
            assert_unique(&two_bank(0.2), &cfg, 1e-8),
            Err(Error::PreconditionViolated(_))
        ));
        // bank 1 owes nothing to society
        let v = VanillaNetwork::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 10.0, 5.0, 0.0]),
            vec![0.0, 5.0],
            vec![6.0, 1.0],
        )
        .unwrap();
        let net = cocoize(
            &v,
            &Scenario {
                recovery: 1.0,
                ..Scenario::default()
            },
        )
        .unwrap();
        assert!(assert_unique(&net, &cfg, 1e-8).is_err());
        assert!(extremes_agree(&net, &cfg, 1e-8).is_ok());
    }

    #[test]
    fn no_convergence_carries_last_iterate() {
        let cfg = ClearingConfig {
            tol: 1e-15,
            max_iter: 1,
        };
        let v = VanillaNetwork::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 9.0, 9.0, 0.0]),
            vec![1.0, 1.0],
            vec![0.5, 0.5],
        )
        .unwrap();
        let net = cocoize(
            &v,
            &Scenario {
                recovery: 0.999,
                ..Scenario::default()
            },
        )
        .unwrap();
        match clear_min(&net, &cfg) {
            Err(Error::NoConvergence {
                iterations, last, ..
            }) => {
                assert_eq!(iterations, 1);
                assert_eq!(last.len(), 2);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn equity_domain_agrees_with_asset_domain() {
        let v = VanillaNetwork::new(
            DMatrix::from_row_slice(3, 3, &[0.0, 4.0, 2.0, 3.0, 0.0, 3.0, 1.0, 5.0, 0.0]),
            vec![5.0, 3.0, 4.0],
            vec![14.0, 12.0, 19.0],
        )
        .unwrap();
        let h = DMatrix::from_row_slice(3, 3, &[0.0, 0.2, 0.1, 0.1, 0.0, 0.3, 0.2, 0.2, 0.0]);
        let opts = CocoizeOptions {
            equity_holdings: Some(h),
            ..Default::default()
        };
        let net = cocoize_with(
            &v,
            &[0.4; 3],
            &[0.2; 3],
            CocoTerms::new(0.5, 0.7).unwrap(),
            0.5,
            &opts,
        )
        .unwrap();
        let cfg = ClearingConfig::default();
        let r = clear_max(&net, &cfg).unwrap();
        let a = clear_equity_domain(&net, &cfg).unwrap();
        for (x, y) in a.iter().zip(&r.assets) {
            assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
        }
    }
}
