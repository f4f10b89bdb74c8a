//! Reconstruction of an interbank liability matrix from per-bank aggregates.
//!
//! Balance-sheet identities turn each record into row and column sums of
//! the liability matrix plus external assets and liabilities. A matrix with
//! those marginals is then produced either by iterative proportional fitting
//! or by a Gibbs sampler over sparse matrices with exponential weights.

use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::network::VanillaNetwork;

/// Aggregate balance-sheet data of one bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbaRecord {
    pub bank_id: String,
    pub total_assets: f64,
    pub capital: f64,
    #[serde(rename = "interbank_liabilities")]
    pub interbank_liab_total: f64,
    /// Reported interbank assets; when absent they are taken equal to the
    /// interbank liabilities.
    #[serde(default)]
    pub interbank_assets: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginals {
    pub bank_ids: Vec<String>,
    /// Interbank liabilities per bank.
    pub row_sums: Vec<f64>,
    /// Interbank assets per bank.
    pub col_sums: Vec<f64>,
    pub external_assets: Vec<f64>,
    pub external_liab: Vec<f64>,
}

impl Marginals {
    pub fn n(&self) -> usize {
        self.row_sums.len()
    }

    fn imbalance(&self) -> f64 {
        let rows: f64 = self.row_sums.iter().sum();
        let cols: f64 = self.col_sums.iter().sum();
        if rows == 0.0 && cols == 0.0 {
            0.0
        } else {
            (rows - cols).abs() / rows.max(cols)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Edge probability of the random-graph prior.
    pub density_p: f64,
    /// Rate of the exponential edge weights; `None` picks
    /// `p·n(n−1) / total interbank liabilities`, matching the mean edge weight.
    pub weight_rate: Option<f64>,
    pub thinning: u64,
    pub burn_in: u64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            density_p: 0.5,
            weight_rate: None,
            thinning: 10_000,
            burn_in: 1_000_000,
            seed: 2011,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Gibbs,
    Ipfp,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gibbs" => Ok(Method::Gibbs),
            "ipfp" => Ok(Method::Ipfp),
            other => Err(invalid(format!("unknown calibration method '{other}'"))),
        }
    }
}

/// Calibration settings, read from a flat TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub exclude: Vec<String>,
    pub method: Method,
    /// Largest relative gap between total interbank assets and liabilities
    /// that may be closed by rescaling.
    pub imbalance_tolerance: f64,
    pub density_p: f64,
    pub weight_rate: Option<f64>,
    pub thinning: u64,
    pub burn_in: u64,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        let s = SamplerConfig::default();
        CalibrationConfig {
            exclude: ["DE029", "LU45", "SI058"].map(String::from).to_vec(),
            method: Method::Gibbs,
            imbalance_tolerance: 1e-3,
            density_p: s.density_p,
            weight_rate: s.weight_rate,
            thinning: s.thinning,
            burn_in: s.burn_in,
            seed: s.seed,
        }
    }
}

impl CalibrationConfig {
    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            density_p: self.density_p,
            weight_rate: self.weight_rate,
            thinning: self.thinning,
            burn_in: self.burn_in,
            seed: self.seed,
        }
    }
}

/// Row/column sums and external positions implied by the records, skipping
/// any bank whose id appears in `exclude`.
pub fn marginals_from_eba(records: &[EbaRecord], exclude: &[String]) -> Result<Marginals> {
    let kept: Vec<&EbaRecord> = records
        .iter()
        .filter(|r| !exclude.contains(&r.bank_id))
        .collect();
    if kept.is_empty() {
        return Err(invalid("no bank records left after exclusions"));
    }
    let mut m = Marginals {
        bank_ids: Vec::with_capacity(kept.len()),
        row_sums: Vec::with_capacity(kept.len()),
        col_sums: Vec::with_capacity(kept.len()),
        external_assets: Vec::with_capacity(kept.len()),
        external_liab: Vec::with_capacity(kept.len()),
    };
    for r in kept {
        let negative = |what: &'static str, value: f64| Error::NegativeBalance {
            id: r.bank_id.clone(),
            what,
            value,
        };
        for (what, v) in [
            ("total assets", r.total_assets),
            ("capital", r.capital),
            ("interbank liabilities", r.interbank_liab_total),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(negative(what, v));
            }
        }
        let col = r.interbank_assets.unwrap_or(r.interbank_liab_total);
        let x = r.total_assets - col;
        let l0 = r.total_assets - r.interbank_liab_total - r.capital;
        if col < 0.0 {
            return Err(negative("interbank assets", col));
        }
        if x < 0.0 {
            return Err(negative("external assets", x));
        }
        if l0 < 0.0 {
            return Err(negative("external liabilities", l0));
        }
        m.bank_ids.push(r.bank_id.clone());
        m.row_sums.push(r.interbank_liab_total);
        m.col_sums.push(col);
        m.external_assets.push(x);
        m.external_liab.push(l0);
    }
    Ok(m)
}

/// Rescale interbank assets so their total equals total interbank
/// liabilities, moving the difference into external assets (total assets
/// are unchanged). Returns the balanced marginals and the largest relative
/// change of any bank's interbank assets.
pub fn perturb_to_balance(m: &Marginals, eps_scale: f64) -> Result<(Marginals, f64)> {
    let relative = m.imbalance();
    if relative > eps_scale {
        return Err(Error::ImbalanceTooLarge {
            relative,
            allowed: eps_scale,
        });
    }
    let rows: f64 = m.row_sums.iter().sum();
    let cols: f64 = m.col_sums.iter().sum();
    if cols == 0.0 || rows == cols {
        return Ok((m.clone(), 0.0));
    }
    let factor = rows / cols;
    let mut out = m.clone();
    for i in 0..m.n() {
        let col = m.col_sums[i] * factor;
        let x = m.external_assets[i] + m.col_sums[i] - col;
        if x < 0.0 {
            return Err(Error::NegativeBalance {
                id: m.bank_ids[i].clone(),
                what: "external assets",
                value: x,
            });
        }
        out.col_sums[i] = col;
        out.external_assets[i] = x;
    }
    Ok((out, (factor - 1.0).abs()))
}

const IPFP_TOL: f64 = 1e-8;
const IPFP_MAX_ITER: usize = 100_000;

/// Deterministic fit: iterative proportional fitting from the rank-one seed
/// `rᵢcⱼ/total` with a zero diagonal.
pub fn ipfp_matrix(m: &Marginals) -> Result<DMatrix<f64>> {
    let n = m.n();
    let total: f64 = m.row_sums.iter().sum();
    let mut l = DMatrix::zeros(n, n);
    if total <= 0.0 {
        return Ok(l);
    }
    for i in 0..n {
        for j in 0..n {
            if i != j {
                l[(i, j)] = m.row_sums[i] * m.col_sums[j] / total;
            }
        }
    }
    let floor = 1e-12 * total;
    let mut err = f64::INFINITY;
    for _ in 0..IPFP_MAX_ITER {
        scale_rows(&mut l, &m.row_sums);
        scale_cols(&mut l, &m.col_sums);
        err = marginal_error(&l, m, floor);
        if err <= IPFP_TOL {
            return Ok(l);
        }
    }
    Err(Error::NoConvergence {
        iterations: IPFP_MAX_ITER,
        residual: err,
        last: l.iter().copied().collect(),
    })
}

fn scale_rows(l: &mut DMatrix<f64>, targets: &[f64]) {
    for (i, &t) in targets.iter().enumerate() {
        let s = l.row(i).sum();
        if s > 0.0 {
            l.row_mut(i).scale_mut(t / s);
        }
    }
}

fn scale_cols(l: &mut DMatrix<f64>, targets: &[f64]) {
    for (j, &t) in targets.iter().enumerate() {
        let s = l.column(j).sum();
        if s > 0.0 {
            l.column_mut(j).scale_mut(t / s);
        }
    }
}

/// Some nonnegative zero-diagonal matrix with the given marginals, from a
/// max-flow on the bipartite row/column graph (Edmonds–Karp).
pub fn feasible_matrix(m: &Marginals) -> Result<DMatrix<f64>> {
    let n = m.n();
    let total: f64 = m.row_sums.iter().sum();
    let mut l = DMatrix::zeros(n, n);
    if total <= 0.0 {
        return Ok(l);
    }
    let eps = 1e-13 * total;
    // node 0 source, 1..=n rows, n+1..=2n columns, 2n+1 sink
    let (src, sink) = (0, 2 * n + 1);
    let mut row_left = m.row_sums.clone();
    let mut col_left = m.col_sums.clone();
    loop {
        let mut prev = vec![usize::MAX; 2 * n + 2];
        prev[src] = src;
        let mut queue = std::collections::VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let visit =
                |v: usize, prev: &mut Vec<usize>, queue: &mut std::collections::VecDeque<usize>| {
                    if prev[v] == usize::MAX {
                        prev[v] = u;
                        queue.push_back(v);
                    }
                };
            if u == src {
                for i in 0..n {
                    if row_left[i] > eps {
                        visit(1 + i, &mut prev, &mut queue);
                    }
                }
            } else if u <= n {
                let i = u - 1;
                for j in 0..n {
                    if j != i {
                        visit(n + 1 + j, &mut prev, &mut queue);
                    }
                }
            } else if u < sink {
                let j = u - n - 1;
                if col_left[j] > eps {
                    visit(sink, &mut prev, &mut queue);
                }
                // undo flow already routed into this column
                for i in 0..n {
                    if l[(i, j)] > eps {
                        visit(1 + i, &mut prev, &mut queue);
                    }
                }
            }
        }
        if prev[sink] == usize::MAX {
            break;
        }
        let mut path = vec![sink];
        while *path.last().expect("nonempty") != src {
            path.push(prev[*path.last().expect("nonempty")]);
        }
        path.reverse();
        let mut push = f64::INFINITY;
        for w in path.windows(2) {
            let (u, v) = (w[0], w[1]);
            push = push.min(if u == src {
                row_left[v - 1]
            } else if v == sink {
                col_left[u - n - 1]
            } else if u > n {
                l[(v - 1, u - n - 1)]
            } else {
                f64::INFINITY
            });
        }
        for w in path.windows(2) {
            let (u, v) = (w[0], w[1]);
            if u == src {
                row_left[v - 1] -= push;
            } else if v == sink {
                col_left[u - n - 1] -= push;
            } else if u > n {
                l[(v - 1, u - n - 1)] -= push;
            } else {
                l[(u - 1, v - n - 1)] += push;
            }
        }
    }
    let err = marginal_error(&l, m, 1e-12 * total);
    if err > 1e-9 {
        return Err(Error::PreconditionViolated(format!(
            "no zero-diagonal matrix has these marginals (best fit off by {err:.3e})"
        )));
    }
    Ok(l)
}

/// Largest relative deviation of the matrix's row and column sums from the
/// marginals (absolute below `floor`).
pub fn marginal_error(l: &DMatrix<f64>, m: &Marginals, floor: f64) -> f64 {
    let rows = l.row_iter().map(|r| r.sum()).zip(&m.row_sums);
    let cols = l.column_iter().map(|c| c.sum()).zip(&m.col_sums);
    rows.chain(cols)
        .map(|(got, &want)| (got - want).abs() / want.max(floor).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// One realisation from the Gibbs sampler after `burn_in` moves.
pub fn sample_matrix(m: &Marginals, cfg: &SamplerConfig) -> Result<DMatrix<f64>> {
    Ok(sample_matrices(m, cfg, 1)?.remove(0))
}

/// `count` realisations: the first after `burn_in` moves, then one every
/// `thinning` moves.
pub fn sample_matrices(
    m: &Marginals,
    cfg: &SamplerConfig,
    count: usize,
) -> Result<Vec<DMatrix<f64>>> {
    if !(cfg.density_p > 0.0 && cfg.density_p <= 1.0) {
        return Err(invalid("density_p must lie in (0, 1]"));
    }
    if cfg.thinning == 0 || cfg.burn_in == 0 {
        return Err(invalid("thinning and burn_in must be >= 1"));
    }
    let n = m.n();
    if n < 2 {
        return Err(invalid("sampling needs at least two banks"));
    }
    // IPFP only approaches fits that need exact zeros; fall back to an
    // exact transport solution then
    let start = match ipfp_matrix(m) {
        Ok(l) => l,
        Err(Error::NoConvergence { .. }) => feasible_matrix(m)?,
        Err(e) => return Err(e),
    };
    let total: f64 = m.row_sums.iter().sum();
    if n == 2 || total <= 0.0 {
        return Ok(vec![start; count]);
    }
    let rate = match cfg.weight_rate {
        Some(r) if r > 0.0 => r,
        Some(r) => return Err(invalid(format!("weight_rate must be positive, got {r}"))),
        None => cfg.density_p * (n * (n - 1)) as f64 / total,
    };
    let mut chain = Chain {
        l: start,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        endpoint_weight: (1.0 - cfg.density_p) / (cfg.density_p * rate),
        cycle_len: if n == 3 { 3 } else { 2 },
    };
    chain.advance(cfg.burn_in);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        if k > 0 {
            chain.advance(cfg.thinning);
        }
        let mut l = chain.l.clone();
        l.apply(|v| *v = v.max(0.0));
        let err = marginal_error(&l, m, 1e-12 * total);
        if err > 1e-6 {
            return Err(Error::NoConvergence {
                iterations: cfg.burn_in as usize,
                residual: err,
                last: l.iter().copied().collect(),
            });
        }
        out.push(l);
    }
    Ok(out)
}

struct Chain {
    l: DMatrix<f64>,
    rng: ChaCha8Rng,
    /// `(1−p)/(pλ)`: weight of an empty entry relative to unit length of
    /// positive weight.
    endpoint_weight: f64,
    cycle_len: usize,
}

impl Chain {
    fn advance(&mut self, moves: u64) {
        for _ in 0..moves {
            self.step();
        }
    }

    /// Resample the mass shift `Δ` along one alternating cycle: `+Δ` on
    /// `(rᵏ, cᵏ)` and `−Δ` on `(rᵏ, cᵏ⁺¹)`, which keeps all marginals.
    fn step(&mut self) {
        let n = self.l.nrows();
        let k = self.cycle_len;
        let mut rows = [0usize; 3];
        let mut cols = [0usize; 3];
        if k == 3 {
            // only the two orientations of the 3-cycle exist
            rows = [0, 1, 2];
            cols = if self.rng.random_bool(0.5) {
                [1, 2, 0]
            } else {
                [2, 0, 1]
            };
        } else {
            let picked = rand::seq::index::sample(&mut self.rng, n, 4);
            rows[..2].copy_from_slice(&[picked.index(0), picked.index(1)]);
            cols[..2].copy_from_slice(&[picked.index(2), picked.index(3)]);
        }
        let plus: Vec<(usize, usize)> = (0..k).map(|t| (rows[t], cols[t])).collect();
        let minus: Vec<(usize, usize)> = (0..k).map(|t| (rows[t], cols[(t + 1) % k])).collect();
        let lo = -plus
            .iter()
            .map(|&e| self.l[e])
            .fold(f64::INFINITY, f64::min);
        let hi = minus
            .iter()
            .map(|&e| self.l[e])
            .fold(f64::INFINITY, f64::min);
        if !(hi > lo) {
            return;
        }
        let zeros_at = |edges: &[(usize, usize)], bound: f64, l: &DMatrix<f64>| {
            edges.iter().filter(|&&e| l[e] == bound).count() as i32
        };
        let w_lo = self.endpoint_weight.powi(zeros_at(&plus, -lo, &self.l));
        let w_hi = self.endpoint_weight.powi(zeros_at(&minus, hi, &self.l));
        let span = hi - lo;
        let u = self.rng.random::<f64>() * (span + w_lo + w_hi);
        let delta = if u < w_lo {
            lo
        } else if u < w_lo + w_hi {
            hi
        } else {
            lo + (u - w_lo - w_hi) / (span + f64::MIN_POSITIVE) * span
        };
        for &e in &plus {
            self.l[e] = if delta == lo && self.l[e] == -lo {
                0.0
            } else {
                self.l[e] + delta
            };
        }
        for &e in &minus {
            self.l[e] = if delta == hi && self.l[e] == hi {
                0.0
            } else {
                self.l[e] - delta
            };
        }
    }
}

/// Build a vanilla network from aggregate records.
pub fn calibrate(
    records: &[EbaRecord],
    cfg: &CalibrationConfig,
) -> Result<(VanillaNetwork, Vec<String>)> {
    let raw = marginals_from_eba(records, &cfg.exclude)?;
    let (m, _) = perturb_to_balance(&raw, cfg.imbalance_tolerance)?;
    let l = match cfg.method {
        Method::Ipfp => ipfp_matrix(&m)?,
        Method::Gibbs => sample_matrix(&m, &cfg.sampler())?,
    };
    let net = VanillaNetwork::new(l, m.external_liab.clone(), m.external_assets.clone())?;
    Ok((net, m.bank_ids))
}
