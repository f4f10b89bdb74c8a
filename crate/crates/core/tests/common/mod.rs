//! Shared helpers for the integration tests and the acceptance harness:
//! random network generators and a brute-force fixed-point oracle for
//! networks with at most three banks.
#![allow(dead_code)]

use coco_clearing::symmetric::SymmetricParams;
use coco_clearing::{
    cocoize_with, BankSheet, CocoTerms, CocoizeOptions, Network, Piece, VanillaNetwork,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Knobs for [`random_network`].
#[derive(Debug, Clone, Copy)]
pub struct NetSpec {
    pub n: usize,
    /// `None` draws the recovery rate uniformly from [0, 1].
    pub recovery: Option<f64>,
    /// `None` draws the CoCo fractions uniformly per bank.
    pub beta: Option<f64>,
    /// Every bank owes society something.
    pub owes_society: bool,
    /// Draw bank-to-bank equity holdings.
    pub equity_holdings: bool,
}

impl NetSpec {
    pub fn new(n: usize) -> Self {
        NetSpec {
            n,
            recovery: None,
            beta: None,
            owes_society: false,
            equity_holdings: true,
        }
    }
}

pub fn random_vanilla<R: Rng>(rng: &mut R, n: usize, owes_society: bool) -> VanillaNetwork {
    let density = rng.random_range(0.3..=1.0);
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < density {
                l[(i, j)] = rng.random_range(0.0..10.0);
            }
        }
    }
    let l0: Vec<f64> = (0..n)
        .map(|i| {
            let owes = owes_society || l.row(i).sum() == 0.0 || rng.random::<f64>() < 0.8;
            if owes {
                rng.random_range(0.5..20.0)
            } else {
                0.0
            }
        })
        .collect();
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..25.0)).collect();
    VanillaNetwork::new(l, l0, x).expect("generated vanilla network is valid")
}

pub fn random_terms<R: Rng>(rng: &mut R) -> CocoTerms {
    CocoTerms::new(rng.random_range(0.01..1.0), rng.random_range(0.05..=1.0)).expect("valid terms")
}

pub fn random_network<R: Rng>(rng: &mut R, spec: NetSpec) -> Network {
    let vanilla = random_vanilla(rng, spec.n, spec.owes_society);
    network_from_vanilla(rng, &vanilla, spec)
}

pub fn network_from_vanilla<R: Rng>(
    rng: &mut R,
    vanilla: &VanillaNetwork,
    spec: NetSpec,
) -> Network {
    let n = vanilla.n();
    let draw = |rng: &mut R| spec.beta.unwrap_or_else(|| rng.random::<f64>());
    let beta: Vec<f64> = (0..n).map(|_| draw(rng)).collect();
    let beta0: Vec<f64> = (0..n).map(|_| draw(rng)).collect();
    let recovery = spec.recovery.unwrap_or_else(|| rng.random::<f64>());
    let terms = random_terms(rng);
    let equity_holdings = spec.equity_holdings.then(|| {
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            // at most 60% of any bank held inside the system
            let budget = rng.random_range(0.0..0.6);
            let w: Vec<f64> = (0..n)
                .map(|j| if j == i { 0.0 } else { rng.random::<f64>() })
                .collect();
            let total: f64 = w.iter().sum();
            if total > 0.0 {
                for j in 0..n {
                    h[(i, j)] = budget * w[j] / total;
                }
            }
        }
        h
    });
    let opts = CocoizeOptions {
        equity_holdings,
        ..Default::default()
    };
    cocoize_with(vanilla, &beta, &beta0, terms, recovery, &opts)
        .expect("generated network is valid")
}

/// Symmetric parameters that satisfy the module's validation, with
/// `x` left to the caller.
pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize) -> SymmetricParams {
    loop {
        let p = SymmetricParams {
            n,
            y: rng.random_range(1.0..20.0),
            z: if n == 1 {
                0.0
            } else {
                rng.random_range(0.5..20.0)
            },
            beta0: rng.random(),
            beta: rng.random(),
            pie: rng.random_range(0.0..0.9),
            terms: random_terms(rng),
            recovery: rng.random(),
        };
        if p.validate().is_ok() {
            return p;
        }
    }
}

// ---------------------------------------------------------------------------
// brute-force oracle

fn scale(net: &Network) -> f64 {
    let faces = net
        .sheets()
        .iter()
        .map(BankSheet::total_face)
        .fold(0.0, f64::max);
    let x = net.external_assets().iter().copied().fold(0.0, f64::max);
    faces.max(x).max(f64::MIN_POSITIVE)
}

/// Clearing map written directly from the claim matrices: bank `i`
/// receives `π(j, i)` of each tranche of bank `j`.
pub fn oracle_phi(net: &Network, a: &[f64]) -> Vec<f64> {
    let n = net.n();
    let t: Vec<_> = net
        .sheets()
        .iter()
        .zip(a)
        .map(|(s, &aj)| s.tranche_values(aj))
        .collect();
    (0..n)
        .map(|i| {
            net.external_assets()[i]
                + (0..n)
                    .map(|j| {
                        net.pi0()[(j, i + 1)] * t[j].vanilla
                            + net.pic()[(j, i + 1)] * t[j].coco
                            + net.pie()[(j, i + 1)] * t[j].original_equity
                    })
                    .sum::<f64>()
        })
        .collect()
}

fn oracle_jacobian(net: &Network, a: &[f64]) -> DMatrix<f64> {
    let n = net.n();
    let m: Vec<_> = net
        .sheets()
        .iter()
        .zip(a)
        .map(|(s, &aj)| s.marginals(aj))
        .collect();
    DMatrix::from_fn(n, n, |i, j| {
        net.pi0()[(j, i + 1)] * m[j].vanilla
            + net.pic()[(j, i + 1)] * m[j].coco
            + net.pie()[(j, i + 1)] * m[j].original_equity
    })
}

fn piece_interval(s: &BankSheet, piece: Piece, top: f64) -> Option<(f64, f64)> {
    let b = s.breakpoints();
    let (lo, hi) = match piece {
        Piece::Default => (0.0, b.a1),
        Piece::FullConversion => (b.a1, b.a2),
        Piece::PartialConversion => (b.a2, b.a3),
        Piece::Unconverted => (b.a3, top.max(b.a3)),
    };
    (hi > lo || (piece == Piece::Unconverted)).then_some((lo, hi))
}

const PIECES: [Piece; 4] = [
    Piece::Default,
    Piece::FullConversion,
    Piece::PartialConversion,
    Piece::Unconverted,
];

/// Every fixed point of Φ found by a grid of projected Newton runs inside
/// each product of valuation pieces. Intended for `n ≤ 3`.
pub fn oracle_fixed_points(net: &Network) -> Vec<Vec<f64>> {
    let n = net.n();
    assert!(n <= 3, "the brute-force oracle is meant for tiny networks");
    let sc = scale(net);
    // every fixed point lies below the lattice top
    let top: Vec<f64> = net
        .lattice_top()
        .expect("lattice top")
        .iter()
        .map(|t| t * (1.0 + 1e-12))
        .collect();
    let mut found: Vec<Vec<f64>> = Vec::new();
    let total_patterns = 4usize.pow(n as u32);
    for code in 0..total_patterns {
        let mut boxes = Vec::with_capacity(n);
        let mut empty = false;
        for i in 0..n {
            let piece = PIECES[(code / 4usize.pow(i as u32)) % 4];
            match piece_interval(&net.sheets()[i], piece, top[i]) {
                Some(iv) => boxes.push(iv),
                None => {
                    empty = true;
                    break;
                }
            }
        }
        if empty {
            continue;
        }
        // starts at fractions of each interval; the open upper ends are
        // pulled in slightly so the piece stays fixed
        let fracs = [0.0, 0.1, 0.5, 0.9, 1.0];
        let starts = fracs.len().pow(n as u32);
        for s in 0..starts {
            let mut z: Vec<f64> = (0..n)
                .map(|i| {
                    let (lo, hi) = boxes[i];
                    let f = fracs[(s / fracs.len().pow(i as u32)) % fracs.len()];
                    lo + f * (hi - lo)
                })
                .collect();
            let clamp = |z: &mut Vec<f64>| {
                for (zi, &(lo, hi)) in z.iter_mut().zip(&boxes) {
                    let hi_eff = if hi > lo { hi - 1e-13 * sc } else { hi };
                    *zi = zi.clamp(lo, hi_eff.max(lo));
                }
            };
            clamp(&mut z);
            for _ in 0..200 {
                let f = oracle_phi(net, &z);
                let r = DVector::from_iterator(n, z.iter().zip(&f).map(|(a, b)| a - b));
                if r.amax() <= 1e-12 * sc {
                    break;
                }
                let m = DMatrix::identity(n, n) - oracle_jacobian(net, &z);
                let Some(step) = m.lu().solve(&r) else { break };
                let mut next: Vec<f64> = z.iter().zip(step.iter()).map(|(a, d)| a - d).collect();
                clamp(&mut next);
                if next == z {
                    break;
                }
                z = next;
            }
            // also allow the unclamped Φ image, which lands exactly on
            // breakpoints that the clamp would keep just outside
            for cand in [z.clone(), oracle_phi(net, &z)] {
                let f = oracle_phi(net, &cand);
                let res = cand
                    .iter()
                    .zip(&f)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if res <= 1e-10 * sc && !found.iter().any(|p| dist(p, &cand) <= 1e-8 * sc) {
                    found.push(cand);
                }
            }
        }
    }
    found
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Componentwise supremum and infimum of the oracle's fixed points.
pub fn oracle_extremes(net: &Network) -> (Vec<f64>, Vec<f64>) {
    let pts = oracle_fixed_points(net);
    assert!(!pts.is_empty(), "oracle found no fixed point");
    let n = net.n();
    let hi = (0..n)
        .map(|i| pts.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let lo = (0..n)
        .map(|i| pts.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min))
        .collect();
    (hi, lo)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    dist(a, b)
}

pub fn two_bank_vanilla() -> VanillaNetwork {
    VanillaNetwork::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 10.0, 5.0, 0.0]),
        vec![0.0, 5.0],
        vec![6.0, 1.0],
    )
    .unwrap()
}

/// Two-bank system with a fraction `beta1` of bank 1's debt CoCo-ized,
/// trigger 1, conversion factor 1 and zero recovery.
pub fn two_bank(beta1: f64) -> Network {
    cocoize_with(
        &two_bank_vanilla(),
        &[beta1, 0.0],
        &[beta1, 0.0],
        CocoTerms::new(1.0, 1.0).unwrap(),
        0.0,
        &CocoizeOptions::default(),
    )
    .unwrap()
}
