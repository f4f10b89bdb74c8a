//! Parameter sweeps over a calibrated vanilla network.
//!
//! Every cell is an independent [`Scenario`]; cells run in parallel on the
//! current rayon pool and results come back in grid order. A cell that fails
//! yields a row carrying the error message instead of aborting the sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clearing::{clear_max, risk_measures, ClearingConfig, RiskMeasures};
use crate::error::{invalid, Result};
use crate::network::{Scenario, Scheme, VanillaNetwork};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub beta: f64,
    pub beta0: f64,
    pub trigger: f64,
    pub shock: f64,
    pub interbank_fraction: f64,
    pub external_repayment_fraction: Option<f64>,
    pub original_shareholder_value: Option<f64>,
    pub default_count: Option<usize>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn measures(&self) -> Option<RiskMeasures> {
        Some(RiskMeasures {
            external_repayment_fraction: self.external_repayment_fraction?,
            original_shareholder_value: self.original_shareholder_value?,
            default_count: self.default_count?,
        })
    }
}

/// Baseline settings shared by the three studies: recovery 1/2 and
/// conversion factor 1.
pub fn study_base() -> Scenario {
    Scenario {
        recovery: 0.5,
        conversion: 1.0,
        trigger: 0.03,
        ..Scenario::default()
    }
}

/// Build, clear and measure one scenario.
pub fn evaluate(vanilla: &VanillaNetwork, scenario: &Scenario, cfg: &ClearingConfig) -> SweepRow {
    let outcome = scenario
        .build(vanilla)
        .and_then(|net| clear_max(&net, cfg).and_then(|r| risk_measures(&net, &r)));
    let mut row = SweepRow {
        scheme: scenario.scheme,
        beta: scenario.beta,
        beta0: scenario.beta0,
        trigger: scenario.trigger,
        shock: scenario.shock,
        interbank_fraction: scenario.interbank_fraction,
        external_repayment_fraction: None,
        original_shareholder_value: None,
        default_count: None,
        error: None,
    };
    match outcome {
        Ok(m) => {
            row.external_repayment_fraction = Some(m.external_repayment_fraction);
            row.original_shareholder_value = Some(m.original_shareholder_value);
            row.default_count = Some(m.default_count);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

pub fn sweep(
    vanilla: &VanillaNetwork,
    scenarios: &[Scenario],
    cfg: &ClearingConfig,
) -> Vec<SweepRow> {
    scenarios
        .par_iter()
        .map(|s| evaluate(vanilla, s, cfg))
        .collect()
}

/// `count` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid(format!("{name} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

/// CoCo fraction × trigger grid under full and interbank CoCo-ization at a
/// fixed shock (`base.shock`).
pub fn study1_scenarios(base: &Scenario, betas: &[f64], triggers: &[f64]) -> Result<Vec<Scenario>> {
    check_grid("beta", betas)?;
    check_grid("trigger", triggers)?;
    let mut out = Vec::with_capacity(2 * betas.len() * triggers.len());
    for scheme in [Scheme::Full, Scheme::Interbank] {
        for &trigger in triggers {
            for &beta in betas {
                out.push(
                    Scenario {
                        trigger,
                        ..base.clone()
                    }
                    .with_scheme(scheme, beta),
                );
            }
        }
    }
    Ok(out)
}

/// Shock grid under all four schemes with CoCo fraction `fraction`.
pub fn study2_scenarios(base: &Scenario, shocks: &[f64], fraction: f64) -> Result<Vec<Scenario>> {
    check_grid("shock", shocks)?;
    let mut out = Vec::with_capacity(4 * shocks.len());
    for &shock in shocks {
        for scheme in Scheme::ALL {
            out.push(
                Scenario {
                    shock,
                    ..base.clone()
                }
                .with_scheme(scheme, fraction),
            );
        }
    }
    Ok(out)
}

/// Interbank-fraction grid under all four schemes at a fixed shock.
pub fn study3_scenarios(base: &Scenario, gammas: &[f64], fraction: f64) -> Result<Vec<Scenario>> {
    check_grid("interbank fraction", gammas)?;
    let mut out = Vec::with_capacity(4 * gammas.len());
    for &gamma in gammas {
        for scheme in Scheme::ALL {
            out.push(
                Scenario {
                    interbank_fraction: gamma,
                    ..base.clone()
                }
                .with_scheme(scheme, fraction),
            );
        }
    }
    Ok(out)
}

pub fn run_study1(
    vanilla: &VanillaNetwork,
    base: &Scenario,
    betas: &[f64],
    triggers: &[f64],
    cfg: &ClearingConfig,
) -> Result<Vec<SweepRow>> {
    Ok(sweep(
        vanilla,
        &study1_scenarios(base, betas, triggers)?,
        cfg,
    ))
}

pub fn run_study2(
    vanilla: &VanillaNetwork,
    base: &Scenario,
    shocks: &[f64],
    cfg: &ClearingConfig,
) -> Result<Vec<SweepRow>> {
    Ok(sweep(vanilla, &study2_scenarios(base, shocks, 1.0)?, cfg))
}

pub fn run_study3(
    vanilla: &VanillaNetwork,
    base: &Scenario,
    gammas: &[f64],
    cfg: &ClearingConfig,
) -> Result<Vec<SweepRow>> {
    Ok(sweep(vanilla, &study3_scenarios(base, gammas, 1.0)?, cfg))
}
