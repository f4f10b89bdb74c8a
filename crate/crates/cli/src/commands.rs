use std::fs::{self, File};
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use coco_clearing::calibration::{calibrate as run_calibration, CalibrationConfig, Method};
use coco_clearing::clearing::clear;
use coco_clearing::io::{read_eba, read_toml, read_vanilla, write_vanilla};
use coco_clearing::network::CocoizeOptions;
use coco_clearing::studies::{
    linspace, study1_scenarios, study2_scenarios, study3_scenarios, study_base, sweep, SweepRow,
};
use coco_clearing::symmetric::{
    critical_epsilons, regime, symmetric_clear, symmetric_clear_min, x_breakpoints, SymmetricParams,
};
use coco_clearing::{
    cocoize_with, risk_measures, BankSheet, CocoTerms, Extremum, Scenario, VanillaNetwork,
};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::grid::Grid;
use crate::{BaseArgs, Global, NetworkFiles, OutArg, ScenarioArgs, Status, SymmetricArgs, Usage};

fn sink(out: &OutArg) -> Result<Box<dyn Write>> {
    Ok(match &out.out {
        Some(path) => {
            Box::new(File::create(path).with_context(|| format!("creating {}", path.display()))?)
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn write_csv<T: Serialize>(out: &OutArg, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink(out)?);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn scenario_from_config(g: &Global) -> Result<Option<Scenario>> {
    match &g.config {
        Some(path) => Ok(Some(read_toml(path)?)),
        None => Ok(None),
    }
}

fn apply_base(s: &mut Scenario, b: &BaseArgs, g: &Global) {
    let set = |field: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *field = v;
        }
    };
    set(&mut s.trigger, b.trigger);
    set(&mut s.conversion, b.conversion);
    set(&mut s.recovery, b.recovery);
    set(&mut s.shock, b.shock);
    set(&mut s.interbank_fraction, b.interbank_fraction);
    if let Some(seed) = g.seed {
        s.seed = seed;
    }
}

/// Base scenario of a sweep: the config file if given, otherwise the study
/// defaults at `default_shock`; flags override either.
fn study_scenario(g: &Global, b: &BaseArgs, default_shock: f64) -> Result<Scenario> {
    let mut s = scenario_from_config(g)?.unwrap_or_else(|| Scenario {
        shock: default_shock,
        ..study_base()
    });
    apply_base(&mut s, b, g);
    Ok(s)
}

fn sweep_status(out: &OutArg, rows: &[SweepRow]) -> Result<Status> {
    write_csv(out, rows)?;
    let errors = rows.iter().filter(|r| r.error.is_some()).count();
    Ok(if errors == 0 {
        Status::Ok
    } else {
        Status::Partial(errors)
    })
}

#[derive(Serialize)]
struct CurveRow {
    a: f64,
    #[serde(rename = "E")]
    equity: f64,
    #[serde(rename = "D")]
    debt: f64,
    lambda: f64,
    c: f64,
    vanilla: f64,
    coco: f64,
    original_equity: f64,
}

pub fn value_curve(
    vanilla_face: f64,
    coco_face: f64,
    trigger: f64,
    conversion: f64,
    recovery: f64,
    assets: Option<Grid>,
    out: &OutArg,
) -> Result<Status> {
    let sheet = BankSheet::new(
        vanilla_face,
        coco_face,
        CocoTerms::new(trigger, conversion)?,
        recovery,
    )?;
    let grid = match assets {
        Some(Grid(v)) => v,
        None => linspace(0.0, 1.3 * sheet.breakpoints().a3, 131),
    };
    if let Some(a) = grid.iter().find(|a| **a < 0.0) {
        return Err(Usage(format!("asset values must be >= 0, got {a}")).into());
    }
    let rows: Vec<CurveRow> = grid
        .into_iter()
        .map(|a| {
            let t = sheet.tranche_values(a);
            CurveRow {
                a,
                equity: sheet.equity(a),
                debt: sheet.debt_value(a),
                lambda: sheet.conversion_fraction(a),
                c: sheet.coco_equity_fraction(a),
                vanilla: t.vanilla,
                coco: t.coco,
                original_equity: t.original_equity,
            }
        })
        .collect();
    write_csv(out, &rows)?;
    Ok(Status::Ok)
}

pub fn clear_one(
    g: &Global,
    files: &NetworkFiles,
    args: &ScenarioArgs,
    minimal: bool,
    out_dir: Option<&Path>,
) -> Result<Status> {
    let vanilla = read_vanilla(&files.edges, &files.nodes)?;
    let mut s = scenario_from_config(g)?.unwrap_or_default();
    apply_base(&mut s, &args.base, g);
    if let Some(scheme) = args.scheme {
        s.scheme = scheme;
    }
    if let Some(f) = args.fraction {
        s = s.clone().with_scheme(s.scheme, f);
    }
    if let Some(b) = args.beta {
        s.beta = b;
    }
    if let Some(b) = args.beta0 {
        s.beta0 = b;
    }
    let net = s.build(&vanilla)?;
    let extremum = if minimal {
        Extremum::Minimal
    } else {
        Extremum::Maximal
    };
    let result = clear(&net, extremum, &g.clearing())?;
    let json = serde_json::to_string_pretty(&result)?;
    // the clearing result stands on its own even when the measures are undefined
    let measures_out = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("result.json"), json + "\n")?;
            OutArg {
                out: Some(dir.join("measures.csv")),
            }
        }
        None => {
            println!("{json}");
            OutArg { out: None }
        }
    };
    write_csv(&measures_out, &[risk_measures(&net, &result)?])?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct IdRow<'a> {
    bank: usize,
    bank_id: &'a str,
}

pub fn calibrate(
    g: &Global,
    eba: &Path,
    method: Option<Method>,
    burn_in: Option<u64>,
    edges: &Path,
    nodes: &Path,
    ids: Option<&Path>,
) -> Result<Status> {
    let mut cfg: CalibrationConfig = match &g.config {
        Some(path) => read_toml(path)?,
        None => CalibrationConfig::default(),
    };
    if let Some(m) = method {
        cfg.method = m;
    }
    if let Some(b) = burn_in {
        cfg.burn_in = b;
    }
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    let records = read_eba(eba)?;
    let (net, bank_ids) = run_calibration(&records, &cfg)?;
    write_vanilla(&net, edges, nodes)?;
    if let Some(path) = ids {
        let rows: Vec<IdRow> = bank_ids
            .iter()
            .enumerate()
            .map(|(i, id)| IdRow {
                bank: i + 1,
                bank_id: id,
            })
            .collect();
        write_csv(
            &OutArg {
                out: Some(path.to_path_buf()),
            },
            &rows,
        )?;
    }
    eprintln!("calibrated {} banks ({:?})", net.n(), cfg.method);
    Ok(Status::Ok)
}

fn symmetric_params(a: &SymmetricArgs) -> Result<SymmetricParams> {
    let p = SymmetricParams {
        n: a.n,
        y: a.y,
        z: a.z,
        beta0: a.beta0,
        beta: a.beta,
        pie: a.pie,
        terms: CocoTerms::new(a.trigger, a.conversion)?,
        recovery: a.recovery,
    };
    p.validate()?;
    Ok(p)
}

#[derive(Serialize)]
struct SymmetricRow {
    x: f64,
    a_plus: f64,
    a_minus: f64,
    regime: &'static str,
}

pub fn symmetric(args: &SymmetricArgs, x: Option<Grid>, out: &OutArg) -> Result<Status> {
    let p = symmetric_params(args)?;
    let xs = match x {
        Some(Grid(v)) => v,
        None => linspace(0.0, 1.3 * x_breakpoints(&p)?.x3, 101),
    };
    let rows = xs
        .into_iter()
        .map(|x| {
            Ok(SymmetricRow {
                x,
                a_plus: symmetric_clear(&p, x)?,
                a_minus: symmetric_clear_min(&p, x)?,
                regime: regime(&p, x)?.as_str(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_csv(out, &rows)?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct EpsRow {
    beta: f64,
    beta0: f64,
    eps1: Option<f64>,
    eps2: Option<f64>,
    error: Option<String>,
}

pub fn critical_eps(
    g: &Global,
    args: &SymmetricArgs,
    x: f64,
    stressed: usize,
    betas: &Grid,
    beta0s: &Grid,
    out: &OutArg,
) -> Result<Status> {
    let base = symmetric_params(args)?;
    let cfg = g.clearing();
    let cells: Vec<(f64, f64)> = betas
        .0
        .iter()
        .flat_map(|&b| beta0s.0.iter().map(move |&b0| (b, b0)))
        .collect();
    let rows: Vec<EpsRow> = cells
        .par_iter()
        .map(|&(beta, beta0)| {
            let p = SymmetricParams {
                beta,
                beta0,
                ..base
            };
            match critical_epsilons(&p, x, stressed, &cfg) {
                Ok(e) => EpsRow {
                    beta,
                    beta0,
                    eps1: e.eps1,
                    eps2: e.eps2,
                    error: None,
                },
                Err(e) => EpsRow {
                    beta,
                    beta0,
                    eps1: None,
                    eps2: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    write_csv(out, &rows)?;
    let errors = rows.iter().filter(|r| r.error.is_some()).count();
    Ok(if errors == 0 {
        Status::Ok
    } else {
        Status::Partial(errors)
    })
}

pub fn study1(
    g: &Global,
    files: &NetworkFiles,
    base: &BaseArgs,
    betas: &Grid,
    triggers: &Grid,
    out: &OutArg,
) -> Result<Status> {
    let vanilla = read_vanilla(&files.edges, &files.nodes)?;
    let s = study_scenario(g, base, 0.03)?;
    let scenarios = study1_scenarios(&s, &betas.0, &triggers.0)?;
    sweep_status(out, &sweep(&vanilla, &scenarios, &g.clearing()))
}

pub fn study2(
    g: &Global,
    files: &NetworkFiles,
    base: &BaseArgs,
    fraction: f64,
    shocks: &Grid,
    out: &OutArg,
) -> Result<Status> {
    let vanilla = read_vanilla(&files.edges, &files.nodes)?;
    let s = study_scenario(g, base, 0.0)?;
    let scenarios = study2_scenarios(&s, &shocks.0, fraction)?;
    sweep_status(out, &sweep(&vanilla, &scenarios, &g.clearing()))
}

pub fn study3(
    g: &Global,
    files: &NetworkFiles,
    base: &BaseArgs,
    fraction: f64,
    gammas: &Grid,
    out: &OutArg,
) -> Result<Status> {
    let vanilla = read_vanilla(&files.edges, &files.nodes)?;
    let s = study_scenario(g, base, 0.05)?;
    let scenarios = study3_scenarios(&s, &gammas.0, fraction)?;
    sweep_status(out, &sweep(&vanilla, &scenarios, &g.clearing()))
}

#[derive(Serialize)]
struct CounterexampleRow {
    beta1: f64,
    a1_max: f64,
    a2_max: f64,
    defaults_max: usize,
    a1_min: f64,
    a2_min: f64,
    defaults_min: usize,
}

/// Two banks: bank 1 owes bank 2 ten, bank 2 owes bank 1 five and society
/// five; external assets six and one; only bank 1 issues CoCos (fraction
/// `beta1` of every liability), trigger and conversion factor one, zero
/// recovery.
pub fn counterexample(g: &Global, points: usize, out: &OutArg) -> Result<Status> {
    if points < 2 {
        return Err(Usage("--points must be at least 2".into()).into());
    }
    let vanilla = VanillaNetwork::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 10.0, 5.0, 0.0]),
        vec![0.0, 5.0],
        vec![6.0, 1.0],
    )?;
    let terms = CocoTerms::new(1.0, 1.0)?;
    let cfg = g.clearing();
    let rows = linspace(0.0, 1.0, points)
        .into_par_iter()
        .map(|beta1| {
            let net = cocoize_with(
                &vanilla,
                &[beta1, 0.0],
                &[beta1, 0.0],
                terms,
                0.0,
                &CocoizeOptions::default(),
            )?;
            let hi = clear(&net, Extremum::Maximal, &cfg)?;
            let lo = clear(&net, Extremum::Minimal, &cfg)?;
            Ok(CounterexampleRow {
                beta1,
                a1_max: hi.assets[0],
                a2_max: hi.assets[1],
                defaults_max: hi.default_count(),
                a1_min: lo.assets[0],
                a2_min: lo.assets[1],
                defaults_min: lo.default_count(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_csv(out, &rows)?;
    Ok(Status::Ok)
}
