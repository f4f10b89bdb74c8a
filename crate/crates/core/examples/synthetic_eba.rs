//! Writes the synthetic aggregate bank dataset shipped in `data/`.
//!
//! 90 records in millions of EUR. After dropping DE029, LU45 and SI058 the
//! remaining 87 banks add up to total assets 27 455 000, interbank
//! liabilities 3 072 000 and capital 1 002 000. Individual balance sheets
//! are drawn from a seeded generator: heavy-tailed sizes, thin capital
//! buffers concentrated among the larger banks, and interbank shares
//! between 3% and 30% of total assets.
//!
//! ```text
//! cargo run -p coco-clearing --example synthetic_eba -- data/eba2011_synthetic.csv
//! ```

use std::path::PathBuf;

use coco_clearing::calibration::EbaRecord;
use coco_clearing::io::write_eba;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_110_715;
const TOTAL_ASSETS: f64 = 27_455_000.0;
const INTERBANK: f64 = 3_072_000.0;
const CAPITAL: f64 = 1_002_000.0;
const EXCLUDED: [&str; 3] = ["DE029", "LU45", "SI058"];
const COUNTRIES: [&str; 21] = [
    "AT", "BE", "CY", "DE", "DK", "ES", "FI", "FR", "GB", "GR", "HU", "IE", "IT", "LU", "MT", "NL",
    "NO", "PL", "PT", "SE", "SI",
];

struct Draw {
    id: String,
    size: f64,
    capital_ratio: f64,
    interbank_ratio: f64,
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one variate per call keeps the stream easy to follow
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data/eba2011_synthetic.csv"));
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let mut draws = Vec::with_capacity(90);
    let mut per_country = [0usize; COUNTRIES.len()];
    for k in 0..87 {
        let c = k % COUNTRIES.len();
        per_country[c] += 1;
        let size = (10.8 + 1.5 * standard_normal(&mut rng)).exp();
        // big banks run thinner buffers
        let big = (size.ln() - 10.8) / 1.5;
        let capital_ratio =
            (0.028 - 0.004 * big + 0.03 * rng.random::<f64>().powi(3)).clamp(0.012, 0.09);
        let interbank_ratio = 0.03 + 0.27 * rng.random::<f64>().powf(1.8);
        draws.push(Draw {
            id: format!("{}{:03}", COUNTRIES[c], 100 + per_country[c]),
            size,
            capital_ratio,
            interbank_ratio,
        });
    }

    let scale_assets = TOTAL_ASSETS / draws.iter().map(|d| d.size).sum::<f64>();
    let raw_ib: f64 = draws.iter().map(|d| d.interbank_ratio * d.size).sum();
    let raw_cap: f64 = draws.iter().map(|d| d.capital_ratio * d.size).sum();
    let round = |v: f64| (v * 10.0).round() / 10.0;
    let mut records: Vec<EbaRecord> = draws
        .iter()
        .map(|d| EbaRecord {
            bank_id: d.id.clone(),
            total_assets: round(d.size * scale_assets),
            capital: round(d.capital_ratio * d.size * CAPITAL / raw_cap),
            interbank_liab_total: round(d.interbank_ratio * d.size * INTERBANK / raw_ib),
            interbank_assets: None,
        })
        .collect();
    // absorb rounding in the largest bank so the totals are exact
    let largest = (0..records.len())
        .max_by(|&a, &b| records[a].total_assets.total_cmp(&records[b].total_assets))
        .expect("nonempty");
    let fix = |target: f64, current: f64| round(target - current);
    let ta: f64 = records.iter().map(|r| r.total_assets).sum();
    let cap: f64 = records.iter().map(|r| r.capital).sum();
    let ib: f64 = records.iter().map(|r| r.interbank_liab_total).sum();
    records[largest].total_assets = round(records[largest].total_assets + fix(TOTAL_ASSETS, ta));
    records[largest].capital = round(records[largest].capital + fix(CAPITAL, cap));
    records[largest].interbank_liab_total =
        round(records[largest].interbank_liab_total + fix(INTERBANK, ib));

    // the three banks dropped before calibration
    for (k, id) in EXCLUDED.iter().enumerate() {
        let size = 20_000.0 * (k + 1) as f64;
        records.insert(
            10 + 30 * k,
            EbaRecord {
                bank_id: (*id).to_string(),
                total_assets: size,
                capital: round(0.04 * size),
                interbank_liab_total: round(0.1 * size),
                interbank_assets: None,
            },
        );
    }

    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_eba(&out, &records)?;
    println!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}
