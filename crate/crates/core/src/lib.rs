//! Clearing of interbank networks funded partly by fractional contingent
//! convertible (CoCo) debt.
//!
//! * [`balance_sheet`] values one bank's vanilla debt, CoCo debt and equity.
//! * [`network`] holds the multi-bank data model and scenario transforms.
//! * [`clearing`] finds maximal and minimal clearing vectors and risk measures.
//! * [`symmetric`] has closed forms for symmetric systems and critical shocks.
//! * [`calibration`] rebuilds a liability matrix from aggregate bank data.
//! * [`io`] reads and writes the CSV and TOML formats used by the CLI.
//! * [`studies`] runs the parameter sweeps over a calibrated network.

pub mod balance_sheet;
pub mod calibration;
pub mod clearing;
pub mod error;
pub mod io;
pub mod network;
pub mod studies;
pub mod symmetric;

pub use balance_sheet::{BankSheet, Breakpoints, CocoTerms, Piece, Tranches};
pub use clearing::{
    assert_unique, clear_max, clear_min, conservation_check, phi, picard_trace, risk_measures,
    ClearingConfig, ClearingResult, Extremum, FlowSystem, RiskMeasures,
};
pub use error::{Error, Result};
pub use network::{
    cocoize, cocoize_with, CocoizeOptions, Network, Scenario, Scheme, VanillaNetwork,
};

/// Guide chapters under `book/`, compiled here so their examples run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/single_bank.md")]
    mod single_bank {}
    #[doc = include_str!("../../../book/src/clearing.md")]
    mod clearing {}
    #[doc = include_str!("../../../book/src/symmetric.md")]
    mod symmetric {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/studies.md")]
    mod studies {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
