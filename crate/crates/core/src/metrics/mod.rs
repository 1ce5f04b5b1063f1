//! Evaluation measures: BSS-SDR, energy suppression and directivity, plus
//! the report formats they are written in.

mod directivity;
mod energy;
mod report;
mod sdr;

pub use directivity::{
    asymmetry_db, directivity_sweep, gain_at, passband_center, DirectivityPoint, PreparedSweep,
    SweepConfig,
};
pub use energy::{
    band_energy, energy, measured_suppression_db, suppression_db, Band, SUPPRESSION_CAP_DB,
};
pub use report::{polar_svg, ConditionSummary, EvalReport, ReportKind, ReportRow};
pub use sdr::{bss_sdr, bss_sdr_detailed, SdrOutcome, DEFAULT_FILTER_TAPS, SDR_CAP_DB};
