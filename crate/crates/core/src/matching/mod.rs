//! Case-control cohort construction and covariate balance diagnostics.

mod balance;
mod cohort;
mod distance;

pub use balance::{balance_report, covariate_association, BalanceReport, BalanceRow, ALPHA};
pub use cohort::{
    default_demographics, matched_case_control, random_case_control, MatchLevel, MatchSpec, MatchedCohort,
};
pub use distance::{mixed_distance, DistanceSpace};
