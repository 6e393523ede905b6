//! Enumeration oracles, distances and the statistical test harness.

pub mod encoding;
pub mod enumerate;
pub mod pmf;
mod report;
pub mod stats;
pub mod suites;

pub use encoding::{decode, encode_forest, encode_truncated, Node};
pub use enumerate::{
    enumerate_reweighted_coloured, enumerate_truncated_biased, enumerate_truncated_bmc,
    DEFAULT_BUDGET,
};
pub use pmf::{empirical_pmf, tv_distance, tv_threshold, Scheme, TreePmf};
pub use report::TestReport;
pub use suites::{
    interlacement_qp_test, run_all, run_criterion, spine_identity_test, CriterionResult,
    SuiteConfig, CRITERIA,
};
