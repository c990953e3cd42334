//! End-to-end audit: every analysis stage driven from one config file, with
//! report tables, plot data and a manifest of seeds and digests.

mod config;
mod pipeline;
mod plot;
mod report;

pub use config::{AuditConfig, MIN_REPLICATES};
pub use pipeline::{model_label, prepare, run_audit, run_audit_partial, run_audit_to_dir, Prepared, CROSS_SECTIONAL};
pub use plot::{emit_plot_data, FigureId, FIG4_MODELS};
pub use report::{
    AssociationRow, AuditReport, CharacteristicRow, ComparisonRow, CurveSet, Manifest, PcaRow, PerformanceRow,
    RunMetadata,
};
