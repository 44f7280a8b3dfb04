//! Procedures over trained networks: trajectories of probe activations, their
//! PCA plane and CNA landscape, entropy-binned error curves and the
//! metric-versus-gap correlation report.

mod binning;
mod landscape;
mod pca;
mod report;
mod trajectory;

pub use binning::{binned_error_curves, complexity_bins, BinAssignment, BinnedErrorCurves};
pub use landscape::{cna_at, cna_landscape, Grid, Landscape, DEFAULT_MARGIN, DEFAULT_RESOLUTION};
pub use pca::{pca2, Pca2, Pca2Basis};
pub use report::{
    cna_accuracy_points, gap_correlation_report, GapReport, GroupBy, ReportCell, RunRecord, ALL_NETS, MIN_RUNS,
};
pub use trajectory::{record_state, record_state_full, StateLayout, TrajectorySample, Trajectory};

/// Entropy bins used for the binned error curves.
pub const DEFAULT_BINS: usize = 5;
/// Probe batch size for trajectory recording.
pub const DEFAULT_PROBE: usize = 256;
