//! Streaming principal component analysis with exact batch equivalence.

pub mod bench;
pub mod config;
pub mod continuity;
pub mod covariance;
pub mod eigen;
pub mod engine;
pub mod error;
pub mod generator;
pub mod io;
pub mod moments;
pub mod oracle;

pub use bench::{
    linear_fit, prefix_grid, quadratic_coefficient, run_bench, write_bench_csv, BenchMode,
    BenchRecord,
};
pub use config::{PcaConfig, ZeroVariancePolicy};
pub use continuity::{
    align_degenerate_block, align_signs, detect_degenerate_groups, discontinuity_decomposition,
    match_components, principal_angles, CorrectionCounts, CorrectionEvent, CorrectionKind,
    DegeneracyPartition, TrackerState,
};
pub use covariance::{
    frobenius_distance, frobenius_norm, init_covariance, update_covariance, CovarianceState,
};
pub use eigen::{canonicalize_signs, eigh_descending, project, reconstruct, EigenState};
pub use engine::{Diagnostics, PcaEngine, PcaStepResult};
pub use error::{Error, Result};
pub use generator::{generate, GeneratedData, Scenario};
pub use io::{
    read_csv, read_csv_file, read_diagnostics, write_dataset, write_diagnostics,
    write_diagnostics_record, write_pc_series, Dataset, DiagnosticsRecord, RowReader,
};
pub use moments::{MomentAccumulator, Standardization};
pub use oracle::{batch_pca, batch_timing_arm, BatchResult, BatchTiming};
