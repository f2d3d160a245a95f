//! Dataset model, generators and file formats.

mod chiller;
mod csv_io;
mod dataset;
mod toy;

pub use chiller::{chiller_geometry, gen_chiller, ChillerGeometry, ChillerSynthConfig, FAULTS, FEATURES, MAX_OPERATING_CONDITIONS};
pub use csv_io::{
    class_balance_warnings, load_csv, load_dataset, metadata_path, read_csv, save_csv, save_dataset, with_metadata, write_csv,
    LABEL_COLUMN, SEVERITY_COLUMN,
};
pub use dataset::{split_by_severity, DatasetMetadata, LabeledDataset, Standardization, MAX_SEVERITY, NORMAL_CLASS};
pub use toy::{gen_toy2d, sample_region, ToyRegion, HEALTHY_RADIUS, INTERMEDIATE_SEVERITY, OUTER_RADIUS, SEVERE_RADIUS};
