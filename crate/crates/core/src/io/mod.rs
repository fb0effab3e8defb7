//! Run configuration and on-disk artifacts.

mod artifacts;
mod config;

pub use artifacts::{
    check_manifest, decode_policy, encode_policy, manifest, read_manifest, read_policy_csv, read_value_csv,
    read_weights, write_manifest, write_policy_csv, write_signal_csv, write_snapshots_csv, write_trace_csv,
    write_value_csv, write_weights,
};
pub use config::{RunConfig, ThermalOverrides};
