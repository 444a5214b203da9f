//! edgebench: resource benchmarking for workloads on Linux edge devices,
//! plus the sensor-file data path that feeds them in SHM deployments.
//!
//! The benchmarking side runs a workload repeatedly inside idle padding
//! windows, samples system CPU and workload memory concurrently, and turns
//! the recordings into idle-baseline CPU deltas, latencies and memory
//! statistics. The data-path side parses TDMS sensor files, reduces channels
//! to windowed RMS series, flags deviations from a rolling baseline, and
//! forwards files to a sink through a durable spool.

pub mod clock;
pub mod config;
pub mod harness;
pub mod metrics;
pub mod report;
pub mod sampler;
pub mod shm;
pub mod spool;
pub mod stats;
pub mod tdms;
