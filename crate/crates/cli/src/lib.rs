//! File formats, image I/O and the command-line pipeline around
//! `dualview-core`: 16-bit PNG views, three-plane triple containers,
//! JSON manifests and configs, the versioned checkpoint format, CSV
//! metric tables and the statistics report.

pub mod checkpoint;
pub mod commands;
pub mod container;
pub mod exec;
pub mod manifest;
pub mod png_io;
pub mod refcdf;
pub mod report;
