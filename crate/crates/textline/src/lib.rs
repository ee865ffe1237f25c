//! File formats, image IO and the batch command line around
//! [`textline_core`].

use std::path::PathBuf;

pub mod commands;
pub mod config;
pub mod formats;
pub mod io;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("cannot read {0}: {1}")]
    Read(PathBuf, #[source] std::io::Error),
    #[error("cannot decode {0}: {1}")]
    Decode(PathBuf, String),
    #[error("cannot write {0}: {1}")]
    Write(PathBuf, String),
    #[error("line id {0} does not fit a 16-bit label raster")]
    TooManyLabels(u32),
}
