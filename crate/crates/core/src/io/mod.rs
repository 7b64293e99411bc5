//! File formats: PFM float rasters, Middlebury FLO, binary PPM/PGM, camera
//! and config JSON, and the track/match CSV tables.
//!
//! Every format has an in-memory codec (`encode_*` / `decode_*`) and a path
//! based wrapper (`read_*` / `write_*`).

mod json;
mod pnm;
mod table;

pub use json::{
    decode_cameras, encode_cameras, parse_config, read_cameras, read_config, read_json, write_cameras,
    write_json, ConfigError,
};
pub use pnm::{
    decode_flo, decode_pfm, decode_pgm, decode_ppm, encode_flo, encode_pfm, encode_pgm,
    encode_ppm, read_depth_pfm, read_flo, read_pfm, read_pgm, read_ppm, write_depth_pfm,
    write_flo, write_pfm, write_pgm, write_ppm,
};
pub use table::{
    decode_matches_csv, decode_tracks_csv, encode_matches_csv, encode_tracks_csv,
    read_matches_csv, read_tracks_csv, write_matches_csv, write_tracks_csv,
};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::camgeo::GeometryError;
use crate::raster::RasterError;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic: {0}")]
    BadMagic(String),
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("dimensions {width}x{height} exceed the per-side limit")]
    DimensionOverflow { width: u64, height: u64 },
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error(transparent)]
    Camera(#[from] GeometryError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    HeaderMismatch { expected: String, found: String },
    #[error("line {line}: {message}")]
    RowParse { line: u64, message: String },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

impl IoError {
    fn at(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
        move |source| IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(IoError::at(path))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    std::fs::write(path, bytes).map_err(IoError::at(path))
}
