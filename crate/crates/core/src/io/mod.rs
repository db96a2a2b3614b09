//! Cloud and raster file I/O.

pub mod pcd;
pub mod ply;
pub mod pnm;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use std::path::Path;

/// On-disk cloud formats supported by [`save_cloud`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    PcdAscii,
    PcdBinary,
    PlyAscii,
}

/// Loads a PCD (ASCII / binary LE) or ASCII PLY cloud, picking the parser
/// from the file contents.
pub fn load_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let head = {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        bytes.into_iter().take(64).collect::<Vec<u8>>()
    };
    if head.starts_with(b"ply") {
        ply::load_ply(path)
    } else {
        pcd::load_pcd(path)
    }
}

pub fn save_cloud(cloud: &PointCloud, path: impl AsRef<Path>, format: CloudFormat) -> Result<()> {
    let path = path.as_ref();
    match format {
        CloudFormat::PcdAscii => pcd::save_pcd(cloud, path, false),
        CloudFormat::PcdBinary => pcd::save_pcd(cloud, path, true),
        CloudFormat::PlyAscii => ply::save_ply(cloud, path),
    }
}
