//! Frame sequences on disk: a directory of `%06d`-numbered PNM/PFM files.

use std::fs;
use std::path::{Path, PathBuf};

use super::FrameSequence;
use crate::error::{Error, Result};
use crate::imgcore::{read_image, write_image, ImageFormat};

/// Image files (PNM/PFM by extension) in `dir`, sorted by file name.
pub fn list_image_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && ImageFormat::from_path(p).is_some())
        .collect();
    files.sort();
    Ok(files)
}

pub fn read_sequence_dir(dir: impl AsRef<Path>) -> Result<FrameSequence> {
    let dir = dir.as_ref();
    let files = list_image_files(dir)?;
    if files.is_empty() {
        return Err(Error::arg(format!("no PNM/PFM frames in {}", dir.display())));
    }
    FrameSequence::new(files.iter().map(read_image).collect::<Result<_>>()?)
}

/// Write frames as `000000.<ext>`, `000001.<ext>`, ... and return their paths.
pub fn write_sequence_dir(
    dir: impl AsRef<Path>,
    seq: &FrameSequence,
    format: ImageFormat,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let ext = match (format, seq.first().channels()) {
        (ImageFormat::Pfm, _) => "pfm",
        (ImageFormat::Pnm, 1) => "pgm",
        (ImageFormat::Pnm, _) => "ppm",
    };
    seq.frames()
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let path = dir.join(format!("{k:06}.{ext}"));
            write_image(&path, f)?;
            Ok(path)
        })
        .collect()
}
