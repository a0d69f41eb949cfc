//! 8-bit binary PGM (P5) output.

use std::path::{Path, PathBuf};

use rhr_core::LatentGrid;

use crate::error::{CliError, Result};

/// Min-max maps a channel to `0..=255`; a constant channel becomes 128.
pub fn normalize(values: &[f64]) -> Vec<u8> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !(hi > lo) {
        return vec![128; values.len()];
    }
    values
        .iter()
        .map(|&v| ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

pub fn encode(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Output paths for each channel: `path` itself for a single channel,
/// otherwise `<stem>_c<i>.<ext>` next to it.
pub fn channel_paths(path: &Path, channels: usize) -> Vec<PathBuf> {
    if channels == 1 {
        return vec![path.to_path_buf()];
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| "pgm".into());
    (0..channels)
        .map(|c| path.with_file_name(format!("{stem}_c{c}.{ext}")))
        .collect()
}

/// Writes one PGM per channel and returns the paths written.
pub fn write_grid(path: &Path, grid: &LatentGrid) -> Result<Vec<PathBuf>> {
    let paths = channel_paths(path, grid.channels());
    for (c, p) in paths.iter().enumerate() {
        let bytes = encode(grid.width(), grid.height(), &normalize(grid.channel(c)));
        std::fs::write(p, bytes).map_err(|e| CliError::io(p, e))?;
    }
    Ok(paths)
}
