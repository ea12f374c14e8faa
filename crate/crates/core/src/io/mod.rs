//! File formats: PPM and PNG images, dense distance-grid files, and
//! training checkpoints. Every multi-byte value is little-endian and
//! the binary formats round-trip bit-exactly; byte layouts are
//! documented in `docs/formats.md`.

mod checkpoint;
mod crc32;
mod png_file;
mod ppm;
mod sdf_grid;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use crc32::crc32;
pub use png_file::{read_png, write_png};
pub use ppm::{read_ppm, write_ppm};
pub use sdf_grid::{load_sdf_grid, save_sdf_grid};

use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::ImageField;

/// Reads `.ppm` or `.png` by file extension.
pub fn read_image(path: &Path) -> Result<ImageField> {
    match extension_of(path)? {
        "ppm" => read_ppm(path),
        "png" => read_png(path),
        other => Err(Error::config(format!(
            "unsupported image extension .{other} (use .ppm or .png)"
        ))),
    }
}

/// Writes `.ppm` or `.png` by file extension.
pub fn write_image(path: &Path, img: &ImageField) -> Result<()> {
    match extension_of(path)? {
        "ppm" => write_ppm(path, img),
        "png" => write_png(path, img),
        other => Err(Error::config(format!(
            "unsupported image extension .{other} (use .ppm or .png)"
        ))),
    }
}

fn extension_of(path: &Path) -> Result<&str> {
    path.extension()
        .and_then(|e| e.to_str())
        .ok_or_else(|| Error::config(format!("{} has no file extension", path.display())))
}

/// Maps a unit-range channel onto a byte, rounding half away from
/// zero.
pub(crate) fn quantize_channel(v: f32) -> u8 {
    (f64::from(v) * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Little-endian byte cursor whose errors carry the offset where
/// parsing stopped.
pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::format(format!(
                "truncated file: {what} at byte {} needs {n} bytes, {} left",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u32_le(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub(crate) fn u64_le(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub(crate) fn f32_slice_le(&mut self, count: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = self.take(count * 4, what)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn expect_end(&self, what: &str) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::format(format!(
                "{} bytes of trailing data after {what} at byte {}",
                self.remaining(),
                self.pos
            )));
        }
        Ok(())
    }
}
