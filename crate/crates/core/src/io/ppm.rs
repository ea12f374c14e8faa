//! Binary PPM (P6, maxval 255). The header accepts arbitrary
//! whitespace and `#` comments between tokens, as the format allows;
//! parse errors report the byte offset where reading stopped.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::ImageField;

use super::quantize_channel;

pub fn write_ppm(path: &Path, img: &ImageField) -> Result<()> {
    let mut bytes = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    bytes.reserve(img.pixels().len() * 3);
    for p in img.pixels() {
        bytes.push(quantize_channel(p[0]));
        bytes.push(quantize_channel(p[1]));
        bytes.push(quantize_channel(p[2]));
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_ppm(path: &Path) -> Result<ImageField> {
    let data = std::fs::read(path)?;
    let mut p = HeaderParser { data: &data, pos: 0 };

    let magic = p.token("magic")?;
    if magic != b"P6" {
        return Err(Error::format(format!(
            "not a binary PPM: magic {:?} at byte 0 (expected \"P6\")",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = p.number("width")?;
    let height = p.number("height")?;
    let maxval = p.number("maxval")?;
    if maxval != 255 {
        return Err(Error::format(format!(
            "unsupported maxval {maxval} at byte {} (only 255)",
            p.pos
        )));
    }
    // Exactly one whitespace byte separates the header from the pixels.
    match p.data.get(p.pos) {
        Some(b) if b.is_ascii_whitespace() => p.pos += 1,
        _ => {
            return Err(Error::format(format!(
                "missing whitespace after maxval at byte {}",
                p.pos
            )))
        }
    }

    let expect = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| Error::format(format!("{width}x{height} image is absurdly large")))?;
    let payload = &p.data[p.pos..];
    if payload.len() != expect {
        return Err(Error::format(format!(
            "pixel payload at byte {}: expected {expect} bytes, found {}",
            p.pos,
            payload.len()
        )));
    }
    let pixels = payload
        .chunks_exact(3)
        .map(|c| {
            [
                f32::from(c[0]) / 255.0,
                f32::from(c[1]) / 255.0,
                f32::from(c[2]) / 255.0,
            ]
        })
        .collect();
    ImageField::new(width, height, pixels)
}

struct HeaderParser<'a> {
    data: &'a [u8],
    pos: usize,
}

impl HeaderParser<'_> {
    /// Skips whitespace and `#`-to-end-of-line comments.
    fn skip_filler(&mut self) {
        loop {
            match self.data.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while !matches!(self.data.get(self.pos), None | Some(b'\n')) {
                        self.pos += 1;
                    }
                }
                _ => return,
            }
        }
    }

    fn token(&mut self, what: &str) -> Result<&[u8]> {
        self.skip_filler();
        let start = self.pos;
        while matches!(self.data.get(self.pos), Some(b) if !b.is_ascii_whitespace() && *b != b'#')
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::format(format!(
                "missing {what} token at byte {start}"
            )));
        }
        Ok(&self.data[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let start_hint = self.pos;
        let tok = self.token(what)?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                Error::format(format!(
                    "invalid {what} {:?} near byte {start_hint}",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}
