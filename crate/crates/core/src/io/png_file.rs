//! 8-bit RGB PNG read/write, delegated to the `png` crate. Only the
//! plain non-interlaced RGB profile written here is accepted back.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::ImageField;

use super::quantize_channel;

pub fn write_png(path: &Path, img: &ImageField) -> Result<()> {
    let file = File::create(path)?;
    let mut encoder = png::Encoder::new(
        BufWriter::new(file),
        img.width() as u32,
        img.height() as u32,
    );
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::format(format!("png header: {e}")))?;
    let mut bytes = Vec::with_capacity(img.pixels().len() * 3);
    for p in img.pixels() {
        bytes.extend_from_slice(&[
            quantize_channel(p[0]),
            quantize_channel(p[1]),
            quantize_channel(p[2]),
        ]);
    }
    writer
        .write_image_data(&bytes)
        .map_err(|e| Error::format(format!("png payload: {e}")))?;
    Ok(())
}

pub fn read_png(path: &Path) -> Result<ImageField> {
    let decoder = png::Decoder::new(File::open(path)?);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::format(format!("png header: {e}")))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::format(format!("png payload: {e}")))?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::format(format!(
            "unsupported png profile {:?}/{:?} (only 8-bit RGB)",
            info.color_type, info.bit_depth
        )));
    }
    let pixels = buf[..info.buffer_size()]
        .chunks_exact(3)
        .map(|c| {
            [
                f32::from(c[0]) / 255.0,
                f32::from(c[1]) / 255.0,
                f32::from(c[2]) / 255.0,
            ]
        })
        .collect();
    ImageField::new(info.width as usize, info.height as usize, pixels)
}
