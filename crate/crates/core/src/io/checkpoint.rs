//! Training checkpoints: the full model (encoder config, network
//! shape, every parameter) plus the optimizer moments and step count,
//! sealed with a CRC-32. A load rebuilds bit-for-bit what was saved,
//! so training resumes exactly where it stopped.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "NFLB1"                      5 bytes
//! encoding kind                u8 (0 positional, 1 grid, 2 local,
//!                                  3 multi-grid, 4 multi-hash)
//! kind-specific fields         see docs/formats.md
//! output activation            u8 (0 identity, 1 sigmoid)
//! leaky slope                  f32
//! layer-dim count + dims       u32 each
//! parameters                   f32 arrays: network weights/biases in
//!                              layer order, then encoder storage
//! Adam first moments           f32 arrays, same group order
//! Adam second moments          f32 arrays, same group order
//! step count                   u64
//! CRC-32 of all prior bytes    u32
//! ```

use std::path::Path;

use crate::encoding::{Encoder, EncodingConfig};
use crate::error::{Error, Result};
use crate::model::FieldModel;
use crate::network::{Mlp, OutputActivation};
use crate::numerics::Pcg32;
use crate::optim::AdamState;

use super::{crc32, ByteReader};

const MAGIC: &[u8; 5] = b"NFLB1";

fn push_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn write_encoding(out: &mut Vec<u8>, config: &EncodingConfig) {
    match config {
        EncodingConfig::Positional {
            dims,
            frequencies,
            offset,
        } => {
            out.push(0);
            push_u32(out, *dims);
            push_u32(out, *frequencies);
            push_u32(out, *offset);
        }
        EncodingConfig::Grid {
            dims,
            cells,
            features,
        } => {
            out.push(1);
            push_u32(out, *dims);
            push_u32(out, *cells);
            push_u32(out, *features);
        }
        EncodingConfig::Local {
            dims,
            cells,
            frequencies,
            shared_sin_cos,
        } => {
            out.push(2);
            push_u32(out, *dims);
            push_u32(out, *cells);
            push_u32(out, *frequencies);
            out.push(u8::from(*shared_sin_cos));
        }
        EncodingConfig::MultiGrid {
            dims,
            levels,
            features,
        } => {
            out.push(3);
            push_u32(out, *dims);
            push_u32(out, *features);
            push_u32(out, levels.len());
            for &l in levels {
                push_u32(out, l);
            }
        }
        EncodingConfig::MultiHash {
            dims,
            levels,
            features,
            table_size,
        } => {
            out.push(4);
            push_u32(out, *dims);
            push_u32(out, *features);
            out.extend_from_slice(&(*table_size as u64).to_le_bytes());
            push_u32(out, levels.len());
            for &l in levels {
                push_u32(out, l);
            }
        }
    }
}

fn read_encoding(r: &mut ByteReader) -> Result<EncodingConfig> {
    let kind = r.take(1, "encoding kind")?[0];
    let config = match kind {
        0 => EncodingConfig::Positional {
            dims: r.u32_le("dims")? as usize,
            frequencies: r.u32_le("frequencies")? as usize,
            offset: r.u32_le("octave offset")? as usize,
        },
        1 => EncodingConfig::Grid {
            dims: r.u32_le("dims")? as usize,
            cells: r.u32_le("cells")? as usize,
            features: r.u32_le("features")? as usize,
        },
        2 => EncodingConfig::Local {
            dims: r.u32_le("dims")? as usize,
            cells: r.u32_le("cells")? as usize,
            frequencies: r.u32_le("frequencies")? as usize,
            shared_sin_cos: match r.take(1, "shared flag")?[0] {
                0 => false,
                1 => true,
                other => {
                    return Err(Error::format(format!(
                        "shared-coefficient flag must be 0 or 1, got {other}"
                    )))
                }
            },
        },
        3 => {
            let dims = r.u32_le("dims")? as usize;
            let features = r.u32_le("features")? as usize;
            let count = r.u32_le("level count")? as usize;
            let mut levels = Vec::with_capacity(count);
            for _ in 0..count {
                levels.push(r.u32_le("level cells")? as usize);
            }
            EncodingConfig::MultiGrid {
                dims,
                levels,
                features,
            }
        }
        4 => {
            let dims = r.u32_le("dims")? as usize;
            let features = r.u32_le("features")? as usize;
            let table_size = r.u64_le("table size")? as usize;
            let count = r.u32_le("level count")? as usize;
            let mut levels = Vec::with_capacity(count);
            for _ in 0..count {
                levels.push(r.u32_le("level cells")? as usize);
            }
            EncodingConfig::MultiHash {
                dims,
                levels,
                features,
                table_size,
            }
        }
        other => {
            return Err(Error::format(format!(
                "unknown encoding kind byte {other}"
            )))
        }
    };
    Ok(config)
}

pub fn save_checkpoint(
    path: &Path,
    model: &FieldModel<f32>,
    opt: &AdamState<f32>,
) -> Result<()> {
    let groups = model.param_slices();
    if opt.first_moments().len() != groups.len()
        || opt
            .first_moments()
            .iter()
            .zip(&groups)
            .any(|(m, g)| m.len() != g.len())
    {
        return Err(Error::config(
            "optimizer state does not match the model's parameter groups",
        ));
    }

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    write_encoding(&mut out, model.encoder.config());
    out.push(match model.mlp.output_activation() {
        OutputActivation::Identity => 0,
        OutputActivation::Sigmoid => 1,
    });
    out.extend_from_slice(&model.mlp.leaky_slope().to_le_bytes());
    push_u32(&mut out, model.mlp.dims().len());
    for &d in model.mlp.dims() {
        push_u32(&mut out, d);
    }
    for group in &groups {
        for v in *group {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for m in opt.first_moments() {
        for v in m {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for v in opt.second_moments() {
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out.extend_from_slice(&opt.step().to_le_bytes());
    let crc = crc32(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(FieldModel<f32>, AdamState<f32>)> {
    let data = std::fs::read(path)?;
    if data.len() < 9 {
        return Err(Error::format(format!(
            "checkpoint is only {} bytes long",
            data.len()
        )));
    }
    let (body, tail) = data.split_at(data.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32(body);
    if stored != computed {
        return Err(Error::format(format!(
            "checksum mismatch: file says {stored:08x}, contents hash to {computed:08x}"
        )));
    }

    let mut r = ByteReader::new(body);
    let magic = r.take(5, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(format!(
            "not a checkpoint: magic {:?} (expected \"NFLB1\")",
            String::from_utf8_lossy(magic)
        )));
    }
    let encoding = read_encoding(&mut r)?;
    encoding.validate()?;
    let activation = match r.take(1, "output activation")?[0] {
        0 => OutputActivation::Identity,
        1 => OutputActivation::Sigmoid,
        other => {
            return Err(Error::format(format!(
                "unknown output activation byte {other}"
            )))
        }
    };
    let slope = f32::from_le_bytes(r.take(4, "leaky slope")?.try_into().unwrap());
    let dim_count = r.u32_le("layer-dim count")? as usize;
    if !(2..=64).contains(&dim_count) {
        return Err(Error::format(format!(
            "implausible layer-dim count {dim_count}"
        )));
    }
    let mut dims = Vec::with_capacity(dim_count);
    for _ in 0..dim_count {
        dims.push(r.u32_le("layer dim")? as usize);
    }
    if dims[0] != encoding.output_dim() {
        return Err(Error::format(format!(
            "network expects {} inputs but the encoder produces {}",
            dims[0],
            encoding.output_dim()
        )));
    }

    // Rebuild the model shape (the draws are overwritten below).
    let mut throwaway = Pcg32::new(0, 0);
    let mlp = Mlp::init(&dims, f64::from(slope), activation, &mut throwaway)
        .map_err(|e| Error::format(format!("checkpoint network shape: {e}")))?;
    let encoder = Encoder::init(encoding, &mut throwaway)
        .map_err(|e| Error::format(format!("checkpoint encoder shape: {e}")))?;
    let mut model = FieldModel::new(encoder, mlp)?;

    for group in model.param_slices_mut() {
        let values = r.f32_slice_le(group.len(), "parameters")?;
        group.copy_from_slice(&values);
    }
    let lens: Vec<usize> = model.param_slices().iter().map(|g| g.len()).collect();
    let read_moments = |what: &str, r: &mut ByteReader| -> Result<Vec<Vec<f32>>> {
        lens.iter().map(|&n| r.f32_slice_le(n, what)).collect()
    };
    let m = read_moments("first moments", &mut r)?;
    let v = read_moments("second moments", &mut r)?;
    let step = r.u64_le("step count")?;
    r.expect_end("step count")?;
    let opt = AdamState::from_parts(m, v, step)?;
    Ok((model, opt))
}
