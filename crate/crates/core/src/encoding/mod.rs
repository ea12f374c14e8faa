//! Input encodings that lift a unit-domain coordinate into the feature
//! vector the network consumes.
//!
//! Five families share one interface: classic sinusoidal positional
//! encoding (no trainable state), a single latent grid, the local
//! positional encoding (per-cell sinusoids scaled by interpolated
//! trainable coefficients), and dense / hashed multi-resolution stacks
//! of latent grids. All trainable variants expose per-sample parameter
//! gradients so the optimizer can treat encoder state exactly like
//! network weights.

mod grid;
mod lpe;
mod multi;
mod pe;

pub use grid::{ge_backward, ge_encode, locate_cell, CellLocation, LatentGrid};
pub use lpe::{
    lpe_backward, lpe_coeffs_per_vertex, lpe_encode, lpe_encode_raw, lpe_output_dim,
};
pub use multi::{
    hash_vertex, multigrid_backward, multigrid_encode, multihash_backward, multihash_encode,
    HashLevel,
};
pub use pe::{pe_encode, pe_output_dim};

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Pcg32, Real};

/// Trainable encoder coefficients start near zero, drawn uniformly
/// from `[-COEFF_INIT_RANGE, COEFF_INIT_RANGE)`.
pub const COEFF_INIT_RANGE: f64 = 1e-4;

/// Description of an encoder: family and hyperparameters. This is what
/// configs carry and what checkpoints persist.
#[derive(Debug, Clone, PartialEq)]
pub enum EncodingConfig {
    /// Sinusoidal ladder of `frequencies` octaves starting at octave
    /// `offset`; no trainable state.
    Positional {
        dims: usize,
        frequencies: usize,
        offset: usize,
    },
    /// One latent grid, `features` trainable values per vertex.
    Grid {
        dims: usize,
        cells: usize,
        features: usize,
    },
    /// Local positional encoding over a single grid with `frequencies`
    /// octaves per dimension.
    Local {
        dims: usize,
        cells: usize,
        frequencies: usize,
        shared_sin_cos: bool,
    },
    /// Dense multi-resolution stack; one grid per entry of `levels`
    /// (cells per axis, conventionally coarse to fine).
    MultiGrid {
        dims: usize,
        levels: Vec<usize>,
        features: usize,
    },
    /// Multi-resolution stack backed by fixed-size hash tables.
    MultiHash {
        dims: usize,
        levels: Vec<usize>,
        features: usize,
        table_size: usize,
    },
}

impl EncodingConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = self.input_dim();
        if dims == 0 || dims > 3 {
            return Err(Error::config(format!(
                "encoding input_dim must be 1 to 3, got {dims}"
            )));
        }
        match self {
            EncodingConfig::Positional {
                frequencies,
                offset,
                ..
            } => {
                if *frequencies == 0 {
                    return Err(Error::config("encoding.frequencies must be at least 1"));
                }
                if offset + frequencies > 32 {
                    return Err(Error::config(
                        "encoding octaves above 2^31 are meaningless in single precision"
                            .to_string(),
                    ));
                }
            }
            EncodingConfig::Grid { cells, features, .. } => {
                if *cells == 0 {
                    return Err(Error::config("encoding.grid_resolution must be at least 1"));
                }
                if *features == 0 {
                    return Err(Error::config("encoding.feature_width must be at least 1"));
                }
            }
            EncodingConfig::Local {
                cells, frequencies, ..
            } => {
                if *cells == 0 {
                    return Err(Error::config("encoding.grid_resolution must be at least 1"));
                }
                if *frequencies == 0 || *frequencies > 16 {
                    return Err(Error::config(
                        "encoding.frequencies must be between 1 and 16".to_string(),
                    ));
                }
            }
            EncodingConfig::MultiGrid {
                levels, features, ..
            } => {
                if levels.is_empty() || levels.iter().any(|&l| l == 0) {
                    return Err(Error::config(
                        "encoding.levels must be a non-empty list of positive resolutions"
                            .to_string(),
                    ));
                }
                if *features == 0 {
                    return Err(Error::config("encoding.feature_width must be at least 1"));
                }
            }
            EncodingConfig::MultiHash {
                levels,
                features,
                table_size,
                ..
            } => {
                if levels.is_empty() || levels.iter().any(|&l| l == 0) {
                    return Err(Error::config(
                        "encoding.levels must be a non-empty list of positive resolutions"
                            .to_string(),
                    ));
                }
                if *features == 0 {
                    return Err(Error::config("encoding.feature_width must be at least 1"));
                }
                if *table_size == 0 || !table_size.is_power_of_two() {
                    return Err(Error::config(format!(
                        "encoding.hash_table_size {table_size} must be a power of two"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        match self {
            EncodingConfig::Positional { dims, .. }
            | EncodingConfig::Grid { dims, .. }
            | EncodingConfig::Local { dims, .. }
            | EncodingConfig::MultiGrid { dims, .. }
            | EncodingConfig::MultiHash { dims, .. } => *dims,
        }
    }

    /// Width of the encoded feature vector, i.e. the network input.
    pub fn output_dim(&self) -> usize {
        match self {
            EncodingConfig::Positional {
                dims, frequencies, ..
            } => pe_output_dim(*dims, *frequencies),
            EncodingConfig::Grid { features, .. } => *features,
            EncodingConfig::Local {
                dims, frequencies, ..
            } => lpe_output_dim(*dims, *frequencies),
            EncodingConfig::MultiGrid {
                levels, features, ..
            }
            | EncodingConfig::MultiHash {
                levels, features, ..
            } => levels.len() * features,
        }
    }

    /// Exact number of trainable encoder parameters. Grid storage
    /// counts the full `(cells + 1)^dims` corner-vertex lattice; hashed
    /// levels count `min(lattice, table_size)` slots.
    pub fn param_count(&self) -> usize {
        match self {
            EncodingConfig::Positional { .. } => 0,
            EncodingConfig::Grid {
                dims,
                cells,
                features,
            } => (cells + 1).pow(*dims as u32) * features,
            EncodingConfig::Local {
                dims,
                cells,
                frequencies,
                shared_sin_cos,
            } => {
                (cells + 1).pow(*dims as u32)
                    * lpe_coeffs_per_vertex(*dims, *frequencies, *shared_sin_cos)
            }
            EncodingConfig::MultiGrid {
                dims,
                levels,
                features,
            } => levels
                .iter()
                .map(|&cells| (cells + 1).pow(*dims as u32) * features)
                .sum(),
            EncodingConfig::MultiHash {
                dims,
                levels,
                features,
                table_size,
            } => levels
                .iter()
                .map(|&cells| (cells + 1).pow(*dims as u32).min(*table_size) * features)
                .sum(),
        }
    }
}

/// An encoder instance: the config plus its trainable state.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder<T> {
    config: EncodingConfig,
    grids: Vec<LatentGrid<T>>,
    tables: Vec<HashLevel<T>>,
}

impl<T: Real> Encoder<T> {
    /// Builds the encoder and draws all trainable coefficients from
    /// `[-COEFF_INIT_RANGE, COEFF_INIT_RANGE)` in storage order.
    pub fn init(config: EncodingConfig, rng: &mut Pcg32) -> Result<Self> {
        config.validate()?;
        let mut grids = Vec::new();
        let mut tables = Vec::new();
        match &config {
            EncodingConfig::Positional { .. } => {}
            EncodingConfig::Grid {
                dims,
                cells,
                features,
            } => {
                grids.push(LatentGrid::init_uniform(
                    *dims,
                    *cells,
                    *features,
                    COEFF_INIT_RANGE,
                    rng,
                )?);
            }
            EncodingConfig::Local {
                dims,
                cells,
                frequencies,
                shared_sin_cos,
            } => {
                grids.push(LatentGrid::init_uniform(
                    *dims,
                    *cells,
                    lpe_coeffs_per_vertex(*dims, *frequencies, *shared_sin_cos),
                    COEFF_INIT_RANGE,
                    rng,
                )?);
            }
            EncodingConfig::MultiGrid {
                dims,
                levels,
                features,
            } => {
                for &cells in levels {
                    grids.push(LatentGrid::init_uniform(
                        *dims,
                        cells,
                        *features,
                        COEFF_INIT_RANGE,
                        rng,
                    )?);
                }
            }
            EncodingConfig::MultiHash {
                dims,
                levels,
                features,
                table_size,
            } => {
                for &cells in levels {
                    tables.push(HashLevel::init_uniform(
                        *dims,
                        cells,
                        *features,
                        *table_size,
                        COEFF_INIT_RANGE,
                        rng,
                    )?);
                }
            }
        }
        Ok(Encoder {
            config,
            grids,
            tables,
        })
    }

    pub fn config(&self) -> &EncodingConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.config.param_count()
    }

    pub fn grids(&self) -> &[LatentGrid<T>] {
        &self.grids
    }

    pub fn tables(&self) -> &[HashLevel<T>] {
        &self.tables
    }

    /// Encodes one coordinate into `out` (length [`output_dim`](Self::output_dim)).
    pub fn encode(&self, x: &[T], out: &mut [T]) -> Result<()> {
        match &self.config {
            EncodingConfig::Positional {
                frequencies,
                offset,
                ..
            } => pe_encode(x, *frequencies, *offset, out),
            EncodingConfig::Grid { .. } => ge_encode(&self.grids[0], x, out),
            EncodingConfig::Local {
                frequencies,
                shared_sin_cos,
                ..
            } => lpe_encode(&self.grids[0], *frequencies, *shared_sin_cos, x, out),
            EncodingConfig::MultiGrid { .. } => multigrid_encode(&self.grids, x, out),
            EncodingConfig::MultiHash { .. } => multihash_encode(&self.tables, x, out),
        }
    }

    /// Encodes a batch of row coordinates into a row-per-sample matrix.
    pub fn encode_batch(&self, coords: &DenseMatrix<T>, out: &mut DenseMatrix<T>) -> Result<()> {
        if coords.cols() != self.input_dim()
            || out.cols() != self.output_dim()
            || coords.rows() != out.rows()
        {
            return Err(Error::config(format!(
                "encode_batch shapes: coords {}x{}, out {}x{}, expected input {} and output {}",
                coords.rows(),
                coords.cols(),
                out.rows(),
                out.cols(),
                self.input_dim(),
                self.output_dim()
            )));
        }
        for r in 0..coords.rows() {
            self.encode(coords.row(r), out.row_mut(r))?;
        }
        Ok(())
    }

    /// One zeroed gradient buffer per parameter group, congruent with
    /// [`param_slices`](Self::param_slices).
    pub fn gradient_buffers(&self) -> Vec<Vec<T>> {
        self.param_slices()
            .into_iter()
            .map(|s| vec![T::zero(); s.len()])
            .collect()
    }

    /// Trainable parameter groups in a fixed order (grids, then hash
    /// tables; levels in listed order).
    pub fn param_slices(&self) -> Vec<&[T]> {
        self.grids
            .iter()
            .map(|g| g.data())
            .chain(self.tables.iter().map(|t| t.data()))
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        self.grids
            .iter_mut()
            .map(|g| g.data_mut())
            .chain(self.tables.iter_mut().map(|t| t.data_mut()))
            .collect()
    }

    /// Accumulates this sample's parameter gradients given the gradient
    /// of the loss with respect to the encoded features.
    pub fn accumulate_gradients(
        &self,
        x: &[T],
        upstream: &[T],
        grads: &mut [Vec<T>],
    ) -> Result<()> {
        let groups = self.grids.len() + self.tables.len();
        if grads.len() != groups {
            return Err(Error::config(format!(
                "expected {groups} gradient buffers, got {}",
                grads.len()
            )));
        }
        match &self.config {
            EncodingConfig::Positional { .. } => Ok(()),
            EncodingConfig::Grid { .. } => {
                ge_backward(&self.grids[0], x, upstream, &mut grads[0])
            }
            EncodingConfig::Local {
                frequencies,
                shared_sin_cos,
                ..
            } => lpe_backward(
                &self.grids[0],
                *frequencies,
                *shared_sin_cos,
                x,
                upstream,
                &mut grads[0],
            ),
            EncodingConfig::MultiGrid { .. } => {
                multigrid_backward(&self.grids, x, upstream, grads)
            }
            EncodingConfig::MultiHash { .. } => {
                multihash_backward(&self.tables, x, upstream, grads)
            }
        }
    }
}
