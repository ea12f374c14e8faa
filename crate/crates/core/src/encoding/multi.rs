use super::grid::{locate_cell, LatentGrid};
use crate::error::{Error, Result};
use crate::numerics::{real, Pcg32, Real};

/// Multi-resolution grid encoding: one latent grid per level, each
/// interpolated independently; the feature vector is the concatenation
/// in the order the levels are listed (conventionally coarse to fine).
pub fn multigrid_encode<T: Real>(levels: &[LatentGrid<T>], x: &[T], out: &mut [T]) -> Result<()> {
    let total: usize = levels.iter().map(|g| g.coeffs()).sum();
    if out.len() != total {
        return Err(Error::config(format!(
            "multi-grid encoding writes {total} features, got buffer of {}",
            out.len()
        )));
    }
    let mut offset = 0;
    for grid in levels {
        super::grid::ge_encode(grid, x, &mut out[offset..offset + grid.coeffs()])?;
        offset += grid.coeffs();
    }
    Ok(())
}

/// Parameter gradients of [`multigrid_encode`]: `grads` holds one flat
/// buffer per level, congruent with that level's grid data.
pub fn multigrid_backward<T: Real>(
    levels: &[LatentGrid<T>],
    x: &[T],
    upstream: &[T],
    grads: &mut [Vec<T>],
) -> Result<()> {
    if grads.len() != levels.len() {
        return Err(Error::config("one gradient buffer per level required"));
    }
    let mut offset = 0;
    for (grid, grad) in levels.iter().zip(grads.iter_mut()) {
        super::grid::ge_backward(grid, x, &upstream[offset..offset + grid.coeffs()], grad)?;
        offset += grid.coeffs();
    }
    Ok(())
}

/// One level of the hashed multi-resolution encoding. Fine levels have
/// more vertices than the table can hold; those fold vertices into
/// `table_size` slots with the xor-of-multiplies hash below. Coarse
/// levels whose lattice fits the table index it densely instead.
#[derive(Debug, Clone, PartialEq)]
pub struct HashLevel<T> {
    dims: usize,
    cells: usize,
    features: usize,
    slots: usize,
    hashed: bool,
    data: Vec<T>,
}

/// Per-axis multipliers of the vertex hash; axis 0 passes through.
const HASH_PRIMES: [u32; 3] = [1, 2_654_435_761, 805_459_861];

/// Folds a lattice vertex into a hash-table slot: multiply each vertex
/// coordinate by its axis constant, xor the products, reduce modulo the
/// (power-of-two) table size.
pub fn hash_vertex(vertex: &[usize; 3], dims: usize, table_size: usize) -> usize {
    let mut h: u32 = 0;
    for k in 0..dims {
        h ^= (vertex[k] as u32).wrapping_mul(HASH_PRIMES[k]);
    }
    (h as usize) % table_size
}

impl<T: Real> HashLevel<T> {
    pub fn zeros(dims: usize, cells: usize, features: usize, table_size: usize) -> Result<Self> {
        if dims == 0 || dims > 3 {
            return Err(Error::config(format!("level dims must be 1 to 3, got {dims}")));
        }
        if cells == 0 || features == 0 {
            return Err(Error::config(
                "hash level needs at least one cell and one feature".to_string(),
            ));
        }
        if table_size == 0 || !table_size.is_power_of_two() {
            return Err(Error::config(format!(
                "hash table size {table_size} must be a power of two"
            )));
        }
        let verts = (cells + 1).pow(dims as u32);
        let hashed = verts > table_size;
        let slots = verts.min(table_size);
        Ok(HashLevel {
            dims,
            cells,
            features,
            slots,
            hashed,
            data: vec![T::zero(); slots * features],
        })
    }

    pub fn init_uniform(
        dims: usize,
        cells: usize,
        features: usize,
        table_size: usize,
        scale: f64,
        rng: &mut Pcg32,
    ) -> Result<Self> {
        let mut level = Self::zeros(dims, cells, features, table_size)?;
        for v in level.data.iter_mut() {
            *v = real(rng.uniform(-scale, scale));
        }
        Ok(level)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn is_hashed(&self) -> bool {
        self.hashed
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    fn slot_of(&self, vertex: &[usize; 3]) -> usize {
        if self.hashed {
            hash_vertex(vertex, self.dims, self.slots)
        } else {
            let verts = self.cells + 1;
            vertex[0] + verts * (vertex[1] + verts * vertex[2])
        }
    }

    /// Interpolates this level's features at `x`.
    pub fn encode(&self, x: &[T], out: &mut [T]) -> Result<()> {
        if out.len() != self.features {
            return Err(Error::config(format!(
                "hash level writes {} features, got buffer of {}",
                self.features,
                out.len()
            )));
        }
        for o in out.iter_mut() {
            *o = T::zero();
        }
        let loc = locate_cell(x, self.cells)?;
        loc.for_each_corner_vertex(|vertex, w| {
            let slot = self.slot_of(vertex);
            let block = &self.data[slot * self.features..(slot + 1) * self.features];
            for (o, &a) in out.iter_mut().zip(block) {
                *o = *o + w * a;
            }
        });
        Ok(())
    }

    /// Parameter gradient of [`encode`](Self::encode); colliding
    /// vertices accumulate into the same slot, mirroring the forward
    /// sharing.
    pub fn backward(&self, x: &[T], upstream: &[T], grad: &mut [T]) -> Result<()> {
        if upstream.len() != self.features || grad.len() != self.data.len() {
            return Err(Error::config(
                "gradient buffers do not match the level layout".to_string(),
            ));
        }
        let loc = locate_cell(x, self.cells)?;
        loc.for_each_corner_vertex(|vertex, w| {
            let slot = self.slot_of(vertex);
            let block = &mut grad[slot * self.features..(slot + 1) * self.features];
            for (g, &u) in block.iter_mut().zip(upstream) {
                *g = *g + w * u;
            }
        });
        Ok(())
    }
}

/// Multi-resolution hash encoding across all levels, coarse to fine.
pub fn multihash_encode<T: Real>(levels: &[HashLevel<T>], x: &[T], out: &mut [T]) -> Result<()> {
    let total: usize = levels.iter().map(|l| l.features()).sum();
    if out.len() != total {
        return Err(Error::config(format!(
            "multi-hash encoding writes {total} features, got buffer of {}",
            out.len()
        )));
    }
    let mut offset = 0;
    for level in levels {
        level.encode(x, &mut out[offset..offset + level.features()])?;
        offset += level.features();
    }
    Ok(())
}

pub fn multihash_backward<T: Real>(
    levels: &[HashLevel<T>],
    x: &[T],
    upstream: &[T],
    grads: &mut [Vec<T>],
) -> Result<()> {
    if grads.len() != levels.len() {
        return Err(Error::config("one gradient buffer per level required"));
    }
    let mut offset = 0;
    for (level, grad) in levels.iter().zip(grads.iter_mut()) {
        level.backward(x, &upstream[offset..offset + level.features()], grad)?;
        offset += level.features();
    }
    Ok(())
}
