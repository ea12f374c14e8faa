use crate::error::{Error, Result};
use crate::numerics::{real, Pcg32, Real};

/// Where a unit-domain coordinate falls inside a regular grid of
/// `cells` cells per axis: the cell index `z` and the local coordinate
/// in `[0, 1]` within that cell, per axis. Up to three axes; only the
/// first `dims` entries of the arrays are meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct CellLocation<T> {
    pub dims: usize,
    pub cell: [usize; 3],
    pub local: [T; 3],
}

/// Splits `x` in `[0,1]^d` into cell index and local coordinate:
/// `z = floor(x * cells)`, `local = x * cells - z`. The upper domain
/// boundary `x = 1` belongs to the last cell with `local = 1`, so the
/// whole closed domain is covered.
pub fn locate_cell<T: Real>(x: &[T], cells: usize) -> Result<CellLocation<T>> {
    let dims = x.len();
    if dims == 0 || dims > 3 {
        return Err(Error::config(format!(
            "coordinates must have 1 to 3 components, got {dims}"
        )));
    }
    if cells == 0 {
        return Err(Error::config("grid must have at least one cell per axis"));
    }
    let scale: T = real(cells as f64);
    let mut cell = [0usize; 3];
    let mut local = [T::zero(); 3];
    for (k, &xk) in x.iter().enumerate() {
        // The negated comparison also rejects NaN.
        if !(xk >= T::zero() && xk <= T::one()) {
            return Err(Error::domain(format!(
                "coordinate component {k} = {xk} is outside [0, 1]"
            )));
        }
        if xk == T::one() {
            cell[k] = cells - 1;
            local[k] = T::one();
        } else {
            let scaled = xk * scale;
            let z = scaled.floor();
            let mut zi = z
                .to_usize()
                .ok_or_else(|| Error::numeric(format!("cell index overflow at {scaled}")))?;
            let mut frac = scaled - z;
            if zi >= cells {
                // Rounding pushed x * cells onto the upper edge.
                zi = cells - 1;
                frac = T::one();
            }
            cell[k] = zi;
            local[k] = frac;
        }
    }
    Ok(CellLocation { dims, cell, local })
}

impl<T: Real> CellLocation<T> {
    /// Visits the `2^dims` corner vertices of the cell with their
    /// multilinear interpolation weights. `verts` is the vertex count
    /// per axis, i.e. `cells + 1`; vertex indices are flattened with x
    /// fastest.
    #[inline]
    pub fn for_each_corner(&self, verts: usize, mut f: impl FnMut(usize, T)) {
        self.for_each_corner_vertex(|v, w| {
            let idx = v[0] + verts * (v[1] + verts * v[2]);
            f(idx, w);
        });
    }

    /// Like [`for_each_corner`](Self::for_each_corner) but hands the
    /// corner's per-axis vertex coordinates instead of a flat index.
    /// Unused axes stay 0, so the flattening above works for any dims.
    #[inline]
    pub fn for_each_corner_vertex(&self, mut f: impl FnMut(&[usize; 3], T)) {
        let corners = 1usize << self.dims;
        for c in 0..corners {
            let mut v = [0usize; 3];
            let mut w = T::one();
            for k in 0..self.dims {
                if (c >> k) & 1 == 1 {
                    v[k] = self.cell[k] + 1;
                    w = w * self.local[k];
                } else {
                    v[k] = self.cell[k];
                    w = w * (T::one() - self.local[k]);
                }
            }
            f(&v, w);
        }
    }
}

/// Trainable coefficients stored at the corner vertices of a regular
/// grid over `[0,1]^dims`: `(cells + 1)^dims` vertices carrying
/// `coeffs` values each. Storage is vertex-major (x fastest), with the
/// per-vertex coefficient block contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGrid<T> {
    dims: usize,
    cells: usize,
    coeffs: usize,
    data: Vec<T>,
}

impl<T: Real> LatentGrid<T> {
    pub fn zeros(dims: usize, cells: usize, coeffs: usize) -> Result<Self> {
        if dims == 0 || dims > 3 {
            return Err(Error::config(format!(
                "grid dims must be 1 to 3, got {dims}"
            )));
        }
        if cells == 0 {
            return Err(Error::config("grid must have at least one cell per axis"));
        }
        if coeffs == 0 {
            return Err(Error::config("grid must store at least one coefficient"));
        }
        let verts = (cells + 1).pow(dims as u32);
        Ok(LatentGrid {
            dims,
            cells,
            coeffs,
            data: vec![T::zero(); verts * coeffs],
        })
    }

    /// Fresh grid with every coefficient drawn uniformly from
    /// `[-scale, scale)`, in storage order.
    pub fn init_uniform(
        dims: usize,
        cells: usize,
        coeffs: usize,
        scale: f64,
        rng: &mut Pcg32,
    ) -> Result<Self> {
        let mut grid = Self::zeros(dims, cells, coeffs)?;
        for v in grid.data.iter_mut() {
            *v = real(rng.uniform(-scale, scale));
        }
        Ok(grid)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn coeffs(&self) -> usize {
        self.coeffs
    }

    pub fn verts_per_axis(&self) -> usize {
        self.cells + 1
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Multilinear interpolation of the full coefficient block at a
    /// located position. `out` must hold `coeffs` values.
    pub fn interpolate(&self, loc: &CellLocation<T>, out: &mut [T]) {
        debug_assert_eq!(loc.dims, self.dims);
        debug_assert_eq!(out.len(), self.coeffs);
        for o in out.iter_mut() {
            *o = T::zero();
        }
        let coeffs = self.coeffs;
        loc.for_each_corner(self.verts_per_axis(), |vertex, w| {
            let block = &self.data[vertex * coeffs..(vertex + 1) * coeffs];
            for (o, &a) in out.iter_mut().zip(block) {
                *o = *o + w * a;
            }
        });
    }

    /// Routes a gradient with respect to the interpolated block back to
    /// the stored coefficients: each corner vertex receives its
    /// interpolation weight times the upstream value. `grad` is a flat
    /// buffer congruent with [`data`](Self::data).
    pub fn accumulate_interpolation_gradient(
        &self,
        loc: &CellLocation<T>,
        upstream: &[T],
        grad: &mut [T],
    ) {
        debug_assert_eq!(upstream.len(), self.coeffs);
        debug_assert_eq!(grad.len(), self.data.len());
        let coeffs = self.coeffs;
        loc.for_each_corner(self.verts_per_axis(), |vertex, w| {
            let block = &mut grad[vertex * coeffs..(vertex + 1) * coeffs];
            for (g, &u) in block.iter_mut().zip(upstream) {
                *g = *g + w * u;
            }
        });
    }
}

/// Grid encoding: the feature vector is simply the interpolated
/// coefficient block, `features = coeffs` wide.
pub fn ge_encode<T: Real>(grid: &LatentGrid<T>, x: &[T], out: &mut [T]) -> Result<()> {
    if x.len() != grid.dims() {
        return Err(Error::config(format!(
            "expected {} coordinate components, got {}",
            grid.dims(),
            x.len()
        )));
    }
    if out.len() != grid.coeffs() {
        return Err(Error::config(format!(
            "grid encoding writes {} features, got buffer of {}",
            grid.coeffs(),
            out.len()
        )));
    }
    let loc = locate_cell(x, grid.cells())?;
    grid.interpolate(&loc, out);
    Ok(())
}

/// Parameter gradient of [`ge_encode`] for one sample.
pub fn ge_backward<T: Real>(
    grid: &LatentGrid<T>,
    x: &[T],
    upstream: &[T],
    grad: &mut [T],
) -> Result<()> {
    if upstream.len() != grid.coeffs() || grad.len() != grid.data().len() {
        return Err(Error::config(
            "gradient buffers do not match the grid layout".to_string(),
        ));
    }
    let loc = locate_cell(x, grid.cells())?;
    grid.accumulate_interpolation_gradient(&loc, upstream, grad);
    Ok(())
}
