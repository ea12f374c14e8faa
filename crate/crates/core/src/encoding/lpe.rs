use super::grid::{locate_cell, LatentGrid};
use crate::error::{Error, Result};
use crate::numerics::{real, Real};

/// Local positional encoding.
///
/// The domain is split into a regular grid; within each cell the
/// encoding emits sinusoids of the *local* coordinate, each scaled by a
/// trainable coefficient interpolated from the cell's corner vertices.
/// Per input dimension the feature block is
///
/// ```text
/// [ g0, g1, c1*cos(2 pi l), s1*sin(2 pi l), ..., c_{n-1}*cos(2^{n-1} pi l), s_{n-1}*sin(2^{n-1} pi l) ]
/// ```
///
/// where `l` is the local coordinate. The lowest octave is *not* a
/// sinusoid pair: its two slots `g0, g1` pass the interpolated
/// coefficients through unmodulated. `cos(pi l)` flips sign between
/// `l = 1` and `l = 0`, so a sinusoid in those slots would jump at
/// every cell face; the plain pair keeps the encoding continuous while
/// still spending the same two features. All higher octaves are whole
/// periods across the cell and already agree at both faces.
///
/// Stored per vertex and per dimension: `[g0, g1, c1, s1, ...,
/// c_{n-1}, s_{n-1}]`, i.e. `2 * frequencies` values. With
/// `shared_sin_cos` the cos/sin pair of each octave reads one shared
/// value (and `g0 = g1`), halving storage to `frequencies` values per
/// dimension at the cost of coupling the pair's phases.
pub fn lpe_encode<T: Real>(
    grid: &LatentGrid<T>,
    frequencies: usize,
    shared: bool,
    x: &[T],
    out: &mut [T],
) -> Result<()> {
    encode_impl(grid, frequencies, shared, false, x, out)
}

/// Diagnostic variant of [`lpe_encode`] that keeps the lowest octave as
/// a modulated `cos(pi l), sin(pi l)` pair instead of the plain
/// coefficient pair. Discontinuous at cell faces; exists so tests can
/// demonstrate why the plain pair is there. Not part of any trainable
/// pipeline.
pub fn lpe_encode_raw<T: Real>(
    grid: &LatentGrid<T>,
    frequencies: usize,
    x: &[T],
    out: &mut [T],
) -> Result<()> {
    encode_impl(grid, frequencies, false, true, x, out)
}

/// Stored coefficients per vertex for a local positional encoding.
pub fn lpe_coeffs_per_vertex(dims: usize, frequencies: usize, shared: bool) -> usize {
    if shared {
        dims * frequencies
    } else {
        dims * 2 * frequencies
    }
}

/// Encoded feature width; independent of coefficient sharing.
pub fn lpe_output_dim(dims: usize, frequencies: usize) -> usize {
    2 * frequencies * dims
}

fn check_shapes<T: Real>(
    grid: &LatentGrid<T>,
    frequencies: usize,
    shared: bool,
    x: &[T],
    out_len: usize,
) -> Result<()> {
    if frequencies == 0 {
        return Err(Error::config("local encoding needs at least one octave"));
    }
    if x.len() != grid.dims() {
        return Err(Error::config(format!(
            "expected {} coordinate components, got {}",
            grid.dims(),
            x.len()
        )));
    }
    let want = lpe_coeffs_per_vertex(grid.dims(), frequencies, shared);
    if grid.coeffs() != want {
        return Err(Error::config(format!(
            "grid stores {} coefficients per vertex, this encoding needs {want}",
            grid.coeffs()
        )));
    }
    let out_want = lpe_output_dim(grid.dims(), frequencies);
    if out_len != out_want {
        return Err(Error::config(format!(
            "local encoding writes {out_want} features, got buffer of {out_len}"
        )));
    }
    Ok(())
}

/// Runs `f` on a zeroed scratch block, stack-allocated when it fits.
/// Encoding runs per sample inside training loops and ray marches, so
/// the common case must not touch the heap.
#[inline]
fn with_scratch<T: Real, R>(len: usize, f: impl FnOnce(&mut [T]) -> R) -> R {
    if len <= 96 {
        let mut buf = [T::zero(); 96];
        f(&mut buf[..len])
    } else {
        let mut buf = vec![T::zero(); len];
        f(&mut buf)
    }
}

fn encode_impl<T: Real>(
    grid: &LatentGrid<T>,
    frequencies: usize,
    shared: bool,
    raw_lowest: bool,
    x: &[T],
    out: &mut [T],
) -> Result<()> {
    check_shapes(grid, frequencies, shared, x, out.len())?;
    let loc = locate_cell(x, grid.cells())?;
    with_scratch(grid.coeffs(), |interp| {
        grid.interpolate(&loc, interp);

        let pi: T = real(std::f64::consts::PI);
        let stride = if shared { frequencies } else { 2 * frequencies };
        for k in 0..grid.dims() {
            let coeff = &interp[k * stride..(k + 1) * stride];
            let block = &mut out[k * 2 * frequencies..(k + 1) * 2 * frequencies];
            let local = loc.local[k];
            if raw_lowest {
                let angle = pi * local;
                block[0] = coeff[0] * angle.cos();
                let s0 = if shared { coeff[0] } else { coeff[1] };
                block[1] = s0 * angle.sin();
            } else {
                block[0] = coeff[0];
                block[1] = if shared { coeff[0] } else { coeff[1] };
            }
            for i in 1..frequencies {
                let angle = real::<T>((1u64 << i) as f64) * pi * local;
                let (c, s) = if shared {
                    (coeff[i], coeff[i])
                } else {
                    (coeff[2 * i], coeff[2 * i + 1])
                };
                block[2 * i] = c * angle.cos();
                block[2 * i + 1] = s * angle.sin();
            }
        }
        Ok(())
    })
}

/// Parameter gradient of [`lpe_encode`] for one sample: each stored
/// coefficient receives its sinusoid value (1 for the plain lowest
/// pair) times the upstream feature gradient, weighted by its vertex's
/// interpolation weight. `grad` is a flat buffer congruent with the
/// grid data.
pub fn lpe_backward<T: Real>(
    grid: &LatentGrid<T>,
    frequencies: usize,
    shared: bool,
    x: &[T],
    upstream: &[T],
    grad: &mut [T],
) -> Result<()> {
    check_shapes(grid, frequencies, shared, x, upstream.len())?;
    if grad.len() != grid.data().len() {
        return Err(Error::config(
            "gradient buffer does not match the grid layout".to_string(),
    ));
    }
    let loc = locate_cell(x, grid.cells())?;

    // Gradient with respect to the *interpolated* coefficient block,
    // then routed through the interpolation weights.
    let pi: T = real(std::f64::consts::PI);
    let stride = if shared { frequencies } else { 2 * frequencies };
    with_scratch(grid.coeffs(), |coeff_up| {
        for k in 0..grid.dims() {
            let up = &upstream[k * 2 * frequencies..(k + 1) * 2 * frequencies];
            let slot = &mut coeff_up[k * stride..(k + 1) * stride];
            let local = loc.local[k];
            if shared {
                slot[0] = up[0] + up[1];
            } else {
                slot[0] = up[0];
                slot[1] = up[1];
            }
            for i in 1..frequencies {
                let angle = real::<T>((1u64 << i) as f64) * pi * local;
                let (dc, ds) = (up[2 * i] * angle.cos(), up[2 * i + 1] * angle.sin());
                if shared {
                    slot[i] = dc + ds;
                } else {
                    slot[2 * i] = dc;
                    slot[2 * i + 1] = ds;
                }
            }
        }
        grid.accumulate_interpolation_gradient(&loc, coeff_up, grad);
    });
    Ok(())
}
