//! Supervised field tasks: a 2D RGB image field and 3D signed-distance
//! scenes (analytic primitives with CSG, or dense sample grids). Both
//! expose a reference oracle and a batch sampler for training.

use crate::error::{Error, Result};
use crate::numerics::{real, DenseMatrix, Pcg32, Real};

/// An RGB image with channels in `[0,1]`, stored row-major. The unit
/// square maps onto pixel centers: column `i` of row `j` sits at
/// `((i+0.5)/W, (j+0.5)/H)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageField {
    width: usize,
    height: usize,
    pixels: Vec<[f32; 3]>,
}

impl ImageField {
    pub fn new(width: usize, height: usize, pixels: Vec<[f32; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::config("image dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::config(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                pixels.len()
            )));
        }
        if pixels
            .iter()
            .flatten()
            .any(|&c| !(0.0..=1.0).contains(&c))
        {
            return Err(Error::domain("image channels must lie in [0,1]"));
        }
        Ok(ImageField {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                pixels.push(f(i, j));
            }
        }
        ImageField::new(width, height, pixels)
    }

    pub fn constant(width: usize, height: usize, rgb: [f32; 3]) -> Result<Self> {
        ImageField::new(width, height, vec![rgb; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, i: usize, j: usize) -> [f32; 3] {
        self.pixels[j * self.width + i]
    }

    /// Unit-square coordinate of the center of pixel `(i, j)`.
    pub fn pixel_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            (i as f64 + 0.5) / self.width as f64,
            (j as f64 + 0.5) / self.height as f64,
        )
    }

    /// Bilinear lookup under the pixel-center convention, clamped to
    /// the edge; used for matcap shading.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> [f32; 3] {
        let sample_axis = |t: f64, n: usize| -> (usize, usize, f64) {
            let x = t * n as f64 - 0.5;
            let x = x.clamp(0.0, (n - 1) as f64);
            let i0 = (x.floor() as usize).min(n - 1);
            let i1 = (i0 + 1).min(n - 1);
            (i0, i1, x - i0 as f64)
        };
        let (i0, i1, fu) = sample_axis(u, self.width);
        let (j0, j1, fv) = sample_axis(v, self.height);
        let mut out = [0.0f32; 3];
        for c in 0..3 {
            let top = f64::from(self.pixel(i0, j0)[c]) * (1.0 - fu)
                + f64::from(self.pixel(i1, j0)[c]) * fu;
            let bot = f64::from(self.pixel(i0, j1)[c]) * (1.0 - fu)
                + f64::from(self.pixel(i1, j1)[c]) * fu;
            out[c] = (top * (1.0 - fv) + bot * fv) as f32;
        }
        out
    }

    /// The bundled reconstruction target: a deterministic pattern
    /// mixing a low-frequency sweep, a radial chirp that approaches
    /// the pixel Nyquist rate near the corners, two mid-frequency
    /// gratings, and hard diagonal steps, with decorrelated channel
    /// phases. The spectrum spans everything from "trivially smooth"
    /// to "finer than a 64-cell feature grid", which is what separates
    /// the encoders in quality comparisons.
    pub fn test_pattern(width: usize, height: usize) -> Result<Self> {
        use std::f64::consts::TAU;
        ImageField::from_fn(width, height, |i, j| {
            let u = (i as f64 + 0.5) / width as f64;
            let v = (j as f64 + 0.5) / height as f64;
            let (cx, cy) = (u - 0.5, v - 0.5);
            let rr2 = cx * cx + cy * cy;
            let square = if ((u + v) * 8.0).floor() as i64 % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            let mut rgb = [0.0f32; 3];
            for (c, out) in rgb.iter_mut().enumerate() {
                let phase = 2.1 * c as f64;
                let base = (TAU * (u + 0.5 * v) + phase).sin();
                let chirp = (TAU * 84.0 * rr2 + 0.5 * phase).sin();
                let grating = (TAU * 48.0 * u).sin() * (TAU * 30.0 * v + phase).sin();
                let s = 0.5 + 0.24 * base + 0.20 * chirp + 0.12 * grating + 0.08 * square;
                *out = s.clamp(0.02, 0.98) as f32;
            }
            rgb
        })
    }
}

/// Draws one supervised image sample: a uniformly random pixel center
/// and its color.
pub fn sample_image(field: &ImageField, rng: &mut Pcg32) -> ((f64, f64), [f32; 3]) {
    let idx = rng.below((field.width * field.height) as u32) as usize;
    let (i, j) = (idx % field.width, idx / field.width);
    (field.pixel_center(i, j), field.pixels[idx])
}

/// An analytic signed-distance scene over the unit cube: primitives
/// combined by constructive solid geometry. Single primitives are
/// exact distances; CSG combinations are lower bounds, and the ridge
/// modifier displaces a surface by a bounded sine product.
#[derive(Debug, Clone, PartialEq)]
pub enum SdfScene {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    Box {
        center: [f64; 3],
        half_extents: [f64; 3],
    },
    /// Ring in the x-y plane around `center`.
    Torus {
        center: [f64; 3],
        major_radius: f64,
        minor_radius: f64,
    },
    /// Adds `amplitude * prod_k sin(frequency * p_k)` to the inner
    /// distance; the displacement never exceeds `amplitude`.
    Ridged {
        inner: std::boxed::Box<SdfScene>,
        amplitude: f64,
        frequency: f64,
    },
    Union(std::boxed::Box<SdfScene>, std::boxed::Box<SdfScene>),
    Intersection(std::boxed::Box<SdfScene>, std::boxed::Box<SdfScene>),
    Subtraction(std::boxed::Box<SdfScene>, std::boxed::Box<SdfScene>),
}

fn length3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Signed distance of `scene` at `p`: negative inside, positive
/// outside, zero on the surface.
pub fn eval_sdf(scene: &SdfScene, p: [f64; 3]) -> f64 {
    match scene {
        SdfScene::Sphere { center, radius } => {
            length3([p[0] - center[0], p[1] - center[1], p[2] - center[2]]) - radius
        }
        SdfScene::Box {
            center,
            half_extents,
        } => {
            let q = [
                (p[0] - center[0]).abs() - half_extents[0],
                (p[1] - center[1]).abs() - half_extents[1],
                (p[2] - center[2]).abs() - half_extents[2],
            ];
            let outside = length3([q[0].max(0.0), q[1].max(0.0), q[2].max(0.0)]);
            outside + q[0].max(q[1]).max(q[2]).min(0.0)
        }
        SdfScene::Torus {
            center,
            major_radius,
            minor_radius,
        } => {
            let q = [p[0] - center[0], p[1] - center[1], p[2] - center[2]];
            let ring = (q[0] * q[0] + q[1] * q[1]).sqrt() - major_radius;
            (ring * ring + q[2] * q[2]).sqrt() - minor_radius
        }
        SdfScene::Ridged {
            inner,
            amplitude,
            frequency,
        } => {
            let ridge = (frequency * p[0]).sin() * (frequency * p[1]).sin()
                * (frequency * p[2]).sin();
            eval_sdf(inner, p) + amplitude * ridge
        }
        SdfScene::Union(a, b) => eval_sdf(a, p).min(eval_sdf(b, p)),
        SdfScene::Intersection(a, b) => eval_sdf(a, p).max(eval_sdf(b, p)),
        SdfScene::Subtraction(a, b) => eval_sdf(a, p).max(-eval_sdf(b, p)),
    }
}

/// Builds one of the bundled scenes. `"sphere"` is a single centered
/// ball; `"csg-demo"` combines a ridge-displaced torus with a box that
/// has a spherical cavity, giving surface detail at several spatial
/// frequencies.
pub fn make_demo_scene(name: &str) -> Result<SdfScene> {
    use std::boxed::Box as B;
    match name {
        "sphere" => Ok(SdfScene::Sphere {
            center: [0.5, 0.5, 0.5],
            radius: 0.3,
        }),
        "csg-demo" => {
            let torus = SdfScene::Ridged {
                inner: B::new(SdfScene::Torus {
                    center: [0.55, 0.55, 0.55],
                    major_radius: 0.22,
                    minor_radius: 0.08,
                }),
                amplitude: 0.025,
                frequency: 24.0,
            };
            let hollow_box = SdfScene::Subtraction(
                B::new(SdfScene::Box {
                    center: [0.3, 0.3, 0.3],
                    half_extents: [0.12, 0.12, 0.12],
                }),
                B::new(SdfScene::Sphere {
                    center: [0.3, 0.3, 0.3],
                    radius: 0.08,
                }),
            );
            Ok(SdfScene::Union(B::new(torus), B::new(hollow_box)))
        }
        other => Err(Error::config(format!(
            "unknown scene {other:?}; available: sphere, csg-demo"
        ))),
    }
}

/// Distance samples on a vertex lattice over the unit cube with a
/// trilinear evaluator; `resolution` counts vertices per axis and
/// samples run x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSdfGrid {
    resolution: [usize; 3],
    values: Vec<f32>,
}

impl DenseSdfGrid {
    pub fn new(resolution: [usize; 3], values: Vec<f32>) -> Result<Self> {
        if resolution.iter().any(|&r| r < 2) {
            return Err(Error::config(
                "dense distance grids need at least 2 vertices per axis",
            ));
        }
        let expect = resolution[0] * resolution[1] * resolution[2];
        if values.len() != expect {
            return Err(Error::config(format!(
                "{}x{}x{} grid needs {} samples, got {}",
                resolution[0],
                resolution[1],
                resolution[2],
                expect,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("distance grid contains non-finite samples"));
        }
        Ok(DenseSdfGrid { resolution, values })
    }

    pub fn from_fn(
        resolution: [usize; 3],
        mut f: impl FnMut([f64; 3]) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(resolution.iter().product());
        for iz in 0..resolution[2] {
            for iy in 0..resolution[1] {
                for ix in 0..resolution[0] {
                    let p = [
                        ix as f64 / (resolution[0] - 1) as f64,
                        iy as f64 / (resolution[1] - 1) as f64,
                        iz as f64 / (resolution[2] - 1) as f64,
                    ];
                    values.push(f(p) as f32);
                }
            }
        }
        DenseSdfGrid::new(resolution, values)
    }

    pub fn resolution(&self) -> [usize; 3] {
        self.resolution
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn vertex(&self, ix: usize, iy: usize, iz: usize) -> f32 {
        let [rx, ry, _] = self.resolution;
        self.values[ix + rx * (iy + ry * iz)]
    }

    /// Trilinear interpolation of the lattice at `p` in the unit cube
    /// (coordinates clamped to the boundary).
    pub fn eval(&self, p: [f64; 3]) -> f64 {
        let mut idx = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for k in 0..3 {
            let cells = (self.resolution[k] - 1) as f64;
            let x = (p[k].clamp(0.0, 1.0)) * cells;
            let i = (x.floor() as usize).min(self.resolution[k] - 2);
            idx[k] = i;
            frac[k] = x - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..8usize {
            let mut w = 1.0;
            let mut v = [0usize; 3];
            for k in 0..3 {
                let hi = (corner >> k) & 1;
                v[k] = idx[k] + hi;
                w *= if hi == 1 { frac[k] } else { 1.0 - frac[k] };
            }
            acc += w * f64::from(self.vertex(v[0], v[1], v[2]));
        }
        acc
    }
}

/// A signed-distance target: either an analytic scene or a dense
/// sample grid. Both evaluate anywhere in the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub enum SdfTarget {
    Scene(SdfScene),
    Grid(DenseSdfGrid),
}

impl SdfTarget {
    pub fn eval(&self, p: [f64; 3]) -> f64 {
        match self {
            SdfTarget::Scene(s) => eval_sdf(s, p),
            SdfTarget::Grid(g) => g.eval(p),
        }
    }
}

/// Monte Carlo intersection-over-union of the negative (inside)
/// regions of two sign oracles over the unit cube. Two empty regions
/// count as a perfect match.
pub fn iou(
    model_a: &dyn Fn([f64; 3]) -> f64,
    model_b: &dyn Fn([f64; 3]) -> f64,
    samples: usize,
    rng: &mut Pcg32,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::config("intersection-over-union needs samples >= 1"));
    }
    let (mut both, mut either) = (0u64, 0u64);
    for _ in 0..samples {
        let p = [rng.next_f64(), rng.next_f64(), rng.next_f64()];
        let ina = model_a(p) < 0.0;
        let inb = model_b(p) < 0.0;
        if ina && inb {
            both += 1;
        }
        if ina || inb {
            either += 1;
        }
    }
    if either == 0 {
        return Ok(1.0);
    }
    Ok(both as f64 / either as f64)
}

/// Central-difference gradient of an oracle; used to walk sample
/// points toward the surface and by the renderer's normals.
pub fn fd_gradient(sdf: &dyn Fn([f64; 3]) -> f64, p: [f64; 3], h: f64) -> [f64; 3] {
    let mut g = [0.0; 3];
    for (k, gk) in g.iter_mut().enumerate() {
        let mut hi = p;
        let mut lo = p;
        hi[k] += h;
        lo[k] -= h;
        *gk = (sdf(hi) - sdf(lo)) / (2.0 * h);
    }
    g
}

fn project_toward_surface(sdf: &dyn Fn([f64; 3]) -> f64, mut p: [f64; 3]) -> [f64; 3] {
    for _ in 0..3 {
        let d = sdf(p);
        if d.abs() < 1e-4 {
            break;
        }
        let g = fd_gradient(sdf, p, 1e-3);
        let n = length3(g);
        if n < 1e-9 {
            break;
        }
        for k in 0..3 {
            p[k] = (p[k] - d * g[k] / n).clamp(0.0, 1.0);
        }
    }
    p
}

/// A supervised coordinate-to-value dataset: 2D RGB image or 3D
/// signed-distance field, with a reference oracle and batch sampler.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldTask {
    Image(ImageField),
    Sdf(SdfTarget),
}

impl FieldTask {
    pub fn input_dim(&self) -> usize {
        match self {
            FieldTask::Image(_) => 2,
            FieldTask::Sdf(_) => 3,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            FieldTask::Image(_) => 3,
            FieldTask::Sdf(_) => 1,
        }
    }

    /// Fills `coords` and `targets` (rows = samples) with one training
    /// batch. Images sample pixel centers uniformly with replacement.
    /// Distance fields alternate uniform cube points with points
    /// walked toward the surface (at most 3 projection steps along the
    /// finite-difference gradient) and Gaussian-jittered with sigma
    /// 0.01, so half of each batch concentrates where the sign changes.
    pub fn sample_batch<T: Real>(
        &self,
        rng: &mut Pcg32,
        coords: &mut DenseMatrix<T>,
        targets: &mut DenseMatrix<T>,
    ) -> Result<()> {
        let n = coords.rows();
        if targets.rows() != n
            || coords.cols() != self.input_dim()
            || targets.cols() != self.output_dim()
        {
            return Err(Error::config(format!(
                "batch buffers {}x{} / {}x{} do not fit a task with {} inputs and {} outputs",
                coords.rows(),
                coords.cols(),
                targets.rows(),
                targets.cols(),
                self.input_dim(),
                self.output_dim()
            )));
        }
        match self {
            FieldTask::Image(img) => {
                for r in 0..n {
                    let ((u, v), rgb) = sample_image(img, rng);
                    coords.row_mut(r)[0] = real(u);
                    coords.row_mut(r)[1] = real(v);
                    for c in 0..3 {
                        targets.row_mut(r)[c] = real(f64::from(rgb[c]));
                    }
                }
            }
            FieldTask::Sdf(target) => {
                let oracle = |p: [f64; 3]| target.eval(p);
                for r in 0..n {
                    let mut p = [rng.next_f64(), rng.next_f64(), rng.next_f64()];
                    if r % 2 == 1 {
                        p = project_toward_surface(&oracle, p);
                        for pk in &mut p {
                            *pk = (*pk + 0.01 * rng.normal()).clamp(0.0, 1.0);
                        }
                    }
                    for k in 0..3 {
                        coords.row_mut(r)[k] = real(p[k]);
                    }
                    targets.row_mut(r)[0] = real(oracle(p));
                }
            }
        }
        Ok(())
    }
}
