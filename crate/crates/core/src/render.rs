//! Sphere-tracing renderer over any signed-distance oracle, with
//! finite-difference normals and lit-sphere (matcap) shading. Any
//! oracle works — analytic scenes and trained models alike — and a
//! render is a pure function of its inputs, so images are reproducible
//! bit for bit at any thread count.

use crate::error::{Error, Result};
use crate::fields::ImageField;

type Vec3 = [f64; 3];

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(v: Vec3) -> Option<Vec3> {
    let n = dot(v, v).sqrt();
    if n < 1e-12 {
        return None;
    }
    Some([v[0] / n, v[1] / n, v[2] / n])
}

fn add_scaled(p: Vec3, d: Vec3, t: f64) -> Vec3 {
    [p[0] + t * d[0], p[1] + t * d[1], p[2] + t * d[2]]
}

/// A pinhole camera; rays go through pixel centers of a canvas of
/// `width` x `height` pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    pub fov_degrees: f64,
    pub width: usize,
    pub height: usize,
}

/// Orthonormal view basis: right, true up, and forward.
struct ViewBasis {
    right: Vec3,
    up: Vec3,
    forward: Vec3,
}

impl Camera {
    fn basis(&self) -> Result<ViewBasis> {
        if !(self.fov_degrees > 0.0 && self.fov_degrees < 180.0) {
            return Err(Error::config(format!(
                "field of view {} degrees must lie strictly between 0 and 180",
                self.fov_degrees
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("camera canvas must be at least 1x1"));
        }
        let forward = normalize([
            self.look_at[0] - self.position[0],
            self.look_at[1] - self.position[1],
            self.look_at[2] - self.position[2],
        ])
        .ok_or_else(|| Error::config("camera position and look-at coincide"))?;
        let right = normalize(cross(forward, self.up))
            .ok_or_else(|| Error::config("camera up vector is parallel to the view direction"))?;
        let up = cross(right, forward);
        Ok(ViewBasis { right, up, forward })
    }

    /// Unit ray direction through the center of pixel `(i, j)`.
    fn ray_direction(&self, basis: &ViewBasis, i: usize, j: usize) -> Vec3 {
        let half_h = (self.fov_degrees.to_radians() / 2.0).tan();
        let aspect = self.width as f64 / self.height as f64;
        let x = ((i as f64 + 0.5) / self.width as f64 * 2.0 - 1.0) * half_h * aspect;
        let y = (1.0 - (j as f64 + 0.5) / self.height as f64 * 2.0) * half_h;
        let dir = [
            basis.forward[0] + x * basis.right[0] + y * basis.up[0],
            basis.forward[1] + x * basis.right[1] + y * basis.up[1],
            basis.forward[2] + x * basis.right[2] + y * basis.up[2],
        ];
        normalize(dir).expect("forward component keeps the direction nonzero")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceConfig {
    /// Distance below which a ray counts as having hit the surface.
    pub tolerance: f64,
    pub max_steps: usize,
    pub max_ray_length: f64,
    /// Finite-difference step for normal estimation.
    pub normal_step: f64,
    /// Color written where a ray misses everything.
    pub background: [f32; 3],
}

impl Default for TraceConfig {
    fn default() -> Self {
        // Tolerances loose enough that network-evaluated fields, whose
        // distances are only approximate, still converge.
        TraceConfig {
            tolerance: 1e-3,
            max_steps: 256,
            max_ray_length: 4.0,
            normal_step: 1e-3,
            background: [0.12, 0.12, 0.14],
        }
    }
}

impl TraceConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !(self.normal_step > 0.0) {
            return Err(Error::config(
                "trace tolerance and normal step must be positive",
            ));
        }
        if self.max_steps == 0 {
            return Err(Error::config("trace needs at least one step"));
        }
        if !(self.max_ray_length > 0.0) {
            return Err(Error::config("max ray length must be positive"));
        }
        Ok(())
    }
}

/// Marches `origin + t * direction` by the field value until the
/// field drops below the tolerance (hit) or the ray exceeds its step
/// or length budget (miss). `direction` must be unit length.
pub fn sphere_trace(
    sdf: &(dyn Fn(Vec3) -> f64 + Sync),
    origin: Vec3,
    direction: Vec3,
    cfg: &TraceConfig,
) -> Option<Vec3> {
    let mut t = 0.0;
    for _ in 0..cfg.max_steps {
        let p = add_scaled(origin, direction, t);
        let d = sdf(p);
        if d < cfg.tolerance {
            return Some(p);
        }
        t += d;
        if t > cfg.max_ray_length {
            return None;
        }
    }
    None
}

/// Central-difference surface normal; a vanishing gradient falls back
/// to +z so callers always get a unit vector.
pub fn estimate_normal(sdf: &(dyn Fn(Vec3) -> f64 + Sync), p: Vec3, h: f64) -> Vec3 {
    let g = crate::fields::fd_gradient(sdf, p, h);
    normalize(g).unwrap_or([0.0, 0.0, 1.0])
}

/// Looks the camera-space normal up in the matcap: the unit disc of
/// front-facing normals maps onto the texture square via
/// `uv = (0.5 + 0.5 n_x, 0.5 - 0.5 n_y)`.
pub fn lit_sphere_shade(normal_cam: Vec3, matcap: &ImageField) -> [f32; 3] {
    matcap.sample_bilinear(0.5 + 0.5 * normal_cam[0], 0.5 - 0.5 * normal_cam[1])
}

/// The bundled shading texture: a Lambert-lit hemisphere under a warm
/// key light plus a cool rim highlight, evaluated per texel.
pub fn default_matcap(size: usize) -> Result<ImageField> {
    if size < 2 {
        return Err(Error::config("matcap must be at least 2x2"));
    }
    let light = normalize([0.4, 0.6, 0.7]).unwrap();
    ImageField::from_fn(size, size, |i, j| {
        let nx = (i as f64 + 0.5) / size as f64 * 2.0 - 1.0;
        let ny = 1.0 - (j as f64 + 0.5) / size as f64 * 2.0;
        let nz = (1.0 - nx * nx - ny * ny).max(0.0).sqrt();
        let n = normalize([nx, ny, nz]).unwrap_or([0.0, 0.0, 1.0]);
        let lambert = dot(n, light).max(0.0);
        let rim = (1.0 - nz).powi(3);
        let mut rgb = [0.0f32; 3];
        let warm = [1.0, 0.93, 0.85];
        let cool = [0.55, 0.65, 1.0];
        for c in 0..3 {
            let v = 0.08 + 0.72 * lambert * warm[c] + 0.28 * rim * cool[c];
            rgb[c] = v.clamp(0.0, 1.0) as f32;
        }
        rgb
    })
}

/// Renders the field: one primary ray per pixel center, sphere trace,
/// finite-difference normal, matcap shade; misses get the background
/// color. Rows are split across `threads` workers; the output is
/// identical for any worker count.
pub fn render(
    sdf: &(dyn Fn(Vec3) -> f64 + Sync),
    camera: &Camera,
    matcap: &ImageField,
    cfg: &TraceConfig,
    threads: usize,
) -> Result<ImageField> {
    cfg.validate()?;
    let basis = camera.basis()?;
    if matcap.width() != matcap.height() || matcap.width() < 2 {
        return Err(Error::config(format!(
            "matcap must be square and at least 2x2, got {}x{}",
            matcap.width(),
            matcap.height()
        )));
    }
    let threads = threads.max(1).min(camera.height);

    let shade_row = |j: usize, row: &mut [[f32; 3]]| {
        for (i, out) in row.iter_mut().enumerate() {
            let dir = camera.ray_direction(&basis, i, j);
            *out = match sphere_trace(sdf, camera.position, dir, cfg) {
                Some(hit) => {
                    let n = estimate_normal(sdf, hit, cfg.normal_step);
                    let n_cam = [
                        dot(n, basis.right),
                        dot(n, basis.up),
                        -dot(n, basis.forward),
                    ];
                    lit_sphere_shade(n_cam, matcap)
                }
                None => cfg.background,
            };
        }
    };

    let (w, h) = (camera.width, camera.height);
    let mut pixels = vec![[0.0f32; 3]; w * h];
    if threads == 1 {
        for (j, row) in pixels.chunks_mut(w).enumerate() {
            shade_row(j, row);
        }
    } else {
        let rows_per = h.div_ceil(threads);
        std::thread::scope(|scope| {
            for (chunk_idx, chunk) in pixels.chunks_mut(rows_per * w).enumerate() {
                let shade_row = &shade_row;
                scope.spawn(move || {
                    for (r, row) in chunk.chunks_mut(w).enumerate() {
                        shade_row(chunk_idx * rows_per + r, row);
                    }
                });
            }
        });
    }
    ImageField::new(w, h, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{eval_sdf, make_demo_scene};

    fn sphere_oracle() -> impl Fn(Vec3) -> f64 + Sync {
        let scene = make_demo_scene("sphere").unwrap();
        move |p| eval_sdf(&scene, p)
    }

    fn test_camera(size: usize) -> Camera {
        Camera {
            position: [0.5, 0.5, -0.8],
            look_at: [0.5, 0.5, 0.5],
            up: [0.0, 1.0, 0.0],
            fov_degrees: 45.0,
            width: size,
            height: size,
        }
    }

    #[test]
    fn head_on_ray_hits_at_the_closed_form_distance() {
        let sdf = sphere_oracle();
        let cfg = TraceConfig::default();
        let hit = sphere_trace(&sdf, [0.5, 0.5, -0.5], [0.0, 0.0, 1.0], &cfg).unwrap();
        // Front of an r=0.3 sphere centered at z=0.5, from z=-0.5.
        assert!((hit[2] - 0.2).abs() <= cfg.tolerance + 1e-9, "hit at {hit:?}");
        assert!((hit[0] - 0.5).abs() < 1e-12 && (hit[1] - 0.5).abs() < 1e-12);
        assert!(sdf(hit).abs() <= cfg.tolerance);
    }

    #[test]
    fn ray_pointing_away_misses() {
        let sdf = sphere_oracle();
        let cfg = TraceConfig::default();
        assert!(sphere_trace(&sdf, [0.5, 0.5, -0.5], [0.0, 0.0, -1.0], &cfg).is_none());
    }

    #[test]
    fn halving_the_tolerance_moves_the_hit_by_less_than_the_old_one() {
        let sdf = sphere_oracle();
        let coarse = TraceConfig::default();
        let fine = TraceConfig {
            tolerance: coarse.tolerance / 2.0,
            ..coarse.clone()
        };
        let dir = normalize([0.1, -0.05, 1.0]).unwrap();
        let a = sphere_trace(&sdf, [0.45, 0.55, -0.5], dir, &coarse).unwrap();
        let b = sphere_trace(&sdf, [0.45, 0.55, -0.5], dir, &fine).unwrap();
        let moved = dot(
            [a[0] - b[0], a[1] - b[1], a[2] - b[2]],
            [a[0] - b[0], a[1] - b[1], a[2] - b[2]],
        )
        .sqrt();
        assert!(moved < coarse.tolerance, "hit moved {moved}");
    }

    #[test]
    fn normals_match_analytic_directions() {
        let sdf = sphere_oracle();
        let n = estimate_normal(&sdf, [0.8, 0.5, 0.5], 1e-3);
        assert!((n[0] - 1.0).abs() < 1e-3 && n[1].abs() < 1e-3 && n[2].abs() < 1e-3);

        let plane = |p: Vec3| p[2] - 0.4;
        let n = estimate_normal(&plane, [0.3, 0.9, 0.7], 1e-3);
        assert!((n[2] - 1.0).abs() < 1e-12);

        // Unit length everywhere, including on a lumpy field.
        let scene = make_demo_scene("csg-demo").unwrap();
        let lumpy = move |p: Vec3| eval_sdf(&scene, p);
        let mut rng = crate::numerics::Pcg32::new(80, 0);
        for _ in 0..100 {
            let p = [rng.next_f64(), rng.next_f64(), rng.next_f64()];
            let n = estimate_normal(&lumpy, p, 1e-3);
            assert!((dot(n, n).sqrt() - 1.0).abs() <= 1e-6);
        }

        // A flat field has no gradient; the fallback is +z.
        let flat = |_: Vec3| 1.0;
        assert_eq!(estimate_normal(&flat, [0.1, 0.2, 0.3], 1e-3), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn matcap_lookup_maps_the_normal_disc_onto_the_texture() {
        let matcap = ImageField::from_fn(5, 5, |i, j| {
            [i as f32 / 4.0, j as f32 / 4.0, 0.5]
        })
        .unwrap();
        // Straight at the camera: the center texel.
        assert_eq!(lit_sphere_shade([0.0, 0.0, 1.0], &matcap), matcap.pixel(2, 2));
        // Facing right: center of the right edge.
        assert_eq!(lit_sphere_shade([1.0, 0.0, 0.0], &matcap), matcap.pixel(4, 2));
        // Facing up: top-center (v axis points down the texture).
        assert_eq!(lit_sphere_shade([0.0, 1.0, 0.0], &matcap), matcap.pixel(2, 0));
    }

    #[test]
    fn empty_scene_renders_pure_background() {
        let empty = |_: Vec3| 1.0e3;
        let cfg = TraceConfig::default();
        let img = render(&empty, &test_camera(16), &default_matcap(32).unwrap(), &cfg, 1).unwrap();
        assert!(img.pixels().iter().all(|&p| p == cfg.background));
    }

    #[test]
    fn silhouette_area_matches_the_projected_disc() {
        let sdf = sphere_oracle();
        let cfg = TraceConfig::default();
        let cam = test_camera(256);
        let img = render(&sdf, &cam, &default_matcap(64).unwrap(), &cfg, 1).unwrap();
        let hits = img
            .pixels()
            .iter()
            .filter(|&&p| p != cfg.background)
            .count() as f64;
        // Camera 1.3 from the center: angular radius asin(r/d), disc
        // radius in pixels = tan(angle)/tan(fov/2) * (size/2).
        let angle = (0.3f64 / 1.3).asin();
        let radius_px = angle.tan() / (22.5f64.to_radians()).tan() * 128.0;
        let expect = std::f64::consts::PI * radius_px * radius_px;
        let rel = (hits - expect).abs() / expect;
        assert!(rel < 0.03, "silhouette {hits} px vs {expect:.0} px ({rel:.4})");
    }

    #[test]
    fn shaded_pixels_stay_inside_the_matcap_gamut() {
        let sdf = sphere_oracle();
        let cfg = TraceConfig::default();
        let matcap = default_matcap(64).unwrap();
        let img = render(&sdf, &test_camera(64), &matcap, &cfg, 1).unwrap();
        let mut lo = [1.0f32; 3];
        let mut hi = [0.0f32; 3];
        for p in matcap.pixels() {
            for c in 0..3 {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        for p in img.pixels().iter().filter(|&&p| p != cfg.background) {
            for c in 0..3 {
                assert!(p[c] >= lo[c] - 1e-6 && p[c] <= hi[c] + 1e-6);
            }
        }
    }

    #[test]
    fn renders_are_bit_identical_across_repeats_and_thread_counts() {
        let scene = make_demo_scene("csg-demo").unwrap();
        let sdf = move |p: Vec3| eval_sdf(&scene, p);
        let cfg = TraceConfig::default();
        let matcap = default_matcap(32).unwrap();
        let cam = test_camera(48);
        let a = render(&sdf, &cam, &matcap, &cfg, 1).unwrap();
        let b = render(&sdf, &cam, &matcap, &cfg, 1).unwrap();
        let c = render(&sdf, &cam, &matcap, &cfg, 3).unwrap();
        let d = render(&sdf, &cam, &matcap, &cfg, 64).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a, d);
    }

    #[test]
    fn invalid_cameras_and_configs_are_rejected() {
        let sdf = |_: Vec3| 1.0;
        let matcap = default_matcap(8).unwrap();
        let cfg = TraceConfig::default();
        let mut cam = test_camera(8);
        cam.look_at = cam.position;
        assert!(render(&sdf, &cam, &matcap, &cfg, 1).is_err());
        let mut cam = test_camera(8);
        cam.fov_degrees = 180.0;
        assert!(render(&sdf, &cam, &matcap, &cfg, 1).is_err());
        let mut cam = test_camera(8);
        cam.up = [0.0, 0.0, 1.0]; // parallel to the view direction
        cam.look_at = [0.5, 0.5, 2.0];
        assert!(render(&sdf, &cam, &matcap, &cfg, 1).is_err());
        let bad = TraceConfig {
            tolerance: 0.0,
            ..cfg.clone()
        };
        assert!(render(&sdf, &test_camera(8), &matcap, &bad, 1).is_err());
        let wide = ImageField::constant(4, 2, [0.5; 3]).unwrap();
        assert!(render(&sdf, &test_camera(8), &wide, &cfg, 1).is_err());
    }

    #[test]
    fn trained_model_renders_close_to_the_analytic_scene() {
        use crate::encoding::EncodingConfig;
        use crate::fields::{FieldTask, SdfTarget};
        use crate::model::FieldModel;
        use crate::network::OutputActivation;
        use crate::optim::{train, AdamState, LossKind, TrainConfig};

        let scene = make_demo_scene("sphere").unwrap();
        let mut model = FieldModel::<f32>::init(
            EncodingConfig::Local {
                dims: 3,
                cells: 8,
                frequencies: 2,
                shared_sin_cos: false,
            },
            &[32, 32],
            1,
            0.01,
            OutputActivation::Identity,
            &mut crate::numerics::Pcg32::new(81, 0),
        )
        .unwrap();
        let task = FieldTask::Sdf(SdfTarget::Scene(scene.clone()));
        let cfg = TrainConfig {
            loss: LossKind::L2,
            learning_rate: 0.02,
            batch_size: 512,
            iterations: 600,
            seed: 82,
            mape_epsilon: 0.01,
            checkpoint_every: 0,
        };
        let mut opt = AdamState::for_groups(&model.param_slices());
        train(&mut model, &task, &cfg, &mut opt, |_, _, _| Ok(())).unwrap();

        let trace = TraceConfig::default();
        let matcap = default_matcap(64).unwrap();
        let cam = test_camera(96);
        let exact = move |p: Vec3| eval_sdf(&scene, p);
        let reference = render(&exact, &cam, &matcap, &trace, 1).unwrap();
        let oracle = model.sdf_oracle().unwrap();
        let learned = render(&oracle, &cam, &matcap, &trace, 1).unwrap();
        let db = crate::metrics::psnr(&reference, &learned).unwrap();
        assert!(db > 30.0, "trained render at {db:.2} dB");
    }

    #[test]
    fn interior_ray_origin_reports_an_immediate_hit() {
        let sdf = sphere_oracle();
        let cfg = TraceConfig::default();
        let hit = sphere_trace(&sdf, [0.5, 0.5, 0.5], [0.0, 0.0, 1.0], &cfg).unwrap();
        assert_eq!(hit, [0.5, 0.5, 0.5]);
    }
}
