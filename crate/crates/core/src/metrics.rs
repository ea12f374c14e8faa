//! Image quality metrics: peak signal-to-noise ratio over RGB entries
//! and the structural similarity index on luminance with Gaussian
//! windows. Both operate on unit-range images.

use crate::error::{Error, Result};
use crate::fields::ImageField;

/// Peak signal-to-noise ratio in decibels, `10 log10(1 / MSE)` with
/// the mean squared error taken over every RGB entry. Identical
/// images return the infinity sentinel.
pub fn psnr(a: &ImageField, b: &ImageField) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::config(format!(
            "cannot compare a {}x{} image with a {}x{} image",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let mut sum = 0.0f64;
    for (pa, pb) in a.pixels().iter().zip(b.pixels()) {
        for c in 0..3 {
            let d = f64::from(pa[c]) - f64::from(pb[c]);
            sum += d * d;
        }
    }
    let mse = sum / (a.pixels().len() * 3) as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Settings for the structural similarity index. The defaults are the
/// widely reproduced convention: an 11x11 Gaussian window with sigma
/// 1.5, stabilizers K1 = 0.01 and K2 = 0.03 at unit dynamic range, and
/// BT.709 luminance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
    pub luminance_weights: [f64; 3],
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
            luminance_weights: [0.2126, 0.7152, 0.0722],
        }
    }
}

impl SsimConfig {
    fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::config(format!(
                "similarity window {} must be odd and at least 3",
                self.window
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::config("similarity window sigma must be positive"));
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            return Err(Error::config("similarity stabilizers must be positive"));
        }
        if !(self.dynamic_range > 0.0) {
            return Err(Error::config("dynamic range must be positive"));
        }
        Ok(())
    }

    /// Normalized 1D Gaussian taps; the 2D window is their outer
    /// product, so its weights also sum to one.
    fn kernel(&self) -> Vec<f64> {
        let half = (self.window / 2) as isize;
        let mut taps: Vec<f64> = (-half..=half)
            .map(|i| (-((i * i) as f64) / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let total: f64 = taps.iter().sum();
        for t in &mut taps {
            *t /= total;
        }
        taps
    }
}

fn luminance(img: &ImageField, weights: [f64; 3]) -> Vec<f64> {
    img.pixels()
        .iter()
        .map(|p| {
            weights[0] * f64::from(p[0]) + weights[1] * f64::from(p[1])
                + weights[2] * f64::from(p[2])
        })
        .collect()
}

/// Separable valid-mode convolution: `width x height` input shrinks by
/// `window - 1` along each axis.
fn convolve_valid(data: &[f64], width: usize, height: usize, taps: &[f64]) -> (Vec<f64>, usize, usize) {
    let k = taps.len();
    let out_w = width - k + 1;
    // Horizontal pass.
    let mut horiz = vec![0.0; out_w * height];
    for j in 0..height {
        for i in 0..out_w {
            let mut acc = 0.0;
            for (o, t) in taps.iter().enumerate() {
                acc += t * data[j * width + i + o];
            }
            horiz[j * out_w + i] = acc;
        }
    }
    // Vertical pass.
    let out_h = height - k + 1;
    let mut out = vec![0.0; out_w * out_h];
    for j in 0..out_h {
        for i in 0..out_w {
            let mut acc = 0.0;
            for (o, t) in taps.iter().enumerate() {
                acc += t * horiz[(j + o) * out_w + i];
            }
            out[j * out_w + i] = acc;
        }
    }
    (out, out_w, out_h)
}

/// Mean structural similarity over all fully interior windows (no
/// padding is invented at the borders). Returns a value in `[-1, 1]`;
/// identical images score exactly 1.
pub fn ssim(a: &ImageField, b: &ImageField, cfg: &SsimConfig) -> Result<f64> {
    cfg.validate()?;
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::config(format!(
            "cannot compare a {}x{} image with a {}x{} image",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    if a.width() < cfg.window || a.height() < cfg.window {
        return Err(Error::config(format!(
            "{}x{} image is smaller than the {}x{} similarity window",
            a.width(),
            a.height(),
            cfg.window,
            cfg.window
        )));
    }

    let (w, h) = (a.width(), a.height());
    let la = luminance(a, cfg.luminance_weights);
    let lb = luminance(b, cfg.luminance_weights);
    let aa: Vec<f64> = la.iter().map(|x| x * x).collect();
    let bb: Vec<f64> = lb.iter().map(|x| x * x).collect();
    let ab: Vec<f64> = la.iter().zip(&lb).map(|(x, y)| x * y).collect();

    let taps = cfg.kernel();
    let (mu_a, ow, oh) = convolve_valid(&la, w, h, &taps);
    let (mu_b, ..) = convolve_valid(&lb, w, h, &taps);
    let (e_aa, ..) = convolve_valid(&aa, w, h, &taps);
    let (e_bb, ..) = convolve_valid(&bb, w, h, &taps);
    let (e_ab, ..) = convolve_valid(&ab, w, h, &taps);

    let c1 = (cfg.k1 * cfg.dynamic_range).powi(2);
    let c2 = (cfg.k2 * cfg.dynamic_range).powi(2);
    let mut total = 0.0;
    for i in 0..ow * oh {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
            / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
    Ok(total / (ow * oh) as f64)
}
