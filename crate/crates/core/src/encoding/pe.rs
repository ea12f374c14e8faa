use crate::error::{Error, Result};
use crate::numerics::{real, Real};

/// Sinusoidal positional encoding of a unit-domain coordinate: per
/// input dimension, `[cos(2^o pi x), sin(2^o pi x), ...,
/// cos(2^(o+n-1) pi x), sin(2^(o+n-1) pi x)]` for `n = frequencies`
/// octaves starting at octave `offset`.
///
/// With `offset = 0` this is the classic frequency ladder. A positive
/// offset drops the low octaves, which makes the encoding alias: all
/// frequencies are then periodic with period `2 / 2^offset`, so
/// coordinates that far apart become indistinguishable.
pub fn pe_encode<T: Real>(x: &[T], frequencies: usize, offset: usize, out: &mut [T]) -> Result<()> {
    if x.is_empty() || x.len() > 3 {
        return Err(Error::config(format!(
            "coordinates must have 1 to 3 components, got {}",
            x.len()
        )));
    }
    if frequencies == 0 {
        return Err(Error::config("positional encoding needs at least one frequency"));
    }
    if out.len() != pe_output_dim(x.len(), frequencies) {
        return Err(Error::config(format!(
            "positional encoding writes {} features, got buffer of {}",
            pe_output_dim(x.len(), frequencies),
            out.len()
        )));
    }
    let pi: T = real(std::f64::consts::PI);
    for (k, &xk) in x.iter().enumerate() {
        if !(xk >= T::zero() && xk <= T::one()) {
            return Err(Error::domain(format!(
                "coordinate component {k} = {xk} is outside [0, 1]"
            )));
        }
        let block = &mut out[k * 2 * frequencies..(k + 1) * 2 * frequencies];
        for i in 0..frequencies {
            let angle = real::<T>((1u64 << (offset + i)) as f64) * pi * xk;
            block[2 * i] = angle.cos();
            block[2 * i + 1] = angle.sin();
        }
    }
    Ok(())
}

pub fn pe_output_dim(dims: usize, frequencies: usize) -> usize {
    2 * frequencies * dims
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_encodes_to_alternating_ones_and_zeros() {
        let mut out = [0.0f64; 4];
        pe_encode(&[0.0], 2, 0, &mut out).unwrap();
        assert_eq!(out, [1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn midpoint_hits_quarter_and_half_period() {
        let mut out = [0.0f64; 4];
        pe_encode(&[0.5], 2, 0, &mut out).unwrap();
        let expect = [0.0, 1.0, -1.0, 0.0];
        for (o, e) in out.iter().zip(&expect) {
            assert!((o - e).abs() < 1e-15, "{o} vs {e}");
        }
    }

    #[test]
    fn features_stay_in_unit_interval_band() {
        let mut out = vec![0.0f64; pe_output_dim(2, 5)];
        for step in 0..=100 {
            let t = step as f64 / 100.0;
            pe_encode(&[t, 1.0 - t], 5, 0, &mut out).unwrap();
            for &v in &out {
                assert!((-1.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn per_dimension_blocks_are_independent() {
        let mut joint = vec![0.0f64; pe_output_dim(2, 3)];
        pe_encode(&[0.3, 0.8], 3, 1, &mut joint).unwrap();
        let mut first = vec![0.0f64; pe_output_dim(1, 3)];
        let mut second = vec![0.0f64; pe_output_dim(1, 3)];
        pe_encode(&[0.3], 3, 1, &mut first).unwrap();
        pe_encode(&[0.8], 3, 1, &mut second).unwrap();
        assert_eq!(&joint[..6], &first[..]);
        assert_eq!(&joint[6..], &second[..]);
    }

    #[test]
    fn offset_three_aliases_points_a_quarter_apart() {
        // With the three lowest octaves dropped, the shortest remaining
        // period is 1/4, so these four points collapse onto one code.
        let points = [0.05f64, 0.30, 0.55, 0.80];
        for n in 1..=3usize {
            let dim = pe_output_dim(1, n);
            let encodings: Vec<Vec<f64>> = points
                .iter()
                .map(|&p| {
                    let mut out = vec![0.0; dim];
                    pe_encode(&[p], n, 3, &mut out).unwrap();
                    out
                })
                .collect();
            for a in &encodings {
                for b in &encodings {
                    for (va, vb) in a.iter().zip(b) {
                        assert!(
                            (va - vb).abs() <= 1e-6,
                            "offset-3 encodings differ: {va} vs {vb}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn no_offset_distinguishes_the_same_points() {
        let points = [0.05f64, 0.30, 0.55, 0.80];
        let dim = pe_output_dim(1, 3);
        let encodings: Vec<Vec<f64>> = points
            .iter()
            .map(|&p| {
                let mut out = vec![0.0; dim];
                pe_encode(&[p], 3, 0, &mut out).unwrap();
                out
            })
            .collect();
        for i in 0..encodings.len() {
            for j in i + 1..encodings.len() {
                let max_diff = encodings[i]
                    .iter()
                    .zip(&encodings[j])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                assert!(max_diff > 0.1, "points {i} and {j} collapsed");
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut out = [0.0f64; 4];
        assert!(matches!(
            pe_encode(&[1.2], 2, 0, &mut out),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            pe_encode(&[0.5], 0, 0, &mut out),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            pe_encode(&[0.5], 3, 0, &mut out),
            Err(Error::Config(_))
        ));
    }
}
