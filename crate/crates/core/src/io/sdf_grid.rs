//! Dense distance-grid files: magic `SDFG1`, three little-endian
//! 32-bit per-axis resolutions, then the 32-bit float samples in
//! x-fastest order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::DenseSdfGrid;

use super::ByteReader;

const MAGIC: &[u8; 5] = b"SDFG1";

pub fn save_sdf_grid(path: &Path, grid: &DenseSdfGrid) -> Result<()> {
    let res = grid.resolution();
    let mut bytes = Vec::with_capacity(5 + 12 + grid.values().len() * 4);
    bytes.extend_from_slice(MAGIC);
    for r in res {
        bytes.extend_from_slice(&(r as u32).to_le_bytes());
    }
    for v in grid.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_sdf_grid(path: &Path) -> Result<DenseSdfGrid> {
    let data = std::fs::read(path)?;
    let mut r = ByteReader::new(&data);
    let magic = r.take(5, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(format!(
            "not a distance grid: magic {:?} (expected \"SDFG1\")",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut res = [0usize; 3];
    for (axis, out) in res.iter_mut().enumerate() {
        *out = r.u32_le(&format!("axis {axis} resolution"))? as usize;
    }
    let count = res[0]
        .checked_mul(res[1])
        .and_then(|n| n.checked_mul(res[2]))
        .ok_or_else(|| Error::format("grid resolution overflows"))?;
    let values = r.f32_slice_le(count, "distance samples")?;
    r.expect_end("distance samples")?;
    DenseSdfGrid::new(res, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{eval_sdf, make_demo_scene};

    #[test]
    fn round_trip_is_bit_exact() {
        let scene = make_demo_scene("csg-demo").unwrap();
        let grid = DenseSdfGrid::from_fn([6, 5, 4], |p| eval_sdf(&scene, p)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.sdfg");
        save_sdf_grid(&p1, &grid).unwrap();
        let back = load_sdf_grid(&p1).unwrap();
        assert_eq!(grid, back);
        let p2 = dir.path().join("b.sdfg");
        save_sdf_grid(&p2, &back).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn corrupt_files_are_rejected_with_context() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.sdfg");

        std::fs::write(&path, b"WRONG").unwrap();
        let err = load_sdf_grid(&path).unwrap_err().to_string();
        assert!(err.contains("SDFG1"), "{err}");

        // Header promises 2x2x2 = 8 samples but carries only 3.
        let mut bytes = b"SDFG1".to_vec();
        for _ in 0..3 {
            bytes.extend_from_slice(&2u32.to_le_bytes());
        }
        bytes.extend_from_slice(&[0u8; 12]);
        std::fs::write(&path, &bytes).unwrap();
        let err = load_sdf_grid(&path).unwrap_err().to_string();
        assert!(err.contains("needs 32") && err.contains("12 left"), "{err}");

        // Trailing garbage after a valid payload.
        let grid = DenseSdfGrid::new([2, 2, 2], vec![0.5; 8]).unwrap();
        save_sdf_grid(&path, &grid).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.push(0);
        std::fs::write(&path, &bytes).unwrap();
        assert!(load_sdf_grid(&path).is_err());
    }
}
