//! Magnitude image exports. Volumes (`n_w > 1`) are written as maximum
//! projections along `w` for PNG; raw and CSV keep every voxel.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::VoxelGrid;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ToneMap {
    Linear,
    /// `1 + log10(x / max) / decades`, clamped to `[0, 1]`.
    Log {
        decades: f64,
    },
}

/// 8-bit grayscale PNG normalised to the image maximum. Pixel column is `u`,
/// row is `v` with `v` increasing upward.
pub fn write_png(path: impl AsRef<Path>, grid: &VoxelGrid, values: &[f64], map: ToneMap) -> Result<()> {
    check_len(grid, values)?;
    let (w, h) = (grid.n_u, grid.n_v);
    let mut proj = vec![0.0f64; w * h];
    for (f, v) in values.iter().enumerate() {
        let (i, j, _) = grid.unravel(f);
        let p = &mut proj[i * h + j];
        *p = p.max(*v);
    }
    let max = proj.iter().copied().fold(0.0, f64::max);
    let mut img = image::GrayImage::new(w as u32, h as u32);
    for i in 0..w {
        for j in 0..h {
            let x = if max > 0.0 { proj[i * h + j] / max } else { 0.0 };
            let y = match map {
                ToneMap::Linear => x,
                ToneMap::Log { decades } => {
                    if x > 0.0 {
                        1.0 + x.log10() / decades
                    } else {
                        0.0
                    }
                }
            };
            let px = (y.clamp(0.0, 1.0) * 255.0).round() as u8;
            img.put_pixel(i as u32, (h - 1 - j) as u32, image::Luma([px]));
        }
    }
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

const RAW_MAGIC: &[u8; 8] = b"NLOSF1\0\0";

/// A raw float image as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawImage {
    pub dims: [usize; 3],
    pub t: f64,
    pub origin: Vec3,
    pub axes: [Vec3; 3],
    pub values: Vec<f32>,
}

/// Layout (little endian): magic `b"NLOSF1\0\0"`, `n_u, n_v, n_w: u32`,
/// `t: f64`, grid origin and three axes as `3 x f64`, then `f32` values in
/// flat voxel order.
pub fn write_raw(path: impl AsRef<Path>, grid: &VoxelGrid, values: &[f64], t: f64) -> Result<()> {
    check_len(grid, values)?;
    let mut out = Vec::with_capacity(8 + 12 + 8 + 96 + 4 * values.len());
    out.extend_from_slice(RAW_MAGIC);
    for n in [grid.n_u, grid.n_v, grid.n_w] {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    out.extend_from_slice(&t.to_le_bytes());
    for v in [grid.origin, grid.axis_u, grid.axis_v, grid.axis_w] {
        for c in v.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for v in values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<RawImage> {
    let path = path.as_ref();
    let b = std::fs::read(path)?;
    let bad = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    };
    let head = 8 + 12 + 8 + 96;
    if b.len() < head || &b[..8] != RAW_MAGIC {
        return Err(bad("missing NLOSF1 magic or truncated header"));
    }
    let u = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap()) as usize;
    let f = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
    let dims = [u(8), u(12), u(16)];
    let t = f(20);
    let v3 = |o: usize| Vec3::new(f(o), f(o + 8), f(o + 16));
    let (origin, axes) = (v3(28), [v3(52), v3(76), v3(100)]);
    let n = dims[0] * dims[1] * dims[2];
    if b.len() != head + 4 * n {
        return Err(bad("value count does not match dimensions"));
    }
    let values = b[head..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(RawImage {
        dims,
        t,
        origin,
        axes,
        values,
    })
}

/// `i,j,k,x,y,z,magnitude` per voxel.
pub fn write_csv(path: impl AsRef<Path>, grid: &VoxelGrid, values: &[f64]) -> Result<()> {
    check_len(grid, values)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "i,j,k,x,y,z,magnitude")?;
    for (f, v) in values.iter().enumerate() {
        let (i, j, k) = grid.unravel(f);
        let p = grid.point_flat(f);
        writeln!(w, "{i},{j},{k},{},{},{},{v:e}", p.x, p.y, p.z)?;
    }
    w.flush()?;
    Ok(())
}

fn check_len(grid: &VoxelGrid, values: &[f64]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for a grid of {} voxels",
            values.len(),
            grid.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Point3;

    fn grid() -> VoxelGrid {
        VoxelGrid::plane(Point3::new(0.0, 0.0, 1.0), Vec3::x(), Vec3::y(), 1.0, 0.5, 5, 3)
    }

    #[test]
    fn png_is_max_normalised() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let vals: Vec<f64> = (0..15).map(|i| i as f64).collect();
        write_png(&p, &grid(), &vals, ToneMap::Linear).unwrap();
        let img = image::open(&p).unwrap().to_luma8();
        assert_eq!(img.dimensions(), (5, 3));
        // voxel (4, 2) is the maximum and sits top-right
        assert_eq!(img.get_pixel(4, 0).0[0], 255);
        assert_eq!(img.get_pixel(0, 2).0[0], 0);
        write_png(&p, &grid(), &vals, ToneMap::Log { decades: 3.0 }).unwrap();
    }

    #[test]
    fn raw_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.raw");
        let vals: Vec<f64> = (0..15).map(|i| i as f64 * 0.5).collect();
        write_raw(&p, &grid(), &vals, 2e-9).unwrap();
        let r = read_raw(&p).unwrap();
        assert_eq!(r.dims, [5, 3, 1]);
        assert_eq!(r.t, 2e-9);
        assert_eq!(r.origin, grid().origin);
        assert_eq!(r.values[7], 3.5);
    }

    #[test]
    fn csv_has_one_row_per_voxel() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_csv(&p, &grid(), &[1.0; 15]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 16);
    }
}
