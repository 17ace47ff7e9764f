use num_complex::Complex64;
use rayon::prelude::*;

use super::{backproject, pulse_spectrum, rsd_kernel, scene_response, FrequencyBand, IlluminationPulse, PhasorField};
use crate::error::{Error, Result};
use crate::render::ImpulseResponse;
use crate::scene::VoxelGrid;
use crate::Point3;

/// Spectral magnitudes below this fraction of the peak are dropped.
pub const DEFAULT_TRUNCATION: f64 = 1e-3;

/// Complex image per voxel per retained frequency, `[voxel][omega]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FocalStackImage {
    pub grid: VoxelGrid,
    pub values: Vec<Complex64>,
    pub band: FrequencyBand,
}

impl FocalStackImage {
    pub fn new(grid: VoxelGrid, values: Vec<Complex64>, band: FrequencyBand) -> Result<Self> {
        if values.len() != grid.len() * band.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} voxels x {} frequencies",
                values.len(),
                grid.len(),
                band.len()
            )));
        }
        Ok(FocalStackImage { grid, values, band })
    }

    pub fn row(&self, v: usize) -> &[Complex64] {
        let n = self.band.len();
        &self.values[v * n..(v + 1) * n]
    }

    /// The image as a phasor field on its voxels, weighted by voxel-face area.
    pub fn to_field(&self) -> PhasorField {
        PhasorField {
            points: self.grid.points(),
            area: vec![self.grid.face_area(); self.grid.len()],
            values: self.values.clone(),
            band: self.band.clone(),
        }
    }
}

/// One time sample of a [`FocalStackImage`].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSlice {
    pub grid: VoxelGrid,
    pub t: f64,
    pub complex: Vec<Complex64>,
    pub magnitude: Vec<f64>,
}

impl TimeSlice {
    /// Flat index and value of the brightest voxel (lowest index on ties).
    pub fn argmax(&self) -> (usize, f64) {
        self.magnitude
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, m)| if m > best.1 { (i, m) } else { best })
    }

    pub fn max(&self) -> f64 {
        self.argmax().1
    }

    pub fn median(&self) -> f64 {
        let mut m = self.magnitude.clone();
        m.sort_by(f64::total_cmp);
        let n = m.len();
        if n == 0 {
            return 0.0;
        }
        if n % 2 == 1 {
            m[n / 2]
        } else {
            0.5 * (m[n / 2 - 1] + m[n / 2])
        }
    }

    /// Magnitude at the voxel nearest to `p`.
    pub fn nearest(&self, p: &Point3) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for (i, m) in self.magnitude.iter().enumerate() {
            let d = (self.grid.point_flat(i) - p).norm_squared();
            if d < best.0 {
                best = (d, *m);
            }
        }
        best.1
    }
}

/// `sum_Omega values[v][Omega] e^{+i 2 pi Omega t}` per voxel. `t = 0` is the
/// plain sum of frequency components.
pub fn evaluate_at_time(img: &FocalStackImage, t: f64) -> TimeSlice {
    let nf = img.band.len();
    let phases: Vec<Complex64> = img
        .band
        .omegas
        .iter()
        .map(|w| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * w * t))
        .collect();
    let complex: Vec<Complex64> = img
        .values
        .par_chunks(nf.max(1))
        .take(img.grid.len())
        .map(|row| {
            if t == 0.0 {
                row.iter().sum()
            } else {
                row.iter().zip(&phases).map(|(v, p)| v * p).sum()
            }
        })
        .collect();
    let complex = if nf == 0 {
        vec![Complex64::default(); img.grid.len()]
    } else {
        complex
    };
    TimeSlice {
        grid: img.grid.clone(),
        t,
        magnitude: complex.iter().map(|c| c.norm()).collect(),
        complex,
    }
}

/// Cached scene response for repeated imaging of one dataset.
#[derive(Debug, Clone)]
pub struct Imager {
    pub field: PhasorField,
    pub xl: Point3,
}

impl Imager {
    pub fn new(h: &ImpulseResponse, pulse: &IlluminationPulse) -> Result<Self> {
        Self::with_truncation(h, pulse, DEFAULT_TRUNCATION)
    }

    pub fn with_truncation(h: &ImpulseResponse, pulse: &IlluminationPulse, eps: f64) -> Result<Self> {
        let band = pulse_spectrum(pulse, h.dt, FrequencyBand::dft_len_for(h.n_bins), eps)?;
        Self::with_band(h, &band)
    }

    pub fn with_band(h: &ImpulseResponse, band: &FrequencyBand) -> Result<Self> {
        Ok(Imager {
            field: scene_response(h, band)?,
            xl: h.relay.laser_point,
        })
    }

    pub fn band(&self) -> &FrequencyBand {
        &self.field.band
    }

    pub fn transient(&self, grid: &VoxelGrid) -> Result<FocalStackImage> {
        let pts = grid.points();
        let values = backproject(&self.field.points, &self.field.area, &self.field.values, &self.field.band, &pts)?;
        FocalStackImage::new(grid.clone(), values, self.field.band.clone())
    }

    pub fn confocal(&self, grid: &VoxelGrid) -> Result<FocalStackImage> {
        let tc = self.transient(grid)?;
        confocal_from_transient(tc, &self.xl)
    }
}

/// Multiplies each voxel row by the illumination leg `rsd_kernel(x_l, x_v)`.
pub(crate) fn confocal_from_transient(mut tc: FocalStackImage, xl: &Point3) -> Result<FocalStackImage> {
    let nf = tc.band.len();
    if nf == 0 {
        return Ok(tc);
    }
    let omegas = tc.band.omegas.clone();
    let grid = tc.grid.clone();
    tc.values.par_chunks_mut(nf).enumerate().try_for_each(|(v, row)| -> Result<()> {
        let xv = grid.point_flat(v);
        for (x, w) in row.iter_mut().zip(&omegas) {
            *x *= rsd_kernel(xl, &xv, *w)?;
        }
        Ok(())
    })?;
    Ok(tc)
}

/// `f_tc(x_v, Omega) = sum_s rsd_kernel(x_s, x_v) P(x_s, Omega) dA`.
pub fn transient_camera(h: &ImpulseResponse, pulse: &IlluminationPulse, grid: &VoxelGrid) -> Result<FocalStackImage> {
    Imager::new(h, pulse)?.transient(grid)
}

/// `f_cc(x_v, Omega) = rsd_kernel(x_l, x_v) f_tc(x_v, Omega)`.
pub fn confocal_camera(h: &ImpulseResponse, pulse: &IlluminationPulse, grid: &VoxelGrid) -> Result<FocalStackImage> {
    Imager::new(h, pulse)?.confocal(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::RelayAperture;
    use crate::Vec3;

    fn tiny() -> (ImpulseResponse, VoxelGrid) {
        let relay = RelayAperture::centered(Point3::zeros(), 1.0, 1.0, 3, 3);
        let mut h = ImpulseResponse::zeros(relay, 1e-11, 512);
        for s in 0..9 {
            h.values[s * 512 + 200 + 7 * s] = 1.0 + s as f64;
        }
        let grid = VoxelGrid::plane(Point3::new(0.0, 0.0, 0.8), Vec3::x(), Vec3::y(), 0.4, 0.4, 4, 4);
        (h, grid)
    }

    #[test]
    fn zero_response_gives_zero_image() {
        let (h, grid) = tiny();
        let z = ImpulseResponse::zeros(h.relay.clone(), h.dt, h.n_bins);
        let p = IlluminationPulse::new(0.05, 0.05).unwrap();
        let img = transient_camera(&z, &p, &grid).unwrap();
        assert!(img.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn confocal_factorizes_transient() {
        let (h, grid) = tiny();
        let p = IlluminationPulse::new(0.05, 0.05).unwrap();
        let tc = transient_camera(&h, &p, &grid).unwrap();
        let cc = confocal_camera(&h, &p, &grid).unwrap();
        for v in 0..grid.len() {
            for (j, w) in tc.band.omegas.iter().enumerate() {
                let a = tc.row(v)[j];
                if a.norm() == 0.0 {
                    continue;
                }
                let k = rsd_kernel(&h.relay.laser_point, &grid.point_flat(v), *w).unwrap();
                let ratio = cc.row(v)[j] / a;
                assert!((ratio - k).norm() <= 1e-12 * k.norm());
            }
        }
    }

    #[test]
    fn time_zero_is_plain_sum_and_single_frequency_is_flat() {
        let (h, grid) = tiny();
        let p = IlluminationPulse::new(0.05, 0.05).unwrap();
        let img = transient_camera(&h, &p, &grid).unwrap();
        let s0 = evaluate_at_time(&img, 0.0);
        for v in 0..grid.len() {
            let sum: Complex64 = img.row(v).iter().sum();
            assert_eq!(s0.complex[v], sum);
        }
        let j = img.band.len() / 2;
        let single = FocalStackImage::new(
            grid.clone(),
            (0..grid.len()).map(|v| img.row(v)[j]).collect(),
            FrequencyBand {
                omegas: vec![img.band.omegas[j]],
                weights: vec![img.band.weights[j]],
                dft_len: img.band.dft_len,
                dt: img.band.dt,
                first_index: img.band.first_index + j,
            },
        )
        .unwrap();
        let a = evaluate_at_time(&single, 0.0);
        let b = evaluate_at_time(&single, 1.234e-9);
        for v in 0..grid.len() {
            assert!((a.magnitude[v] - b.magnitude[v]).abs() <= 1e-12 * a.magnitude[v].max(1e-300));
        }
    }
}
