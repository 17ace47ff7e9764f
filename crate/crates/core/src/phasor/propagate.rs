//! Direct-summation RSD propagation, the cost centre of every imaging call.
//!
//! For one (source, target) pair at distance `r` the kernel over the band is a
//! geometric sequence `e^{i alpha (k0 + j)} / r` with `alpha = 2 pi r / (N dt c)`.
//! Frequencies are processed in blocks of `BLOCK`: each block starts from an
//! exact phase and multiplies a per-pair table `e^{i alpha j}, j < BLOCK`, so
//! the phase error stays near machine precision without one `sin_cos` per
//! frequency. Real and imaginary parts are kept in separate arrays so the
//! inner loops vectorise.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{FrequencyBand, PhasorField};
use crate::error::{Error, Result};
use crate::{Point3, C};

const BLOCK: usize = 32;

/// Sum of `value * e^{i k r} / r * area` over all sources, for every target.
pub fn propagate(field: &PhasorField, targets: &[Point3]) -> Result<PhasorField> {
    if field.is_empty() {
        return Err(Error::InvalidParams("cannot propagate an empty field".into()));
    }
    let values = backproject(&field.points, &field.area, &field.values, &field.band, targets)?;
    PhasorField::new(targets.to_vec(), vec![0.0; targets.len()], values, field.band.clone())
}

struct Scratch {
    base_re: [f64; BLOCK],
    base_im: [f64; BLOCK],
    acc_re: Vec<f64>,
    acc_im: Vec<f64>,
}

/// Row-major `[target][omega]` result of propagating `values` (`[source][omega]`).
/// Each target is summed sequentially in source order, so the output does not
/// depend on the thread count.
pub(crate) fn backproject(
    sources: &[Point3],
    area: &[f64],
    values: &[Complex64],
    band: &FrequencyBand,
    targets: &[Point3],
) -> Result<Vec<Complex64>> {
    let nf = band.len();
    if values.len() != sources.len() * nf || area.len() != sources.len() {
        return Err(Error::DimensionMismatch("source field does not match its points".into()));
    }
    let mut out = vec![Complex64::default(); targets.len() * nf];
    if nf == 0 {
        return Ok(out);
    }
    // sources whose rows are all zero contribute nothing
    let live: Vec<usize> = (0..sources.len())
        .filter(|&s| values[s * nf..(s + 1) * nf].iter().any(|v| v.re != 0.0 || v.im != 0.0))
        .collect();
    let src_re: Vec<f64> = live
        .iter()
        .flat_map(|&s| values[s * nf..(s + 1) * nf].iter().map(|v| v.re))
        .collect();
    let src_im: Vec<f64> = live
        .iter()
        .flat_map(|&s| values[s * nf..(s + 1) * nf].iter().map(|v| v.im))
        .collect();
    let scale = 2.0 * std::f64::consts::PI / (band.dft_len as f64 * band.dt * C);
    let k0 = band.first_index as f64;

    out.par_chunks_mut(nf).zip(targets.par_iter()).try_for_each_init(
        || Scratch {
            base_re: [0.0; BLOCK],
            base_im: [0.0; BLOCK],
            acc_re: vec![0.0; nf],
            acc_im: vec![0.0; nf],
        },
        |sc, (row_out, t)| {
            sc.acc_re.iter_mut().for_each(|a| *a = 0.0);
            sc.acc_im.iter_mut().for_each(|a| *a = 0.0);
            for (li, &s) in live.iter().enumerate() {
                let r = (t - sources[s]).norm();
                if r < 1e-9 {
                    return Err(Error::singularity(&sources[s], t));
                }
                let alpha = scale * r;
                fill_base(&mut sc.base_re, &mut sc.base_im, alpha);
                let vr = &src_re[li * nf..(li + 1) * nf];
                let vi = &src_im[li * nf..(li + 1) * nf];
                let amp = area[s] / r;
                let jump = Complex64::from_polar(1.0, alpha * BLOCK as f64);
                let mut z = Complex64::default();
                for (b, start) in (0..nf).step_by(BLOCK).enumerate() {
                    let end = (start + BLOCK).min(nf);
                    z = block_phase(z, jump, b, amp, alpha, k0);
                    let len = end - start;
                    let (ar, ai) = (&mut sc.acc_re[start..end], &mut sc.acc_im[start..end]);
                    let (xr, xi) = (&vr[start..end], &vi[start..end]);
                    let (br, bi) = (&sc.base_re[..len], &sc.base_im[..len]);
                    for j in 0..len {
                        let tr = z.re * br[j] - z.im * bi[j];
                        let ti = z.re * bi[j] + z.im * br[j];
                        ar[j] += xr[j] * tr - xi[j] * ti;
                        ai[j] += xr[j] * ti + xi[j] * tr;
                    }
                }
            }
            for ((o, re), im) in row_out.iter_mut().zip(&sc.acc_re).zip(&sc.acc_im) {
                *o = Complex64::new(*re, *im);
            }
            Ok(())
        },
    )?;
    Ok(out)
}

/// `base[j] = e^{i alpha j}`; reseeded from `sin_cos` every 8 steps.
#[inline]
fn fill_base(re: &mut [f64; BLOCK], im: &mut [f64; BLOCK], alpha: f64) {
    let (s, c) = alpha.sin_cos();
    for j0 in (0..BLOCK).step_by(8) {
        let (mut zi, mut zr) = if j0 == 0 { (0.0, 1.0) } else { (alpha * j0 as f64).sin_cos() };
        for j in j0..j0 + 8 {
            re[j] = zr;
            im[j] = zi;
            (zr, zi) = (zr * c - zi * s, zr * s + zi * c);
        }
    }
}

/// `amp * e^{i alpha (k0 + b BLOCK)}`, advanced from the previous block and
/// recomputed exactly every `RESEED_BLOCKS` blocks.
#[inline]
fn block_phase(prev: Complex64, jump: Complex64, b: usize, amp: f64, alpha: f64, k0: f64) -> Complex64 {
    const RESEED_BLOCKS: usize = 8;
    if b.is_multiple_of(RESEED_BLOCKS) {
        Complex64::from_polar(amp, alpha * (k0 + (b * BLOCK) as f64))
    } else {
        prev * jump
    }
}

/// `tw[j] = amp * e^{i alpha (k0 + j)}`, computed exactly as the hot loop does.
#[cfg(test)]
pub(crate) fn twiddles(tw: &mut [Complex64], alpha: f64, k0: f64, amp: f64) {
    let (mut re, mut im) = ([0.0; BLOCK], [0.0; BLOCK]);
    fill_base(&mut re, &mut im, alpha);
    let jump = Complex64::from_polar(1.0, alpha * BLOCK as f64);
    let mut z = Complex64::default();
    for (b, chunk) in tw.chunks_mut(BLOCK).enumerate() {
        z = block_phase(z, jump, b, amp, alpha, k0);
        for (j, w) in chunk.iter_mut().enumerate() {
            *w = z * Complex64::new(re[j], im[j]);
        }
    }
}
