//! Imaging with hidden surfaces acting as mirrors: plane inference from mirror
//! images, secondary apertures on a visible surface, and two-corner imaging of
//! the space behind a surface.

mod masks;
mod peaks;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::phasor::{backproject, evaluate_at_time, FocalStackImage, IlluminationPulse, Imager, PhasorField, TimeSlice};
use crate::render::ImpulseResponse;
use crate::scene::{mirror_reflect_grid, Dir3, VoxelGrid};
use crate::Point3;

pub use masks::{footprint_mask, masked_sum, mirror_reflect_surface, ncc, threshold_image};
pub use peaks::{detect_peaks, on_boundary, refine_peak, Peak};

/// Hidden plane recovered from a point and its mirror image.
/// `center` is the midpoint of `source_pair`; `normal` points from the mirror
/// image toward the source.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneEstimate {
    pub center: Point3,
    pub normal: Dir3,
    pub source_pair: (Point3, Point3),
    pub peak_magnitude: f64,
}

impl PlaneEstimate {
    /// Angle in degrees between the estimated and a reference normal, ignoring
    /// orientation sign.
    pub fn normal_error_deg(&self, truth: &Dir3) -> f64 {
        self.normal.dot(truth).abs().min(1.0).acos().to_degrees()
    }

    /// Distance from the estimated center to a reference plane.
    pub fn plane_distance(&self, plane_point: &Point3, plane_normal: &Dir3) -> f64 {
        (self.center - plane_point).dot(plane_normal).abs()
    }

    /// Plain-text record; with a ground-truth plane the errors are appended.
    pub fn record(&self, truth: Option<(&Point3, &Dir3)>) -> String {
        let v = |p: &Point3| format!("{:.6} {:.6} {:.6}", p.x, p.y, p.z);
        let mut s = format!(
            "center {}\nnormal {}\nsource {}\nmirror {}\npeak_magnitude {:.6e}\n",
            v(&self.center),
            v(&self.normal),
            v(&self.source_pair.0),
            v(&self.source_pair.1),
            self.peak_magnitude
        );
        if let Some((p, n)) = truth {
            s.push_str(&format!(
                "truth_point {}\ntruth_normal {}\nangular_error_deg {:.4}\nplane_distance_m {:.6}\n",
                v(p),
                v(n),
                self.normal_error_deg(n),
                self.plane_distance(p, n)
            ));
        }
        s
    }
}

/// Plane between `p` and its mirror image `p_mirror`.
pub fn infer_plane(p: &Point3, p_mirror: &Point3) -> Result<PlaneEstimate> {
    let d = p - p_mirror;
    if d.norm() < 1e-6 {
        return Err(Error::Degenerate(format!("mirror pair points are {:.3e} m apart", d.norm())));
    }
    Ok(PlaneEstimate {
        center: (p + p_mirror) * 0.5,
        normal: Dir3::new_normalize(d),
        source_pair: (*p, *p_mirror),
        peak_magnitude: 0.0,
    })
}

/// Outcome of inferring a plane from the bright spots of an image.
#[derive(Debug, Clone)]
pub struct Inference {
    pub estimate: PlaneEstimate,
    pub peaks: Vec<Peak>,
    /// True when `x_l` was matched to a detected peak and used as the source.
    pub anchored: bool,
    /// Unresolved ambiguities, reported verbatim.
    pub warnings: Vec<String>,
}

/// Peak selection for [`infer_plane_from_image`].
#[derive(Debug, Clone, PartialEq)]
pub struct InferOptions {
    /// Non-maximum suppression radius in meters.
    pub suppression_radius: f64,
    /// Peaks below this fraction of the image maximum are ignored.
    pub rel_threshold: f64,
    /// A point of the aperture that formed the image, usually its centroid.
    /// A mirror image `x'` of `x_l` in a plane with `x_l` and this point on the
    /// same side satisfies `|x' - c| >= |x_l - c|`, so peaks closer than that
    /// (plus `shell_margin`) cannot be mirror images and are skipped.
    pub aperture_center: Option<Point3>,
    pub shell_margin: f64,
    /// `x_l` is matched to a peak within this distance.
    pub match_radius: f64,
}

impl InferOptions {
    /// Suppression radius `lambda_c`, match radius `lambda_c / 2`, threshold
    /// 1e-3, no aperture constraint. The shell margin is three pulse widths:
    /// closer to the `x_l` isochrone a peak cannot be told apart from the
    /// ridge of `x_l` itself.
    pub fn new(pulse: &IlluminationPulse) -> Self {
        InferOptions {
            suppression_radius: pulse.lambda_c,
            rel_threshold: 1e-3,
            aperture_center: None,
            shell_margin: 3.0 * pulse.sigma,
            match_radius: pulse.lambda_c / 2.0,
        }
    }

    pub fn with_aperture_center(mut self, c: Point3) -> Self {
        self.aperture_center = Some(c);
        self
    }

    pub fn with_suppression_radius(mut self, r: f64) -> Self {
        self.suppression_radius = r;
        self
    }

    pub fn with_rel_threshold(mut self, t: f64) -> Self {
        self.rel_threshold = t;
        self
    }
}

/// Detects peaks in `img`, pairs the known `xl` (when a peak lies within the
/// match radius) with the strongest admissible other peak, and infers the
/// plane between them. Boundary maxima and peaks inside the `x_l` shell of
/// the aperture are not admissible. Without an `xl` match the strongest peak
/// stands in for `x_l` and the result is flagged.
pub fn infer_plane_from_image(img: &TimeSlice, xl: &Point3, opts: &InferOptions) -> Result<Inference> {
    let peaks = detect_peaks(img, opts.suppression_radius, opts.rel_threshold);
    let mut warnings = Vec::new();
    let xl_peak = peaks.iter().position(|p| (p.point - xl).norm() <= opts.match_radius);
    let (source, anchored) = match xl_peak {
        Some(_) => (*xl, true),
        None => {
            let Some(first) = peaks.first() else {
                return Err(Error::Degenerate("no peaks detected".into()));
            };
            warnings.push("x_l does not match any detected peak; the strongest peak stands in for it".into());
            (refine_peak(img, first.index), false)
        }
    };
    let skip = if anchored { xl_peak } else { Some(0) };
    let admissible = |p: &Peak| {
        if on_boundary(img, p.index) {
            return false;
        }
        match opts.aperture_center {
            Some(c) => (p.point - c).norm() >= (source - c).norm() + opts.shell_margin,
            None => true,
        }
    };
    let cands: Vec<&Peak> = peaks
        .iter()
        .enumerate()
        .filter(|(j, p)| Some(*j) != skip && admissible(p))
        .map(|(_, p)| p)
        .collect();
    let rejected = peaks.len() - usize::from(skip.is_some()) - cands.len();
    if rejected > 0 {
        warnings.push(format!("{rejected} peak(s) rejected on the grid boundary or inside the x_l shell"));
    }
    let Some(mirror) = cands.first() else {
        return Err(Error::Degenerate("no admissible mirror-image peak besides x_l".into()));
    };
    if let Some(next) = cands.get(1) {
        if next.magnitude >= 0.8 * mirror.magnitude {
            warnings.push(format!(
                "ambiguous mirror image: runner-up peak at {:?} has {:.0}% of the chosen peak's magnitude",
                [next.point.x, next.point.y, next.point.z],
                100.0 * next.magnitude / mirror.magnitude
            ));
        }
    }
    let mirror_pt = refine_peak(img, mirror.index);
    let mut estimate = infer_plane(&source, &mirror_pt)?;
    estimate.peak_magnitude = mirror.magnitude;
    Ok(Inference {
        estimate,
        peaks,
        anchored,
        warnings,
    })
}

/// Points on a hidden surface promoted to a computational aperture, carrying
/// `f_tc(x_m, Omega)` as their phasor field.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondaryAperture {
    pub points: Vec<Point3>,
    pub weights: Vec<f64>,
    pub field: PhasorField,
}

impl SecondaryAperture {
    pub fn new(field: PhasorField) -> Result<Self> {
        if field.is_empty() {
            return Err(Error::EmptyAperture { threshold: f64::NAN });
        }
        Ok(SecondaryAperture {
            points: field.points.clone(),
            weights: field.area.clone(),
            field,
        })
    }

    /// Area-weighted mean of the aperture points.
    pub fn centroid(&self) -> Point3 {
        let w: f64 = self.weights.iter().sum();
        let s = self
            .points
            .iter()
            .zip(&self.weights)
            .fold(crate::Vec3::zeros(), |acc, (p, a)| acc + p * *a);
        s / w
    }
}

/// Thresholds `|f_cc(x_v, 0)|` at `rel_threshold` of its maximum and evaluates
/// `f_tc` at the surviving voxels, each weighted by the voxel-face area.
pub fn extract_secondary_aperture(
    f_cc_volume: &FocalStackImage,
    rel_threshold: f64,
    h: &ImpulseResponse,
    pulse: &IlluminationPulse,
) -> Result<SecondaryAperture> {
    let imager = Imager::new(h, pulse)?;
    extract_with(&imager, f_cc_volume, rel_threshold)
}

/// As [`extract_secondary_aperture`] with a prepared [`Imager`].
pub fn extract_with(imager: &Imager, f_cc_volume: &FocalStackImage, rel_threshold: f64) -> Result<SecondaryAperture> {
    if !(rel_threshold > 0.0 && rel_threshold <= 1.0) {
        return Err(Error::InvalidParams(format!("threshold {rel_threshold} outside (0, 1]")));
    }
    let slice = evaluate_at_time(f_cc_volume, 0.0);
    let max = slice.max();
    if !(max > 0.0) {
        return Err(Error::EmptyAperture { threshold: rel_threshold });
    }
    let cut = rel_threshold * max;
    let points: Vec<Point3> = slice
        .magnitude
        .iter()
        .enumerate()
        .filter(|(_, m)| **m >= cut)
        .map(|(i, _)| f_cc_volume.grid.point_flat(i))
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyAperture { threshold: rel_threshold });
    }
    let values = imager.transient_at(&points)?;
    let area = vec![f_cc_volume.grid.face_area(); points.len()];
    SecondaryAperture::new(PhasorField::new(points, area, values, imager.band().clone())?)
}

/// `f_tcM(x_w, Omega) = sum_m rsd_kernel(x_m, x_w) f_tc(x_m, Omega) dA_m`.
pub fn transient_camera_secondary(ap: &SecondaryAperture, grid: &VoxelGrid) -> Result<FocalStackImage> {
    let f = &ap.field;
    let values = backproject(&f.points, &f.area, &f.values, &f.band, &grid.points())?;
    FocalStackImage::new(grid.clone(), values, f.band.clone())
}

/// `f_ccM(x_w, Omega) = rsd_kernel(x_l, x_w) f_tcM(x_w, Omega)`.
pub fn confocal_camera_secondary(ap: &SecondaryAperture, xl: &Point3, grid: &VoxelGrid) -> Result<FocalStackImage> {
    let tc = transient_camera_secondary(ap, grid)?;
    crate::phasor::confocal_from_transient(tc, xl)
}

/// A t = 0 confocal image of the region behind a mirror surface.
#[derive(Debug, Clone)]
pub struct TwoCornerImage {
    pub stack: FocalStackImage,
    pub slice: TimeSlice,
    /// Point and unit normal of the mirror plane the target grid was placed behind.
    pub mirror_plane: (Point3, Dir3),
}

/// Confocal image on `target_grid`, which must already sit where the mirror
/// image forms (see [`mirror_target`]).
pub fn two_corner_image(
    h: &ImpulseResponse,
    pulse: &IlluminationPulse,
    mirror_plane: (Point3, Dir3),
    target_grid: &VoxelGrid,
) -> Result<TwoCornerImage> {
    let stack = Imager::new(h, pulse)?.confocal(target_grid)?;
    let slice = evaluate_at_time(&stack, 0.0);
    Ok(TwoCornerImage {
        stack,
        slice,
        mirror_plane,
    })
}

/// Grid behind the mirror plane where the image of `suspected` forms.
pub fn mirror_target(suspected: &VoxelGrid, mirror_plane: (Point3, Dir3)) -> VoxelGrid {
    mirror_reflect_grid(suspected, &mirror_plane.0, &mirror_plane.1)
}

impl Imager {
    /// `f_tc` at arbitrary points, `[point][omega]`.
    pub fn transient_at(&self, points: &[Point3]) -> Result<Vec<Complex64>> {
        backproject(&self.field.points, &self.field.area, &self.field.values, &self.field.band, points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasor::{rsd_kernel, transient_camera, FrequencyBand};
    use crate::scene::{mirror_reflect_point, RelayAperture};
    use crate::Vec3;
    use proptest::prelude::*;

    #[test]
    fn infer_axis_plane() {
        let e = infer_plane(&Point3::new(1.0, 0.0, 0.0), &Point3::new(-1.0, 0.0, 0.0)).unwrap();
        assert_eq!(e.center, Point3::zeros());
        assert_eq!(e.normal.into_inner(), Vec3::x());
    }

    #[test]
    fn coincident_pair_is_degenerate() {
        let p = Point3::new(0.3, 0.2, 0.1);
        assert!(matches!(infer_plane(&p, &(p + Vec3::repeat(1e-8))), Err(Error::Degenerate(_))));
    }

    proptest! {
        #[test]
        fn inference_inverts_reflection(
            p in prop::array::uniform3(-3.0f64..3.0),
            q in prop::array::uniform3(-3.0f64..3.0),
            n in prop::array::uniform3(-1.0f64..1.0),
        ) {
            prop_assume!(Vec3::from(n).norm() > 1e-2);
            let n = Dir3::new_normalize(Vec3::from(n));
            let (p, q) = (Point3::from(p), Point3::from(q));
            prop_assume!((p - q).dot(&n).abs() > 1e-3);
            let e = infer_plane(&p, &mirror_reflect_point(&p, &q, &n)).unwrap();
            // center on the plane, normal parallel to n
            prop_assert!((e.center - q).dot(&n).abs() < 1e-9);
            prop_assert!(1.0 - e.normal.dot(&n).abs() < 1e-9);
            // center is the foot of p on the plane
            let foot = p - n.into_inner() * (p - q).dot(&n);
            prop_assert!((e.center - foot).norm() < 1e-9);
        }
    }

    #[test]
    fn relay_as_secondary_aperture_reproduces_transient_camera() {
        let relay = RelayAperture::centered(Point3::zeros(), 1.0, 1.0, 3, 3);
        let mut h = ImpulseResponse::zeros(relay, 1e-11, 400);
        for s in 0..9 {
            h.values[s * 400 + 150 + 5 * s] = 1.0;
        }
        let pulse = IlluminationPulse::new(0.05, 0.05).unwrap();
        let grid = VoxelGrid::plane(Point3::new(0.1, 0.0, 0.7), Vec3::x(), Vec3::y(), 0.3, 0.3, 3, 3);
        let direct = transient_camera(&h, &pulse, &grid).unwrap();
        let imager = Imager::new(&h, &pulse).unwrap();
        let ap = SecondaryAperture::new(imager.field.clone()).unwrap();
        let via = transient_camera_secondary(&ap, &grid).unwrap();
        for (a, b) in direct.values.iter().zip(&via.values) {
            assert!((a - b).norm() <= 1e-9 * a.norm().max(1e-300));
        }
    }

    #[test]
    fn single_point_secondary_is_kernel_product() {
        let band = FrequencyBand::from_bins(1e-11, 2048, 100, 4);
        let xm = Point3::new(0.2, 0.1, 1.0);
        let vals = vec![Complex64::new(0.5, 0.25); 4];
        let ap = SecondaryAperture::new(PhasorField::new(vec![xm], vec![2.0], vals.clone(), band.clone()).unwrap()).unwrap();
        let grid = VoxelGrid::plane(Point3::new(-0.3, 0.0, 0.5), Vec3::x(), Vec3::z(), 0.1, 0.1, 2, 2);
        let xl = Point3::zeros();
        let tc = transient_camera_secondary(&ap, &grid).unwrap();
        let cc = confocal_camera_secondary(&ap, &xl, &grid).unwrap();
        for v in 0..grid.len() {
            let xw = grid.point_flat(v);
            for j in 0..4 {
                let k = rsd_kernel(&xm, &xw, band.omegas[j]).unwrap();
                let e_tc = vals[j] * k * 2.0;
                assert!((tc.row(v)[j] - e_tc).norm() < 1e-12 * e_tc.norm());
                let e_cc = e_tc * rsd_kernel(&xl, &xw, band.omegas[j]).unwrap();
                assert!((cc.row(v)[j] / tc.row(v)[j] - e_cc / e_tc).norm() < 1e-12 * (e_cc / e_tc).norm());
            }
        }
    }

    #[test]
    fn empty_volume_is_empty_aperture() {
        let relay = RelayAperture::centered(Point3::zeros(), 1.0, 1.0, 2, 2);
        let h = ImpulseResponse::zeros(relay, 1e-11, 200);
        let pulse = IlluminationPulse::new(0.05, 0.05).unwrap();
        let grid = VoxelGrid::plane(Point3::new(0.0, 0.0, 0.5), Vec3::x(), Vec3::y(), 0.1, 0.1, 2, 2);
        let vol = Imager::new(&h, &pulse).unwrap().confocal(&grid).unwrap();
        assert!(matches!(
            extract_secondary_aperture(&vol, 0.2, &h, &pulse),
            Err(Error::EmptyAperture { .. })
        ));
    }
}
