use crate::phasor::TimeSlice;
use crate::Point3;

#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    pub point: Point3,
    pub magnitude: f64,
    /// Flat voxel index in the image grid.
    pub index: usize,
}

/// Local maxima (26-neighbourhood) at or above `rel_threshold` of the global
/// maximum, greedily suppressed within `suppression_radius` meters. Sorted by
/// magnitude descending, ties broken by ascending voxel index.
pub fn detect_peaks(img: &TimeSlice, suppression_radius: f64, rel_threshold: f64) -> Vec<Peak> {
    assert!(suppression_radius > 0.0, "suppression radius must be positive");
    assert!(rel_threshold > 0.0 && rel_threshold < 1.0, "relative threshold must lie in (0, 1)");
    let g = &img.grid;
    let m = &img.magnitude;
    let max = img.max();
    if !(max > 0.0) {
        return Vec::new();
    }
    let cut = rel_threshold * max;
    let mut cands: Vec<usize> = (0..g.len()).filter(|&f| m[f] >= cut && is_local_max(img, f)).collect();
    cands.sort_by(|&a, &b| m[b].total_cmp(&m[a]).then(a.cmp(&b)));

    let r2 = suppression_radius * suppression_radius;
    let mut out: Vec<Peak> = Vec::new();
    for f in cands {
        let p = g.point_flat(f);
        if out.iter().all(|q| (q.point - p).norm_squared() > r2) {
            out.push(Peak {
                point: p,
                magnitude: m[f],
                index: f,
            });
        }
    }
    out
}

fn neighbours(n: usize, i: usize) -> std::ops::RangeInclusive<usize> {
    i.saturating_sub(1)..=(i + 1).min(n - 1)
}

fn is_local_max(img: &TimeSlice, f: usize) -> bool {
    let g = &img.grid;
    let (i, j, k) = g.unravel(f);
    let v = img.magnitude[f];
    for a in neighbours(g.n_u, i) {
        for b in neighbours(g.n_v, j) {
            for c in neighbours(g.n_w, k) {
                if img.magnitude[g.index(a, b, c)] > v {
                    return false;
                }
            }
        }
    }
    true
}

/// True when the voxel lies on the boundary of a populated grid axis. Such a
/// maximum may be the flank of a feature outside the grid.
pub fn on_boundary(img: &TimeSlice, index: usize) -> bool {
    let g = &img.grid;
    let (i, j, k) = g.unravel(index);
    [(i, g.n_u), (j, g.n_v), (k, g.n_w)]
        .iter()
        .any(|&(a, n)| n > 1 && (a == 0 || a + 1 == n))
}

/// Sub-voxel peak position from a per-axis parabola through the peak and its
/// two neighbours. Axes without both neighbours are left unrefined.
pub fn refine_peak(img: &TimeSlice, index: usize) -> Point3 {
    let g = &img.grid;
    let (i, j, k) = g.unravel(index);
    let m = |a: usize, b: usize, c: usize| img.magnitude[g.index(a, b, c)];
    let m0 = img.magnitude[index];
    let offset = |lo: Option<f64>, hi: Option<f64>| match (lo, hi) {
        (Some(l), Some(h)) => {
            let den = l - 2.0 * m0 + h;
            if den < 0.0 {
                (0.5 * (l - h) / den).clamp(-0.5, 0.5)
            } else {
                0.0
            }
        }
        _ => 0.0,
    };
    let du = offset((i > 0).then(|| m(i - 1, j, k)), (i + 1 < g.n_u).then(|| m(i + 1, j, k)));
    let dv = offset((j > 0).then(|| m(i, j - 1, k)), (j + 1 < g.n_v).then(|| m(i, j + 1, k)));
    let dw = offset((k > 0).then(|| m(i, j, k - 1)), (k + 1 < g.n_w).then(|| m(i, j, k + 1)));
    g.origin + g.axis_u * (i as f64 + du) + g.axis_v * (j as f64 + dv) + g.axis_w * (k as f64 + dw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::VoxelGrid;
    use crate::Vec3;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn slice(mag: Vec<f64>, n: usize) -> TimeSlice {
        let grid = VoxelGrid::plane(
            Point3::zeros(),
            Vec3::x(),
            Vec3::y(),
            (n - 1) as f64 * 0.1,
            (n - 1) as f64 * 0.1,
            n,
            n,
        );
        TimeSlice {
            grid,
            t: 0.0,
            complex: mag.iter().map(|m| Complex64::new(*m, 0.0)).collect(),
            magnitude: mag,
        }
    }

    #[test]
    fn single_bright_voxel() {
        let mut m = vec![0.0; 25];
        m[12] = 3.0;
        let p = detect_peaks(&slice(m, 5), 0.15, 0.5);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].index, 12);
    }

    #[test]
    fn equal_peaks_come_in_index_order() {
        let mut m = vec![0.0; 49];
        m[8] = 1.0;
        m[40] = 1.0;
        let p = detect_peaks(&slice(m, 7), 0.15, 0.5);
        assert_eq!(p.iter().map(|p| p.index).collect::<Vec<_>>(), vec![8, 40]);
    }

    #[test]
    fn close_peaks_are_suppressed() {
        let mut m = vec![0.0; 49];
        m[8] = 1.0;
        m[10] = 0.9;
        let p = detect_peaks(&slice(m.clone(), 7), 0.25, 0.5);
        assert_eq!(p.len(), 1);
        let p = detect_peaks(&slice(m, 7), 0.15, 0.5);
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn parabola_vertex_is_recovered() {
        // samples of 1 - (x - 0.23)^2 on x = -1..1 step 0.1 along u
        let n = 21;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let x = (i as f64 - 10.0) * 0.1;
                let y = (j as f64 - 10.0) * 0.1;
                m[i * n + j] = 5.0 - (x - 0.23).powi(2) - (y + 0.04).powi(2);
            }
        }
        let s = slice(m, n);
        let (idx, _) = s.argmax();
        let p = refine_peak(&s, idx);
        assert!((p.x - 0.23).abs() < 1e-9 && (p.y + 0.04).abs() < 1e-9, "{p:?}");
    }

    proptest! {
        #[test]
        fn peaks_invariant_under_positive_scaling(
            vals in prop::collection::vec(0.0f64..1.0, 36),
            s in 1e-6f64..1e6,
        ) {
            let a = detect_peaks(&slice(vals.clone(), 6), 0.12, 0.3);
            let b = detect_peaks(&slice(vals.iter().map(|v| v * s).collect(), 6), 0.12, 0.3);
            prop_assert_eq!(
                a.iter().map(|p| p.index).collect::<Vec<_>>(),
                b.iter().map(|p| p.index).collect::<Vec<_>>()
            );
        }
    }
}
