//! Normalized DLT over the six keypoint correspondences.

use nalgebra::{DMatrix, Matrix3};

use super::keypoints::KeypointSet;
use crate::error::{Error, Result};

/// Projective map `(x, y) ↦ (x'/w', y'/w')`, scaled so `m[2][2] == 1` when
/// that entry is non-zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

const DET_EPS: f64 = 1e-12;

impl Homography {
    pub fn identity() -> Self {
        Homography {
            m: Matrix3::identity(),
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Homography {
            m: Matrix3::new(1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0),
        }
    }

    /// Normalizes the scale and checks invertibility.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericallySingular);
        }
        let m = if m[(2, 2)].abs() > DET_EPS {
            m / m[(2, 2)]
        } else {
            m / m.norm()
        };
        if m.determinant().abs() <= DET_EPS {
            return Err(Error::NumericallySingular);
        }
        Ok(Homography { m })
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::from_matrix(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        std::array::from_fn(|r| std::array::from_fn(|c| self.m[(r, c)]))
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self.m.try_inverse().ok_or(Error::SingularHomography)?;
        Self::from_matrix(inv).map_err(|_| Error::SingularHomography)
    }

    /// Homogeneous image of `p` before the perspective division.
    #[inline]
    pub(crate) fn project(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let m = &self.m;
        (
            m[(0, 0)] * x + m[(0, 1)] * y + m[(0, 2)],
            m[(1, 0)] * x + m[(1, 1)] * y + m[(1, 2)],
            m[(2, 0)] * x + m[(2, 1)] * y + m[(2, 2)],
        )
    }

    pub fn apply(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        let (x, y, w) = self.project(p[0], p[1]);
        if w.abs() <= DET_EPS {
            return Err(Error::PointAtInfinity);
        }
        Ok([x / w, y / w])
    }
}

pub fn apply_homography(h: &Homography, p: [f64; 2]) -> Result<[f64; 2]> {
    h.apply(p)
}

/// Similarity that moves the centroid to the origin and makes the mean
/// distance from it √2.
pub fn normalize_points(pts: &[[f64; 2]]) -> Result<(Vec<[f64; 2]>, Matrix3<f64>)> {
    if pts.is_empty() {
        return Err(Error::DegenerateCloud);
    }
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let mean_dist = pts
        .iter()
        .map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if !mean_dist.is_finite() || mean_dist <= 0.0 {
        return Err(Error::DegenerateCloud);
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    let t = Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0);
    let out = pts
        .iter()
        .map(|p| [s * (p[0] - cx), s * (p[1] - cy)])
        .collect();
    Ok((out, t))
}

/// Least-squares homography taking `src` keypoints onto `dst` keypoints.
///
/// Both sets are conditioned with [`normalize_points`], the 2N x 9 DLT system
/// is solved for the right singular vector of the smallest singular value,
/// and the result is mapped back to the original coordinates.
pub fn estimate_homography(src: &KeypointSet, dst: &KeypointSet) -> Result<Homography> {
    src.validate()?;
    dst.validate()?;
    estimate_homography_f64(&src.points(), &dst.points())
}

/// [`estimate_homography`] on raw point lists, without the keypoint guard.
pub fn estimate_homography_f64(src: &[[f64; 2]], dst: &[[f64; 2]]) -> Result<Homography> {
    if src.len() != dst.len() || src.len() < 4 {
        return Err(Error::DegenerateConfiguration(format!(
            "need at least 4 paired points, got {} and {}",
            src.len(),
            dst.len()
        )));
    }
    let (ns, ts) = normalize_points(src)?;
    let (nd, td) = normalize_points(dst)?;

    let n = ns.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 9);
    for (k, (s, d)) in ns.iter().zip(&nd).enumerate() {
        let (x, y, u, v) = (s[0], s[1], d[0], d[1]);
        let r0 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let r1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for c in 0..9 {
            a[(2 * k, c)] = r0[c];
            a[(2 * k + 1, c)] = r1[c];
        }
    }

    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::NumericallySingular)?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    let (min_i, next_i) = (order[0], order[1]);
    if sv[next_i] - sv[min_i] < 1e-9 {
        return Err(Error::DegenerateConfiguration(
            "null space of the DLT system is not one-dimensional".into(),
        ));
    }
    let h = v_t.row(min_i);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td.try_inverse().ok_or(Error::NumericallySingular)?;
    Homography::from_matrix(td_inv * hn * ts)
}

/// Max distance between `h(src[i])` and `dst[i]`.
pub fn reprojection_error(h: &Homography, src: &KeypointSet, dst: &KeypointSet) -> Result<f64> {
    let mut worst = 0.0f64;
    for (s, d) in src.points().iter().zip(dst.points()) {
        let p = h.apply(*s)?;
        worst = worst.max(((p[0] - d[0]).powi(2) + (p[1] - d[1]).powi(2)).sqrt());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::keypoints::CoordSpace;
    use nalgebra::Vector3;

    fn homogeneous(p: [f64; 2]) -> Vector3<f64> {
        Vector3::new(p[0], p[1], 1.0)
    }

    fn face() -> KeypointSet {
        KeypointSet::from_points(
            [
                [118.0, 238.0],
                [182.0, 236.0],
                [130.0, 278.0],
                [170.0, 279.0],
                [150.0, 272.0],
                [151.0, 298.0],
            ],
            CoordSpace::FramePixels,
        )
    }

    #[test]
    fn identity_correspondence() {
        let h = estimate_homography(&face(), &face()).unwrap();
        let err = (h.matrix() - Matrix3::identity()).abs().max();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn pure_translation() {
        let src = face();
        let mut pts = src.points();
        for p in &mut pts {
            p[0] += 10.0;
            p[1] -= 5.0;
        }
        let dst = KeypointSet::from_points(pts, CoordSpace::FramePixels);
        let h = estimate_homography(&src, &dst).unwrap();
        let expect = Homography::translation(10.0, -5.0);
        assert!((h.matrix() - expect.matrix()).abs().max() < 1e-6);
    }

    #[test]
    fn normalization_postconditions() {
        let pts = [[3.0, 4.0], [10.0, -2.0], [7.5, 8.0], [-1.0, 0.5]];
        let (n, t) = normalize_points(&pts).unwrap();
        let cx: f64 = n.iter().map(|p| p[0]).sum::<f64>() / 4.0;
        let cy: f64 = n.iter().map(|p| p[1]).sum::<f64>() / 4.0;
        assert!(cx.abs() < 1e-9 && cy.abs() < 1e-9);
        let md: f64 = n
            .iter()
            .map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt())
            .sum::<f64>()
            / 4.0;
        assert!((md - 2f64.sqrt()).abs() < 1e-9);
        for (p, q) in pts.iter().zip(&n) {
            let v = t * homogeneous(*p);
            assert!((v[0] - q[0]).abs() < 1e-12 && (v[1] - q[1]).abs() < 1e-12);
        }
        // translation invariance
        let shifted: Vec<_> = pts.iter().map(|p| [p[0] + 7.0, p[1] + 7.0]).collect();
        let (n2, _) = normalize_points(&shifted).unwrap();
        for (a, b) in n.iter().zip(&n2) {
            assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
        }
        // already normalized input
        let s = 2f64.sqrt();
        let (_, t) = normalize_points(&[[s, 0.0], [-s, 0.0], [0.0, s], [0.0, -s]]).unwrap();
        assert!((t - Matrix3::identity()).abs().max() < 1e-12);
        assert!(matches!(
            normalize_points(&[[1.0, 1.0], [1.0, 1.0]]),
            Err(Error::DegenerateCloud)
        ));
    }

    #[test]
    fn apply_cases() {
        let p = [3.5, -2.0];
        assert_eq!(Homography::identity().apply(p).unwrap(), p);
        let s2 =
            Homography::from_rows([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(s2.apply(p).unwrap(), [7.0, -4.0]);
        let m = Matrix3::new(1.1, 0.2, 3.0, -0.1, 0.9, 4.0, 1e-3, 2e-3, 1.0);
        let a = Homography::from_matrix(m).unwrap();
        let b = Homography::from_matrix(m * -3.7).unwrap();
        let (pa, pb) = (a.apply(p).unwrap(), b.apply(p).unwrap());
        assert!((pa[0] - pb[0]).abs() < 1e-12 && (pa[1] - pb[1]).abs() < 1e-12);
        let horizon =
            Homography::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]).unwrap();
        assert!(matches!(
            horizon.apply([-1.0, 0.0]),
            Err(Error::PointAtInfinity)
        ));
    }

    #[test]
    fn singular_matrix_rejected() {
        assert!(matches!(
            Homography::from_rows([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]]),
            Err(Error::NumericallySingular)
        ));
    }
}
