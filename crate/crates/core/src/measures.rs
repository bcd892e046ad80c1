//! Gaussian-state diagnostics computed from covariance matrices.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};
use rayon::prelude::*;

use crate::error::{Result, SimError};
use crate::model::{CovarianceMatrix, VACUUM_VARIANCE};
use crate::numerics::linalg::LuDecomposition;

/// Two-mode covariance matrix `[[A, C], [C^T, B]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedCM {
    pub a: Matrix2<f64>,
    pub b: Matrix2<f64>,
    pub c: Matrix2<f64>,
}

impl ReducedCM {
    pub fn from_matrix(m: &Matrix4<f64>) -> Self {
        Self {
            a: m.fixed_view::<2, 2>(0, 0).into_owned(),
            b: m.fixed_view::<2, 2>(2, 2).into_owned(),
            c: m.fixed_view::<2, 2>(0, 2).into_owned(),
        }
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(&self.a);
        m.fixed_view_mut::<2, 2>(2, 2).copy_from(&self.b);
        m.fixed_view_mut::<2, 2>(0, 2).copy_from(&self.c);
        m.fixed_view_mut::<2, 2>(2, 0)
            .copy_from(&self.c.transpose());
        m
    }

    /// Two-mode squeezed vacuum with squeezing parameter `r`.
    pub fn two_mode_squeezed(r: f64) -> Self {
        let ch = (2.0 * r).cosh() / 2.0;
        let sh = (2.0 * r).sinh() / 2.0;
        Self {
            a: Matrix2::identity() * ch,
            b: Matrix2::identity() * ch,
            c: Matrix2::new(sh, 0.0, 0.0, -sh),
        }
    }
}

/// Mirror `(dq, dp)` and atomic `(dx, dy)` modes of the full matrix.
pub fn reduce_atom_mirror(v: &CovarianceMatrix) -> ReducedCM {
    let idx = [0, 1, 4, 5];
    ReducedCM::from_matrix(&Matrix4::from_fn(|i, j| v.0[(idx[i], idx[j])]))
}

/// Smallest symplectic eigenvalue of the partial transpose.
pub fn partial_transpose_eigenvalue(rcm: &ReducedCM) -> Result<f64> {
    let sigma = rcm.a.determinant() + rcm.b.determinant() - 2.0 * rcm.c.determinant();
    let det = rcm.matrix().determinant();
    let mut disc = sigma * sigma - 4.0 * det;
    if disc < 0.0 {
        if disc < -1e-12 * sigma.abs().max(1.0).powi(2) {
            return Err(SimError::NonPhysical { discriminant: disc });
        }
        disc = 0.0;
    }
    let inner = (sigma - disc.sqrt()).max(0.0);
    Ok((inner / 2.0).sqrt())
}

/// Logarithmic negativity `max(0, -ln 2 eta)`.
pub fn log_negativity(rcm: &ReducedCM) -> Result<f64> {
    let eta = partial_transpose_eigenvalue(rcm)?;
    Ok((-(2.0 * eta).ln()).max(0.0))
}

/// Atom-mirror logarithmic negativity of a full covariance matrix.
pub fn atom_mirror_negativity(v: &CovarianceMatrix) -> Result<f64> {
    log_negativity(&reduce_atom_mirror(v))
}

pub fn position_variance(v: &CovarianceMatrix) -> f64 {
    v.0[(0, 0)]
}

/// Position variance below the vacuum value.
pub fn is_position_squeezed(v: &CovarianceMatrix) -> bool {
    position_variance(v) < VACUUM_VARIANCE
}

/// Mechanical occupation `(V11 + V22 - 1) / 2`.
pub fn mean_phonon_number(v: &CovarianceMatrix) -> f64 {
    (v.0[(0, 0)] + v.0[(1, 1)] - 1.0) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Squeezing {
    /// Smallest eigenvalue of the single-mode block.
    pub lambda: f64,
    /// `-10 log10 lambda`.
    pub r_raw: f64,
    /// `-10 log10 (2 lambda)`, zero for the vacuum.
    pub r_db: f64,
}

fn eigen_pair(m: &Matrix2<f64>) -> Result<(f64, f64)> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if det <= 0.0 {
        return Err(SimError::NonPositive { det });
    }
    let mean = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let half_diff = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let rad = half_diff.hypot(off);
    let big = mean + rad;
    // det / big avoids cancellation in mean - rad.
    Ok((det / big, big))
}

pub fn squeezing_parameter(block: &Matrix2<f64>) -> Result<Squeezing> {
    let (lambda, _) = eigen_pair(block)?;
    Ok(Squeezing {
        lambda,
        r_raw: -10.0 * lambda.log10(),
        r_db: -10.0 * (2.0 * lambda).log10(),
    })
}

/// Shape and orientation of a single-mode Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub minor_variance: f64,
    pub major_variance: f64,
    /// Angle of the minor (squeezed) axis from the position axis, in `(-pi/2, pi/2]`.
    pub angle: f64,
}

impl Ellipse {
    pub fn eccentricity(&self) -> f64 {
        (1.0 - self.minor_variance / self.major_variance)
            .max(0.0)
            .sqrt()
    }
}

pub fn ellipse(block: &Matrix2<f64>) -> Result<Ellipse> {
    let (minor, major) = eigen_pair(block)?;
    let half_diff = 0.5 * (block[(0, 0)] - block[(1, 1)]);
    let off = 0.5 * (block[(0, 1)] + block[(1, 0)]);
    // Major axis at 0.5 atan2(2 off, diff); the minor axis is perpendicular.
    let major_angle = 0.5 * off.atan2(half_diff);
    let mut angle = major_angle + std::f64::consts::FRAC_PI_2;
    if angle > std::f64::consts::FRAC_PI_2 {
        angle -= std::f64::consts::PI;
    }
    Ok(Ellipse {
        minor_variance: minor,
        major_variance: major,
        angle,
    })
}

/// Gaussian Wigner function with zero mean at phase-space point `r`.
pub fn wigner_value(cm: &DMatrix<f64>, r: &[f64]) -> Result<f64> {
    let prep = WignerKernel::new(cm)?;
    Ok(prep.eval(r))
}

struct WignerKernel {
    inverse: DMatrix<f64>,
    norm: f64,
}

impl WignerKernel {
    fn new(cm: &DMatrix<f64>) -> Result<Self> {
        let lu = LuDecomposition::new(cm).map_err(|_| SimError::SingularCm { det: 0.0 })?;
        let det = lu.determinant();
        if det < 1e-300 {
            return Err(SimError::SingularCm { det });
        }
        let modes = cm.nrows() as i32 / 2;
        Ok(Self {
            inverse: lu.inverse(),
            norm: 1.0 / ((2.0 * std::f64::consts::PI).powi(modes) * det.sqrt()),
        })
    }

    fn eval(&self, r: &[f64]) -> f64 {
        let v = DVector::from_column_slice(r);
        let quad = v.dot(&(&self.inverse * &v));
        self.norm * (-0.5 * quad).exp()
    }
}

/// Single-mode Wigner function sampled on a rectangular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `values[i][j]` at `(x[i], y[j])`.
    pub values: Vec<Vec<f64>>,
}

pub const DEFAULT_WIGNER_POINTS: usize = 201;
pub const DEFAULT_WIGNER_SIGMAS: f64 = 6.0;

fn axis(half: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| -half + 2.0 * half * k as f64 / (points - 1) as f64)
        .collect()
}

/// Evaluates the Wigner function of a 2x2 covariance matrix on a grid of
/// `points x points` spanning `+- sigmas` standard deviations per axis.
pub fn wigner_grid(block: &Matrix2<f64>, sigmas: f64, points: usize) -> Result<WignerGrid> {
    let cm = DMatrix::from_iterator(2, 2, block.iter().copied());
    let kernel = WignerKernel::new(&cm)?;
    let points = points.max(2);
    let x = axis(sigmas * block[(0, 0)].sqrt(), points);
    let y = axis(sigmas * block[(1, 1)].sqrt(), points);
    let values = x
        .par_iter()
        .map(|&xi| y.iter().map(|&yj| kernel.eval(&[xi, yj])).collect())
        .collect();
    Ok(WignerGrid { x, y, values })
}

impl WignerGrid {
    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        let trap_weights = |v: &[f64]| -> Vec<f64> {
            let n = v.len();
            (0..n)
                .map(|k| {
                    let left = if k > 0 { v[k] - v[k - 1] } else { 0.0 };
                    let right = if k + 1 < n { v[k + 1] - v[k] } else { 0.0 };
                    0.5 * (left + right)
                })
                .collect()
        };
        let wx = trap_weights(&self.x);
        let wy = trap_weights(&self.y);
        self.values
            .iter()
            .zip(&wx)
            .map(|(row, a)| a * row.iter().zip(&wy).map(|(w, b)| w * b).sum::<f64>())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Matrix6;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn vacuum_reduction() {
        let r = reduce_atom_mirror(&CovarianceMatrix::vacuum());
        assert_eq!(r.a, Matrix2::identity() * 0.5);
        assert_eq!(r.b, Matrix2::identity() * 0.5);
        assert_eq!(r.c, Matrix2::zeros());
        assert_eq!(log_negativity(&r).unwrap(), 0.0);
        assert_relative_eq!(
            partial_transpose_eigenvalue(&r).unwrap(),
            0.5,
            max_relative = 1e-15
        );
    }

    #[test]
    fn cross_block_bookkeeping() {
        let mut v = CovarianceMatrix::vacuum();
        v.0[(0, 4)] = 0.3;
        v.0[(4, 0)] = 0.3;
        let r = reduce_atom_mirror(&v);
        assert_eq!(r.c[(0, 0)], 0.3);
        assert_eq!(r.c[(0, 1)] + r.c[(1, 0)] + r.c[(1, 1)], 0.0);
    }

    #[test]
    fn two_mode_squeezed_vacuum() {
        // eta = exp(-2r)/2 so E_N = 2r.
        for r in [0.1, 0.5, 1.3] {
            let e = log_negativity(&ReducedCM::two_mode_squeezed(r)).unwrap();
            assert!((e - 2.0 * r).abs() <= 1e-9, "{e}");
        }
        assert!((log_negativity(&ReducedCM::two_mode_squeezed(0.5)).unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn product_thermal_states_separable() {
        for n in [0.0, 1.0, 50.0] {
            let r = ReducedCM {
                a: Matrix2::identity() * (n + 0.5),
                b: Matrix2::identity() * 0.5,
                c: Matrix2::zeros(),
            };
            assert_eq!(log_negativity(&r).unwrap(), 0.0);
        }
    }

    #[test]
    fn invalid_cm_rejected() {
        // Symmetric but indefinite: the discriminant under the square root is negative.
        #[rustfmt::skip]
        let m = Matrix4::new(
            -0.73, 0.15, 0.17, -0.58,
            0.15, -0.44, 0.21, 0.95,
            0.17, 0.21, 0.08, -0.21,
            -0.58, 0.95, -0.21, -0.77,
        );
        let r = ReducedCM::from_matrix(&m);
        assert!(matches!(
            log_negativity(&r),
            Err(SimError::NonPhysical { .. })
        ));
    }

    fn rotation(theta: f64) -> Matrix2<f64> {
        Matrix2::new(theta.cos(), -theta.sin(), theta.sin(), theta.cos())
    }

    proptest! {
        #[test]
        fn local_rotation_invariance(r in 0.0f64..1.5, theta in -PI..PI, phi in -PI..PI) {
            let base = ReducedCM::two_mode_squeezed(r);
            let ra = rotation(theta);
            let rb = rotation(phi);
            let rotated = ReducedCM {
                a: ra * base.a * ra.transpose(),
                b: rb * base.b * rb.transpose(),
                c: ra * base.c * rb.transpose(),
            };
            let e0 = log_negativity(&base).unwrap();
            let e1 = log_negativity(&rotated).unwrap();
            prop_assert!((e0 - e1).abs() <= 1e-10);
        }

        #[test]
        fn smaller_eigenvalue_matches_symmetric_eigensolver(a in 0.01f64..10.0, b in 0.01f64..10.0, t in -1.0f64..1.0) {
            let off = t * (a * b).sqrt() * 0.999;
            let m = Matrix2::new(a, off, off, b);
            let s = squeezing_parameter(&m).unwrap();
            let eig = m.symmetric_eigen();
            let min = eig.eigenvalues.min();
            prop_assert!((s.lambda - min).abs() <= 1e-12 * m.amax().max(1.0));
        }

        #[test]
        fn minor_axis_is_eigenvector(a in 0.1f64..5.0, b in 0.1f64..5.0, t in -0.95f64..0.95) {
            let off = t * (a * b).sqrt();
            let m = Matrix2::new(a, off, off, b);
            let e = ellipse(&m).unwrap();
            let v = nalgebra::Vector2::new(e.angle.cos(), e.angle.sin());
            let mv = m * v;
            prop_assert!((mv - v * e.minor_variance).norm() <= 1e-9 * m.amax());
        }
    }

    #[test]
    fn squeezing_closed_forms() {
        let v = squeezing_parameter(&(Matrix2::identity() * 0.5)).unwrap();
        assert_eq!(v.lambda, 0.5);
        assert_relative_eq!(v.r_raw, 10.0 * 2f64.log10(), max_relative = 1e-14);
        assert_eq!(v.r_db, 0.0);
        let s = squeezing_parameter(&Matrix2::new(0.25, 0.0, 0.0, 1.0)).unwrap();
        assert_relative_eq!(s.lambda, 0.25, max_relative = 1e-15);
        assert_relative_eq!(s.r_db, 10.0 * 2f64.log10(), max_relative = 1e-14);
        assert!(matches!(
            squeezing_parameter(&Matrix2::new(1.0, 2.0, 2.0, 1.0)),
            Err(SimError::NonPositive { .. })
        ));
    }

    #[test]
    fn ellipse_analytic_angles() {
        let e = ellipse(&Matrix2::new(0.25, 0.0, 0.0, 1.0)).unwrap();
        assert!(e.angle.abs() <= 1e-12);
        let e = ellipse(&Matrix2::new(1.0, 0.0, 0.0, 0.25)).unwrap();
        assert!((e.angle - PI / 2.0).abs() <= 1e-12);
        let r = rotation(0.4);
        let e = ellipse(&(r * Matrix2::new(0.25, 0.0, 0.0, 1.0) * r.transpose())).unwrap();
        assert!((e.angle - 0.4).abs() <= 1e-6);
        assert_relative_eq!(e.eccentricity(), 0.75f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn phonon_number_and_variance() {
        assert_eq!(mean_phonon_number(&CovarianceMatrix::vacuum()), 0.0);
        let t = CovarianceMatrix::thermal_initial(100.0);
        assert_eq!(position_variance(&t), 100.5);
        assert_eq!(mean_phonon_number(&t), 100.0);
        assert!(!is_position_squeezed(&CovarianceMatrix::vacuum()));
        let mut s = CovarianceMatrix(Matrix6::identity() * 0.5);
        s.0[(0, 0)] = 0.3;
        assert!(is_position_squeezed(&s));
    }

    #[test]
    fn vacuum_wigner_origin() {
        let w = wigner_value(&(DMatrix::identity(2, 2) * 0.5), &[0.0, 0.0]).unwrap();
        assert_relative_eq!(w, 1.0 / PI, max_relative = 1e-15);
        let w2 = wigner_value(&(DMatrix::identity(4, 4) * 0.5), &[0.0; 4]).unwrap();
        assert_relative_eq!(w2, 1.0 / (PI * PI), max_relative = 1e-14);
    }

    #[test]
    fn wigner_normalization() {
        for m in [
            Matrix2::identity() * 0.5,
            Matrix2::new(0.3, 0.2, 0.2, 2.0),
            Matrix2::new(40.0, -3.0, -3.0, 0.4),
        ] {
            let g = wigner_grid(&m, DEFAULT_WIGNER_SIGMAS, DEFAULT_WIGNER_POINTS).unwrap();
            assert_eq!(g.values.len(), 201);
            assert!((g.integral() - 1.0).abs() <= 1e-3, "{}", g.integral());
        }
    }

    #[test]
    fn singular_wigner_rejected() {
        let m = Matrix2::new(1.0, 1.0, 1.0, 1.0);
        assert!(matches!(
            wigner_grid(&m, 6.0, 11),
            Err(SimError::SingularCm { .. })
        ));
    }
}
