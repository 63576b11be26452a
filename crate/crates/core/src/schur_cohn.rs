//! The Schur-Cohn matrix `T_m(z)` of a stable polynomial.
//!
//! Writing `p(z, w) = sum_{i=0}^m p_i(z) w^i`,
//!
//! ```text
//! T_m(z) = P(z) P*(1/z) - Q*(1/z) Q(z)
//! ```
//!
//! where `P` is the lower-triangular Toeplitz matrix with first column
//! `p_0, ..., p_{m-1}`, `Q` the upper-triangular Toeplitz matrix with first
//! row `p_m, ..., p_1`, and `*` conjugates coefficients. On `|z| = 1` this is
//! Hermitian, positive definite when `p` is stable, and inverse to the
//! moment matrix of the slice measure `dmu^theta`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{BernsteinSzego, SlicedMoments};
use crate::poly::{DegreePair, LaurentPoly, C64, ONE, ZERO};

/// `m x m` matrix of Laurent polynomials in `z` (exponents `(i, 0)`).
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentMatrixPoly {
    dim: usize,
    entries: Vec<LaurentPoly>,
}

impl LaurentMatrixPoly {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> &LaurentPoly {
        &self.entries[i * self.dim + j]
    }

    /// Constant Fourier coefficient of entry `(i, j)`, i.e. its mean over the
    /// unit circle.
    pub fn mean_entry(&self, i: usize, j: usize) -> C64 {
        self.entry(i, j).coeff(0, 0)
    }

    /// Entrywise evaluation at `z = e^{i theta}`, averaged with its conjugate
    /// transpose so the result is exactly Hermitian.
    pub fn eval(&self, theta: f64) -> DMatrix<C64> {
        let z = C64::from_polar(1.0, theta);
        let raw = DMatrix::from_fn(self.dim, self.dim, |i, j| self.entry(i, j).eval_nonzero(z, ONE));
        (&raw + raw.adjoint()) * C64::new(0.5, 0.0)
    }

    /// `D_0 = 1` and `D_i` the determinant of the leading `i x i` block of
    /// `T_m(e^{i theta})`, for `i = 1..=m`.
    pub fn principal_determinants(&self, theta: f64) -> DeterminantProfile {
        let t = self.eval(theta);
        let mut values = Vec::with_capacity(self.dim + 1);
        values.push(1.0);
        for i in 1..=self.dim {
            let block = t.view((0, 0), (i, i)).into_owned();
            values.push(block.lu().determinant().re);
        }
        DeterminantProfile { theta, values }
    }

    /// Smallest eigenvalue of `T_m(e^{i theta})` over a uniform grid of
    /// `resolution` angles.
    pub fn positivity_scan(&self, resolution: usize) -> PositivityReport {
        let resolution = resolution.max(1);
        let mut min_eig = f64::INFINITY;
        let mut theta_at_min = 0.0;
        let mut scale: f64 = 0.0;
        for k in 0..resolution {
            let theta = std::f64::consts::TAU * k as f64 / resolution as f64;
            let t = self.eval(theta);
            scale = scale.max(t.iter().map(|c| c.norm()).fold(0.0, f64::max));
            let eig = min_eigenvalue(&t);
            if eig < min_eig {
                min_eig = eig;
                theta_at_min = theta;
            }
        }
        PositivityReport { min_eig, theta_at_min, all_positive: min_eig > 1e-12 * scale.max(1.0) }
    }
}

pub(crate) fn min_eigenvalue(h: &DMatrix<C64>) -> f64 {
    SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Leading principal determinants at one angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminantProfile {
    pub theta: f64,
    /// `D_0, ..., D_m`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub min_eig: f64,
    pub theta_at_min: f64,
    pub all_positive: bool,
}

/// `p_j(1/z)` with conjugated coefficients.
fn conj_recip_z(q: &LaurentPoly) -> LaurentPoly {
    q.conj_reciprocal()
}

/// Builds `T_m(z)` from the w-coefficient rows of `p`.
pub fn build_tm(p: &LaurentPoly, deg: DegreePair) -> Result<LaurentMatrixPoly> {
    if deg.m == 0 {
        return Err(Error::DegenerateDegree);
    }
    p.ensure_within(deg)?;
    let m = deg.m;
    let rows: Vec<LaurentPoly> = (0..=m as i32).map(|j| p.w_coefficient(j)).collect();
    let rows_bar: Vec<LaurentPoly> = rows.iter().map(conj_recip_z).collect();
    let mut entries = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let mut acc = LaurentPoly::zero();
            for k in 0..=i.min(j) {
                acc = &acc + &(&rows[i - k] * &rows_bar[j - k]);
                acc = &acc - &(&rows_bar[m - i + k] * &rows[m - j + k]);
            }
            entries.push(acc);
        }
    }
    Ok(LaurentMatrixPoly { dim: m, entries })
}

/// Moment matrix of the slice measure in the basis `[w^{m-1}, ..., w, 1]`:
/// `M_{ab} = <v_a, v_b> = m_{b-a}`.
pub fn slice_moment_matrix(slice: &SlicedMoments, m: usize) -> Result<DMatrix<C64>> {
    let mut out = DMatrix::from_element(m, m, ZERO);
    for a in 0..m {
        for b in 0..m {
            out[(a, b)] = slice.require(b as i32 - a as i32)?;
        }
    }
    Ok(out)
}

/// Largest entry of `T_m(e^{i theta}) M(theta) - I`.
pub fn inverse_moment_residual(mu: &BernsteinSzego, tm: &LaurentMatrixPoly, theta: f64) -> Result<f64> {
    let m = tm.dim();
    let slice = mu.slice_moments(theta, m)?;
    let moments = slice_moment_matrix(&slice, m)?;
    let prod = tm.eval(theta) * moments - DMatrix::<C64>::identity(m, m);
    Ok(prod.iter().map(|c| c.norm()).fold(0.0, f64::max))
}
