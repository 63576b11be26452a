//! Parametric orthogonal polynomials on the unit circle.
//!
//! For each `theta`, the pivot-free factorization `T_m(e^{i theta}) = L U`
//! yields `[phi_{m-1}, ..., phi_0]^T = U [w^{m-1}, ..., 1]^T`, a family
//! orthogonal for the slice measure `dmu^theta`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::CdKernelSet;
use crate::measure::{BernsteinSzego, SlicedMoments};
use crate::poly::{pow_signed, C64, ONE, ZERO};
use crate::schur_cohn::{DeterminantProfile, LaurentMatrixPoly};

/// Smallest pivot accepted by [`lu_no_pivot`].
pub const PIVOT_TOL: f64 = 1e-12;
const THETA_GRID_START: usize = 64;
const THETA_GRID_CAP: usize = 4096;
const THETA_GRID_TOL: f64 = 1e-11;

/// Doolittle factorization `M = L U` with unit-diagonal `L` and no row
/// exchanges.
pub fn lu_no_pivot(m: &DMatrix<C64>) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let n = m.nrows();
    let mut l = DMatrix::<C64>::identity(n, n);
    let mut u = DMatrix::from_element(n, n, ZERO);
    for k in 0..n {
        for c in k..n {
            let s: C64 = (0..k).map(|t| l[(k, t)] * u[(t, c)]).sum();
            u[(k, c)] = m[(k, c)] - s;
        }
        let pivot = u[(k, k)];
        if !(pivot.re > PIVOT_TOL) {
            return Err(Error::NotPositiveDefinite { index: k, pivot: pivot.re });
        }
        for r in k + 1..n {
            let s: C64 = (0..k).map(|t| l[(r, t)] * u[(t, k)]).sum();
            l[(r, k)] = (m[(r, k)] - s) / pivot;
        }
    }
    Ok((l, u))
}

/// `phi_0, ..., phi_{m-1}` at one angle, with the factors they come from.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricOpuc {
    pub theta: f64,
    /// `phi[i]` ascending in `w`, of length `i + 1`.
    pub phi: Vec<Vec<C64>>,
    pub l: DMatrix<C64>,
    pub u: DMatrix<C64>,
    pub profile: DeterminantProfile,
}

impl ParametricOpuc {
    pub fn m(&self) -> usize {
        self.phi.len()
    }

    /// Leading coefficient of `phi_i`, equal to `U_{m-1-i, m-1-i}`.
    pub fn leading(&self, i: usize) -> C64 {
        self.phi[i][i]
    }

    /// `max |L U - T_m(e^{i theta})|`.
    pub fn factor_residual(&self, tm: &LaurentMatrixPoly) -> f64 {
        (&self.l * &self.u - tm.eval(self.theta)).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `max_i |prod_{k<i} U_kk - D_i|`.
    pub fn determinant_chain_residual(&self) -> f64 {
        let mut prod = ONE;
        let mut worst: f64 = 0.0;
        for (i, d) in self.profile.values.iter().enumerate().skip(1) {
            prod *= self.u[(i - 1, i - 1)];
            worst = worst.max((prod - C64::new(*d, 0.0)).norm());
        }
        worst
    }
}

pub fn build_opuc(tm: &LaurentMatrixPoly, theta: f64) -> Result<ParametricOpuc> {
    let m = tm.dim();
    if m == 0 {
        return Err(Error::DegenerateDegree);
    }
    let (l, u) = lu_no_pivot(&tm.eval(theta))?;
    let phi = (0..m)
        .map(|i| {
            let r = m - 1 - i;
            // column c carries w^{m-1-c}
            (0..=i).map(|power| u[(r, m - 1 - power)]).collect()
        })
        .collect();
    Ok(ParametricOpuc { theta, phi, l, u, profile: tm.principal_determinants(theta) })
}

/// Slice inner products of a parametric family against both candidate
/// diagonal laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpucOrthReport {
    pub theta: f64,
    /// `<phi_i, phi_i>_theta`.
    pub diagonal: Vec<f64>,
    pub max_offdiag: f64,
    /// `max_i |<phi_i, phi_i> - D_{m-i} / D_{m-i-1}|`.
    pub lu_law_residual: f64,
    /// `max_{i >= 1} |<phi_i, phi_i> - D_{m-i} / D_{m-i+1}|`; `None` when
    /// `m = 1`, where the printed law is undefined for every index.
    pub printed_law_residual: Option<f64>,
}

impl OpucOrthReport {
    pub fn lu_law_matches(&self, tol: f64) -> bool {
        self.lu_law_residual < tol
    }

    pub fn printed_law_matches(&self, tol: f64) -> Option<bool> {
        self.printed_law_residual.map(|r| r < tol)
    }
}

pub fn opuc_orthogonality_check(mu: &BernsteinSzego, tm: &LaurentMatrixPoly, theta: f64) -> Result<OpucOrthReport> {
    let family = build_opuc(tm, theta)?;
    let m = family.m();
    let slice = mu.slice_moments(theta, m)?;
    let d = &family.profile.values;
    let mut diagonal = Vec::with_capacity(m);
    let mut max_offdiag: f64 = 0.0;
    let mut lu_law_residual: f64 = 0.0;
    let mut printed: Option<f64> = None;
    for i in 0..m {
        for j in 0..m {
            let v = slice.inner(&family.phi[i], &family.phi[j])?;
            if i != j {
                max_offdiag = max_offdiag.max(v.norm());
                continue;
            }
            diagonal.push(v.re);
            lu_law_residual = lu_law_residual.max((v - C64::new(d[m - i] / d[m - i - 1], 0.0)).norm());
            if i >= 1 {
                let r = (v - C64::new(d[m - i] / d[m - i + 1], 0.0)).norm();
                printed = Some(printed.map_or(r, |p: f64| p.max(r)));
            }
        }
    }
    Ok(OpucOrthReport { theta, diagonal, max_offdiag, lu_law_residual, printed_law_residual: printed })
}

/// Orthogonal polynomials for one slice by Gram-Schmidt on
/// `1, w, ..., w^{m-1}`, monic, ascending in `w`.
pub fn gram_schmidt_monic(slice: &SlicedMoments, m: usize) -> Result<Vec<Vec<C64>>> {
    let mut out: Vec<Vec<C64>> = Vec::with_capacity(m);
    let mut norms: Vec<C64> = Vec::with_capacity(m);
    for i in 0..m {
        let mut v = vec![ZERO; i + 1];
        v[i] = ONE;
        for _ in 0..2 {
            for (q, nq) in out.iter().zip(&norms) {
                let c = slice.inner(&v, q)? / nq;
                for (a, b) in v.iter_mut().zip(q) {
                    *a -= c * b;
                }
            }
        }
        let nv = slice.inner(&v, &v)?;
        if !(nv.re > 0.0) {
            return Err(Error::RankDeficient);
        }
        norms.push(nv);
        out.push(v);
    }
    Ok(out)
}

/// `I(k) = (1/2pi) \int e^{ik theta} W(theta) <phi_j, phi_j>_theta d theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishingReport {
    pub j: usize,
    /// `n (m - j)`; `I(k)` vanishes beyond it.
    pub bound: usize,
    /// `(k, I(k))` with `W = D_{m-j-1}`.
    pub values: Vec<(i32, C64)>,
    /// `(k, I(k))` with the printed multiplier `W = D_{m-j+1}`, for `j >= 1`.
    pub printed: Option<Vec<(i32, C64)>>,
    pub grid: usize,
}

/// Trapezoid rule on a doubling `theta` grid, reusing every sample.
pub fn moment_vanishing_check(
    mu: &BernsteinSzego,
    tm: &LaurentMatrixPoly,
    j: usize,
    ks: &[i32],
) -> Result<VanishingReport> {
    let m = tm.dim();
    if j >= m {
        return Err(Error::IndexOutOfRange { index: j, limit: m });
    }
    let sample = |theta: f64| -> Result<(f64, f64, Option<f64>)> {
        let family = build_opuc(tm, theta)?;
        let slice = mu.slice_moments(theta, m)?;
        let norm = slice.inner(&family.phi[j], &family.phi[j])?.re;
        let d = &family.profile.values;
        Ok((norm, d[m - j - 1], (j >= 1).then(|| d[m - j + 1])))
    };
    let integrate = |samples: &[(f64, f64, Option<f64>)], printed: bool| -> Vec<(i32, C64)> {
        let n = samples.len();
        ks.iter()
            .map(|&k| {
                let acc: C64 = samples
                    .iter()
                    .enumerate()
                    .map(|(t, &(norm, w, wp))| {
                        let weight = if printed { wp.unwrap_or(0.0) } else { w };
                        let theta = std::f64::consts::TAU * t as f64 / n as f64;
                        pow_signed(C64::from_polar(1.0, theta), k) * (weight * norm)
                    })
                    .sum();
                (k, acc / n as f64)
            })
            .collect()
    };

    let mut n = THETA_GRID_START;
    let mut samples: Vec<(f64, f64, Option<f64>)> =
        (0..n).map(|t| sample(std::f64::consts::TAU * t as f64 / n as f64)).collect::<Result<_>>()?;
    let mut values = integrate(&samples, false);
    loop {
        // interleave the new odd-indexed angles
        let odd: Vec<_> = (0..n)
            .map(|t| sample(std::f64::consts::TAU * (2 * t + 1) as f64 / (2 * n) as f64))
            .collect::<Result<_>>()?;
        samples = samples.into_iter().zip(odd).flat_map(|(a, b)| [a, b]).collect();
        n *= 2;
        let next = integrate(&samples, false);
        let change = values.iter().zip(&next).map(|(a, b)| (a.1 - b.1).norm()).fold(0.0, f64::max);
        values = next;
        if change < THETA_GRID_TOL {
            break;
        }
        if n >= THETA_GRID_CAP {
            return Err(Error::NoConvergence { grid: n, est_error: change });
        }
    }
    let printed = (j >= 1).then(|| integrate(&samples, true));
    Ok(VanishingReport { j, bound: mu.deg().n * (m - j), values, printed, grid: n })
}

/// Largest `theta`-Fourier coefficient of `<a_i, a_j>_theta` at frequencies
/// beyond `2n`, from `grid` equispaced angles.
pub fn trig_structure_residual(mu: &BernsteinSzego, ks: &CdKernelSet, grid: usize) -> Result<f64> {
    let m = ks.coeffs.len();
    let limit = 2 * ks.deg.n as i32;
    let mut samples: Vec<DMatrix<C64>> = Vec::with_capacity(grid);
    for t in 0..grid {
        let theta = std::f64::consts::TAU * t as f64 / grid as f64;
        let z = C64::from_polar(1.0, theta);
        let slice = mu.slice_moments(theta, m)?;
        let rows: Vec<Vec<C64>> = ks
            .coeffs
            .iter()
            .map(|a| {
                let mut v = vec![ZERO; m];
                for ((i, jj), c) in a.terms() {
                    v[jj as usize] += c * pow_signed(z, i);
                }
                v
            })
            .collect();
        let mut g = DMatrix::from_element(m, m, ZERO);
        for i in 0..m {
            for j in 0..m {
                g[(i, j)] = slice.inner(&rows[i], &rows[j])?;
            }
        }
        samples.push(g);
    }
    let mut worst: f64 = 0.0;
    let half = grid as i32 / 2;
    for freq in (limit + 1)..half {
        for sign in [1, -1] {
            let f = sign * freq;
            let coef = samples.iter().enumerate().fold(DMatrix::from_element(m, m, ZERO), |acc, (t, g)| {
                let theta = std::f64::consts::TAU * t as f64 / grid as f64;
                acc + g * C64::from_polar(1.0 / grid as f64, -(f as f64) * theta)
            });
            worst = worst.max(coef.iter().map(|c| c.norm()).fold(0.0, f64::max));
        }
    }
    Ok(worst)
}
