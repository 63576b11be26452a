//! The parametrized Christoffel-Darboux kernel
//!
//! ```text
//! L(z, w; eta) = z^n (p(z,w) conj(p(1/conj z, eta)) - p~(z,w) conj(p~(1/conj z, eta))) / (1 - w conj(eta))
//!              = z^n [1, ..., w^{m-1}] T_m(z) [1, ..., eta^{m-1}]^H
//!              = sum_j a_j(z, w) conj(eta)^j
//! ```
//!
//! built three ways: from the Schur-Cohn matrix, by exact division of the
//! numerator, and from the cofactor split `a_j = p A_j + p~ B_j`. `eta`
//! enters only through `conj(eta)`, which is what every routine here takes.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::measure::BernsteinSzego;
use crate::poly::{pow_signed, DegreePair, LaurentPoly, C64, ONE, ZERO};
use crate::schur_cohn::{build_tm, LaurentMatrixPoly};

/// Relative size of a division remainder still treated as exact.
pub const REMAINDER_TOL: f64 = 1e-11;

/// Kernel coefficients `a_j` and their cofactors `A_j`, `B_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CdKernelSet {
    pub deg: DegreePair,
    /// `a_0, ..., a_{m-1}`, each supported in `[0, 2n] x [0, m-1]`.
    pub coeffs: Vec<LaurentPoly>,
    /// `A_j`: multiplies `p`.
    pub p_cofactors: Vec<LaurentPoly>,
    /// `B_j`: multiplies the reflection of `p`.
    pub reflected_cofactors: Vec<LaurentPoly>,
}

impl CdKernelSet {
    /// All pieces for `p`; `a_j` come from `T_m`.
    pub fn build(p: &LaurentPoly, deg: DegreePair) -> Result<Self> {
        let tm = build_tm(p, deg)?;
        Self::from_tm(&tm, deg, p)
    }

    pub fn from_tm(tm: &LaurentMatrixPoly, deg: DegreePair, p: &LaurentPoly) -> Result<Self> {
        let coeffs = kernel_from_tm(tm, deg)?;
        let (p_cofactors, reflected_cofactors) = ab_decomposition(p, deg)?;
        Ok(Self { deg, coeffs, p_cofactors, reflected_cofactors })
    }

    /// `L(., .; eta) = sum_j a_j conj(eta)^j` as a polynomial in `(z, w)`.
    pub fn kernel_at(&self, eta: C64) -> LaurentPoly {
        combine(&self.coeffs, eta.conj())
    }

    /// `L(., .; eta)` as `p A(eta) + p~ B(eta)`.
    pub fn kernel_via_cofactors(&self, eta: C64, p: &LaurentPoly, reflected: &LaurentPoly) -> LaurentPoly {
        let e = eta.conj();
        &(p * &combine(&self.p_cofactors, e)) + &(reflected * &combine(&self.reflected_cofactors, e))
    }

    /// `L(z, w; eta)` at a point.
    pub fn eval(&self, z: C64, w: C64, eta: C64) -> C64 {
        let e = eta.conj();
        self.coeffs.iter().enumerate().map(|(j, a)| a.eval_nonzero_or_origin(z, w) * e.powi(j as i32)).sum()
    }

    /// `max_j |a_j - (p A_j + p~ B_j)|` coefficientwise.
    pub fn cofactor_residual(&self, p: &LaurentPoly, reflected: &LaurentPoly) -> f64 {
        self.coeffs
            .iter()
            .zip(self.p_cofactors.iter().zip(&self.reflected_cofactors))
            .map(|(a, (ca, cb))| a.max_abs_diff(&(&(p * ca) + &(reflected * cb))))
            .fold(0.0, f64::max)
    }

    /// `max_k |a_k - reflect(a_{m-k-1})|` with respect to `(2n, m-1)`.
    pub fn symmetry_residual(&self) -> Result<f64> {
        let m = self.coeffs.len();
        let bx = DegreePair::new(2 * self.deg.n, m - 1);
        let mut worst: f64 = 0.0;
        for k in 0..m {
            worst = worst.max(self.coeffs[k].max_abs_diff(&self.coeffs[m - k - 1].reflect(bx)?));
        }
        Ok(worst)
    }

    /// Support containment: `a_j` in `[0,2n] x [0,m-1]`, `A_j` and `B_j` in
    /// `[0,n] x [0,j]`.
    pub fn supports_ok(&self) -> bool {
        let (n, m) = (self.deg.n, self.deg.m);
        self.coeffs.iter().all(|a| a.ensure_within(DegreePair::new(2 * n, m - 1)).is_ok())
            && self.p_cofactors.iter().enumerate().all(|(j, a)| a.ensure_within(DegreePair::new(n, j)).is_ok())
            && self
                .reflected_cofactors
                .iter()
                .enumerate()
                .all(|(j, b)| b.ensure_within(DegreePair::new(n, j)).is_ok())
    }

    /// Singular values of the matrix whose rows are the coefficient vectors
    /// of `a_0, ..., a_{m-1}` over `[0,2n] x [0,m-1]`, descending.
    pub fn span_singular_values(&self) -> Vec<f64> {
        let bx = crate::poly::SupportBox::new(0, 2 * self.deg.n_i32(), 0, self.deg.m_i32() - 1);
        let exps: Vec<_> = bx.exponents().collect();
        let mat = DMatrix::from_fn(self.coeffs.len(), exps.len(), |r, c| {
            let (i, j) = exps[c];
            self.coeffs[r].coeff(i, j)
        });
        let mut sv: Vec<f64> = mat.svd(false, false).singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }
}

fn combine(parts: &[LaurentPoly], eta_bar: C64) -> LaurentPoly {
    parts.iter().enumerate().fold(LaurentPoly::zero(), |acc, (j, a)| &acc + &a.scale(eta_bar.powi(j as i32)))
}

/// `a_j(z, w) = z^n sum_i w^i T_{ij}(z)`.
pub fn kernel_from_tm(tm: &LaurentMatrixPoly, deg: DegreePair) -> Result<Vec<LaurentPoly>> {
    let m = tm.dim();
    if m == 0 || deg.m == 0 {
        return Err(Error::DegenerateDegree);
    }
    let n = deg.n_i32();
    (0..m)
        .map(|j| {
            let a = (0..m).fold(LaurentPoly::zero(), |acc, i| &acc + &tm.entry(i, j).shift(n, i as i32));
            match a.support_box() {
                Some(h) if h.i_min < 0 => Err(Error::NegativeExponentResidue { exponent: h.i_min }),
                _ => Ok(a),
            }
        })
        .collect()
}

/// `L(., .; eta)` from the divided-difference form: the numerator is built
/// with `conj(eta)` substituted, divided exactly by `1 - w conj(eta)`, and
/// multiplied by `z^n`.
pub fn kernel_divided_difference(p: &LaurentPoly, deg: DegreePair, eta: C64) -> Result<LaurentPoly> {
    if deg.m == 0 {
        return Err(Error::DegenerateDegree);
    }
    let reflected = p.reflect(deg)?;
    let e = eta.conj();
    // conj(q(1/conj z, eta)) = sum conj(c_ij) conj(eta)^j z^{-i}
    let substitute = |q: &LaurentPoly| -> LaurentPoly {
        LaurentPoly::from_terms(q.terms().map(|((i, j), c)| ((-i, 0), c.conj() * e.powi(j))))
    };
    let numerator = &(p * &substitute(p)) - &(&reflected * &substitute(&reflected));

    let m = deg.m_i32();
    let rows: Vec<LaurentPoly> = (0..=m).map(|j| numerator.w_coefficient(j)).collect();
    let scale = numerator.max_abs_coeff().max(1.0);
    let (quotient, remainder) = divide_by_one_minus(&rows, e);
    let residual = remainder.max_abs_coeff();
    if residual > REMAINDER_TOL * scale {
        return Err(Error::NonzeroRemainder { residual });
    }
    let n = deg.n_i32();
    Ok(quotient.iter().enumerate().fold(LaurentPoly::zero(), |acc, (j, q)| &acc + &q.shift(n, j as i32)))
}

/// Divides `sum_j rows[j] w^j` by `1 - e w`. Returns the `m` quotient rows
/// and the remainder. For `|e| <= 1` the quotient is accumulated from the
/// constant term up (`Q_j = N_j + e Q_{j-1}`), leaving the top coefficient
/// as remainder; for `|e| > 1` from the top down, leaving the constant term.
fn divide_by_one_minus(rows: &[LaurentPoly], e: C64) -> (Vec<LaurentPoly>, LaurentPoly) {
    let m = rows.len() - 1;
    let mut q = vec![LaurentPoly::zero(); m];
    if e.norm() <= 1.0 {
        let mut prev = LaurentPoly::zero();
        for j in 0..m {
            let cur = &rows[j] + &prev.scale(e);
            q[j] = cur.clone();
            prev = cur;
        }
        let remainder = &rows[m] + &prev.scale(e);
        (q, remainder)
    } else {
        // N = Q - e w Q: N_m = -e Q_{m-1}, N_j = Q_j - e Q_{j-1}
        let inv = ONE / e;
        let mut next = rows[m].scale(-inv);
        for j in (0..m).rev() {
            q[j] = next.clone();
            if j > 0 {
                next = (&q[j] - &rows[j]).scale(inv);
            }
        }
        let remainder = &rows[0] - &q[0];
        (q, remainder)
    }
}

/// Cofactors of `L = p A + p~ B` split by powers of `conj(eta)`:
///
/// ```text
/// A_k = sum_{j=m-k}^{m}  p~_j(z) w^{k-m+j}
/// B_k = -sum_{j=m-k}^{m} p_j(z)  w^{k-m+j}
/// ```
///
/// where `p_j`, `p~_j` are the w-coefficient rows.
pub fn ab_decomposition(p: &LaurentPoly, deg: DegreePair) -> Result<(Vec<LaurentPoly>, Vec<LaurentPoly>)> {
    if deg.m == 0 {
        return Err(Error::DegenerateDegree);
    }
    let reflected = p.reflect(deg)?;
    let m = deg.m_i32();
    let mut a_parts = Vec::with_capacity(deg.m);
    let mut b_parts = Vec::with_capacity(deg.m);
    for k in 0..m {
        let mut a = LaurentPoly::zero();
        let mut b = LaurentPoly::zero();
        for j in (m - k)..=m {
            let power = k - m + j;
            a = &a + &reflected.w_coefficient(j).shift(0, power);
            b = &b - &p.w_coefficient(j).shift(0, power);
        }
        a_parts.push(a);
        b_parts.push(b);
    }
    Ok((a_parts, b_parts))
}

/// Both sides of the sliced norm identity
/// `\int |L(z,w;eta)|^2 dmu^theta(w) = conj(z)^n L(z, eta; eta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LnormCheck {
    pub lhs: f64,
    pub rhs: C64,
    pub residual: f64,
}

/// The kernel at `z = e^{i theta}` as coefficients in `w`, ascending.
fn slice_coefficients(a: &LaurentPoly, z: C64, m: usize) -> Vec<C64> {
    let mut out = vec![ZERO; m];
    for ((i, j), c) in a.terms() {
        out[j as usize] += c * pow_signed(z, i);
    }
    out
}

pub fn lnorm_identity_check(mu: &BernsteinSzego, ks: &CdKernelSet, theta: f64, eta: C64) -> Result<LnormCheck> {
    let m = ks.coeffs.len();
    let z = C64::from_polar(1.0, theta);
    let ell = slice_coefficients(&ks.kernel_at(eta), z, m);
    let slice = mu.slice_moments(theta, m)?;
    let lhs = slice.inner(&ell, &ell)?;
    let rhs = z.conj().powi(ks.deg.n_i32()) * ks.eval(z, eta, eta);
    Ok(LnormCheck { lhs: lhs.re, rhs, residual: (lhs - rhs).norm() })
}

/// `G_{ij} = \int conj(a_i) a_j dmu^theta` minus `T_{ij}(e^{i theta})`.
pub fn slice_gram_check(mu: &BernsteinSzego, ks: &CdKernelSet, tm: &LaurentMatrixPoly, theta: f64) -> Result<DMatrix<C64>> {
    let m = ks.coeffs.len();
    let z = C64::from_polar(1.0, theta);
    let slice = mu.slice_moments(theta, m)?;
    let rows: Vec<Vec<C64>> = ks.coeffs.iter().map(|a| slice_coefficients(a, z, m)).collect();
    let t = tm.eval(theta);
    let mut out = DMatrix::from_element(m, m, ZERO);
    for i in 0..m {
        for j in 0..m {
            out[(i, j)] = slice.inner(&rows[j], &rows[i])? - t[(i, j)];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::{disk_point, random_stable, seeded};
    use std::f64::consts::PI;

    fn poly(terms: &[((i32, i32), f64)]) -> LaurentPoly {
        LaurentPoly::from_real_terms(terms)
    }

    fn worked() -> (LaurentPoly, DegreePair) {
        (poly(&[((0, 0), 3.0), ((1, 0), -1.0), ((0, 1), -1.0)]), DegreePair::new(1, 1))
    }

    #[test]
    fn kernel_from_tm_examples() {
        let (p, deg) = worked();
        let ks = CdKernelSet::build(&p, deg).unwrap();
        assert_eq!(ks.coeffs, vec![poly(&[((0, 0), -3.0), ((1, 0), 9.0), ((2, 0), -3.0)])]);

        let q = poly(&[((0, 0), 2.0), ((0, 1), -1.0)]);
        let ks = CdKernelSet::build(&q, DegreePair::new(0, 1)).unwrap();
        assert_eq!(ks.coeffs, vec![poly(&[((0, 0), 3.0)])]);

        let prod = poly(&[((0, 0), 4.0), ((1, 0), -2.0), ((0, 1), -2.0), ((1, 1), 1.0)]);
        let ks = CdKernelSet::build(&prod, DegreePair::new(1, 1)).unwrap();
        assert_eq!(ks.coeffs, vec![poly(&[((0, 0), -6.0), ((1, 0), 15.0), ((2, 0), -6.0)])]);
    }

    #[test]
    fn divided_difference_examples() {
        let (p, deg) = worked();
        let expected = poly(&[((0, 0), -3.0), ((1, 0), 9.0), ((2, 0), -3.0)]);
        for eta in [C64::new(0.3, 0.4), ZERO, C64::new(-2.0, 5.0)] {
            let l = kernel_divided_difference(&p, deg, eta).unwrap();
            assert!(l.max_abs_diff(&expected) < 1e-13, "eta = {eta}: {l}");
        }
    }

    #[test]
    fn division_reports_remainder() {
        // 1 + w is not a multiple of 1 - e w unless e = -1
        let rows = [LaurentPoly::constant(ONE), LaurentPoly::constant(ONE)];
        for e in [C64::new(0.5, 0.0), C64::new(3.0, 1.0)] {
            let (q, r) = divide_by_one_minus(&rows, e);
            assert_eq!(q.len(), 1);
            assert!(r.max_abs_coeff() > 0.1);
        }
        let (q, r) = divide_by_one_minus(&rows, C64::new(-1.0, 0.0));
        assert!(r.is_zero());
        assert_eq!(q[0], LaurentPoly::constant(ONE));
    }

    #[test]
    fn ab_examples() {
        let (p, deg) = worked();
        let (a, b) = ab_decomposition(&p, deg).unwrap();
        assert_eq!(a, vec![poly(&[((1, 0), 3.0), ((0, 0), -1.0)])]);
        assert_eq!(b, vec![poly(&[((0, 0), 1.0)])]);

        let q = poly(&[((0, 0), 2.0), ((0, 1), -1.0)]);
        let (a, b) = ab_decomposition(&q, DegreePair::new(0, 1)).unwrap();
        assert_eq!(a, vec![poly(&[((0, 0), 2.0)])]);
        assert_eq!(b, vec![poly(&[((0, 0), 1.0)])]);
        let ks = CdKernelSet::build(&q, DegreePair::new(0, 1)).unwrap();
        assert_eq!(ks.cofactor_residual(&q, &q.reflect(DegreePair::new(0, 1)).unwrap()), 0.0);
    }

    #[test]
    fn degenerate_degree_everywhere() {
        let p = poly(&[((0, 0), 2.0), ((1, 0), -1.0)]);
        let deg = DegreePair::new(1, 0);
        assert!(matches!(CdKernelSet::build(&p, deg), Err(Error::DegenerateDegree)));
        assert!(matches!(kernel_divided_difference(&p, deg, ONE), Err(Error::DegenerateDegree)));
        assert!(matches!(ab_decomposition(&p, deg), Err(Error::DegenerateDegree)));
    }

    #[test]
    fn three_routes_agree_on_random_stable() {
        let mut rng = seeded(21);
        for n in 0..=3 {
            for m in 1..=3 {
                let deg = DegreePair::new(n, m);
                let p = random_stable(&mut rng, deg);
                let reflected = p.reflect(deg).unwrap();
                let ks = CdKernelSet::build(&p, deg).unwrap();
                assert!(ks.supports_ok());
                assert!(ks.cofactor_residual(&p, &reflected) < 1e-12);
                assert!(ks.symmetry_residual().unwrap() < 1e-12);
                for _ in 0..20 {
                    let eta = disk_point(&mut rng, 2.0);
                    let via_tm = ks.kernel_at(eta);
                    let via_division = kernel_divided_difference(&p, deg, eta).unwrap();
                    let via_cofactors = ks.kernel_via_cofactors(eta, &p, &reflected);
                    assert!(via_tm.max_abs_diff(&via_division) < 1e-10);
                    assert!(via_tm.max_abs_diff(&via_cofactors) < 1e-10);
                }
                let sv = ks.span_singular_values();
                assert_eq!(sv.len(), m);
                assert!(sv[m - 1] > 1e-8);
            }
        }
    }

    #[test]
    fn lnorm_examples() {
        let (p, deg) = worked();
        let mu = BernsteinSzego::new(p.clone(), deg).unwrap();
        let ks = CdKernelSet::build(&p, deg).unwrap();
        for (theta, eta) in [(0.0, C64::new(0.2, 0.1)), (1.3, C64::new(-0.9, 0.0)), (PI, C64::new(0.0, 1.7))] {
            let r = lnorm_identity_check(&mu, &ks, theta, eta).unwrap();
            let expected = 9.0 - 6.0 * f64::cos(theta);
            assert!((r.lhs - expected).abs() < 1e-12);
            assert!((r.rhs - C64::new(expected, 0.0)).norm() < 1e-12);
        }

        let q = poly(&[((0, 0), 2.0), ((0, 1), -1.0)]);
        let deg = DegreePair::new(0, 1);
        let mu = BernsteinSzego::new(q.clone(), deg).unwrap();
        let ks = CdKernelSet::build(&q, deg).unwrap();
        let r = lnorm_identity_check(&mu, &ks, 0.4, C64::new(0.5, -0.5)).unwrap();
        assert!((r.lhs - 3.0).abs() < 1e-13 && r.residual < 1e-13);
    }

    #[test]
    fn slice_identities_on_random_stable() {
        let mut rng = seeded(3);
        for (n, m) in [(1, 2), (2, 2), (3, 3), (0, 2)] {
            let deg = DegreePair::new(n, m);
            let p = random_stable(&mut rng, deg);
            let mu = BernsteinSzego::new(p.clone(), deg).unwrap();
            let tm = build_tm(&p, deg).unwrap();
            let ks = CdKernelSet::from_tm(&tm, deg, &p).unwrap();
            for k in 0..10 {
                let theta = -PI + 0.63 * k as f64;
                let eta = disk_point(&mut rng, 1.5);
                assert!(lnorm_identity_check(&mu, &ks, theta, eta).unwrap().residual < 1e-9);
                let g = slice_gram_check(&mu, &ks, &tm, theta).unwrap();
                assert!(g.iter().all(|c| c.norm() < 1e-9));
            }
        }
    }
}
