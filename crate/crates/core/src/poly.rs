//! Bivariate Laurent polynomials with complex coefficients.
//!
//! Every object in the crate (the stable polynomial, its reflection, the
//! kernel coefficients, the entries of the Schur-Cohn matrix) is carried by
//! [`LaurentPoly`]: a sparse map from exponent pairs `(i, j)` (the monomial
//! `z^i w^j`) to a complex coefficient. Exactly-zero coefficients are never
//! stored; nothing is rounded away.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Exponent pair `(i, j)` of the monomial `z^i w^j`.
pub type Exponent = (i32, i32);

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Degree of a polynomial: `n` in `z`, `m` in `w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DegreePair {
    pub n: usize,
    pub m: usize,
}

impl DegreePair {
    pub fn new(n: usize, m: usize) -> Self {
        Self { n, m }
    }

    pub fn n_i32(&self) -> i32 {
        self.n as i32
    }

    pub fn m_i32(&self) -> i32 {
        self.m as i32
    }
}

impl fmt::Display for DegreePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.n, self.m)
    }
}

/// Closed exponent rectangle `[i_min, i_max] x [j_min, j_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SupportBox {
    pub i_min: i32,
    pub i_max: i32,
    pub j_min: i32,
    pub j_max: i32,
}

impl SupportBox {
    pub fn new(i_min: i32, i_max: i32, j_min: i32, j_max: i32) -> Self {
        Self { i_min, i_max, j_min, j_max }
    }

    /// The degree box `[0, n] x [0, m]`.
    pub fn degree_box(deg: DegreePair) -> Self {
        Self::new(0, deg.n_i32(), 0, deg.m_i32())
    }

    pub fn contains(&self, (i, j): Exponent) -> bool {
        self.i_min <= i && i <= self.i_max && self.j_min <= j && j <= self.j_max
    }

    pub fn rows(&self) -> usize {
        (self.i_max - self.i_min + 1).max(0) as usize
    }

    pub fn cols(&self) -> usize {
        (self.j_max - self.j_min + 1).max(0) as usize
    }

    /// Minkowski sum of two boxes.
    pub fn minkowski(&self, other: &Self) -> Self {
        Self::new(
            self.i_min + other.i_min,
            self.i_max + other.i_max,
            self.j_min + other.j_min,
            self.j_max + other.j_max,
        )
    }

    /// Exponents in the box, z-exponent major.
    pub fn exponents(&self) -> impl Iterator<Item = Exponent> + '_ {
        (self.i_min..=self.i_max).flat_map(move |i| (self.j_min..=self.j_max).map(move |j| (i, j)))
    }
}

/// Finitely supported complex coefficient table over integer exponent pairs.
#[derive(Clone, Default, PartialEq)]
pub struct LaurentPoly {
    coeffs: BTreeMap<Exponent, C64>,
    hull: Option<SupportBox>,
}

impl LaurentPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: C64) -> Self {
        Self::monomial(0, 0, c)
    }

    pub fn monomial(i: i32, j: i32, c: C64) -> Self {
        Self::from_terms([((i, j), c)])
    }

    /// Builds a polynomial from terms; repeated exponents are summed.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (Exponent, C64)>,
    {
        let mut coeffs: BTreeMap<Exponent, C64> = BTreeMap::new();
        for (e, c) in terms {
            *coeffs.entry(e).or_insert(ZERO) += c;
        }
        Self::from_map(coeffs)
    }

    /// Real-coefficient shorthand, mostly for tests and examples.
    pub fn from_real_terms(terms: &[((i32, i32), f64)]) -> Self {
        Self::from_terms(terms.iter().map(|&(e, c)| (e, C64::new(c, 0.0))))
    }

    fn from_map(mut coeffs: BTreeMap<Exponent, C64>) -> Self {
        coeffs.retain(|_, c| *c != ZERO);
        let hull = hull_of(coeffs.keys().copied());
        Self { coeffs, hull }
    }

    /// Dense `(n+1) x (m+1)` grid, `grid[i][j]` the coefficient of `z^i w^j`.
    pub fn from_dense(grid: &[Vec<C64>]) -> Self {
        Self::from_terms(grid.iter().enumerate().flat_map(|(i, row)| {
            row.iter().enumerate().map(move |(j, &c)| ((i as i32, j as i32), c))
        }))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, i: i32, j: i32) -> C64 {
        self.coeffs.get(&(i, j)).copied().unwrap_or(ZERO)
    }

    pub fn terms(&self) -> impl Iterator<Item = (Exponent, C64)> + '_ {
        self.coeffs.iter().map(|(&e, &c)| (e, c))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Tight hull of the stored exponents; `None` for the zero polynomial.
    pub fn support_box(&self) -> Option<SupportBox> {
        self.hull
    }

    /// Degree pair read off the hull. Only meaningful for genuine
    /// polynomials (no negative exponents).
    pub fn degree(&self) -> DegreePair {
        match self.hull {
            Some(h) => DegreePair::new(h.i_max.max(0) as usize, h.j_max.max(0) as usize),
            None => DegreePair::new(0, 0),
        }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    /// Largest coefficientwise difference to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self - other).max_abs_coeff()
    }

    /// Checks that every exponent lies in `[0,n] x [0,m]`.
    pub fn ensure_within(&self, deg: DegreePair) -> Result<()> {
        let bx = SupportBox::degree_box(deg);
        match self.coeffs.keys().find(|&&e| !bx.contains(e)) {
            Some(&(i, j)) => Err(Error::SupportOutsideBox { i, j, n: deg.n, m: deg.m }),
            None => Ok(()),
        }
    }

    /// Evaluates `sum c_ij z^i w^j` with Horner's scheme in each variable.
    pub fn eval(&self, z: C64, w: C64) -> Result<C64> {
        let Some(h) = self.hull else {
            return Ok(ZERO);
        };
        if (h.i_min < 0 && z == ZERO) || (h.j_min < 0 && w == ZERO) {
            return Err(Error::ZeroBaseNegativeExponent);
        }
        let mut acc = ZERO;
        // rows are visited from the top z-exponent down; gaps are multiplied through
        let mut prev_i = h.i_max;
        let mut row = ZERO;
        let mut row_i: Option<i32> = None;
        let mut row_j = h.j_max;
        for (&(i, j), &c) in self.coeffs.iter().rev() {
            if row_i != Some(i) {
                if let Some(ri) = row_i {
                    row *= w.powi(row_j - h.j_min);
                    acc = acc * z.powi(prev_i - ri) + row;
                    prev_i = ri;
                }
                row_i = Some(i);
                row = ZERO;
                row_j = h.j_max;
            }
            row = row * w.powi(row_j - j) + c;
            row_j = j;
        }
        if let Some(ri) = row_i {
            row *= w.powi(row_j - h.j_min);
            acc = acc * z.powi(prev_i - ri) + row;
            prev_i = ri;
        }
        acc *= z.powi(prev_i - h.i_min);
        Ok(acc * pow_signed(z, h.i_min) * pow_signed(w, h.j_min))
    }

    /// Evaluation at a point with nonzero coordinates (e.g. on the torus).
    pub fn eval_nonzero(&self, z: C64, w: C64) -> C64 {
        self.eval(z, w).expect("arguments are nonzero")
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::from_map(self.coeffs.iter().map(|(&e, &v)| (e, v * c)).collect())
    }

    /// Multiplies by `z^di w^dj`.
    pub fn shift(&self, di: i32, dj: i32) -> Self {
        Self::from_map(self.coeffs.iter().map(|(&(i, j), &v)| ((i + di, j + dj), v)).collect())
    }

    /// Coefficientwise conjugate.
    pub fn conj(&self) -> Self {
        Self::from_map(self.coeffs.iter().map(|(&e, &v)| (e, v.conj())).collect())
    }

    /// `conj(p(1/conj(z), 1/conj(w)))`: conjugate coefficients, negated exponents.
    pub fn conj_reciprocal(&self) -> Self {
        Self::from_map(self.coeffs.iter().map(|(&(i, j), &v)| ((-i, -j), v.conj())).collect())
    }

    /// The reflection `z^n w^m conj(p(1/conj z, 1/conj w))` with respect to the
    /// degree box `deg`.
    pub fn reflect(&self, deg: DegreePair) -> Result<Self> {
        self.ensure_within(deg)?;
        Ok(self.conj_reciprocal().shift(deg.n_i32(), deg.m_i32()))
    }

    /// Row `j` of the w-expansion `p = sum_j p_j(z) w^j`, as a polynomial in z
    /// (exponents `(i, 0)`).
    pub fn w_coefficient(&self, j: i32) -> Self {
        Self::from_map(
            self.coeffs
                .iter()
                .filter(|((_, jj), _)| *jj == j)
                .map(|(&(i, _), &v)| ((i, 0), v))
                .collect(),
        )
    }

    /// Dense row-major grid over `bx`, rows indexed by the z exponent.
    pub fn coefficient_window(&self, bx: SupportBox) -> Vec<Vec<C64>> {
        (bx.i_min..=bx.i_max)
            .map(|i| (bx.j_min..=bx.j_max).map(|j| self.coeff(i, j)).collect())
            .collect()
    }

    /// Coefficients of the univariate polynomial `w -> p(z, w)` for fixed `z`,
    /// ascending in the w exponent starting at 0. Requires nonnegative
    /// w-exponents.
    pub fn in_w_at(&self, z: C64) -> Vec<C64> {
        let m = self.hull.map_or(0, |h| h.j_max.max(0) as usize);
        let mut out = vec![ZERO; m + 1];
        for (&(i, j), &c) in &self.coeffs {
            out[j as usize] += c * pow_signed(z, i);
        }
        out
    }

    /// Coefficients of `z -> p(z, w)` for fixed `w`, ascending in z.
    pub fn in_z_at(&self, w: C64) -> Vec<C64> {
        let n = self.hull.map_or(0, |h| h.i_max.max(0) as usize);
        let mut out = vec![ZERO; n + 1];
        for (&(i, j), &c) in &self.coeffs {
            out[i as usize] += c * pow_signed(w, j);
        }
        out
    }

    /// JSON form over the degree box `deg`.
    pub fn to_json(&self, deg: DegreePair) -> Result<PolyJson> {
        self.ensure_within(deg)?;
        let grid = self.coefficient_window(SupportBox::degree_box(deg));
        Ok(PolyJson {
            n: deg.n,
            m: deg.m,
            coeffs: grid.into_iter().map(|row| row.into_iter().map(|c| [c.re, c.im]).collect()).collect(),
        })
    }
}

fn hull_of(exps: impl Iterator<Item = Exponent>) -> Option<SupportBox> {
    exps.fold(None, |acc, (i, j)| {
        Some(match acc {
            None => SupportBox::new(i, i, j, j),
            Some(b) => SupportBox::new(b.i_min.min(i), b.i_max.max(i), b.j_min.min(j), b.j_max.max(j)),
        })
    })
}

pub(crate) fn pow_signed(x: C64, k: i32) -> C64 {
    match k {
        0 => ONE,
        k if k > 0 => x.powi(k),
        k => x.inv().powi(-k),
    }
}

/// Evaluates `sum c_k x^k` for ascending coefficients.
pub(crate) fn horner(coeffs: &[C64], x: C64) -> C64 {
    coeffs.iter().rev().fold(ZERO, |acc, &c| acc * x + c)
}

impl fmt::Debug for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (k, (&(i, j), c)) in self.coeffs.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({}{:+}i)", c.re, c.im)?;
            if i != 0 {
                write!(f, "z^{i}")?;
            }
            if j != 0 {
                write!(f, "w^{j}")?;
            }
        }
        Ok(())
    }
}

impl Add for &LaurentPoly {
    type Output = LaurentPoly;
    fn add(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut coeffs = self.coeffs.clone();
        for (&e, &c) in &rhs.coeffs {
            *coeffs.entry(e).or_insert(ZERO) += c;
        }
        LaurentPoly::from_map(coeffs)
    }
}

impl Sub for &LaurentPoly {
    type Output = LaurentPoly;
    fn sub(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut coeffs = self.coeffs.clone();
        for (&e, &c) in &rhs.coeffs {
            *coeffs.entry(e).or_insert(ZERO) -= c;
        }
        LaurentPoly::from_map(coeffs)
    }
}

impl Neg for &LaurentPoly {
    type Output = LaurentPoly;
    fn neg(self) -> LaurentPoly {
        self.scale(-ONE)
    }
}

impl Mul for &LaurentPoly {
    type Output = LaurentPoly;
    fn mul(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut coeffs: BTreeMap<Exponent, C64> = BTreeMap::new();
        for (&(i1, j1), &a) in &self.coeffs {
            for (&(i2, j2), &b) in &rhs.coeffs {
                *coeffs.entry((i1 + i2, j1 + j2)).or_insert(ZERO) += a * b;
            }
        }
        LaurentPoly::from_map(coeffs)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for LaurentPoly {
            type Output = LaurentPoly;
            fn $method(self, rhs: LaurentPoly) -> LaurentPoly {
                (&self).$method(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

/// Interchange form: `coeffs[i][j]` is the coefficient of `z^i w^j` as `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyJson {
    pub n: usize,
    pub m: usize,
    pub coeffs: Vec<Vec<[f64; 2]>>,
}

impl PolyJson {
    /// Parses into a polynomial and its declared degree. The grid must be
    /// exactly `(n+1) x (m+1)`.
    pub fn into_poly(&self) -> Result<(LaurentPoly, DegreePair)> {
        if self.coeffs.len() != self.n + 1 || self.coeffs.iter().any(|r| r.len() != self.m + 1) {
            return Err(Error::ConfigInvalid(format!(
                "coefficient grid must be {}x{}",
                self.n + 1,
                self.m + 1
            )));
        }
        if self.coeffs.iter().flatten().any(|c| !c[0].is_finite() || !c[1].is_finite()) {
            return Err(Error::ConfigInvalid("non-finite coefficient".into()));
        }
        let grid: Vec<Vec<C64>> = self
            .coeffs
            .iter()
            .map(|row| row.iter().map(|c| C64::new(c[0], c[1])).collect())
            .collect();
        Ok((LaurentPoly::from_dense(&grid), DegreePair::new(self.n, self.m)))
    }
}
