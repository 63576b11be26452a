//! The measure `dsigma / |p|^2` on the torus for a polynomial `p` that does
//! not vanish on the closed bidisk.
//!
//! Moments `c_{a,b} = \int z^a w^b dmu` are available by two independent
//! routes: a two-dimensional DFT of sampled `1/|p|^2` ([`BernsteinSzego::moments_grid`])
//! and the autocorrelation of the power series of `1/p`
//! ([`BernsteinSzego::moments_series`]). Inner products of Laurent
//! polynomials are then finite sums against a [`MomentTable`].

use std::f64::consts::TAU;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{horner, DegreePair, LaurentPoly, C64, ONE, ZERO};
use crate::roots::roots;

/// Default circle resolution of the stability test.
pub const STABILITY_GRID: usize = 1024;
/// Root moduli closer than this to 1 cannot be classified by the grid test.
pub const BOUNDARY_BAND: f64 = 1e-9;
/// Default convergence tolerance for moment tables.
pub const MOMENT_TOL: f64 = 1e-11;
/// Convergence tolerance for sliced moments.
pub const SLICE_TOL: f64 = 1e-12;

const GRID_START: usize = 256;
const GRID_CAP: usize = 8192;
const SLICE_START: usize = 64;
const SLICE_CAP: usize = 1 << 18;
const SERIES_DOUBLING_TOL: f64 = 1e-11;

/// Outcome of the grid-based bidisk stability test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    /// A point of the closed bidisk where `p` vanishes (up to rounding).
    pub witness: Option<(C64, C64)>,
    /// Smallest `|p|` over the torus sample grid.
    pub min_modulus: f64,
}

/// Decides stability on the closed bidisk by slicing.
///
/// For every `z` on a uniform grid of the unit circle the roots of
/// `w -> p(z, w)` must lie strictly outside the closed unit disk, and so must
/// the roots of `z -> p(z, 1)`. This is a sampled test, not a certificate.
/// A root whose modulus is within [`BOUNDARY_BAND`] of 1 is accepted as a
/// witness only if `p` numerically vanishes at its projection onto the
/// closed bidisk; otherwise the test reports
/// [`Error::InconclusiveNearBoundary`].
pub fn check_stability(p: &LaurentPoly, deg: DegreePair, resolution: usize) -> Result<StabilityReport> {
    if p.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    p.ensure_within(deg)?;
    let resolution = resolution.max(1);
    let scale = p.l1_norm();

    let circle = unit_roots(resolution);
    let slice_worst: Vec<Candidate> = circle
        .par_iter()
        .map(|&z| {
            let coeffs = p.in_w_at(z);
            if coeffs.iter().all(|&c| c == ZERO) {
                return Candidate { modulus: 0.0, z, w: ONE };
            }
            roots(&coeffs)
                .into_iter()
                .map(|w| Candidate { modulus: w.norm(), z, w })
                .min_by(|a, b| a.modulus.total_cmp(&b.modulus))
                .unwrap_or(Candidate { modulus: f64::INFINITY, z, w: ONE })
        })
        .collect();

    let mut candidates = slice_worst;
    let at_one = p.in_z_at(ONE);
    if at_one.iter().all(|&c| c == ZERO) {
        candidates.push(Candidate { modulus: 0.0, z: ONE, w: ONE });
    } else {
        candidates.extend(roots(&at_one).into_iter().map(|z| Candidate { modulus: z.norm(), z, w: ONE }));
    }

    let min_modulus = torus_min_modulus(p, &circle);
    let worst = candidates.iter().min_by(|a, b| a.modulus.total_cmp(&b.modulus)).copied();

    let Some(worst) = worst else {
        return Ok(StabilityReport { stable: true, witness: None, min_modulus });
    };
    if worst.modulus < 1.0 - BOUNDARY_BAND {
        return Ok(StabilityReport { stable: false, witness: Some((worst.z, worst.w)), min_modulus });
    }
    if worst.modulus <= 1.0 + BOUNDARY_BAND {
        let (z, w) = (into_closed_disk(worst.z), into_closed_disk(worst.w));
        let value = p.eval_nonzero_or_origin(z, w);
        if value.norm() <= 1e-12 * scale {
            return Ok(StabilityReport { stable: false, witness: Some((z, w)), min_modulus });
        }
        return Err(Error::InconclusiveNearBoundary { modulus: worst.modulus, band: BOUNDARY_BAND });
    }
    Ok(StabilityReport { stable: true, witness: None, min_modulus })
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    modulus: f64,
    z: C64,
    w: C64,
}

fn into_closed_disk(x: C64) -> C64 {
    let r = x.norm();
    if r > 1.0 {
        x / r
    } else {
        x
    }
}

fn torus_min_modulus(p: &LaurentPoly, circle: &[C64]) -> f64 {
    circle
        .par_iter()
        .map(|&z| {
            let coeffs = p.in_w_at(z);
            circle.iter().map(|&w| horner(&coeffs, w).norm()).fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

impl LaurentPoly {
    /// `eval` for polynomials with nonnegative exponents, where zero
    /// arguments are legal.
    pub(crate) fn eval_nonzero_or_origin(&self, z: C64, w: C64) -> C64 {
        self.eval(z, w).unwrap_or(ZERO)
    }
}

/// `e^{2 pi i k / n}` for `k = 0..n`.
pub(crate) fn unit_roots(n: usize) -> Vec<C64> {
    (0..n).map(|k| C64::from_polar(1.0, TAU * k as f64 / n as f64)).collect()
}

/// Fourier moments `c_{a,b}` for `|a| <= A`, `|b| <= B`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    window: (usize, usize),
    values: Vec<C64>,
    grid_size: usize,
    est_error: f64,
}

impl MomentTable {
    fn from_raw(window: (usize, usize), mut values: Vec<C64>, grid_size: usize, est_error: f64) -> Self {
        let (wa, wb) = window;
        let cols = 2 * wb + 1;
        // c_{-a,-b} = conj(c_{a,b}); averaging makes it exact
        let n = values.len();
        for idx in 0..n {
            let mirror = n - 1 - idx;
            if mirror < idx {
                break;
            }
            let avg = (values[idx] + values[mirror].conj()) * 0.5;
            values[idx] = avg;
            values[mirror] = avg.conj();
        }
        debug_assert_eq!(values.len(), (2 * wa + 1) * cols);
        Self { window, values, grid_size, est_error }
    }

    pub fn window(&self) -> (usize, usize) {
        self.window
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn est_error(&self) -> f64 {
        self.est_error
    }

    fn index(&self, a: i32, b: i32) -> Option<usize> {
        let (wa, wb) = (self.window.0 as i32, self.window.1 as i32);
        if a.abs() > wa || b.abs() > wb {
            return None;
        }
        Some(((a + wa) * (2 * wb + 1) + (b + wb)) as usize)
    }

    pub fn get(&self, a: i32, b: i32) -> Option<C64> {
        self.index(a, b).map(|k| self.values[k])
    }

    pub fn require(&self, a: i32, b: i32) -> Result<C64> {
        self.get(a, b).ok_or(Error::WindowTooSmall { a, b })
    }

    /// `(a, b, c_{a,b})` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (i32, i32, C64)> + '_ {
        let (wa, wb) = (self.window.0 as i32, self.window.1 as i32);
        (-wa..=wa).flat_map(move |a| (-wb..=wb).map(move |b| (a, b, self.get(a, b).unwrap())))
    }

    /// Largest entrywise difference over the common window.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let wa = self.window.0.min(other.window.0) as i32;
        let wb = self.window.1.min(other.window.1) as i32;
        (-wa..=wa)
            .flat_map(|a| (-wb..=wb).map(move |b| (a, b)))
            .map(|(a, b)| (self.get(a, b).unwrap() - other.get(a, b).unwrap()).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> MomentTableJson {
        MomentTableJson {
            window: [self.window.0, self.window.1],
            values: self.entries().map(|(a, b, c)| (a, b, c.re, c.im)).collect(),
            grid_size: self.grid_size,
            est_error: self.est_error,
        }
    }

    pub fn from_json(js: &MomentTableJson) -> Result<Self> {
        let window = (js.window[0], js.window[1]);
        let len = (2 * window.0 + 1) * (2 * window.1 + 1);
        let mut values = vec![C64::new(f64::NAN, f64::NAN); len];
        let mut table = Self { window, values: Vec::new(), grid_size: js.grid_size, est_error: js.est_error };
        for &(a, b, re, im) in &js.values {
            let k = table.index(a, b).ok_or(Error::WindowTooSmall { a, b })?;
            values[k] = C64::new(re, im);
        }
        if values.iter().any(|v| v.re.is_nan()) {
            return Err(Error::ConfigInvalid("moment table is missing entries".into()));
        }
        table.values = values;
        Ok(table)
    }
}

/// Interchange form of a [`MomentTable`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTableJson {
    pub window: [usize; 2],
    pub values: Vec<(i32, i32, f64, f64)>,
    pub grid_size: usize,
    pub est_error: f64,
}

/// `<f, g> = \int f conj(g) dmu = sum f_alpha conj(g_beta) c_{alpha - beta}`.
pub fn inner_product(f: &LaurentPoly, g: &LaurentPoly, moments: &MomentTable) -> Result<C64> {
    let mut acc = ZERO;
    for ((i1, j1), a) in f.terms() {
        for ((i2, j2), b) in g.terms() {
            acc += a * b.conj() * moments.require(i1 - i2, j1 - j2)?;
        }
    }
    Ok(acc)
}

/// Moments `m_k = \int w^k dmu^theta(w)` of the measure
/// `|dw| / (2 pi |p(e^{i theta}, w)|^2)` for `|k| <= K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicedMoments {
    pub theta: f64,
    values: Vec<C64>,
}

impl SlicedMoments {
    pub fn max_index(&self) -> usize {
        (self.values.len() - 1) / 2
    }

    pub fn get(&self, k: i32) -> Option<C64> {
        let kk = self.max_index() as i32;
        (k.abs() <= kk).then(|| self.values[(k + kk) as usize])
    }

    pub fn require(&self, k: i32) -> Result<C64> {
        self.get(k).ok_or(Error::WindowTooSmall { a: 0, b: k })
    }

    /// `\int f conj(g) dmu^theta` for coefficient vectors ascending in `w`.
    pub fn inner(&self, f: &[C64], g: &[C64]) -> Result<C64> {
        let mut acc = ZERO;
        for (a, &fa) in f.iter().enumerate() {
            for (b, &gb) in g.iter().enumerate() {
                acc += fa * gb.conj() * self.require(a as i32 - b as i32)?;
            }
        }
        Ok(acc)
    }
}

/// A stable polynomial together with the measure it defines. Construction
/// runs the stability test once; every moment routine relies on it.
#[derive(Debug, Clone)]
pub struct BernsteinSzego {
    poly: LaurentPoly,
    deg: DegreePair,
    reflected: LaurentPoly,
    stability: StabilityReport,
    fft: Arc<FftCache>,
}

impl BernsteinSzego {
    pub fn new(poly: LaurentPoly, deg: DegreePair) -> Result<Self> {
        Self::with_resolution(poly, deg, STABILITY_GRID)
    }

    pub fn with_resolution(poly: LaurentPoly, deg: DegreePair, resolution: usize) -> Result<Self> {
        let stability = check_stability(&poly, deg, resolution)?;
        if !stability.stable {
            return Err(Error::NotStable);
        }
        let reflected = poly.reflect(deg)?;
        Ok(Self { poly, deg, reflected, stability, fft: Arc::new(FftCache::default()) })
    }

    pub fn poly(&self) -> &LaurentPoly {
        &self.poly
    }

    pub fn deg(&self) -> DegreePair {
        self.deg
    }

    /// The reflection `z^n w^m conj(p(1/conj z, 1/conj w))`.
    pub fn reflected(&self) -> &LaurentPoly {
        &self.reflected
    }

    pub fn stability(&self) -> &StabilityReport {
        &self.stability
    }

    /// Density `1/|p|^2` with respect to normalized Lebesgue measure.
    pub fn density(&self, z: C64, w: C64) -> f64 {
        1.0 / self.poly.eval_nonzero_or_origin(z, w).norm_sqr()
    }

    /// Moments by a sampled 2-D DFT of `1/|p|^2`, doubling the grid from 256
    /// until successive tables differ by less than `tol` over the window.
    pub fn moments_grid(&self, window: (usize, usize), tol: f64) -> Result<MomentTable> {
        let need = 2 * window.0.max(window.1) + 1;
        let mut n = GRID_START.max(need.next_power_of_two());
        let mut prev = self.grid_values(n, window);
        loop {
            let next_n = n * 2;
            let next = self.grid_values(next_n, window);
            let change = max_diff(&prev, &next);
            if change < tol {
                return Ok(MomentTable::from_raw(window, next, next_n, change));
            }
            if next_n >= GRID_CAP {
                return Err(Error::NoConvergence { grid: next_n, est_error: change });
            }
            prev = next;
            n = next_n;
        }
    }

    fn grid_values(&self, n: usize, (wa, wb): (usize, usize)) -> Vec<C64> {
        let circle = unit_roots(n);
        let fft = self.fft.plan(n);
        let scale = 1.0 / (n as f64 * n as f64);
        // rows: z fixed, transform along w and keep |b| <= B
        let rows: Vec<Vec<C64>> = circle
            .par_iter()
            .map(|&z| {
                let coeffs = self.poly.in_w_at(z);
                let mut buf: Vec<C64> =
                    circle.iter().map(|&w| C64::new(1.0 / horner(&coeffs, w).norm_sqr(), 0.0)).collect();
                fft.process(&mut buf);
                (-(wb as i64)..=wb as i64).map(|b| buf[wrap(b, n)]).collect()
            })
            .collect();
        // columns: transform along z and keep |a| <= A
        let cols: Vec<Vec<C64>> = (0..2 * wb + 1)
            .into_par_iter()
            .map(|col| {
                let mut buf: Vec<C64> = rows.iter().map(|r| r[col]).collect();
                fft.process(&mut buf);
                (-(wa as i64)..=wa as i64).map(|a| buf[wrap(a, n)] * scale).collect()
            })
            .collect();
        let mut values = Vec::with_capacity((2 * wa + 1) * (2 * wb + 1));
        for a in 0..2 * wa + 1 {
            for col in &cols {
                values.push(col[a]);
            }
        }
        values
    }

    /// Moments from the power series `1/p = sum d_{i,j} z^i w^j`, truncated
    /// at total order `trunc`, via `c_{a,b} = sum d_{i,j} conj(d_{i+a,j+b})`.
    /// The table is computed at `trunc` and `2*trunc`; the doubled one is
    /// returned if they agree.
    pub fn moments_series(&self, window: (usize, usize), trunc: usize) -> Result<MomentTable> {
        let coarse = self.series_values(trunc, window);
        let fine = self.series_values(2 * trunc, window);
        let change = max_diff(&coarse, &fine);
        if change > SERIES_DOUBLING_TOL {
            return Err(Error::TruncationTooSmall { trunc, change });
        }
        Ok(MomentTable::from_raw(window, fine, 2 * trunc, change))
    }

    /// [`Self::moments_series`] with the truncation doubled from 64 until it
    /// is accepted (at most 2048).
    pub fn moments_series_auto(&self, window: (usize, usize)) -> Result<MomentTable> {
        let mut trunc = 64.max(2 * window.0.max(window.1));
        loop {
            match self.moments_series(window, trunc) {
                Err(Error::TruncationTooSmall { .. }) if trunc < 1024 => trunc *= 2,
                other => return other,
            }
        }
    }

    fn series_values(&self, trunc: usize, (wa, wb): (usize, usize)) -> Vec<C64> {
        let d = power_series_inverse(&self.poly, trunc);
        let t = trunc as i64;
        let at = |i: i64, j: i64| -> Option<C64> {
            (i >= 0 && j >= 0 && i + j <= t).then(|| d[(i * (t + 1) + j) as usize])
        };
        let mut values = Vec::with_capacity((2 * wa + 1) * (2 * wb + 1));
        for a in -(wa as i64)..=wa as i64 {
            for b in -(wb as i64)..=wb as i64 {
                let mut acc = ZERO;
                for i in 0.max(-a)..=t {
                    for j in 0.max(-b)..=(t - i) {
                        if let (Some(x), Some(y)) = (at(i, j), at(i + a, j + b)) {
                            acc += x * y.conj();
                        }
                    }
                }
                values.push(acc);
            }
        }
        values
    }

    /// One-dimensional moments of the slice at `z = e^{i theta}`, grid
    /// doubled from 64 until converged to [`SLICE_TOL`].
    pub fn slice_moments(&self, theta: f64, max_k: usize) -> Result<SlicedMoments> {
        let z = C64::from_polar(1.0, theta);
        let coeffs = self.poly.in_w_at(z);
        let mut n = SLICE_START.max((2 * max_k + 1).next_power_of_two());
        let mut prev = self.slice_values(&coeffs, n, max_k);
        loop {
            n *= 2;
            let next = self.slice_values(&coeffs, n, max_k);
            let change = max_diff(&prev, &next);
            let scale = next[max_k].norm().max(1.0);
            if change < SLICE_TOL * scale {
                return Ok(SlicedMoments { theta, values: symmetrize(next) });
            }
            if n >= SLICE_CAP {
                return Err(Error::NoConvergence { grid: n, est_error: change });
            }
            prev = next;
        }
    }

    fn slice_values(&self, coeffs: &[C64], n: usize, max_k: usize) -> Vec<C64> {
        let fft = self.fft.plan(n);
        let mut buf: Vec<C64> =
            unit_roots(n).iter().map(|&w| C64::new(1.0 / horner(coeffs, w).norm_sqr(), 0.0)).collect();
        fft.process(&mut buf);
        let scale = 1.0 / n as f64;
        (-(max_k as i64)..=max_k as i64).map(|k| buf[wrap(k, n)] * scale).collect()
    }
}

/// Coefficients `d_{i,j}`, `i + j <= trunc`, of `1/p` from `p * (1/p) = 1`,
/// stored densely with row stride `trunc + 1`.
fn power_series_inverse(p: &LaurentPoly, trunc: usize) -> Vec<C64> {
    let t = trunc as i64;
    let stride = t + 1;
    let p00 = p.coeff(0, 0);
    let terms: Vec<((i64, i64), C64)> =
        p.terms().filter(|&(e, _)| e != (0, 0)).map(|((i, j), c)| ((i as i64, j as i64), c)).collect();
    let mut d = vec![ZERO; (stride * stride) as usize];
    let inv = ONE / p00;
    for s in 0..=t {
        for i in 0..=s {
            let j = s - i;
            let mut acc = if s == 0 { ONE } else { ZERO };
            for &((k, l), c) in &terms {
                if k <= i && l <= j {
                    acc -= c * d[((i - k) * stride + (j - l)) as usize];
                }
            }
            d[(i * stride + j) as usize] = acc * inv;
        }
    }
    d
}

fn wrap(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn symmetrize(mut v: Vec<C64>) -> Vec<C64> {
    let n = v.len();
    for idx in 0..=n / 2 {
        let mirror = n - 1 - idx;
        let avg = (v[idx] + v[mirror].conj()) * 0.5;
        v[idx] = avg;
        v[mirror] = avg.conj();
    }
    v
}

/// Inverse FFT plans keyed by length.
#[derive(Default)]
struct FftCache {
    plans: std::sync::Mutex<Vec<(usize, Arc<dyn Fft<f64>>)>>,
}

impl FftCache {
    fn plan(&self, n: usize) -> Arc<dyn Fft<f64>> {
        let mut plans = self.plans.lock().expect("fft cache poisoned");
        if let Some((_, f)) = plans.iter().find(|(len, _)| *len == n) {
            return Arc::clone(f);
        }
        let f = FftPlanner::new().plan_fft_inverse(n);
        plans.push((n, Arc::clone(&f)));
        f
    }
}

impl std::fmt::Debug for FftCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("FftCache")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(terms: &[((i32, i32), f64)]) -> LaurentPoly {
        LaurentPoly::from_real_terms(terms)
    }

    fn worked() -> (LaurentPoly, DegreePair) {
        (poly(&[((0, 0), 3.0), ((1, 0), -1.0), ((0, 1), -1.0)]), DegreePair::new(1, 1))
    }

    fn product() -> (LaurentPoly, DegreePair) {
        (poly(&[((0, 0), 4.0), ((1, 0), -2.0), ((0, 1), -2.0), ((1, 1), 1.0)]), DegreePair::new(1, 1))
    }

    #[test]
    fn stability_examples() {
        let (p, deg) = worked();
        let r = check_stability(&p, deg, 256).unwrap();
        assert!(r.stable);
        assert!(r.witness.is_none());
        assert!((r.min_modulus - 1.0).abs() < 1e-12);

        let q = poly(&[((0, 0), 2.0), ((1, 0), -1.0), ((0, 1), -1.0)]);
        let r = check_stability(&q, deg, 256).unwrap();
        assert!(!r.stable);
        let (z, w) = r.witness.unwrap();
        assert!((z - ONE).norm() < 1e-12 && (w - ONE).norm() < 1e-12);

        let s = poly(&[((0, 0), 1.0), ((1, 0), -2.0)]);
        let r = check_stability(&s, DegreePair::new(1, 0), 256).unwrap();
        assert!(!r.stable);
        let (z, _) = r.witness.unwrap();
        assert!((z - C64::new(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn stability_errors() {
        assert!(matches!(
            check_stability(&LaurentPoly::zero(), DegreePair::new(1, 1), 64),
            Err(Error::ZeroPolynomial)
        ));
        // root of w -> 1 - (1 + 1e-10) w sits just outside the disk
        let p = LaurentPoly::from_terms([((0, 0), ONE), ((0, 1), C64::new(-1.0 / (1.0 + 5e-10), 0.0))]);
        assert!(matches!(
            check_stability(&p, DegreePair::new(0, 1), 64),
            Err(Error::InconclusiveNearBoundary { .. })
        ));
        let (p, _) = worked();
        assert!(matches!(check_stability(&p, DegreePair::new(0, 1), 64), Err(Error::SupportOutsideBox { .. })));
    }

    #[test]
    fn unstable_polynomial_has_no_measure() {
        let q = poly(&[((0, 0), 1.0), ((0, 1), 2.0)]);
        assert!(matches!(BernsteinSzego::new(q, DegreePair::new(0, 1)), Err(Error::NotStable)));
    }

    #[test]
    fn lebesgue_moments() {
        let mu = BernsteinSzego::new(LaurentPoly::constant(ONE), DegreePair::new(0, 0)).unwrap();
        for table in [mu.moments_grid((3, 2), MOMENT_TOL).unwrap(), mu.moments_series((3, 2), 8).unwrap()] {
            for (a, b, c) in table.entries() {
                let expected = if (a, b) == (0, 0) { 1.0 } else { 0.0 };
                assert!((c - C64::new(expected, 0.0)).norm() < 1e-14, "c[{a},{b}] = {c}");
            }
        }
    }

    #[test]
    fn product_moments_match_geometric_series() {
        let (p, deg) = product();
        let mu = BernsteinSzego::new(p, deg).unwrap();
        let table = mu.moments_grid((4, 4), MOMENT_TOL).unwrap();
        for (a, b, c) in table.entries() {
            let expected = 2f64.powi(-(a.abs() + b.abs())) / 9.0;
            assert!((c - C64::new(expected, 0.0)).norm() < 1e-12);
        }
        assert!((table.get(1, 1).unwrap().re - 1.0 / 36.0).abs() < 1e-14);
    }

    #[test]
    fn univariate_series_moments() {
        let p = poly(&[((0, 0), 2.0), ((1, 0), -1.0)]);
        let mu = BernsteinSzego::new(p, DegreePair::new(1, 0)).unwrap();
        let table = mu.moments_series((5, 1), 64).unwrap();
        for k in -5i32..=5 {
            let expected = 2f64.powi(-k.abs()) / 3.0;
            assert!((table.get(k, 0).unwrap() - C64::new(expected, 0.0)).norm() < 1e-14);
            assert!(table.get(k, 1).unwrap().norm() < 1e-15);
        }
    }

    #[test]
    fn series_truncation_too_small() {
        let (p, deg) = worked();
        let mu = BernsteinSzego::new(p, deg).unwrap();
        assert!(matches!(mu.moments_series((2, 2), 4), Err(Error::TruncationTooSmall { trunc: 4, .. })));
    }

    #[test]
    fn grid_and_series_agree_on_worked_example() {
        let (p, deg) = worked();
        let mu = BernsteinSzego::new(p, deg).unwrap();
        let grid = mu.moments_grid((6, 6), MOMENT_TOL).unwrap();
        let series = mu.moments_series_auto((6, 6)).unwrap();
        assert!(grid.max_abs_diff(&series) < 1e-10);
        // closed form for the mass: sum_k binom(2k,k) 9^{-k-1} = 1 / (3 sqrt 5)
        assert!((grid.get(0, 0).unwrap().re - 1.0 / (3.0 * 5f64.sqrt())).abs() < 1e-13);
    }

    #[test]
    fn hermitian_symmetry_and_positive_mass() {
        let p = LaurentPoly::from_terms([
            ((0, 0), C64::new(4.0, 0.5)),
            ((1, 0), C64::new(-0.7, 0.3)),
            ((1, 1), C64::new(0.2, -0.9)),
            ((0, 2), C64::new(0.5, 0.5)),
        ]);
        let mu = BernsteinSzego::new(p, DegreePair::new(1, 2)).unwrap();
        let t = mu.moments_grid((3, 3), MOMENT_TOL).unwrap();
        for (a, b, c) in t.entries() {
            assert!((t.get(-a, -b).unwrap() - c.conj()).norm() <= 1e-13);
        }
        let c00 = t.get(0, 0).unwrap();
        assert!(c00.re > 0.0 && c00.im == 0.0);
    }

    #[test]
    fn inner_products_of_worked_example() {
        let (p, deg) = worked();
        let mu = BernsteinSzego::new(p.clone(), deg).unwrap();
        let t = mu.moments_grid((3, 3), MOMENT_TOL).unwrap();
        let one = LaurentPoly::constant(ONE);
        assert_eq!(inner_product(&one, &one, &t).unwrap(), t.get(0, 0).unwrap());
        let z = LaurentPoly::monomial(1, 0, ONE);
        assert!(inner_product(&p, &z, &t).unwrap().norm() < 1e-13);
        assert!((inner_product(&p, &one, &t).unwrap() - C64::new(1.0 / 3.0, 0.0)).norm() < 1e-13);
        assert!((inner_product(&p, &p, &t).unwrap() - ONE).norm() < 1e-13);
    }

    #[test]
    fn inner_product_reports_missing_index() {
        let (p, deg) = worked();
        let mu = BernsteinSzego::new(p, deg).unwrap();
        let t = mu.moments_grid((1, 1), MOMENT_TOL).unwrap();
        let f = LaurentPoly::monomial(3, 0, ONE);
        let g = LaurentPoly::monomial(0, 1, ONE);
        assert!(matches!(inner_product(&f, &g, &t), Err(Error::WindowTooSmall { a: 3, b: -1 })));
    }

    #[test]
    fn slice_examples() {
        let (p, deg) = worked();
        let mu = BernsteinSzego::new(p, deg).unwrap();
        let s = mu.slice_moments(0.0, 6).unwrap();
        for k in -6i32..=6 {
            let expected = 2f64.powi(-k.abs()) / 3.0;
            assert!((s.get(k).unwrap() - C64::new(expected, 0.0)).norm() < 1e-13);
        }
        let q = poly(&[((0, 0), 2.0), ((0, 1), -1.0)]);
        let mu = BernsteinSzego::new(q, DegreePair::new(0, 1)).unwrap();
        for theta in [0.0, 1.1, -2.5] {
            let s = mu.slice_moments(theta, 3).unwrap();
            assert!((s.get(0).unwrap() - C64::new(1.0 / 3.0, 0.0)).norm() < 1e-14);
            for k in 1..=3 {
                assert_eq!(s.get(-k).unwrap(), s.get(k).unwrap().conj());
            }
        }
    }

    #[test]
    fn slices_average_to_torus_moments() {
        let p = LaurentPoly::from_terms([
            ((0, 0), C64::new(3.5, 0.0)),
            ((1, 0), C64::new(0.4, -0.8)),
            ((1, 1), C64::new(-0.6, 0.2)),
            ((0, 1), C64::new(0.1, 0.7)),
        ]);
        let mu = BernsteinSzego::new(p, DegreePair::new(1, 1)).unwrap();
        let t = mu.moments_grid((0, 4), MOMENT_TOL).unwrap();
        let n = 128;
        let mut avg = vec![ZERO; 9];
        for l in 0..n {
            let s = mu.slice_moments(TAU * l as f64 / n as f64, 4).unwrap();
            for (k, v) in avg.iter_mut().enumerate() {
                *v += s.get(k as i32 - 4).unwrap() / n as f64;
            }
        }
        for (k, v) in avg.iter().enumerate() {
            assert!((v - t.get(0, k as i32 - 4).unwrap()).norm() < 1e-9);
        }
    }

    #[test]
    fn moment_table_json_round_trip() {
        let (p, deg) = product();
        let mu = BernsteinSzego::new(p, deg).unwrap();
        let t = mu.moments_grid((1, 2), MOMENT_TOL).unwrap();
        let js = t.to_json();
        assert_eq!(js.values.len(), 15);
        assert_eq!(js.values[0].0, -1);
        assert_eq!(js.values[0].1, -2);
        let back = MomentTable::from_json(&js).unwrap();
        assert_eq!(back, t);
    }
}
