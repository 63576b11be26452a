//! Random stable polynomials for property suites.
//!
//! `p = (1 + s) - q` where `q` has zero constant term and `sum |q_ij| = s`.
//! On the closed bidisk `|q| <= s`, so `|p| >= 1` and `p` is stable; the
//! density `1/|p|^2` then lies in `[(1 + 2s)^-2, 1]`, which keeps every
//! monomial Gram matrix well conditioned.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::poly::{DegreePair, LaurentPoly, C64};

pub use rand_chacha::ChaCha8Rng as SampleRng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point of the closed disk of radius `r`.
pub fn disk_point<R: Rng>(rng: &mut R, r: f64) -> C64 {
    let rho = r * rng.random::<f64>().sqrt();
    C64::from_polar(rho, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Random stable polynomial of exact degree `deg` with `s` drawn from
/// `[0.5, 1.5]`.
pub fn random_stable<R: Rng>(rng: &mut R, deg: DegreePair) -> LaurentPoly {
    let s = rng.random_range(0.5..1.5);
    random_stable_with_mass(rng, deg, s)
}

pub fn random_stable_with_mass<R: Rng>(rng: &mut R, deg: DegreePair, s: f64) -> LaurentPoly {
    let (n, m) = (deg.n as i32, deg.m as i32);
    let mut terms: Vec<((i32, i32), C64)> = Vec::new();
    for i in 0..=n {
        for j in 0..=m {
            if (i, j) != (0, 0) {
                terms.push(((i, j), disk_point(rng, 1.0)));
            }
        }
    }
    // the corner coefficient pins the declared degree
    if let Some(t) = terms.iter_mut().find(|t| t.0 == (n, m)) {
        if t.1.norm() < 0.1 {
            t.1 = C64::new(0.5, 0.0);
        }
    }
    let total: f64 = terms.iter().map(|t| t.1.norm()).sum();
    let scale = if total > 0.0 { s / total } else { 0.0 };
    let q = LaurentPoly::from_terms(terms.into_iter().map(|(e, c)| (e, c * scale)));
    let one = LaurentPoly::constant(C64::new(1.0 + if total > 0.0 { s } else { 0.0 }, 0.0));
    &one - &q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::check_stability;

    #[test]
    fn generated_polynomials_are_stable_with_declared_degree() {
        let mut rng = seeded(7);
        for (n, m) in [(0, 1), (1, 1), (2, 1), (1, 3), (3, 3)] {
            let deg = DegreePair::new(n, m);
            let p = random_stable(&mut rng, deg);
            assert_eq!(p.degree(), deg);
            let r = check_stability(&p, deg, 128).unwrap();
            assert!(r.stable);
            assert!(r.min_modulus >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn constant_degree_gives_constant() {
        let p = random_stable(&mut seeded(1), DegreePair::new(0, 0));
        assert_eq!(p, LaurentPoly::constant(C64::new(1.0, 0.0)));
    }
}
