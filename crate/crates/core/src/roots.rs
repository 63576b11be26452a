//! Roots of univariate complex polynomials via the companion matrix.

use nalgebra::{DMatrix, Schur};

use crate::poly::{horner, C64, ZERO};

/// All roots of `sum coeffs[k] x^k`. Trailing exact zeros are dropped, so a
/// vanishing leading coefficient lowers the degree (roots "at infinity" are
/// not reported). Returns an empty list for constants, including zero.
pub fn roots(coeffs: &[C64]) -> Vec<C64> {
    let Some(top) = coeffs.iter().rposition(|&c| c != ZERO) else {
        return Vec::new();
    };
    let lead = coeffs[top];
    // roots at the origin are split off exactly
    let low = coeffs.iter().position(|&c| c != ZERO).unwrap_or(0);
    let mut out = vec![ZERO; low];
    let core = &coeffs[low..=top];
    let d = core.len() - 1;
    match d {
        0 => {}
        1 => out.push(-core[0] / core[1]),
        _ => {
            let mut companion = DMatrix::<C64>::zeros(d, d);
            for k in 0..d {
                companion[(0, k)] = -core[d - 1 - k] / lead;
            }
            for k in 1..d {
                companion[(k, k - 1)] = C64::new(1.0, 0.0);
            }
            let eig = Schur::new(companion).eigenvalues().expect("complex Schur form is triangular");
            let deriv: Vec<C64> = core.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect();
            out.extend(eig.iter().map(|&r| polish(core, &deriv, r)));
        }
    }
    out
}

fn polish(coeffs: &[C64], deriv: &[C64], mut x: C64) -> C64 {
    for _ in 0..3 {
        let d = horner(deriv, x);
        if d == ZERO {
            break;
        }
        let step = horner(coeffs, x) / d;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        x -= step;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sorted_by_arg(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn linear_and_quadratic() {
        assert_eq!(roots(&[c(1.0, 0.0), c(-2.0, 0.0)]), vec![c(0.5, 0.0)]);
        // (x - 2)(x + i) = x^2 + (i - 2) x - 2i
        let r = sorted_by_arg(roots(&[c(0.0, -2.0), c(-2.0, 1.0), c(1.0, 0.0)]));
        assert!((r[0] - c(0.0, -1.0)).norm() < 1e-14);
        assert!((r[1] - c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(roots(&[]).is_empty());
        assert!(roots(&[ZERO, ZERO]).is_empty());
        assert!(roots(&[c(3.0, 0.0)]).is_empty());
        // leading zero drops the degree
        assert_eq!(roots(&[c(1.0, 0.0), c(-1.0, 0.0), ZERO]), vec![c(1.0, 0.0)]);
        // x^2 (x - 3)
        let r = sorted_by_arg(roots(&[ZERO, ZERO, c(-3.0, 0.0), c(1.0, 0.0)]));
        assert_eq!(r.len(), 3);
        assert_eq!(r[0], ZERO);
        assert!((r[2] - c(3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn cubic_residuals_are_small() {
        let p = [c(0.3, -1.0), c(2.0, 0.5), c(-0.7, 0.1), c(1.5, -0.2)];
        let r = roots(&p);
        assert_eq!(r.len(), 3);
        for x in r {
            assert!(horner(&p, x).norm() < 1e-12);
        }
    }
}
