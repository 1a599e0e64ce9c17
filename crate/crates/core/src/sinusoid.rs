//! Three-point reconstruction of `p(φ) = a0 + a1·cos φ + a2·sin φ`.
//!
//! Any single phase shifter enters the detection probability as a first-order
//! trigonometric polynomial, so three settings pin the whole curve down.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Measurement phases, in the order `(0, +2π/3, −2π/3)`.
pub const THREE_PHASES: [f64; 3] = [0.0, 2.0 * PI / 3.0, -2.0 * PI / 3.0];

const INV_SQRT_3: f64 = 0.577_350_269_189_625_8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SinusoidCoeffs {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl SinusoidCoeffs {
    pub const fn new(a0: f64, a1: f64, a2: f64) -> Self {
        Self { a0, a1, a2 }
    }

    #[inline]
    pub fn eval(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        self.eval_sin_cos(s, c)
    }

    /// Evaluates from a precomputed `(sin φ, cos φ)`.
    #[inline]
    pub fn eval_sin_cos(&self, sin: f64, cos: f64) -> f64 {
        self.a0 + self.a1 * cos + self.a2 * sin
    }

    /// Re-expresses `p(x + θ)` as a sinusoid in `θ` for a fixed offset `x`.
    pub fn shifted(&self, x: f64) -> SinusoidCoeffs {
        let (s, c) = x.sin_cos();
        SinusoidCoeffs {
            a0: self.a0,
            a1: self.a1 * c + self.a2 * s,
            a2: self.a2 * c - self.a1 * s,
        }
    }
}

/// Solves for the coefficients from `p(0)`, `p(+2π/3)` and `p(−2π/3)`.
pub fn fit_three_phase(p_zero: f64, p_plus: f64, p_minus: f64) -> Result<SinusoidCoeffs> {
    if !(p_zero.is_finite() && p_plus.is_finite() && p_minus.is_finite()) {
        return invalid("three-phase fit needs finite measurements");
    }
    Ok(SinusoidCoeffs {
        a0: (p_zero + p_plus + p_minus) / 3.0,
        a1: (2.0 * p_zero - p_plus - p_minus) / 3.0,
        a2: (p_plus - p_minus) * INV_SQRT_3,
    })
}

pub fn eval(coeffs: &SinusoidCoeffs, phi: f64) -> f64 {
    coeffs.eval(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: SinusoidCoeffs, b: SinusoidCoeffs) -> bool {
        (a.a0 - b.a0).abs() < 1e-12 && (a.a1 - b.a1).abs() < 1e-12 && (a.a2 - b.a2).abs() < 1e-12
    }

    /// Solves the 3×3 system `[1 cos φⱼ sin φⱼ]·a = pⱼ` by Cramer's rule.
    fn solve_by_cramer(p: [f64; 3]) -> SinusoidCoeffs {
        let rows: Vec<[f64; 3]> = THREE_PHASES
            .iter()
            .map(|&f| [1.0, f.cos(), f.sin()])
            .collect();
        let det = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let base = [rows[0], rows[1], rows[2]];
        let d = det(base);
        let mut out = [0.0; 3];
        for (col, slot) in out.iter_mut().enumerate() {
            let mut m = base;
            for r in 0..3 {
                m[r][col] = p[r];
            }
            *slot = det(m) / d;
        }
        SinusoidCoeffs::new(out[0], out[1], out[2])
    }

    #[test]
    fn constant_signal() {
        for c in [0.0, 0.3, 1.0, -2.5] {
            assert!(close(
                fit_three_phase(c, c, c).unwrap(),
                SinusoidCoeffs::new(c, 0.0, 0.0)
            ));
        }
    }

    #[test]
    fn pure_cosine() {
        let c = fit_three_phase(1.0, -0.5, -0.5).unwrap();
        assert!(close(c, SinusoidCoeffs::new(0.0, 1.0, 0.0)));
    }

    #[test]
    fn offset_sine() {
        let q = 3.0_f64.sqrt() / 4.0;
        let c = fit_three_phase(0.5, 0.5 + q, 0.5 - q).unwrap();
        assert!(close(c, SinusoidCoeffs::new(0.5, 0.0, 0.5)));
    }

    #[test]
    fn matches_direct_linear_solve() {
        for p in [[0.2, 0.9, 0.4], [1.0, 0.0, 0.0], [-0.3, 2.0, 1.1]] {
            let a = fit_three_phase(p[0], p[1], p[2]).unwrap();
            assert!(close(a, solve_by_cramer(p)));
        }
    }

    #[test]
    fn eval_examples() {
        let flat = SinusoidCoeffs::new(0.5, 0.0, 0.0);
        for phi in [-3.0, 0.0, 1.0, 2.5] {
            assert_eq!(flat.eval(phi), 0.5);
        }
        assert!((SinusoidCoeffs::new(0.0, 1.0, 0.0).eval(PI) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(fit_three_phase(f64::NAN, 0.0, 0.0).is_err());
        assert!(fit_three_phase(0.0, f64::INFINITY, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn interpolates_its_inputs(z in -3.0f64..3.0, p in -3.0f64..3.0, m in -3.0f64..3.0) {
            let c = fit_three_phase(z, p, m).unwrap();
            prop_assert!((c.eval(THREE_PHASES[0]) - z).abs() < 1e-12);
            prop_assert!((c.eval(THREE_PHASES[1]) - p).abs() < 1e-12);
            prop_assert!((c.eval(THREE_PHASES[2]) - m).abs() < 1e-12);
        }

        #[test]
        fn fit_is_linear(
            u in prop::array::uniform3(-2.0f64..2.0),
            v in prop::array::uniform3(-2.0f64..2.0),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let fu = fit_three_phase(u[0], u[1], u[2]).unwrap();
            let fv = fit_three_phase(v[0], v[1], v[2]).unwrap();
            let w: Vec<f64> = (0..3).map(|i| alpha * u[i] + beta * v[i]).collect();
            let fw = fit_three_phase(w[0], w[1], w[2]).unwrap();
            prop_assert!((fw.a0 - (alpha * fu.a0 + beta * fv.a0)).abs() < 1e-12);
            prop_assert!((fw.a1 - (alpha * fu.a1 + beta * fv.a1)).abs() < 1e-12);
            prop_assert!((fw.a2 - (alpha * fu.a2 + beta * fv.a2)).abs() < 1e-12);
        }

        #[test]
        fn shifted_matches_offset_eval(a in prop::array::uniform3(-1.0f64..1.0), x in -4.0f64..4.0, t in -4.0f64..4.0) {
            let c = SinusoidCoeffs::new(a[0], a[1], a[2]);
            prop_assert!((c.shifted(x).eval(t) - c.eval(x + t)).abs() < 1e-12);
        }
    }
}
