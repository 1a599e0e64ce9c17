//! Linear optics for a single photon spread over two spatial modes.
//!
//! Mode 0 (the upper waveguide) carries the logical `|0⟩`, mode 1 (the lower
//! waveguide) carries `|1⟩`. Beam splitters mix the modes; phase shifters
//! act on mode 1 only.

use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::Mul;

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Amplitudes of one photon across the two modes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoModeState {
    pub amp0: Complex64,
    pub amp1: Complex64,
}

impl TwoModeState {
    pub const fn new(amp0: Complex64, amp1: Complex64) -> Self {
        Self { amp0, amp1 }
    }

    /// Photon in the upper mode.
    pub const fn zero() -> Self {
        Self::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    /// Photon in the lower mode.
    pub const fn one() -> Self {
        Self::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp0.norm_sqr() + self.amp1.norm_sqr()
    }

    pub fn amplitude(&self, mode: Mode) -> Complex64 {
        match mode {
            Mode::Zero => self.amp0,
            Mode::One => self.amp1,
        }
    }
}

/// Output port of the interferometer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Zero,
    One,
}

/// A 2×2 complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitaryMatrix2 {
    m: [[Complex64; 2]; 2],
}

impl UnitaryMatrix2 {
    pub const fn from_rows(m: [[Complex64; 2]; 2]) -> Self {
        Self { m }
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self::from_rows([[one, zero], [zero, one]])
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.m[row][col]
    }

    pub fn rows(&self) -> [[Complex64; 2]; 2] {
        self.m
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let m = &self.m;
        Self::from_rows([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    /// Largest entrywise deviation of `U†U` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.adjoint() * *self;
        let id = Self::identity();
        let mut worst = 0.0_f64;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((p.m[r][c] - id.m[r][c]).norm());
            }
        }
        worst
    }

    pub fn apply(&self, s: &TwoModeState) -> TwoModeState {
        let m = &self.m;
        TwoModeState {
            amp0: m[0][0] * s.amp0 + m[0][1] * s.amp1,
            amp1: m[1][0] * s.amp0 + m[1][1] * s.amp1,
        }
    }
}

impl Mul for UnitaryMatrix2 {
    type Output = UnitaryMatrix2;

    fn mul(self, rhs: UnitaryMatrix2) -> UnitaryMatrix2 {
        let a = &self.m;
        let b = &rhs.m;
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        UnitaryMatrix2 { m: out }
    }
}

/// Symmetric 50:50 beam splitter `(1/√2)·[[1, i], [i, 1]]`.
pub fn beam_splitter_matrix() -> UnitaryMatrix2 {
    let d = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let x = Complex64::new(0.0, FRAC_1_SQRT_2);
    UnitaryMatrix2::from_rows([[d, x], [x, d]])
}

/// Phase shifter `diag(1, e^{iφ})` acting on mode 1.
pub fn phase_shifter_matrix(phi: f64) -> Result<UnitaryMatrix2> {
    if !phi.is_finite() {
        return invalid(format!("phase must be finite, got {phi}"));
    }
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    Ok(UnitaryMatrix2::from_rows([
        [one, zero],
        [zero, Complex64::cis(phi)],
    ]))
}

pub fn apply(u: &UnitaryMatrix2, s: &TwoModeState) -> TwoModeState {
    u.apply(s)
}

pub fn detection_probability(s: &TwoModeState, mode: Mode) -> f64 {
    s.amplitude(mode).norm_sqr()
}

// Hot-path versions used by the model: no matrix construction, no validation.

#[inline]
pub(crate) fn split(s: TwoModeState) -> TwoModeState {
    // (1/√2)(a0 + i a1, i a0 + a1)
    let i = Complex64::i();
    TwoModeState {
        amp0: (s.amp0 + i * s.amp1) * FRAC_1_SQRT_2,
        amp1: (i * s.amp0 + s.amp1) * FRAC_1_SQRT_2,
    }
}

#[inline]
pub(crate) fn shift(s: TwoModeState, phi: f64) -> TwoModeState {
    TwoModeState {
        amp0: s.amp0,
        amp1: s.amp1 * Complex64::cis(phi),
    }
}
