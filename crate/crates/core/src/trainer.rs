//! Layer-wise sequential minimal optimization (SMO).
//!
//! Each layer update measures every training point at the three reconstruction
//! phases of one shifter, fits a sinusoid per point, and minimizes the
//! resulting closed-form surrogate of the mean squared error over that
//! layer's parameters. All other layers stay at their data-dependent phases.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledSample;
use crate::error::{invalid, Result};
use crate::model::{Encoding, InputVector, ModelParams};
use crate::sampler::{sample_probability_estimate, RandomSource, ShotConfig};
use crate::sinusoid::{fit_three_phase, SinusoidCoeffs, THREE_PHASES};

const INV_GOLDEN: f64 = 0.618_033_988_749_894_8;
const MAX_REFINE_PASSES: usize = 200;
/// Relative improvement below which a refinement pass counts as stalled.
const REFINE_STALL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// All phases zero. The circuit then outputs `p ≡ 1`; intended for tests.
    Zero,
    /// Each parameter uniform on `[-π, π)`.
    #[default]
    UniformRandom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_sweeps: usize,
    pub cost_tolerance: f64,
    /// Candidates per axis of the coarse search over `[-π, π)²`. Odd.
    pub grid_size: usize,
    /// Golden-section iterations per axis after the coarse search.
    pub refine_iters: usize,
    pub init: Init,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 10,
            cost_tolerance: 1e-4,
            grid_size: 61,
            refine_iters: 30,
            init: Init::UniformRandom,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size == 0 || self.grid_size.is_multiple_of(2) {
            return invalid(format!(
                "grid_size must be odd and positive, got {}",
                self.grid_size
            ));
        }
        if !(self.cost_tolerance.is_finite() && self.cost_tolerance >= 0.0) {
            return invalid("cost_tolerance must be finite and nonnegative");
        }
        Ok(())
    }

    /// Spacing of the coarse search grid.
    pub fn grid_step(&self) -> f64 {
        2.0 * PI / self.grid_size as f64
    }
}

/// Starting point for training.
pub fn initial_params(
    layers: usize,
    encoding: Encoding,
    init: Init,
    rng: &mut RandomSource,
) -> Result<ModelParams> {
    match init {
        Init::Zero => ModelParams::zeros(layers, encoding),
        Init::UniformRandom => ModelParams::random(layers, encoding, rng),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Surrogate cost at the optimum of each layer update.
    pub cost_history: Vec<f64>,
    /// Parameters after each layer update.
    pub theta_history: Vec<Vec<f64>>,
    /// Estimated cost before the first sweep and after each sweep.
    pub sweep_costs: Vec<f64>,
    /// Expected photons spent on reconstruction measurements.
    pub photon_budget: f64,
    /// Shifter measurement rounds (three settings × N points each).
    pub measurement_rounds: usize,
    pub layer_updates: usize,
    pub converged: bool,
}

impl TrainReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_data(data: &[LabeledSample]) -> Result<()> {
    if data.is_empty() {
        return invalid("training data must not be empty");
    }
    Ok(())
}

/// Mean squared error between shot-sampled probabilities and 0/1 targets.
pub fn estimate_cost(
    params: &ModelParams,
    data: &[LabeledSample],
    cfg: &ShotConfig,
    rng: &mut RandomSource,
) -> Result<f64> {
    check_data(data)?;
    let mut total = 0.0;
    for s in data {
        let p = sample_probability_estimate(params.forward(&s.x), cfg, rng)?;
        total += (p - s.y.target()).powi(2);
    }
    Ok(total / data.len() as f64)
}

fn sampled_cost(
    probs: &[f64],
    targets: &[f64],
    cfg: &ShotConfig,
    rng: &mut RandomSource,
) -> Result<f64> {
    let mut total = 0.0;
    for (&p, &y) in probs.iter().zip(targets) {
        total += (sample_probability_estimate(p, cfg, rng)? - y).powi(2);
    }
    Ok(total / probs.len() as f64)
}

/// Unbiased sample variance of [`estimate_cost`] over `repeats` independent
/// substreams.
pub fn estimate_cost_variance(
    params: &ModelParams,
    data: &[LabeledSample],
    cfg: &ShotConfig,
    repeats: usize,
    rng: &mut RandomSource,
) -> Result<f64> {
    if repeats < 2 {
        return invalid(format!("need at least 2 repeats, got {repeats}"));
    }
    check_data(data)?;
    if cfg.is_exact() {
        return Ok(0.0);
    }
    let probs: Vec<f64> = data.iter().map(|s| params.forward(&s.x)).collect();
    let targets: Vec<f64> = data.iter().map(|s| s.y.target()).collect();
    let key = rng.fork_key();

    // Welford
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for r in 0..repeats {
        let mut sub = RandomSource::substream(key, r as u64);
        let c = sampled_cost(&probs, &targets, cfg, &mut sub)?;
        let delta = c - mean;
        mean += delta / (r + 1) as f64;
        m2 += delta * (c - mean);
    }
    Ok(m2 / (repeats - 1) as f64)
}

/// Measures shifter `shifter` (1-based) of every training point at the three
/// reconstruction phases and fits the per-point sinusoids.
///
/// Point `i` draws its shot noise from substream `i` of a key forked off `rng`,
/// so the result does not depend on scheduling.
pub fn measure_sinusoids(
    params: &ModelParams,
    shifter: usize,
    data: &[LabeledSample],
    shot_cfg: &ShotConfig,
    rng: &mut RandomSource,
) -> Result<Vec<SinusoidCoeffs>> {
    check_data(data)?;
    // validates the shifter index
    params.forward_with_override(shifter, 0.0, &InputVector::new(0.0, 0.0))?;
    let key = rng.fork_key();
    data.par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut lane = RandomSource::substream(key, i as u64);
            let mut p = [0.0; 3];
            for (slot, &phi) in p.iter_mut().zip(THREE_PHASES.iter()) {
                let exact = params.forward_with_override(shifter, phi, &s.x)?;
                *slot = sample_probability_estimate(exact, shot_cfg, &mut lane)?;
            }
            fit_three_phase(p[0], p[1], p[2])
        })
        .collect()
}

/// Surrogate cost of one linear-encoding layer as a function of its two
/// weights: `C(a, b) = mean_i (p_i(a·x1_i + b·x2_i) − y_i)²`.
#[derive(Clone, Debug)]
pub struct LinearSurrogate {
    coeffs: Vec<SinusoidCoeffs>,
    x1: Vec<f64>,
    x2: Vec<f64>,
    targets: Vec<f64>,
}

impl LinearSurrogate {
    pub fn new(coeffs: Vec<SinusoidCoeffs>, data: &[LabeledSample]) -> Self {
        Self {
            coeffs,
            x1: data.iter().map(|s| s.x.x1).collect(),
            x2: data.iter().map(|s| s.x.x2).collect(),
            targets: data.iter().map(|s| s.y.target()).collect(),
        }
    }

    /// Measures layer `k` and builds its surrogate.
    pub fn measure(
        params: &ModelParams,
        k: usize,
        data: &[LabeledSample],
        shot_cfg: &ShotConfig,
        rng: &mut RandomSource,
    ) -> Result<Self> {
        if params.encoding() != Encoding::Linear {
            return invalid("linear surrogate needs the linear encoding");
        }
        let coeffs = measure_sinusoids(params, k, data, shot_cfg, rng)?;
        Ok(Self::new(coeffs, data))
    }

    pub fn cost(&self, a: f64, b: f64) -> f64 {
        let total: f64 = self
            .coeffs
            .iter()
            .zip(self.x1.iter().zip(&self.x2))
            .zip(&self.targets)
            .map(|((c, (&x1, &x2)), &y)| (c.eval(a * x1 + b * x2) - y).powi(2))
            .sum();
        total / self.coeffs.len() as f64
    }

    /// Exhaustive search over a `grid_size²` grid on `[-π, π)²`, with the
    /// incumbent `(a, b)` as an extra candidate. Ties keep the incumbent.
    pub fn grid_minimize(&self, grid_size: usize, incumbent: (f64, f64)) -> ((f64, f64), f64) {
        let n = self.coeffs.len();
        let step = 2.0 * PI / grid_size as f64;
        let grid: Vec<f64> = (0..grid_size).map(|g| -PI + step * g as f64).collect();

        // sin/cos of (grid value × coordinate), one row per grid value
        let table = |xs: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let mut s = Vec::with_capacity(grid_size * n);
            let mut c = Vec::with_capacity(grid_size * n);
            for &g in &grid {
                for &x in xs {
                    let (si, co) = (g * x).sin_cos();
                    s.push(si);
                    c.push(co);
                }
            }
            (s, c)
        };
        let (sa, ca) = table(&self.x1);
        let (sb, cb) = table(&self.x2);
        let r0: Vec<f64> = self
            .coeffs
            .iter()
            .zip(&self.targets)
            .map(|(c, y)| c.a0 - y)
            .collect();

        let mut best = (incumbent, self.cost(incumbent.0, incumbent.1));
        let mut pp = vec![0.0; n];
        let mut qq = vec![0.0; n];
        for (g, &a) in grid.iter().enumerate() {
            let sa = &sa[g * n..(g + 1) * n];
            let ca = &ca[g * n..(g + 1) * n];
            // a1·cos(u+v) + a2·sin(u+v) = cos v·P + sin v·Q
            for i in 0..n {
                let c = &self.coeffs[i];
                pp[i] = c.a1 * ca[i] + c.a2 * sa[i];
                qq[i] = c.a2 * ca[i] - c.a1 * sa[i];
            }
            for (h, &b) in grid.iter().enumerate() {
                let sb = &sb[h * n..(h + 1) * n];
                let cb = &cb[h * n..(h + 1) * n];
                let mut total = 0.0;
                for i in 0..n {
                    let r = r0[i] + cb[i] * pp[i] + sb[i] * qq[i];
                    total += r * r;
                }
                let cost = total / n as f64;
                if cost < best.1 {
                    best = ((a, b), cost);
                }
            }
        }
        best
    }

    /// Coordinate-wise golden-section refinement within `±half_width` of the
    /// current point, clipped to `[-π, π]`, alternating axes until a full pass
    /// stops improving. Moves are kept only when they lower the cost.
    pub fn refine(
        &self,
        start: ((f64, f64), f64),
        half_width: f64,
        iters: usize,
    ) -> ((f64, f64), f64) {
        if iters == 0 {
            return start;
        }
        let ((mut a, mut b), mut cost) = start;
        for _ in 0..MAX_REFINE_PASSES {
            let before = cost;
            let (lo, hi) = search_window(a, half_width);
            let (ta, ca) = golden_section(|t| self.cost(t, b), lo, hi, iters);
            if lo < hi && ca < cost {
                a = ta;
                cost = ca;
            }
            let (lo, hi) = search_window(b, half_width);
            let (tb, cb) = golden_section(|t| self.cost(a, t), lo, hi, iters);
            if lo < hi && cb < cost {
                b = tb;
                cost = cb;
            }
            if before - cost <= REFINE_STALL * before.abs().max(1e-300) {
                break;
            }
        }
        ((a, b), cost)
    }
}

fn search_window(center: f64, half_width: f64) -> (f64, f64) {
    (
        (center - half_width).max(-PI),
        (center + half_width).min(PI),
    )
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`. Returns `(x, f(x))`.
pub fn golden_section(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    iters: usize,
) -> (f64, f64) {
    let mut x1 = hi - INV_GOLDEN * (hi - lo);
    let mut x2 = lo + INV_GOLDEN * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_GOLDEN * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_GOLDEN * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `C(θ) = k0 + k1c·cos θ + k1s·sin θ + k2c·cos 2θ + k2s·sin 2θ`.
///
/// This is the exact surrogate for an additive-offset parameter: each point
/// contributes the square of a first-order sinusoid in θ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrigQuadratic {
    pub k0: f64,
    pub k1c: f64,
    pub k1s: f64,
    pub k2c: f64,
    pub k2s: f64,
}

impl TrigQuadratic {
    /// Builds `mean_i (c_i(x_i + θ) − y_i)²`.
    pub fn from_offsets(coeffs: &[SinusoidCoeffs], offsets: &[f64], targets: &[f64]) -> Self {
        let n = coeffs.len() as f64;
        let mut q = TrigQuadratic {
            k0: 0.0,
            k1c: 0.0,
            k1s: 0.0,
            k2c: 0.0,
            k2s: 0.0,
        };
        for ((c, &x), &y) in coeffs.iter().zip(offsets).zip(targets) {
            let s = c.shifted(x);
            let d = s.a0 - y;
            q.k0 += d * d + 0.5 * (s.a1 * s.a1 + s.a2 * s.a2);
            q.k1c += 2.0 * d * s.a1;
            q.k1s += 2.0 * d * s.a2;
            q.k2c += 0.5 * (s.a1 * s.a1 - s.a2 * s.a2);
            q.k2s += s.a1 * s.a2;
        }
        q.k0 /= n;
        q.k1c /= n;
        q.k1s /= n;
        q.k2c /= n;
        q.k2s /= n;
        q
    }

    pub fn eval(&self, t: f64) -> f64 {
        let (s1, c1) = t.sin_cos();
        let (s2, c2) = (2.0 * t).sin_cos();
        self.k0 + self.k1c * c1 + self.k1s * s1 + self.k2c * c2 + self.k2s * s2
    }

    fn derivative(&self, t: f64) -> f64 {
        let (s1, c1) = t.sin_cos();
        let (s2, c2) = (2.0 * t).sin_cos();
        -self.k1c * s1 + self.k1s * c1 - 2.0 * self.k2c * s2 + 2.0 * self.k2s * c2
    }

    fn second_derivative(&self, t: f64) -> f64 {
        let (s1, c1) = t.sin_cos();
        let (s2, c2) = (2.0 * t).sin_cos();
        -self.k1c * c1 - self.k1s * s1 - 4.0 * self.k2c * c2 - 4.0 * self.k2s * s2
    }

    /// Stationary points, from the roots of `z²·C'(θ)` with `z = e^{iθ}`.
    pub fn stationary_points(&self) -> Vec<f64> {
        // a·cos nθ + b·sin nθ = ((a − ib)/2)·zⁿ + ((a + ib)/2)·z⁻ⁿ
        let half = |a: f64, b: f64| (Complex64::new(a, -b) / 2.0, Complex64::new(a, b) / 2.0);
        let (p1, m1) = half(self.k1s, -self.k1c);
        let (p2, m2) = half(2.0 * self.k2s, -2.0 * self.k2c);
        // highest power first: z⁴ … z⁰
        let poly = [p2, p1, Complex64::new(0.0, 0.0), m1, m2];
        polynomial_roots(&poly)
            .into_iter()
            .filter(|z| z.norm() > 1e-9)
            .map(|z| {
                let mut t = z.arg();
                // polish on the real line
                for _ in 0..8 {
                    let h = self.second_derivative(t);
                    if h.abs() < 1e-300 {
                        break;
                    }
                    t -= self.derivative(t) / h;
                }
                wrap_phase(t)
            })
            .collect()
    }

    /// Global minimizer over the circle; `incumbent` wins ties.
    pub fn minimize(&self, incumbent: f64) -> (f64, f64) {
        let mut best = (incumbent, self.eval(incumbent));
        for t in self.stationary_points() {
            let v = self.eval(t);
            if v < best.1 {
                best = (t, v);
            }
        }
        best
    }
}

/// Roots of a complex polynomial given highest-degree coefficient first
/// (Durand–Kerner). Negligible leading coefficients are dropped.
fn polynomial_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Vec::new();
    }
    let start = coeffs
        .iter()
        .position(|c| c.norm() > 1e-13 * scale)
        .unwrap_or(coeffs.len());
    let poly: Vec<Complex64> = coeffs[start..].iter().map(|c| c / coeffs[start]).collect();
    let degree = poly.len().saturating_sub(1);
    if degree == 0 {
        return Vec::new();
    }
    let eval = |z: Complex64| {
        poly.iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    };
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..degree).map(|k| seed.powu(k as u32 + 1)).collect();
    for _ in 0..500 {
        let mut moved = 0.0_f64;
        for i in 0..degree {
            let zi = roots[i];
            let mut denom = Complex64::new(1.0, 0.0);
            for (j, &zj) in roots.iter().enumerate() {
                if j != i {
                    denom *= zi - zj;
                }
            }
            if denom.norm() == 0.0 {
                denom = Complex64::new(1e-12, 0.0);
            }
            let step = eval(zi) / denom;
            roots[i] = zi - step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-15 {
            break;
        }
    }
    roots
}

/// Maps a phase onto `[-π, π)`.
pub fn wrap_phase(t: f64) -> f64 {
    let w = (t + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// Outcome of one SMO layer update.
#[derive(Clone, Debug)]
pub struct LayerUpdate {
    pub params: ModelParams,
    /// Surrogate cost at the returned parameters.
    pub surrogate_cost: f64,
    /// Surrogate cost at the incoming parameters.
    pub incoming_cost: f64,
    /// Shifters measured (three settings × N points each).
    pub measurement_rounds: usize,
}

/// Re-optimizes the parameters of layer `k` (1-based).
pub fn smo_layer_update(
    params: &ModelParams,
    k: usize,
    data: &[LabeledSample],
    shot_cfg: &ShotConfig,
    train_cfg: &TrainConfig,
    rng: &mut RandomSource,
) -> Result<LayerUpdate> {
    if k == 0 || k > params.layers() {
        return invalid(format!("layer index {k} outside 1..={}", params.layers()));
    }
    check_data(data)?;
    let (ia, ib) = (2 * (k - 1), 2 * (k - 1) + 1);
    match params.encoding() {
        Encoding::Linear => {
            let surrogate = LinearSurrogate::measure(params, k, data, shot_cfg, rng)?;
            let incumbent = (params.theta()[ia], params.theta()[ib]);
            let incoming_cost = surrogate.cost(incumbent.0, incumbent.1);
            let coarse = surrogate.grid_minimize(train_cfg.grid_size, incumbent);
            let ((a, b), cost) =
                surrogate.refine(coarse, train_cfg.grid_step(), train_cfg.refine_iters);
            let mut next = params.clone();
            next.set_theta(ia, a)?;
            next.set_theta(ib, b)?;
            Ok(LayerUpdate {
                params: next,
                surrogate_cost: cost,
                incoming_cost,
                measurement_rounds: 1,
            })
        }
        Encoding::AffineOffset => {
            let targets: Vec<f64> = data.iter().map(|s| s.y.target()).collect();
            let mut next = params.clone();
            let mut incoming_cost = f64::NAN;
            let mut cost = f64::NAN;
            for (axis, index) in [ia, ib].into_iter().enumerate() {
                // shifter index equals theta index for this encoding
                let coeffs = measure_sinusoids(&next, index + 1, data, shot_cfg, rng)?;
                let offsets: Vec<f64> = data
                    .iter()
                    .map(|s| if axis == 0 { s.x.x1 } else { s.x.x2 })
                    .collect();
                let q = TrigQuadratic::from_offsets(&coeffs, &offsets, &targets);
                let current = next.theta()[index];
                if axis == 0 {
                    incoming_cost = q.eval(current);
                }
                let (t, v) = q.minimize(current);
                next.set_theta(index, if t == current { t } else { wrap_phase(t) })?;
                cost = v;
            }
            Ok(LayerUpdate {
                params: next,
                surrogate_cost: cost,
                incoming_cost,
                measurement_rounds: 2,
            })
        }
    }
}

/// Sweeps layers `1..=L` until `max_sweeps` or until the estimated cost
/// improves by less than `cost_tolerance` on two consecutive sweeps.
pub fn train(
    params0: &ModelParams,
    data: &[LabeledSample],
    shot_cfg: &ShotConfig,
    train_cfg: &TrainConfig,
) -> Result<(ModelParams, TrainReport)> {
    train_cfg.validate()?;
    check_data(data)?;
    let mut report = TrainReport::default();
    let mut params = params0.clone();
    if train_cfg.max_sweeps == 0 {
        return Ok((params, report));
    }

    let mut rng = RandomSource::new(train_cfg.seed);
    let photons_per_round = 3.0 * data.len() as f64 * shot_cfg.photons_per_setting();
    let mut previous = estimate_cost(&params, data, shot_cfg, &mut rng)?;
    report.sweep_costs.push(previous);
    let mut small_steps = 0;

    for _ in 0..train_cfg.max_sweeps {
        for k in 1..=params.layers() {
            let update = smo_layer_update(&params, k, data, shot_cfg, train_cfg, &mut rng)?;
            params = update.params;
            report.cost_history.push(update.surrogate_cost);
            report.theta_history.push(params.theta().to_vec());
            report.layer_updates += 1;
            report.measurement_rounds += update.measurement_rounds;
            report.photon_budget += photons_per_round * update.measurement_rounds as f64;
        }
        let cost = estimate_cost(&params, data, shot_cfg, &mut rng)?;
        report.sweep_costs.push(cost);
        if previous - cost < train_cfg.cost_tolerance {
            small_steps += 1;
        } else {
            small_steps = 0;
        }
        previous = cost;
        if small_steps >= 2 {
            report.converged = true;
            break;
        }
    }
    Ok((params, report))
}
