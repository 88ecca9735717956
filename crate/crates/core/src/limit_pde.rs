//! Continuum equations on the torus `T^d = [0, 1)^d` in centered variables
//! `v = 2u - 1`:
//!
//! ```text
//! d/dt v = 2 alpha Delta v - (2 beta + 1) v + h(v)
//! ```
//!
//! with `h = h_K` (finite neighborhoods) or the discontinuous `h_inf`, whose
//! equation is read as an inclusion `h_inf(v) in dH_inf(v)`.
//!
//! Solutions are mild: `v(t) = S_t v0 + int_0^t S_{t-s} w(s) ds` with
//! `S_t = S^{lambda, gamma}_t`, `lambda = 2 beta + 1`, `gamma = 4 alpha`, the
//! semigroup `e^{-lambda t}` times the heat flow of `Delta / 2` run for time
//! `gamma t`. Space is a uniform periodic grid of `M` nodes per axis and every
//! semigroup application is a Fourier multiplier.
//!
//! The Duhamel integral on a uniform time grid interpolates `w` linearly between
//! nodes and integrates each Fourier mode exactly ("product trapezoid"). The
//! whole mild map then reduces to the one-step recursion
//! `J_{n+1} = E J_n + A w_n + B w_{n+1}`, `J_0 = v0`, with mode-wise weights
//! `E = e^{-mu dt}` and `A`, `B` the exact integrals of the two hat functions.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reaction::{
    h_inf, h_inf_right, subdiff_contains, subdiff_h_inf, ReactionError, ReactionOrder, ReactionSpec,
};
use crate::spectral::PeriodicFft;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitPdeError {
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("grid needs d >= 1 and M >= 2 (got d={dim}, M={m})")]
    BadGrid { dim: usize, m: usize },
    #[error("field has {got} values, grid needs {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid semigroup parameters lambda={lambda}, gamma={gamma}")]
    BadSemigroup { lambda: f64, gamma: f64 },
    #[error("invalid parameter {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("initial datum has sup norm {0} > 1")]
    InitialOutOfRange(f64),
    #[error(
        "Picard iteration did not converge in {iterations} iterations \
         (last difference {last_diff:e}, contraction estimate {contraction:.3})"
    )]
    NotConverged {
        iterations: usize,
        last_diff: f64,
        contraction: f64,
    },
    #[error("selection leaves the subdifferential at {} grid points, first: {:?}", .count, .points)]
    SelectionInvalid {
        count: usize,
        points: Vec<(usize, usize)>,
    },
    #[error("need 2 rho < 1 / (1 + 2 beta), got rho={rho}, beta={beta}")]
    RegimeViolated { rho: f64, beta: f64 },
    #[error("solution carries no selection field")]
    MissingSelection,
    #[error(transparent)]
    Reaction(#[from] ReactionError),
}

/// Values on the uniform grid `{0, 1/M, ..., (M-1)/M}^d`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumField {
    dim: usize,
    m: usize,
    values: Vec<f64>,
}

impl ContinuumField {
    pub fn new(dim: usize, m: usize, values: Vec<f64>) -> Result<Self, LimitPdeError> {
        check_grid(dim, m)?;
        let expected = m.pow(dim as u32);
        if values.len() != expected {
            return Err(LimitPdeError::LengthMismatch {
                got: values.len(),
                expected,
            });
        }
        Ok(Self { dim, m, values })
    }

    pub fn constant(dim: usize, m: usize, value: f64) -> Result<Self, LimitPdeError> {
        check_grid(dim, m)?;
        Ok(Self {
            dim,
            m,
            values: vec![value; m.pow(dim as u32)],
        })
    }

    pub fn from_fn(dim: usize, m: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self, LimitPdeError> {
        check_grid(dim, m)?;
        let mut x = vec![0.0; dim];
        let values = (0..m.pow(dim as u32))
            .map(|idx| {
                node_position_into(dim, m, idx, &mut x);
                f(&x)
            })
            .collect();
        Ok(Self { dim, m, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn node_position(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        node_position_into(self.dim, self.m, idx, &mut x);
        x
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.dim == other.dim && self.m == other.m
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        sup_distance(&self.values, &other.values)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Periodic multilinear interpolation at `x`.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let m = self.m;
        let mut base = vec![0usize; self.dim];
        let mut frac = vec![0.0; self.dim];
        for a in 0..self.dim {
            let s = x[a].rem_euclid(1.0) * m as f64;
            let fl = s.floor();
            base[a] = (fl as usize) % m;
            frac[a] = s - fl;
        }
        let mut out = 0.0;
        for corner in 0..(1usize << self.dim) {
            let mut weight = 1.0;
            let mut idx = 0;
            for a in 0..self.dim {
                let up = (corner >> a) & 1 == 1;
                weight *= if up { frac[a] } else { 1.0 - frac[a] };
                idx = idx * m + if up { (base[a] + 1) % m } else { base[a] };
            }
            if weight != 0.0 {
                out += weight * self.values[idx];
            }
        }
        out
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dim: self.dim,
            m: self.m,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

fn check_grid(dim: usize, m: usize) -> Result<(), LimitPdeError> {
    if dim == 0 || m < 2 {
        return Err(LimitPdeError::BadGrid { dim, m });
    }
    Ok(())
}

fn node_position_into(dim: usize, m: usize, idx: usize, x: &mut [f64]) {
    let mut rest = idx;
    for a in (0..dim).rev() {
        x[a] = (rest % m) as f64 / m as f64;
        rest /= m;
    }
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    WrappedGaussian,
    Spectral,
}

/// Terms below this size end the kernel series.
const KERNEL_CUTOFF: f64 = 1e-17;

fn kernel_1d(t: f64, z: f64, mode: KernelMode) -> f64 {
    match mode {
        KernelMode::WrappedGaussian => {
            let z = z - z.round();
            let norm = 1.0 / (2.0 * std::f64::consts::PI * t).sqrt();
            let term = |k: f64| norm * (-(z - k).powi(2) / (2.0 * t)).exp();
            let mut sum = term(0.0);
            let mut k = 1.0;
            loop {
                let pair = term(k) + term(-k);
                sum += pair;
                if pair < KERNEL_CUTOFF && k > 1.0 {
                    break;
                }
                k += 1.0;
            }
            sum
        }
        KernelMode::Spectral => {
            let mut sum = 1.0;
            let mut n = 1.0f64;
            loop {
                let decay = (-2.0 * std::f64::consts::PI.powi(2) * n * n * t).exp();
                if 2.0 * decay < KERNEL_CUTOFF {
                    break;
                }
                sum += 2.0 * decay * (2.0 * std::f64::consts::PI * n * z).cos();
                n += 1.0;
            }
            sum
        }
    }
}

/// Transition density `s(t, x, y)` of the heat flow of `Delta / 2` on `T^d`.
pub fn heat_kernel(t: f64, x: &[f64], y: &[f64], mode: KernelMode) -> Result<f64, LimitPdeError> {
    if !(t > 0.0) {
        return Err(LimitPdeError::NonPositiveTime(t));
    }
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| kernel_1d(t, a - b, mode))
        .product())
}

/// `S^{lambda, gamma}_t`: decay `e^{-lambda t}` and heat flow for time `gamma t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemigroupSpec {
    pub lambda: f64,
    pub gamma: f64,
}

impl SemigroupSpec {
    pub fn new(lambda: f64, gamma: f64) -> Result<Self, LimitPdeError> {
        if !(lambda >= 0.0 && lambda.is_finite() && gamma > 0.0 && gamma.is_finite()) {
            return Err(LimitPdeError::BadSemigroup { lambda, gamma });
        }
        Ok(Self { lambda, gamma })
    }

    /// Decay rate of the Fourier mode with frequency vector `k`.
    pub fn mode_rate(&self, k: &[i64]) -> f64 {
        let k2: f64 = k.iter().map(|&x| (x * x) as f64).sum();
        self.lambda + 0.5 * self.gamma * 4.0 * std::f64::consts::PI.powi(2) * k2
    }
}

pub fn apply_semigroup(
    spec: &SemigroupSpec,
    t: f64,
    f: &ContinuumField,
) -> Result<ContinuumField, LimitPdeError> {
    if !(t >= 0.0) {
        return Err(LimitPdeError::NonPositiveTime(t));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let fft = PeriodicFft::new(f.dim, f.m);
    let mult = fft.symbol(|k| (-spec.mode_rate(k) * t).exp());
    Ok(ContinuumField {
        dim: f.dim,
        m: f.m,
        values: fft.apply_multiplier(&f.values, &mult),
    })
}

/// One step of the mild-solution recursion on a fixed grid and time step.
struct Propagator {
    fft: PeriodicFft,
    decay: Vec<f64>,
    weight_prev: Vec<f64>,
    weight_next: Vec<f64>,
}

/// `(int_0^1 v e^{-x v} dv, int_0^1 (1 - v) e^{-x v} dv)` for `x = mu dt >= 0`.
fn hat_integrals(x: f64) -> (f64, f64) {
    if x < 1e-2 {
        // a = sum (-x)^n / (n! (n + 2)), b = sum (-x)^n / (n! (n + 1) (n + 2))
        let mut a = 0.0;
        let mut b = 0.0;
        let mut pow = 1.0;
        for n in 0..8 {
            let nf = n as f64;
            a += pow / (nf + 2.0);
            b += pow / ((nf + 1.0) * (nf + 2.0));
            pow *= -x / (nf + 1.0);
        }
        (a, b)
    } else {
        let em = (-x).exp();
        let a = (1.0 - em * (1.0 + x)) / (x * x);
        let b = -(-x).exp_m1() / x - a;
        (a, b)
    }
}

impl Propagator {
    fn new(spec: &SemigroupSpec, dim: usize, m: usize, dt: f64) -> Self {
        let fft = PeriodicFft::new(dim, m);
        let n = fft.len();
        let mut decay = Vec::with_capacity(n);
        let mut weight_prev = Vec::with_capacity(n);
        let mut weight_next = Vec::with_capacity(n);
        for idx in 0..n {
            let mu = spec.mode_rate(&fft.frequencies(idx));
            let x = mu * dt;
            // w(s) = w_n (1 - s/dt) + w_{n+1} s/dt; the weight of w_n integrates
            // e^{-mu (dt - s)} (1 - s/dt), i.e. v e^{-x v} after v = 1 - s/dt.
            let (a, b) = hat_integrals(x);
            decay.push((-x).exp());
            weight_prev.push(dt * a);
            weight_next.push(dt * b);
        }
        Self {
            fft,
            decay,
            weight_prev,
            weight_next,
        }
    }

    fn spectrum(&self, values: &[f64]) -> Vec<Complex64> {
        self.fft.to_spectrum(values)
    }

    fn values(&self, spectrum: &[Complex64]) -> Vec<f64> {
        self.fft.from_spectrum(spectrum.to_vec())
    }

    /// `J <- E J + A w_prev + B w_next`.
    fn advance(&self, j: &mut [Complex64], w_prev: &[Complex64], w_next: &[Complex64]) {
        for idx in 0..j.len() {
            j[idx] = j[idx] * self.decay[idx]
                + w_prev[idx] * self.weight_prev[idx]
                + w_next[idx] * self.weight_next[idx];
        }
    }

    /// The mild map `v0, (w_n) -> (S_{t_n} v0 + int_0^{t_n} S_{t_n - s} w(s) ds)_n`.
    fn sweep(&self, v0: &[f64], w: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let w_hat: Vec<Vec<Complex64>> = w.par_iter().map(|x| self.spectrum(x)).collect();
        let mut j = self.spectrum(v0);
        let mut spectra = Vec::with_capacity(w.len());
        spectra.push(j.clone());
        for n in 1..w.len() {
            self.advance(&mut j, &w_hat[n - 1], &w_hat[n]);
            spectra.push(j.clone());
        }
        let mut out: Vec<Vec<f64>> = spectra.par_iter().map(|s| self.values(s)).collect();
        out[0] = v0.to_vec();
        out
    }
}

/// Uniform time grid `t_n = n tau / steps`.
pub fn uniform_times(tau: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|n| {
            if n == steps {
                tau
            } else {
                tau * n as f64 / steps as f64
            }
        })
        .collect()
}

/// Parameters of the centered continuum equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitProblem {
    pub alpha: f64,
    pub beta: f64,
    pub reaction: ReactionSpec,
}

impl LimitProblem {
    pub fn new(alpha: f64, beta: f64, reaction: ReactionSpec) -> Result<Self, LimitPdeError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(LimitPdeError::InvalidParameter {
                field: "alpha",
                reason: format!("must be finite and > 0, got {alpha}"),
            });
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(LimitPdeError::InvalidParameter {
                field: "beta",
                reason: format!("must be finite and >= 0, got {beta}"),
            });
        }
        Ok(Self {
            alpha,
            beta,
            reaction,
        })
    }

    /// `S^{2 beta + 1, 4 alpha}`.
    pub fn semigroup(&self) -> SemigroupSpec {
        SemigroupSpec {
            lambda: 2.0 * self.beta + 1.0,
            gamma: 4.0 * self.alpha,
        }
    }

    pub fn rho(&self) -> f64 {
        self.reaction.rho()
    }
}

/// A mild solution sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MildSolution {
    pub times: Vec<f64>,
    pub fields: Vec<ContinuumField>,
    /// The reaction term `w(t)` actually integrated, when known.
    pub selection: Option<Vec<ContinuumField>>,
    pub diagnostics: SolveDiagnostics,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    /// Sup-norm distance between successive iterates.
    pub differences: Vec<f64>,
    /// `max_t ||v(t) - F(v)(t)||_inf` after convergence.
    pub residual: f64,
}

impl MildSolution {
    pub fn final_field(&self) -> &ContinuumField {
        self.fields.last().expect("solutions hold at least the initial field")
    }

    /// Sup norm over all stored times.
    pub fn sup_norm(&self) -> f64 {
        self.fields.iter().map(|f| f.sup_norm()).fold(0.0, f64::max)
    }

    /// Index of the stored time closest to `t`.
    pub fn time_index(&self, t: f64) -> usize {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// Piecewise-linear table of `h_K` on `[-1, 1]`, used for large `K`.
struct ReactionTable {
    values: Vec<f64>,
}

/// Above this `K` the reaction is tabulated instead of evaluated exactly.
pub const DIRECT_EVAL_MAX_K: usize = 1000;
const TABLE_INTERVALS: usize = 1 << 16;

impl ReactionTable {
    fn new(spec: &ReactionSpec) -> Self {
        let values = (0..=TABLE_INTERVALS)
            .into_par_iter()
            .map(|j| spec.h(-1.0 + 2.0 * j as f64 / TABLE_INTERVALS as f64))
            .collect();
        Self { values }
    }

    fn eval(&self, q: f64) -> f64 {
        if q <= -1.0 {
            return -1.0;
        }
        if q >= 1.0 {
            return 1.0;
        }
        let s = (q + 1.0) * 0.5 * TABLE_INTERVALS as f64;
        let j = (s.floor() as usize).min(TABLE_INTERVALS - 1);
        let f = s - j as f64;
        self.values[j] * (1.0 - f) + self.values[j + 1] * f
    }
}

enum Nonlinearity<'a> {
    Exact(&'a ReactionSpec),
    Table(ReactionTable),
}

impl Nonlinearity<'_> {
    fn eval(&self, q: f64) -> f64 {
        match self {
            Nonlinearity::Exact(spec) => spec.h(q),
            Nonlinearity::Table(t) => t.eval(q),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub steps: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Number of consecutive time windows solved one after another.
    pub windows: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            steps: 500,
            tol: 1e-10,
            max_iter: 50,
            windows: 1,
        }
    }
}

/// Mild solution of the finite-`K` equation on `[0, tau]` by Picard iteration.
pub fn picard_solve_finite_k(
    v0: &ContinuumField,
    problem: &LimitProblem,
    tau: f64,
    options: &PicardOptions,
) -> Result<MildSolution, LimitPdeError> {
    let k = problem.reaction.k().ok_or(ReactionError::NeedsFiniteK)?;
    let nonlinearity = if k > DIRECT_EVAL_MAX_K {
        Nonlinearity::Table(ReactionTable::new(&problem.reaction))
    } else {
        Nonlinearity::Exact(&problem.reaction)
    };
    picard_solve_with(v0, problem, tau, options, &nonlinearity)
}

fn picard_solve_with(
    v0: &ContinuumField,
    problem: &LimitProblem,
    tau: f64,
    options: &PicardOptions,
    h: &Nonlinearity<'_>,
) -> Result<MildSolution, LimitPdeError> {
    if !(tau > 0.0) {
        return Err(LimitPdeError::NonPositiveTime(tau));
    }
    let norm = v0.sup_norm();
    if norm > 1.0 + 1e-12 {
        return Err(LimitPdeError::InitialOutOfRange(norm));
    }
    if options.steps == 0 || options.windows == 0 || options.windows > options.steps {
        return Err(LimitPdeError::InvalidParameter {
            field: "steps/windows",
            reason: "need 1 <= windows <= steps".into(),
        });
    }
    let steps = options.steps;
    let dt = tau / steps as f64;
    let times = uniform_times(tau, steps);
    let prop = Propagator::new(&problem.semigroup(), v0.dim, v0.m, dt);
    let eval_h = |v: &[f64]| -> Vec<f64> { v.iter().map(|&q| h.eval(q)).collect() };

    let mut fields: Vec<Vec<f64>> = vec![v0.values.clone(); steps + 1];
    let mut selections: Vec<Vec<f64>> = vec![eval_h(&v0.values); steps + 1];
    let mut selection_hat: Vec<Vec<Complex64>> = Vec::with_capacity(steps + 1);
    selection_hat.push(prop.spectrum(&selections[0]));
    let mut j_state = prop.spectrum(&v0.values);
    let mut differences = Vec::new();
    let mut iterations = 0;

    let bounds: Vec<usize> = (0..=options.windows)
        .map(|w| w * steps / options.windows)
        .collect();
    for win in bounds.windows(2) {
        let (start, end) = (win[0], win[1]);
        for n in start + 1..=end {
            fields[n] = fields[start].clone();
        }
        let mut converged = false;
        let mut window_diffs = Vec::new();
        for _ in 0..options.max_iter {
            let w_hat: Vec<Vec<Complex64>> = (start + 1..=end)
                .into_par_iter()
                .map(|n| prop.spectrum(&eval_h(&fields[n])))
                .collect();
            let mut j = j_state.clone();
            let mut spectra = Vec::with_capacity(end - start);
            for (offset, next) in w_hat.iter().enumerate() {
                let prev = if offset == 0 {
                    &selection_hat[start]
                } else {
                    &w_hat[offset - 1]
                };
                prop.advance(&mut j, prev, next);
                spectra.push(j.clone());
            }
            let new: Vec<Vec<f64>> = spectra.par_iter().map(|s| prop.values(s)).collect();
            let diff = new
                .iter()
                .zip(&fields[start + 1..=end])
                .map(|(a, b)| sup_distance(a, b))
                .fold(0.0, f64::max);
            for (offset, v) in new.into_iter().enumerate() {
                fields[start + 1 + offset] = v;
            }
            iterations += 1;
            window_diffs.push(diff);
            if diff < options.tol {
                converged = true;
                break;
            }
        }
        differences.extend_from_slice(&window_diffs);
        if !converged {
            return Err(LimitPdeError::NotConverged {
                iterations,
                last_diff: *window_diffs.last().unwrap_or(&f64::NAN),
                contraction: contraction_estimate(&window_diffs),
            });
        }
        // Advance the recursion state to the end of the window with the converged fields.
        for n in start + 1..=end {
            selections[n] = eval_h(&fields[n]);
            selection_hat.push(prop.spectrum(&selections[n]));
            prop.advance(&mut j_state, &selection_hat[n - 1], &selection_hat[n]);
        }
    }

    let check = prop.sweep(&v0.values, &selections);
    let residual = check
        .iter()
        .zip(&fields)
        .map(|(a, b)| sup_distance(a, b))
        .fold(0.0, f64::max);
    let wrap = |v: Vec<f64>| ContinuumField {
        dim: v0.dim,
        m: v0.m,
        values: v,
    };
    Ok(MildSolution {
        times,
        fields: fields.into_iter().map(wrap).collect(),
        selection: Some(selections.into_iter().map(wrap).collect()),
        diagnostics: SolveDiagnostics {
            iterations,
            differences,
            residual,
        },
    })
}

/// Ratio of the last two successive differences (`0` when undefined).
pub fn contraction_estimate(differences: &[f64]) -> f64 {
    match differences {
        [.., a, b] if *a > 0.0 => b / a,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneVariant {
    /// Start from `1`, iterate with the right-continuous `h_inf`: decreasing sequence.
    Max,
    /// Start from `-1`, iterate with the left-continuous `h_inf`: increasing sequence.
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSequence {
    pub variant: MonotoneVariant,
    pub times: Vec<f64>,
    /// The last iterate at every time.
    pub last: Vec<ContinuumField>,
    /// Every iterate when requested (index 0 is the constant start).
    pub all: Option<Vec<Vec<ContinuumField>>>,
    pub differences: Vec<f64>,
    /// Whether every iterate is ordered with respect to the previous one.
    pub monotone: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneOptions {
    pub steps: usize,
    pub max_iter: usize,
    /// Stop once successive iterates differ by less than this.
    pub tol: f64,
    pub keep_all: bool,
}

impl Default for MonotoneOptions {
    fn default() -> Self {
        Self {
            steps: 500,
            max_iter: 200,
            tol: 1e-12,
            keep_all: false,
        }
    }
}

/// Ordering slack for the monotone chains (FFT rounding).
pub const ORDER_TOL: f64 = 1e-12;

struct MonotoneRun<'a> {
    variant: MonotoneVariant,
    rho: f64,
    prop: &'a Propagator,
    v0: &'a [f64],
    current: Vec<Vec<f64>>,
}

impl MonotoneRun<'_> {
    fn step(&mut self) -> (f64, bool) {
        let rho = self.rho;
        let h: fn(f64, f64) -> f64 = match self.variant {
            MonotoneVariant::Max => h_inf_right,
            MonotoneVariant::Min => h_inf,
        };
        let w: Vec<Vec<f64>> = self
            .current
            .par_iter()
            .map(|v| v.iter().map(|&q| h(q, rho)).collect())
            .collect();
        let next = self.prop.sweep(self.v0, &w);
        let mut diff: f64 = 0.0;
        let mut ordered = true;
        for (new, old) in next.iter().zip(&self.current) {
            for (a, b) in new.iter().zip(old) {
                diff = diff.max((a - b).abs());
                let ok = match self.variant {
                    MonotoneVariant::Max => *a <= *b + ORDER_TOL,
                    MonotoneVariant::Min => *a >= *b - ORDER_TOL,
                };
                ordered &= ok;
            }
        }
        self.current = next;
        (diff, ordered)
    }
}

fn monotone_start(variant: MonotoneVariant, len: usize, steps: usize) -> Vec<Vec<f64>> {
    let c = match variant {
        MonotoneVariant::Max => 1.0,
        MonotoneVariant::Min => -1.0,
    };
    vec![vec![c; len]; steps + 1]
}

/// Every iterate of one monotone sequence: `[iterate][time][node]`.
type IterateHistory = Vec<Vec<Vec<f64>>>;

/// Monotone iterates for the inclusion with `h_inf`.
pub fn monotone_iterates(
    v0: &ContinuumField,
    problem: &LimitProblem,
    tau: f64,
    variant: MonotoneVariant,
    options: &MonotoneOptions,
) -> Result<MonotoneSequence, LimitPdeError> {
    let env = run_monotone(v0, problem, tau, &[variant], options)?;
    Ok(env.into_iter().next().expect("one variant requested").0)
}

fn run_monotone(
    v0: &ContinuumField,
    problem: &LimitProblem,
    tau: f64,
    variants: &[MonotoneVariant],
    options: &MonotoneOptions,
) -> Result<Vec<(MonotoneSequence, IterateHistory)>, LimitPdeError> {
    if !(tau > 0.0) {
        return Err(LimitPdeError::NonPositiveTime(tau));
    }
    if v0.sup_norm() > 1.0 + 1e-12 {
        return Err(LimitPdeError::InitialOutOfRange(v0.sup_norm()));
    }
    let steps = options.steps.max(1);
    let dt = tau / steps as f64;
    let times = uniform_times(tau, steps);
    let prop = Propagator::new(&problem.semigroup(), v0.dim, v0.m, dt);
    let wrap = |v: &Vec<f64>| ContinuumField {
        dim: v0.dim,
        m: v0.m,
        values: v.clone(),
    };
    let mut out = Vec::new();
    for &variant in variants {
        let mut run = MonotoneRun {
            variant,
            rho: problem.rho(),
            prop: &prop,
            v0: &v0.values,
            current: monotone_start(variant, v0.values.len(), steps),
        };
        let mut history = vec![run.current.clone()];
        let mut differences = Vec::new();
        let mut monotone = true;
        for _ in 0..options.max_iter {
            let (diff, ordered) = run.step();
            differences.push(diff);
            monotone &= ordered;
            history.push(run.current.clone());
            if diff < options.tol {
                break;
            }
        }
        let seq = MonotoneSequence {
            variant,
            times: times.clone(),
            last: run.current.iter().map(wrap).collect(),
            all: options
                .keep_all
                .then(|| history.iter().map(|it| it.iter().map(wrap).collect()).collect()),
            differences,
            monotone,
        };
        out.push((seq, history));
    }
    Ok(out)
}

/// Maximal and minimal monotone constructions run side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneEnvelope {
    pub max: MonotoneSequence,
    pub min: MonotoneSequence,
    /// `-1 <= W^1 <= ... <= W^n <= V^n <= ... <= V^1 <= 1` at every node.
    pub chain_holds: bool,
    /// `max_x (V(t) - W(t))` for the last iterates, per time.
    pub gap: Vec<f64>,
}

impl MonotoneEnvelope {
    pub fn gap_at(&self, t: f64) -> f64 {
        let idx = self.max.last.len().saturating_sub(1).min(
            self.max
                .times
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0),
        );
        self.gap[idx]
    }
}

pub fn monotone_envelope(
    v0: &ContinuumField,
    problem: &LimitProblem,
    tau: f64,
    options: &MonotoneOptions,
) -> Result<MonotoneEnvelope, LimitPdeError> {
    let mut runs = run_monotone(
        v0,
        problem,
        tau,
        &[MonotoneVariant::Max, MonotoneVariant::Min],
        &MonotoneOptions {
            keep_all: options.keep_all,
            ..*options
        },
    )?;
    let (min, min_hist) = runs.pop().expect("two runs");
    let (max, max_hist) = runs.pop().expect("two runs");
    let mut chain = max.monotone && min.monotone;
    let depth = max_hist.len().max(min_hist.len());
    for n in 1..depth {
        let v = &max_hist[n.min(max_hist.len() - 1)];
        let w = &min_hist[n.min(min_hist.len() - 1)];
        for (vt, wt) in v.iter().zip(w) {
            for (a, b) in vt.iter().zip(wt) {
                if *b > *a + ORDER_TOL || *a > 1.0 + ORDER_TOL || *b < -1.0 - ORDER_TOL {
                    chain = false;
                }
            }
        }
    }
    let gap = max
        .last
        .iter()
        .zip(&min.last)
        .map(|(v, w)| {
            v.values
                .iter()
                .zip(&w.values)
                .map(|(a, b)| a - b)
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(MonotoneEnvelope {
        max,
        min,
        chain_holds: chain,
        gap,
    })
}

/// The three explicit spatially constant solutions from the same initial datum `2 rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonuniquenessTrio {
    pub rho: f64,
    pub beta: f64,
}

impl NonuniquenessTrio {
    pub fn new(rho: f64, beta: f64) -> Result<Self, LimitPdeError> {
        if !((0.0..=0.5).contains(&rho) && beta >= 0.0 && 2.0 * rho < 1.0 / (1.0 + 2.0 * beta)) {
            return Err(LimitPdeError::RegimeViolated { rho, beta });
        }
        Ok(Self { rho, beta })
    }

    fn lambda(&self) -> f64 {
        2.0 * self.beta + 1.0
    }

    /// `2 rho e^{-2 beta t}`, selection `w = v`.
    pub fn v1(&self, t: f64) -> f64 {
        2.0 * self.rho * (-2.0 * self.beta * t).exp()
    }

    /// `2 rho + (1/(1+2beta) - 2 rho)(1 - e^{-(2beta+1)t})`, selection `w = 1`.
    pub fn v2(&self, t: f64) -> f64 {
        2.0 * self.rho + (1.0 / self.lambda() - 2.0 * self.rho) * -(-self.lambda() * t).exp_m1()
    }

    /// `2 rho`, selection `w = 2 rho (2 beta + 1)`.
    pub fn v3(&self, _t: f64) -> f64 {
        2.0 * self.rho
    }

    pub fn value(&self, which: usize, t: f64) -> f64 {
        match which {
            1 => self.v1(t),
            2 => self.v2(t),
            _ => self.v3(t),
        }
    }

    pub fn selection(&self, which: usize, t: f64) -> f64 {
        match which {
            1 => self.v1(t),
            2 => 1.0,
            _ => 2.0 * self.rho * self.lambda(),
        }
    }

    pub fn initial_derivatives(&self) -> [f64; 3] {
        [
            -4.0 * self.beta * self.rho,
            -2.0 * self.rho * self.lambda() + 1.0,
            0.0,
        ]
    }

    /// Solution `which` (1, 2 or 3) sampled on `times` and a constant `dim`-d grid.
    pub fn solution(
        &self,
        which: usize,
        times: &[f64],
        dim: usize,
        m: usize,
    ) -> Result<MildSolution, LimitPdeError> {
        let fields = times
            .iter()
            .map(|&t| ContinuumField::constant(dim, m, self.value(which, t)))
            .collect::<Result<Vec<_>, _>>()?;
        let selection = times
            .iter()
            .map(|&t| ContinuumField::constant(dim, m, self.selection(which, t)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(MildSolution {
            times: times.to_vec(),
            fields,
            selection: Some(selection),
            diagnostics: SolveDiagnostics::default(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub times: Vec<f64>,
    /// `||v(t) - S_t v0 - int_0^t S_{t-s} w(s) ds||_inf` per time.
    pub residual: Vec<f64>,
    /// `|v(t)| <= e^{-lambda t} ||v0|| + (1 - e^{-lambda t}) ||w|| / lambda` everywhere.
    pub bound_holds: bool,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.residual.iter().copied().fold(0.0, f64::max)
    }
}

/// Tolerance of the selection test in [`mild_residual`].
pub const SELECTION_TOL: f64 = 1e-9;

/// Residual of the mild formulation for the inclusion, after checking that the
/// stored selection lies in the subdifferential of `H_inf` at every node.
pub fn mild_residual(
    solution: &MildSolution,
    semigroup: &SemigroupSpec,
    rho: f64,
) -> Result<ResidualReport, LimitPdeError> {
    let w = solution
        .selection
        .as_ref()
        .ok_or(LimitPdeError::MissingSelection)?;
    let mut bad = Vec::new();
    let mut count = 0;
    for (n, (v, s)) in solution.fields.iter().zip(w).enumerate() {
        for (idx, (&q, &x)) in v.values.iter().zip(&s.values).enumerate() {
            if !subdiff_contains(q, x, rho, SELECTION_TOL) {
                count += 1;
                if bad.len() < 20 {
                    bad.push((n, idx));
                }
            }
        }
    }
    if count > 0 {
        return Err(LimitPdeError::SelectionInvalid { count, points: bad });
    }
    duhamel_residual(solution, semigroup)
}

/// Residual of `v = S v0 + int S w` for the stored `w`, without a selection check.
pub fn duhamel_residual(
    solution: &MildSolution,
    semigroup: &SemigroupSpec,
) -> Result<ResidualReport, LimitPdeError> {
    let w = solution
        .selection
        .as_ref()
        .ok_or(LimitPdeError::MissingSelection)?;
    let times = &solution.times;
    let v0 = &solution.fields[0];
    if times.len() < 2 {
        return Ok(ResidualReport {
            times: times.clone(),
            residual: vec![0.0; times.len()],
            bound_holds: true,
        });
    }
    let dt = times[1] - times[0];
    let uniform = times
        .windows(2)
        .all(|p| ((p[1] - p[0]) - dt).abs() <= 1e-9 * dt.max(1.0));
    if !uniform || !(dt > 0.0) {
        return Err(LimitPdeError::InvalidParameter {
            field: "times",
            reason: "residuals need a uniform increasing time grid".into(),
        });
    }
    if solution
        .fields
        .iter()
        .chain(w.iter())
        .any(|f| !f.same_grid(v0))
    {
        return Err(LimitPdeError::GridMismatch);
    }
    let prop = Propagator::new(semigroup, v0.dim, v0.m, dt);
    let w_vals: Vec<Vec<f64>> = w.iter().map(|f| f.values.clone()).collect();
    let mapped = prop.sweep(&v0.values, &w_vals);
    let residual = mapped
        .iter()
        .zip(&solution.fields)
        .map(|(a, b)| sup_distance(a, &b.values))
        .collect();
    let lambda = semigroup.lambda;
    let v0n = v0.sup_norm();
    let wn = w.iter().map(|f| f.sup_norm()).fold(0.0, f64::max);
    let bound_holds = times.iter().zip(&solution.fields).all(|(&t, v)| {
        let decay = (-lambda * t).exp();
        let drive = if lambda > 0.0 {
            -(-lambda * t).exp_m1() / lambda
        } else {
            t
        };
        v.sup_norm() <= decay * v0n + drive * wn + 1e-9
    });
    Ok(ResidualReport {
        times: times.clone(),
        residual,
        bound_holds,
    })
}

/// Clip `candidate` into `dH_inf(v)` node by node.
pub fn clip_selection(v: &ContinuumField, candidate: &ContinuumField, rho: f64) -> ContinuumField {
    ContinuumField {
        dim: v.dim,
        m: v.m,
        values: v
            .values
            .iter()
            .zip(&candidate.values)
            .map(|(&q, &w)| subdiff_h_inf(q, rho).clamp(w))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitApproximation {
    pub ks: Vec<usize>,
    /// Sup distance on the window between the solutions for `ks[i]` and `ks[i+1]`.
    pub successive_differences: Vec<f64>,
    /// Whether the successive differences strictly decrease.
    pub is_cauchy: bool,
    pub window: (f64, f64),
    pub regularity: RegularityReport,
    /// Solution at the largest `K`, with selection `h_K(v)` clipped into `dH_inf(v)`.
    pub solution: MildSolution,
}

/// Solve the finite-`K` problem along `ks` and examine the sequence as `K` grows.
///
/// `window` bounds the time interval over which successive solutions are
/// compared; it defaults to `(tau / 10, tau)`.
#[allow(clippy::too_many_arguments)]
pub fn approximate_limit_solution(
    v0: &ContinuumField,
    alpha: f64,
    beta: f64,
    threshold: f64,
    ks: &[usize],
    tau: f64,
    window: Option<(f64, f64)>,
    options: &PicardOptions,
) -> Result<LimitApproximation, LimitPdeError> {
    if ks.is_empty() || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LimitPdeError::InvalidParameter {
            field: "ks",
            reason: "need a nonempty increasing sequence".into(),
        });
    }
    let rho = (threshold - 0.5).abs();
    let regularity = regular_level_check(v0, rho, DEFAULT_GRADIENT_FLOOR);
    let (lo, hi) = window.unwrap_or((0.1 * tau, tau));
    let mut solutions = Vec::with_capacity(ks.len());
    for &k in ks {
        let problem = LimitProblem::new(alpha, beta, ReactionSpec::finite(threshold, k)?)?;
        solutions.push(picard_solve_finite_k(v0, &problem, tau, options)?);
    }
    let successive_differences: Vec<f64> = solutions
        .windows(2)
        .map(|pair| {
            pair[0]
                .times
                .iter()
                .enumerate()
                .filter(|(_, &t)| t >= lo - 1e-12 && t <= hi + 1e-12)
                .map(|(n, _)| pair[0].fields[n].sup_distance(&pair[1].fields[n]))
                .fold(0.0, f64::max)
        })
        .collect();
    let is_cauchy = successive_differences.windows(2).all(|d| d[1] < d[0]);
    let mut solution = solutions.pop().expect("nonempty");
    let selection = solution.selection.take().map(|w| {
        solution
            .fields
            .iter()
            .zip(&w)
            .map(|(v, s)| clip_selection(v, s, rho))
            .collect()
    });
    solution.selection = selection;
    Ok(LimitApproximation {
        ks: ks.to_vec(),
        successive_differences,
        is_cauchy,
        window: (lo, hi),
        regularity,
        solution,
    })
}

/// Fraction of grid nodes within `delta` of the level `level`.
pub fn near_level_fraction(field: &ContinuumField, level: f64, delta: f64) -> f64 {
    field
        .values
        .iter()
        .filter(|&&v| (v - level).abs() < delta)
        .count() as f64
        / field.values.len() as f64
}

/// Default gradient floor `eta` of the regularity validator.
pub const DEFAULT_GRADIENT_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelWitness {
    pub node: usize,
    pub value: f64,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    /// Every node near the levels `+-2 rho` has gradient norm above the floor.
    pub regular: bool,
    /// Finite-difference smoothness heuristic (second differences small against first).
    pub smooth: bool,
    pub level_tolerance: f64,
    pub gradient_floor: f64,
    pub witnesses: Vec<LevelWitness>,
}

/// Whether `+-2 rho` are regular levels of `v0`: at every node within one grid
/// step's variation of a level, the centered-difference gradient exceeds `eta`.
pub fn regular_level_check(v0: &ContinuumField, rho: f64, eta: f64) -> RegularityReport {
    let m = v0.m;
    let d = v0.dim;
    let h = 1.0 / m as f64;
    let stride = |axis: usize| m.pow((d - 1 - axis) as u32);
    let neighbor = |idx: usize, axis: usize, forward: bool| {
        let s = stride(axis);
        let c = (idx / s) % m;
        let moved = if forward { (c + 1) % m } else { (c + m - 1) % m };
        idx + moved * s - c * s
    };
    let vals = &v0.values;
    let mut first: f64 = 0.0;
    let mut second: f64 = 0.0;
    for idx in 0..vals.len() {
        for axis in 0..d {
            let f = vals[neighbor(idx, axis, true)];
            let b = vals[neighbor(idx, axis, false)];
            first = first.max((f - vals[idx]).abs());
            second = second.max((f - 2.0 * vals[idx] + b).abs());
        }
    }
    let smooth = second <= 0.25 * first + 1e-12;
    let level_tolerance = first.max(1e-12);
    let levels = [2.0 * rho, -2.0 * rho];
    let mut witnesses = Vec::new();
    for idx in 0..vals.len() {
        if !levels.iter().any(|l| (vals[idx] - l).abs() <= level_tolerance) {
            continue;
        }
        let grad2: f64 = (0..d)
            .map(|axis| {
                let g = (vals[neighbor(idx, axis, true)] - vals[neighbor(idx, axis, false)])
                    / (2.0 * h);
                g * g
            })
            .sum();
        let gradient_norm = grad2.sqrt();
        if gradient_norm <= eta {
            witnesses.push(LevelWitness {
                node: idx,
                value: vals[idx],
                gradient_norm,
            });
        }
    }
    RegularityReport {
        regular: witnesses.is_empty(),
        smooth,
        level_tolerance,
        gradient_floor: eta,
        witnesses,
    }
}

/// `(v + 1) / 2`, the field in occupation variables.
pub fn to_occupation(v: &ContinuumField) -> ContinuumField {
    v.map(|x| 0.5 * (x + 1.0))
}

/// `2u - 1`, the centered field.
pub fn to_centered(u: &ContinuumField) -> ContinuumField {
    u.map(|x| 2.0 * x - 1.0)
}

/// Whether the reaction spec refers to the discontinuous limit.
pub fn is_limit(spec: &ReactionSpec) -> bool {
    matches!(spec.order(), ReactionOrder::Limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn hat_integrals_series_and_closed_form_agree() {
        for &x in &[0.0099, 0.0101, 0.5, 3.0, 40.0] {
            let (a, b) = hat_integrals(x);
            // composite Simpson oracle
            let n = 20_000;
            let h = 1.0 / n as f64;
            let (mut sa, mut sb) = (0.0, 0.0);
            for j in 0..=n {
                let v = j as f64 * h;
                let w = if j == 0 || j == n {
                    1.0
                } else if j % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                sa += w * v * (-x * v).exp();
                sb += w * (1.0 - v) * (-x * v).exp();
            }
            assert!((a - sa * h / 3.0).abs() < 1e-10, "x={x}");
            assert!((b - sb * h / 3.0).abs() < 1e-10, "x={x}");
        }
        assert_eq!(hat_integrals(0.0), (0.5, 0.5));
    }

    #[test]
    fn semigroup_on_modes() {
        let spec = SemigroupSpec::new(0.7, 2.0).unwrap();
        let one = ContinuumField::constant(1, 32, 1.0).unwrap();
        let t = 0.3;
        let out = apply_semigroup(&spec, t, &one).unwrap();
        assert!(out.values().iter().all(|v| (v - (-0.7 * t).exp()).abs() < 1e-14));
        let k = 3.0;
        let f = ContinuumField::from_fn(1, 32, |x| (2.0 * PI * k * x[0]).cos()).unwrap();
        let out = apply_semigroup(&spec, t, &f).unwrap();
        let factor = (-0.7 * t - 2.0 * t * (2.0 * PI * k).powi(2) / 2.0).exp();
        for (a, b) in out.values().iter().zip(f.values()) {
            assert!((a - factor * b).abs() < 1e-14);
        }
        assert_eq!(apply_semigroup(&spec, 0.0, &f).unwrap(), f);
    }

    #[test]
    fn kernel_rejects_nonpositive_time() {
        assert!(heat_kernel(0.0, &[0.1], &[0.2], KernelMode::Spectral).is_err());
        let a = heat_kernel(0.05, &[0.1], &[0.7], KernelMode::Spectral).unwrap();
        let b = heat_kernel(0.05, &[0.7], &[0.1], KernelMode::WrappedGaussian).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn trio_closed_forms() {
        let trio = NonuniquenessTrio::new(0.1, 1.0).unwrap();
        assert!((trio.v1(0.5) - 0.2 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((trio.v2(0.5) - (0.2 + (1.0 / 3.0 - 0.2) * (1.0 - (-1.5f64).exp()))).abs() < 1e-15);
        assert_eq!(trio.v3(0.5), 0.2);
        let d = trio.initial_derivatives();
        assert!((d[0] + 0.4).abs() < 1e-15);
        assert!((d[1] - (1.0 - 0.6)).abs() < 1e-15);
        assert!(NonuniquenessTrio::new(0.2, 1.0).is_err());
    }

    #[test]
    fn zero_solution_has_zero_residual() {
        let times = uniform_times(1.0, 10);
        let fields: Vec<_> = times
            .iter()
            .map(|_| ContinuumField::constant(1, 8, 0.0).unwrap())
            .collect();
        let sol = MildSolution {
            times,
            selection: Some(fields.clone()),
            fields,
            diagnostics: SolveDiagnostics::default(),
        };
        let r = mild_residual(&sol, &SemigroupSpec::new(3.0, 1.0).unwrap(), 0.2).unwrap();
        assert_eq!(r.max(), 0.0);
        assert!(r.bound_holds);
    }

    #[test]
    fn invalid_selection_is_reported() {
        let times = uniform_times(1.0, 4);
        let fields: Vec<_> = times
            .iter()
            .map(|_| ContinuumField::constant(1, 4, 0.1).unwrap())
            .collect();
        let w: Vec<_> = times
            .iter()
            .map(|_| ContinuumField::constant(1, 4, 0.9).unwrap())
            .collect();
        let sol = MildSolution {
            times,
            fields,
            selection: Some(w),
            diagnostics: SolveDiagnostics::default(),
        };
        let err = mild_residual(&sol, &SemigroupSpec::new(3.0, 1.0).unwrap(), 0.2).unwrap_err();
        assert!(matches!(err, LimitPdeError::SelectionInvalid { count: 20, .. }));
    }

    #[test]
    fn regularity_examples() {
        let sine = ContinuumField::from_fn(1, 512, |x| 0.5 * (2.0 * PI * x[0]).sin()).unwrap();
        let r = regular_level_check(&sine, 0.1, DEFAULT_GRADIENT_FLOOR);
        assert!(r.regular && r.smooth);
        let flat = ContinuumField::constant(1, 64, 0.2).unwrap();
        let r = regular_level_check(&flat, 0.1, DEFAULT_GRADIENT_FLOOR);
        assert!(!r.regular);
        assert_eq!(r.witnesses.len(), 64);
        let touch =
            ContinuumField::from_fn(1, 256, |x| 0.2 + 0.3 * ((2.0 * PI * x[0]).cos() - 1.0))
                .unwrap();
        let r = regular_level_check(&touch, 0.1, DEFAULT_GRADIENT_FLOOR);
        assert!(!r.regular);
        assert!(r.witnesses.iter().any(|w| w.node == 0));
        let kink = ContinuumField::from_fn(1, 256, |x| (x[0] - 0.5).abs()).unwrap();
        assert!(!regular_level_check(&kink, 0.1, DEFAULT_GRADIENT_FLOOR).smooth);
    }

    #[test]
    fn interpolation_is_exact_on_nodes_and_linear_between() {
        let f = ContinuumField::from_fn(2, 8, |x| x[0] + 10.0 * x[1]).unwrap();
        assert!((f.interpolate(&[0.25, 0.5]) - 5.25).abs() < 1e-12);
        assert!((f.interpolate(&[0.3125, 0.5]) - 5.3125).abs() < 1e-12);
    }

    #[test]
    fn constant_picard_solution_stays_constant_in_space() {
        let problem = LimitProblem::new(0.5, 0.2, ReactionSpec::finite(0.3, 8).unwrap()).unwrap();
        let v0 = ContinuumField::constant(1, 16, 0.3).unwrap();
        let sol = picard_solve_finite_k(
            &v0,
            &problem,
            0.5,
            &PicardOptions {
                steps: 100,
                ..Default::default()
            },
        )
        .unwrap();
        for f in &sol.fields {
            let spread = f.values().iter().fold(0.0f64, |a, v| a.max((v - f.values()[0]).abs()));
            assert!(spread < 1e-13);
        }
        assert!(sol.diagnostics.residual < 1e-9);
    }
}
