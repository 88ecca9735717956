//! The lattice reaction-diffusion system
//!
//! ```text
//! d/dt u(i) = 2 alpha N^2 (Delta u)(i) + beta (1 - 2 u(i)) + G(i, u)
//! ```
//!
//! with `Delta` the nearest-neighbor Laplacian on the torus.
//!
//! [`Scheme::ExponentialImex`] advances `u <- E_dt (u + dt R(u))`, where `R` is the
//! reaction and `E_dt = exp(2 alpha N^2 dt Delta)` is applied exactly through the
//! discrete Fourier transform. Both factors are order preserving once
//! `dt (2 beta + 1) <= 1`, so the scheme inherits the comparison principle and
//! the invariance of `[0, 1]`; the automatic step respects that bound.
//! [`Scheme::ExplicitRk4`] is classical RK4 on the full right-hand side.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::SchellingParams;
use crate::lattice::{NeighborTable, TorusGeometry};
use crate::reaction::{ReactionError, ReactionSpec, TailScratch};
use crate::spectral::PeriodicFft;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretePdeError {
    #[error("field has {got} values but the torus has {expected} sites")]
    LengthMismatch { got: usize, expected: usize },
    #[error("initial value {value} at site {site} is outside [0, 1]")]
    InitialOutOfRange { site: usize, value: f64 },
    #[error("non-finite value at t={time}, site {site}")]
    NonFinite { time: f64, site: usize },
    #[error("value {value} at t={time}, site {site} left [0, 1] by more than 1e-9")]
    RangeExcursion { time: f64, site: usize, value: f64 },
    #[error("time step {0} is not positive and finite")]
    BadStep(f64),
    #[error("observation times must be strictly increasing and nonnegative")]
    ObservationTimes,
    #[error("reaction K={spec_k:?} does not match the neighborhood size {table_k}")]
    CardinalityMismatch { spec_k: Option<usize>, table_k: usize },
    #[error("trajectories have different lengths or times")]
    TrajectoryMismatch,
    #[error(transparent)]
    Reaction(#[from] ReactionError),
}

/// Allowed overshoot of `[0, 1]` before the integrator aborts.
pub const RANGE_SLACK: f64 = 1e-9;

/// A real value per lattice site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteField {
    geometry: TorusGeometry,
    values: Vec<f64>,
}

impl DiscreteField {
    pub fn new(geometry: TorusGeometry, values: Vec<f64>) -> Result<Self, DiscretePdeError> {
        if values.len() != geometry.site_count() {
            return Err(DiscretePdeError::LengthMismatch {
                got: values.len(),
                expected: geometry.site_count(),
            });
        }
        Ok(Self { geometry, values })
    }

    pub fn constant(geometry: TorusGeometry, value: f64) -> Self {
        let n = geometry.site_count();
        Self {
            geometry,
            values: vec![value; n],
        }
    }

    /// Sample `f` at the macroscopic positions `i / N`.
    pub fn from_fn(geometry: TorusGeometry, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..geometry.site_count())
            .map(|i| f(&geometry.position(i)))
            .collect();
        Self { geometry, values }
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// The field `x -> self(x - offset)`.
    pub fn translated(&self, offset: &[i64]) -> Self {
        let mut values = vec![0.0; self.values.len()];
        for (i, &v) in self.values.iter().enumerate() {
            values[self.geometry.shift(i, offset)] = v;
        }
        Self {
            geometry: self.geometry,
            values,
        }
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Values clamped to `[0, 1]`, for reporting.
    pub fn clamped(&self) -> Self {
        Self {
            geometry: self.geometry,
            values: self.values.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    /// `max_{k, i} |u(i + e_k) - u(i)|`.
    pub fn max_gradient(&self) -> f64 {
        let g = &self.geometry;
        let mut out: f64 = 0.0;
        for i in 0..self.values.len() {
            for axis in 0..g.dim() {
                out = out.max((self.values[g.step(i, axis, true)] - self.values[i]).abs());
            }
        }
        out
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    ExponentialImex,
    ExplicitRk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt: StepSize,
    /// Times at which the solution is reported; `0` is always reported first.
    pub obs_times: Vec<f64>,
}

/// The lattice system for fixed parameters, neighborhood and reaction.
#[derive(Debug, Clone)]
pub struct DiscretePde<'a> {
    params: SchellingParams,
    table: &'a NeighborTable,
    spec: ReactionSpec,
}

/// Below this many `(site, neighbor)` pairs the reaction is evaluated serially.
const PARALLEL_WORK: usize = 1 << 14;

/// Largest automatic step of the exponential scheme.
pub const IMEX_MAX_DT: f64 = 1e-3;

impl<'a> DiscretePde<'a> {
    pub fn new(
        params: SchellingParams,
        table: &'a NeighborTable,
        spec: ReactionSpec,
    ) -> Result<Self, DiscretePdeError> {
        if spec.k() != Some(table.k()) {
            return Err(DiscretePdeError::CardinalityMismatch {
                spec_k: spec.k(),
                table_k: table.k(),
            });
        }
        Ok(Self {
            params,
            table,
            spec,
        })
    }

    pub fn geometry(&self) -> &TorusGeometry {
        self.table.geometry()
    }

    pub fn spec(&self) -> &ReactionSpec {
        &self.spec
    }

    fn diffusivity(&self) -> f64 {
        2.0 * self.params.alpha * (self.geometry().side() as f64).powi(2)
    }

    /// Lipschitz estimate of the reaction in the sup norm: `2 beta + 1 + K`.
    pub fn reaction_lipschitz(&self) -> f64 {
        2.0 * self.params.beta + 1.0 + self.table.k() as f64
    }

    /// Automatic step for `scheme`.
    pub fn auto_dt(&self, scheme: Scheme) -> f64 {
        match scheme {
            Scheme::ExponentialImex => IMEX_MAX_DT.min(1.0 / (2.0 * self.params.beta + 2.0)),
            Scheme::ExplicitRk4 => {
                let d = self.geometry().dim() as f64;
                1.0 / (4.0 * self.diffusivity() * d + self.reaction_lipschitz())
            }
        }
    }

    /// `beta (1 - 2 u(i)) + G(i, u)` at every site.
    pub fn reaction(&self, u: &[f64]) -> Vec<f64> {
        let beta = self.params.beta;
        let site = |scratch: &mut TailScratch, i: usize| {
            beta * (1.0 - 2.0 * u[i]) + self.spec.lattice_reaction_with(self.table, u, i, scratch)
        };
        // Small or cheap lattices are not worth the thread hand-off.
        if u.len() * (self.table.k() + 1) < PARALLEL_WORK {
            let mut scratch = TailScratch::default();
            return (0..u.len()).map(|i| site(&mut scratch, i)).collect();
        }
        (0..u.len())
            .into_par_iter()
            .map_init(TailScratch::default, site)
            .collect()
    }

    /// Nearest-neighbor Laplacian.
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let g = self.geometry();
        (0..u.len())
            .map(|i| {
                (0..g.dim())
                    .map(|axis| u[g.step(i, axis, true)] + u[g.step(i, axis, false)] - 2.0 * u[i])
                    .sum()
            })
            .collect()
    }

    /// Full right-hand side.
    pub fn rhs(&self, u: &DiscreteField) -> DiscreteField {
        let lap = self.laplacian(u.values());
        let reac = self.reaction(u.values());
        let c = self.diffusivity();
        DiscreteField {
            geometry: *u.geometry(),
            values: lap.iter().zip(&reac).map(|(l, r)| c * l + r).collect(),
        }
    }

    fn heat_multiplier(&self, fft: &PeriodicFft, dt: f64) -> Vec<f64> {
        let n = self.geometry().side() as f64;
        let c = self.diffusivity();
        fft.symbol(|k| {
            let eig: f64 = k
                .iter()
                .map(|&kk| 2.0 * (2.0 * std::f64::consts::PI * kk as f64 / n).cos() - 2.0)
                .sum();
            (c * dt * eig).exp()
        })
    }

    fn rk4_step(&self, u: &[f64], dt: f64) -> Vec<f64> {
        let c = self.diffusivity();
        let f = |v: &[f64]| -> Vec<f64> {
            let lap = self.laplacian(v);
            let reac = self.reaction(v);
            lap.iter().zip(&reac).map(|(l, r)| c * l + r).collect()
        };
        let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + s * y).collect()
        };
        let k1 = f(u);
        let k2 = f(&axpy(u, 0.5 * dt, &k1));
        let k3 = f(&axpy(u, 0.5 * dt, &k2));
        let k4 = f(&axpy(u, dt, &k3));
        (0..u.len())
            .map(|i| u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    }

    /// Integrate from `u0`, reporting the solution at `0` and each observation time.
    pub fn integrate(
        &self,
        u0: &DiscreteField,
        config: &IntegratorConfig,
    ) -> Result<Vec<(f64, DiscreteField)>, DiscretePdeError> {
        if u0.geometry() != self.geometry() {
            return Err(DiscretePdeError::LengthMismatch {
                got: u0.values().len(),
                expected: self.geometry().site_count(),
            });
        }
        for (site, &v) in u0.values().iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(DiscretePdeError::InitialOutOfRange { site, value: v });
            }
        }
        if config.obs_times.windows(2).any(|w| w[0] >= w[1])
            || config.obs_times.iter().any(|&t| !(t >= 0.0 && t.is_finite()))
        {
            return Err(DiscretePdeError::ObservationTimes);
        }
        let dt_max = match config.dt {
            StepSize::Auto => self.auto_dt(config.scheme),
            StepSize::Fixed(dt) => dt,
        };
        if !(dt_max > 0.0 && dt_max.is_finite()) {
            return Err(DiscretePdeError::BadStep(dt_max));
        }

        let fft = PeriodicFft::new(self.geometry().dim(), self.geometry().side());
        let mut cached: Option<(f64, Vec<f64>)> = None;
        let mut out = vec![(0.0, u0.clone())];
        let mut u = u0.values().to_vec();
        let mut t = 0.0;
        for &target in config.obs_times.iter().filter(|&&t| t > 0.0) {
            let span = target - t;
            let steps = (span / dt_max).ceil().max(1.0) as usize;
            let dt = span / steps as f64;
            for s in 0..steps {
                u = match config.scheme {
                    Scheme::ExponentialImex => {
                        if cached.as_ref().map(|(h, _)| *h) != Some(dt) {
                            cached = Some((dt, self.heat_multiplier(&fft, dt)));
                        }
                        let reac = self.reaction(&u);
                        let pre: Vec<f64> =
                            u.iter().zip(&reac).map(|(x, r)| x + dt * r).collect();
                        fft.apply_multiplier(&pre, &cached.as_ref().expect("set above").1)
                    }
                    Scheme::ExplicitRk4 => self.rk4_step(&u, dt),
                };
                let now = if s + 1 == steps {
                    target
                } else {
                    t + (s + 1) as f64 * dt
                };
                check_range(&u, now)?;
            }
            t = target;
            out.push((
                t,
                DiscreteField {
                    geometry: *u0.geometry(),
                    values: u.clone(),
                },
            ));
        }
        Ok(out)
    }
}

fn check_range(u: &[f64], time: f64) -> Result<(), DiscretePdeError> {
    for (site, &v) in u.iter().enumerate() {
        if !v.is_finite() {
            return Err(DiscretePdeError::NonFinite { time, site });
        }
        if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&v) {
            return Err(DiscretePdeError::RangeExcursion {
                time,
                site,
                value: v,
            });
        }
    }
    Ok(())
}

/// Tolerance of [`comparison_check`].
pub const COMPARISON_TOL: f64 = 1e-8;

/// Whether `upper >= lower - 1e-8` at every site and observation time.
pub fn comparison_check(
    upper: &[(f64, DiscreteField)],
    lower: &[(f64, DiscreteField)],
) -> Result<bool, DiscretePdeError> {
    if upper.len() != lower.len() || upper.iter().zip(lower).any(|(a, b)| a.0 != b.0) {
        return Err(DiscretePdeError::TrajectoryMismatch);
    }
    Ok(upper.iter().zip(lower).all(|((_, u), (_, v))| {
        u.values()
            .iter()
            .zip(v.values())
            .all(|(a, b)| *a >= *b - COMPARISON_TOL)
    }))
}

/// `(t, max |grad u(t)|)` along a trajectory.
pub fn gradient_profile(trajectory: &[(f64, DiscreteField)]) -> Vec<(f64, f64)> {
    trajectory
        .iter()
        .map(|(t, u)| (*t, u.max_gradient()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Neighborhood;

    fn setup(n: usize) -> NeighborTable {
        let g = TorusGeometry::new(1, n).unwrap();
        let nb = Neighborhood::from_offsets(1, vec![vec![-1], vec![1]]).unwrap();
        NeighborTable::new(&g, &nb).unwrap()
    }

    #[test]
    fn half_is_stationary() {
        let table = setup(16);
        let p = SchellingParams::new(0.3, 0.4, 0.5).unwrap();
        let pde = DiscretePde::new(p, &table, ReactionSpec::finite(0.3, 2).unwrap()).unwrap();
        let u = DiscreteField::constant(*table.geometry(), 0.5);
        assert!(pde.rhs(&u).values().iter().all(|v| v.abs() < 1e-15));
        let cfg = IntegratorConfig {
            obs_times: vec![1.0],
            ..Default::default()
        };
        let sol = pde.integrate(&u, &cfg).unwrap();
        assert!(sol[1].1.sup_distance(&u) < 1e-12);
    }

    #[test]
    fn constant_rhs_is_scalar_reaction() {
        let table = setup(8);
        let p = SchellingParams::new(0.3, 0.2, 0.5).unwrap();
        let spec = ReactionSpec::finite(0.3, 2).unwrap();
        let pde = DiscretePde::new(p, &table, spec).unwrap();
        let u = DiscreteField::constant(*table.geometry(), 0.2);
        let expected = 0.2 * (1.0 - 0.4) + spec.g(0.2);
        assert!(pde.rhs(&u).values().iter().all(|v| (v - expected).abs() < 1e-14));
    }

    #[test]
    fn gradient_of_sine() {
        let g = TorusGeometry::new(1, 64).unwrap();
        let u = DiscreteField::from_fn(g, |x| 0.5 + 0.2 * (2.0 * std::f64::consts::PI * x[0]).sin());
        let bound = 2.0 * std::f64::consts::PI * 0.2 / 64.0;
        assert!(u.max_gradient() <= bound);
        assert!(u.max_gradient() > 0.99 * bound);
        assert_eq!(
            gradient_profile(&[(0.0, DiscreteField::constant(*u.geometry(), 0.3))]),
            vec![(0.0, 0.0)]
        );
    }

    #[test]
    fn rejects_bad_input() {
        let table = setup(8);
        let p = SchellingParams::new(0.3, 0.2, 0.5).unwrap();
        assert!(DiscretePde::new(p, &table, ReactionSpec::finite(0.3, 3).unwrap()).is_err());
        let pde = DiscretePde::new(p, &table, ReactionSpec::finite(0.3, 2).unwrap()).unwrap();
        let bad = DiscreteField::constant(*table.geometry(), 1.2);
        assert!(pde.integrate(&bad, &IntegratorConfig::default()).is_err());
        assert!(DiscreteField::new(*table.geometry(), vec![0.0; 3]).is_err());
    }
}
