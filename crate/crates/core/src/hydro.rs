//! Empirical measures, pairings with test functions, and convergence experiments
//! comparing the particle system with the lattice and continuum equations.
//!
//! An experiment runs, for each lattice side `N`:
//!
//! * `replicas` independent particle systems started from product-Bernoulli
//!   configurations with profile `u0^N`;
//! * the lattice equation from the same `u0^N`;
//! * optionally the finite-`K` continuum equation from `2 u0 - 1`.
//!
//! and records `<pi^N, phi>`, `<u^N, phi>`, `<u, phi>` and their distances at
//! every observation time and test function.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discrete_pde::{DiscreteField, DiscretePde, DiscretePdeError, IntegratorConfig};
use crate::dynamics::{
    sample_initial, simulate_with_rng, DynamicsError, SchellingParams, SimulationOptions,
    Snapshot,
};
use crate::lattice::{Configuration, LatticeError, NeighborTable, Neighborhood, TorusGeometry};
use crate::limit_pde::{
    picard_solve_finite_k, ContinuumField, LimitPdeError, LimitProblem, MildSolution,
    PicardOptions,
};
use crate::reaction::{ReactionError, ReactionSpec};
use crate::rng::{experiment_stream, stream_rng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HydroError {
    #[error("test function has {got} samples, the grid has {expected} sites")]
    GridMismatch { got: usize, expected: usize },
    #[error("assumption violated at N={n}: {assumption}")]
    Assumption { n: usize, assumption: String },
    #[error("invalid experiment setting {field}: {reason}")]
    InvalidSetting { field: &'static str, reason: String },
    #[error("time {0} is not on the continuum time grid")]
    OffGrid(f64),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    DiscretePde(#[from] DiscretePdeError),
    #[error(transparent)]
    LimitPde(#[from] LimitPdeError),
    #[error(transparent)]
    Reaction(#[from] ReactionError),
}

/// Test functions of the first coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    One,
    /// `cos(2 pi x_0)`.
    Cos,
    /// `sin(2 pi x_0)`.
    Sin,
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let arg = 2.0 * std::f64::consts::PI * x[0];
        match self {
            TestFunction::One => 1.0,
            TestFunction::Cos => arg.cos(),
            TestFunction::Sin => arg.sin(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::One => "one",
            TestFunction::Cos => "cos",
            TestFunction::Sin => "sin",
        }
    }

    /// Samples at the sites `i / N`.
    pub fn sample(&self, geometry: &TorusGeometry) -> Vec<f64> {
        (0..geometry.site_count())
            .map(|i| self.eval(&geometry.position(i)))
            .collect()
    }
}

/// `<pi^N, phi> = N^{-d} sum_i eta_i phi(i/N)`.
pub fn pair_empirical(config: &Configuration, phi: &[f64]) -> Result<f64, HydroError> {
    let n = config.geometry().site_count();
    if phi.len() != n {
        return Err(HydroError::GridMismatch {
            got: phi.len(),
            expected: n,
        });
    }
    let sum: f64 = config
        .occupancy()
        .iter()
        .zip(phi)
        .filter(|(&b, _)| b == 1)
        .map(|(_, &p)| p)
        .sum();
    Ok(sum / n as f64)
}

/// Riemann sum `N^{-d} sum_i u_i phi(i/N)` over matching grids.
pub fn pair_values(values: &[f64], phi: &[f64]) -> Result<f64, HydroError> {
    if values.len() != phi.len() {
        return Err(HydroError::GridMismatch {
            got: phi.len(),
            expected: values.len(),
        });
    }
    Ok(values.iter().zip(phi).map(|(u, p)| u * p).sum::<f64>() / values.len() as f64)
}

pub fn pair_field(u: &DiscreteField, phi: &[f64]) -> Result<f64, HydroError> {
    pair_values(u.values(), phi)
}

pub fn pair_continuum(v: &ContinuumField, phi: &[f64]) -> Result<f64, HydroError> {
    pair_values(v.values(), phi)
}

/// Initial profiles `u0(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialProfile {
    Constant { value: f64 },
    /// `mean + amplitude sin(2 pi frequency x_0)`.
    Sine {
        mean: f64,
        amplitude: f64,
        frequency: u32,
    },
}

impl InitialProfile {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            InitialProfile::Constant { value } => value,
            InitialProfile::Sine {
                mean,
                amplitude,
                frequency,
            } => mean + amplitude * (2.0 * std::f64::consts::PI * frequency as f64 * x[0]).sin(),
        }
    }

    pub fn on_lattice(&self, geometry: &TorusGeometry) -> DiscreteField {
        DiscreteField::from_fn(*geometry, |x| self.eval(x))
    }

    /// The centered profile `2 u0 - 1` on a continuum grid.
    pub fn centered(&self, dim: usize, m: usize) -> Result<ContinuumField, LimitPdeError> {
        ContinuumField::from_fn(dim, m, |x| 2.0 * self.eval(x) - 1.0)
    }
}

/// Measured constants of the standing assumptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub n: usize,
    /// `min(min u0, 1 - max u0)`.
    pub epsilon: f64,
    pub range_ok: bool,
    /// `N max |grad u0|`.
    pub c0: f64,
    /// Neighborhood diameter.
    pub diameter: usize,
    /// `diameter / (log N)^{1/d}`.
    pub diameter_ratio: f64,
    /// `d = 1` and every offset negative.
    pub one_sided: bool,
}

pub fn validate_assumptions(u0: &DiscreteField, nbhd: &Neighborhood) -> AssumptionReport {
    let g = u0.geometry();
    let n = g.side();
    let epsilon = u0.min().min(1.0 - u0.max());
    let c0 = n as f64 * u0.max_gradient();
    let diameter = nbhd.diameter();
    let diameter_ratio = diameter as f64 / (n as f64).ln().powf(1.0 / g.dim() as f64);
    let one_sided = g.dim() == 1 && nbhd.offsets().iter().all(|o| o[0] < 0);
    AssumptionReport {
        n,
        epsilon,
        range_ok: epsilon > 0.0,
        c0,
        diameter,
        diameter_ratio,
        one_sided,
    }
}

/// How the interaction neighborhood is chosen at each `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NeighborhoodSpec {
    /// Uniform-norm box of fixed radius.
    Box { radius: usize, one_sided: bool },
    /// Explicit offsets.
    Offsets { offsets: Vec<Vec<i64>> },
    /// `d = 1`, offsets `{-1, ..., -K_N}` with `K_N = max(1, floor(c log N))`.
    GrowingK { c: f64 },
}

impl NeighborhoodSpec {
    pub fn build(&self, geometry: &TorusGeometry) -> Result<Neighborhood, HydroError> {
        Ok(match self {
            NeighborhoodSpec::Box { radius, one_sided } => {
                Neighborhood::build_box(geometry, *radius, *one_sided)?
            }
            NeighborhoodSpec::Offsets { offsets } => {
                Neighborhood::from_offsets(geometry.dim(), offsets.clone())?
            }
            NeighborhoodSpec::GrowingK { c } => {
                if geometry.dim() != 1 || !(*c > 0.0) {
                    return Err(HydroError::InvalidSetting {
                        field: "neighborhood",
                        reason: "growing-K mode needs d = 1 and c > 0".into(),
                    });
                }
                let k = ((c * (geometry.side() as f64).ln()).floor() as usize).max(1);
                Neighborhood::build_box(geometry, k, true)?
            }
        })
    }
}

/// Continuum comparison settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSettings {
    /// Grid points per axis; each `N` must divide it.
    pub m: usize,
    /// Time steps on `[0, max time]`.
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub params: SchellingParams,
    pub neighborhood: NeighborhoodSpec,
    pub initial: InitialProfile,
    pub sizes: Vec<usize>,
    pub replicas: usize,
    pub times: Vec<f64>,
    pub test_functions: Vec<TestFunction>,
    pub seed: u64,
    /// Deviation level of the exceedance fractions.
    pub delta: f64,
    pub integrator: IntegratorConfig,
    pub limit: Option<LimitSettings>,
    /// Largest admissible `N max |grad u0^N|`.
    pub c0_bound: f64,
    /// Largest admissible `diameter / (log N)^{1/d}`.
    pub diameter_ratio_bound: f64,
    pub effective_exchanges: bool,
    /// Abort on violated assumptions; when off they are only reported.
    pub enforce_assumptions: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            params: SchellingParams {
                threshold: 0.3,
                beta: 0.2,
                alpha: 0.5,
            },
            neighborhood: NeighborhoodSpec::Box {
                radius: 1,
                one_sided: false,
            },
            initial: InitialProfile::Sine {
                mean: 0.5,
                amplitude: 0.2,
                frequency: 1,
            },
            sizes: vec![64, 128, 256],
            replicas: 20,
            times: vec![0.5],
            test_functions: vec![TestFunction::One, TestFunction::Cos, TestFunction::Sin],
            seed: 2024,
            delta: 0.05,
            integrator: IntegratorConfig::default(),
            limit: None,
            c0_bound: 10.0,
            diameter_ratio_bound: 1.0,
            effective_exchanges: false,
            enforce_assumptions: true,
        }
    }
}

/// One pairing comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRecord {
    pub n: usize,
    pub replica: usize,
    pub time: f64,
    pub test_function: TestFunction,
    pub particle: f64,
    pub discrete: f64,
    pub limit: Option<f64>,
    /// `|<pi^N, phi> - <u^N, phi>|`.
    pub particle_vs_discrete: f64,
    /// `|<u^N, phi> - <u, phi>|`.
    pub discrete_vs_limit: Option<f64>,
    /// `|<pi^N, phi> - <u, phi>|`.
    pub particle_vs_limit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationSummary {
    pub n: usize,
    pub time: f64,
    /// `None` when pooled over all test functions.
    pub test_function: Option<TestFunction>,
    pub samples: usize,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
    /// Fraction of samples with deviation above `delta`.
    pub exceedance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub assumptions: Vec<AssumptionReport>,
    /// Sorted by `(N, replica, time, test function)`.
    pub records: Vec<DeviationRecord>,
    /// Particle-vs-lattice-equation statistics.
    pub summaries: Vec<DeviationSummary>,
    /// `(N, stream)` of every replica.
    pub streams: Vec<(usize, u64)>,
}

impl ExperimentReport {
    pub fn pooled(&self, n: usize, time: f64) -> Option<&DeviationSummary> {
        self.summaries
            .iter()
            .find(|s| s.n == n && s.time == time && s.test_function.is_none())
    }
}

/// Nearest-rank quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn summarize(
    n: usize,
    time: f64,
    test_function: Option<TestFunction>,
    deviations: &[f64],
    delta: f64,
) -> DeviationSummary {
    let mut sorted = deviations.to_vec();
    sorted.sort_by(f64::total_cmp);
    DeviationSummary {
        n,
        time,
        test_function,
        samples: sorted.len(),
        median: median(&sorted),
        p90: quantile(&sorted, 0.9),
        max: sorted.last().copied().unwrap_or(f64::NAN),
        exceedance: sorted.iter().filter(|&&d| d > delta).count() as f64
            / sorted.len().max(1) as f64,
    }
}

fn check_config(cfg: &ExperimentConfig) -> Result<(), HydroError> {
    let bad = |field: &'static str, reason: &str| {
        Err(HydroError::InvalidSetting {
            field,
            reason: reason.into(),
        })
    };
    if cfg.sizes.is_empty() {
        return bad("sizes", "at least one lattice size is needed");
    }
    if cfg.replicas == 0 {
        return bad("replicas", "must be positive");
    }
    if cfg.times.is_empty()
        || cfg.times.windows(2).any(|w| w[0] >= w[1])
        || cfg.times.iter().any(|&t| !(t >= 0.0 && t.is_finite()))
    {
        return bad("times", "must be nonempty, nonnegative and strictly increasing");
    }
    if cfg.test_functions.is_empty() {
        return bad("test_functions", "at least one test function is needed");
    }
    if !(cfg.delta > 0.0) {
        return bad("delta", "must be positive");
    }
    cfg.params.validate()?;
    Ok(())
}

fn violated_assumption(report: &AssumptionReport, cfg: &ExperimentConfig) -> Option<String> {
    if !report.range_ok {
        Some(format!(
            "initial profile must stay in [eps, 1-eps] with eps > 0, got eps = {}",
            report.epsilon
        ))
    } else if report.c0 > cfg.c0_bound {
        Some(format!(
            "gradient bound: N max|grad u0| = {} exceeds {}",
            report.c0, cfg.c0_bound
        ))
    } else if report.diameter_ratio > cfg.diameter_ratio_bound {
        Some(format!(
            "neighborhood size: diameter / (log N)^(1/d) = {} exceeds {}",
            report.diameter_ratio, cfg.diameter_ratio_bound
        ))
    } else {
        None
    }
}

/// Run the particle system, the lattice equation and optionally the continuum
/// equation for every lattice size, and collect the pairings.
pub fn run_convergence_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, HydroError> {
    check_config(cfg)?;
    let t_end = *cfg.times.last().expect("checked nonempty");
    let mut assumptions = Vec::new();
    let mut records = Vec::new();
    let mut streams = Vec::new();
    let mut limit_cache: Option<(usize, MildSolution)> = None;

    for (ni, &n) in cfg.sizes.iter().enumerate() {
        let geometry = TorusGeometry::new(cfg.dim, n)?;
        let nbhd = cfg.neighborhood.build(&geometry)?;
        let table = NeighborTable::new(&geometry, &nbhd)?;
        let u0 = cfg.initial.on_lattice(&geometry);
        let report = validate_assumptions(&u0, &nbhd);
        if cfg.enforce_assumptions {
            if let Some(assumption) = violated_assumption(&report, cfg) {
                return Err(HydroError::Assumption { n, assumption });
            }
        }
        assumptions.push(report);

        let k = table.k();
        let spec = ReactionSpec::finite(cfg.params.threshold, k)?;
        let pde = DiscretePde::new(cfg.params, &table, spec)?;
        let integ = IntegratorConfig {
            obs_times: cfg.times.clone(),
            ..cfg.integrator.clone()
        };
        let discrete = pde.integrate(&u0, &integ)?;
        let discrete_at = |t: f64| {
            &discrete
                .iter()
                .find(|(s, _)| *s == t)
                .expect("integrator reports every observation time")
                .1
        };

        let limit_values: Option<Vec<Vec<f64>>> = match cfg.limit {
            None => None,
            Some(settings) => {
                if settings.m % n != 0 {
                    return Err(HydroError::InvalidSetting {
                        field: "limit.m",
                        reason: format!("grid size {} is not a multiple of N={n}", settings.m),
                    });
                }
                let stale = limit_cache.as_ref().map(|(kk, _)| *kk != k).unwrap_or(true);
                if stale {
                    let v0 = cfg.initial.centered(cfg.dim, settings.m)?;
                    let problem = LimitProblem::new(cfg.params.alpha, cfg.params.beta, spec)?;
                    let tau = t_end.max(f64::MIN_POSITIVE);
                    let sol = picard_solve_finite_k(
                        &v0,
                        &problem,
                        tau,
                        &PicardOptions {
                            steps: settings.steps,
                            max_iter: 200,
                            ..Default::default()
                        },
                    )?;
                    limit_cache = Some((k, sol));
                }
                let sol = &limit_cache.as_ref().expect("just filled").1;
                let mut per_time = Vec::new();
                for &t in &cfg.times {
                    let field = limit_field_at(sol, t)?;
                    per_time.push(
                        (0..geometry.site_count())
                            .map(|i| 0.5 * (field.interpolate(&geometry.position(i)) + 1.0))
                            .collect(),
                    );
                }
                Some(per_time)
            }
        };

        let phis: Vec<Vec<f64>> = cfg.test_functions.iter().map(|f| f.sample(&geometry)).collect();
        let discrete_pairs: Vec<Vec<f64>> = cfg
            .times
            .iter()
            .map(|&t| {
                phis.iter()
                    .map(|phi| pair_field(discrete_at(t), phi))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        let limit_pairs: Option<Vec<Vec<f64>>> = limit_values
            .as_ref()
            .map(|lv| {
                lv.iter()
                    .map(|vals| {
                        phis.iter()
                            .map(|phi| pair_values(vals, phi))
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()?;

        let options = SimulationOptions {
            effective_exchanges: cfg.effective_exchanges,
            ..Default::default()
        };
        let replica_pairs: Vec<Vec<Vec<f64>>> = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| -> Result<Vec<Vec<f64>>, HydroError> {
                let mut rng = stream_rng(cfg.seed, experiment_stream(ni, r));
                let init = sample_initial(&u0, &mut rng)?;
                let traj =
                    simulate_with_rng(&cfg.params, &table, init, t_end, &cfg.times, &mut rng, options)?;
                cfg.times
                    .iter()
                    .map(|&t| {
                        let idx = traj
                            .times
                            .iter()
                            .position(|&s| s == t)
                            .expect("trajectory records every observation time");
                        let config = match &traj.snapshots[idx] {
                            Snapshot::Full(c) => c,
                            Snapshot::Blocks { .. } => unreachable!("full snapshots requested"),
                        };
                        phis.iter()
                            .map(|phi| pair_empirical(config, phi))
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?;

        for (r, pairs) in replica_pairs.iter().enumerate() {
            streams.push((n, experiment_stream(ni, r)));
            for (ti, &t) in cfg.times.iter().enumerate() {
                for (fi, &f) in cfg.test_functions.iter().enumerate() {
                    let particle = pairs[ti][fi];
                    let discrete = discrete_pairs[ti][fi];
                    let limit = limit_pairs.as_ref().map(|lp| lp[ti][fi]);
                    records.push(DeviationRecord {
                        n,
                        replica: r,
                        time: t,
                        test_function: f,
                        particle,
                        discrete,
                        limit,
                        particle_vs_discrete: (particle - discrete).abs(),
                        discrete_vs_limit: limit.map(|l| (discrete - l).abs()),
                        particle_vs_limit: limit.map(|l| (particle - l).abs()),
                    });
                }
            }
        }
    }

    let fn_index = |f: TestFunction| cfg.test_functions.iter().position(|&g| g == f);
    records.sort_by(|a, b| {
        (a.n, a.replica)
            .cmp(&(b.n, b.replica))
            .then(a.time.total_cmp(&b.time))
            .then(fn_index(a.test_function).cmp(&fn_index(b.test_function)))
    });

    let mut summaries = Vec::new();
    for &n in &cfg.sizes {
        for &t in &cfg.times {
            let sel = |f: Option<TestFunction>| -> Vec<f64> {
                records
                    .iter()
                    .filter(|r| r.n == n && r.time == t && f.is_none_or(|f| r.test_function == f))
                    .map(|r| r.particle_vs_discrete)
                    .collect()
            };
            summaries.push(summarize(n, t, None, &sel(None), cfg.delta));
            for &f in &cfg.test_functions {
                summaries.push(summarize(n, t, Some(f), &sel(Some(f)), cfg.delta));
            }
        }
    }

    Ok(ExperimentReport {
        config: cfg.clone(),
        assumptions,
        records,
        summaries,
        streams,
    })
}

fn limit_field_at(sol: &MildSolution, t: f64) -> Result<&ContinuumField, HydroError> {
    let idx = sol.time_index(t);
    let dt = if sol.times.len() > 1 {
        sol.times[1] - sol.times[0]
    } else {
        1.0
    };
    if (sol.times[idx] - t).abs() > 1e-9 * dt.max(1.0) {
        return Err(HydroError::OffGrid(t));
    }
    Ok(&sol.fields[idx])
}

/// `max |u^N(t, i) - (v(t, i/N) + 1)/2|` over sites and over the trajectory
/// times inside `window`; every such time must be a node of the continuum grid.
pub fn discrete_vs_limit_distance(
    trajectory: &[(f64, DiscreteField)],
    limit: &MildSolution,
    window: (f64, f64),
) -> Result<f64, HydroError> {
    let mut out: f64 = 0.0;
    for (t, u) in trajectory {
        if *t < window.0 - 1e-12 || *t > window.1 + 1e-12 {
            continue;
        }
        let v = limit_field_at(limit, *t)?;
        let g = u.geometry();
        for (i, &ui) in u.values().iter().enumerate() {
            let w = 0.5 * (v.interpolate(&g.position(i)) + 1.0);
            out = out.max((ui - w).abs());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_examples() {
        let c: Configuration = "1 4\n0101\n".parse().unwrap();
        let phi: Vec<f64> = (0..4).map(|i| i as f64 / 4.0).collect();
        assert!((pair_empirical(&c, &phi).unwrap() - 0.25).abs() < 1e-15);
        let one = TestFunction::One.sample(c.geometry());
        assert_eq!(pair_empirical(&c, &one).unwrap(), 0.5);
        assert!(pair_empirical(&c, &[1.0; 3]).is_err());
        let g = TorusGeometry::new(1, 256).unwrap();
        let u = DiscreteField::from_fn(g, |x| (2.0 * std::f64::consts::PI * x[0]).sin().powi(2));
        let val = pair_field(&u, &TestFunction::One.sample(&g)).unwrap();
        assert!((val - 0.5).abs() < 1e-6);
    }

    #[test]
    fn assumption_constants() {
        let g = TorusGeometry::new(1, 128).unwrap();
        let nb = Neighborhood::build_box(&g, 1, false).unwrap();
        let flat = DiscreteField::constant(g, 0.5);
        let r = validate_assumptions(&flat, &nb);
        assert_eq!((r.epsilon, r.c0), (0.5, 0.0));
        assert!((r.diameter_ratio - 2.0 / 128f64.ln()).abs() < 1e-15);
        assert!(!r.one_sided);
        let sine = InitialProfile::Sine {
            mean: 0.5,
            amplitude: 0.2,
            frequency: 1,
        }
        .on_lattice(&g);
        let r = validate_assumptions(&sine, &nb);
        assert!((r.c0 - 0.4 * std::f64::consts::PI).abs() < 1e-3);
        assert!((r.epsilon - 0.3).abs() < 1e-12);
    }

    #[test]
    fn summary_statistics() {
        let s = summarize(8, 0.5, None, &[0.3, 0.01, 0.02, 0.06], 0.05);
        assert_eq!(s.median, 0.04);
        assert_eq!(s.max, 0.3);
        assert_eq!(s.exceedance, 0.5);
    }

    #[test]
    fn growing_k_is_one_sided() {
        let g = TorusGeometry::new(1, 256).unwrap();
        let nb = NeighborhoodSpec::GrowingK { c: 1.0 }.build(&g).unwrap();
        assert_eq!(nb.size(), 5);
        assert!(nb.offsets().iter().all(|o| o[0] < 0));
    }
}
