//! One function per subcommand. Each writes its artifacts and returns a JSON summary.

use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use schelling_core::discrete_pde::{DiscreteField, DiscretePde};
use schelling_core::dynamics::{sample_initial, simulate_with_rng, SimulationOptions, Snapshot};
use schelling_core::hydro::{
    pair_empirical, run_convergence_experiment, ExperimentConfig, LimitSettings, TestFunction,
};
use schelling_core::limit_pde::{
    approximate_limit_solution, duhamel_residual, mild_residual, picard_solve_finite_k,
    uniform_times, ContinuumField, LimitProblem, MildSolution, NonuniquenessTrio, PicardOptions,
    SemigroupSpec,
};
use schelling_core::reaction::{gamma_inf_beta, phase_classify};
use schelling_core::rng::stream_rng;
use schelling_core::{NeighborTable, ReactionSpec, TorusGeometry};

use crate::config::{ConfigError, FieldFormat, InitialConfig, RunConfig};
use crate::output::{num, opt, Csv, OutputDir, OutputError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] schelling_core::Error),
    #[error(transparent)]
    Output(#[from] OutputError),
}

fn core<E: Into<schelling_core::Error>>(e: E) -> RunError {
    RunError::Core(e.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    DiscretePde,
    LimitPde,
    Compare,
    Phase,
    Nonuniq,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::DiscretePde => "discrete-pde",
            Command::LimitPde => "limit-pde",
            Command::Compare => "compare",
            Command::Phase => "phase",
            Command::Nonuniq => "nonuniq",
        }
    }
}

pub fn dispatch(command: Command, cfg: &RunConfig, out: &mut OutputDir) -> Result<Value, RunError> {
    let config_name = out.name("config", "json");
    out.write(&config_name, &(cfg.canonical_json() + "\n"))?;
    let summary = match command {
        Command::Simulate => simulate(cfg, out)?,
        Command::DiscretePde => discrete_pde(cfg, out)?,
        Command::LimitPde => limit_pde(cfg, out)?,
        Command::Compare => compare(cfg, out)?,
        Command::Phase => phase(cfg, out)?,
        Command::Nonuniq => nonuniq(cfg, out)?,
    };
    let name = out.name(&format!("{}-summary", command.name()), "json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    out.write(&name, &(text + "\n"))?;
    Ok(summary)
}

fn lattice(cfg: &RunConfig) -> Result<(TorusGeometry, NeighborTable), RunError> {
    let g = TorusGeometry::new(cfg.lattice.dim, cfg.lattice.side).map_err(core)?;
    let nb = cfg.lattice.neighborhood.spec().build(&g).map_err(core)?;
    let table = NeighborTable::new(&g, &nb).map_err(core)?;
    Ok((g, table))
}

fn read_samples(path: &std::path::Path, expected: usize) -> Result<Vec<f64>, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let values = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(str::split_whitespace)
        .map(|w| w.parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ConfigError::Invalid {
            field: "initial.path".into(),
            value: path.display().to_string(),
            constraint: format!("must hold whitespace-separated numbers ({e})"),
        })?;
    if values.len() != expected || values.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(ConfigError::Invalid {
            field: "initial.path".into(),
            value: path.display().to_string(),
            constraint: format!("must hold exactly {expected} values in [0, 1], found {}", values.len()),
        }
        .into());
    }
    Ok(values)
}

fn lattice_initial(cfg: &RunConfig, g: &TorusGeometry) -> Result<DiscreteField, RunError> {
    match &cfg.initial {
        InitialConfig::Samples { path } => {
            let values = read_samples(path, g.site_count())?;
            DiscreteField::new(*g, values).map_err(core)
        }
        other => Ok(other.profile().expect("analytic profile").on_lattice(g)),
    }
}

/// The centered datum `2 u0 - 1` on the continuum grid.
fn continuum_initial(cfg: &RunConfig, dim: usize, m: usize) -> Result<ContinuumField, RunError> {
    match &cfg.initial {
        InitialConfig::Samples { path } => {
            let values = read_samples(path, m.pow(dim as u32))?;
            ContinuumField::new(dim, m, values.iter().map(|u| 2.0 * u - 1.0).collect()).map_err(core)
        }
        other => other.profile().expect("analytic profile").centered(dim, m).map_err(core),
    }
}

fn simulate(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value, RunError> {
    let (g, table) = lattice(cfg)?;
    let params = cfg.model.params();
    let u0 = lattice_initial(cfg, &g)?;
    let sc = &cfg.simulate;
    let options = SimulationOptions {
        effective_exchanges: sc.effective_exchanges,
        ..Default::default()
    };
    // Replica r draws its initial configuration and its events from stream r.
    let runs = (0..sc.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(cfg.seed, r as u64);
            let init = sample_initial(&u0, &mut rng)?;
            simulate_with_rng(&params, &table, init, sc.t_end, &sc.obs_times, &mut rng, options)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(core)?;

    let observables = [TestFunction::Cos, TestFunction::Sin].map(|f| (f.name(), f.sample(&g)));
    let mut csv = Csv::new("trajectory", &["replica", "time", "observable", "value"]);
    let mut counters = Vec::new();
    for (r, tr) in runs.iter().enumerate() {
        for (i, (t, snap)) in tr.times.iter().zip(&tr.snapshots).enumerate() {
            let Snapshot::Full(c) = snap else {
                unreachable!("full snapshots requested")
            };
            csv.row(&[r.to_string(), num(*t), "density".into(), num(snap.density())]);
            for (name, phi) in &observables {
                let v = pair_empirical(c, phi).map_err(core)?;
                csv.row(&[r.to_string(), num(*t), (*name).into(), num(v)]);
            }
            if sc.snapshots {
                let name = out.name(&format!("snapshot-r{r}-t{i}"), "txt");
                out.write(&name, &c.to_text())?;
            }
        }
        counters.push(serde_json::to_value(tr.counters).expect("counters serialize"));
    }
    let name = out.name("simulate", "csv");
    out.write(&name, &csv.finish())?;
    Ok(json!({
        "seed": cfg.seed,
        "streams": (0..sc.replicas).collect::<Vec<_>>(),
        "k": table.k(),
        "event_counters": counters,
    }))
}

fn discrete_pde(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value, RunError> {
    let (g, table) = lattice(cfg)?;
    let spec = ReactionSpec::finite(cfg.model.threshold, table.k()).map_err(core)?;
    let pde = DiscretePde::new(cfg.model.params(), &table, spec).map_err(core)?;
    let u0 = lattice_initial(cfg, &g)?;
    let dc = &cfg.discrete_pde;
    let integrator = dc.integrator(dc.obs_times.clone());
    let traj = pde.integrate(&u0, &integrator).map_err(core)?;

    let mut index = Csv::new("discrete-pde-times", &["index", "time", "min", "max", "mean"]);
    for (i, (t, u)) in traj.iter().enumerate() {
        let mean = u.values().iter().sum::<f64>() / u.values().len() as f64;
        index.row(&[i.to_string(), num(*t), num(u.min()), num(u.max()), num(mean)]);
        match dc.format {
            FieldFormat::Csv => {
                let mut csv = Csv::new("discrete-pde-field", &["site", "value"]);
                for (site, v) in u.values().iter().enumerate() {
                    csv.row(&[site.to_string(), num(*v)]);
                }
                out.write(&out.name(&format!("discrete-pde-t{i}"), "csv"), &csv.finish())?;
            }
            FieldFormat::Text => {
                let mut text = format!("{} {}\n", g.dim(), g.side());
                for v in u.values() {
                    text.push_str(&format!("{v:.16e}\n"));
                }
                out.write(&out.name(&format!("discrete-pde-t{i}"), "txt"), &text)?;
            }
        }
    }
    out.write(&out.name("discrete-pde-times", "csv"), &index.finish())?;
    Ok(json!({
        "k": table.k(),
        "dt": pde.auto_dt(dc.scheme),
        "dt_fixed": dc.dt,
        "times": traj.iter().map(|(t, _)| *t).collect::<Vec<_>>(),
    }))
}

fn write_field_series(
    out: &mut OutputDir,
    kind: &str,
    sol: &MildSolution,
    stride: usize,
) -> Result<(), RunError> {
    let dim = sol.fields[0].dim();
    let header: &[&str] = if dim == 1 { &["t", "x", "v"] } else { &["t", "x", "y", "v"] };
    let mut csv = Csv::new(kind, header);
    let last = sol.times.len() - 1;
    for (n, (t, field)) in sol.times.iter().zip(&sol.fields).enumerate() {
        if n % stride != 0 && n != last {
            continue;
        }
        for (idx, v) in field.values().iter().enumerate() {
            let mut row = vec![num(*t)];
            row.extend(field.node_position(idx).into_iter().map(num));
            row.push(num(*v));
            csv.row(&row);
        }
    }
    out.write(&out.name(kind, "csv"), &csv.finish())?;
    Ok(())
}

fn limit_pde(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value, RunError> {
    let lc = &cfg.limit_pde;
    let m = &cfg.model;
    let v0 = continuum_initial(cfg, cfg.lattice.dim, lc.m)?;
    let options = PicardOptions {
        steps: lc.steps,
        tol: lc.tol,
        max_iter: lc.max_iter,
        windows: 1,
    };
    let (sol, report, extra) = if let [k] = lc.ks[..] {
        let spec = ReactionSpec::finite(m.threshold, k).map_err(core)?;
        let problem = LimitProblem::new(m.alpha, m.beta, spec).map_err(core)?;
        let sol = picard_solve_finite_k(&v0, &problem, lc.tau, &options).map_err(core)?;
        let report = duhamel_residual(&sol, &problem.semigroup()).map_err(core)?;
        (sol, report, json!({ "k": k }))
    } else {
        let approx = approximate_limit_solution(
            &v0, m.alpha, m.beta, m.threshold, &lc.ks, lc.tau, None, &options,
        )
        .map_err(core)?;
        let sg = SemigroupSpec::new(2.0 * m.beta + 1.0, 4.0 * m.alpha).map_err(core)?;
        let rho = (m.threshold - 0.5).abs();
        let report = mild_residual(&approx.solution, &sg, rho).map_err(core)?;
        let extra = json!({
            "ks": approx.ks,
            "successive_differences": approx.successive_differences,
            "is_cauchy": approx.is_cauchy,
            "window": [approx.window.0, approx.window.1],
            "regularity": approx.regularity,
        });
        (approx.solution, report, extra)
    };
    write_field_series(out, "limit-pde", &sol, lc.stride)?;
    let mut csv = Csv::new("limit-pde-residual", &["t", "residual"]);
    for (t, r) in report.times.iter().zip(&report.residual) {
        csv.row(&[num(*t), num(*r)]);
    }
    out.write(&out.name("limit-pde-residual", "csv"), &csv.finish())?;
    Ok(json!({
        "solver": extra,
        "diagnostics": sol.diagnostics,
        "max_residual": report.max(),
        "bound_holds": report.bound_holds,
    }))
}

fn compare(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value, RunError> {
    let cc = &cfg.compare;
    let Some(initial) = cfg.initial.profile() else {
        return Err(ConfigError::Invalid {
            field: "initial.kind".into(),
            value: "samples".into(),
            constraint: "compare needs an analytic profile (constant or sine) to sample at every N".into(),
        }
        .into());
    };
    let experiment = ExperimentConfig {
        dim: cfg.lattice.dim,
        params: cfg.model.params(),
        neighborhood: cfg.lattice.neighborhood.spec(),
        initial,
        sizes: cc.sizes.clone(),
        replicas: cc.replicas,
        times: cc.times.clone(),
        test_functions: cc.test_functions.clone(),
        seed: cfg.seed,
        delta: cc.delta,
        integrator: cfg.discrete_pde.integrator(Vec::new()),
        limit: (cc.limit_m > 0).then_some(LimitSettings {
            m: cc.limit_m,
            steps: cc.limit_steps,
        }),
        c0_bound: cc.c0_bound,
        diameter_ratio_bound: cc.diameter_ratio_bound,
        effective_exchanges: cc.effective_exchanges,
        enforce_assumptions: cc.enforce_assumptions,
    };
    let report = run_convergence_experiment(&experiment).map_err(core)?;
    let mut csv = Csv::new(
        "compare-records",
        &[
            "n",
            "replica",
            "time",
            "test_function",
            "particle",
            "discrete",
            "limit",
            "particle_vs_discrete",
            "discrete_vs_limit",
            "particle_vs_limit",
        ],
    );
    for r in &report.records {
        csv.row(&[
            r.n.to_string(),
            r.replica.to_string(),
            num(r.time),
            r.test_function.name().into(),
            num(r.particle),
            num(r.discrete),
            opt(r.limit),
            num(r.particle_vs_discrete),
            opt(r.discrete_vs_limit),
            opt(r.particle_vs_limit),
        ]);
    }
    out.write(&out.name("compare-records", "csv"), &csv.finish())?;
    Ok(json!({
        "params": experiment.params,
        "seed": cfg.seed,
        "streams": report.streams,
        "assumptions": report.assumptions,
        "summaries": report.summaries,
    }))
}

fn phase(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value, RunError> {
    let pc = &cfg.phase;
    let betas = if pc.betas.is_empty() {
        vec![cfg.model.beta]
    } else {
        pc.betas.clone()
    };
    let grid = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    };
    let mut sweep = Csv::new("phase-thresholds", &["T", "beta", "p0", "p_ell", "p_m", "phase"]);
    let mut counts = serde_json::Map::new();
    for &beta in &betas {
        for t in grid(pc.t_min, pc.t_max, pc.t_points) {
            let r = phase_classify(t, beta).map_err(core)?;
            sweep.row(&[
                num(t),
                num(beta),
                num(r.p0),
                num(r.p_ell),
                num(r.p_m),
                r.phase.as_str().into(),
            ]);
            let slot = counts.entry(r.phase.as_str()).or_insert(json!(0));
            *slot = json!(slot.as_u64().unwrap_or(0) + 1);
        }
    }
    out.write(&out.name("phase-thresholds", "csv"), &sweep.finish())?;

    let mut profile = Csv::new("phase-gamma", &["beta", "T", "p", "gamma"]);
    for &beta in &betas {
        for &t in &pc.profile_thresholds {
            for p in grid(0.0, 1.0, pc.profile_points) {
                profile.row(&[num(beta), num(t), num(p), num(gamma_inf_beta(p, t, beta))]);
            }
        }
    }
    out.write(&out.name("phase-gamma", "csv"), &profile.finish())?;
    Ok(json!({ "betas": betas, "phase_counts": counts }))
}

fn nonuniq(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value, RunError> {
    let nc = &cfg.nonuniq;
    let beta = cfg.model.beta;
    let trio = NonuniquenessTrio::new(nc.rho, beta).map_err(core)?;
    let sg = SemigroupSpec::new(2.0 * beta + 1.0, 4.0 * cfg.model.alpha).map_err(core)?;
    let times = uniform_times(nc.tau, nc.steps);
    let mut residuals = Vec::with_capacity(3);
    for w in 1..=3 {
        let sol = trio.solution(w, &times, nc.dim, nc.m).map_err(core)?;
        residuals.push(mild_residual(&sol, &sg, nc.rho).map_err(core)?);
    }
    let mut traj = Csv::new("nonuniq-trajectories", &["t", "v1", "v2", "v3"]);
    let mut res = Csv::new("nonuniq-residuals", &["t", "residual_v1", "residual_v2", "residual_v3"]);
    for (n, &t) in times.iter().enumerate() {
        traj.row(&[num(t), num(trio.v1(t)), num(trio.v2(t)), num(trio.v3(t))]);
        res.row(&[
            num(t),
            num(residuals[0].residual[n]),
            num(residuals[1].residual[n]),
            num(residuals[2].residual[n]),
        ]);
    }
    out.write(&out.name("nonuniq-trajectories", "csv"), &traj.finish())?;
    out.write(&out.name("nonuniq-residuals", "csv"), &res.finish())?;
    let end = nc.tau;
    let values = [trio.v1(end), trio.v2(end), trio.v3(end)];
    let separation = [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(a, b)| (values[a] - values[b]).abs())
        .fold(f64::INFINITY, f64::min);
    Ok(json!({
        "rho": nc.rho,
        "beta": beta,
        "max_residuals": residuals.iter().map(|r| r.max()).collect::<Vec<_>>(),
        "bounds_hold": residuals.iter().all(|r| r.bound_holds),
        "min_separation_at_tau": separation,
    }))
}
