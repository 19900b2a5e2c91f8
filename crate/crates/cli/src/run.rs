//! Command dispatch. Each command is a pure computation returning an
//! [`Outcome`]; files are written by [`run`] and the sweep driver.

use std::f64::consts::TAU;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use degenhyp_core::builtins::{
    diff_spectral, diff_system, gaussian_data, hermitian_spectral, qi_operator, qi_spectral, qi_system,
    reduced_qi_spectral, second_order_data, transport_operator, wave_operator, wave_spectral,
};
use degenhyp_core::linalg::CMatrix;
use degenhyp_core::reduction::{
    companion_system, cross_validate, delta_bound_scalar, ReductionError, ScalarOperator,
};
use degenhyp_core::solver::{
    default_q, empirical_loss, energy_ratio, power_law_data, qi_exact, qi_exact_dt, solve_cauchy, Forcing,
    LossOptions, LossProblem, PeriodicGrid, SolverError, SpectralSystem, SpectralTrajectory,
};
use degenhyp_core::symbolcalc::{estimate_constants, SymbolError, SymbolGrid, SymbolOrders};
use degenhyp_core::systems::{
    delta_bound_system, sphere_samples, symmetrizer_from_roots, DeltaBound, FirstOrderSystem, Root,
    SamplePoint, SystemError,
};
use degenhyp_core::weights::{bracket, g_with_dt, weight_pair, Cutoff, DegeneracySpec};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CommandKind, DataSpec, Problem, RunConfig, SweepParameter, SymbolKind};
use crate::CliError;

/// Headline numbers of a run; absent fields do not apply to the command.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Headline {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_validation_discrepancy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_energy_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbol_pass: Option<bool>,
}

/// Summary written to `report.json`. The wall time is reported on stderr
/// only, so identical inputs give identical files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub status: String,
    pub artifacts: Vec<String>,
    pub headline: Headline,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
    pub config: RunConfig,
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Result of one command, before anything is written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub headline: Headline,
    pub record: Value,
    pub csv: Option<(&'static str, String)>,
}

fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn solver_error(e: SolverError) -> CliError {
    match e {
        SolverError::Stiff { .. }
        | SolverError::Divergence { .. }
        | SolverError::TooManySteps { .. }
        | SolverError::Fit(_) => numerical(e),
        _ => validation(e.to_string()),
    }
}

fn build_error(e: ReductionError) -> CliError {
    validation(e.to_string())
}

fn config_spec(cfg: &RunConfig) -> Result<DegeneracySpec, CliError> {
    let d = cfg
        .degeneracy
        .ok_or_else(|| validation("this problem needs a degeneracy section"))?;
    DegeneracySpec::new(d.l_star, d.horizon).map_err(|e| validation(e.to_string()))
}

fn x_grid(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| vec![TAU * i as f64 / n as f64]).collect()
}

fn scalar_operator(cfg: &RunConfig, p: &Problem) -> Result<Option<ScalarOperator>, CliError> {
    Ok(Some(match p {
        Problem::Qi { k } => qi_operator(*k),
        Problem::Wave { l_star } => wave_operator(*l_star).map_err(build_error)?,
        Problem::Transport { a, l_star } => transport_operator(*l_star, *a),
        Problem::Operator { order, terms } => {
            let mut op = ScalarOperator::new(config_spec(cfg)?, *order, 1).map_err(build_error)?;
            for t in terms {
                op = op
                    .with_constant_term(t.j, t.alpha.clone(), Complex64::new(t.re, t.im))
                    .map_err(build_error)?;
            }
            op.with_name(format!("operator of order {order}"))
        }
        _ => return Ok(None),
    }))
}

fn first_order_system(cfg: &RunConfig, p: &Problem) -> Result<FirstOrderSystem, CliError> {
    match p {
        Problem::Qi { k } => Ok(qi_system(*k)),
        Problem::DifferentialSystem { l_star } => Ok(diff_system(*l_star)),
        Problem::System {
            a0,
            a1_re,
            a1_im,
            roots,
        } => {
            let n = a0.len();
            let a0m = CMatrix::from_fn(n, n, |r, s| Complex64::new(a0[r][s], 0.0));
            let a1m = CMatrix::from_fn(n, n, |r, s| {
                Complex64::new(a1_re[r][s], a1_im.as_ref().map_or(0.0, |im| im[r][s]))
            });
            let roots = roots
                .iter()
                .map(|r| {
                    let v = r.value;
                    Root::new(Arc::new(move |_, _, xi: &[f64]| v * xi[0]), r.multiplicity)
                })
                .collect();
            FirstOrderSystem::new(
                config_spec(cfg)?,
                n,
                Arc::new(move |_, _, xi| a0m.clone() * Complex64::new(xi[0], 0.0)),
                Arc::new(move |_, _| a1m.clone()),
                roots,
            )
            .map(|s| s.with_name("configured system"))
            .map_err(|e| validation(e.to_string()))
        }
        other => match scalar_operator(cfg, other)? {
            Some(op) => Ok(companion_system(&op)),
            None => Err(validation(format!(
                "analyze-system does not support problem '{}'",
                other.name()
            ))),
        },
    }
}

fn delta_headline(d: &DeltaBound) -> Headline {
    let loss_min = d.rows.iter().map(|r| r.loss).fold(f64::INFINITY, f64::min);
    let loss_max = d.rows.iter().map(|r| r.loss).fold(f64::NEG_INFINITY, f64::max);
    Headline {
        delta_min: Some(d.min_delta()),
        delta_max: Some(d.max_delta()),
        loss_min: Some(loss_min),
        loss_max: Some(loss_max),
        ..Headline::default()
    }
}

fn analyze_operator(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = cfg.problem()?;
    let op = scalar_operator(cfg, p)?.ok_or_else(|| {
        validation(format!("analyze-operator needs a scalar operator, not '{}'", p.name()))
    })?;
    let xs = x_grid(cfg.grids.x_points);
    let xis = sphere_samples(1);
    let gap = cfg.tolerances.gap_tol;
    let d = delta_bound_scalar(&op, &xs, &xis, gap).map_err(numerical)?;
    let cv = cross_validate(&op, &xs, &xis, gap).map_err(numerical)?;
    let mut headline = delta_headline(&d);
    headline.cross_validation_discrepancy = Some(cv.max_discrepancy);
    Ok(Outcome {
        record: json!({
            "operator": op.name(),
            "delta_bound": d,
            "companion_delta_max": cv.system.max_delta(),
            "cross_validation_discrepancy": cv.max_discrepancy,
        }),
        csv: Some(("delta.csv", d.to_csv())),
        headline,
    })
}

fn system_bound(cfg: &RunConfig, sys: &FirstOrderSystem) -> Result<DeltaBound, CliError> {
    let xs = x_grid(cfg.grids.x_points);
    let xis = sphere_samples(1);
    let horizon = sys.spec().horizon();
    let samples: Vec<SamplePoint> = xs
        .iter()
        .flat_map(|x| {
            xis.iter().flat_map(move |xi| {
                [0.0, 0.5 * horizon, horizon].map(|t| SamplePoint {
                    t,
                    x: x.clone(),
                    xi_hat: xi.clone(),
                })
            })
        })
        .collect();
    let gap = cfg.tolerances.gap_tol;
    let pair = symmetrizer_from_roots(sys, &samples, gap).map_err(system_error)?;
    delta_bound_system(sys, &pair, &xs, &xis, gap).map_err(system_error)
}

fn system_error(e: SystemError) -> CliError {
    match e {
        SystemError::MultiplicityMismatch { .. } | SystemError::NoSamples => validation(e.to_string()),
        _ => numerical(e),
    }
}

fn analyze_system(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sys = first_order_system(cfg, cfg.problem()?)?;
    let d = system_bound(cfg, &sys)?;
    Ok(Outcome {
        headline: delta_headline(&d),
        record: json!({ "system": sys.name(), "delta_bound": d }),
        csv: Some(("delta.csv", d.to_csv())),
    })
}

fn initial_data(cfg: &RunConfig, grid: &PeriodicGrid) -> Vec<Complex64> {
    match cfg.solve.data {
        DataSpec::PowerLaw { sigma } => power_law_data(grid, sigma, cfg.seed),
        DataSpec::Gaussian { width, cutoff } => gaussian_data(grid, width, cutoff),
    }
}

/// Largest relative L2 error of `(u, D_t u)` against the exact Qi solution.
fn qi_oracle_error(k: u32, grid: &PeriodicGrid, phi: &[Complex64], traj: &SpectralTrajectory) -> f64 {
    let cut = Cutoff::default();
    let rel = |a: &[Complex64], b: &[Complex64]| {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den).sqrt()
    };
    let mut worst: f64 = 0.0;
    for (&t, st) in traj.times.iter().zip(&traj.states) {
        if t == 0.0 {
            continue;
        }
        let u: Vec<Complex64> = st[0]
            .iter()
            .enumerate()
            .map(|(m, z)| z / g_with_dt(&traj.spec, &cut, t, (1.0 + grid.frequency(m).powi(2)).sqrt()).0)
            .collect();
        worst = worst
            .max(rel(&u, &qi_exact(k, grid, phi, t)))
            .max(rel(&st[1], &qi_exact_dt(k, grid, phi, t)));
    }
    worst
}

fn solve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let grid = PeriodicGrid::new(cfg.grids.n_modes).map_err(solver_error)?;
    let phi = initial_data(cfg, &grid);
    let p = cfg.problem()?;
    let (sys, u0): (SpectralSystem, Vec<Vec<Complex64>>) = match p {
        Problem::Qi { k } => {
            let sys = qi_spectral(*k, &grid);
            let u0 = second_order_data(sys.spec(), &grid, &phi);
            (sys, u0)
        }
        Problem::Wave { l_star } => {
            let sys = wave_spectral(*l_star, &grid);
            let u0 = second_order_data(sys.spec(), &grid, &phi);
            (sys, u0)
        }
        Problem::DifferentialSystem { l_star } => (diff_spectral(*l_star, &grid), vec![phi.clone(), phi.clone()]),
        Problem::ReducedQi { k } => (reduced_qi_spectral(*k, &grid), vec![phi.clone(), phi.clone()]),
        Problem::Hermitian => (hermitian_spectral(&grid), vec![phi.clone(), phi.clone()]),
        other => return Err(validation(format!("solve does not support problem '{}'", other.name()))),
    };
    let s = &cfg.solve;
    let forcing: Option<Forcing> = (s.forcing != 0.0).then(|| {
        let (amp, f) = (s.forcing, phi.clone());
        let f: Forcing = Arc::new(move |t, buf: &mut [Complex64]| {
            for (b, z) in buf.iter_mut().zip(&f) {
                *b = z * (amp * t.cos());
            }
        });
        f
    });
    let mut traj = solve_cauchy(&sys, &u0, forcing.clone(), s.eps, &s.times, cfg.tolerances.tol)
        .map_err(solver_error)?;
    traj.meta.seed = Some(cfg.seed);
    let energy = energy_ratio(&traj, forcing.as_ref(), &default_q(*sys.spec(), s.q_scale));
    let oracle_error = match p {
        Problem::Qi { k } if forcing.is_none() && s.eps == 0.0 && k.fract() == 0.0 && (0.0..=8.0).contains(k) => {
            Some(qi_oracle_error(*k as u32, &grid, &phi, &traj))
        }
        _ => None,
    };
    Ok(Outcome {
        headline: Headline {
            max_energy_ratio: Some(energy.max_ratio),
            oracle_error,
            ..Headline::default()
        },
        record: json!({
            "trajectory": traj.meta,
            "energy": energy,
            "oracle_error": oracle_error,
        }),
        csv: Some(("solution.csv", traj.to_csv())),
    })
}

fn loss_problem(p: &Problem) -> Result<LossProblem, CliError> {
    match *p {
        Problem::Qi { k } => Ok(LossProblem::Qi { k }),
        Problem::Wave { l_star } => Ok(LossProblem::Wave { l_star }),
        Problem::DifferentialSystem { l_star } => Ok(LossProblem::DifferentialSystem { l_star }),
        ref other => Err(validation(format!(
            "loss-experiment does not support problem '{}'",
            other.name()
        ))),
    }
}

fn loss_experiment(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = cfg.problem()?;
    let problem = loss_problem(p)?;
    let e = &cfg.experiment;
    let opts = LossOptions {
        n_modes: cfg.grids.n_modes,
        tol: cfg.tolerances.tol,
        eps: e.eps,
    };
    let m = empirical_loss(problem, e.sigma, e.t_probe, cfg.seed, opts).map_err(solver_error)?;
    // the bound the analysis predicts for the same problem
    let bound = match scalar_operator(cfg, p)? {
        Some(op) => delta_bound_scalar(&op, &x_grid(cfg.grids.x_points), &sphere_samples(1), cfg.tolerances.gap_tol)
            .map_err(numerical)?,
        None => system_bound(cfg, &first_order_system(cfg, p)?)?,
    };
    let mut headline = delta_headline(&bound);
    headline.measured_loss = Some(m.loss);
    headline.predicted_loss = Some(m.predicted_loss);
    headline.fit_r2 = Some(m.r2);
    Ok(Outcome {
        headline,
        record: json!({ "measurement": m }),
        csv: None,
    })
}

fn check_symbol(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let check = cfg
        .symbol
        .as_ref()
        .ok_or_else(|| validation("check-symbol needs a symbol section"))?;
    let spec = match (&check.symbol, cfg.degeneracy) {
        (SymbolKind::QiSystem { .. }, _) | (_, None) => {
            DegeneracySpec::new(1, 1.0).map_err(|e| validation(e.to_string()))?
        }
        (_, Some(_)) => config_spec(cfg)?,
    };
    let grid = SymbolGrid::new(spec, check.n_t, check.n_xi, check.xi_max);
    let orders: Vec<SymbolOrders> = check.orders.iter().map(|&(m, eta)| SymbolOrders::new(m, eta)).collect();
    let cut = Cutoff::default();
    let nan = || CMatrix::from_element(1, 1, Complex64::new(f64::NAN, 0.0));
    let report = match check.symbol {
        SymbolKind::WeightPower { m, eta } => estimate_constants(
            move |t: f64, _x: &[f64], xi: &[f64]| match weight_pair(&spec, &cut, t, xi) {
                Ok(w) => CMatrix::from_element(1, 1, Complex64::new(w.g.powf(m) * w.h.powf(eta - m), 0.0)),
                Err(_) => nan(),
            },
            &orders,
            &grid,
            check.max_orders,
        ),
        SymbolKind::LambdaBracket => estimate_constants(
            move |t: f64, _x: &[f64], xi: &[f64]| {
                CMatrix::from_element(1, 1, Complex64::new(spec.lambda(t) * bracket(xi), 0.0))
            },
            &orders,
            &grid,
            check.max_orders,
        ),
        SymbolKind::QiSystem { k } => {
            let sys = qi_system(k);
            estimate_constants(
                move |t: f64, x: &[f64], xi: &[f64]| sys.full_symbol(t, x, xi),
                &orders,
                &grid,
                check.max_orders,
            )
        }
    }
    .map_err(|e| match e {
        SymbolError::NonFinite { .. } => numerical(e),
        other => validation(other.to_string()),
    })?;
    Ok(Outcome {
        headline: Headline {
            symbol_pass: Some(report.pass),
            ..Headline::default()
        },
        csv: Some(("symbol.csv", report.to_csv())),
        record: json!({ "estimate": report }),
    })
}

fn execute(kind: CommandKind, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match kind {
        CommandKind::AnalyzeOperator => analyze_operator(cfg),
        CommandKind::AnalyzeSystem => analyze_system(cfg),
        CommandKind::Solve => solve(cfg),
        CommandKind::LossExperiment => loss_experiment(cfg),
        CommandKind::CheckSymbol => check_symbol(cfg),
        CommandKind::Sweep => Err(validation("sweeps cannot be nested")),
    }
}

/// Copy of `cfg` with the swept parameter set to `value`.
fn apply(cfg: &RunConfig, param: SweepParameter, value: f64) -> Result<RunConfig, CliError> {
    let mut c = cfg.clone();
    c.sweep = None;
    let integer = |what: &str| -> Result<u64, CliError> {
        if value.fract() == 0.0 && value >= 0.0 && value.is_finite() {
            Ok(value as u64)
        } else {
            Err(validation(format!("{what} must be a nonnegative integer, got {value}")))
        }
    };
    match param {
        SweepParameter::K => match c.problem.as_mut() {
            Some(Problem::Qi { k }) | Some(Problem::ReducedQi { k }) => *k = value,
            _ => return Err(validation("parameter k needs a qi or reduced_qi problem")),
        },
        SweepParameter::LStar => {
            let l = integer("l_star")? as u32;
            match c.problem.as_mut() {
                Some(Problem::Wave { l_star })
                | Some(Problem::DifferentialSystem { l_star })
                | Some(Problem::Transport { l_star, .. }) => *l_star = l,
                _ => return Err(validation("parameter l_star needs a wave, transport or differential_system problem")),
            }
        }
        SweepParameter::Sigma => {
            c.experiment.sigma = value;
            if let DataSpec::PowerLaw { sigma } = &mut c.solve.data {
                *sigma = value;
            }
        }
        SweepParameter::Eps => {
            c.experiment.eps = value;
            c.solve.eps = value;
        }
        SweepParameter::NModes => c.grids.n_modes = integer("n_modes")? as usize,
    }
    c.validate()?;
    Ok(c)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

fn csv_with_config(cfg: &RunConfig, body: &str) -> String {
    let echo = serde_json::to_string(cfg).expect("config serializes");
    format!("# config: {echo}\n{body}")
}

fn write(out: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = out.join(name);
    std::fs::write(&path, contents).map_err(|source| CliError::Io { path, source })
}

struct SweepPoint {
    value: f64,
    config: Option<RunConfig>,
    result: Result<Outcome, CliError>,
}

fn sweep(cfg: &RunConfig, out: &Path) -> Result<(Headline, Vec<String>, Vec<String>), CliError> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| validation("sweep needs a sweep section"))?;
    if sw.values.is_empty() {
        return Err(validation("sweep.values must not be empty"));
    }
    if sw.command == CommandKind::Sweep {
        return Err(validation("sweeps cannot be nested"));
    }
    // resolve every point up front so configuration mistakes fail the run
    let configs = sw
        .values
        .iter()
        .map(|&v| apply(cfg, sw.parameter, v))
        .collect::<Result<Vec<_>, _>>()?;
    let points: Vec<SweepPoint> = configs
        .into_par_iter()
        .zip(sw.values.par_iter())
        .map(|(c, &value)| SweepPoint {
            value,
            result: execute(sw.command, &c),
            config: Some(c),
        })
        .collect();

    let param = serde_json::to_value(sw.parameter).expect("parameter serializes");
    let param = param.as_str().unwrap_or("parameter").to_string();
    let mut jsonl = String::new();
    let mut summary = String::from(
        "point,parameter,value,status,delta_max,loss_max,predicted_loss,measured_loss,max_energy_ratio,error\n",
    );
    let mut failures = Vec::new();
    let mut headline = Headline::default();
    for (i, p) in points.iter().enumerate() {
        let (status, h, record, error) = match &p.result {
            Ok(o) => ("ok", o.headline.clone(), o.record.clone(), String::new()),
            Err(e) => {
                failures.push(format!("point {i} ({param} = {}): {e}", p.value));
                ("failed", Headline::default(), Value::Null, e.to_string())
            }
        };
        let line = json!({
            "point": i,
            "parameter": param,
            "value": p.value,
            "status": status,
            "headline": h,
            "result": record,
            "error": if error.is_empty() { Value::Null } else { Value::String(error.clone()) },
            "config": p.config,
        });
        jsonl.push_str(&serde_json::to_string(&line).expect("record serializes"));
        jsonl.push('\n');
        summary.push_str(&format!(
            "{i},{param},{},{status},{},{},{},{},{},{}\n",
            p.value,
            fmt_opt(h.delta_max),
            fmt_opt(h.loss_max),
            fmt_opt(h.predicted_loss),
            fmt_opt(h.measured_loss),
            fmt_opt(h.max_energy_ratio),
            error.replace(',', ";")
        ));
        let max = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => Some(x.max(y)),
            (x, y) => x.or(y),
        };
        let min = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        };
        headline.delta_min = min(headline.delta_min, h.delta_min);
        headline.delta_max = max(headline.delta_max, h.delta_max);
        headline.loss_min = min(headline.loss_min, h.loss_min);
        headline.loss_max = max(headline.loss_max, h.loss_max);
        headline.max_energy_ratio = max(headline.max_energy_ratio, h.max_energy_ratio);
        headline.fit_r2 = min(headline.fit_r2, h.fit_r2);
    }
    write(out, "experiment.jsonl", &jsonl)?;
    write(out, "summary.csv", &csv_with_config(cfg, &summary))?;
    Ok((headline, vec!["experiment.jsonl".into(), "summary.csv".into()], failures))
}

/// Run one command and write its artifacts into `out`.
pub fn run(kind: CommandKind, cfg: RunConfig, out: &Path) -> Result<RunReport, CliError> {
    let start = Instant::now();
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let (headline, mut artifacts, failures) = if kind == CommandKind::Sweep {
        sweep(&cfg, out)?
    } else {
        let o = execute(kind, &cfg)?;
        let mut artifacts = Vec::new();
        if let Some((name, body)) = &o.csv {
            write(out, name, &csv_with_config(&cfg, body))?;
            artifacts.push(name.to_string());
        }
        let line = json!({
            "command": kind.as_str(),
            "headline": o.headline,
            "result": o.record,
            "config": cfg,
        });
        let mut text = serde_json::to_string(&line).expect("record serializes");
        text.push('\n');
        write(out, "experiment.jsonl", &text)?;
        artifacts.push("experiment.jsonl".into());
        (o.headline, artifacts, Vec::new())
    };
    artifacts.push("report.json".into());
    let report = RunReport {
        command: kind.as_str().into(),
        status: if failures.is_empty() { "ok" } else { "failed" }.into(),
        artifacts,
        headline,
        failures,
        config: cfg,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    write(out, "report.json", &(text + "\n"))?;
    Ok(report)
}
