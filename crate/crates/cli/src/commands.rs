use std::f64::consts::{FRAC_PI_2, PI, TAU};

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use revspec::flow::{self, FlowOptions, FlowState};
use revspec::profile::config;
use revspec::profile::{Deformation, VALIDATION_TOL};
use revspec::spectral::{self, GfOptions};
use revspec::{abel, rearrange, scenarios, tangent, Execution, ProfileFunction, RevspecError};

use crate::args::{Cli, Command, Common};
use crate::expr::Expr;
use crate::input::{load_profile, Loaded, UsageError};
use crate::output::{to_json_string, Format, Sink, Table};
use crate::report::{csv_header, error_value, Report};
use crate::Status;

const EXEC: Execution = Execution::Parallel;

pub fn run(cli: Cli) -> Result<Status> {
    let name = cli.command.name();
    match cli.command {
        Command::Validate { profile, common } => validate(name, &profile, &common),
        Command::ReturnMap { profile, beta_grid, common } => return_map(name, &profile, beta_grid, &common),
        Command::Spectrum { profile, pq_max, grid, include_meridians, common } => {
            spectrum(name, &profile, pq_max, grid, include_meridians, &common)
        }
        Command::Isospectral { a, b, common } => isospectral(name, &a, &b, &common),
        Command::Rearrange { profile, grid, common } => rearrange_cmd(name, &profile, grid, &common),
        Command::Family { base, f, eps, degree, common } => family(&base, &f, eps, degree, &common),
        Command::AbelCheck { profile, beta_grid, common } => abel_check(name, &profile, beta_grid, &common),
        Command::TangentDemo { function, n, rational_q, common } => tangent_demo(name, &function, n, rational_q, &common),
        Command::UnstableDemo { profile, contrast, k_max, no_ode_check, common } => {
            unstable_demo(name, &profile, &contrast, k_max, !no_ode_check, &common)
        }
        Command::ConjugacyTest { a, b, seed, samples, common } => conjugacy_test(name, &a, &b, seed, samples, &common),
    }
}

fn sink(common: &Common, default: Format) -> Result<Sink, UsageError> {
    Sink::resolve(common.out.as_deref(), common.format.as_deref(), default).map_err(UsageError)
}

fn emit(sink: &Sink, doc: &Value, table: Table) -> Result<()> {
    match sink.format {
        Format::Json => sink.write(&to_json_string(doc)),
        Format::Csv => sink.write(&table.to_csv(&csv_header(doc))?),
    }
}

fn status(passed: bool) -> Status {
    if passed {
        Status::Pass
    } else {
        Status::Fail
    }
}

/// Writes a report for a computation that failed with a library error.
fn emit_failure(sink: &Sink, report: &Report, err: &RevspecError, columns: &[&'static str]) -> Result<Status> {
    emit(sink, &report.failure(err), Table::new(columns))?;
    Ok(Status::Fail)
}

fn flow_options(report: &mut Report, common: &Common, default_tol: f64) -> Result<FlowOptions, UsageError> {
    let tol = report.positive("tol", common.tol, default_tol)?;
    let tau_cap = match common.tau_cap {
        Some(_) => Some(report.positive("tau-cap", common.tau_cap, 1.0)?),
        None => {
            report.setting("tau-cap", "1e4 m");
            None
        }
    };
    Ok(FlowOptions { tol, tau_cap, ..FlowOptions::default() })
}

/// Loads a profile, or writes the failure report and yields `Err(status)`.
macro_rules! profile_or_report {
    ($arg:expr, $sink:expr, $report:expr, $columns:expr) => {
        match load_profile($arg)? {
            Loaded::Profile(p) => *p,
            Loaded::Failed(e) => return emit_failure(&$sink, &$report, &e, $columns),
        }
    };
}

fn profile_summary(p: &ProfileFunction) -> Value {
    json!({
        "kind": p.kind_name(),
        "m": p.m(),
        "sigma_max": p.sigma_max(),
        "r_max": p.r_max(),
        "low_accuracy": p.low_accuracy(),
    })
}

fn validate(name: &'static str, arg: &str, common: &Common) -> Result<Status> {
    const COLUMNS: &[&str] = &["check", "passed", "residual"];
    let sink = sink(common, Format::Json)?;
    let mut report = Report::new(name, &[arg]);
    let tol = report.positive("tol", common.tol, VALIDATION_TOL)?;
    let p = profile_or_report!(arg, sink, report, COLUMNS);
    let rep = p.validate(tol);
    let mut table = Table::new(COLUMNS);
    for c in &rep.checks {
        table.push(vec![c.name.into(), if c.passed { "true" } else { "false" }.into(), c.residual.into()]);
    }
    let mut result = json!({
        "profile": profile_summary(&p),
        "checks": rep.checks,
    });
    if let Some(e) = &rep.error {
        result["error"] = error_value(e);
    }
    emit(&sink, &report.finish(rep.passed, result), table)?;
    Ok(status(rep.passed))
}

fn return_map(name: &'static str, arg: &str, beta_grid: usize, common: &Common) -> Result<Status> {
    const COLUMNS: &[&str] = &["beta", "eta", "tau_ode", "theta_ode"];
    let sink = sink(common, Format::Csv)?;
    let mut report = Report::new(name, &[arg]);
    let n = report.grid("beta-grid", Some(beta_grid), 64)?;
    let opts = flow_options(&mut report, common, FlowOptions::default().tol)?;
    let p = profile_or_report!(arg, sink, report, COLUMNS);
    let betas: Vec<f64> = (0..n).map(|i| PI * (i as f64 + 0.5) / n as f64).collect();
    let samples = flow::return_map(&p, &betas, EXEC, &opts);
    let mut table = Table::new(COLUMNS);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (&beta, s) in betas.iter().zip(&samples) {
        match s {
            Ok(s) => {
                table.push(vec![beta.into(), s.eta.into(), s.tau.into(), s.theta.into()]);
                rows.push(json!({"beta": beta, "eta": s.eta, "tau_ode": s.tau, "theta_ode": s.theta}));
            }
            Err(e) => {
                table.push(vec![beta.into(), beta.cos().into(), f64::NAN.into(), f64::NAN.into()]);
                failures.push(json!({"beta": beta, "error": error_value(e)}));
            }
        }
    }
    let passed = failures.is_empty();
    let failed_count = failures.len();
    let doc = report.finish(
        passed,
        json!({"profile": profile_summary(&p), "samples": rows, "failures": failures, "failed_count": failed_count}),
    );
    emit(&sink, &doc, table)?;
    Ok(status(passed))
}

fn spectrum(
    name: &'static str,
    arg: &str,
    pq_max: u32,
    grid: Option<usize>,
    include_meridians: bool,
    common: &Common,
) -> Result<Status> {
    const COLUMNS: &[&str] = &["p", "q", "index", "length", "root", "tangency_flag"];
    let sink = sink(common, Format::Json)?;
    let mut report = Report::new(name, &[arg]);
    if pq_max == 0 {
        return Err(UsageError("--pq-max must be at least 1".into()).into());
    }
    report.flag("pq-max", pq_max, 8);
    report.flag("include-meridians", include_meridians, false);
    let defaults = GfOptions::default();
    let n_grid = report.grid("grid", grid, defaults.n_grid)?;
    let flow = flow_options(&mut report, common, defaults.flow.tol)?;
    report.setting("eps-edge", defaults.eps_edge);
    let p = profile_or_report!(arg, sink, report, COLUMNS);
    let opts = GfOptions { n_grid, flow, exec: EXEC, ..defaults };
    let computed = match spectral::build_generating_function(&p, &opts).and_then(|gf| spectral::spectrum(&gf, pq_max, include_meridians, EXEC)) {
        Ok(s) => s,
        Err(e) => return emit_failure(&sink, &report, &e, COLUMNS),
    };
    let mut table = Table::new(COLUMNS);
    for e in &computed.entries {
        for (i, len) in e.lengths.iter().enumerate() {
            let root = e.roots.get(i).copied().unwrap_or(f64::NAN);
            let flag = e.multiplicity_flags.get(i).copied().unwrap_or(false);
            table.push(vec![e.p.into(), e.q.into(), i.into(), (*len).into(), root.into(), if flag { "true" } else { "false" }.into()]);
        }
    }
    let mut result = serde_json::to_value(&computed)?;
    result["low_accuracy"] = json!(p.low_accuracy());
    emit(&sink, &report.finish(true, result), table)?;
    Ok(Status::Pass)
}

fn isospectral(name: &'static str, a: &str, b: &str, common: &Common) -> Result<Status> {
    const COLUMNS: &[&str] = &["rho", "superlevel_difference"];
    let sink = sink(common, Format::Json)?;
    let mut report = Report::new(name, &[a, b]);
    let tol = report.positive("tol", common.tol, 1e-8)?;
    let p1 = profile_or_report!(a, sink, report, COLUMNS);
    let p2 = profile_or_report!(b, sink, report, COLUMNS);
    let rep = spectral::isospectral_check(&p1, &p2, tol);
    let mut table = Table::new(COLUMNS);
    for &(rho, d) in &rep.superlevel_curve {
        table.push(vec![rho.into(), d.into()]);
    }
    let passed = rep.isospectral;
    emit(&sink, &report.finish(passed, serde_json::to_value(&rep)?), table)?;
    Ok(status(passed))
}

fn rearrange_cmd(name: &'static str, arg: &str, grid: Option<usize>, common: &Common) -> Result<Status> {
    const COLUMNS: &[&str] = &["sigma", "r", "r_rearranged", "phi", "dphi"];
    let sink = sink(common, Format::Json)?;
    let mut report = Report::new(name, &[arg]);
    let n = report.grid("grid", grid, 256)?;
    let p = profile_or_report!(arg, sink, report, COLUMNS);
    let rs = rearrange::symmetric_rearrangement(&p);
    if sink.format == Format::Json {
        // The output is itself a profile file.
        sink.write(&to_json_string(&config::to_json(&rs)))?;
        return Ok(Status::Pass);
    }
    let map = match rearrange::rearrangement_map(&p) {
        Ok(m) => m,
        Err(e) => return emit_failure(&sink, &report, &e, COLUMNS),
    };
    let mut table = Table::new(COLUMNS);
    for i in 0..=n {
        let s = p.m() * i as f64 / n as f64;
        table.push(vec![s.into(), p.eval(s).r.into(), rs.eval(s).r.into(), map.phi(s).into(), map.dphi(s).into()]);
    }
    let doc = report.finish(true, json!({"profile": profile_summary(&p), "rearranged": profile_summary(&rs)}));
    emit(&sink, &doc, table)?;
    Ok(Status::Pass)
}

fn family(base: &str, f: &str, eps: f64, degree: usize, common: &Common) -> Result<Status> {
    let sink = sink(common, Format::Json)?;
    if sink.format == Format::Csv {
        return Err(UsageError("family writes a profile file; use JSON output".into()).into());
    }
    let base_profile = match load_profile(base)? {
        Loaded::Profile(p) => *p,
        Loaded::Failed(e) => return fail_to_stderr("family", &e),
    };
    let expr = Expr::parse(f, &[("eps", eps)]).map_err(|e| UsageError(e.to_string()))?;
    if let Some(u) = (0..=200).map(|i| -1.0 + i as f64 / 100.0).find(|&u| !expr.eval(u).is_finite()) {
        return Err(UsageError(format!("f is not finite at u = {u}")).into());
    }
    let built = if base_profile.is_symmetric() {
        Deformation::from_function(base_profile.m(), |u| expr.eval(u), degree)
            .map(|d| if d.is_identity() { base_profile.clone() } else { ProfileFunction::deformed(base_profile.clone(), d) })
    } else {
        Err(RevspecError::ConstraintViolation { constraint: "base profile is not symmetric".into() })
    };
    match built {
        Ok(p) => {
            sink.write(&to_json_string(&config::to_json(&p)))?;
            Ok(Status::Pass)
        }
        Err(e) => fail_to_stderr("family", &e),
    }
}

fn fail_to_stderr(command: &str, e: &RevspecError) -> Result<Status> {
    eprint!("{}", to_json_string(&json!({"command": command, "passed": false, "error": error_value(e)})));
    Ok(Status::Fail)
}

fn abel_check(name: &'static str, arg: &str, beta_grid: usize, common: &Common) -> Result<Status> {
    const COLUMNS: &[&str] = &["beta", "tau_closed", "tau_ode", "theta_closed", "theta_ode", "tau_residual", "theta_residual"];
    const ODE_TOL: f64 = 1e-11;
    let sink = sink(common, Format::Json)?;
    let mut report = Report::new(name, &[arg]);
    let n = report.grid("beta-grid", Some(beta_grid), 32)?;
    let tol = report.positive("tol", common.tol, 1e-6)?;
    report.setting("ode-tol", ODE_TOL);
    let p = profile_or_report!(arg, sink, report, COLUMNS);
    let mut opts = FlowOptions { tol: ODE_TOL, ..FlowOptions::default() };
    if common.tau_cap.is_some() {
        opts.tau_cap = Some(report.positive("tau-cap", common.tau_cap, 1.0)?);
    }
    let betas: Vec<f64> = (0..n).map(|i| PI * (i as f64 + 0.5) / n as f64).filter(|&b| b != FRAC_PI_2).collect();
    let pairs = revspec::numeric::par::map(EXEC, &betas, |&b| {
        let closed = abel::return_data_closed_form(&p, b)?;
        let ode = flow::first_return(&p, b, &opts)?;
        Ok::<_, RevspecError>((closed, ode))
    });
    let mut table = Table::new(COLUMNS);
    let (mut worst_tau, mut worst_theta) = (0.0f64, 0.0f64);
    let mut passed = true;
    let mut failures = Vec::new();
    for (&b, r) in betas.iter().zip(&pairs) {
        match r {
            Ok((c, o)) => {
                let dt = (c.tau - o.tau).abs();
                let dth = (c.theta - o.theta).abs();
                worst_tau = worst_tau.max(dt / (1.0 + o.tau.abs()));
                worst_theta = worst_theta.max(dth / (1.0 + o.theta.abs()));
                passed &= dt <= tol * (1.0 + o.tau.abs()) && dth <= tol * (1.0 + o.theta.abs());
                table.push(vec![b.into(), c.tau.into(), o.tau.into(), c.theta.into(), o.theta.into(), dt.into(), dth.into()]);
            }
            Err(e) => {
                passed = false;
                failures.push(json!({"beta": b, "error": error_value(e)}));
            }
        }
    }
    // The transform of f = 1 is 2 sqrt(1 - y), and transforming twice gives pi times the integral.
    let ys = [0.0, 0.25, 0.5, 0.75, 0.95];
    let mut transform_residual = 0.0f64;
    let mut square_residual = 0.0f64;
    for y in ys {
        let a = abel::abel_transform(|_| 1.0, y).map(|v| (v - 2.0 * (1.0 - y).sqrt()).abs()).unwrap_or(f64::INFINITY);
        transform_residual = transform_residual.max(a);
        square_residual = square_residual.max(abel::abel_square_residual(|x| x.exp(), y, &[]).unwrap_or(f64::INFINITY));
    }
    passed &= transform_residual <= tol && square_residual <= tol;
    let doc = report.finish(
        passed,
        json!({
            "profile": profile_summary(&p),
            "max_relative_tau_residual": worst_tau,
            "max_relative_theta_residual": worst_theta,
            "transform_of_one_residual": transform_residual,
            "square_identity_residual": square_residual,
            "failures": failures,
        }),
    );
    emit(&sink, &doc, table)?;
    Ok(status(passed))
}

fn tangent_demo(name: &'static str, function: &str, n: usize, rational_q: Option<u32>, common: &Common) -> Result<Status> {
    const COLUMNS: &[&str] = &["x", "f", "f_reconstructed", "df", "df_reconstructed", "error"];
    let sink = sink(common, Format::Csv)?;
    let mut report = Report::new(name, &[]);
    report.setting("function", function);
    let n = report.grid("n", Some(n), 64)?;
    let tol = report.positive("tol", common.tol, 1e-5)?;
    if let Some(q) = rational_q {
        if q == 0 {
            return Err(UsageError("--rational-q must be at least 1".into()).into());
        }
        report.flag("rational-q", q, Value::Null);
    }
    let Some((f, interval)) = tangent::panel_function(function) else {
        let names: Vec<&str> = tangent::convex_panel().iter().map(|(n, _, _)| *n).collect();
        return Err(UsageError(format!("unknown function {function:?}; expected one of {}", names.join(", "))).into());
    };
    let lines = match rational_q {
        Some(q) => tangent::rational_slope_lines(f, interval, q),
        None => tangent::tangent_set(f, &tangent::uniform_grid(interval.0, interval.1, n)),
    };
    let rec = match tangent::reconstruct(&lines) {
        Ok(r) => r,
        Err(e) => return emit_failure(&sink, &report, &e, COLUMNS),
    };
    let (lo, hi) = rec.domain();
    let mut table = Table::new(COLUMNS);
    let mut worst = 0.0f64;
    for x in tangent::uniform_grid(lo, hi, 4 * n + 1) {
        let (fx, dfx) = f(x);
        match rec.eval(x) {
            Ok((gx, dgx)) => {
                worst = worst.max((gx - fx).abs());
                table.push(vec![x.into(), fx.into(), gx.into(), dfx.into(), dgx.into(), (gx - fx).abs().into()]);
            }
            Err(e) => return emit_failure(&sink, &report, &e, COLUMNS),
        }
    }
    let passed = worst <= tol && !rec.underdetermined;
    let doc = report.finish(
        passed,
        json!({
            "interval": [interval.0, interval.1],
            "domain": [lo, hi],
            "lines": lines.iter().map(|l| json!({"slope": l.slope, "param": l.param})).collect::<Vec<_>>(),
            "line_count": lines.len(),
            "max_error": worst,
            "derivative_monotone": rec.derivative_monotone,
            "underdetermined": rec.underdetermined,
        }),
    );
    emit(&sink, &doc, table)?;
    Ok(status(passed))
}

fn unstable_demo(name: &'static str, arg: &str, contrast: &str, k_max: u32, ode_check: bool, common: &Common) -> Result<Status> {
    const COLUMNS: &[&str] = &["k", "turning_offset", "drop", "beta", "tau1", "discrepancy"];
    const CONTRAST_EXPONENTS: std::ops::RangeInclusive<i32> = 3..=12;
    let sink = sink(common, Format::Json)?;
    let mut report = Report::new(name, &[arg, contrast]);
    if k_max == 0 {
        return Err(UsageError("--k-max must be at least 1".into()).into());
    }
    report.flag("k-max", k_max, 5);
    report.flag("ode-check", ode_check, true);
    report.setting("contrast-exponents", json!([CONTRAST_EXPONENTS.start(), CONTRAST_EXPONENTS.end()]));
    let p = profile_or_report!(arg, sink, report, COLUMNS);
    let c = profile_or_report!(contrast, sink, report, COLUMNS);
    let rep = match scenarios::unstable_equator(&p, k_max, ode_check, EXEC) {
        Ok(r) => r,
        Err(e) => return emit_failure(&sink, &report, &e, COLUMNS),
    };
    let exps: Vec<i32> = CONTRAST_EXPONENTS.collect();
    let contrast_samples = match scenarios::stability_contrast(&c, &exps, EXEC) {
        Ok(s) => s,
        Err(e) => return emit_failure(&sink, &report, &e, COLUMNS),
    };
    let mut table = Table::new(COLUMNS);
    for s in &rep.steps {
        table.push(vec![s.k.into(), s.turning_offset.into(), s.drop.into(), s.beta.into(), s.tau1.into(), s.discrepancy.into()]);
    }
    let grows = rep.steps.len() >= 2 && rep.growth_factor > 1.0;
    let ode_agrees = match (rep.ode_check, rep.steps.first()) {
        (Some(v), Some(s)) => (v - s.discrepancy).abs() <= 1e-6 * (1.0 + s.discrepancy.abs()),
        (None, _) => !ode_check,
        _ => false,
    };
    let decays = contrast_samples.windows(2).all(|w| w[1].max_discrepancy < w[0].max_discrepancy);
    let passed = grows && ode_agrees && decays;
    let doc = report.finish(
        passed,
        json!({
            "sequence": rep,
            "contrast": contrast_samples,
            "growth_observed": grows,
            "ode_agrees": ode_agrees,
            "contrast_decreasing": decays,
        }),
    );
    emit(&sink, &doc, table)?;
    Ok(status(passed))
}

fn conjugacy_test(name: &'static str, a: &str, b: &str, seed: u64, samples: usize, common: &Common) -> Result<Status> {
    const COLUMNS: &[&str] = &["sample", "sigma", "theta", "beta", "t", "distance", "clairaut_change", "error"];
    const FLOW_TOL: f64 = 1e-12;
    const CLAIRAUT_TOL: f64 = 1e-7;
    let sink = sink(common, Format::Json)?;
    let mut report = Report::new(name, &[a, b]);
    let tol = report.positive("tol", common.tol, 1e-5)?;
    report.flag("seed", seed, 20240607u64);
    report.flag("samples", samples, 5);
    report.setting("flow-tol", FLOW_TOL);
    report.setting("clairaut-tol", CLAIRAUT_TOL);
    if samples == 0 {
        return Err(UsageError("--samples must be at least 1".into()).into());
    }
    let p1 = profile_or_report!(a, sink, report, COLUMNS);
    let p2 = profile_or_report!(b, sink, report, COLUMNS);
    let iso = spectral::isospectral_check(&p1, &p2, 1e-8);
    if !iso.isospectral {
        let doc = report.finish(
            false,
            json!({"isospectral": false, "superlevel_residual": iso.superlevel_residual, "m_difference": iso.m_difference}),
        );
        emit(&sink, &doc, Table::new(COLUMNS))?;
        return Ok(Status::Fail);
    }
    let mut opts = FlowOptions { tol: FLOW_TOL, ..FlowOptions::default() };
    if common.tau_cap.is_some() {
        opts.tau_cap = Some(report.positive("tau-cap", common.tau_cap, 1.0)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = p1.m();
    let mut points = Vec::with_capacity(samples);
    while points.len() < samples {
        let sigma = rng.gen_range(0.15 * m..0.85 * m);
        let theta = rng.gen_range(0.0..TAU);
        let beta = rng.gen_range(-PI..PI);
        let t = rng.gen_range(0.5..3.0 * m);
        let v = FlowState::new(sigma, theta, beta);
        // Stay clear of the equator orbits, where the conjugacy is not defined.
        if v.clairaut(&p1).abs() < 0.98 * p1.r_max() {
            points.push((v, t));
        }
    }
    let wrap = |x: f64| x - TAU * (x / TAU).round();
    let results = revspec::numeric::par::map(EXEC, &points, |&(v, t)| {
        let hv = flow::conjugacy_eval(&p1, &p2, v, &opts)?;
        let moved = flow::integrate(&p1, v, t, &opts)?.end;
        let lhs = flow::conjugacy_eval(&p1, &p2, moved, &opts)?;
        let rhs = flow::integrate(&p2, hv, t, &opts)?.end;
        let d = (lhs.sigma - rhs.sigma).abs().max(wrap(lhs.theta - rhs.theta).abs()).max(wrap(lhs.beta - rhs.beta).abs());
        Ok::<_, RevspecError>((d, (hv.clairaut(&p2) - v.clairaut(&p1)).abs()))
    });
    let mut table = Table::new(COLUMNS);
    let (mut worst, mut clairaut) = (0.0f64, 0.0f64);
    let mut rows = Vec::new();
    let mut passed = true;
    for (i, ((v, t), r)) in points.iter().zip(&results).enumerate() {
        match r {
            Ok((d, c)) => {
                worst = worst.max(*d);
                clairaut = clairaut.max(*c);
                table.push(vec![i.into(), v.sigma.into(), v.theta.into(), v.beta.into(), (*t).into(), (*d).into(), (*c).into(), "".into()]);
                rows.push(json!({"sigma": v.sigma, "theta": v.theta, "beta": v.beta, "t": t, "distance": d, "clairaut_change": c}));
            }
            Err(e) => {
                passed = false;
                table.push(vec![i.into(), v.sigma.into(), v.theta.into(), v.beta.into(), (*t).into(), f64::NAN.into(), f64::NAN.into(), e.name().into()]);
                rows.push(json!({"sigma": v.sigma, "theta": v.theta, "beta": v.beta, "t": t, "error": error_value(e)}));
            }
        }
    }
    passed &= worst < tol && clairaut < CLAIRAUT_TOL;
    let doc = report.finish(
        passed,
        json!({"isospectral": true, "samples": rows, "max_distance": worst, "max_clairaut_change": clairaut}),
    );
    emit(&sink, &doc, table)?;
    Ok(status(passed))
}
