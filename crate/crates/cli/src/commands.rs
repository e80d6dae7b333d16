//! Subcommand bodies. Each writes its artifacts plus `manifest.json` into `settings.out`.

use std::collections::BTreeMap;
use std::path::Path;

use kellerpath::continuation::{self, TraceOptions};
use kellerpath::{gluing, monotone, spectrum, verify, Domain64, Error, Params64};
use serde_json::{json, Value};

use crate::config::Settings;
use crate::manifest::{Run, RunManifest};
use crate::svg::{Chart, Series};
use crate::Failure;

fn solver(command: &str) -> impl Fn(Error) -> Failure + '_ {
    move |error| match error {
        Error::InvalidParams(msg) => Failure::Usage(msg),
        error => Failure::Solver { command: command.into(), error },
    }
}

fn io(command: &str) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io { command: command.into(), message: e.to_string() }
}

/// Numerical constants that fix the outputs, recorded in every manifest.
fn constants() -> BTreeMap<String, Value> {
    let mut m = BTreeMap::new();
    m.insert("eig_nodes".into(), json!(spectrum::EIG_NODES));
    m.insert("base_nodes".into(), json!(monotone::BASE_NODES));
    m.insert("mu_cap".into(), json!(monotone::MU_CAP));
    m.insert("min_width".into(), json!(monotone::MIN_WIDTH));
    m.insert("scan_points".into(), json!(monotone::SCAN_POINTS));
    m.insert("glue_delta".into(), json!(gluing::DELTA));
    m.insert("glue_fd_step".into(), json!(gluing::FD_STEP));
    m.insert("match_tol".into(), json!(gluing::MATCH_TOL));
    m.insert("branch_nodes".into(), json!(continuation::NODES));
    m.insert("step_min".into(), json!(continuation::STEP_MIN));
    m.insert("step_max".into(), json!(continuation::STEP_MAX));
    m.insert("start_amplitude".into(), json!(continuation::START_AMPLITUDE));
    m.insert("mu_scale".into(), json!(continuation::MU_SCALE));
    m.insert("ladder".into(), json!(verify::LADDER));
    m.insert("kernel_threshold".into(), json!(verify::KERNEL_THRESHOLD));
    m.insert("blowup_window".into(), json!(verify::BLOWUP_WINDOW));
    m.insert("sensitivity_step".into(), json!(verify::SENSITIVITY_STEP));
    m
}

fn params_of(s: &Settings) -> BTreeMap<String, Value> {
    let mut m = match serde_json::to_value(s) {
        Ok(Value::Object(o)) => o.into_iter().collect(),
        _ => BTreeMap::new(),
    };
    m.insert("constants".into(), json!(constants()));
    // no command draws random numbers; kept so the manifest layout is fixed
    m.insert("seeds".into(), json!([]));
    m
}

pub fn dispatch(command: &str, s: &Settings) -> Result<(), Failure> {
    if command == "report" {
        return report(s);
    }
    let mut run = Run::start(&s.out, command).map_err(io(command))?;
    let outcome = match command {
        "eigs" => eigs(s, &mut run),
        "monotone" => monotone_cmd(s, &mut run),
        "glue" => glue(s, &mut run),
        "branch" => branch(s, &mut run),
        "verify" => verify_cmd(s, &mut run),
        other => Err(Failure::Usage(format!("unknown command {other}"))),
    };
    // the manifest always matches what is on disk, including partial runs
    run.finish(params_of(s)).map_err(io(command))?;
    outcome
}

fn profile_points(grid: &[f64], u: &[f64]) -> Vec<(f64, f64)> {
    grid.iter().copied().zip(u.iter().copied()).collect()
}

fn eigs(s: &Settings, run: &mut Run) -> Result<(), Failure> {
    let err = solver("eigs");
    if s.count == 0 {
        return Err(Failure::Usage("count must be positive".into()));
    }
    let domain = Domain64::new(s.dim, s.a, s.b).map_err(&err)?;
    let pairs = run.stage("compute", || spectrum::radial_neumann_eigs(&domain, s.count)).map_err(&err)?;
    let mut csv = String::from("i,lambda,cubic_integral\n");
    for p in &pairs {
        csv.push_str(&format!("{},{:.16e},{:.16e}\n", p.index, p.lam, spectrum::cubic_integral(p)));
    }
    run.write("eigs.csv", &csv).map_err(io("eigs"))?;
    if s.plot {
        let series = pairs.iter().map(|p| Series { name: format!("phi_{}", p.index), points: profile_points(&p.phi.grid, &p.phi.u) }).collect();
        let chart = Chart { title: "Radial Neumann eigenfunctions", xlabel: "r", ylabel: "phi", log_y: false, series };
        run.write("eigs.svg", &chart.render()).map_err(io("eigs"))?;
    }
    Ok(())
}

fn monotone_cmd(s: &Settings, run: &mut Run) -> Result<(), Failure> {
    let err = solver("monotone");
    let params = Params64::new(s.dim, s.mu, s.a, s.b).map_err(&err)?;
    let sol = run.stage("compute", || monotone::solve(&params, s.direction())).map_err(&err)?;
    run.write("profile.csv", &sol.profile.to_csv_string()).map_err(io("monotone"))?;
    let info = json!({
        "mu": sol.mu,
        "N": s.dim,
        "a": s.a,
        "b": s.b,
        "direction": s.direction,
        "boundary_value": sol.boundary_value,
        "start_value": sol.start_value,
        "lower_state": sol.lower,
        "energy": sol.energy,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "diagnostics": sol.diagnostics(),
    });
    run.write_json("solution.json", &info).map_err(io("monotone"))?;
    if s.plot {
        let p = &sol.profile;
        let chart = Chart {
            title: "Monotone solution",
            xlabel: "r",
            ylabel: "u",
            log_y: false,
            series: vec![Series { name: format!("{} mu={}", s.direction, s.mu), points: profile_points(&p.grid, &p.u) }],
        };
        run.write("profile.svg", &chart.render()).map_err(io("monotone"))?;
    }
    Ok(())
}

fn glue(s: &Settings, run: &mut Run) -> Result<(), Failure> {
    let err = solver("glue");
    let params = Params64::new(s.dim, s.mu, s.a, s.b).map_err(&err)?;
    let sol = run.stage("compute", || gluing::k_layer(&params, s.k, s.boundary_layer, s.annulus_left)).map_err(&err)?;
    run.write("profile.csv", &sol.profile.to_csv_string()).map_err(io("glue"))?;
    let info = json!({
        "mu": sol.mu,
        "N": s.dim,
        "a": s.a,
        "b": s.b,
        "k": sol.k,
        "boundary_layer": sol.boundary_layer,
        "annulus_left": sol.annulus_left,
        "kinds": sol.kinds,
        "betas": sol.betas,
        "alphas": sol.alphas,
        "limit_betas": sol.limit_betas,
        "limit_alphas": sol.limit_alphas,
        "amps": sol.limit.amps,
        "limit_residual": sol.limit.residual,
        "s_bar_infty": sol.s_bar_infty,
        "match_residual": sol.match_residual,
        "root_residual": sol.root_residual,
        "value_jumps": sol.value_jumps,
        "junction_slope": sol.junction_slope,
        "mass_balance": sol.mass_balance,
        "converged": sol.converged,
        "iterations": sol.iterations,
        "violations": sol.violations,
    });
    run.write_json("layers.json", &info).map_err(io("glue"))?;
    if s.plot {
        let p = &sol.profile;
        let limit: Vec<(f64, f64)> = p.grid.iter().filter_map(|&r| sol.limit.profile_at(r).ok().map(|v| (r, v))).collect();
        let chart = Chart {
            title: "Layered solution",
            xlabel: "r",
            ylabel: "u",
            log_y: false,
            series: vec![
                Series { name: format!("u mu={}", s.mu), points: profile_points(&p.grid, &p.u) },
                Series { name: "limit".into(), points: limit },
            ],
        };
        run.write("profile.svg", &chart.render()).map_err(io("glue"))?;
    }
    if !sol.converged {
        return Err(Failure::Solver { command: "glue".into(), error: Error::NewtonStall { residual: sol.match_residual } });
    }
    Ok(())
}

fn branch(s: &Settings, run: &mut Run) -> Result<(), Failure> {
    let err = solver("branch");
    let domain = Domain64::new(s.dim, s.a, s.b).map_err(&err)?;
    let opts = TraceOptions { max_steps: s.max_steps, ..TraceOptions::default() };
    let br = run.stage("compute", || continuation::trace_branch_with(&domain, s.i, s.sign(), s.mu_max, &opts)).map_err(&err)?;
    run.write("branch.csv", &br.to_csv_string()).map_err(io("branch"))?;
    let info = json!({
        "id": br.id(),
        "branch": br,
        "violations": br.violations(),
    });
    run.write_json("branch.json", &info).map_err(io("branch"))?;
    if s.profiles {
        for (rec, p) in br.records.iter().zip(&br.profiles) {
            run.write(&format!("profiles/{}.csv", rec.profile_ref), &p.to_csv_string()).map_err(io("branch"))?;
        }
    }
    if s.plot {
        let chart = Chart {
            title: "Bifurcation diagram",
            xlabel: "mu",
            ylabel: "u(inner end)",
            log_y: false,
            series: vec![Series { name: br.id(), points: br.records.iter().map(|r| (r.mu, r.u0)).collect() }],
        };
        run.write("bifurcation.svg", &chart.render()).map_err(io("branch"))?;
    }
    Ok(())
}

fn verify_cmd(s: &Settings, run: &mut Run) -> Result<(), Failure> {
    let reports = run.stage("compute", || verify::run_suite(s.suite(), s.dim)).map_err(solver("verify"))?;
    run.write_json("report.json", &reports).map_err(io("verify"))?;
    println!("{}", serde_json::to_string_pretty(&reports).unwrap_or_default());
    if s.plot {
        let series: Vec<Series> =
            reports.iter().filter_map(|r| r.trend.as_ref().map(|t| Series { name: r.name.clone(), points: t.clone() })).collect();
        if !series.is_empty() {
            let chart = Chart { title: "Gap along mu", xlabel: "mu", ylabel: "gap", log_y: true, series };
            run.write("trends.svg", &chart.render()).map_err(io("verify"))?;
        }
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(Failure::ChecksFailed(failed));
    }
    Ok(())
}

/// Summarizes `out`: every artifact named by its manifest must exist.
fn report(s: &Settings) -> Result<(), Failure> {
    let m = RunManifest::read(&s.out).map_err(io("report"))?;
    let files: Vec<Value> = m
        .outputs
        .iter()
        .map(|f| {
            let meta = std::fs::metadata(s.out.join(f)).ok();
            json!({ "file": f, "exists": meta.is_some(), "bytes": meta.map(|m| m.len()) })
        })
        .collect();
    let missing: Vec<&String> = m.outputs.iter().filter(|f| !s.out.join(f).is_file()).collect();
    let summary = json!({
        "dir": s.out.display().to_string(),
        "command": m.command,
        "version": m.version,
        "params": m.params,
        "timings": m.timings,
        "outputs": files,
        "summary": summarize(&s.out, &m),
    });
    println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
    if !missing.is_empty() {
        return Err(Failure::Io { command: "report".into(), message: format!("missing artifacts: {missing:?}") });
    }
    Ok(())
}

fn summarize(dir: &Path, m: &RunManifest) -> Value {
    let read = |f: &str| std::fs::read_to_string(dir.join(f)).ok().and_then(|t| serde_json::from_str::<Value>(&t).ok());
    match m.command.as_str() {
        "verify" => match read("report.json") {
            Some(Value::Array(rs)) => {
                let failed: Vec<&Value> = rs.iter().filter(|r| r["pass"] != json!(true)).map(|r| &r["name"]).collect();
                json!({ "checks": rs.len(), "failed": failed })
            }
            _ => Value::Null,
        },
        "monotone" => read("solution.json").unwrap_or(Value::Null),
        "glue" => read("layers.json")
            .map(|v| json!({ "k": v["k"], "match_residual": v["match_residual"], "converged": v["converged"] }))
            .unwrap_or(Value::Null),
        "branch" => read("branch.json")
            .map(|v| json!({ "id": v["id"], "stop": v["branch"]["stop"], "records": v["branch"]["records"].as_array().map(|a| a.len()) }))
            .unwrap_or(Value::Null),
        "eigs" => std::fs::read_to_string(dir.join("eigs.csv")).map(|t| json!({ "rows": t.lines().count().saturating_sub(1) })).unwrap_or(Value::Null),
        _ => Value::Null,
    }
}
