use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use regdp_core::analysis::{epsilon_bounds, render_report, verify_policy_monotonicity, verify_value_monotonicity};
use regdp_core::io::{self, RunConfig};
use regdp_core::simulator::{generate_rsr_signal, regress_t_hat_on_y, signal_stats, simulate_building};
use regdp_core::solvers::{adp_solve_with, avi_solve, cvi_solve};
use regdp_core::{Error, ModelParams, ParamSpec, PolicyTable, SolveReport, SolverKind};
use toml::Value;

use crate::{Failure, Status};

const SNAPSHOT_BUCKETS: usize = 10;

fn need_file(path: &Path, what: &str) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage(format!("{what} {} does not exist", path.display())))
    }
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    need_file(path, "config")?;
    Ok(RunConfig::load(path)?)
}

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn apply_seed(cfg: &mut RunConfig, seed: Option<u64>) {
    if let Some(s) = seed {
        cfg.seed = s;
        cfg.adp.seed = s;
    }
}

fn run_solver(cfg: &RunConfig, params: &ModelParams, solver: SolverKind) -> Result<SolveReport, Error> {
    match solver {
        SolverKind::Cvi => cvi_solve(params, cfg.price_grid_size, cfg.tol, cfg.max_iter),
        SolverKind::Avi => avi_solve(params, cfg.tol, cfg.max_iter),
        SolverKind::Adp => adp_solve_with(params, &cfg.adp),
    }
}

fn settings(cfg: &RunConfig, solver: SolverKind) -> Vec<(&'static str, Value)> {
    let mut v = vec![];
    match solver {
        SolverKind::Adp => {
            v.push(("k_min", Value::Integer(cfg.adp.k_min as i64)));
            v.push(("eps_inner", Value::Float(cfg.adp.eps_inner)));
            v.push(("tau_outer", Value::Float(cfg.adp.tau_outer)));
            v.push(("max_outer", Value::Integer(cfg.adp.max_outer as i64)));
        }
        _ => {
            v.push(("tol", Value::Float(cfg.tol)));
            v.push(("max_iter", Value::Integer(cfg.max_iter as i64)));
            if solver == SolverKind::Cvi {
                v.push(("price_grid_size", Value::Integer(cfg.price_grid_size as i64)));
            }
        }
    }
    v
}

pub fn solve(
    config: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    solver: Option<SolverKind>,
    tol: Option<f64>,
    max_iters: Option<usize>,
) -> Result<Status, Failure> {
    let mut cfg = load(config)?;
    apply_seed(&mut cfg, seed);
    let solver = solver.unwrap_or(cfg.solver);
    // For ADP the tolerance and cap refer to the outer loop.
    if let Some(t) = tol {
        cfg.tol = t;
        cfg.adp.tau_outer = t;
    }
    if let Some(m) = max_iters {
        cfg.max_iter = m;
        cfg.adp.max_outer = m;
    }
    let params = cfg.params()?;
    let dir = out_dir(out, &cfg);
    let extra = settings(&cfg, solver);

    let report = match run_solver(&cfg, &params, solver) {
        Ok(r) => r,
        Err(Error::NotConverged {
            solver: name,
            iterations,
            last_change,
            report,
        }) => {
            if let Some(r) = report {
                fs::create_dir_all(&dir)?;
                io::write_manifest(&dir.join("manifest.toml"), &io::manifest(&params, &r, &extra))?;
            }
            return Err(Failure::new(
                Status::Convergence,
                format!("{name} did not converge after {iterations} iterations (last change {last_change:e})"),
            ));
        }
        Err(e) => return Err(e.into()),
    };

    fs::create_dir_all(&dir)?;
    if let Some(v) = &report.value {
        io::write_value_csv(&dir.join("value.csv"), &params, v)?;
    }
    io::write_policy_csv(&dir.join("policy.csv"), &params, &report.policy)?;
    fs::write(dir.join("policy.bin"), io::encode_policy(&report.policy))?;
    if let Some(w) = &report.weights {
        io::write_weights(&dir.join("weights.txt"), &params, w)?;
    }
    io::write_manifest(&dir.join("manifest.toml"), &io::manifest(&params, &report, &extra))?;
    println!(
        "{solver}: {} iterations, {:.3} s, final change {:e}; wrote {}",
        report.iterations,
        report.seconds,
        report.history.last().copied().unwrap_or(f64::NAN),
        dir.display()
    );
    Ok(Status::Ok)
}

pub fn verify(config: &Path, out: Option<PathBuf>, value: &Path, policy: &Path, manifest: Option<&Path>) -> Result<Status, Failure> {
    let cfg = load(config)?;
    let params = cfg.params()?;
    if let Some(m) = manifest {
        need_file(m, "manifest")?;
        io::check_manifest(m, &params)?;
    }
    need_file(value, "value table")?;
    need_file(policy, "policy table")?;
    let j = io::read_value_csv(value, &params)?;
    let p = io::read_policy_csv(policy, &params)?;
    let bounds = epsilon_bounds(&params)?;
    let v = verify_value_monotonicity(&j, &bounds)?;
    let q = verify_policy_monotonicity(&p)?;

    let dir = out.unwrap_or_else(|| value.parent().map(Path::to_path_buf).unwrap_or_default());
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("report.toml"), render_report(&params.params_hash(), &[&v, &q]))?;

    let mut ok = true;
    for c in v.checks.iter().chain(&q.checks) {
        let state = c.worst_state().map(|s| format!(" at {s}")).unwrap_or_default();
        if c.passed() {
            println!("pass {}", c.name);
        } else {
            ok = false;
            println!(
                "FAIL {}: {} of {} violations, range [{:e}, {:e}] vs bounds [{:e}, {:e}]{state}",
                c.name, c.violations, c.checked, c.min.value, c.max.value, c.lower, c.upper
            );
        }
    }
    Ok(if ok { Status::Ok } else { Status::Verification })
}

/// `NxMx2` with `M` even.
fn parse_size(s: &str) -> Result<(u32, u32), Failure> {
    let bad = || Failure::usage(format!("bad size `{s}`: expected NxMx2 with M even"));
    let parts: Vec<&str> = s.trim().split(['x', 'X']).collect();
    let [n, m, two] = parts.as_slice() else {
        return Err(bad());
    };
    let n: u32 = n.parse().map_err(|_| bad())?;
    let m: u32 = m.parse().map_err(|_| bad())?;
    if *two != "2" || m == 0 || !m.is_multiple_of(2) || n == 0 {
        return Err(bad());
    }
    Ok((n, m))
}

fn policy_gap(a: &PolicyTable, b: &PolicyTable) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn compare(config: Option<&Path>, out: Option<PathBuf>, sizes: &str, seed: Option<u64>) -> Result<Status, Failure> {
    let mut cfg = match config {
        Some(path) => load(path)?,
        None => RunConfig::default(),
    };
    apply_seed(&mut cfg, seed);
    let sizes = sizes.split(',').map(parse_size).collect::<Result<Vec<_>, _>>()?;
    let dir = out_dir(out, &cfg);
    fs::create_dir_all(&dir)?;

    let mut rows = vec!["size,solver,seconds,iterations,policy_gap_vs_avi".to_string()];
    println!("{}", rows[0]);
    let mut failed = false;
    for (n, m) in sizes {
        let label = format!("{n}x{m}x2");
        let params = ParamSpec::scaled(n, m / 2).build()?;
        let mut results = Vec::new();
        for solver in [SolverKind::Avi, SolverKind::Cvi, SolverKind::Adp] {
            let t = Instant::now();
            let r = run_solver(&cfg, &params, solver);
            let secs = t.elapsed().as_secs_f64();
            results.push((solver, secs, r));
        }
        let reference = match &results[0].2 {
            Ok(r) => Some(r.policy.clone()),
            Err(_) => None,
        };
        for solver in [SolverKind::Cvi, SolverKind::Avi, SolverKind::Adp] {
            let (_, secs, r) = results.iter().find(|x| x.0 == solver).expect("every solver ran");
            let (iters, gap) = match r {
                Ok(rep) => (
                    rep.iterations.to_string(),
                    reference.as_ref().map_or(f64::NAN, |p| policy_gap(&rep.policy, p)),
                ),
                Err(e) => {
                    failed = true;
                    eprintln!("{label} {solver}: {e}");
                    let iters = match e {
                        Error::NotConverged { iterations, .. } => iterations.to_string(),
                        _ => String::new(),
                    };
                    (iters, f64::NAN)
                }
            };
            let row = format!("{label},{solver},{secs:.3},{iters},{gap}");
            println!("{row}");
            rows.push(row);
        }
    }
    rows.push(String::new());
    fs::write(dir.join("compare.csv"), rows.join("\n"))?;
    Ok(if failed { Status::Convergence } else { Status::Ok })
}

pub fn simulate(
    config: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    policy: Option<&Path>,
    steps: Option<usize>,
    snapshot_every: Option<usize>,
) -> Result<Status, Failure> {
    let policy = policy.ok_or_else(|| Failure::usage("simulate needs --policy"))?;
    let mut cfg = load(config)?;
    apply_seed(&mut cfg, seed);
    need_file(policy, "policy table")?;
    let params = cfg.params()?;
    let thermal = cfg.thermal(&params)?;
    let table = io::read_policy_csv(policy, &params)?;
    let steps = steps.unwrap_or(cfg.sim_steps);
    let mut opts = cfg.sim;
    if let Some(s) = snapshot_every {
        opts.snapshot_every = s;
    }

    let signal = generate_rsr_signal(&params, steps, cfg.seed)?;
    let trace = simulate_building(&params, &thermal, &table, &signal, cfg.seed.wrapping_add(1), &opts)?;
    let dir = out_dir(out, &cfg);
    fs::create_dir_all(&dir)?;
    io::write_signal_csv(&dir.join("signal.csv"), &params, &signal)?;
    io::write_trace_csv(&dir.join("trace.csv"), &params, &trace)?;
    io::write_snapshots_csv(&dir.join("snapshots.csv"), &params, &trace, SNAPSHOT_BUCKETS, thermal.t_out)?;

    let fits = trace.level_fits(&params);
    let mut text = format!("# params_hash={} seed={}\ny,t_hat,samples,ks\n", params.params_hash(), cfg.seed);
    for f in &fits {
        text.push_str(&format!("{},{},{},{}\n", f.y, f.t_hat, f.samples, f.ks));
    }
    fs::write(dir.join("fits.csv"), text)?;

    let stats = signal_stats(&params, &signal);
    let mut summary = toml::Table::new();
    summary.insert("params_hash".into(), Value::String(params.params_hash()));
    summary.insert("seed".into(), Value::Integer(cfg.seed as i64));
    summary.insert("steps".into(), Value::Integer(steps as i64));
    summary.insert("rms_error".into(), Value::Float(trace.rms_error(opts.burn_in)));
    summary.insert("connections".into(), Value::Integer(trace.connections as i64));
    summary.insert("utility".into(), Value::Float(trace.utility));
    summary.insert("persistence".into(), Value::Float(stats.persistence));
    summary.insert("mean_y".into(), Value::Float(stats.mean_y));
    summary.insert("fitted_levels".into(), Value::Integer(fits.len() as i64));
    if !fits.is_empty() {
        summary.insert("max_ks".into(), Value::Float(fits.iter().map(|f| f.ks).fold(0.0, f64::max)));
    }
    let pairs: Vec<(f64, f64)> = fits.iter().map(|f| (f.y, f.t_hat)).collect();
    match regress_t_hat_on_y(&pairs) {
        Ok(reg) => {
            summary.insert("alpha0_hat".into(), Value::Float(reg.alpha0));
            summary.insert("alpha1_hat".into(), Value::Float(reg.alpha1));
            summary.insert("r_squared".into(), Value::Float(reg.r_squared));
            summary.insert("residual_se".into(), Value::Float(reg.residual_se));
            println!(
                "T_hat = {:.4} + {:.4} y (r^2 {:.4}) from {} signal levels",
                reg.alpha0, reg.alpha1, reg.r_squared, reg.n
            );
        }
        Err(e) => eprintln!("warning: no regression of T_hat on y: {e}"),
    }
    io::write_manifest(&dir.join("summary.toml"), &summary)?;
    println!("simulated {steps} signal steps; wrote {}", dir.display());
    Ok(Status::Ok)
}

pub fn signal(config: &Path, out: Option<PathBuf>, seed: Option<u64>, steps: Option<usize>) -> Result<Status, Failure> {
    let mut cfg = load(config)?;
    apply_seed(&mut cfg, seed);
    let params = cfg.params()?;
    let steps = steps.unwrap_or(cfg.sim_steps);
    let signal = generate_rsr_signal(&params, steps, cfg.seed)?;
    let dir = out_dir(out, &cfg);
    fs::create_dir_all(&dir)?;
    io::write_signal_csv(&dir.join("signal.csv"), &params, &signal)?;
    let s = signal_stats(&params, &signal);
    println!(
        "{steps} steps, persistence {:.4}, mean y {:.4}; wrote {}",
        s.persistence,
        s.mean_y,
        dir.display()
    );
    Ok(Status::Ok)
}
