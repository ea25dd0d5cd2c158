use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use rwre::config::{parse_seed, RunConfig};
use rwre::oracle::{check_detailed_balance, exact_distribution};
use rwre::output::{self, Provenance, RunMetadata};
use rwre::study::{
    derive_seed, estimate_continuous, estimate_discrete, fit_rate, projected_continuous_draws,
    run_diagnostics, run_fluctuations, run_sweep, ExecOptions, Mode, StudyPlan,
};
use rwre::walker::run_discrete_walk;
use rwre::{ConductanceLaw, Direction, EnvironmentField, EstimateReport, LatticePoint, WalkRng};

use crate::args::Command;

pub const SEED_ENV_VAR: &str = "RWRE_SEED";

/// A failure with its exit status.
#[derive(Debug)]
pub struct CliError {
    pub kind: String,
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &str, code: i32, message: impl Into<String>) -> Self {
        Self { kind: kind.into(), code, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("usage", 2, message)
    }
}

impl fmt::Display for CliError {
    /// `error kind=<kind> code=<n> message=<json string>` on one line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = serde_json::to_string(&self.message).unwrap_or_else(|_| "\"\"".into());
        write!(f, "error kind={} code={} message={}", self.kind, self.code, msg)
    }
}

impl From<rwre::Error> for CliError {
    fn from(e: rwre::Error) -> Self {
        use rwre::Error as E;
        let code = match &e {
            E::Parse(_) => 2,
            E::InvalidLaw(_)
            | E::InvalidParameter(_)
            | E::DimensionMismatch { .. }
            | E::HorizonMismatch { .. }
            | E::NotEnoughSamples { .. }
            | E::OracleGuard(_) => 3,
            E::BudgetExceeded { .. } => 4,
            E::Io(_) | E::Json(_) => 5,
        };
        Self::new(e.kind(), code, e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    Discrete,
    Continuous,
}

/// Every setting that can change a result, after defaults are applied.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub command: &'static str,
    pub law: ConductanceLaw,
    pub d: usize,
    pub t: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    pub k: f64,
    pub xi: Direction,
    pub seed: u64,
    pub scale: f64,
    pub table1: bool,
    pub repetitions: u64,
    pub lambda: f64,
    pub process: Process,
}

/// Settings that do not change results; recorded in metadata.json only.
#[derive(Clone, Debug, Serialize)]
pub struct Execution {
    pub workers: usize,
    pub budget_draws: u64,
    pub out_dir: PathBuf,
    pub seed_source: &'static str,
}

fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new("io", 5, format!("cannot read config {}: {e}", path.display())))?;
    RunConfig::from_json_str(&text)
        .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
}

pub fn resolve(cmd: &Command, seed_env: Option<String>) -> CliResult<(Resolved, Execution)> {
    let args = cmd.args();
    let file = match &args.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let cfg = file.overridden_by(args.to_config());

    let law = match &cfg.law {
        Some(l) => l.resolve()?,
        None => ConductanceLaw::symmetric_two_point_1_4(),
    };
    let d = cfg.d.unwrap_or(2);
    if d == 0 {
        return Err(CliError::new("invalid_parameter", 3, "d must be at least 1"));
    }
    law.validate_for_dim(d)?;
    let xi = match &cfg.xi {
        Some(x) => x.resolve()?,
        None => Direction::axis(d, 0),
    };
    let table1 = cfg.table1.unwrap_or(false);
    let t = match &cfg.t {
        Some(h) => h.resolve()?,
        None if table1 => Vec::new(),
        None if matches!(cmd, Command::OracleCheck(_)) => vec![6],
        None => return Err(CliError::usage("missing --t")),
    };
    let (seed, seed_source) = match (&cfg.seed, seed_env) {
        (Some(s), _) => (s.resolve()?, "argument"),
        (None, Some(s)) => (parse_seed(&s)?, "environment"),
        (None, None) => {
            let s: u64 = rand::random();
            eprintln!("note: no seed given; generated seed {s} (rerun with --seed {s} to reproduce)");
            (s, "generated")
        }
    };
    let process = match cfg.process.as_deref() {
        None | Some("discrete") => Process::Discrete,
        Some("continuous") => Process::Continuous,
        Some(other) => return Err(CliError::usage(format!("unknown process {other:?}"))),
    };
    if process == Process::Continuous && !matches!(cmd, Command::Estimate(_)) {
        return Err(CliError::usage("--process continuous is only supported by estimate"));
    }
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(CliError::new("invalid_parameter", 3, format!("{name} must be positive, got {v}")))
        }
    };
    let resolved = Resolved {
        command: cmd.name(),
        law,
        d,
        t,
        n: cfg.n,
        k: positive("k", cfg.k.unwrap_or(1.0))?,
        xi,
        seed,
        scale: positive("scale", cfg.scale.unwrap_or(1.0))?,
        table1,
        repetitions: cfg.repetitions.unwrap_or(100),
        lambda: cfg.lambda.unwrap_or(0.05),
        process,
    };
    if resolved.n == Some(0) {
        return Err(CliError::new("invalid_parameter", 3, "n must be positive"));
    }
    let exec = Execution {
        workers: cfg.workers.unwrap_or(1).max(1),
        budget_draws: cfg.budget_draws.unwrap_or(u64::MAX),
        out_dir: cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
        seed_source,
    };
    Ok((resolved, exec))
}

fn build_plan(r: &Resolved, mode: Mode) -> CliResult<StudyPlan> {
    let mut plan = if r.table1 {
        let subset = (!r.t.is_empty()).then_some(r.t.as_slice());
        let mut p = StudyPlan::table1(r.law.clone(), r.xi.clone(), subset, r.scale, r.seed)?;
        p.d = r.d;
        p.mode = mode;
        p
    } else {
        let k = ((r.k * r.scale).round() as u64).max(1);
        StudyPlan::new(r.law.clone(), r.d, r.xi.clone(), r.t.clone(), k, r.seed, mode)
    };
    plan.n_override = r.n;
    plan.repetitions = r.repetitions;
    plan.lambda = r.lambda;
    plan.validate()?;
    Ok(plan)
}

fn exec_options(e: &Execution) -> ExecOptions {
    ExecOptions { workers: e.workers, budget_draws: e.budget_draws }
}

fn write_outputs(dir: &Path, files: &[(&str, String)]) -> CliResult<()> {
    for (name, contents) in files {
        let path = output::write_file(dir, name, contents).map_err(|e| {
            CliError::new("io", 5, format!("cannot write {}: {e}", dir.join(name).display()))
        })?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn metadata(exec: &Execution, start: Instant, started: u64, wall: Vec<(u64, f64)>) -> CliResult<String> {
    #[derive(Serialize)]
    struct Meta<'a> {
        #[serde(flatten)]
        run: RunMetadata,
        execution: &'a Execution,
    }
    let run = RunMetadata {
        started_unix_seconds: started,
        total_wall_seconds: start.elapsed().as_secs_f64(),
        wall_seconds: wall,
        workers: exec.workers,
    };
    let mut s = serde_json::to_string_pretty(&Meta { run, execution: exec }).map_err(rwre::Error::from)?;
    s.push('\n');
    Ok(s)
}

/// Runs the subcommand. Returns `Ok(false)` when a check ran but failed.
pub fn execute(cmd: &Command, r: &Resolved, exec: &Execution) -> CliResult<bool> {
    let start = Instant::now();
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let config = serde_json::to_value(r).map_err(rwre::Error::from)?;
    let opts = exec_options(exec);
    match cmd {
        Command::Estimate(_) => {
            let plan = build_plan(r, Mode::Sweep)?;
            let projected = match r.process {
                Process::Discrete => plan.projected_draws(),
                Process::Continuous => plan
                    .horizons
                    .iter()
                    .map(|&t| projected_continuous_draws(&r.law, r.d, t as f64, plan.walks(t)))
                    .sum(),
            };
            opts.check_budget(projected)?;
            println!("{}", EstimateReport::CSV_HEADER);
            for &t in &plan.horizons {
                let n = plan.walks(t);
                let seed = derive_seed(r.seed, Mode::Sweep, t);
                let report = match r.process {
                    Process::Discrete => {
                        estimate_discrete(&r.law, r.d, &r.xi, t, seed, 0..n, &opts)?.state.report(&r.law, r.d)?
                    }
                    Process::Continuous => {
                        estimate_continuous(&r.law, r.d, &r.xi, t as f64, seed, 0..n, &opts)?.state.report_untilted()?
                    }
                };
                println!("{}", report.with_seed(r.seed).to_csv_row());
            }
            Ok(true)
        }
        Command::Sweep(_) => {
            let plan = build_plan(r, Mode::Sweep)?;
            let records = run_sweep(&plan, &opts)?;
            let prov = Provenance::new(&plan, config);
            let mut files = vec![(output::SWEEP_FILE, output::sweep_csv(&prov, &records)?)];
            let fittable = records.iter().filter(|r| r.systematic_error.is_some()).count() >= 3;
            if fittable {
                let fit = fit_rate(&records)?;
                files.push((output::FIT_FILE, output::fit_json(&prov, &fit, &records)?));
                println!("slope {}", fit.slope);
            } else {
                eprintln!("note: fit.json skipped; a rate fit needs three horizons with a reference value");
            }
            let wall = records.iter().map(|r| (r.t, r.wall_seconds)).collect();
            files.push((output::METADATA_FILE, metadata(exec, start, started, wall)?));
            write_outputs(&exec.out_dir, &files)?;
            Ok(true)
        }
        Command::Fluctuations(_) => {
            let plan = build_plan(r, Mode::Fluctuations)?;
            let summaries = run_fluctuations(&plan, &opts)?;
            for s in &summaries {
                println!(
                    "t={} n={} m={} sd={} clt_scale={} skewness={} excess_kurtosis={}",
                    s.t,
                    s.n,
                    s.repetitions,
                    s.moments.std_dev(),
                    s.clt_scale,
                    s.moments.skewness,
                    s.moments.excess_kurtosis
                );
            }
            let prov = Provenance::new(&plan, config);
            write_outputs(
                &exec.out_dir,
                &[
                    (output::FLUCT_FILE, output::fluct_csv(&prov, &summaries)?),
                    (output::METADATA_FILE, metadata(exec, start, started, Vec::new())?),
                ],
            )?;
            Ok(true)
        }
        Command::Diagnostics(_) => {
            let plan = build_plan(r, Mode::Diagnostics)?;
            let report = run_diagnostics(&plan, &opts)?;
            let prov = Provenance::new(&plan, config);
            write_outputs(
                &exec.out_dir,
                &[
                    (output::DIAG_FILE, output::diag_json(&prov, &report)?),
                    (output::METADATA_FILE, metadata(exec, start, started, Vec::new())?),
                ],
            )?;
            Ok(true)
        }
        Command::OracleCheck(args) => oracle_check(r, exec, args.out_dir.is_some()),
    }
}

const ORACLE_CHECK_HEADER: &str =
    "t,n,exact_sigma,mc_sigma,mc_standard_error,tv_distance,total_mass,balance_violation,pass";

/// Walks in environment 0 of the seed against the exact kernel: the Monte
/// Carlo second moment must lie within 5 standard errors of the exact one,
/// the kernel must carry unit mass and detailed balance must hold.
fn oracle_check(r: &Resolved, exec: &Execution, write_kernels: bool) -> CliResult<bool> {
    let n = r.n.unwrap_or(100_000);
    let env = EnvironmentField::new(&r.law, r.d, r.seed, 0)?;
    let per_walk: u128 = r.t.iter().map(|&t| (2 * r.d as u128 + 1) * t as u128).sum();
    exec_options(exec).check_budget(per_walk * n as u128)?;
    let mut all = true;
    println!("{ORACLE_CHECK_HEADER}");
    for &t in &r.t {
        let kernel = exact_distribution(&env, t)?;
        let balance = check_detailed_balance(&env, t.min(rwre::oracle::BALANCE_MAX_RADIUS))?;
        let exact = kernel.second_moment(&r.xi) / t as f64;
        let mut counts: HashMap<LatticePoint, u64> = HashMap::new();
        let (mut s1, mut s2) = (0.0, 0.0);
        for i in 0..n {
            let out = run_discrete_walk(&env, &mut WalkRng::with_replica(r.seed, 0, i), t)?;
            *counts.entry(out.final_position).or_default() += 1;
            let z = r.xi.project(&out.final_position).powi(2) / t as f64;
            s1 += z;
            s2 += z * z;
        }
        let nf = n as f64;
        let mc = s1 / nf;
        let se = ((s2 / nf - mc * mc).max(0.0) / (nf - 1.0).max(1.0)).sqrt();
        let mass = kernel.total_mass();
        let pass = balance.holds && (mass - 1.0).abs() < 1e-12 && (mc - exact).abs() <= 5.0 * se.max(1e-15);
        all &= pass;
        println!(
            "{t},{n},{exact},{mc},{se},{},{mass},{},{pass}",
            kernel.tv_distance(&counts),
            balance.max_violation
        );
        if write_kernels {
            let mut buf = Vec::new();
            kernel.write_csv(&mut buf).map_err(rwre::Error::from)?;
            let text = String::from_utf8(buf).expect("kernel CSV is ASCII");
            write_outputs(&exec.out_dir, &[(&format!("oracle_t{t}.csv"), text)])?;
        }
    }
    Ok(all)
}
