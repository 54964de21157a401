use std::f64::consts::E;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use itertools::{iproduct, Itertools};
use rand::Rng;

use selection_core::bipartite::g_bipartite;
use selection_core::graphic::g_graphic;
use selection_core::harness::{
    compare_with_bound, emit_csv, run_experiment, write_csv, ExperimentConfig, ExperimentResult, Problem,
};
use selection_core::instances::ArrivalOrder;
use selection_core::numerics::{f_of_c, phase_fractions};
use selection_core::rng::trial_rng;
use selection_core::secretary::{g_secretary, SecretaryParams};
use selection_core::truthful::{audit_truthfulness, random_unit_demand, AuditReport, TruthfulParams};
use selection_core::{Error, Result};

use crate::{AuditArgs, BoundArgs, Cli, Command, GridArgs, RunArgs};

const SEED_VAR: &str = "SELECTION_LAB_SEED";

/// Returns whether every requested verdict passed.
pub fn dispatch(cli: Cli) -> Result<bool> {
    let seed = resolve_seed(cli.seed)?;
    match &cli.command {
        Command::Secretary(args) => run_problem(Problem::Secretary, args, &cli, seed),
        Command::Bipartite(args) => run_problem(Problem::Bipartite, args, &cli, seed),
        Command::Graphic(args) => run_problem(Problem::Graphic, args, &cli, seed),
        Command::TruthfulAudit(args) => truthful_audit(args, &cli, seed),
        Command::Bounds(args) => bounds(args, &cli),
        Command::Sweep(args) => {
            let path = cli.config.as_deref().ok_or_else(|| Error::Config("sweep needs --config".into()))?;
            let mut config = ExperimentConfig::from_path(path)?;
            apply_globals(&mut config, &cli, seed);
            run_and_report(&config, args.check)
        }
    }
}

/// The environment variable wins over the flag.
fn resolve_seed(flag: Option<u64>) -> Result<Option<u64>> {
    match std::env::var(SEED_VAR) {
        Ok(text) => text
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_VAR}={text:?} is not a u64"))),
        Err(_) => Ok(flag),
    }
}

fn apply_globals(config: &mut ExperimentConfig, cli: &Cli, seed: Option<u64>) {
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(trials) = cli.trials {
        config.trials = trials;
    }
    if let Some(out) = &cli.out {
        config.out = Some(out.clone());
    }
    if let Some(slack) = cli.slack {
        config.slack = Some(slack);
    }
}

/// Defaults for runs configured from flags alone.
fn flag_defaults(problem: Problem) -> ExperimentConfig {
    let mut config = ExperimentConfig::new(problem);
    match problem {
        Problem::Secretary => config.instance.n = 1000,
        Problem::Graphic => {
            config.instance.n = 30;
            config.instance.density = 200.0 / 435.0;
        }
        Problem::Bipartite | Problem::Truthful => {}
    }
    if problem != Problem::Secretary {
        config.grid.c = vec![4.0];
        config.grid.d = vec![2.0];
    }
    config
}

fn run_problem(problem: Problem, args: &RunArgs, cli: &Cli, seed: Option<u64>) -> Result<bool> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => flag_defaults(problem),
    };
    if config.problem != problem {
        return Err(Error::Config(format!("config is for {}, not {problem}", config.problem)));
    }
    apply_globals(&mut config, cli, seed);
    let GridArgs { c, d, lambda, eta } = &args.grid;
    for (axis, values) in [(&mut config.grid.c, c), (&mut config.grid.d, d), (&mut config.grid.lambda, lambda), (&mut config.grid.eta, eta)] {
        if !values.is_empty() {
            axis.clone_from(values);
        }
    }
    if let Some(n) = args.n {
        config.instance.n = n;
    }
    if let Some(m) = args.m {
        config.instance.m = Some(m);
    }
    if let Some(algorithm) = args.algorithm {
        config.algorithm = Some(algorithm);
    }
    if let Some(kind) = args.error {
        config.grid.error = kind;
    }
    if let Some(density) = args.density {
        config.instance.density = density;
    }
    if let Some(gamma) = args.gamma {
        config.grid.gamma = gamma;
    }
    if let Some(threads) = args.threads {
        config.threads = Some(threads);
    }
    run_and_report(&config, args.check)
}

fn run_and_report(config: &ExperimentConfig, check: bool) -> Result<bool> {
    config.validate()?;
    let ExperimentResult { batches, skipped } = run_experiment(config)?;
    for s in &skipped {
        eprintln!("skipped cell {}: {}", s.cell.index, s.reason);
    }
    if batches.is_empty() {
        return Err(Error::Config("every grid cell was skipped".into()));
    }
    match &config.out {
        Some(path) => write_csv(&batches, path)?,
        None => emit_csv(&batches, std::io::stdout().lock())?,
    }
    if !check {
        return Ok(true);
    }
    let slack = config.slack();
    let mut all_pass = true;
    for batch in &batches {
        let v = compare_with_bound(batch, slack);
        all_pass &= v.pass;
        eprintln!(
            "cell {} {}: mean {:.4}, bound {:.4}, margin {:+.4}",
            v.cell_index,
            if v.pass { "PASS" } else { "FAIL" },
            batch.mean_ratio,
            batch.bound,
            v.margin
        );
    }
    Ok(all_pass)
}

fn truthful_audit(args: &AuditArgs, cli: &Cli, seed: Option<u64>) -> Result<bool> {
    if args.n == 0 || args.m == 0 || args.n > 8 {
        return Err(Error::Config("need 1 <= n <= 8 agents and m >= 1 items".into()));
    }
    let instances = cli.trials.unwrap_or(200);
    let seed = seed.unwrap_or(0);
    let mut total = AuditReport::default();
    let mut csv = String::from("instance,agent,position,report,truthful_utility,deviating_utility\n");
    for k in 0..instances {
        let mut rng = trial_rng(seed, 0, k);
        let n = rng.random_range(1..=args.n);
        let m = rng.random_range(1..=args.m);
        let inst = random_unit_demand(n, m, args.max_value, 0.5, &mut rng);
        let predictions: Vec<u64> = (0..m).map(|_| rng.random_range(0..=args.max_value)).collect();
        let floor = predictions.iter().copied().min().unwrap_or(0);
        let lambda = rng.random_range(0..=floor);
        let params = TruthfulParams::new(args.c, args.d, lambda, predictions)?;
        for perm in (0..n).permutations(n) {
            let report = audit_truthfulness(&inst, &ArrivalOrder::new(perm)?, &params, args.margin)?;
            for v in &report.violations {
                let _ = writeln!(
                    csv,
                    "{k},{},{},{},{},{}",
                    v.agent, v.position, v.report, v.truthful_utility, v.deviating_utility
                );
            }
            total.merge(report);
        }
    }
    let summary = format!(
        "instances={instances} arrivals={} deviations={} violations={} monotonicity_breaks={}",
        total.arrivals,
        total.deviations,
        total.violations.len(),
        total.monotonicity_violations.len()
    );
    match &cli.out {
        Some(path) => {
            write_text(path, &csv)?;
            println!("{summary}");
        }
        None => println!("{summary}"),
    }
    Ok(total.is_clean())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Guarantee functions on a grid, with lambda and eta relative to the
/// scale in which OPT, |psi| and |V| are 1.
fn bounds(args: &BoundArgs, cli: &Cli) -> Result<bool> {
    let or = |v: &Vec<f64>, default: f64| if v.is_empty() { vec![default] } else { v.clone() };
    let g = &args.grid;
    let mut text = String::from("c,d,lambda,eta,f_c,phase_low,phase_high,g_secretary,g_bipartite,g_graphic\n");
    for (c, d, lambda, eta) in iproduct!(or(&g.c, E), or(&g.d, 1.0), or(&g.lambda, 0.0), or(&g.eta, 0.0)) {
        let fractions = phase_fractions(c)?;
        let g_sec = g_secretary(eta, &SecretaryParams::new(c, lambda, 1.0)?, 1.0);
        let (g_bip, g_gra) = if c > d && d >= 1.0 {
            (
                g_bipartite(eta, c, d, lambda, 1.0, 1).to_string(),
                g_graphic(eta, c, d, lambda, 1.0, 1).to_string(),
            )
        } else {
            (String::new(), String::new())
        };
        let _ = writeln!(
            text,
            "{c},{d},{lambda},{eta},{},{},{},{g_sec},{g_bip},{g_gra}",
            f_of_c(c)?,
            fractions.low,
            fractions.high
        );
    }
    match &cli.out {
        Some(path) => write_text(path, &text)?,
        None => {
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
        }
    }
    Ok(true)
}
