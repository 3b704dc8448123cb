use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use posted_price::hard_instances::{MhrMember, RegularMember};
use posted_price::harness::{
    calibrate_c, sweep, to_csv_string, Experiment, ExperimentConfig, SweepParameter, DEFAULT_C_LADDER,
};
use posted_price::instantiation::Setting;
use posted_price::verify::{verify_instance, Instance};
use posted_price::{DistributionSpec, Error};

#[derive(Parser)]
#[command(name = "posted-price", version, about = "Pricing-query learners and their lower-bound instances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated trials of one setting and write report.json / report.csv.
    Run(RunArgs),
    /// Check the closed-form facts of a lower-bound instance.
    Verify(VerifyArgs),
    /// Run one experiment per value of eps, H or delta.
    Sweep(SweepArgs),
    /// Find the smallest budget constant C meeting a success target.
    Calibrate(CalibrateArgs),
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// regular-range, mhr-range, regular-sample, mhr-sample or general-range.
    #[arg(long)]
    setting: String,
    /// Builtin name or path to a distribution JSON file.
    #[arg(long)]
    dist: String,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 200)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "C", default_value_t = 20.0)]
    c: f64,
    /// Oracle budget as a multiple of the query bound; 0 disables the cap.
    #[arg(long, default_value_t = 10.0)]
    budget_mult: f64,
    /// Value range top; also parameterizes builtin instances.
    #[arg(long = "H")]
    h: Option<f64>,
    /// Construction parameter of builtin lower-bound instances.
    #[arg(long)]
    inst_eps: Option<f64>,
    /// Rate of the builtin trunc-exp distribution.
    #[arg(long, default_value_t = 0.25)]
    rate: f64,
    /// Location of the builtin point-mass distribution.
    #[arg(long, default_value_t = 5.0)]
    value: f64,
    /// Revenue fraction of the optimum that counts as success (default: the guarantee factor).
    #[arg(long)]
    success_factor: Option<f64>,
    /// Skip the numerical class check.
    #[arg(long)]
    no_class_check: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Also write the first trial's learner trace to trace.json.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// lb-regular-pair, lb-mhr-pair or lb-general.
    #[arg(long)]
    instance: String,
    #[arg(long = "H", default_value_t = 20.0)]
    h: f64,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    grid: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// eps, H or delta.
    #[arg(long)]
    param: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    values: Vec<f64>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_C_LADDER.to_vec())]
    ladder: Vec<f64>,
    /// Required Wilson lower bound on the success rate.
    #[arg(long, default_value_t = 0.9)]
    target: f64,
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        let code = match err.downcast_ref::<Error>() {
            Some(Error::InternalInvariant(_)) | Some(Error::BudgetExhausted { .. }) => 3,
            _ => 2,
        };
        Failure { code, err }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        anyhow::Error::from(err).into()
    }
}

type CmdResult = std::result::Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Calibrate(a) => cmd_calibrate(a),
    };
    match result {
        Ok(code) => code,
        Err(Failure { code, err }) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}

fn builtin(name: &str, a: &ExperimentArgs) -> anyhow::Result<Option<DistributionSpec>> {
    let h = a.h.unwrap_or(20.0);
    let spec = match name {
        "lb-regular-minus" | "lb-regular-pair" => DistributionSpec::LbRegularPair {
            h,
            eps: a.inst_eps.unwrap_or(0.1),
            member: RegularMember::Minus,
        },
        "lb-regular-plus" => {
            DistributionSpec::LbRegularPair { h, eps: a.inst_eps.unwrap_or(0.1), member: RegularMember::Plus }
        }
        "lb-mhr-f0" | "lb-mhr-f1" => DistributionSpec::LbMhrPair {
            eps: a.inst_eps.unwrap_or(1.0 / 64.0),
            member: if name.ends_with("f0") { MhrMember::F0 } else { MhrMember::F1 },
        },
        "lb-general" => DistributionSpec::LbGeneralFamily { h, eps: a.inst_eps.unwrap_or(0.1), member: 0 },
        "trunc-exp" => DistributionSpec::TruncatedExponential { rate: a.rate, lower: 1.0, upper: Some(a.h.unwrap_or(64.0)) },
        "point-mass" => DistributionSpec::PointMass { value: a.value },
        other => match other.strip_prefix("lb-general-k") {
            Some(k) => {
                let member = k.parse().with_context(|| format!("bad member index in '{other}'"))?;
                DistributionSpec::LbGeneralFamily { h, eps: a.inst_eps.unwrap_or(0.1), member }
            }
            None => return Ok(None),
        },
    };
    Ok(Some(spec))
}

fn load_distribution(a: &ExperimentArgs) -> anyhow::Result<DistributionSpec> {
    if let Some(spec) = builtin(&a.dist, a)? {
        return Ok(spec);
    }
    let path = Path::new(&a.dist);
    if !path.exists() {
        bail!("'{}' is neither a builtin distribution nor a file", a.dist);
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(DistributionSpec::from_json(&text)?)
}

fn config(a: &ExperimentArgs) -> anyhow::Result<ExperimentConfig> {
    let setting: Setting = a.setting.parse()?;
    let mut cfg = ExperimentConfig::new(setting, load_distribution(a)?, a.eps, a.delta);
    cfg.h = a.h;
    cfg.c = a.c;
    cfg.trials = a.trials;
    cfg.seed = a.seed;
    cfg.oracle_budget_multiplier = (a.budget_mult > 0.0).then_some(a.budget_mult);
    cfg.check_class = !a.no_class_check;
    cfg.success_factor = a.success_factor;
    Ok(cfg)
}

fn install_pool(jobs: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting worker pool")?;
    }
    Ok(())
}

fn write_out(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_run(a: RunArgs) -> CmdResult {
    install_pool(a.exp.jobs)?;
    let cfg = config(&a.exp)?;
    let exp = Experiment::prepare(&cfg)?;
    let report = exp.run()?;
    write_out(&a.exp.out, "report.json", &report.to_json()?)?;
    write_out(&a.exp.out, "report.csv", &to_csv_string(std::slice::from_ref(&report))?)?;
    if a.trace {
        let (_, trace) = exp.trial(0)?;
        write_out(&a.exp.out, "trace.json", &serde_json::to_string_pretty(&trace).context("encoding trace")?)?;
    }
    println!(
        "{} on {}: {}/{} successes (rate {:.3}, 95% CI [{:.3}, {:.3}]), mean queries {:.0}, bound {}",
        report.setting,
        a.exp.dist,
        report.successes,
        report.trials,
        report.success_rate,
        report.wilson_ci_95.0,
        report.wilson_ci_95.1,
        report.queries.mean,
        report.theoretical_query_bound
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let instance: Instance = a.instance.parse()?;
    let eps = a.eps.unwrap_or(match instance {
        Instance::LbMhrPair => 1.0 / 64.0,
        _ => 0.1,
    });
    let report = verify_instance(instance, a.h, eps, a.grid, a.tol)?;
    let width = report.facts.iter().map(|f| f.name.len()).max().unwrap_or(0);
    println!("{:width$}  {:>24}  {:>24}  status", "fact", "expected", "computed");
    for f in &report.facts {
        let status = if f.passed { "ok" } else { "FAIL" };
        println!("{:width$}  {:>24}  {:>24}  {status}", f.name, f.expected, f.computed);
    }
    if report.passed() {
        println!("{}: all {} facts hold", instance, report.facts.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("{}: {} of {} facts failed", instance, report.failures().count(), report.facts.len());
        Ok(ExitCode::from(1))
    }
}

fn cmd_sweep(a: SweepArgs) -> CmdResult {
    install_pool(a.exp.jobs)?;
    let param: SweepParameter = a.param.parse()?;
    let cfg = config(&a.exp)?;
    let report = sweep(&cfg, param, &a.values)?;
    write_out(&a.exp.out, "sweep.json", &serde_json::to_string_pretty(&report).context("encoding sweep")?)?;
    write_out(&a.exp.out, "sweep.csv", &to_csv_string(&report.reports)?)?;
    for (v, r) in report.values.iter().zip(&report.reports) {
        println!("{}={v}: success {:.3}, mean queries {:.0}", param.label(), r.success_rate, r.queries.mean);
    }
    match report.log_log_slope {
        Some(s) => println!("log-log slope of mean queries: {s:.3}"),
        None => println!("log-log slope of mean queries: n/a"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_calibrate(a: CalibrateArgs) -> CmdResult {
    install_pool(a.exp.jobs)?;
    let cfg = config(&a.exp)?;
    let report = calibrate_c(&cfg, &a.ladder, a.target)?;
    write_out(&a.exp.out, "calibration.json", &serde_json::to_string_pretty(&report).context("encoding calibration")?)?;
    write_out(&a.exp.out, "calibration.csv", &to_csv_string(&report.reports)?)?;
    println!("{:>8}  {:>8}  {:>8}  {:>8}", "C", "rate", "ci_lo", "ci_hi");
    for (c, r) in report.ladder.iter().zip(&report.reports) {
        println!("{c:>8}  {:>8.3}  {:>8.3}  {:>8.3}", r.success_rate, r.wilson_ci_95.0, r.wilson_ci_95.1);
    }
    match report.chosen_c {
        Some(c) => println!("smallest C meeting target {}: {c}", a.target),
        None => println!("no C on the ladder meets target {}", a.target),
    }
    Ok(ExitCode::SUCCESS)
}
