//! `biascorr`: run bias-correction simulations, correct estimates from data
//! files, check the V-statistic identities and merge result tables.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use biascorr::corrections::{estimate_bias, estimate_panel_bias, CorrectionOpts, Method};
use biascorr::estimate::{fit_mle_default, fit_panel_mle_default};
use biascorr::hovar::{estimate_hovar_panel, estimate_upsilon_cross};
use biascorr::montecarlo::{
    merge_report, parse_csv, render_csv, render_markdown, run_experiment, DgpKind, DgpSpec, Format,
    SimulationConfig,
};
use biascorr::verify::{run_identity_suite, VerifyOpts};
use biascorr::{
    builtin_model, BuiltinName, Dataset, Error, Model, PanelDataset, Result, SolverOpts,
};

use config::Config;

#[derive(Debug, Parser)]
#[command(
    name = "biascorr",
    version,
    about = "Bias-corrected maximum likelihood experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Monte Carlo design and write CSV and markdown summaries.
    Simulate(SimulateArgs),
    /// Fit a model to a data file and print bias-corrected estimates.
    Correct(CorrectArgs),
    /// Check the closed-form identities on randomized cases.
    Verify(VerifyArgs),
    /// Merge summary CSVs into one side-by-side markdown table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Config file with [dgp], [experiment], [solver] and [output] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// sqrt-mean-normal, neyman-scott, panel-probit-serial, panel-probit-iid or ar1.
    #[arg(long)]
    dgp: Option<String>,
    /// Number of observations, or units for panels [default: 100].
    #[arg(long)]
    n: Option<usize>,
    /// Periods per unit, or series length for ar1 [default: 8].
    #[arg(long = "T")]
    periods: Option<usize>,
    /// True parameter [default: 1, 0.8 for ar1].
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<f64>,
    /// Innovation standard deviation (ar1 only).
    #[arg(long)]
    sigma: Option<f64>,
    /// Monte Carlo replications [default: 1000].
    #[arg(long)]
    reps: Option<usize>,
    /// Master seed [default: 42].
    #[arg(long, env = "BIASCORR_SEED")]
    seed: Option<u64>,
    /// Comma-separated: mle, jackknife, split, bootstrap, analytic-sample,
    /// analytic-infoeq, analytic-integral, ar1-analytic.
    #[arg(long)]
    estimators: Option<String>,
    /// Bootstrap resamples per replicate [default: 1000].
    #[arg(long = "bootstrap-B")]
    bootstrap_b: Option<usize>,
    /// Directory for the CSV and markdown files [default: .].
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Format printed to stdout; both files are always written.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Debug, Args)]
struct CorrectArgs {
    /// CSV data: one row per observation, or unit,period,... for panels.
    #[arg(long)]
    data: PathBuf,
    /// sqrt-mean-normal, ar1, neyman-scott or probit.
    #[arg(long)]
    model: String,
    /// Comma-separated correction methods.
    #[arg(long, default_value = "jackknife")]
    methods: String,
    #[arg(long = "bootstrap-B", default_value_t = 1000)]
    bootstrap_b: usize,
    #[arg(long, env = "BIASCORR_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Random cases per identity.
    #[arg(long, default_value_t = 1000)]
    cases: usize,
    #[arg(long, env = "BIASCORR_SEED")]
    seed: Option<u64>,
    #[arg(long, hide = true, default_value_t = 0.0)]
    perturb: f64,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Summary CSVs written by `simulate`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn list<T: std::str::FromStr<Err = Error>>(text: &str) -> Result<Vec<T>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse())
        .collect()
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

struct Resolved {
    config: SimulationConfig,
    out_dir: PathBuf,
    format: Format,
}

fn resolve(args: SimulateArgs) -> Result<Resolved> {
    let file = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let dgp_name = pick(
        args.dgp,
        file.get("dgp.name").map(str::to_string),
        "panel-probit-serial".into(),
    );
    let theta = args.theta.or(file.parsed("dgp.theta")?);
    let sigma = args.sigma.or(file.parsed("dgp.sigma")?);
    let kind = DgpKind::from_name(&dgp_name, theta, sigma)?;
    let n = pick(args.n, file.parsed("dgp.n")?, 100);
    let periods = pick(args.periods, file.parsed("dgp.T")?, 8);
    let reps = pick(args.reps, file.parsed("experiment.reps")?, 1000);
    let seed = pick(args.seed, file.parsed("experiment.seed")?, 42);
    let names = pick(
        args.estimators,
        file.get("experiment.estimators").map(str::to_string),
        {
            if kind.is_panel() {
                "mle,jackknife,split"
            } else {
                "mle,jackknife,split,bootstrap"
            }
            .to_string()
        },
    );
    let mut config = SimulationConfig::new(DgpSpec { kind, n, periods }, list(&names)?, reps, seed);
    config.bootstrap_b = pick(
        args.bootstrap_b,
        file.parsed("experiment.bootstrap-B")?,
        1000,
    );
    config.workers = args.workers.or(file.parsed("experiment.workers")?);
    config.null_value = file.parsed("experiment.null")?;
    if let Some(levels) = file.get("experiment.levels") {
        config.test_levels = levels
            .split(',')
            .map(|l| {
                l.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad level `{l}`")))
            })
            .collect::<Result<_>>()?;
    }
    let d = SolverOpts::default();
    config.solver = SolverOpts {
        score_tol: file.parsed("solver.score_tol")?.unwrap_or(d.score_tol),
        step_tol: file.parsed("solver.step_tol")?.unwrap_or(d.step_tol),
        max_iter: file.parsed("solver.max_iter")?.unwrap_or(d.max_iter),
        max_halvings: file
            .parsed("solver.max_halvings")?
            .unwrap_or(d.max_halvings),
    };
    config.validate()?;
    let out_dir = pick(
        args.out_dir,
        file.get("output.out-dir").map(PathBuf::from),
        PathBuf::from("."),
    );
    let format = pick(
        args.format,
        file.get("output.format").map(str::to_string),
        "md".into(),
    )
    .parse()?;
    Ok(Resolved {
        config,
        out_dir,
        format,
    })
}

fn header(config: &SimulationConfig, prefix: &str, suffix: &str) -> String {
    let mut out = String::new();
    for (k, v) in config.describe() {
        out.push_str(&format!("{prefix}{k} = {v}{suffix}\n"));
    }
    out
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let Resolved {
        config,
        out_dir,
        format,
    } = resolve(args)?;
    let outcome = run_experiment(&config)?;
    std::fs::create_dir_all(&out_dir)?;
    let dgp = &config.dgp;
    let stem = dgp.file_stem();
    let csv = format!(
        "{}{}",
        header(&config, "# ", ""),
        render_csv(&outcome.summary)
    );
    let md = format!(
        "{}\n**{}, {}** ({} replicates, {} failed)\n\n{}",
        header(&config, "<!-- ", " -->"),
        dgp.kind.name(),
        dgp,
        outcome.replications,
        outcome.failed_replicates,
        render_markdown(&outcome.summary)
    );
    std::fs::write(out_dir.join(format!("{stem}.csv")), &csv)?;
    std::fs::write(out_dir.join(format!("{stem}.md")), &md)?;
    match format {
        Format::Csv => print!("{csv}"),
        Format::Markdown => print!("{md}"),
    }
    Ok(())
}

enum Loaded {
    Cross(Dataset),
    Panel(PanelDataset),
}

fn load(path: &Path, model: &Model) -> Result<Loaded> {
    if !path.exists() {
        return Err(Error::Parse(format!("{}: no such file", path.display())));
    }
    Ok(match model {
        Model::Scalar(m) if m.name() == "ar1" => {
            let series = Dataset::from_csv_path(path)?;
            if series.width() != 1 {
                return Err(Error::Parse("ar1 expects a single column series".into()));
            }
            Loaded::Cross(Dataset::lagged(&series.column(0))?)
        }
        Model::Scalar(_) => Loaded::Cross(Dataset::from_csv_path(path)?),
        Model::Panel(_) => Loaded::Panel(PanelDataset::from_csv_path(path)?),
    })
}

fn with_method(method: Method, e: Error) -> Error {
    Error::UnsupportedMethod {
        method: method.name().into(),
        reason: e.to_string(),
    }
}

fn correct(args: CorrectArgs) -> Result<()> {
    let model = builtin_model(args.model.parse::<BuiltinName>()?);
    let methods: Vec<Method> = list(&args.methods)?;
    let data = load(&args.data, &model)?;
    let opts = CorrectionOpts {
        bootstrap_b: args.bootstrap_b,
        seed: args.seed,
        solver: SolverOpts::default(),
    };
    match (&model, &data) {
        (Model::Scalar(m), Loaded::Cross(d)) => {
            let full = fit_mle_default(d, m.as_ref(), &opts.solver)?;
            println!("model = {}", m.name());
            println!("n = {}", d.len());
            println!("theta_hat = {}", full.theta_hat);
            println!("se = {}", full.se);
            let hov = estimate_upsilon_cross(d, m.as_ref(), full.theta_hat).ok();
            for method in methods {
                let b = estimate_bias(method, d, m.as_ref(), &full, &opts)
                    .map_err(|e| with_method(method, e))?;
                println!("[{}]", method.name());
                println!("  bias_estimate = {}", b.value);
                println!("  corrected = {}", b.corrected(full.theta_hat));
                if let Some(h) = hov {
                    let var = if method == Method::SplitSample {
                        h.split(d.len())
                    } else {
                        h.jackknife(d.len())
                    };
                    println!("  higher_order_variance = {var}");
                }
            }
            if let Some(h) = hov {
                println!("asymptotic_variance = {}", h.leading);
                println!("upsilon = {}", h.upsilon);
            }
        }
        (Model::Panel(m), Loaded::Panel(p)) => {
            let full = fit_panel_mle_default(p, m.as_ref(), &opts.solver)?;
            println!("model = {}", m.name());
            println!("n = {}, T = {}", p.n(), p.periods());
            println!("theta_hat = {}", full.theta_hat);
            println!("se = {}", full.se);
            println!("dropped_units = {}", full.dropped_units.len());
            let hov = estimate_hovar_panel(p, m.as_ref(), &full).ok();
            for method in methods {
                let b = estimate_panel_bias(method, p, m.as_ref(), &full, &opts)
                    .map_err(|e| with_method(method, e))?;
                println!("[{}]", method.name());
                println!("  bias_estimate = {}", b.value);
                println!("  corrected = {}", b.corrected(full.theta_hat));
                if let Some(h) = hov {
                    let var = if method.for_panel() == Method::PanelSplitSample {
                        h.panel_split(p.periods())
                    } else {
                        h.panel_jackknife(p.periods())
                    };
                    println!("  higher_order_variance = {var}");
                }
            }
            if let Some(h) = hov {
                println!("asymptotic_variance = {}", h.leading);
                println!("upsilon = {}", h.upsilon);
            }
        }
        _ => unreachable!("data loaded to match the model"),
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<bool> {
    let defaults = VerifyOpts::default();
    let opts = VerifyOpts {
        cases: args.cases,
        seed: args.seed.unwrap_or(defaults.seed),
        perturb: args.perturb,
        ..defaults
    };
    if opts.cases == 0 {
        return Err(Error::Config("--cases must be at least 1".into()));
    }
    let reports = run_identity_suite(&opts);
    let mut all = true;
    for r in &reports {
        all &= r.ok();
        println!(
            "{} {:<52} {}/{} max rel err {:.3e}",
            if r.ok() { "PASS" } else { "FAIL" },
            r.name,
            r.passed,
            r.cases,
            r.max_rel_error
        );
    }
    let passed = reports.iter().filter(|r| r.ok()).count();
    println!("{passed}/{} identities hold", reports.len());
    Ok(all)
}

fn report(args: ReportArgs) -> Result<()> {
    let panels = args
        .inputs
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?;
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("summary");
            parse_csv(&text, stem)
        })
        .collect::<Result<Vec<_>>>()?;
    let md = merge_report(&panels)?;
    match args.out {
        Some(path) => std::fs::write(path, md)?,
        None => print!("{md}"),
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ExcessFailures { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a).map(|_| true),
        Command::Correct(a) => correct(a).map(|_| true),
        Command::Verify(a) => verify(a),
        Command::Report(a) => report(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
