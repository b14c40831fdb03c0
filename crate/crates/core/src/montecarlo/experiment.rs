use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corrections::{estimate_bias, estimate_panel_bias, CorrectionOpts, Method};
use crate::error::{Error, Result};
use crate::estimate::{fit_mle_default, fit_panel_mle_default, SolverOpts};
use crate::models::Model;
use crate::numeric::{normal_critical_value, stream_seed, NeumaierSum};

use super::dgp::{generate, DgpKind, DgpSpec, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Mle,
    Corrected(Method),
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Mle => "mle",
            Estimator::Corrected(m) => m.name(),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("mle") {
            Ok(Estimator::Mle)
        } else {
            s.parse().map(Estimator::Corrected)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub dgp: DgpSpec,
    pub estimators: Vec<Estimator>,
    pub replications: usize,
    pub master_seed: u64,
    pub bootstrap_b: usize,
    pub test_levels: Vec<f64>,
    /// Value tested by the Wald statistics; the design's θ when `None`.
    pub null_value: Option<f64>,
    /// Worker threads; all available cores when `None`. Results do not
    /// depend on it.
    pub workers: Option<usize>,
    pub solver: SolverOpts,
}

impl SimulationConfig {
    pub fn new(
        dgp: DgpSpec,
        estimators: Vec<Estimator>,
        replications: usize,
        master_seed: u64,
    ) -> Self {
        SimulationConfig {
            dgp,
            estimators,
            replications,
            master_seed,
            bootstrap_b: 1000,
            test_levels: vec![0.10, 0.05],
            null_value: None,
            workers: None,
            solver: SolverOpts::default(),
        }
    }

    pub fn null(&self) -> f64 {
        self.null_value.unwrap_or(self.dgp.kind.theta())
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.test_levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(Error::Config("test levels must lie in (0, 1)".into()));
        }
        let model = self.dgp.kind.model();
        for e in &self.estimators {
            let Estimator::Corrected(m) = *e else {
                continue;
            };
            let fits = match (&model, m) {
                (Model::Panel(_), Method::JackknifeLoo | Method::SplitSample) => true,
                (Model::Panel(_), _) => false,
                (Model::Scalar(_), Method::Ar1Analytic) => {
                    matches!(self.dgp.kind, DgpKind::Ar1 { .. })
                }
                (Model::Scalar(s), Method::AnalyticIntegral) => {
                    s.expectations(self.dgp.kind.theta()).is_some()
                }
                (Model::Scalar(_), Method::Bootstrap) => self.bootstrap_b > 0,
                (Model::Scalar(_), _) => !m.is_panel(),
            };
            if !fits {
                return Err(Error::Config(format!(
                    "estimator `{}` does not apply to the {} design",
                    m.name(),
                    self.dgp.kind.name()
                )));
            }
        }
        Ok(())
    }

    /// Resolved settings as `key = value` pairs, excluding the worker count.
    pub fn describe(&self) -> Vec<(String, String)> {
        let mut out = vec![("dgp".to_string(), self.dgp.kind.name().to_string())];
        out.push(("theta".into(), self.dgp.kind.theta().to_string()));
        if let DgpKind::Ar1 { sigma, .. } = self.dgp.kind {
            out.push(("sigma".into(), sigma.to_string()));
        }
        if !matches!(self.dgp.kind, DgpKind::Ar1 { .. }) {
            out.push(("n".into(), self.dgp.n.to_string()));
        }
        if !matches!(self.dgp.kind, DgpKind::SqrtMeanNormal { .. }) {
            out.push(("T".into(), self.dgp.periods.to_string()));
        }
        out.push(("reps".into(), self.replications.to_string()));
        out.push(("seed".into(), self.master_seed.to_string()));
        let names: Vec<&str> = self.estimators.iter().map(|e| e.name()).collect();
        out.push(("estimators".into(), names.join(",")));
        out.push(("bootstrap-B".into(), self.bootstrap_b.to_string()));
        let levels: Vec<String> = self.test_levels.iter().map(|l| l.to_string()).collect();
        out.push(("levels".into(), levels.join(",")));
        out.push(("null".into(), self.null().to_string()));
        out
    }
}

/// Estimates from one replicate, one entry per estimator in config order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub theta_hat: f64,
    pub se: f64,
    pub estimates: Vec<f64>,
    /// Bias estimate `b̂` behind each corrected estimate; `None` for the MLE.
    pub biases: Vec<Option<f64>>,
}

/// Per-estimator failure flags of a failed replicate.
pub type ReplicateFailure = Vec<bool>;

fn run_one(
    config: &SimulationConfig,
    replicate: usize,
) -> std::result::Result<ReplicateOutcome, ReplicateFailure> {
    let k = config.estimators.len();
    let seed = stream_seed(config.master_seed, replicate as u64);
    let all_failed = || vec![true; k];
    let sample = generate(&config.dgp, seed).map_err(|_| all_failed())?;
    let copts = CorrectionOpts {
        bootstrap_b: config.bootstrap_b,
        seed: stream_seed(seed, u64::MAX),
        solver: config.solver,
    };
    let (theta_hat, se, biases): (f64, f64, Vec<Result<Option<(f64, f64)>>>) =
        match (&config.dgp.kind.model(), &sample) {
            (Model::Scalar(model), Sample::Cross(data)) => {
                let full = fit_mle_default(data, model.as_ref(), &config.solver)
                    .map_err(|_| all_failed())?;
                let b = config
                    .estimators
                    .iter()
                    .map(|e| match e {
                        Estimator::Mle => Ok(None),
                        Estimator::Corrected(m) => {
                            estimate_bias(*m, data, model.as_ref(), &full, &copts)
                                .map(|b| Some((b.value, b.corrected(full.theta_hat))))
                        }
                    })
                    .collect();
                (full.theta_hat, full.se, b)
            }
            (Model::Panel(model), Sample::Panel(data)) => {
                let full = fit_panel_mle_default(data, model.as_ref(), &config.solver)
                    .map_err(|_| all_failed())?;
                let b = config
                    .estimators
                    .iter()
                    .map(|e| match e {
                        Estimator::Mle => Ok(None),
                        Estimator::Corrected(m) => {
                            estimate_panel_bias(*m, data, model.as_ref(), &full, &copts)
                                .map(|b| Some((b.value, b.corrected(full.theta_hat))))
                        }
                    })
                    .collect();
                (full.theta_hat, full.se, b)
            }
            _ => return Err(all_failed()),
        };
    if !se.is_finite() {
        return Err(all_failed());
    }
    let failed: Vec<bool> = biases.iter().map(|b| b.is_err()).collect();
    if failed.iter().any(|f| *f) {
        return Err(failed);
    }
    let (estimates, biases) = biases
        .into_iter()
        .map(|b| match b.expect("checked above") {
            None => (theta_hat, None),
            Some((value, corrected)) => (corrected, Some(value)),
        })
        .unzip();
    Ok(ReplicateOutcome {
        theta_hat,
        se,
        estimates,
        biases,
    })
}

fn with_workers<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {w} workers: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Every replicate in index order; replicate `r` draws from its own stream
/// `stream_seed(master_seed, r)`, so the result does not depend on
/// scheduling or on the worker count.
pub fn run_replicates(
    config: &SimulationConfig,
) -> Result<Vec<std::result::Result<ReplicateOutcome, ReplicateFailure>>> {
    config.validate()?;
    with_workers(config.workers, || {
        (0..config.replications)
            .into_par_iter()
            .map(|r| run_one(config, r))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSummary {
    pub estimator: String,
    pub bias: f64,
    pub sd: f64,
    pub mean_se: f64,
    pub se_sd_ratio: f64,
    pub mse: f64,
    /// Rejection rate at each test level, in config order.
    pub rejections: Vec<f64>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub levels: Vec<f64>,
    pub rows: Vec<EstimatorSummary>,
}

impl SimulationSummary {
    pub fn row(&self, estimator: &str) -> Option<&EstimatorSummary> {
        self.rows.iter().find(|r| r.estimator == estimator)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub summary: SimulationSummary,
    pub replications: usize,
    pub failed_replicates: usize,
}

/// Table-1 statistics over the successful replicates.
pub fn summarize(
    config: &SimulationConfig,
    outcomes: &[std::result::Result<ReplicateOutcome, ReplicateFailure>],
) -> SimulationSummary {
    let truth = config.dgp.kind.theta();
    let null = config.null();
    let crit: Vec<f64> = config
        .test_levels
        .iter()
        .map(|l| normal_critical_value(*l))
        .collect();
    let ok: Vec<&ReplicateOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let r = ok.len() as f64;
    let rows = config
        .estimators
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let failures = outcomes
                .iter()
                .filter(|o| matches!(o, Err(f) if f.get(k).copied().unwrap_or(true)))
                .count();
            let vals: Vec<f64> = ok.iter().map(|o| o.estimates[k]).collect();
            let mean = vals.iter().copied().collect::<NeumaierSum>().value() / r;
            let ss = vals
                .iter()
                .map(|v| (v - mean) * (v - mean))
                .collect::<NeumaierSum>()
                .value();
            let sd = (ss / (r - 1.0)).sqrt();
            let mse = vals
                .iter()
                .map(|v| (v - truth) * (v - truth))
                .collect::<NeumaierSum>()
                .value()
                / r;
            let mean_se = ok.iter().map(|o| o.se).collect::<NeumaierSum>().value() / r;
            let rejections = crit
                .iter()
                .map(|c| {
                    ok.iter()
                        .filter(|o| ((o.estimates[k] - null) / o.se).abs() > *c)
                        .count() as f64
                        / r
                })
                .collect();
            EstimatorSummary {
                estimator: e.name().to_string(),
                bias: mean - truth,
                sd,
                mean_se,
                se_sd_ratio: mean_se / sd,
                mse,
                rejections,
                failures,
            }
        })
        .collect();
    SimulationSummary {
        levels: config.test_levels.clone(),
        rows,
    }
}

/// Runs the design and summarizes it; more than 2% failed replicates is an
/// error.
pub fn run_experiment(config: &SimulationConfig) -> Result<ExperimentOutcome> {
    let outcomes = run_replicates(config)?;
    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    let limit = config.replications / 50;
    if failed > limit || failed == config.replications {
        return Err(Error::ExcessFailures {
            failed,
            total: config.replications,
            limit,
        });
    }
    Ok(ExperimentOutcome {
        summary: summarize(config, &outcomes),
        replications: config.replications,
        failed_replicates: failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smn(n: usize, reps: usize) -> SimulationConfig {
        SimulationConfig::new(
            DgpSpec {
                kind: DgpKind::SqrtMeanNormal { theta: 1.0 },
                n,
                periods: 0,
            },
            vec![Estimator::Mle, Estimator::Corrected(Method::JackknifeLoo)],
            reps,
            3,
        )
    }

    #[test]
    fn summary_is_internally_consistent() {
        let cfg = smn(20, 400);
        let out = run_experiment(&cfg).unwrap();
        for row in &out.summary.rows {
            let r = 400.0;
            let implied = row.bias * row.bias + row.sd * row.sd * (r - 1.0) / r;
            assert!(
                (row.mse - implied).abs() <= 1e-10 * row.mse.max(1.0),
                "{row:?}"
            );
            assert!(row.rejections.iter().all(|x| (0.0..=1.0).contains(x)));
            assert!((row.se_sd_ratio - row.mean_se / row.sd).abs() < 1e-15);
        }
    }

    #[test]
    fn results_do_not_depend_on_workers() {
        let mut cfg = smn(15, 200);
        cfg.workers = Some(1);
        let a = run_experiment(&cfg).unwrap();
        cfg.workers = Some(4);
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = smn(10, 0);
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
        cfg.replications = 5;
        cfg.estimators
            .push(Estimator::Corrected(Method::Ar1Analytic));
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
        let mut ns = SimulationConfig::new(
            DgpSpec {
                kind: DgpKind::NeymanScott { theta: 1.0 },
                n: 10,
                periods: 4,
            },
            vec![Estimator::Corrected(Method::Bootstrap)],
            5,
            1,
        );
        assert!(matches!(run_experiment(&ns), Err(Error::Config(_))));
        ns.estimators = vec![Estimator::Corrected(Method::AnalyticIntegral)];
        assert!(matches!(run_experiment(&ns), Err(Error::Config(_))));
    }

    #[test]
    fn excess_failures_abort() {
        // Two-period split panels cannot be refit, so every replicate fails.
        let cfg = SimulationConfig::new(
            DgpSpec {
                kind: DgpKind::NeymanScott { theta: 1.0 },
                n: 10,
                periods: 2,
            },
            vec![Estimator::Mle, Estimator::Corrected(Method::SplitSample)],
            20,
            1,
        );
        match run_experiment(&cfg) {
            Err(Error::ExcessFailures {
                failed,
                total,
                limit,
            }) => {
                assert_eq!((failed, total, limit), (20, 20, 0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn estimator_names_parse() {
        assert_eq!("mle".parse::<Estimator>().unwrap(), Estimator::Mle);
        assert_eq!(
            "split".parse::<Estimator>().unwrap(),
            Estimator::Corrected(Method::SplitSample)
        );
        assert!("x".parse::<Estimator>().is_err());
    }
}
