//! Bias estimates and bias-corrected estimators.
//!
//! Every bias estimate is stored on the scale of the bias itself times the
//! sample size (n in the cross-section, T in panels), so a correction is
//! always `θ̂ − b̂ / scale`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, PanelDataset};
use crate::error::{Error, Result};
use crate::estimate::{fit_mle, fit_panel_mle_warm, Estimate, PanelEstimate, SolverOpts};
use crate::models::{PanelModel, ScalarModel};
use crate::numeric::{stream_seed, NeumaierSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    JackknifeLoo,
    SplitSample,
    Bootstrap,
    AnalyticSample,
    AnalyticInfoEq,
    AnalyticIntegral,
    PanelJackknifeLoo,
    PanelSplitSample,
    Ar1Analytic,
}

impl Method {
    /// Name used on the command line and in reports.
    pub fn name(self) -> &'static str {
        match self {
            Method::JackknifeLoo | Method::PanelJackknifeLoo => "jackknife",
            Method::SplitSample | Method::PanelSplitSample => "split",
            Method::Bootstrap => "bootstrap",
            Method::AnalyticSample => "analytic-sample",
            Method::AnalyticInfoEq => "analytic-infoeq",
            Method::AnalyticIntegral => "analytic-integral",
            Method::Ar1Analytic => "ar1-analytic",
        }
    }

    /// The panel counterpart of a resampling method; other methods are
    /// returned unchanged.
    pub fn for_panel(self) -> Method {
        match self {
            Method::JackknifeLoo => Method::PanelJackknifeLoo,
            Method::SplitSample => Method::PanelSplitSample,
            m => m,
        }
    }

    pub fn is_panel(self) -> bool {
        matches!(self, Method::PanelJackknifeLoo | Method::PanelSplitSample)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Parses the cross-section variant; see [`Method::for_panel`].
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "jackknife" => Method::JackknifeLoo,
            "split" => Method::SplitSample,
            "bootstrap" => Method::Bootstrap,
            "analytic-sample" => Method::AnalyticSample,
            "analytic-infoeq" => Method::AnalyticInfoEq,
            "analytic-integral" => Method::AnalyticIntegral,
            "ar1-analytic" => Method::Ar1Analytic,
            other => return Err(Error::Config(format!("unknown correction `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    CrossSection { n: usize },
    Panel { periods: usize },
}

impl Setting {
    pub fn scale(self) -> f64 {
        match self {
            Setting::CrossSection { n } => n as f64,
            Setting::Panel { periods } => periods as f64,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Setting::CrossSection { .. } => "cross-section",
            Setting::Panel { .. } => "panel",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasEstimate {
    pub value: f64,
    pub method: Method,
    pub setting: Setting,
    /// Subsample or resample estimates behind `value`, in index order.
    pub replicate_values: Option<Vec<f64>>,
}

impl BiasEstimate {
    pub fn scale(&self) -> f64 {
        self.setting.scale()
    }

    /// `θ̂ − b̂ / scale`
    pub fn corrected(&self, theta_hat: f64) -> f64 {
        theta_hat - self.value / self.scale()
    }
}

/// Options shared by the resampling corrections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionOpts {
    pub bootstrap_b: usize,
    pub seed: u64,
    pub solver: SolverOpts,
}

impl Default for CorrectionOpts {
    fn default() -> Self {
        CorrectionOpts {
            bootstrap_b: 1000,
            seed: 0,
            solver: SolverOpts::default(),
        }
    }
}

fn cross(n: usize, method: Method, value: f64, replicates: Option<Vec<f64>>) -> BiasEstimate {
    BiasEstimate {
        value,
        method,
        setting: Setting::CrossSection { n },
        replicate_values: replicates,
    }
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().copied().collect::<NeumaierSum>().value() / values.len() as f64
}

fn refit(data: &Dataset, model: &dyn ScalarModel, init: f64, opts: &SolverOpts) -> Result<f64> {
    fit_mle(data, model, init, opts).map(|e| e.theta_hat)
}

/// Leave-one-out jackknife: `b̂ = n(n−1)(mean θ̂₍ᵢ₎ − θ̂)`.
pub fn jackknife_bias(
    data: &Dataset,
    model: &dyn ScalarModel,
    full: &Estimate,
    opts: &SolverOpts,
) -> Result<BiasEstimate> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidData(
            "jackknife needs at least two observations".into(),
        ));
    }
    let loo = (0..n)
        .into_par_iter()
        .map(|i| {
            refit(&data.without(i), model, full.theta_hat, opts).map_err(|e| Error::subfit(i, e))
        })
        .collect::<Result<Vec<f64>>>()?;
    let nf = n as f64;
    let value = nf * (nf - 1.0) * (mean_of(&loo) - full.theta_hat);
    Ok(cross(n, Method::JackknifeLoo, value, Some(loo)))
}

/// Split-sample jackknife on the first `⌈n/2⌉` and the remaining
/// observations, in the order given.
pub fn split_sample_bias(
    data: &Dataset,
    model: &dyn ScalarModel,
    full: &Estimate,
    opts: &SolverOpts,
) -> Result<BiasEstimate> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidData(
            "split-sample needs at least two observations".into(),
        ));
    }
    let m = n.div_ceil(2);
    let first =
        refit(&data.range(0..m), model, full.theta_hat, opts).map_err(|e| Error::subfit(0, e))?;
    let second =
        refit(&data.range(m..n), model, full.theta_hat, opts).map_err(|e| Error::subfit(1, e))?;
    let value = n as f64 * (0.5 * (first + second) - full.theta_hat);
    Ok(cross(
        n,
        Method::SplitSample,
        value,
        Some(vec![first, second]),
    ))
}

/// Row order used for resampling, so that the bootstrap depends on the data
/// only as a multiset.
fn canonical_order(data: &Dataset) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.sort_by(|&a, &b| {
        data.row(a)
            .iter()
            .zip(data.row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    idx
}

/// Nonparametric bootstrap: `b̂ = n(mean θ̂* − θ̂)`.
///
/// Resample `b` is drawn from its own stream `stream_seed(seed, b)`.
/// Resamples whose refit fails are dropped; more than 1% failures is an
/// error.
pub fn bootstrap_bias(
    data: &Dataset,
    model: &dyn ScalarModel,
    full: &Estimate,
    replications: usize,
    seed: u64,
    opts: &SolverOpts,
) -> Result<BiasEstimate> {
    if replications == 0 {
        return Err(Error::Config(
            "bootstrap needs at least one replication".into(),
        ));
    }
    let n = data.len();
    let order = canonical_order(data);
    let draws: Vec<Option<f64>> = (0..replications)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, b as u64));
            let picks: Vec<usize> = (0..n).map(|_| order[rng.gen_range(0..n)]).collect();
            refit(&data.select(&picks), model, full.theta_hat, opts).ok()
        })
        .collect();
    let ok: Vec<f64> = draws.iter().flatten().copied().collect();
    let failed = replications - ok.len();
    if failed * 100 > replications || ok.is_empty() {
        return Err(Error::BootstrapFailures {
            failed,
            total: replications,
        });
    }
    let value = n as f64 * (mean_of(&ok) - full.theta_hat);
    Ok(cross(n, Method::Bootstrap, value, Some(ok)))
}

struct SampleMoments {
    score_sq: f64,
    d2: f64,
    d3: f64,
    score_d2: f64,
}

fn sample_moments(data: &Dataset, model: &dyn ScalarModel, theta: f64) -> Result<SampleMoments> {
    let (mut sq, mut d2, mut d3, mut sd2) = (
        NeumaierSum::new(),
        NeumaierSum::new(),
        NeumaierSum::new(),
        NeumaierSum::new(),
    );
    for z in data.rows() {
        let t = model.terms(z, theta);
        sq.add(t.score * t.score);
        d2.add(t.d2);
        d3.add(t.d3);
        sd2.add(t.score * t.d2);
    }
    let n = data.len() as f64;
    let m = SampleMoments {
        score_sq: sq.value() / n,
        d2: d2.value() / n,
        d3: d3.value() / n,
        score_d2: sd2.value() / n,
    };
    if !(m.d2.abs() >= 1e-12) {
        return Err(Error::SingularInformation { value: m.d2 });
    }
    Ok(m)
}

/// Analytical bias from sample averages, without the information equality.
pub fn analytic_bias_sample(
    data: &Dataset,
    model: &dyn ScalarModel,
    full: &Estimate,
) -> Result<BiasEstimate> {
    let m = sample_moments(data, model, full.theta_hat)?;
    let value = -m.d3 * m.score_sq / (2.0 * m.d2.powi(3)) + m.score_d2 / (m.d2 * m.d2);
    Ok(cross(data.len(), Method::AnalyticSample, value, None))
}

/// Analytical bias from sample averages, using the information equality.
pub fn analytic_bias_infoeq(
    data: &Dataset,
    model: &dyn ScalarModel,
    full: &Estimate,
) -> Result<BiasEstimate> {
    let m = sample_moments(data, model, full.theta_hat)?;
    let value = m.d3 / (2.0 * m.d2 * m.d2) + m.score_d2 / (m.d2 * m.d2);
    Ok(cross(data.len(), Method::AnalyticInfoEq, value, None))
}

/// `b(θ̂) = I⁻²(½E[ℓ^θθ] + E[ℓℓ^θ])` from the model's closed-form moments.
pub fn analytic_bias_integral(
    model: &dyn ScalarModel,
    theta_hat: f64,
    n: usize,
) -> Result<BiasEstimate> {
    let e = model
        .expectations(theta_hat)
        .ok_or(Error::MissingExpectations)?;
    if !(e.d2.abs() >= 1e-12) {
        return Err(Error::SingularInformation { value: e.d2 });
    }
    let info = -e.d2;
    let value = (0.5 * e.d3 + e.score_d2) / (info * info);
    Ok(cross(n, Method::AnalyticIntegral, value, None))
}

/// AR(1) bias `−2θ̂` on the T scale.
pub fn ar1_analytic_bias(full: &Estimate) -> BiasEstimate {
    cross(full.n_obs, Method::Ar1Analytic, -2.0 * full.theta_hat, None)
}

/// `θ̂(1 + 2/T)`, keeping the standard error.
pub fn ar1_analytic_correct(estimate: &Estimate, periods: usize) -> Estimate {
    Estimate {
        theta_hat: estimate.theta_hat * (1.0 + 2.0 / periods as f64),
        ..estimate.clone()
    }
}

fn panel(periods: usize, method: Method, value: f64, replicates: Vec<f64>) -> BiasEstimate {
    BiasEstimate {
        value,
        method,
        setting: Setting::Panel { periods },
        replicate_values: Some(replicates),
    }
}

fn panel_refit(
    sub: &PanelDataset,
    model: &dyn PanelModel,
    full: &PanelEstimate,
    opts: &SolverOpts,
) -> Result<f64> {
    fit_panel_mle_warm(sub, model, full.theta_hat, Some(&full.alpha_hat), opts).map(|e| e.theta_hat)
}

/// Delete-one-period panel jackknife: `b̂ = T(T−1)(mean θ̂₍ₜ₎ − θ̂)`.
pub fn panel_jackknife_bias(
    data: &PanelDataset,
    model: &dyn PanelModel,
    full: &PanelEstimate,
    opts: &SolverOpts,
) -> Result<BiasEstimate> {
    let t = data.periods();
    if t < 3 {
        return Err(Error::InvalidData(
            "panel jackknife needs at least three periods".into(),
        ));
    }
    let loo = (0..t)
        .into_par_iter()
        .map(|s| {
            panel_refit(&data.without_period(s), model, full, opts).map_err(|e| Error::subfit(s, e))
        })
        .collect::<Result<Vec<f64>>>()?;
    let tf = t as f64;
    let value = tf * (tf - 1.0) * (mean_of(&loo) - full.theta_hat);
    Ok(panel(t, Method::PanelJackknifeLoo, value, loo))
}

/// Half-panel jackknife on periods `1..=⌈T/2⌉` and the rest:
/// `b̂ = T(θ̄ − θ̂)`.
pub fn panel_split_sample_bias(
    data: &PanelDataset,
    model: &dyn PanelModel,
    full: &PanelEstimate,
    opts: &SolverOpts,
) -> Result<BiasEstimate> {
    let t = data.periods();
    let m = t.div_ceil(2);
    if t - m < 2 {
        return Err(Error::InvalidData(
            "split panel needs at least two periods per half".into(),
        ));
    }
    let first: Vec<usize> = (0..m).collect();
    let second: Vec<usize> = (m..t).collect();
    let a = panel_refit(&data.select_periods(&first), model, full, opts)
        .map_err(|e| Error::subfit(0, e))?;
    let b = panel_refit(&data.select_periods(&second), model, full, opts)
        .map_err(|e| Error::subfit(1, e))?;
    let value = t as f64 * (0.5 * (a + b) - full.theta_hat);
    Ok(panel(t, Method::PanelSplitSample, value, vec![a, b]))
}

/// Bias estimate for a cross-section fit by any applicable method.
pub fn estimate_bias(
    method: Method,
    data: &Dataset,
    model: &dyn ScalarModel,
    full: &Estimate,
    opts: &CorrectionOpts,
) -> Result<BiasEstimate> {
    match method {
        Method::JackknifeLoo => jackknife_bias(data, model, full, &opts.solver),
        Method::SplitSample => split_sample_bias(data, model, full, &opts.solver),
        Method::Bootstrap => {
            bootstrap_bias(data, model, full, opts.bootstrap_b, opts.seed, &opts.solver)
        }
        Method::AnalyticSample => analytic_bias_sample(data, model, full),
        Method::AnalyticInfoEq => analytic_bias_infoeq(data, model, full),
        Method::AnalyticIntegral => analytic_bias_integral(model, full.theta_hat, data.len()),
        Method::Ar1Analytic => Ok(ar1_analytic_bias(full)),
        Method::PanelJackknifeLoo | Method::PanelSplitSample => Err(Error::UnsupportedMethod {
            method: method.name().into(),
            reason: "needs panel data".into(),
        }),
    }
}

/// Bias estimate for a panel fit; only the jackknife and the split-panel
/// jackknife apply.
pub fn estimate_panel_bias(
    method: Method,
    data: &PanelDataset,
    model: &dyn PanelModel,
    full: &PanelEstimate,
    opts: &CorrectionOpts,
) -> Result<BiasEstimate> {
    match method.for_panel() {
        Method::PanelJackknifeLoo => panel_jackknife_bias(data, model, full, &opts.solver),
        Method::PanelSplitSample => panel_split_sample_bias(data, model, full, &opts.solver),
        Method::AnalyticIntegral => Err(Error::MissingExpectations),
        m => Err(Error::UnsupportedMethod {
            method: m.name().into(),
            reason: "only jackknife and split apply to panel fits".into(),
        }),
    }
}

/// `θ̂ − b̂/n`, keeping the standard error.
pub fn apply_correction(full: &Estimate, bias: &BiasEstimate) -> Result<Estimate> {
    match bias.setting {
        Setting::CrossSection { .. } => Ok(Estimate {
            theta_hat: bias.corrected(full.theta_hat),
            ..full.clone()
        }),
        s => Err(Error::ScaleMismatch {
            bias: s.label(),
            estimate: "cross-section",
        }),
    }
}

/// `θ̂ − b̂/T`, keeping the standard error and the effects.
pub fn apply_panel_correction(full: &PanelEstimate, bias: &BiasEstimate) -> Result<PanelEstimate> {
    match bias.setting {
        Setting::Panel { .. } => Ok(PanelEstimate {
            theta_hat: bias.corrected(full.theta_hat),
            ..full.clone()
        }),
        s => Err(Error::ScaleMismatch {
            bias: s.label(),
            estimate: "panel",
        }),
    }
}
