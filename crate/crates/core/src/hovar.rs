//! Higher-order variance of bias-corrected estimators.
//!
//! For a corrected estimator the variance to second order is
//! `leading + factor · upsilon / size`; `factor` is 1 for the jackknife,
//! bootstrap and analytical corrections and 2 for the split-sample one.

use crate::data::{Dataset, PanelDataset};
use crate::error::{Error, Result};
use crate::estimate::PanelEstimate;
use crate::models::{PanelExpectations, PanelModel, ScalarModel};
use crate::numeric::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HigherOrderVariance {
    /// Asymptotic variance `I⁻¹` of `√size (θ̂ − θ)`.
    pub leading: f64,
    pub upsilon: f64,
}

impl HigherOrderVariance {
    pub fn combined(&self, size: f64, factor: f64) -> f64 {
        self.leading + factor * self.upsilon / size
    }

    /// Cross-section jackknife, bootstrap and analytical corrections.
    pub fn jackknife(&self, n: usize) -> f64 {
        self.combined(n as f64, 1.0)
    }

    pub fn split(&self, n: usize) -> f64 {
        self.combined(n as f64, 2.0)
    }

    /// Variance of `√(nT)(θ̃ − θ)` for the delete-one-period jackknife.
    pub fn panel_jackknife(&self, periods: usize) -> f64 {
        self.combined(periods as f64 - 1.0, 1.0)
    }

    pub fn panel_split(&self, periods: usize) -> f64 {
        self.combined(periods as f64, 2.0)
    }
}

/// `Υ̂ = mean(X²) mean(Y²) + mean(XY)²` with `X = Î⁻¹U`,
/// `Y = ½ Î⁻² Q̂ U + Î⁻¹ V`, everything evaluated at `theta_hat`.
pub fn estimate_upsilon_cross(
    data: &Dataset,
    model: &dyn ScalarModel,
    theta_hat: f64,
) -> Result<HigherOrderVariance> {
    let n = data.len() as f64;
    let terms: Vec<_> = data.rows().map(|z| model.terms(z, theta_hat)).collect();
    let mean_d2 = terms.iter().map(|t| t.d2).collect::<NeumaierSum>().value() / n;
    let q1 = terms.iter().map(|t| t.d3).collect::<NeumaierSum>().value() / n;
    if !(mean_d2.abs() >= 1e-12) {
        return Err(Error::SingularInformation { value: mean_d2 });
    }
    let info = -mean_d2;
    let (mut xx, mut yy, mut xy) = (NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new());
    for t in &terms {
        let x = t.score / info;
        let y = 0.5 * q1 * t.score / (info * info) + (t.d2 - mean_d2) / info;
        xx.add(x * x);
        yy.add(y * y);
        xy.add(x * y);
    }
    let (xx, yy, xy) = (xx.value() / n, yy.value() / n, xy.value() / n);
    Ok(HigherOrderVariance {
        leading: 1.0 / info,
        upsilon: xx * yy + xy * xy,
    })
}

/// Moments of the efficient score for one unit, expectations or time
/// averages alike.
#[derive(Debug, Clone, Copy)]
struct UnitMoments {
    /// `E[U²]`
    uu: f64,
    /// `½E[U^αα]² + 2E[U^αα]E[VU^α] + E[V²]E[(U^α)²] + E[VU^α]²`, over `E[V²]²`
    term: f64,
}

fn unit_moments(m: &PanelExpectations) -> UnitMoments {
    let delta = m.uv / m.vv;
    let uu = m.uu - 2.0 * delta * m.uv + delta * delta * m.vv;
    let a = m.u_alpha_alpha - delta * m.v_alpha_alpha;
    let b = m.v_u_alpha - delta * m.v_v_alpha;
    let d = m.u_alpha_sq - 2.0 * delta * m.u_alpha_v_alpha + delta * delta * m.v_alpha_sq;
    let term = (0.5 * a * a + 2.0 * a * b + m.vv * d + b * b) / (m.vv * m.vv);
    UnitMoments { uu, term }
}

fn combine(units: impl Iterator<Item = UnitMoments>) -> Result<HigherOrderVariance> {
    let (mut uu, mut term, mut count) = (NeumaierSum::new(), NeumaierSum::new(), 0usize);
    for m in units {
        uu.add(m.uu);
        term.add(m.term);
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidData("no retained units".into()));
    }
    let info = uu.value() / count as f64;
    if !(info >= 1e-12) {
        return Err(Error::SingularInformation { value: info });
    }
    Ok(HigherOrderVariance {
        leading: 1.0 / info,
        upsilon: term.value() / count as f64 / (info * info),
    })
}

/// Panel higher-order variance with per-unit expectations replaced by time
/// averages at `(θ̂, α̂ᵢ)`. Dropped units are skipped.
pub fn estimate_hovar_panel(
    panel: &PanelDataset,
    model: &dyn PanelModel,
    fit: &PanelEstimate,
) -> Result<HigherOrderVariance> {
    let periods = panel.periods() as f64;
    let mut units = Vec::new();
    for i in fit.retained_units() {
        let mut s = [0.0f64; 10];
        for z in panel.unit(i) {
            let t = model.terms(z, fit.theta_hat, fit.alpha_hat[i]);
            let row = [
                t.u * t.u,
                t.u * t.v,
                t.v * t.v,
                t.u_alpha_alpha,
                t.v_alpha_alpha,
                t.v * t.u_alpha,
                t.v * t.v_alpha,
                t.u_alpha * t.u_alpha,
                t.u_alpha * t.v_alpha,
                t.v_alpha * t.v_alpha,
            ];
            for (acc, x) in s.iter_mut().zip(row) {
                *acc += x;
            }
        }
        let s = s.map(|x| x / periods);
        if !(s[2] >= 1e-12) {
            return Err(Error::DegenerateUnit {
                unit: i,
                value: s[2],
            });
        }
        units.push(unit_moments(&PanelExpectations {
            uu: s[0],
            uv: s[1],
            vv: s[2],
            u_alpha_alpha: s[3],
            v_alpha_alpha: s[4],
            v_u_alpha: s[5],
            v_v_alpha: s[6],
            u_alpha_sq: s[7],
            u_alpha_v_alpha: s[8],
            v_alpha_sq: s[9],
        }));
    }
    combine(units.into_iter())
}

/// Panel higher-order variance from the model's closed-form moments at the
/// given parameter values.
pub fn population_hovar_panel(
    model: &dyn PanelModel,
    theta: f64,
    alphas: &[f64],
) -> Result<HigherOrderVariance> {
    let mut units = Vec::with_capacity(alphas.len());
    for (i, &a) in alphas.iter().enumerate() {
        let m = model
            .expectations(theta, a)
            .ok_or(Error::MissingExpectations)?;
        if !(m.vv >= 1e-12) {
            return Err(Error::DegenerateUnit {
                unit: i,
                value: m.vv,
            });
        }
        units.push(unit_moments(&m));
    }
    combine(units.into_iter())
}
