//! Model abstractions and the built-in likelihoods.
//!
//! Every derivative is hand-coded. The bias formulas depend on third
//! derivatives and on second derivatives of the fixed-effect scores, and a
//! finite-difference error of the same order as the O(1/n) bias would swamp
//! the quantity being estimated.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::data::{Dataset, PanelDataset};
use crate::error::{Error, Result};
use crate::numeric::{inverse_mills, log_normal_cdf, mean};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Unbounded,
    Open(f64),
    /// The likelihood is defined at the endpoint, so the maximum may sit on it.
    Closed(f64),
}

/// Interval of admissible values for the common parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamDomain {
    pub lower: Bound,
    pub upper: Bound,
}

impl ParamDomain {
    pub const REAL_LINE: ParamDomain = ParamDomain {
        lower: Bound::Unbounded,
        upper: Bound::Unbounded,
    };

    pub fn positive() -> Self {
        ParamDomain {
            lower: Bound::Open(0.0),
            upper: Bound::Unbounded,
        }
    }

    pub fn non_negative() -> Self {
        ParamDomain {
            lower: Bound::Closed(0.0),
            upper: Bound::Unbounded,
        }
    }

    pub fn contains(&self, theta: f64) -> bool {
        if !theta.is_finite() {
            return false;
        }
        let above = match self.lower {
            Bound::Unbounded => true,
            Bound::Open(a) => theta > a,
            Bound::Closed(a) => theta >= a,
        };
        let below = match self.upper {
            Bound::Unbounded => true,
            Bound::Open(b) => theta < b,
            Bound::Closed(b) => theta <= b,
        };
        above && below
    }
}

/// Log density and its first three derivatives at one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarTerms {
    pub loglik: f64,
    pub score: f64,
    pub d2: f64,
    pub d3: f64,
}

/// Population moments under `f(·, θ)`: `E[ℓ^θ]`, `E[ℓ^θθ]`, `E[ℓ ℓ^θ]`, `E[ℓ²]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectations {
    pub d2: f64,
    pub d3: f64,
    pub score_d2: f64,
    pub score_sq: f64,
}

/// A one-parameter likelihood for i.i.d. observations.
pub trait ScalarModel: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    fn loglik(&self, z: &[f64], theta: f64) -> f64;

    /// `ℓ = ∂ log f / ∂θ`
    fn score(&self, z: &[f64], theta: f64) -> f64;

    /// `ℓ^θ`
    fn d2(&self, z: &[f64], theta: f64) -> f64;

    /// `ℓ^θθ`
    fn d3(&self, z: &[f64], theta: f64) -> f64;

    /// Log-likelihood, score and second derivative, as needed by the solver.
    fn newton_terms(&self, z: &[f64], theta: f64) -> (f64, f64, f64) {
        (
            self.loglik(z, theta),
            self.score(z, theta),
            self.d2(z, theta),
        )
    }

    fn terms(&self, z: &[f64], theta: f64) -> ScalarTerms {
        ScalarTerms {
            loglik: self.loglik(z, theta),
            score: self.score(z, theta),
            d2: self.d2(z, theta),
            d3: self.d3(z, theta),
        }
    }

    fn domain(&self) -> ParamDomain {
        ParamDomain::REAL_LINE
    }

    fn expectations(&self, _theta: f64) -> Option<Expectations> {
        None
    }

    /// Method-of-moments starting value.
    fn default_init(&self, data: &Dataset) -> f64;
}

/// Log density and the partials used by the panel solver and by the panel
/// higher-order variance, at one `(z, θ, α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelTerms {
    pub loglik: f64,
    /// `∂/∂θ`
    pub u: f64,
    /// `∂²/∂θ²`
    pub u_theta: f64,
    /// `∂/∂α`
    pub v: f64,
    /// `∂²/∂θ∂α`
    pub u_alpha: f64,
    /// `∂³/∂θ∂α²`
    pub u_alpha_alpha: f64,
    /// `∂²/∂α²`
    pub v_alpha: f64,
    /// `∂³/∂α³`
    pub v_alpha_alpha: f64,
}

/// Population moments of the panel scores for one unit, under `f(·|θ, α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelExpectations {
    pub uu: f64,
    pub uv: f64,
    pub vv: f64,
    pub u_alpha_alpha: f64,
    pub v_alpha_alpha: f64,
    pub v_u_alpha: f64,
    pub v_v_alpha: f64,
    pub u_alpha_sq: f64,
    pub u_alpha_v_alpha: f64,
    pub v_alpha_sq: f64,
}

/// Likelihood in a common parameter θ and a unit-specific effect α.
pub trait PanelModel: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    fn terms(&self, z: &[f64], theta: f64, alpha: f64) -> PanelTerms;

    fn loglik(&self, z: &[f64], theta: f64, alpha: f64) -> f64 {
        self.terms(z, theta, alpha).loglik
    }

    fn domain(&self) -> ParamDomain {
        ParamDomain::REAL_LINE
    }

    /// Units whose effect has no interior maximizer and carry no
    /// information about θ.
    fn is_stayer(&self, _cells: &mut dyn Iterator<Item = &[f64]>) -> bool {
        false
    }

    fn expectations(&self, _theta: f64, _alpha: f64) -> Option<PanelExpectations> {
        None
    }

    fn default_init(&self, panel: &PanelDataset) -> f64;

    fn default_alpha(&self, cells: &mut dyn Iterator<Item = &[f64]>) -> f64;
}

/// `Z ~ N(√θ, 1)`, θ ≥ 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct SqrtMeanNormal;

impl ScalarModel for SqrtMeanNormal {
    fn name(&self) -> &'static str {
        "sqrt-mean-normal"
    }

    fn loglik(&self, z: &[f64], theta: f64) -> f64 {
        let r = z[0] - theta.sqrt();
        -0.5 * (LN_2PI + r * r)
    }

    fn score(&self, z: &[f64], theta: f64) -> f64 {
        z[0] / (2.0 * theta.sqrt()) - 0.5
    }

    fn d2(&self, z: &[f64], theta: f64) -> f64 {
        -z[0] / (4.0 * theta.powf(1.5))
    }

    fn d3(&self, z: &[f64], theta: f64) -> f64 {
        3.0 * z[0] / (8.0 * theta.powf(2.5))
    }

    fn newton_terms(&self, z: &[f64], theta: f64) -> (f64, f64, f64) {
        let root = theta.sqrt();
        let r = z[0] - root;
        (
            -0.5 * (LN_2PI + r * r),
            z[0] / (2.0 * root) - 0.5,
            -z[0] / (4.0 * theta * root),
        )
    }

    fn domain(&self) -> ParamDomain {
        ParamDomain::non_negative()
    }

    fn expectations(&self, theta: f64) -> Option<Expectations> {
        Some(Expectations {
            d2: -1.0 / (4.0 * theta),
            d3: 3.0 / (8.0 * theta * theta),
            score_d2: -1.0 / (8.0 * theta * theta),
            score_sq: 1.0 / (4.0 * theta),
        })
    }

    fn default_init(&self, data: &Dataset) -> f64 {
        let zbar = mean(&data.column(0));
        zbar * zbar
    }
}

/// Gaussian AR(1) `y_t = θ y_{t-1} + ε_t`, conditional on the first
/// observation. Rows are `(y_{t-1}, y_t)`.
#[derive(Debug, Clone, Copy)]
pub struct Ar1 {
    pub sigma2: f64,
}

impl Default for Ar1 {
    fn default() -> Self {
        Ar1 { sigma2: 1.0 }
    }
}

impl ScalarModel for Ar1 {
    fn name(&self) -> &'static str {
        "ar1"
    }

    fn loglik(&self, z: &[f64], theta: f64) -> f64 {
        let e = z[1] - theta * z[0];
        -0.5 * (LN_2PI + self.sigma2.ln() + e * e / self.sigma2)
    }

    fn score(&self, z: &[f64], theta: f64) -> f64 {
        z[0] * (z[1] - theta * z[0]) / self.sigma2
    }

    fn d2(&self, z: &[f64], _theta: f64) -> f64 {
        -z[0] * z[0] / self.sigma2
    }

    fn d3(&self, _z: &[f64], _theta: f64) -> f64 {
        0.0
    }

    fn default_init(&self, data: &Dataset) -> f64 {
        let (sxy, sxx) = data
            .rows()
            .fold((0.0, 0.0), |(a, b), r| (a + r[0] * r[1], b + r[0] * r[0]));
        if sxx > 0.0 {
            sxy / sxx
        } else {
            0.0
        }
    }
}

/// Derivatives of `ln Φ(q·v)` with respect to the index `v`, `q = 2y - 1`.
#[derive(Debug, Clone, Copy)]
struct ProbitIndex {
    loglik: f64,
    d1: f64,
    d2: f64,
    d3: f64,
}

fn probit_index(y: f64, index: f64) -> ProbitIndex {
    let q = if y > 0.5 { 1.0 } else { -1.0 };
    let s = q * index;
    let lambda = inverse_mills(s);
    let lambda1 = -lambda * (s + lambda);
    let lambda2 = -lambda1 * (s + lambda) - lambda * (1.0 + lambda1);
    ProbitIndex {
        loglik: log_normal_cdf(s),
        d1: q * lambda,
        d2: lambda1,
        d3: q * lambda2,
    }
}

/// Probit without fixed effects, `P(y = 1 | x) = Φ(θx)`. Rows are `(y, x)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Probit;

impl ScalarModel for Probit {
    fn name(&self) -> &'static str {
        "probit-cross-section"
    }

    fn loglik(&self, z: &[f64], theta: f64) -> f64 {
        probit_index(z[0], theta * z[1]).loglik
    }

    fn score(&self, z: &[f64], theta: f64) -> f64 {
        z[1] * probit_index(z[0], theta * z[1]).d1
    }

    fn d2(&self, z: &[f64], theta: f64) -> f64 {
        z[1] * z[1] * probit_index(z[0], theta * z[1]).d2
    }

    fn d3(&self, z: &[f64], theta: f64) -> f64 {
        z[1].powi(3) * probit_index(z[0], theta * z[1]).d3
    }

    fn terms(&self, z: &[f64], theta: f64) -> ScalarTerms {
        let x = z[1];
        let p = probit_index(z[0], theta * x);
        ScalarTerms {
            loglik: p.loglik,
            score: x * p.d1,
            d2: x * x * p.d2,
            d3: x * x * x * p.d3,
        }
    }

    fn default_init(&self, _data: &Dataset) -> f64 {
        0.0
    }
}

/// `z_it ~ N(α_i, θ)` with θ the common variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeymanScott;

impl PanelModel for NeymanScott {
    fn name(&self) -> &'static str {
        "neyman-scott"
    }

    fn terms(&self, z: &[f64], theta: f64, alpha: f64) -> PanelTerms {
        let r = z[0] - alpha;
        let r2 = r * r;
        PanelTerms {
            loglik: -0.5 * (LN_2PI + theta.ln() + r2 / theta),
            u: -0.5 / theta + r2 / (2.0 * theta * theta),
            u_theta: 0.5 / (theta * theta) - r2 / (theta * theta * theta),
            v: r / theta,
            u_alpha: -r / (theta * theta),
            u_alpha_alpha: 1.0 / (theta * theta),
            v_alpha: -1.0 / theta,
            v_alpha_alpha: 0.0,
        }
    }

    fn domain(&self) -> ParamDomain {
        ParamDomain::positive()
    }

    fn expectations(&self, theta: f64, _alpha: f64) -> Option<PanelExpectations> {
        let t2 = theta * theta;
        Some(PanelExpectations {
            uu: 0.5 / t2,
            uv: 0.0,
            vv: 1.0 / theta,
            u_alpha_alpha: 1.0 / t2,
            v_alpha_alpha: 0.0,
            v_u_alpha: -1.0 / t2,
            v_v_alpha: 0.0,
            u_alpha_sq: 1.0 / (t2 * theta),
            u_alpha_v_alpha: 0.0,
            v_alpha_sq: 1.0 / t2,
        })
    }

    /// Within-unit variance.
    fn default_init(&self, panel: &PanelDataset) -> f64 {
        let mut ss = 0.0;
        for i in 0..panel.n() {
            let zs: Vec<f64> = panel.unit(i).map(|c| c[0]).collect();
            let m = mean(&zs);
            ss += zs.iter().map(|z| (z - m) * (z - m)).sum::<f64>();
        }
        ss / (panel.n() * panel.periods()) as f64
    }

    fn default_alpha(&self, cells: &mut dyn Iterator<Item = &[f64]>) -> f64 {
        let zs: Vec<f64> = cells.map(|c| c[0]).collect();
        mean(&zs)
    }
}

/// Probit with a unit effect, `P(y_it = 1) = Φ(θ x_it + α_i)`. Cells are `(y, x)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PanelProbit;

impl PanelModel for PanelProbit {
    fn name(&self) -> &'static str {
        "probit"
    }

    fn terms(&self, z: &[f64], theta: f64, alpha: f64) -> PanelTerms {
        let x = z[1];
        let p = probit_index(z[0], theta * x + alpha);
        PanelTerms {
            loglik: p.loglik,
            u: x * p.d1,
            u_theta: x * x * p.d2,
            v: p.d1,
            u_alpha: x * p.d2,
            u_alpha_alpha: x * p.d3,
            v_alpha: p.d2,
            v_alpha_alpha: p.d3,
        }
    }

    fn is_stayer(&self, cells: &mut dyn Iterator<Item = &[f64]>) -> bool {
        let mut seen_one = false;
        let mut seen_zero = false;
        for c in cells {
            if c[0] > 0.5 {
                seen_one = true;
            } else {
                seen_zero = true;
            }
        }
        !(seen_one && seen_zero)
    }

    fn default_init(&self, _panel: &PanelDataset) -> f64 {
        0.0
    }

    /// Probit index matching the unit's outcome frequency.
    fn default_alpha(&self, cells: &mut dyn Iterator<Item = &[f64]>) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        let ys: Vec<f64> = cells.map(|c| if c[0] > 0.5 { 1.0 } else { 0.0 }).collect();
        let p = mean(&ys).clamp(0.05, 0.95);
        Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(p)
    }
}

/// Names of the shipped models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinName {
    SqrtMeanNormal,
    NeymanScott,
    Probit,
    Ar1,
}

impl FromStr for BuiltinName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "sqrt-mean-normal" | "sqrtmeannormal" => Ok(Self::SqrtMeanNormal),
            "neyman-scott" | "neymanscott" => Ok(Self::NeymanScott),
            "probit" => Ok(Self::Probit),
            "ar1" | "ar(1)" => Ok(Self::Ar1),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    Scalar(Arc<dyn ScalarModel>),
    Panel(Arc<dyn PanelModel>),
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Scalar(m) => m.name(),
            Model::Panel(m) => m.name(),
        }
    }
}

pub fn builtin_model(name: BuiltinName) -> Model {
    match name {
        BuiltinName::SqrtMeanNormal => Model::Scalar(Arc::new(SqrtMeanNormal)),
        BuiltinName::Ar1 => Model::Scalar(Arc::new(Ar1::default())),
        BuiltinName::NeymanScott => Model::Panel(Arc::new(NeymanScott)),
        BuiltinName::Probit => Model::Panel(Arc::new(PanelProbit)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    const H: f64 = 1e-5;
    const TOL: f64 = 1e-6;

    fn close(fd: f64, analytic: f64) -> bool {
        (fd - analytic).abs() <= TOL * analytic.abs().max(1.0)
    }

    fn central(f: impl Fn(f64) -> f64, at: f64) -> f64 {
        (f(at + H) - f(at - H)) / (2.0 * H)
    }

    fn check_scalar(model: &dyn ScalarModel, draw: impl Fn(&mut ChaCha8Rng) -> (Vec<f64>, f64)) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let (z, th) = draw(&mut rng);
            let t = model.terms(&z, th);
            assert!(
                close(central(|a| model.loglik(&z, a), th), t.score),
                "{} score at {z:?}, {th}",
                model.name()
            );
            assert!(
                close(central(|a| model.score(&z, a), th), t.d2),
                "{} d2 at {z:?}, {th}",
                model.name()
            );
            assert!(
                close(central(|a| model.d2(&z, a), th), t.d3),
                "{} d3 at {z:?}, {th}",
                model.name()
            );
            assert_eq!(t.score, model.score(&z, th));
            let (l, sc, h) = model.newton_terms(&z, th);
            assert!(
                close(l, t.loglik) && close(sc, t.score) && close(h, t.d2),
                "{} newton terms",
                model.name()
            );
        }
    }

    fn check_panel(model: &dyn PanelModel, draw: impl Fn(&mut ChaCha8Rng) -> (Vec<f64>, f64, f64)) {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let (z, th, al) = draw(&mut rng);
            let t = model.terms(&z, th, al);
            let at_theta = |a: f64| model.terms(&z, a, al);
            let at_alpha = |a: f64| model.terms(&z, th, a);
            let pairs = [
                (central(|a| at_theta(a).loglik, th), t.u, "u"),
                (central(|a| at_theta(a).u, th), t.u_theta, "u_theta"),
                (central(|a| at_alpha(a).loglik, al), t.v, "v"),
                (central(|a| at_alpha(a).u, al), t.u_alpha, "u_alpha"),
                (central(|a| at_theta(a).v, th), t.u_alpha, "v_theta"),
                (
                    central(|a| at_alpha(a).u_alpha, al),
                    t.u_alpha_alpha,
                    "u_alpha_alpha",
                ),
                (central(|a| at_alpha(a).v, al), t.v_alpha, "v_alpha"),
                (
                    central(|a| at_alpha(a).v_alpha, al),
                    t.v_alpha_alpha,
                    "v_alpha_alpha",
                ),
            ];
            for (fd, analytic, what) in pairs {
                assert!(
                    close(fd, analytic),
                    "{} {what}: fd {fd} vs {analytic} at {z:?}, {th}, {al}",
                    model.name()
                );
            }
        }
    }

    #[test]
    fn scalar_derivatives_match_finite_differences() {
        check_scalar(&SqrtMeanNormal, |rng| {
            let th: f64 = rng.gen_range(0.3..4.0);
            let z: f64 = th.sqrt() + rng.sample::<f64, _>(StandardNormal);
            (vec![z], th)
        });
        check_scalar(&Ar1::default(), |rng| {
            (
                vec![rng.sample(StandardNormal), rng.sample(StandardNormal)],
                rng.gen_range(-0.95..0.95),
            )
        });
        check_scalar(&Probit, |rng| {
            let y = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
            (vec![y, rng.gen_range(-3.0..3.0)], rng.gen_range(-3.0..3.0))
        });
    }

    #[test]
    fn panel_derivatives_match_finite_differences() {
        check_panel(&NeymanScott, |rng| {
            (
                vec![rng.gen_range(-3.0..3.0)],
                rng.gen_range(0.3..3.0),
                rng.gen_range(-2.0..2.0),
            )
        });
        check_panel(&PanelProbit, |rng| {
            let y = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
            (
                vec![y, rng.gen_range(-2.0..2.0)],
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-3.0..3.0),
            )
        });
    }

    #[test]
    fn probit_derivatives_stay_finite_at_extreme_indices() {
        for index in [-1e3, -60.0, -9.0, -8.0, 8.0, 60.0, 1e3] {
            for y in [0.0, 1.0] {
                let p = probit_index(y, index);
                assert!(
                    p.loglik.is_finite()
                        && p.d1.is_finite()
                        && p.d2.is_finite()
                        && p.d3.is_finite(),
                    "{y} {index} {p:?}"
                );
                assert!(p.d2 <= 0.0);
            }
        }
    }

    #[test]
    fn builtin_examples() {
        let m = SqrtMeanNormal;
        assert_eq!(m.score(&[1.0], 1.0), 0.0);
        let e = m.expectations(1.0).unwrap();
        assert_eq!(-e.d2, 0.25);
        assert_eq!(-1.0 / m.expectations(2.5).unwrap().d2, 4.0 * 2.5);

        assert_eq!(NeymanScott.terms(&[2.0], 1.0, 1.0).v, 1.0);
        let p = PanelProbit.terms(&[1.0, 0.0], 0.3, 0.0);
        assert!((p.loglik - 0.5f64.ln()).abs() < 1e-15);

        assert!(matches!(
            builtin_model("neyman-scott".parse().unwrap()),
            Model::Panel(_)
        ));
        assert!(matches!(builtin_model(BuiltinName::Ar1), Model::Scalar(_)));
        assert!("gamma".parse::<BuiltinName>().is_err());
    }

    /// MC mean of `draws` with its standard error.
    fn mc(draws: &[f64]) -> (f64, f64) {
        let m = mean(draws);
        let var = draws.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / (draws.len() - 1) as f64;
        (m, (var / draws.len() as f64).sqrt())
    }

    #[test]
    fn sqrt_mean_normal_expectations_and_information_equality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let theta: f64 = 1.7;
        let zs: Vec<f64> = (0..200_000)
            .map(|_| theta.sqrt() + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let m = SqrtMeanNormal;
        let e = m.expectations(theta).unwrap();

        let (s, se) = mc(&zs.iter().map(|&z| m.score(&[z], theta)).collect::<Vec<_>>());
        assert!(s.abs() < 4.0 * se);
        let (d2, se) = mc(&zs.iter().map(|&z| m.d2(&[z], theta)).collect::<Vec<_>>());
        assert!((d2 - e.d2).abs() < 4.0 * se);
        let (d3, se) = mc(&zs.iter().map(|&z| m.d3(&[z], theta)).collect::<Vec<_>>());
        assert!((d3 - e.d3).abs() < 4.0 * se);
        let (sd2, se) = mc(&zs
            .iter()
            .map(|&z| m.score(&[z], theta) * m.d2(&[z], theta))
            .collect::<Vec<_>>());
        assert!((sd2 - e.score_d2).abs() < 4.0 * se);

        // information equality: E[ℓ²] = -E[ℓ^θ]
        let (sq, se) = mc(&zs
            .iter()
            .map(|&z| m.score(&[z], theta).powi(2))
            .collect::<Vec<_>>());
        assert!((sq + e.d2).abs() < 4.0 * se);
        assert!((e.score_sq + e.d2).abs() < 1e-15);
    }

    #[test]
    fn neyman_scott_expectations_match_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (theta, alpha): (f64, f64) = (1.3, 0.4);
        let draws: Vec<PanelTerms> = (0..200_000)
            .map(|_| {
                let z = alpha + theta.sqrt() * rng.sample::<f64, _>(StandardNormal);
                NeymanScott.terms(&[z], theta, alpha)
            })
            .collect();
        let e = NeymanScott.expectations(theta, alpha).unwrap();
        let checks: [(fn(&PanelTerms) -> f64, f64); 6] = [
            (|t| t.u * t.u, e.uu),
            (|t| t.u * t.v, e.uv),
            (|t| t.v * t.v, e.vv),
            (|t| t.v * t.u_alpha, e.v_u_alpha),
            (|t| t.u_alpha * t.u_alpha, e.u_alpha_sq),
            (|t| t.v * t.v_alpha, e.v_v_alpha),
        ];
        for (f, expected) in checks {
            let (m, se) = mc(&draws.iter().map(f).collect::<Vec<_>>());
            assert!((m - expected).abs() < 4.0 * se + 1e-12, "{m} vs {expected}");
        }
    }
}
