use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, PanelDataset};
use crate::error::{Error, Result};
use crate::models::{Ar1, Model, NeymanScott, PanelProbit, SqrtMeanNormal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DgpKind {
    /// `z_i ~ N(√θ, 1)`
    SqrtMeanNormal { theta: f64 },
    /// `z_it ~ N(α_i, θ)`, `α_i ~ N(0, 1)`
    NeymanScott { theta: f64 },
    /// Probit with `x_it = t/10 + x_{i,t−1}/2 + u_it`, `u ~ U(−½, ½)`.
    PanelProbitSerialX { theta: f64 },
    /// Probit with `x_it ~ U(−1, 1)`.
    PanelProbitIidX { theta: f64 },
    /// `y_t = θ y_{t−1} + σ ε_t` started from the stationary law.
    Ar1 { theta: f64, sigma: f64 },
}

impl DgpKind {
    /// Parses a design name with its parameters.
    pub fn from_name(name: &str, theta: Option<f64>, sigma: Option<f64>) -> Result<Self> {
        let kind = match name.trim().to_ascii_lowercase().as_str() {
            "sqrt-mean-normal" => DgpKind::SqrtMeanNormal {
                theta: theta.unwrap_or(1.0),
            },
            "neyman-scott" => DgpKind::NeymanScott {
                theta: theta.unwrap_or(1.0),
            },
            "panel-probit-serial" => DgpKind::PanelProbitSerialX {
                theta: theta.unwrap_or(1.0),
            },
            "panel-probit-iid" => DgpKind::PanelProbitIidX {
                theta: theta.unwrap_or(1.0),
            },
            "ar1" => DgpKind::Ar1 {
                theta: theta.unwrap_or(0.8),
                sigma: sigma.unwrap_or(1.0),
            },
            other => return Err(Error::Config(format!("unknown dgp `{other}`"))),
        };
        kind.validate()?;
        Ok(kind)
    }

    pub fn name(&self) -> &'static str {
        match self {
            DgpKind::SqrtMeanNormal { .. } => "sqrt-mean-normal",
            DgpKind::NeymanScott { .. } => "neyman-scott",
            DgpKind::PanelProbitSerialX { .. } => "panel-probit-serial",
            DgpKind::PanelProbitIidX { .. } => "panel-probit-iid",
            DgpKind::Ar1 { .. } => "ar1",
        }
    }

    pub fn theta(&self) -> f64 {
        match *self {
            DgpKind::SqrtMeanNormal { theta }
            | DgpKind::NeymanScott { theta }
            | DgpKind::PanelProbitSerialX { theta }
            | DgpKind::PanelProbitIidX { theta }
            | DgpKind::Ar1 { theta, .. } => theta,
        }
    }

    pub fn is_panel(&self) -> bool {
        matches!(
            self,
            DgpKind::NeymanScott { .. }
                | DgpKind::PanelProbitSerialX { .. }
                | DgpKind::PanelProbitIidX { .. }
        )
    }

    pub fn model(&self) -> Model {
        match *self {
            DgpKind::SqrtMeanNormal { .. } => Model::Scalar(Arc::new(SqrtMeanNormal)),
            DgpKind::Ar1 { sigma, .. } => Model::Scalar(Arc::new(Ar1 {
                sigma2: sigma * sigma,
            })),
            DgpKind::NeymanScott { .. } => Model::Panel(Arc::new(NeymanScott)),
            DgpKind::PanelProbitSerialX { .. } | DgpKind::PanelProbitIidX { .. } => {
                Model::Panel(Arc::new(PanelProbit))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DgpKind::SqrtMeanNormal { theta } => theta >= 0.0,
            DgpKind::NeymanScott { theta } => theta > 0.0,
            DgpKind::PanelProbitSerialX { theta } | DgpKind::PanelProbitIidX { theta } => {
                theta.is_finite()
            }
            DgpKind::Ar1 { theta, sigma } => theta.abs() < 1.0 && sigma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "parameters outside the domain of {}: {self:?}",
                self.name()
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpSpec {
    pub kind: DgpKind,
    /// Units (panels) or observations (cross-section); unused for AR(1).
    pub n: usize,
    /// Periods; unused for the i.i.d. cross-section.
    pub periods: usize,
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        match self.kind {
            DgpKind::SqrtMeanNormal { .. } if self.n < 2 => {
                Err(Error::Config("n must be at least 2".into()))
            }
            DgpKind::Ar1 { .. } if self.periods < 2 => {
                Err(Error::Config("T must be at least 2".into()))
            }
            k if k.is_panel() && (self.n < 1 || self.periods < 2) => {
                Err(Error::Config("panels need n >= 1 and T >= 2".into()))
            }
            _ => Ok(()),
        }
    }
}

impl DgpSpec {
    /// File name stem such as `neyman-scott_n200_T8`.
    pub fn file_stem(&self) -> String {
        let name = self.kind.name();
        match self.kind {
            DgpKind::SqrtMeanNormal { .. } => format!("{name}_n{}", self.n),
            DgpKind::Ar1 { .. } => format!("{name}_T{}", self.periods),
            _ => format!("{name}_n{}_T{}", self.n, self.periods),
        }
    }
}

impl fmt::Display for DgpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DgpKind::SqrtMeanNormal { .. } => write!(f, "n = {}", self.n),
            DgpKind::Ar1 { .. } => write!(f, "T = {}", self.periods),
            _ => write!(f, "n = {}, T = {}", self.n, self.periods),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Cross(Dataset),
    Panel(PanelDataset),
}

/// `x_t = t/10 + x_{t−1}/2 + u_t` for `t = 1..`, from `x_0 = u_0`, given the
/// draws `u_0, u_1, ...`.
pub fn serial_regressors(draws: &[f64]) -> Vec<f64> {
    let Some((&u0, rest)) = draws.split_first() else {
        return Vec::new();
    };
    let mut prev = u0;
    rest.iter()
        .enumerate()
        .map(|(k, u)| {
            prev = (k + 1) as f64 / 10.0 + prev / 2.0 + u;
            prev
        })
        .collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn probit_panel(
    spec: &DgpSpec,
    theta: f64,
    serial: bool,
    rng: &mut ChaCha8Rng,
) -> Result<PanelDataset> {
    let t = spec.periods;
    let mut cells = Vec::with_capacity(spec.n * t * 2);
    for _ in 0..spec.n {
        let alpha = normal(rng);
        let xs = if serial {
            let draws: Vec<f64> = (0..=t).map(|_| rng.gen_range(-0.5..0.5)).collect();
            serial_regressors(&draws)
        } else {
            (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        for x in xs {
            let y = if theta * x + alpha + normal(rng) > 0.0 {
                1.0
            } else {
                0.0
            };
            cells.push(y);
            cells.push(x);
        }
    }
    PanelDataset::new(spec.n, t, 2, cells)
}

/// One simulated data set; identical seeds give identical data.
pub fn generate(spec: &DgpSpec, seed: u64) -> Result<Sample> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rng = &mut rng;
    Ok(match spec.kind {
        DgpKind::SqrtMeanNormal { theta } => {
            let mu = theta.sqrt();
            let zs: Vec<f64> = (0..spec.n).map(|_| mu + normal(rng)).collect();
            Sample::Cross(Dataset::from_column(&zs)?)
        }
        DgpKind::NeymanScott { theta } => {
            let sd = theta.sqrt();
            let mut cells = Vec::with_capacity(spec.n * spec.periods);
            for _ in 0..spec.n {
                let alpha = normal(rng);
                cells.extend((0..spec.periods).map(|_| alpha + sd * normal(rng)));
            }
            Sample::Panel(PanelDataset::new(spec.n, spec.periods, 1, cells)?)
        }
        DgpKind::PanelProbitSerialX { theta } => {
            Sample::Panel(probit_panel(spec, theta, true, rng)?)
        }
        DgpKind::PanelProbitIidX { theta } => Sample::Panel(probit_panel(spec, theta, false, rng)?),
        DgpKind::Ar1 { theta, sigma } => {
            let mut y = sigma / (1.0 - theta * theta).sqrt() * normal(rng);
            let mut series = Vec::with_capacity(spec.periods + 1);
            series.push(y);
            for _ in 0..spec.periods {
                y = theta * y + sigma * normal(rng);
                series.push(y);
            }
            Sample::Cross(Dataset::lagged(&series)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serial_recursion_from_zero_draws() {
        let xs = serial_regressors(&[0.0; 4]);
        let expected = [0.1, 0.25, 0.425];
        for (x, e) in xs.iter().zip(expected) {
            assert!((x - e).abs() < 1e-15);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for kind in [
            DgpKind::PanelProbitSerialX { theta: 1.0 },
            DgpKind::PanelProbitIidX { theta: 1.0 },
            DgpKind::NeymanScott { theta: 1.0 },
            DgpKind::SqrtMeanNormal { theta: 1.0 },
            DgpKind::Ar1 {
                theta: 0.5,
                sigma: 1.0,
            },
        ] {
            let spec = DgpSpec {
                kind,
                n: 20,
                periods: 8,
            };
            assert_eq!(generate(&spec, 9).unwrap(), generate(&spec, 9).unwrap());
            assert_ne!(generate(&spec, 9).unwrap(), generate(&spec, 10).unwrap());
        }
    }

    #[test]
    fn shapes_and_ranges() {
        let spec = DgpSpec {
            kind: DgpKind::PanelProbitIidX { theta: 1.0 },
            n: 30,
            periods: 6,
        };
        let Sample::Panel(p) = generate(&spec, 1).unwrap() else {
            panic!()
        };
        assert_eq!((p.n(), p.periods(), p.width()), (30, 6, 2));
        for i in 0..30 {
            for c in p.unit(i) {
                assert!(c[0] == 0.0 || c[0] == 1.0);
                assert!((-1.0..1.0).contains(&c[1]));
            }
        }
        let spec = DgpSpec {
            kind: DgpKind::Ar1 {
                theta: 0.5,
                sigma: 1.0,
            },
            n: 0,
            periods: 50,
        };
        let Sample::Cross(d) = generate(&spec, 1).unwrap() else {
            panic!()
        };
        assert_eq!(d.len(), 50);
        assert_eq!(d.row(1)[0], d.row(0)[1]);
    }

    #[test]
    fn sqrt_mean_normal_mean() {
        let spec = DgpSpec {
            kind: DgpKind::SqrtMeanNormal { theta: 1.0 },
            n: 1_000_000,
            periods: 0,
        };
        let Sample::Cross(d) = generate(&spec, 4).unwrap() else {
            panic!()
        };
        let m = d.column(0).iter().sum::<f64>() / 1e6;
        assert!((m - 1.0).abs() < 4.0 / 1000.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DgpKind::from_name("ar1", Some(1.2), None).is_err());
        assert!(DgpKind::from_name("neyman-scott", Some(0.0), None).is_err());
        assert!(DgpKind::from_name("bogus", None, None).is_err());
    }
}
