//! Randomized identity checks: closed-form against direct V-statistic
//! transforms, and the exact algebra of the resampling corrections.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::corrections::{jackknife_bias, split_sample_bias};
use crate::data::Dataset;
use crate::estimate::{fit_mle, SolverOpts};
use crate::models::SqrtMeanNormal;
use crate::numeric::stream_seed;
use crate::vstat::{
    jackknife_closed_perturbed, jackknife_direct_values, relative_error, split_closed_perturbed,
    split_direct_values, KernelSet,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOpts {
    pub cases: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Relative error injected into the closed forms; nonzero only to check
    /// that the suite can fail.
    pub perturb: f64,
}

impl Default for VerifyOpts {
    fn default() -> Self {
        VerifyOpts {
            cases: 1000,
            seed: 20_240_601,
            tolerance: 1e-10,
            perturb: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub name: String,
    pub cases: usize,
    pub passed: usize,
    pub max_rel_error: f64,
}

impl IdentityReport {
    pub fn ok(&self) -> bool {
        self.passed == self.cases
    }
}

#[derive(Clone, Copy)]
enum Check {
    Jackknife(usize),
    Split(usize),
    JackknifeCorrection,
    SplitCorrection,
}

impl Check {
    fn name(self) -> String {
        match self {
            Check::Jackknife(m) => format!("jackknife V-statistic, m = {m}"),
            Check::Split(m) => format!("split V-statistic, m = {m}"),
            Check::JackknifeCorrection => "jackknife of squared mean is the U-statistic".into(),
            Check::SplitCorrection => "split of squared mean from half-sample means".into(),
        }
    }
}

/// Random cubic kernels, either sample-centered or mean zero under the
/// standard normal the series is drawn from.
fn random_kernels(rng: &mut ChaCha8Rng, m: usize) -> KernelSet {
    let sample_centered = rng.gen_bool(0.5);
    let coeffs: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let degree = rng.gen_range(1..=3);
            let mut c: Vec<f64> = (0..=degree).map(|_| rng.gen_range(-2.0..2.0)).collect();
            // E[x²] = 1 and odd moments vanish
            c[0] = -c.get(2).copied().unwrap_or(0.0);
            c
        })
        .collect();
    KernelSet::polynomials(&coeffs, sample_centered)
}

fn series(rng: &mut ChaCha8Rng, len: usize, shift: f64) -> Vec<f64> {
    (0..len)
        .map(|_| shift + rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Relative error of one randomized case.
fn run_case(check: Check, rng: &mut ChaCha8Rng, perturb: f64) -> f64 {
    match check {
        Check::Jackknife(m) => {
            let t = rng.gen_range(4..=24);
            let v = random_kernels(rng, m).evaluate(&series(rng, t, 0.0));
            let closed = jackknife_closed_perturbed(&v, perturb).unwrap_or(f64::NAN);
            relative_error(jackknife_direct_values(&v), closed, &v)
        }
        Check::Split(m) => {
            let t = 2 * rng.gen_range(2..=12);
            let v = random_kernels(rng, m).evaluate(&series(rng, t, 0.0));
            let closed = split_closed_perturbed(&v, perturb).unwrap_or(f64::NAN);
            relative_error(split_direct_values(&v), closed, &v)
        }
        Check::JackknifeCorrection | Check::SplitCorrection => {
            let n = rng.gen_range(4..=24);
            let zs = series(rng, n, 3.0);
            correction_case(check, &zs, perturb)
        }
    }
}

fn correction_case(check: Check, zs: &[f64], perturb: f64) -> f64 {
    let opts = SolverOpts::default();
    let data = Dataset::from_column(zs).expect("finite draws");
    let Ok(full) = fit_mle(&data, &SqrtMeanNormal, 1.0, &opts) else {
        return f64::NAN;
    };
    let n = zs.len() as f64;
    let (corrected, exact) = match check {
        Check::JackknifeCorrection => {
            let Ok(b) = jackknife_bias(&data, &SqrtMeanNormal, &full, &opts) else {
                return f64::NAN;
            };
            let s: f64 = zs.iter().sum();
            let sq: f64 = zs.iter().map(|z| z * z).sum();
            (b.corrected(full.theta_hat), (s * s - sq) / (n * (n - 1.0)))
        }
        _ => {
            let Ok(b) = split_sample_bias(&data, &SqrtMeanNormal, &full, &opts) else {
                return f64::NAN;
            };
            let h = zs.len().div_ceil(2);
            let m1 = zs[..h].iter().sum::<f64>() / h as f64;
            let m2 = zs[h..].iter().sum::<f64>() / (zs.len() - h) as f64;
            // With unequal halves the split estimator is not a pure cross
            // product; the identity below holds for any lengths.
            let exact = 2.0 * full.theta_hat - 0.5 * (m1 * m1 + m2 * m2);
            (b.corrected(full.theta_hat), exact)
        }
    };
    let exact = exact * (1.0 + perturb);
    (corrected - exact).abs() / corrected.abs().max(exact.abs()).max(1.0)
}

/// Runs every identity on `opts.cases` randomized cases each.
pub fn run_identity_suite(opts: &VerifyOpts) -> Vec<IdentityReport> {
    let checks = [
        Check::Jackknife(1),
        Check::Jackknife(2),
        Check::Jackknife(3),
        Check::Split(1),
        Check::Split(2),
        Check::Split(3),
        Check::Split(4),
        Check::JackknifeCorrection,
        Check::SplitCorrection,
    ];
    checks
        .iter()
        .enumerate()
        .map(|(k, &check)| {
            let errors: Vec<f64> = (0..opts.cases)
                .into_par_iter()
                .map(|case| {
                    let seed = stream_seed(stream_seed(opts.seed, k as u64), case as u64);
                    run_case(check, &mut ChaCha8Rng::seed_from_u64(seed), opts.perturb)
                })
                .collect();
            let passed = errors.iter().filter(|e| **e <= opts.tolerance).count();
            let max_rel_error =
                errors.iter().fold(
                    0.0f64,
                    |acc, &e| if e.is_nan() { f64::NAN } else { acc.max(e) },
                );
            IdentityReport {
                name: check.name(),
                cases: opts.cases,
                passed,
                max_rel_error,
            }
        })
        .collect()
}
