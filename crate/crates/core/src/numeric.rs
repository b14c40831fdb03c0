//! Small numerical helpers shared across the crate.

use statrs::function::erf::erfc;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this index the normal CDF is evaluated through the Mills ratio.
const TAIL_SWITCH: f64 = -8.0;

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<NeumaierSum>().value()
}

pub fn mean(values: &[f64]) -> f64 {
    sum(values.iter().copied()) / values.len() as f64
}

/// Sample variance with divisor `len - 1`.
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    sum(values.iter().map(|v| (v - m) * (v - m))) / (values.len() as f64 - 1.0)
}

pub fn sample_sd(values: &[f64]) -> f64 {
    sample_variance(values).sqrt()
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper-tail Mills ratio `(1 - Φ(x)) / φ(x)` for large positive `x`,
/// from its continued fraction.
fn mills_ratio_upper(x: f64) -> f64 {
    let mut frac = 0.0;
    for k in (1..=80).rev() {
        frac = k as f64 / (x + frac);
    }
    1.0 / (x + frac)
}

/// `ln Φ(x)`, accurate deep in the lower tail.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x < TAIL_SWITCH {
        -0.5 * x * x - LN_SQRT_2PI + mills_ratio_upper(-x).ln()
    } else if x > 5.0 {
        // Φ(x) = 1 - tiny; ln_1p keeps the tail mass.
        (-0.5 * erfc(x / std::f64::consts::SQRT_2)).ln_1p()
    } else {
        normal_cdf(x).ln()
    }
}

/// Inverse Mills ratio `φ(x) / Φ(x)`.
pub fn inverse_mills(x: f64) -> f64 {
    if x < TAIL_SWITCH {
        1.0 / mills_ratio_upper(-x)
    } else {
        normal_pdf(x) / normal_cdf(x)
    }
}

/// Two-sided standard normal critical value for a test of size `level`.
pub fn normal_critical_value(level: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    std_normal.inverse_cdf(1.0 - level / 2.0)
}

/// Seed for stream `index` under `master`, so that streams can be added
/// without disturbing earlier ones.
pub fn stream_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let values = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(sum(values), 2.0);
    }

    #[test]
    fn log_cdf_is_continuous_across_the_tail_switch() {
        let left = log_normal_cdf(TAIL_SWITCH - 1e-9);
        let right = log_normal_cdf(TAIL_SWITCH + 1e-9);
        assert!((left - right).abs() < 1e-7, "{left} vs {right}");
        assert!((log_normal_cdf(0.0) - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn inverse_mills_matches_direct_ratio_and_asymptote() {
        for x in [-7.9, -3.0, 0.0, 2.5] {
            let direct = normal_pdf(x) / normal_cdf(x);
            assert!((inverse_mills(x) - direct).abs() <= 1e-12 * direct.max(1.0));
        }
        // λ(x) ≈ -x - 1/x for very negative x
        let x = -40.0;
        assert!((inverse_mills(x) - (-x - 1.0 / x)).abs() < 1e-4);
        assert!(inverse_mills(-1e3).is_finite());
        assert!(log_normal_cdf(-1e3).is_finite());
    }

    #[test]
    fn critical_values() {
        assert!((normal_critical_value(0.05) - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((normal_critical_value(0.10) - 1.644_853_626_951_472_2).abs() < 1e-9);
    }

    #[test]
    fn stream_seeds_differ() {
        assert_ne!(stream_seed(1, 0), stream_seed(1, 1));
        assert_ne!(stream_seed(1, 0), stream_seed(2, 0));
        assert_eq!(stream_seed(7, 3), stream_seed(7, 3));
    }
}
