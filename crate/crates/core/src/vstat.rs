//! Normalized V-statistics `W = T^{m/2} k̄₁ ⋯ k̄_m` and what the jackknife
//! and the split-sample transform do to them.
//!
//! The direct evaluators apply the transforms by definition (refitting the
//! statistic on delete-one and half series). The closed forms express the
//! transformed statistic through sums over distinct indices, which is where
//! the bias reduction becomes visible: the jackknife removes the diagonal
//! ("own observation") terms, the split-sample keeps only cross-half terms.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type Kernel = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `m` kernels applied to a scalar series.
#[derive(Clone)]
pub struct KernelSet {
    kernels: Vec<Kernel>,
    center: bool,
}

impl fmt::Debug for KernelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSet")
            .field("order", &self.kernels.len())
            .field("center", &self.center)
            .finish()
    }
}

impl KernelSet {
    /// Kernels centered at their sample mean over whatever series they are
    /// evaluated on.
    pub fn new(kernels: Vec<Kernel>) -> Self {
        KernelSet {
            kernels,
            center: true,
        }
    }

    /// Kernels used as given, e.g. when they are already mean zero under the
    /// sampling distribution.
    pub fn uncentered(kernels: Vec<Kernel>) -> Self {
        KernelSet {
            kernels,
            center: false,
        }
    }

    /// Polynomial kernels `Σ_d c_d x^d`, sample-centered when `center`.
    pub fn polynomials(coefficients: &[Vec<f64>], center: bool) -> Self {
        let kernels = coefficients
            .iter()
            .map(|c| {
                let c = c.clone();
                Arc::new(move |x: f64| c.iter().rev().fold(0.0, |acc, a| acc * x + a)) as Kernel
            })
            .collect();
        KernelSet { kernels, center }
    }

    pub fn order(&self) -> usize {
        self.kernels.len()
    }

    pub fn evaluate(&self, series: &[f64]) -> KernelValues {
        let rows = self
            .kernels
            .iter()
            .map(|k| {
                let mut v: Vec<f64> = series.iter().map(|&x| k(x)).collect();
                if self.center && !v.is_empty() {
                    let m = v.iter().sum::<f64>() / v.len() as f64;
                    v.iter_mut().for_each(|x| *x -= m);
                }
                v
            })
            .collect();
        KernelValues { rows }
    }
}

/// Kernel values `k_j(x_t)`, one row per kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelValues {
    rows: Vec<Vec<f64>>,
}

impl KernelValues {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidData("at least one kernel is required".into()));
        };
        if rows.iter().any(|r| r.len() != first.len()) {
            return Err(Error::InvalidData("kernel rows differ in length".into()));
        }
        Ok(KernelValues { rows })
    }

    pub fn order(&self) -> usize {
        self.rows.len()
    }

    pub fn len(&self) -> usize {
        self.rows[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    fn sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().sum()).collect()
    }

    fn range_sums(&self, range: std::ops::Range<usize>) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r[range.clone()].iter().sum())
            .collect()
    }

    /// `Σ_t Π_{j∈mask} k_j(t)`
    fn power_sum(&self, mask: usize) -> f64 {
        (0..self.len())
            .map(|t| {
                self.rows
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| mask & (1 << j) != 0)
                    .map(|(_, r)| r[t])
                    .product::<f64>()
            })
            .sum()
    }

    /// Typical magnitude of `W` for these kernel values, `T^{m/2} Π rms(k_j)`.
    pub fn scale(&self) -> f64 {
        let t = self.len() as f64;
        self.rows
            .iter()
            .map(|r| (r.iter().map(|x| x * x).sum::<f64>() / t).sqrt() * t.sqrt())
            .product()
    }
}

fn norm(len: usize, m: usize) -> f64 {
    (len as f64).powf(-(m as f64) / 2.0)
}

/// `W = T^{-m/2} Π_j Σ_t k_j(t)`
pub fn vstat_values(v: &KernelValues) -> f64 {
    norm(v.len(), v.order()) * v.sums().iter().product::<f64>()
}

pub fn vstat(series: &[f64], kernels: &KernelSet) -> f64 {
    vstat_values(&kernels.evaluate(series))
}

/// `TW − (T−1)(T/(T−1))^{m/2} (1/T) Σ_t W^{(−t)}` with each delete-one
/// statistic normalized by its own length.
pub fn jackknife_direct_values(v: &KernelValues) -> f64 {
    let (t, m) = (v.len(), v.order());
    let sums = v.sums();
    let loo: f64 = (0..t)
        .map(|s| {
            let prod: f64 = sums
                .iter()
                .zip(v.rows())
                .map(|(total, r)| total - r[s])
                .product();
            norm(t - 1, m) * prod
        })
        .sum();
    let tf = t as f64;
    tf * vstat_values(v) - (tf - 1.0) * (tf / (tf - 1.0)).powf(m as f64 / 2.0) * loo / tf
}

pub fn jackknife_vstat_direct(series: &[f64], kernels: &KernelSet) -> f64 {
    jackknife_direct_values(&kernels.evaluate(series))
}

/// Closed form of the jackknifed statistic for `m ≤ 3`.
///
/// * `m = 1`: `W` itself.
/// * `m = 2`: `(1/(T−1)) Σ_{t≠s} k₁(t)k₂(s)`.
/// * `m = 3`: `((T+1) D₁₁₁ + D₂₁ − (T−1) P₁₂₃) / (√T (T−1)²)`, where `D₁₁₁`
///   sums over distinct triples, `D₂₁` over pairs with one index shared by
///   two kernels, and `P₁₂₃ = Σ_t k₁k₂k₃`.
pub fn jackknife_closed_values(v: &KernelValues) -> Result<f64> {
    jackknife_closed_perturbed(v, 0.0)
}

#[doc(hidden)]
pub fn jackknife_closed_perturbed(v: &KernelValues, perturb: f64) -> Result<f64> {
    let (t, m) = (v.len() as f64, v.order());
    let s = v.sums();
    match m {
        1 => Ok(vstat_values(v) * (1.0 + perturb)),
        2 => {
            let distinct = s[0] * s[1] - v.power_sum(0b11);
            Ok(distinct / (t - 1.0) * (1.0 + perturb))
        }
        3 => {
            let p12 = v.power_sum(0b011);
            let p13 = v.power_sum(0b101);
            let p23 = v.power_sum(0b110);
            let p123 = v.power_sum(0b111);
            let cross = s[0] * p23 + s[1] * p13 + s[2] * p12;
            let d21 = cross - 3.0 * p123;
            let d111 = s[0] * s[1] * s[2] - cross + 2.0 * p123;
            let num = (t + 1.0) * (1.0 + perturb) * d111 + d21 - (t - 1.0) * p123;
            Ok(num / (t.sqrt() * (t - 1.0).powi(2)))
        }
        _ => Err(Error::UnsupportedOrder { order: m, max: 3 }),
    }
}

pub fn jackknife_vstat_closed(series: &[f64], kernels: &KernelSet) -> Result<f64> {
    jackknife_closed_values(&kernels.evaluate(series))
}

/// `2W − 2^{m/2} ½(W⁽¹⁾ + W⁽²⁾)` over the first `⌈T/2⌉` and the remaining
/// points, each half normalized by its own length.
pub fn split_direct_values(v: &KernelValues) -> f64 {
    let (t, m) = (v.len(), v.order());
    let h = t.div_ceil(2);
    let first = norm(h, m) * v.range_sums(0..h).iter().product::<f64>();
    let second = norm(t - h, m) * v.range_sums(h..t).iter().product::<f64>();
    2.0 * vstat_values(v) - 2f64.powf(m as f64 / 2.0) * 0.5 * (first + second)
}

pub fn split_vstat_direct(series: &[f64], kernels: &KernelSet) -> f64 {
    split_direct_values(&kernels.evaluate(series))
}

/// Closed form of the split-sample statistic for even `T` and `m ≤ 4`:
///
/// `T^{-m/2} [2 Σ_cross − (2^{m−1} − 2)(Π_j A_j + Π_j B_j)]`
///
/// with `A_j`, `B_j` the half sums and `Σ_cross` the sum over every way of
/// taking some kernels from the first half and the rest from the second.
pub fn split_closed_values(v: &KernelValues) -> Result<f64> {
    split_closed_perturbed(v, 0.0)
}

#[doc(hidden)]
pub fn split_closed_perturbed(v: &KernelValues, perturb: f64) -> Result<f64> {
    let (t, m) = (v.len(), v.order());
    if m > 4 {
        return Err(Error::UnsupportedOrder { order: m, max: 4 });
    }
    if t % 2 == 1 {
        return Err(Error::OddLength { len: t });
    }
    let a = v.range_sums(0..t / 2);
    let b = v.range_sums(t / 2..t);
    let full = (1usize << m) - 1;
    let block = |mask: usize| -> f64 {
        (0..m)
            .map(|j| if mask & (1 << j) != 0 { a[j] } else { b[j] })
            .product()
    };
    let cross: f64 = (1..full).map(block).sum();
    let within = block(full) + block(0);
    let coef = (1usize << (m - 1)) as f64 - 2.0;
    Ok(norm(t, m) * (1.0 + perturb) * (2.0 * cross - coef * within))
}

pub fn split_vstat_closed(series: &[f64], kernels: &KernelSet) -> Result<f64> {
    split_closed_values(&kernels.evaluate(series))
}

/// `|a − b|` relative to the larger of `|a|`, `|b|` and the natural size of
/// the statistic, so that near-zero values are not judged on rounding noise.
pub fn relative_error(a: f64, b: f64, v: &KernelValues) -> f64 {
    let denom = a.abs().max(b.abs()).max(v.scale());
    if denom == 0.0 {
        (a - b).abs()
    } else {
        (a - b).abs() / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn identity_kernels(m: usize) -> KernelSet {
        KernelSet::uncentered((0..m).map(|_| Arc::new(|x: f64| x) as Kernel).collect())
    }

    /// Brute-force `T^{-m/2} Σ_{t₁..t_m} Π_j k_j(t_j)`.
    fn brute(v: &KernelValues) -> f64 {
        let (t, m) = (v.len(), v.order());
        let mut total = 0.0;
        let mut idx = vec![0usize; m];
        loop {
            total += (0..m).map(|j| v.rows()[j][idx[j]]).product::<f64>();
            let mut j = 0;
            while j < m {
                idx[j] += 1;
                if idx[j] < t {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == m {
                break;
            }
        }
        norm(t, m) * total
    }

    fn random_values(rng: &mut ChaCha8Rng, m: usize, t: usize) -> KernelValues {
        KernelValues::from_rows(
            (0..m)
                .map(|_| {
                    (0..t)
                        .map(|_| rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn small_examples() {
        assert_eq!(vstat(&[1.0, -1.0], &identity_kernels(1)), 0.0);
        assert_eq!(vstat(&[1.0, -1.0], &identity_kernels(2)), 0.0);
        let k = identity_kernels(2);
        assert!((jackknife_vstat_closed(&[1.0, -1.0], &k).unwrap() + 2.0).abs() < 1e-12);
        assert!((jackknife_vstat_direct(&[1.0, -1.0], &k) + 2.0).abs() < 1e-12);
        let d = split_vstat_direct(&[1.0, -1.0], &k);
        let c = split_vstat_closed(&[1.0, -1.0], &k).unwrap();
        assert!((d - c).abs() < 1e-12);
    }

    #[test]
    fn product_of_means_matches_brute_force() {
        let k = KernelSet::polynomials(&[vec![0.0, 1.0], vec![0.0, 1.0]], true);
        let v = k.evaluate(&[1.0, 1.0, -2.0]);
        assert!((vstat_values(&v) - brute(&v)).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_values(&mut rng, 3, 9);
        assert!((vstat_values(&v) - brute(&v)).abs() < 1e-12 * v.scale());
    }

    #[test]
    fn sample_centering_zeroes_the_full_sample_statistic() {
        let k = KernelSet::polynomials(&[vec![1.0, 2.0, 0.5]], true);
        let v = k.evaluate(&[0.3, 1.2, -0.7, 2.0]);
        assert!(v.rows()[0].iter().sum::<f64>().abs() <= 1e-14);
    }

    #[test]
    fn order_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = random_values(&mut rng, 4, 8);
        assert!(matches!(
            jackknife_closed_values(&v),
            Err(Error::UnsupportedOrder { order: 4, max: 3 })
        ));
        let v = random_values(&mut rng, 5, 8);
        assert!(matches!(
            split_closed_values(&v),
            Err(Error::UnsupportedOrder { order: 5, max: 4 })
        ));
        let v = random_values(&mut rng, 2, 7);
        assert!(matches!(
            split_closed_values(&v),
            Err(Error::OddLength { len: 7 })
        ));
    }

    #[test]
    fn zero_kernel_gives_zero_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut v = random_values(&mut rng, 3, 8);
        v.rows[1] = vec![0.0; 8];
        assert_eq!(vstat_values(&v), 0.0);
        assert_eq!(jackknife_direct_values(&v), 0.0);
        assert_eq!(jackknife_closed_values(&v).unwrap(), 0.0);
        assert_eq!(split_direct_values(&v), 0.0);
        assert_eq!(split_closed_values(&v).unwrap(), 0.0);
    }

    #[test]
    fn perturbation_breaks_the_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = random_values(&mut rng, 3, 10);
        let d = jackknife_direct_values(&v);
        let c = jackknife_closed_perturbed(&v, 1e-6).unwrap();
        assert!(relative_error(d, c, &v) > 1e-10);
        let d = split_direct_values(&v);
        let c = split_closed_perturbed(&v, 1e-6).unwrap();
        assert!(relative_error(d, c, &v) > 1e-10);
    }

    fn poly_kernels(m: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 1..4), m)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn jackknife_closed_equals_direct(
            m in 1usize..=3,
            t in 4usize..=24,
            seed in any::<u64>(),
            coeffs in poly_kernels(3),
            center in any::<bool>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let series: Vec<f64> = (0..t).map(|_| rng.sample(StandardNormal)).collect();
            let k = KernelSet::polynomials(&coeffs[..m], center);
            let v = k.evaluate(&series);
            let d = jackknife_direct_values(&v);
            let c = jackknife_closed_values(&v).unwrap();
            prop_assert!(relative_error(d, c, &v) <= 1e-10, "m={m} T={t}: {d} vs {c}");
        }

        #[test]
        fn split_closed_equals_direct(
            m in 1usize..=4,
            half in 2usize..=12,
            seed in any::<u64>(),
            coeffs in poly_kernels(4),
            center in any::<bool>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let series: Vec<f64> = (0..2 * half).map(|_| rng.sample(StandardNormal)).collect();
            let k = KernelSet::polynomials(&coeffs[..m], center);
            let v = k.evaluate(&series);
            let d = split_direct_values(&v);
            let c = split_closed_values(&v).unwrap();
            prop_assert!(relative_error(d, c, &v) <= 1e-10, "m={m} T={}: {d} vs {c}", 2 * half);
        }

        #[test]
        fn first_order_statistics_are_unchanged(t in 2usize..=30, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_values(&mut rng, 1, t);
            let w = vstat_values(&v);
            prop_assert!(relative_error(jackknife_direct_values(&v), w, &v) <= 1e-12);
            if t % 2 == 0 {
                prop_assert!(relative_error(split_direct_values(&v), w, &v) <= 1e-12);
            }
        }
    }
}
