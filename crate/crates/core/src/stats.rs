//! Self-contained statistical primitives.
//!
//! Everything here is implemented directly (no external math crates):
//! average-rank ranking, Spearman correlation computed as Pearson on ranks
//! (the `1 - 6*sum(d^2)/...` shortcut is wrong under ties), the Friedman
//! chi-square test with the standard tie correction, the Wilcoxon
//! signed-rank test with an exact small-sample branch, and the chi-square
//! survival function via the regularized incomplete gamma function.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors for the statistical primitives.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("input is empty")]
    EmptyInput,
    #[error("input sequences have different lengths")]
    LengthMismatch,
    #[error("need at least {needed} observations, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("input has zero rank variance; correlation is undefined")]
    DegenerateInput,
    #[error("Friedman test needs at least 3 treatments, got {got}")]
    TooFewTreatments { got: usize },
    #[error("Friedman test needs at least 2 blocks, got {got}")]
    TooFewBlocks { got: usize },
}

/// How a p-value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    /// Exact distribution (full enumeration).
    Exact,
    /// Large-sample approximation.
    Approximate,
    /// Every paired difference was zero; the test carries no information.
    AllZeroDifferences,
}

/// Outcome of a significance test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size: blocks for Friedman, nonzero pairs for Wilcoxon.
    pub n: usize,
    pub method: TestMethod,
}

impl TestResult {
    pub fn is_significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Ranks values from 1, assigning tied values the average of the ranks they
/// occupy. `[10, 20, 20, 30]` ranks as `[1, 2.5, 2.5, 4]`.
pub fn rank_with_ties(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j (zero-based) share the average of ranks i+1..=j+1.
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of the tie-averaged ranks.
///
/// Needs at least 3 pairs. Fails with [`StatsError::DegenerateInput`] when
/// either side has zero rank variance (all values tied), in which case the
/// correlation is undefined and callers should report it as absent.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch);
    }
    if a.len() < 3 {
        return Err(StatsError::TooFewSamples {
            needed: 3,
            got: a.len(),
        });
    }
    let ra = rank_with_ties(a);
    let rb = rank_with_ties(b);
    let n = ra.len() as f64;
    let mean_a = ra.iter().sum::<f64>() / n;
    let mean_b = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(StatsError::DegenerateInput);
    }
    Ok(cov / (var_a * var_b).sqrt())
}

/// Population (biased) standard deviation.
pub fn population_std(values: &[f64]) -> Result<f64, StatsError> {
    if values.len() < 2 {
        return Err(StatsError::TooFewSamples {
            needed: 2,
            got: values.len(),
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(var.sqrt())
}

/// Friedman rank test over `blocks x treatments` scores.
///
/// Each block (row) is ranked separately with tie-averaged ranks; the
/// statistic measures how consistently the treatment (column) mean ranks
/// deviate from their expectation, with the standard tie correction applied,
/// and is referred to a chi-square distribution with `k - 1` degrees of
/// freedom. Rows where every value ties carry no information; if all rows
/// are like that the statistic is 0 and p is 1.
pub fn friedman_test(scores: &[Vec<f64>]) -> Result<TestResult, StatsError> {
    let n = scores.len();
    if n < 2 {
        return Err(StatsError::TooFewBlocks { got: n });
    }
    let k = scores[0].len();
    if scores.iter().any(|row| row.len() != k) {
        return Err(StatsError::LengthMismatch);
    }
    if k < 3 {
        return Err(StatsError::TooFewTreatments { got: k });
    }

    let mut column_rank_sums = vec![0.0; k];
    let mut tie_term = 0.0;
    for row in scores {
        let ranks = rank_with_ties(row);
        for (sum, rank) in column_rank_sums.iter_mut().zip(&ranks) {
            *sum += rank;
        }
        // Sum of t^3 - t over tie groups in this block.
        let mut sorted = row.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_term += t * t * t - t;
            i = j + 1;
        }
    }

    let nf = n as f64;
    let kf = k as f64;
    let correction = 1.0 - tie_term / (nf * kf * (kf * kf - 1.0));
    let (statistic, p_value) = if correction <= 0.0 {
        // Every block fully tied: no evidence either way.
        (0.0, 1.0)
    } else {
        let sum_sq: f64 = column_rank_sums.iter().map(|r| r * r).sum();
        let raw = 12.0 / (nf * kf * (kf + 1.0)) * sum_sq - 3.0 * nf * (kf + 1.0);
        let stat = (raw / correction).max(0.0);
        (stat, chi_square_sf(stat, k - 1))
    };
    Ok(TestResult {
        statistic,
        p_value,
        n,
        method: TestMethod::Approximate,
    })
}

/// Two-sided Wilcoxon signed-rank test on paired observations.
///
/// Zero differences are dropped. With `n <= 20` effective pairs the p-value
/// is exact, from full enumeration of the `2^n` sign assignments of the
/// tie-averaged ranks; beyond that the normal approximation with tie and
/// continuity corrections is used. If every difference is zero the result
/// carries `p = 1` flagged [`TestMethod::AllZeroDifferences`].
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)]) -> Result<TestResult, StatsError> {
    if pairs.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let diffs: Vec<f64> = pairs
        .iter()
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
            n: 0,
            method: TestMethod::AllZeroDifferences,
        });
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = rank_with_ties(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let total: f64 = ranks.iter().sum();
    let w = w_plus.min(total - w_plus);

    if n <= 20 {
        // Tie-averaged ranks are multiples of 1/2; doubling makes them exact
        // integers, so the enumeration is integer arithmetic throughout.
        let ranks2: Vec<u64> = ranks.iter().map(|r| (r * 2.0).round() as u64).collect();
        let total2: u64 = ranks2.iter().sum();
        let observed2 = (w * 2.0).round() as u64;
        let mut hits: u64 = 0;
        for mask in 0u32..(1u32 << n) {
            let mut plus2: u64 = 0;
            for (bit, r2) in ranks2.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    plus2 += r2;
                }
            }
            if plus2.min(total2 - plus2) <= observed2 {
                hits += 1;
            }
        }
        Ok(TestResult {
            statistic: w,
            p_value: hits as f64 / (1u64 << n) as f64,
            n,
            method: TestMethod::Exact,
        })
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut tie_term = 0.0;
        let mut sorted = abs;
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_term += t * t * t - t;
            i = j + 1;
        }
        let var = (nf * (nf + 1.0) * (2.0 * nf + 1.0) - tie_term / 2.0) / 24.0;
        if var <= 0.0 {
            return Ok(TestResult {
                statistic: w,
                p_value: 1.0,
                n,
                method: TestMethod::Approximate,
            });
        }
        // W is the smaller rank sum, hence below its mean; the +0.5 is the
        // continuity correction toward the center.
        let z = (w - mean + 0.5) / var.sqrt();
        let p = (2.0 * normal_sf(-z)).clamp(0.0, 1.0);
        Ok(TestResult {
            statistic: w,
            p_value: p,
            n,
            method: TestMethod::Approximate,
        })
    }
}

/// Survival function (upper tail) of the chi-square distribution:
/// `P(X >= x)` for `df` degrees of freedom.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    assert!(df >= 1, "degrees of freedom must be positive");
    if x <= 0.0 {
        return 1.0;
    }
    regularized_gamma_q(df as f64 / 2.0, x / 2.0)
}

/// Standard normal survival function `P(Z >= z)`.
pub fn normal_sf(z: f64) -> f64 {
    let y = z / std::f64::consts::SQRT_2;
    let erfc = if y >= 0.0 {
        regularized_gamma_q(0.5, y * y)
    } else {
        2.0 - regularized_gamma_q(0.5, y * y)
    };
    0.5 * erfc
}

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 500;

/// Regularized upper incomplete gamma function `Q(a, x)`.
///
/// Series expansion of `P` for `x < a + 1`, Lentz continued fraction for `Q`
/// otherwise; both converge to near machine precision in this range.
fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    let log_prefix = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        // Q = 1 - P with P from the ascending series.
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut denom = a;
        for _ in 0..MAX_ITER {
            denom += 1.0;
            term *= x / denom;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        1.0 - sum * log_prefix.exp()
    } else {
        // Modified Lentz continued fraction for Q.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        (log_prefix.exp() * h).clamp(0.0, 1.0)
    }
}

/// Natural log of the gamma function (Lanczos approximation, g = 7).
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection formula keeps the approximation in its valid range.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.999_999_999_999_809_93;
    for (i, c) in COEFFS.iter().enumerate() {
        acc += c / (x + (i + 1) as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_over_ties() {
        assert_eq!(rank_with_ties(&[10.0, 20.0, 20.0, 30.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(rank_with_ties(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
        assert_eq!(rank_with_ties(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn spearman_on_a_partial_shuffle() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 1.0, 4.0, 3.0, 5.0];
        let rho = spearman_rho(&a, &b).unwrap();
        assert!((rho - 0.8).abs() < 1e-12);
    }

    #[test]
    fn spearman_is_plus_minus_one_on_monotone_data() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let up = [10.0, 20.0, 30.0, 40.0];
        let down = [4.0, 3.0, 2.0, 1.0];
        assert!((spearman_rho(&a, &up).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman_rho(&a, &down).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_rejects_degenerate_and_short_input() {
        assert_eq!(
            spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::DegenerateInput)
        );
        assert_eq!(
            spearman_rho(&[1.0, 2.0], &[1.0, 2.0]),
            Err(StatsError::TooFewSamples { needed: 3, got: 2 })
        );
        assert_eq!(
            spearman_rho(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
            Err(StatsError::LengthMismatch)
        );
    }

    #[test]
    fn population_std_matches_hand_value() {
        // mean 0.65; squared deviations sum to 0.05; sqrt(0.05 / 4) = 0.1118...
        let s = population_std(&[0.5, 0.6, 0.8, 0.7]).unwrap();
        assert!((s - 0.05f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((s - 0.1118).abs() < 1e-4);
    }

    #[test]
    fn friedman_with_full_agreement() {
        // 6 blocks all ranking the 4 treatments identically.
        let rows: Vec<Vec<f64>> = (0..6).map(|_| vec![0.1, 0.2, 0.3, 0.4]).collect();
        let result = friedman_test(&rows).unwrap();
        assert!((result.statistic - 18.0).abs() < 1e-12);
        assert!((result.p_value - 4.1e-4).abs() < 5e-5);
        assert!(result.is_significant(0.05));
    }

    #[test]
    fn friedman_with_constant_rows_is_null() {
        let rows: Vec<Vec<f64>> = (0..4).map(|_| vec![0.5, 0.5, 0.5]).collect();
        let result = friedman_test(&rows).unwrap();
        assert_eq!(result.statistic, 0.0);
        assert_eq!(result.p_value, 1.0);
    }

    #[test]
    fn friedman_input_contract() {
        assert_eq!(
            friedman_test(&[vec![1.0, 2.0, 3.0]]),
            Err(StatsError::TooFewBlocks { got: 1 })
        );
        assert_eq!(
            friedman_test(&[vec![1.0, 2.0], vec![2.0, 1.0]]),
            Err(StatsError::TooFewTreatments { got: 2 })
        );
        assert_eq!(
            friedman_test(&[vec![1.0, 2.0, 3.0], vec![2.0, 1.0]]),
            Err(StatsError::LengthMismatch)
        );
    }

    #[test]
    fn wilcoxon_exact_all_positive() {
        // Six positive differences: only the two extreme sign assignments
        // reach W = 0, so p = 2 / 2^6.
        let pairs: Vec<(f64, f64)> = (1..=6).map(|i| (i as f64 + 10.0, 10.0)).collect();
        let result = wilcoxon_signed_rank(&pairs).unwrap();
        assert_eq!(result.method, TestMethod::Exact);
        assert_eq!(result.statistic, 0.0);
        assert!((result.p_value - 0.03125).abs() < 1e-15);
    }

    #[test]
    fn wilcoxon_all_zero_differences() {
        let pairs = vec![(0.5, 0.5), (0.7, 0.7)];
        let result = wilcoxon_signed_rank(&pairs).unwrap();
        assert_eq!(result.method, TestMethod::AllZeroDifferences);
        assert_eq!(result.p_value, 1.0);
        assert_eq!(result.n, 0);
    }

    #[test]
    fn wilcoxon_empty_input_is_an_error() {
        assert_eq!(wilcoxon_signed_rank(&[]), Err(StatsError::EmptyInput));
    }

    #[test]
    fn wilcoxon_approximate_branch_on_large_n() {
        let pairs: Vec<(f64, f64)> = (1..=30).map(|i| (i as f64, i as f64 - 1.0)).collect();
        let result = wilcoxon_signed_rank(&pairs).unwrap();
        assert_eq!(result.method, TestMethod::Approximate);
        assert!(result.p_value < 1e-4, "uniform improvement should be significant");
    }

    #[test]
    fn chi_square_sf_matches_closed_forms() {
        // df = 2: sf(x) = exp(-x/2); df = 4: sf(x) = exp(-x/2) * (1 + x/2).
        for x in [0.5, 1.0, 2.0, 5.0, 10.0] {
            assert!((chi_square_sf(x, 2) - (-x / 2.0).exp()).abs() < 1e-12);
            let df4 = (-x / 2.0).exp() * (1.0 + x / 2.0);
            assert!((chi_square_sf(x, 4) - df4).abs() < 1e-12);
        }
        // df = 1 at x = 1: 2 * (1 - Phi(1)).
        assert!((chi_square_sf(1.0, 1) - 0.317_310_507_862_914_1).abs() < 1e-10);
        // The canonical 5% critical value for one degree of freedom.
        assert!((chi_square_sf(3.841, 1) - 0.05).abs() < 5e-4);
    }

    #[test]
    fn chi_square_sf_edges_and_monotonicity() {
        assert_eq!(chi_square_sf(0.0, 3), 1.0);
        assert_eq!(chi_square_sf(-1.0, 3), 1.0);
        let mut prev = 1.0;
        for i in 1..200 {
            let x = i as f64 * 0.25;
            let p = chi_square_sf(x, 3);
            assert!(p <= prev + 1e-15, "sf must be non-increasing");
            assert!((0.0..=1.0).contains(&p));
            prev = p;
        }
    }

    #[test]
    fn normal_sf_symmetry_and_known_points() {
        assert!((normal_sf(0.0) - 0.5).abs() < 1e-14);
        assert!((normal_sf(1.959_963_984_540_054) - 0.025).abs() < 1e-10);
        for z in [-2.5, -1.0, 0.3, 1.7] {
            assert!((normal_sf(z) + normal_sf(-z) - 1.0).abs() < 1e-12);
        }
    }
}
