//! Small numeric helpers shared by the model, sampler and oracle.
/// ln(2π) / 2
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// Log density of a univariate Gaussian.
#[inline]
pub fn normal_ln_pdf(y: f64, mean: f64, sd: f64) -> f64 {
    let z = (y - mean) / sd;
    -0.5 * z * z - ln(sd) - HALF_LN_2PI
}

/// Numerically stable `ln Σ exp(x)`. Returns `-inf` for an empty slice or
/// when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| exp(x - max)).sum();
    max + ln(sum)
}

/// Streaming log-sum-exp with a fixed accumulation order.
///
/// Terms equal to `-inf` are skipped. The running maximum is kept so that
/// the largest term always contributes exactly 1 to `scaled_sum`.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    scaled_sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub const fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled_sum: 0.0,
        }
    }

    /// Adds `exp(x)`; returns the factor (`exp(x - max)`) the term was
    /// scaled by and the factor previously accumulated sums must be
    /// rescaled by.
    #[inline]
    pub fn push(&mut self, x: f64) -> (f64, f64) {
        if x == f64::NEG_INFINITY {
            return (0.0, 1.0);
        }
        if x > self.max {
            let rescale = if self.max == f64::NEG_INFINITY {
                0.0
            } else {
                exp(self.max - x)
            };
            self.scaled_sum = self.scaled_sum * rescale + 1.0;
            self.max = x;
            (1.0, rescale)
        } else {
            let w = exp(x - self.max);
            self.scaled_sum += w;
            (w, 1.0)
        }
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    /// Σ exp(x − max) over pushed terms.
    pub fn scaled_sum(&self) -> f64 {
        self.scaled_sum
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + ln(self.scaled_sum)
        }
    }
}

/// Empirical quantile with linear interpolation between order statistics
/// (type 7). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub(crate) fn sort_floats(xs: &mut [f64]) {
    xs.sort_by(|a, b| a.total_cmp(b));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streaming_matches_two_pass() {
        let xs = [-3.0, 2.0, -1000.0, 5.5, f64::NEG_INFINITY, 0.25];
        let mut acc = LogSumExp::new();
        for &x in &xs {
            acc.push(x);
        }
        assert!((acc.value() - log_sum_exp(&xs)).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_of_nothing() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(LogSumExp::new().value(), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
    }

    #[test]
    fn huge_magnitudes_do_not_overflow() {
        let v = log_sum_exp(&[1e6, 1e6]);
        assert!((v - (1e6 + core::f64::consts::LN_2)).abs() < 1e-6);
    }

    #[test]
    fn standard_normal_at_zero() {
        let p = exp(normal_ln_pdf(0.0, 0.0, 1.0));
        assert!((p - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 5.0);
        assert_eq!(quantile_sorted(&xs, 0.5), 3.0);
        assert!((quantile_sorted(&xs, 0.125) - 1.5).abs() < 1e-12);
    }
}
