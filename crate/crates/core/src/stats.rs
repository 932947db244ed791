//! Sample statistics for Monte Carlo tolerances.

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; NaN below two samples.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the mean for independent samples.
pub fn standard_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Standard error of the mean of a correlated series, from the spread of
/// `batches` contiguous batch means. A trailing partial batch is dropped.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let batches = batches.max(2);
    let size = xs.len() / batches;
    if size == 0 {
        return standard_error(xs);
    }
    let means: Vec<f64> = xs.chunks_exact(size).take(batches).map(mean).collect();
    standard_error(&means)
}

/// Standard error of an empirical proportion `hits / n`.
pub fn proportion_se(hits: u64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    let p = hits as f64 / n as f64;
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Running mean and variance (Welford), for series too long to keep.
#[derive(Clone, Copy, Debug, Default)]
pub struct Running {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Running {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
        let mut r = Running::default();
        xs.iter().for_each(|&x| r.push(x));
        assert!((r.mean() - 2.5).abs() < 1e-15 && (r.variance() - 5.0 / 3.0).abs() < 1e-12);
        assert!(mean(&[]).is_nan());
    }

    #[test]
    fn batch_means_match_iid_se_on_independent_data() {
        // Alternating 0/1 has zero variance between batches of even size.
        let xs: Vec<f64> = (0..1000).map(|i| (i % 2) as f64).collect();
        assert_eq!(batch_means_se(&xs, 10), 0.0);
        assert!((proportion_se(50, 100) - 0.05).abs() < 1e-15);
    }
}
