use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Two-sided interval around a point estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn half_width(&self) -> f64 {
        (self.upper - self.lower) / 2.0
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

fn z_for(confidence: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - (1.0 - confidence) / 2.0)
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize, confidence: f64) -> Interval {
    if trials == 0 {
        return Interval {
            estimate: 0.0,
            lower: 0.0,
            upper: 1.0,
        };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = z_for(confidence);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Interval {
        estimate: p,
        lower: (center - half).max(0.0),
        upper: (center + half).min(1.0),
    }
}

/// Sample mean with a normal-approximation interval.
pub fn mean_and_half_width(values: &[f64], confidence: f64) -> Interval {
    let n = values.len() as f64;
    if values.is_empty() {
        return Interval {
            estimate: 0.0,
            lower: 0.0,
            upper: 0.0,
        };
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let half = z_for(confidence) * (var / n).sqrt();
    Interval {
        estimate: mean,
        lower: mean - half,
        upper: mean + half,
    }
}

/// Upper-tail probability of a chi-square statistic.
pub fn chi_square_sf(statistic: f64, dof: f64) -> f64 {
    let dist = ChiSquared::new(dof).expect("positive degrees of freedom");
    (1.0 - dist.cdf(statistic)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_values() {
        // 50/100 at 95%: 0.5 ± 0.0962 (textbook value)
        let i = wilson_interval(50, 100, 0.95);
        assert!((i.lower - 0.4038).abs() < 1e-3);
        assert!((i.upper - 0.5962).abs() < 1e-3);
        // zero successes still give a non-degenerate upper bound
        let i = wilson_interval(0, 100, 0.95);
        assert_eq!(i.lower, 0.0);
        assert!((i.upper - 0.0370).abs() < 1e-3);
    }

    #[test]
    fn wilson_half_width_shrinks_like_root_n() {
        let a = wilson_interval(250, 1000, 0.95).half_width();
        let b = wilson_interval(2500, 10000, 0.95).half_width();
        assert!((a / b - 10f64.sqrt()).abs() < 0.05);
    }

    #[test]
    fn chi_square_tail() {
        // P(chi2_1 > 3.841) = 0.05
        assert!((chi_square_sf(3.841458820694124, 1.0) - 0.05).abs() < 1e-9);
        assert!((chi_square_sf(0.0, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_interval() {
        let i = mean_and_half_width(&[1.0, 2.0, 3.0, 4.0], 0.95);
        assert!((i.estimate - 2.5).abs() < 1e-12);
        assert!(i.contains(2.5));
    }
}
