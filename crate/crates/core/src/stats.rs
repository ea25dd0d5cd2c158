//! Small numerical helpers: compensated sums, sample moments, histograms.

use serde::{Deserialize, Serialize};

/// 97.5% quantile of the standard normal law.
pub const Z_975: f64 = 1.959_963_984_540_054;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.comp += other.comp;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Pairwise (cascade) summation in a fixed order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Central sample moments of a finite sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub count: usize,
    pub mean: f64,
    /// Unbiased (n - 1) variance.
    pub variance: f64,
    /// `m3 / m2^{3/2}` with population moments; 0 for a degenerate sample.
    pub skewness: f64,
    /// `m4 / m2² - 3`; 0 for a degenerate sample.
    pub excess_kurtosis: f64,
}

impl SampleMoments {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        let nf = n as f64;
        let mean = if n == 0 { 0.0 } else { pairwise_sum(xs) / nf };
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for &x in xs {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        let variance = if n > 1 { m2 / (nf - 1.0) } else { 0.0 };
        let (skewness, excess_kurtosis) = if m2 > 0.0 {
            let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
            (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
        } else {
            (0.0, 0.0)
        };
        Self { count: n, mean, variance, skewness, excess_kurtosis }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Fixed-width histogram over `[lo, hi)`; values outside are counted apart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub below: u64,
    pub above: u64,
}

impl Histogram {
    pub fn build(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        assert!(bins >= 1);
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0u64; bins];
        let (mut below, mut above) = (0, 0);
        for &x in xs {
            if !(width > 0.0) {
                counts[bins / 2] += 1;
            } else if x < lo {
                below += 1;
            } else if x >= hi {
                above += 1;
            } else {
                let i = (((x - lo) / width) as usize).min(bins - 1);
                counts[i] += 1;
            }
        }
        Self { edges, counts, below, above }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn compensated_merge() {
        let mut a = CompensatedSum::default();
        let mut b = CompensatedSum::default();
        let mut all = CompensatedSum::default();
        for i in 0..100 {
            let x = (i as f64) * 0.1;
            if i < 40 {
                a.add(x)
            } else {
                b.add(x)
            }
            all.add(x);
        }
        a.merge(&b);
        assert!((a.value() - all.value()).abs() < 1e-12);
    }

    #[test]
    fn moments_of_known_samples() {
        let m = SampleMoments::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.variance - 5.0 / 3.0).abs() < 1e-15);
        assert!(m.skewness.abs() < 1e-15);
        // population m4/m2^2 for {±0.5, ±1.5}: m2=1.25, m4=2.5625
        assert!((m.excess_kurtosis - (2.5625 / 1.5625 - 3.0)).abs() < 1e-12);

        let flat = SampleMoments::of(&[3.0; 10]);
        assert_eq!((flat.variance, flat.skewness, flat.excess_kurtosis), (0.0, 0.0, 0.0));

        // {0,0,0,1}: mean 1/4, m2 = 3/16
        let m = SampleMoments::of(&[0.0, 0.0, 0.0, 1.0]);
        let m2: f64 = 3.0 / 16.0;
        let m3 = (3.0 * (-0.25f64).powi(3) + 0.75f64.powi(3)) / 4.0;
        assert!((m.skewness - m3 / m2.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn histogram_binning() {
        let h = Histogram::build(&[-1.0, 0.0, 0.5, 1.99, 2.0, 5.0], 0.0, 2.0, 4);
        assert_eq!(h.edges, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(h.counts, vec![1, 1, 0, 1]);
        assert_eq!((h.below, h.above), (1, 2));
        let d = Histogram::build(&[0.0, 0.0], 0.0, 0.0, 3);
        assert_eq!(d.counts, vec![0, 2, 0]);
    }

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }
}
