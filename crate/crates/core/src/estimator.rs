//! The weighted estimator
//!
//! ```text
//! Â_n(t) = Σ p(ω⁽ⁱ⁾) (ξ·Y⁽ⁱ⁾(t))² / (t Σ p(ω⁽ⁱ⁾))
//! ```
//!
//! of `σ_t²`, built from walks in environments drawn from the untilted law.
//! Weighting by `p(ω)` turns the untilted average into the tilted one.

use serde::{Deserialize, Serialize};

use crate::env_field::{ConductanceLaw, LatticePoint};
use crate::stats::{CompensatedSum, SampleMoments, Z_975};
use crate::walker::{Horizon, WalkOutcome};
use crate::{Error, Result};

/// A unit vector `ξ ∈ R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Rescales `v` to unit length.
    pub fn normalized(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() || v.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid direction {v:?}")));
        }
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidParameter(format!("direction {v:?} has no length")));
        }
        Ok(Self(v.into_iter().map(|c| c / norm).collect()))
    }

    /// The basis vector `e_axis` (0-based).
    pub fn axis(dim: usize, axis: usize) -> Self {
        assert!(axis < dim);
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        Self(v)
    }

    /// `(e_i + e_j) / √2`, used to recover off-diagonal entries.
    pub fn diagonal_pair(dim: usize, i: usize, j: usize) -> Self {
        assert!(i < dim && j < dim && i != j);
        let mut v = vec![0.0; dim];
        v[i] = std::f64::consts::FRAC_1_SQRT_2;
        v[j] = std::f64::consts::FRAC_1_SQRT_2;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn project(&self, x: &LatticePoint) -> f64 {
        self.0.iter().zip(x.coords()).map(|(a, &c)| a * c as f64).sum()
    }
}

impl TryFrom<Vec<f64>> for Direction {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::normalized(v)
    }
}

impl From<Direction> for Vec<f64> {
    fn from(d: Direction) -> Self {
        d.0
    }
}

/// Streaming, mergeable sums behind `Â_n(t)`.
///
/// With `w = p(ω)`, `z = ξ·Y(t)` and `y = z²`, it keeps `Σw`, `Σwy`, the
/// second-order sums needed for the delta-method variance of the ratio, and
/// unweighted moments of `z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    horizon: Horizon,
    n: u64,
    sum_w: CompensatedSum,
    sum_wy: CompensatedSum,
    sum_w2: CompensatedSum,
    sum_w2y: CompensatedSum,
    sum_w2y2: CompensatedSum,
    sum_z: CompensatedSum,
    sum_y: CompensatedSum,
    sum_y2: CompensatedSum,
}

impl EstimatorState {
    pub fn new(horizon: Horizon) -> Self {
        Self {
            horizon,
            n: 0,
            sum_w: Default::default(),
            sum_wy: Default::default(),
            sum_w2: Default::default(),
            sum_w2y: Default::default(),
            sum_w2y2: Default::default(),
            sum_z: Default::default(),
            sum_y: Default::default(),
            sum_y2: Default::default(),
        }
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn sum_weights(&self) -> f64 {
        self.sum_w.value()
    }

    pub fn sum_weighted_sq(&self) -> f64 {
        self.sum_wy.value()
    }

    /// `Σ (ξ·Y)²` and `Σ (ξ·Y)⁴`, unweighted.
    pub fn displacement_moments(&self) -> (f64, f64) {
        (self.sum_y.value(), self.sum_y2.value())
    }

    fn check_horizon(&self, other: Horizon) -> Result<()> {
        if self.horizon != other {
            return Err(Error::HorizonMismatch {
                state: self.horizon.as_f64(),
                outcome: other.as_f64(),
            });
        }
        Ok(())
    }

    #[inline]
    fn push(&mut self, z: f64, w: f64) {
        let y = z * z;
        self.n += 1;
        self.sum_w.add(w);
        self.sum_wy.add(w * y);
        self.sum_w2.add(w * w);
        self.sum_w2y.add(w * w * y);
        self.sum_w2y2.add(w * w * y * y);
        self.sum_z.add(z);
        self.sum_y.add(y);
        self.sum_y2.add(y * y);
    }

    /// Adds one walk, weighted by its environment's origin weight.
    pub fn accumulate(&mut self, outcome: &WalkOutcome, xi: &Direction) -> Result<()> {
        self.check_horizon(outcome.horizon)?;
        if xi.dim() != outcome.final_position.dim() {
            return Err(Error::DimensionMismatch {
                expected: outcome.final_position.dim(),
                got: xi.dim(),
            });
        }
        self.push(xi.project(&outcome.final_position), outcome.origin_weight);
        Ok(())
    }

    /// Adds one walk with unit weight. For the continuous-time walk, whose
    /// environment process is stationary under the untilted law.
    pub fn accumulate_untilted(&mut self, outcome: &WalkOutcome, xi: &Direction) -> Result<()> {
        self.check_horizon(outcome.horizon)?;
        if xi.dim() != outcome.final_position.dim() {
            return Err(Error::DimensionMismatch {
                expected: outcome.final_position.dim(),
                got: xi.dim(),
            });
        }
        self.push(xi.project(&outcome.final_position), 1.0);
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        self.check_horizon(other.horizon)?;
        self.n += other.n;
        self.sum_w.merge(&other.sum_w);
        self.sum_wy.merge(&other.sum_wy);
        self.sum_w2.merge(&other.sum_w2);
        self.sum_w2y.merge(&other.sum_w2y);
        self.sum_w2y2.merge(&other.sum_w2y2);
        self.sum_z.merge(&other.sum_z);
        self.sum_y.merge(&other.sum_y);
        self.sum_y2.merge(&other.sum_y2);
        Ok(())
    }

    /// `Â_n(t)`; NaN on an empty state.
    pub fn a_hat(&self) -> f64 {
        self.sum_wy.value() / (self.horizon.as_f64() * self.sum_w.value())
    }

    /// Delta-method standard error of `Â_n(t)` as a ratio of means.
    pub fn standard_error(&self) -> f64 {
        let n = self.n as f64;
        let t = self.horizon.as_f64();
        let b_mean = self.sum_w.value() / n;
        let a_mean = self.sum_wy.value() / (n * t);
        let r = a_mean / b_mean;
        let s_aa = (self.sum_w2y2.value() / (t * t) - n * a_mean * a_mean) / (n - 1.0);
        let s_ab = (self.sum_w2y.value() / t - n * a_mean * b_mean) / (n - 1.0);
        let s_bb = (self.sum_w2.value() - n * b_mean * b_mean) / (n - 1.0);
        let var = (s_aa - 2.0 * r * s_ab + r * r * s_bb) / (n * b_mean * b_mean);
        var.max(0.0).sqrt()
    }

    pub fn report(&self, law: &ConductanceLaw, d: usize) -> Result<EstimateReport> {
        if self.n < 2 {
            return Err(Error::NotEnoughSamples { needed: 2, have: self.n });
        }
        let mean_p = law.mean_site_weight(d);
        let a_hat = self.a_hat();
        Ok(EstimateReport {
            t: self.horizon.as_f64(),
            n: self.n,
            a_hat,
            p_hat: self.sum_w.value() / (self.n as f64 * mean_p),
            ahom_direction: 0.5 * mean_p * a_hat,
            ci_halfwidth: Z_975 * self.standard_error(),
            seed: None,
            mean_site_weight: mean_p,
        })
    }

    /// Report for unweighted walks of `X`, where `a_hat` estimates
    /// `2 ξ·A_hom ξ` directly and `p̂_n` is 1 by construction.
    pub fn report_untilted(&self) -> Result<EstimateReport> {
        if self.n < 2 {
            return Err(Error::NotEnoughSamples { needed: 2, have: self.n });
        }
        let a_hat = self.a_hat();
        Ok(EstimateReport {
            t: self.horizon.as_f64(),
            n: self.n,
            a_hat,
            p_hat: self.sum_w.value() / self.n as f64,
            ahom_direction: 0.5 * a_hat,
            ci_halfwidth: Z_975 * self.standard_error(),
            seed: None,
            mean_site_weight: 1.0,
        })
    }
}

/// Summary of one estimate. Serializes to the keys
/// `t, n, a_hat, p_hat, ahom_direction, ci_halfwidth, seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub t: f64,
    pub n: u64,
    /// `Â_n(t)`, estimate of `σ_t²`.
    pub a_hat: f64,
    /// `p̂_n = Σ p(ω⁽ⁱ⁾) / (n E[p])`.
    pub p_hat: f64,
    /// `(E[p] / 2) Â_n(t)`, estimate of `ξ·A_hom ξ`.
    pub ahom_direction: f64,
    /// 95% half-width for `a_hat`.
    pub ci_halfwidth: f64,
    pub seed: Option<u64>,
    #[serde(skip)]
    mean_site_weight: f64,
}

impl EstimateReport {
    pub const CSV_HEADER: &'static str = "t,n,a_hat,p_hat,ahom_direction,ci_halfwidth,seed";

    /// Estimate of `σ² = 2 ξ·A_hom^disc ξ`; the same number as `a_hat`.
    pub fn sigma2_direction(&self) -> f64 {
        self.a_hat
    }

    /// 95% half-width on the `ahom_direction` scale.
    pub fn ahom_ci_halfwidth(&self) -> f64 {
        0.5 * self.mean_site_weight * self.ci_halfwidth
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.t,
            self.n,
            self.a_hat,
            self.p_hat,
            self.ahom_direction,
            self.ci_halfwidth,
            self.seed.map(|s| s.to_string()).unwrap_or_default()
        )
    }
}

/// Estimates of the full `d × d` matrix from one set of walks.
///
/// Diagonal entries use `ξ = e_i`; off-diagonal ones use `ξ = (e_i + e_j)/√2`
/// and `ξ·Aξ = (A_ii + A_jj)/2 + A_ij`.
#[derive(Clone, Debug)]
pub struct MatrixEstimator {
    dim: usize,
    axes: Vec<EstimatorState>,
    pairs: Vec<((usize, usize), EstimatorState)>,
}

impl MatrixEstimator {
    pub fn new(dim: usize, horizon: Horizon) -> Self {
        let axes = (0..dim).map(|_| EstimatorState::new(horizon)).collect();
        let pairs = (0..dim)
            .flat_map(|i| (i + 1..dim).map(move |j| (i, j)))
            .map(|ij| (ij, EstimatorState::new(horizon)))
            .collect();
        Self { dim, axes, pairs }
    }

    pub fn accumulate(&mut self, outcome: &WalkOutcome) -> Result<()> {
        for (i, s) in self.axes.iter_mut().enumerate() {
            s.accumulate(outcome, &Direction::axis(self.dim, i))?;
        }
        for ((i, j), s) in self.pairs.iter_mut() {
            s.accumulate(outcome, &Direction::diagonal_pair(self.dim, *i, *j))?;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        for (a, b) in self.axes.iter_mut().zip(&other.axes) {
            a.merge(b)?;
        }
        for ((_, a), (_, b)) in self.pairs.iter_mut().zip(&other.pairs) {
            a.merge(b)?;
        }
        Ok(())
    }

    /// Row-major estimate of `A_hom = (E[p]/2) · (σ² matrix)`.
    pub fn ahom_matrix(&self, law: &ConductanceLaw) -> Result<Vec<Vec<f64>>> {
        let scale = 0.5 * law.mean_site_weight(self.dim);
        let mut m = vec![vec![0.0; self.dim]; self.dim];
        for (i, s) in self.axes.iter().enumerate() {
            if s.n() < 2 {
                return Err(Error::NotEnoughSamples { needed: 2, have: s.n() });
            }
            m[i][i] = scale * s.a_hat();
        }
        for ((i, j), s) in &self.pairs {
            let q = scale * s.a_hat();
            let off = q - 0.5 * (m[*i][*i] + m[*j][*j]);
            m[*i][*j] = off;
            m[*j][*i] = off;
        }
        Ok(m)
    }
}

/// Rescaled deviations `t (Â⁽ʳ⁾ − mean)` of repeated estimates around their
/// pooled mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationSample {
    pub t: f64,
    pub pooled_mean: f64,
    pub deviations: Vec<f64>,
    pub moments: SampleMoments,
}

pub fn fluctuation_sample(a_hats: &[f64], t: f64) -> Result<FluctuationSample> {
    if a_hats.len() < 2 {
        return Err(Error::NotEnoughSamples { needed: 2, have: a_hats.len() as u64 });
    }
    let pooled_mean = crate::stats::pairwise_sum(a_hats) / a_hats.len() as f64;
    let deviations: Vec<f64> = a_hats.iter().map(|a| t * (a - pooled_mean)).collect();
    let moments = SampleMoments::of(&deviations);
    Ok(FluctuationSample { t, pooled_mean, deviations, moments })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(coords: &[i64], p: f64, t: u64) -> WalkOutcome {
        WalkOutcome {
            final_position: LatticePoint::from_coords(coords),
            origin_weight: p,
            horizon: Horizon::Steps(t),
            env_index: 0,
            draws: 0,
            jumps: t,
        }
    }

    fn e1() -> Direction {
        Direction::axis(2, 0)
    }

    #[test]
    fn accumulate_direct_arithmetic() {
        let mut s = EstimatorState::new(Horizon::Steps(4));
        s.accumulate(&outcome(&[2, 0], 8.0, 4), &e1()).unwrap();
        assert_eq!((s.sum_weighted_sq(), s.sum_weights()), (32.0, 8.0));
    }

    #[test]
    fn two_walk_estimate_by_hand() {
        let mut s = EstimatorState::new(Horizon::Steps(4));
        s.accumulate(&outcome(&[2, 1], 8.0, 4), &e1()).unwrap();
        s.accumulate(&outcome(&[-1, 1], 12.0, 4), &e1()).unwrap();
        assert!((s.a_hat() - 0.55).abs() < 1e-15);
        let law = ConductanceLaw::symmetric_two_point_1_4();
        let r = s.report(&law, 2).unwrap();
        assert!((r.a_hat - 0.55).abs() < 1e-15);
        assert_eq!(r.p_hat, 20.0 / 20.0);
        assert!((r.ahom_direction - 5.0 * 0.55).abs() < 1e-14);
        assert_eq!(r.sigma2_direction(), r.a_hat);

        let mut rev = EstimatorState::new(Horizon::Steps(4));
        rev.accumulate(&outcome(&[-1, 1], 12.0, 4), &e1()).unwrap();
        rev.accumulate(&outcome(&[2, 1], 8.0, 4), &e1()).unwrap();
        assert_eq!(rev, s);
    }

    #[test]
    fn horizon_mismatch_rejected() {
        let mut s = EstimatorState::new(Horizon::Steps(4));
        assert!(matches!(
            s.accumulate(&outcome(&[1, 0], 4.0, 5), &e1()),
            Err(Error::HorizonMismatch { .. })
        ));
        let other = EstimatorState::new(Horizon::Steps(5));
        assert!(s.merge(&other).is_err());
        assert!(s.accumulate(&outcome(&[1, 0, 0], 4.0, 4), &e1()).is_err());
    }

    #[test]
    fn report_needs_two_samples() {
        let law = ConductanceLaw::symmetric_two_point_1_4();
        let mut s = EstimatorState::new(Horizon::Steps(1));
        assert!(s.report(&law, 2).is_err());
        s.accumulate(&outcome(&[1, 0], 4.0, 1), &e1()).unwrap();
        assert!(s.report(&law, 2).is_err());
    }

    #[test]
    fn merge_identity_and_commutativity() {
        let mut a = EstimatorState::new(Horizon::Steps(3));
        let mut b = EstimatorState::new(Horizon::Steps(3));
        a.accumulate(&outcome(&[1, 2], 6.0, 3), &e1()).unwrap();
        b.accumulate(&outcome(&[-3, 0], 12.0, 3), &e1()).unwrap();
        let mut with_empty = a.clone();
        with_empty.merge(&EstimatorState::new(Horizon::Steps(3))).unwrap();
        assert_eq!(with_empty, a);
        let mut ab = a.clone();
        ab.merge(&b).unwrap();
        let mut ba = b.clone();
        ba.merge(&a).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn standard_error_matches_direct_delta_method() {
        // Independent route: explicit per-sample linearization of the ratio.
        let data = [(3i64, 8.0), (-1, 12.0), (0, 10.0), (2, 6.0), (-4, 14.0), (1, 9.0)];
        let t = 5u64;
        let mut s = EstimatorState::new(Horizon::Steps(t));
        for &(z, w) in &data {
            s.accumulate(&outcome(&[z, 0], w, t), &e1()).unwrap();
        }
        let n = data.len() as f64;
        let a: Vec<f64> = data.iter().map(|&(z, w)| w * (z * z) as f64 / t as f64).collect();
        let b: Vec<f64> = data.iter().map(|&(_, w)| w).collect();
        let (am, bm) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let r = am / bm;
        let lin: Vec<f64> = a.iter().zip(&b).map(|(ai, bi)| (ai - r * bi) / bm).collect();
        let lm = lin.iter().sum::<f64>() / n;
        let var = lin.iter().map(|l| (l - lm).powi(2)).sum::<f64>() / (n - 1.0) / n;
        assert!((s.standard_error() - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn a_hat_bounds() {
        let mut s = EstimatorState::new(Horizon::Steps(4));
        s.accumulate(&outcome(&[4, 0], 4.0, 4), &e1()).unwrap();
        s.accumulate(&outcome(&[-4, 0], 16.0, 4), &e1()).unwrap();
        assert_eq!(s.a_hat(), 4.0);
    }

    #[test]
    fn direction_normalization() {
        let d = Direction::normalized(vec![3.0, 4.0]).unwrap();
        assert_eq!(d.components(), &[0.6, 0.8]);
        assert!(Direction::normalized(vec![0.0, 0.0]).is_err());
        assert!(Direction::normalized(vec![]).is_err());
        assert!(Direction::normalized(vec![f64::INFINITY, 1.0]).is_err());
        let json: Direction = serde_json::from_str("[0, 2]").unwrap();
        assert_eq!(json, Direction::axis(2, 1));
        assert!(serde_json::from_str::<Direction>("[0, 0]").is_err());
    }

    #[test]
    fn csv_and_json_share_keys() {
        let law = ConductanceLaw::symmetric_two_point_1_4();
        let mut s = EstimatorState::new(Horizon::Steps(4));
        s.accumulate(&outcome(&[2, 1], 8.0, 4), &e1()).unwrap();
        s.accumulate(&outcome(&[-1, 1], 12.0, 4), &e1()).unwrap();
        let r = s.report(&law, 2).unwrap().with_seed(7);
        let row = r.to_csv_row();
        assert!(row.starts_with("4,2,0.55"), "{row}");
        assert!(row.ends_with(",7"));
        let json = serde_json::to_value(&r).unwrap();
        let keys: Vec<&str> = json.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        let mut header: Vec<&str> = EstimateReport::CSV_HEADER.split(',').collect();
        header.sort();
        let mut keys = keys;
        keys.sort();
        assert_eq!(keys, header);
    }

    #[test]
    fn fluctuation_examples() {
        let f = fluctuation_sample(&[0.3; 5], 10.0).unwrap();
        assert!(f.deviations.iter().all(|&d| d == 0.0));
        let f = fluctuation_sample(&[0.5, 0.3], 10.0).unwrap();
        assert!((f.deviations[0] - 1.0).abs() < 1e-14);
        assert!((f.deviations[1] + 1.0).abs() < 1e-14);
        assert!(fluctuation_sample(&[0.5], 10.0).is_err());
    }

    #[test]
    fn polarization_recovers_matrix() {
        // Deterministic displacements make each ξ·Aξ exact: with constant
        // weights, a_hat(ξ) = mean (ξ·Y)² / t.
        let law = ConductanceLaw::constant(1.0).unwrap();
        let mut m = MatrixEstimator::new(2, Horizon::Steps(2));
        for coords in [[1, 1], [-1, -1], [2, 0], [0, 0]] {
            m.accumulate(&outcome(&coords, 4.0, 2)).unwrap();
        }
        let a = m.ahom_matrix(&law).unwrap();
        // mean Y Yᵀ = [[1.5, 0.5], [0.5, 0.5]]; A = (E[p]/2) · mean YYᵀ / t = mean YYᵀ
        let expect = [[1.5, 0.5], [0.5, 0.5]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[i][j] - expect[i][j]).abs() < 1e-12, "{a:?}");
            }
        }
    }
}
