//! Experiment drivers: systematic-error sweeps, fluctuation histograms,
//! heat-kernel diagnostics and convergence-rate fits.
//!
//! Walk `i` at horizon `t` runs in environment `i` with decision stream `i`,
//! both keyed by a seed derived from the master seed and `t`. Walks are cut
//! into fixed-size shards whose estimator states are merged in index order,
//! so results are bit-identical for any worker count.

use std::collections::BTreeMap;
use std::hash::Hasher;
use std::ops::Range;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use siphasher::sip::SipHasher13;

use crate::env_field::{ConductanceLaw, Environment, EnvironmentField, LatticePoint};
use crate::estimator::{fluctuation_sample, Direction, EstimatorState};
use crate::stats::{pairwise_sum, Histogram, SampleMoments, Z_975};
use crate::walker::{run_continuous_walk, run_discrete_walk, Horizon, WalkRng};
use crate::{Error, Result};

/// Horizons of the reference replication schedule.
pub const TABLE1_HORIZONS: [u64; 7] = [10, 20, 40, 80, 160, 320, 640];
/// `K(t)`: the schedule runs `K(t) t²` walks at horizon `t`.
pub const TABLE1_K: [u64; 7] = [100_000, 3000, 3000, 1000, 500, 100, 20];
/// Reference systematic errors `|2 − ξ·Â_hom ξ|` for two_point(1, 4, ½), d = 2.
pub const TABLE1_ERRORS: [f64; 7] = [1.27e-1, 7.43e-2, 4.17e-2, 2.46e-2, 1.26e-2, 6.96e-3, 3.72e-3];

/// Walks per shard; fixed so that merge order never depends on threads.
pub const SHARD_SIZE: u64 = 4096;
pub const HISTOGRAM_BINS: usize = 61;
pub const HISTOGRAM_HALF_WIDTH_SD: f64 = 6.0;
pub const TAIL_RADII: [f64; 5] = [0.0, 1.0, 2.0, 3.0, 4.0];

const STUDY_DOMAIN_TAG: u64 = 0x7374_7564_795f_7365; // "study_se"

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sweep,
    Fluctuations,
    Diagnostics,
}

impl Mode {
    fn tag(self) -> u64 {
        match self {
            Mode::Sweep => 1,
            Mode::Fluctuations => 2,
            Mode::Diagnostics => 3,
        }
    }
}

/// Seed for one horizon of one study mode.
pub fn derive_seed(master: u64, mode: Mode, t: u64) -> u64 {
    let mut h = SipHasher13::new_with_keys(master, STUDY_DOMAIN_TAG);
    h.write_u64(mode.tag());
    h.write_u64(t);
    h.finish()
}

/// Declarative description of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyPlan {
    pub law: ConductanceLaw,
    pub d: usize,
    pub xi: Direction,
    pub horizons: Vec<u64>,
    /// `K(t)` per horizon.
    pub replication: BTreeMap<u64, u64>,
    /// Fixed walk count for every horizon, replacing `K(t) t²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_override: Option<u64>,
    pub master_seed: u64,
    pub mode: Mode,
    /// Number of independent estimates per horizon (fluctuations mode).
    pub repetitions: u64,
    /// Exponential-moment parameter (diagnostics mode).
    pub lambda: f64,
    /// Sample sizes for the `p̂_n` concentration curve (diagnostics mode).
    pub concentration_sizes: Vec<u64>,
    pub concentration_repetitions: u64,
}

impl StudyPlan {
    /// One horizon set with `K(t) = k` everywhere.
    pub fn new(
        law: ConductanceLaw,
        d: usize,
        xi: Direction,
        horizons: Vec<u64>,
        k: u64,
        master_seed: u64,
        mode: Mode,
    ) -> Self {
        let replication = horizons.iter().map(|&t| (t, k.max(1))).collect();
        Self {
            law,
            d,
            xi,
            horizons,
            replication,
            n_override: None,
            master_seed,
            mode,
            repetitions: 100,
            lambda: 0.05,
            concentration_sizes: vec![100, 1000, 10_000],
            concentration_repetitions: 100,
        }
    }

    /// The reference schedule restricted to `horizons` (all of them when
    /// `None`), with every `K(t)` multiplied by `scale` and rounded, at least 1.
    pub fn table1(
        law: ConductanceLaw,
        xi: Direction,
        horizons: Option<&[u64]>,
        scale: f64,
        master_seed: u64,
    ) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {scale}")));
        }
        let mut replication = BTreeMap::new();
        for (t, k) in TABLE1_HORIZONS.iter().zip(TABLE1_K) {
            if horizons.is_none_or(|hs| hs.contains(t)) {
                replication.insert(*t, ((k as f64 * scale).round() as u64).max(1));
            }
        }
        if let Some(hs) = horizons {
            if let Some(bad) = hs.iter().find(|t| !replication.contains_key(t)) {
                return Err(Error::InvalidParameter(format!(
                    "horizon {bad} is not in the reference schedule {TABLE1_HORIZONS:?}"
                )));
            }
        }
        let horizons = replication.keys().copied().collect();
        let mut plan = Self::new(law, 2, xi, horizons, 1, master_seed, Mode::Sweep);
        plan.replication = replication;
        Ok(plan)
    }

    pub fn k(&self, t: u64) -> u64 {
        self.replication.get(&t).copied().unwrap_or(1)
    }

    /// Walks per estimate at horizon `t`: `K(t) t²` unless overridden.
    pub fn walks(&self, t: u64) -> u64 {
        self.n_override.unwrap_or_else(|| self.k(t) * t * t)
    }

    pub fn validate(&self) -> Result<()> {
        self.law.validate_for_dim(self.d)?;
        if self.xi.dim() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: self.xi.dim() });
        }
        crate::config::validate_horizons(&self.horizons)?;
        if self.horizons.iter().any(|t| self.k(*t) == 0) {
            return Err(Error::InvalidParameter("K(t) must be at least 1".into()));
        }
        if self.n_override == Some(0) {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        Ok(())
    }

    fn draws_per_walk(&self, t: u64) -> u128 {
        (2 * self.d as u128 + 1) * t as u128
    }

    /// Generator invocations the plan's walks will make.
    pub fn projected_draws(&self) -> u128 {
        let per_estimate = |t: u64| self.walks(t) as u128 * self.draws_per_walk(t);
        match self.mode {
            Mode::Sweep | Mode::Diagnostics => {
                let walks: u128 = self.horizons.iter().map(|&t| per_estimate(t)).sum();
                if self.mode == Mode::Diagnostics {
                    let envs: u128 = self.concentration_sizes.iter().map(|&s| s as u128).sum();
                    walks + envs * self.concentration_repetitions as u128 * 2 * self.d as u128
                } else {
                    walks
                }
            }
            Mode::Fluctuations => self
                .horizons
                .iter()
                .map(|&t| per_estimate(t) * self.repetitions as u128)
                .sum(),
        }
    }

    fn check_mode(&self, mode: Mode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::InvalidParameter(format!(
                "plan mode is {:?}, expected {mode:?}",
                self.mode
            )));
        }
        Ok(())
    }
}

/// Execution settings that do not affect results.
#[derive(Clone, Copy, Debug)]
pub struct ExecOptions {
    pub workers: usize,
    pub budget_draws: u64,
}

impl Default for ExecOptions {
    fn default() -> Self {
        Self { workers: 1, budget_draws: u64::MAX }
    }
}

impl ExecOptions {
    pub fn with_workers(workers: usize) -> Self {
        Self { workers, ..Default::default() }
    }

    pub fn check_budget(&self, projected: u128) -> Result<()> {
        if projected > self.budget_draws as u128 {
            return Err(Error::BudgetExceeded { projected, budget: self.budget_draws });
        }
        Ok(())
    }

    /// Runs `f` on consecutive ranges of `0..total` and returns the results
    /// in range order.
    fn sharded<T, F>(&self, total: u64, shard: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(Range<u64>) -> Result<T> + Sync + Send,
    {
        let shards = total.div_ceil(shard);
        let run = || {
            (0..shards)
                .into_par_iter()
                .map(|s| f(s * shard..((s + 1) * shard).min(total)))
                .collect::<Result<Vec<T>>>()
        };
        if self.workers <= 1 {
            return (0..shards).map(|s| f(s * shard..((s + 1) * shard).min(total))).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(run)
    }
}

/// Expected generator invocations of `n` walks of `X` up to time `t`: each
/// of the `E[p] t` expected jumps costs `2d` lookups, an exponential and a
/// uniform, plus the final holding time.
pub fn projected_continuous_draws(law: &ConductanceLaw, d: usize, t: f64, n: u64) -> u128 {
    let k = 2.0 * d as f64;
    let per_walk = (k + 2.0) * law.mean_site_weight(d) * t + k + 1.0;
    (per_walk * n as f64).ceil() as u128
}

/// Merged estimator state and the number of generator invocations.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub state: EstimatorState,
    pub draws: u64,
}

/// Runs walks `env_range` of `Y` for `t` steps, walk `i` in environment `i`.
pub fn estimate_discrete(
    law: &ConductanceLaw,
    d: usize,
    xi: &Direction,
    t: u64,
    seed: u64,
    env_range: Range<u64>,
    exec: &ExecOptions,
) -> Result<Aggregate> {
    let field = EnvironmentField::new(law, d, seed, 0)?;
    let offset = env_range.start;
    let parts = exec.sharded(env_range.end - env_range.start, SHARD_SIZE, |r| {
        let mut state = EstimatorState::new(Horizon::Steps(t));
        let mut draws = 0;
        for i in r.start + offset..r.end + offset {
            let f = field.with_env_index(i);
            let out = run_discrete_walk(&f, &mut WalkRng::new(seed, i), t)?;
            state.accumulate(&out, xi)?;
            draws += out.draws;
        }
        Ok(Aggregate { state, draws })
    })?;
    merge_all(Horizon::Steps(t), parts)
}

/// Runs walks of `X` up to time `t`, unweighted. The resulting `a_hat`
/// estimates `2 ξ·A_hom ξ`.
pub fn estimate_continuous(
    law: &ConductanceLaw,
    d: usize,
    xi: &Direction,
    t: f64,
    seed: u64,
    env_range: Range<u64>,
    exec: &ExecOptions,
) -> Result<Aggregate> {
    let field = EnvironmentField::new(law, d, seed, 0)?;
    let offset = env_range.start;
    let parts = exec.sharded(env_range.end - env_range.start, SHARD_SIZE, |r| {
        let mut state = EstimatorState::new(Horizon::Time(t));
        let mut draws = 0;
        for i in r.start + offset..r.end + offset {
            let f = field.with_env_index(i);
            let out = run_continuous_walk(&f, &mut WalkRng::new(seed, i), t)?;
            state.accumulate_untilted(&out, xi)?;
            draws += out.draws;
        }
        Ok(Aggregate { state, draws })
    })?;
    merge_all(Horizon::Time(t), parts)
}

fn merge_all(horizon: Horizon, parts: Vec<Aggregate>) -> Result<Aggregate> {
    let mut acc = Aggregate { state: EstimatorState::new(horizon), draws: 0 };
    for p in parts {
        acc.state.merge(&p.state)?;
        acc.draws += p.draws;
    }
    Ok(acc)
}

/// One row of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub t: u64,
    pub k: u64,
    pub n: u64,
    pub a_hat: f64,
    pub ahom_direction: f64,
    /// `|ξ·A_hom ξ − ahom_direction|` when a reference value is known.
    pub systematic_error: Option<f64>,
    /// 95% half-width on the `a_hat` scale.
    pub ci_halfwidth: f64,
    /// 95% half-width on the `ahom_direction` scale.
    pub ahom_ci_halfwidth: f64,
    pub rng_draws: u64,
    pub wall_seconds: f64,
}

pub fn run_sweep(plan: &StudyPlan, exec: &ExecOptions) -> Result<Vec<StudyRecord>> {
    plan.check_mode(Mode::Sweep)?;
    plan.validate()?;
    exec.check_budget(plan.projected_draws())?;
    let reference = plan.law.reference_ahom(plan.d, plan.xi.components());
    let mut records = Vec::with_capacity(plan.horizons.len());
    for &t in &plan.horizons {
        let start = Instant::now();
        let n = plan.walks(t);
        let seed = derive_seed(plan.master_seed, Mode::Sweep, t);
        let agg = estimate_discrete(&plan.law, plan.d, &plan.xi, t, seed, 0..n, exec)?;
        let report = agg.state.report(&plan.law, plan.d)?;
        records.push(StudyRecord {
            t,
            k: plan.k(t),
            n,
            a_hat: report.a_hat,
            ahom_direction: report.ahom_direction,
            systematic_error: reference.map(|r| (r - report.ahom_direction).abs()),
            ci_halfwidth: report.ci_halfwidth,
            ahom_ci_halfwidth: report.ahom_ci_halfwidth(),
            rng_draws: agg.draws,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(records)
}

/// Ordinary least squares of `log(error)` on `log(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_standard_error: f64,
    pub points: usize,
}

/// Fits `log y = intercept + slope · log x`.
pub fn fit_log_log(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::NotEnoughSamples { needed: 3, have: points.len() as u64 });
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "log-log fit needs positive values, got ({x}, {y})"
        )));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("log-log fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(RateFit {
        slope,
        intercept,
        residual_standard_error: (ssr / (n - 2.0)).sqrt(),
        points: logs.len(),
    })
}

/// Rate fit over the systematic errors of sweep records.
pub fn fit_rate(records: &[StudyRecord]) -> Result<RateFit> {
    let points = records
        .iter()
        .map(|r| {
            r.systematic_error.map(|e| (r.t as f64, e)).ok_or_else(|| {
                Error::InvalidParameter(format!("record t={} has no systematic error", r.t))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    fit_log_log(&points)
}

/// Histogram and moments of `t (Â⁽ʳ⁾ − pooled mean)` at one horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationSummary {
    pub t: u64,
    pub n: u64,
    pub repetitions: u64,
    pub pooled_mean: f64,
    pub moments: SampleMoments,
    /// `t / √n`, the scale predicted for the deviations.
    pub clt_scale: f64,
    pub histogram: Histogram,
    pub a_hats: Vec<f64>,
    pub rng_draws: u64,
}

/// `m` independent estimates `Â_n(t)`; estimate `r` uses environments
/// `r n .. (r + 1) n`.
pub fn repeated_estimates(
    law: &ConductanceLaw,
    d: usize,
    xi: &Direction,
    t: u64,
    n: u64,
    m: u64,
    seed: u64,
    exec: &ExecOptions,
) -> Result<(Vec<f64>, u64)> {
    let serial = ExecOptions { workers: 1, ..*exec };
    let per_shard = (SHARD_SIZE / n.max(1)).max(1);
    let parts = exec.sharded(m, per_shard, |reps| {
        reps.map(|r| {
            let agg = estimate_discrete(law, d, xi, t, seed, r * n..(r + 1) * n, &serial)?;
            Ok((agg.state.a_hat(), agg.draws))
        })
        .collect::<Result<Vec<_>>>()
    })?;
    let mut a_hats = Vec::with_capacity(m as usize);
    let mut draws = 0;
    for (a, dr) in parts.into_iter().flatten() {
        a_hats.push(a);
        draws += dr;
    }
    Ok((a_hats, draws))
}

pub fn run_fluctuations(plan: &StudyPlan, exec: &ExecOptions) -> Result<Vec<FluctuationSummary>> {
    plan.check_mode(Mode::Fluctuations)?;
    plan.validate()?;
    if plan.repetitions < 100 {
        return Err(Error::NotEnoughSamples { needed: 100, have: plan.repetitions });
    }
    exec.check_budget(plan.projected_draws())?;
    let mut out = Vec::with_capacity(plan.horizons.len());
    for &t in &plan.horizons {
        let n = plan.walks(t);
        let seed = derive_seed(plan.master_seed, Mode::Fluctuations, t);
        let (a_hats, draws) =
            repeated_estimates(&plan.law, plan.d, &plan.xi, t, n, plan.repetitions, seed, exec)?;
        let sample = fluctuation_sample(&a_hats, t as f64)?;
        let half = HISTOGRAM_HALF_WIDTH_SD * sample.moments.std_dev();
        let histogram = Histogram::build(&sample.deviations, -half, half, HISTOGRAM_BINS);
        out.push(FluctuationSummary {
            t,
            n,
            repetitions: plan.repetitions,
            pooled_mean: sample.pooled_mean,
            moments: sample.moments,
            clt_scale: t as f64 / (n as f64).sqrt(),
            histogram,
            a_hats,
            rng_draws: draws,
        });
    }
    Ok(out)
}

/// Mergeable tallies of `|Y(t)|` for tail and exponential-moment diagnostics.
#[derive(Clone, Debug, PartialEq)]
struct TailTally {
    n: u64,
    exceed: Vec<u64>,
    exp_weighted: f64,
    weights: f64,
    exp_plain: f64,
    draws: u64,
}

impl TailTally {
    fn new() -> Self {
        Self {
            n: 0,
            exceed: vec![0; TAIL_RADII.len()],
            exp_weighted: 0.0,
            weights: 0.0,
            exp_plain: 0.0,
            draws: 0,
        }
    }

    fn merge(&mut self, o: &Self) {
        self.n += o.n;
        self.exceed.iter_mut().zip(&o.exceed).for_each(|(a, b)| *a += b);
        self.exp_weighted += o.exp_weighted;
        self.weights += o.weights;
        self.exp_plain += o.exp_plain;
        self.draws += o.draws;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub r: f64,
    pub count: u64,
    /// Fraction of walks with `|Y(t)| ≥ r √t`.
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonDiagnostics {
    pub t: u64,
    pub n: u64,
    pub tail: Vec<TailRow>,
    pub lambda: f64,
    /// `Σ p(ω) e^{λ|Y|²/t} / Σ p(ω)`: the tilted exponential moment.
    pub exp_moment_tilted: f64,
    /// Plain average of `e^{λ|Y|²/t}`.
    pub exp_moment_untilted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationPoint {
    pub n: u64,
    /// `|p̂_n − 1|` for each repetition.
    pub abs_deviations: Vec<f64>,
    pub mean_abs_deviation: f64,
    /// `5 √(Var p / n) / E[p]`.
    pub five_sigma_bound: f64,
    pub fraction_within_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub horizons: Vec<HorizonDiagnostics>,
    pub concentration: Vec<ConcentrationPoint>,
    /// For each pair of sizes `a < b`: fraction of repetitions in which
    /// `|p̂_b − 1| < |p̂_a − 1|`.
    pub concentration_improvement: Vec<(u64, u64, f64)>,
    pub rng_draws: u64,
}

/// Tail fractions and exponential moments of `Y(t)` over `n` walks.
pub fn tail_diagnostics(
    law: &ConductanceLaw,
    d: usize,
    t: u64,
    n: u64,
    lambda: f64,
    seed: u64,
    exec: &ExecOptions,
) -> Result<(HorizonDiagnostics, u64)> {
    let field = EnvironmentField::new(law, d, seed, 0)?;
    let tf = t as f64;
    let thresholds: Vec<f64> = TAIL_RADII.iter().map(|r| r * r * tf).collect();
    let parts = exec.sharded(n, SHARD_SIZE, |range| {
        let mut tally = TailTally::new();
        for i in range {
            let f = field.with_env_index(i);
            let out = run_discrete_walk(&f, &mut WalkRng::new(seed, i), t)?;
            let r2 = out.final_position.norm_sq();
            for (c, th) in tally.exceed.iter_mut().zip(&thresholds) {
                if r2 >= *th {
                    *c += 1;
                }
            }
            let e = (lambda * r2 / tf).exp();
            tally.n += 1;
            tally.exp_weighted += out.origin_weight * e;
            tally.weights += out.origin_weight;
            tally.exp_plain += e;
            tally.draws += out.draws;
        }
        Ok(tally)
    })?;
    let mut tally = TailTally::new();
    parts.iter().for_each(|p| tally.merge(p));
    let nf = tally.n as f64;
    let tail = TAIL_RADII
        .iter()
        .zip(&tally.exceed)
        .map(|(&r, &count)| TailRow { r, count, probability: count as f64 / nf })
        .collect();
    Ok((
        HorizonDiagnostics {
            t,
            n,
            tail,
            lambda,
            exp_moment_tilted: tally.exp_weighted / tally.weights,
            exp_moment_untilted: tally.exp_plain / nf,
        },
        tally.draws,
    ))
}

/// `p̂_n` for `reps` disjoint blocks of `n` environments. Returns the values
/// and the number of conductance draws.
pub fn p_hat_samples(
    law: &ConductanceLaw,
    d: usize,
    n: u64,
    reps: u64,
    seed: u64,
) -> Result<(Vec<f64>, u64)> {
    let field = EnvironmentField::new(law, d, seed, 0)?;
    let mean_p = law.mean_site_weight(d);
    let origin = LatticePoint::origin(d);
    let values = (0..reps)
        .map(|r| {
            let weights: Vec<f64> = (r * n..(r + 1) * n)
                .map(|i| field.with_env_index(i).site_weight(&origin))
                .collect();
            pairwise_sum(&weights) / (n as f64 * mean_p)
        })
        .collect();
    Ok((values, n * reps * 2 * d as u64))
}

pub fn run_diagnostics(plan: &StudyPlan, exec: &ExecOptions) -> Result<DiagnosticsReport> {
    plan.check_mode(Mode::Diagnostics)?;
    plan.validate()?;
    exec.check_budget(plan.projected_draws())?;
    let mut draws = 0;
    let mut horizons = Vec::new();
    for &t in &plan.horizons {
        let seed = derive_seed(plan.master_seed, Mode::Diagnostics, t);
        let (h, dr) = tail_diagnostics(&plan.law, plan.d, t, plan.walks(t), plan.lambda, seed, exec)?;
        horizons.push(h);
        draws += dr;
    }

    let mean_p = plan.law.mean_site_weight(plan.d);
    let sd_p = plan.law.site_weight_variance(plan.d).sqrt();
    // Repetition r of every size uses its own seed, so sizes are independent.
    let conc_seed = derive_seed(plan.master_seed, Mode::Diagnostics, 0);
    let mut concentration = Vec::new();
    for &size in &plan.concentration_sizes {
        let seed = conc_seed ^ size.rotate_left(32);
        let (values, dr) = p_hat_samples(&plan.law, plan.d, size, plan.concentration_repetitions, seed)?;
        draws += dr;
        let abs_deviations: Vec<f64> = values.iter().map(|p| (p - 1.0).abs()).collect();
        let bound = 5.0 * sd_p / (size as f64).sqrt() / mean_p;
        let within = abs_deviations.iter().filter(|&&a| a < bound).count();
        concentration.push(ConcentrationPoint {
            n: size,
            mean_abs_deviation: abs_deviations.iter().sum::<f64>() / abs_deviations.len().max(1) as f64,
            five_sigma_bound: bound,
            fraction_within_bound: within as f64 / abs_deviations.len().max(1) as f64,
            abs_deviations,
        });
    }
    let mut concentration_improvement = Vec::new();
    for (i, a) in concentration.iter().enumerate() {
        for b in &concentration[i + 1..] {
            let better = a.abs_deviations.iter().zip(&b.abs_deviations).filter(|(x, y)| y < x).count();
            concentration_improvement.push((a.n, b.n, better as f64 / a.abs_deviations.len().max(1) as f64));
        }
    }
    Ok(DiagnosticsReport { horizons, concentration, concentration_improvement, rng_draws: draws })
}

/// `Â_n(t)` with its standard error from the delta method, as a pair
/// `(estimate, 95% half-width)`.
pub fn estimate_with_ci(agg: &Aggregate) -> (f64, f64) {
    (agg.state.a_hat(), Z_975 * agg.state.standard_error())
}
