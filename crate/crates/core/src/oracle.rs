//! Exact law of `Y(t)` in a fixed environment, by pushing the point mass at
//! the origin through the transition kernel `t` times on a dense box.

use std::collections::HashMap;
use std::io::Write;

use crate::env_field::{Environment, LatticePoint, MAX_DIM};
use crate::estimator::Direction;
use crate::stats::pairwise_sum;
use crate::{Error, Result};

/// Largest supported dimension for dense kernels.
pub const ORACLE_MAX_DIM: usize = 3;
/// Largest dense box, `(2t + 1)^d` entries.
pub const ORACLE_MAX_ENTRIES: usize = 1 << 20;
/// Largest ball radius accepted by [`check_detailed_balance`].
pub const BALANCE_MAX_RADIUS: u64 = 64;
/// Threshold on `|p(x)P(x→y) − p(y)P(y→x)|`.
pub const BALANCE_TOLERANCE: f64 = 1.0 / (1u64 << 40) as f64;

/// Dense box `[-R, R]^d` with row-major indexing, axis 0 fastest.
#[derive(Clone, Debug)]
struct DenseBox {
    dim: usize,
    radius: i64,
    side: usize,
}

impl DenseBox {
    fn new(dim: usize, radius: u64) -> Self {
        Self { dim, radius: radius as i64, side: 2 * radius as usize + 1 }
    }

    fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    fn index(&self, x: &LatticePoint) -> Option<usize> {
        let mut idx = 0usize;
        for &c in x.coords().iter().rev() {
            if c.abs() > self.radius {
                return None;
            }
            idx = idx * self.side + (c + self.radius) as usize;
        }
        Some(idx)
    }

    fn point(&self, mut idx: usize) -> LatticePoint {
        let mut coords = [0i64; MAX_DIM];
        for c in coords.iter_mut().take(self.dim) {
            *c = (idx % self.side) as i64 - self.radius;
            idx /= self.side;
        }
        LatticePoint::from_coords(&coords[..self.dim])
    }
}

fn check_guard(dim: usize, t: u64) -> Result<()> {
    if t == 0 {
        return Err(Error::OracleGuard("horizon must be at least 1".into()));
    }
    if dim == 0 || dim > ORACLE_MAX_DIM {
        return Err(Error::OracleGuard(format!(
            "dimension {dim} outside 1..={ORACLE_MAX_DIM}"
        )));
    }
    let side = 2 * t as u128 + 1;
    let entries = side.checked_pow(dim as u32).unwrap_or(u128::MAX);
    if entries > ORACLE_MAX_ENTRIES as u128 {
        return Err(Error::OracleGuard(format!(
            "(2t+1)^d = {entries} entries exceeds {ORACLE_MAX_ENTRIES} (t={t}, d={dim})"
        )));
    }
    Ok(())
}

/// The law of `Y(t)` under `P^ω_0`.
#[derive(Clone, Debug)]
pub struct ExactKernel {
    grid: DenseBox,
    horizon: u64,
    probs: Vec<f64>,
}

impl ExactKernel {
    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn radius(&self) -> u64 {
        self.grid.radius as u64
    }

    pub fn prob(&self, x: &LatticePoint) -> f64 {
        if x.dim() != self.dim() {
            return 0.0;
        }
        self.grid.index(x).map_or(0.0, |i| self.probs[i])
    }

    /// Sites with positive probability, in index order.
    pub fn support(&self) -> impl Iterator<Item = (LatticePoint, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| (self.grid.point(i), p))
    }

    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.probs)
    }

    /// `E^ω_0[(ξ·Y(t))²]`.
    pub fn second_moment(&self, xi: &Direction) -> f64 {
        let terms: Vec<f64> = self
            .support()
            .map(|(x, p)| {
                let z = xi.project(&x);
                p * z * z
            })
            .collect();
        pairwise_sum(&terms)
    }

    /// `P^ω_0[|Y(t)| ≥ r √t]`, Euclidean norm.
    pub fn tail_probability(&self, r: f64) -> f64 {
        let threshold = r * r * self.horizon as f64;
        let terms: Vec<f64> = self
            .support()
            .filter(|(x, _)| x.norm_sq() >= threshold)
            .map(|(_, p)| p)
            .collect();
        pairwise_sum(&terms)
    }

    /// Total-variation distance to an empirical law given by site counts.
    pub fn tv_distance(&self, counts: &HashMap<LatticePoint, u64>) -> f64 {
        let n: u64 = counts.values().sum();
        let n = n as f64;
        let mut terms: Vec<f64> = self
            .support()
            .map(|(x, p)| (p - counts.get(&x).copied().unwrap_or(0) as f64 / n).abs())
            .collect();
        for (x, &c) in counts {
            if self.prob(x) == 0.0 {
                terms.push(c as f64 / n);
            }
        }
        0.5 * pairwise_sum(&terms)
    }

    /// Dumps the support as CSV: `x1,…,xd,probability`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.dim()).map(|i| format!("x{i}")).collect();
        writeln!(w, "{},probability", header.join(","))?;
        for (x, p) in self.support() {
            for c in x.coords() {
                write!(w, "{c},")?;
            }
            writeln!(w, "{p:e}")?;
        }
        Ok(())
    }
}

/// Law of `Y(t)` by `t` exact pushforward steps.
///
/// Each target site pulls its mass from its `2d` neighbours in the fixed slot
/// order, so the result does not depend on how sites are visited.
pub fn exact_distribution<E: Environment + ?Sized>(env: &E, t: u64) -> Result<ExactKernel> {
    let d = env.dim();
    check_guard(d, t)?;
    let grid = DenseBox::new(d, t);
    let k = 2 * d;
    let len = grid.len();

    // Outgoing probabilities for every site that can hold mass before the last step.
    let mut step = vec![0.0f64; len * k];
    let mut cond = [0.0f64; 2 * MAX_DIM];
    for idx in 0..len {
        let x = grid.point(idx);
        if x.l1_norm() + 1 > t {
            continue;
        }
        env.incident_conductances(&x, &mut cond[..k]);
        let total: f64 = cond[..k].iter().sum();
        for j in 0..k {
            step[idx * k + j] = cond[j] / total;
        }
    }

    let mut cur = vec![0.0f64; len];
    let mut next = vec![0.0f64; len];
    cur[grid.index(&LatticePoint::origin(d)).expect("origin in box")] = 1.0;
    for s in 1..=t {
        for idx in 0..len {
            let y = grid.point(idx);
            let l1 = y.l1_norm();
            if l1 > s || (l1 + s) % 2 == 1 {
                next[idx] = 0.0;
                continue;
            }
            let mut acc = 0.0;
            for j in 0..k {
                // Slot j moves by +e_{j/2} (even) or -e_{j/2} (odd); the source is y minus that move.
                let delta = if j % 2 == 0 { -1 } else { 1 };
                let x = y.shifted(j / 2, delta);
                if x.l1_norm() + 1 > s {
                    continue;
                }
                if let Some(xi) = grid.index(&x) {
                    acc += cur[xi] * step[xi * k + j];
                }
            }
            next[idx] = acc;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(ExactKernel { grid, horizon: t, probs: cur })
}

/// `t⁻¹ E^ω_0[(ξ·Y(t))²]` in the given environment.
pub fn exact_sigma_t<E: Environment + ?Sized>(env: &E, xi: &Direction, t: u64) -> Result<f64> {
    if xi.dim() != env.dim() {
        return Err(Error::DimensionMismatch { expected: env.dim(), got: xi.dim() });
    }
    Ok(exact_distribution(env, t)?.second_moment(xi) / t as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BalanceCheck {
    pub holds: bool,
    pub max_violation: f64,
}

/// Checks `p_ω(x) P(x→y) = p_ω(y) P(y→x)` on every edge with an endpoint in
/// the L¹ ball of radius `radius`.
pub fn check_detailed_balance<E: Environment + ?Sized>(env: &E, radius: u64) -> Result<BalanceCheck> {
    if radius > BALANCE_MAX_RADIUS {
        return Err(Error::OracleGuard(format!(
            "balance radius {radius} exceeds {BALANCE_MAX_RADIUS}"
        )));
    }
    let d = env.dim();
    let k = 2 * d;
    let grid = DenseBox::new(d, radius);
    let mut cx = [0.0f64; 2 * MAX_DIM];
    let mut cy = [0.0f64; 2 * MAX_DIM];
    let mut max_violation = 0.0f64;
    for idx in 0..grid.len() {
        let x = grid.point(idx);
        if x.l1_norm() > radius {
            continue;
        }
        env.incident_conductances(&x, &mut cx[..k]);
        let px: f64 = cx[..k].iter().sum();
        for axis in 0..d {
            let y = x.shifted(axis, 1);
            env.incident_conductances(&y, &mut cy[..k]);
            let py: f64 = cy[..k].iter().sum();
            let forward = px * (cx[2 * axis] / px);
            let backward = py * (cy[2 * axis + 1] / py);
            max_violation = max_violation.max((forward - backward).abs());
        }
    }
    Ok(BalanceCheck { holds: max_violation <= BALANCE_TOLERANCE, max_violation })
}
