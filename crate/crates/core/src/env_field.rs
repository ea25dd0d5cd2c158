//! Seeded i.i.d. conductance environments on the edges of `Z^d`.
//!
//! An [`EnvironmentField`] never stores conductances. Each edge value is a
//! keyed pseudo-random function of `(seed, env_index, canonical edge key)`, so
//! any number of readers can query edges in any order and observe the same
//! environment.

use std::hash::Hasher;

use serde::{Deserialize, Serialize};
use siphasher::sip::SipHasher13;

use crate::{Error, Result};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 8;

/// Second SipHash key word for conductance draws. Walk decision streams use a
/// different tag under the same master seed.
pub(crate) const ENV_DOMAIN_TAG: u64 = 0x656e_765f_6669_656c; // "env_fiel"

/// A site of `Z^d`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticePoint {
    dim: u8,
    coords: [i64; MAX_DIM],
}

impl LatticePoint {
    pub fn origin(dim: usize) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&dim),
            "lattice dimension must be in 1..={MAX_DIM}, got {dim}"
        );
        Self { dim: dim as u8, coords: [0; MAX_DIM] }
    }

    pub fn from_coords(coords: &[i64]) -> Self {
        let mut p = Self::origin(coords.len());
        p.coords[..coords.len()].copy_from_slice(coords);
        p
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn coord(&self, axis: usize) -> i64 {
        self.coords()[axis]
    }

    /// The point moved by `delta` along `axis`.
    #[inline]
    pub fn shifted(mut self, axis: usize, delta: i64) -> Self {
        debug_assert!(axis < self.dim());
        self.coords[axis] += delta;
        self
    }

    pub fn l1_norm(&self) -> u64 {
        self.coords().iter().map(|c| c.unsigned_abs()).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coords().iter().map(|&c| (c as f64) * (c as f64)).sum()
    }

    pub fn coord_sum(&self) -> i64 {
        self.coords().iter().sum()
    }
}

impl std::fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("LatticePoint").field(&self.coords()).finish()
    }
}

/// An undirected nearest-neighbour edge, keyed canonically as `(x, axis)` for
/// the edge between `x` and `x + e_axis`. Axes are 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub base: LatticePoint,
    pub axis: usize,
}

impl Edge {
    pub fn new(base: LatticePoint, axis: usize) -> Self {
        assert!(axis < base.dim(), "axis {axis} out of range for d={}", base.dim());
        Self { base, axis }
    }

    /// Canonical edge between two sites, or `None` if they are not neighbours.
    pub fn between(x: &LatticePoint, y: &LatticePoint) -> Option<Self> {
        if x.dim() != y.dim() {
            return None;
        }
        let mut axis = None;
        for (i, (a, b)) in x.coords().iter().zip(y.coords()).enumerate() {
            match b - a {
                0 => {}
                1 | -1 if axis.is_none() => axis = Some((i, b - a)),
                _ => return None,
            }
        }
        let (axis, delta) = axis?;
        let base = if delta == 1 { *x } else { *y };
        Some(Self { base, axis })
    }

    /// The other endpoint, `base + e_axis`.
    pub fn head(&self) -> LatticePoint {
        self.base.shifted(self.axis, 1)
    }
}

/// Marginal law of a single edge conductance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    /// `alpha` with probability `prob_alpha`, `beta` otherwise.
    TwoPoint { alpha: f64, beta: f64, prob_alpha: f64 },
    Uniform { alpha: f64, beta: f64 },
}

impl Marginal {
    pub fn alpha(&self) -> f64 {
        match *self {
            Marginal::TwoPoint { alpha, .. } | Marginal::Uniform { alpha, .. } => alpha,
        }
    }

    pub fn beta(&self) -> f64 {
        match *self {
            Marginal::TwoPoint { beta, .. } | Marginal::Uniform { beta, .. } => beta,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::TwoPoint { alpha, beta, prob_alpha } => {
                prob_alpha * alpha + (1.0 - prob_alpha) * beta
            }
            Marginal::Uniform { alpha, beta } => 0.5 * (alpha + beta),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Marginal::TwoPoint { alpha, beta, prob_alpha } => {
                prob_alpha * (1.0 - prob_alpha) * (beta - alpha).powi(2)
            }
            Marginal::Uniform { alpha, beta } => (beta - alpha).powi(2) / 12.0,
        }
    }

    /// Almost surely equal to a single value.
    pub fn constant_value(&self) -> Option<f64> {
        match *self {
            Marginal::TwoPoint { alpha, beta, prob_alpha } => {
                if alpha == beta || prob_alpha == 1.0 {
                    Some(alpha)
                } else if prob_alpha == 0.0 {
                    Some(beta)
                } else {
                    None
                }
            }
            Marginal::Uniform { alpha, beta } => (alpha == beta).then_some(alpha),
        }
    }

    /// Maps a uniform variate `u ∈ [0, 1)` to a conductance in `[alpha, beta]`.
    #[inline]
    pub fn sample(&self, u: f64) -> f64 {
        match *self {
            Marginal::TwoPoint { alpha, beta, prob_alpha } => {
                if u < prob_alpha {
                    alpha
                } else {
                    beta
                }
            }
            Marginal::Uniform { alpha, beta } => alpha + (beta - alpha) * u,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.alpha(), self.beta());
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidLaw(format!("non-finite bounds alpha={a}, beta={b}")));
        }
        if a <= 0.0 {
            return Err(Error::InvalidLaw(format!("alpha must be positive, got {a}")));
        }
        if b < a {
            return Err(Error::InvalidLaw(format!("beta={b} is below alpha={a}")));
        }
        if let Marginal::TwoPoint { prob_alpha, .. } = *self {
            if !(0.0..=1.0).contains(&prob_alpha) {
                return Err(Error::InvalidLaw(format!(
                    "prob_alpha must lie in [0, 1], got {prob_alpha}"
                )));
            }
        }
        Ok(())
    }
}

/// Law of the i.i.d. environment: one marginal shared by all axes, or one
/// marginal per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConductanceLaw {
    #[serde(flatten)]
    marginal: Marginal,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    axes: Vec<Marginal>,
}

impl ConductanceLaw {
    pub fn isotropic(marginal: Marginal) -> Result<Self> {
        marginal.validate()?;
        Ok(Self { marginal, axes: Vec::new() })
    }

    pub fn two_point(alpha: f64, beta: f64, prob_alpha: f64) -> Result<Self> {
        Self::isotropic(Marginal::TwoPoint { alpha, beta, prob_alpha })
    }

    pub fn uniform(alpha: f64, beta: f64) -> Result<Self> {
        Self::isotropic(Marginal::Uniform { alpha, beta })
    }

    /// Every conductance equal to `c`.
    pub fn constant(c: f64) -> Result<Self> {
        Self::two_point(c, c, 1.0)
    }

    /// The reference law: 1 or 4 with probability 1/2 each.
    pub fn symmetric_two_point_1_4() -> Self {
        Self::two_point(1.0, 4.0, 0.5).expect("valid law")
    }

    /// Direction-dependent marginals, one per axis.
    pub fn anisotropic(axes: Vec<Marginal>) -> Result<Self> {
        let first = *axes
            .first()
            .ok_or_else(|| Error::InvalidLaw("anisotropic law needs at least one axis".into()))?;
        for m in &axes {
            m.validate()?;
        }
        Ok(Self { marginal: first, axes })
    }

    pub fn is_isotropic(&self) -> bool {
        self.axes.is_empty()
    }

    pub fn marginal(&self, axis: usize) -> &Marginal {
        if self.axes.is_empty() {
            &self.marginal
        } else {
            &self.axes[axis]
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.marginal.validate()?;
        self.axes.iter().try_for_each(Marginal::validate)
    }

    /// Checks that the law can be used in dimension `d`.
    pub fn validate_for_dim(&self, d: usize) -> Result<()> {
        self.validate()?;
        if !(1..=MAX_DIM).contains(&d) {
            return Err(Error::InvalidParameter(format!(
                "dimension must be in 1..={MAX_DIM}, got {d}"
            )));
        }
        if !self.axes.is_empty() && self.axes.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.axes.len() });
        }
        Ok(())
    }

    /// Smallest conductance over the axes used in dimension `d`.
    pub fn alpha(&self, d: usize) -> f64 {
        (0..d).map(|i| self.marginal(i).alpha()).fold(f64::INFINITY, f64::min)
    }

    pub fn beta(&self, d: usize) -> f64 {
        (0..d).map(|i| self.marginal(i).beta()).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean_edge_conductance(&self, axis: usize) -> f64 {
        self.marginal(axis).mean()
    }

    /// `E[p] = 2 Σ_i E[ω_{0,e_i}]`.
    pub fn mean_site_weight(&self, d: usize) -> f64 {
        2.0 * (0..d).map(|i| self.marginal(i).mean()).sum::<f64>()
    }

    /// `Var(p)`; the 2d incident edges are independent.
    pub fn site_weight_variance(&self, d: usize) -> f64 {
        2.0 * (0..d).map(|i| self.marginal(i).variance()).sum::<f64>()
    }

    /// Known value of `ξ·A_hom ξ`, when one exists.
    ///
    /// Constant coefficients homogenize to themselves in every dimension; in
    /// `d = 2` the symmetric two-point law has `A_hom = √(αβ) Id` (Dykhne).
    pub fn reference_ahom(&self, d: usize, xi: &[f64]) -> Option<f64> {
        let constants: Option<Vec<f64>> = (0..d).map(|i| self.marginal(i).constant_value()).collect();
        if let Some(c) = constants {
            return Some(c.iter().zip(xi).map(|(c, x)| c * x * x).sum());
        }
        if d == 2 && self.is_isotropic() {
            if let Marginal::TwoPoint { alpha, beta, prob_alpha } = self.marginal {
                if prob_alpha == 0.5 {
                    return Some((alpha * beta).sqrt());
                }
            }
        }
        None
    }
}

/// Exact `E[p]` for `law` in dimension `d`.
pub fn mean_site_weight(law: &ConductanceLaw, d: usize) -> f64 {
    law.mean_site_weight(d)
}

/// Read access to a conductance environment.
///
/// Neighbour order for incident quantities is `(+e_1, -e_1, …, +e_d, -e_d)`.
pub trait Environment {
    fn dim(&self) -> usize;

    fn conductance(&self, edge: &Edge) -> f64;

    /// Writes the `2d` conductances incident to `x` into `out[..2d]`.
    fn incident_conductances(&self, x: &LatticePoint, out: &mut [f64]) {
        for axis in 0..self.dim() {
            out[2 * axis] = self.conductance(&Edge { base: *x, axis });
            out[2 * axis + 1] = self.conductance(&Edge { base: x.shifted(axis, -1), axis });
        }
    }

    /// `p_ω(x)`, the sum of the conductances incident to `x`.
    fn site_weight(&self, x: &LatticePoint) -> f64 {
        let mut buf = [0.0; 2 * MAX_DIM];
        let k = 2 * self.dim();
        self.incident_conductances(x, &mut buf[..k]);
        buf[..k].iter().sum()
    }
}

/// One realization `ω^(env_index)` of the environment.
#[derive(Clone, Copy, Debug)]
pub struct EnvironmentField {
    marginals: [Marginal; MAX_DIM],
    dim: usize,
    seed: u64,
    env_index: u64,
}

impl EnvironmentField {
    pub fn new(law: &ConductanceLaw, dim: usize, seed: u64, env_index: u64) -> Result<Self> {
        law.validate_for_dim(dim)?;
        let mut marginals = [*law.marginal(0); MAX_DIM];
        for (axis, m) in marginals.iter_mut().enumerate().take(dim) {
            *m = *law.marginal(axis);
        }
        Ok(Self { marginals, dim, seed, env_index })
    }

    /// Same law and seed, different independent environment.
    pub fn with_env_index(mut self, env_index: u64) -> Self {
        self.env_index = env_index;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn env_index(&self) -> u64 {
        self.env_index
    }

    /// Uniform variate in `[0, 1)` attached to `edge`.
    ///
    /// SipHash-1-3 keyed by `(seed, ENV_DOMAIN_TAG)` over the little-endian
    /// bytes `env_index (u64) ‖ axis (u32) ‖ coords (i64 each)`.
    #[inline]
    pub fn edge_uniform(&self, edge: &Edge) -> f64 {
        let mut buf = [0u8; 12 + 8 * MAX_DIM];
        buf[..8].copy_from_slice(&self.env_index.to_le_bytes());
        buf[8..12].copy_from_slice(&(edge.axis as u32).to_le_bytes());
        for (i, c) in edge.base.coords().iter().enumerate() {
            buf[12 + 8 * i..20 + 8 * i].copy_from_slice(&c.to_le_bytes());
        }
        let mut h = SipHasher13::new_with_keys(self.seed, ENV_DOMAIN_TAG);
        h.write(&buf[..12 + 8 * self.dim]);
        unit_f64(h.finish())
    }
}

impl Environment for EnvironmentField {
    #[inline]
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn conductance(&self, edge: &Edge) -> f64 {
        debug_assert_eq!(edge.base.dim(), self.dim);
        self.marginals[edge.axis].sample(self.edge_uniform(edge))
    }
}

/// Top 53 bits of `x` as a float in `[0, 1)`.
#[inline]
pub(crate) fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
