//! Random walks in a fixed environment.
//!
//! `Y` is the discrete-time jump chain, `P[x → y] = ω_{xy} / p_ω(x)`. `X` is
//! the continuous-time walk that jumps across edge `{x, y}` at rate `ω_{xy}`.
//! Both start at the origin.

use std::hash::Hasher;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use siphasher::sip::SipHasher13;

use crate::env_field::{Environment, LatticePoint, MAX_DIM};
use crate::{Error, Result};

/// Second SipHash key word for deriving walk decision streams.
const WALK_DOMAIN_TAG: u64 = 0x7761_6c6b_5f72_6e67; // "walk_rng"

/// How long a walk ran: `t` steps of `Y`, or real time `t` for `X`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Steps(u64),
    Time(f64),
}

impl Horizon {
    pub fn as_f64(&self) -> f64 {
        match *self {
            Horizon::Steps(t) => t as f64,
            Horizon::Time(t) => t,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WalkOutcome {
    pub final_position: LatticePoint,
    /// `p(ω) = p_ω(0)` of the environment the walk ran in.
    pub origin_weight: f64,
    pub horizon: Horizon,
    pub env_index: u64,
    /// Conductance evaluations plus decision variates.
    pub draws: u64,
    pub jumps: u64,
}

/// Decision stream of one walk.
///
/// A ChaCha8 generator whose 256-bit key is derived from
/// `(seed, env_index, replica)` under a domain tag distinct from the one used
/// for conductances.
#[derive(Clone, Debug)]
pub struct WalkRng {
    inner: ChaCha8Rng,
    env_index: u64,
    draws: u64,
}

impl WalkRng {
    /// The stream for the walk that runs in environment `env_index`.
    pub fn new(seed: u64, env_index: u64) -> Self {
        Self::with_replica(seed, env_index, 0)
    }

    /// Independent streams for several walks sharing one environment.
    pub fn with_replica(seed: u64, env_index: u64, replica: u64) -> Self {
        let mut key = [0u8; 32];
        for (word, chunk) in key.chunks_exact_mut(8).enumerate() {
            let mut h = SipHasher13::new_with_keys(seed, WALK_DOMAIN_TAG);
            h.write_u64(env_index);
            h.write_u64(replica);
            h.write_u64(word as u64);
            chunk.copy_from_slice(&h.finish().to_le_bytes());
        }
        Self { inner: ChaCha8Rng::from_seed(key), env_index, draws: 0 }
    }

    pub fn env_index(&self) -> u64 {
        self.env_index
    }

    /// Number of variates produced so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        self.inner.random::<f64>()
    }

    #[inline]
    pub fn exp1(&mut self) -> f64 {
        self.draws += 1;
        self.inner.sample(Exp1)
    }
}

/// Jump probabilities from `x`, in the order `(+e_1, -e_1, …, +e_d, -e_d)`.
pub fn step_distribution<E: Environment + ?Sized>(env: &E, x: &LatticePoint) -> Vec<f64> {
    let k = 2 * env.dim();
    let mut c = vec![0.0; k];
    env.incident_conductances(x, &mut c);
    let total: f64 = c.iter().sum();
    c.iter_mut().for_each(|v| *v /= total);
    c
}

#[inline]
fn neighbour(x: LatticePoint, slot: usize) -> LatticePoint {
    let delta = if slot % 2 == 0 { 1 } else { -1 };
    x.shifted(slot / 2, delta)
}

/// Inverse-CDF choice among incident conductances.
#[inline]
fn pick_slot(cond: &[f64], total: f64, u: f64) -> usize {
    let target = u * total;
    let mut acc = 0.0;
    for (j, c) in cond.iter().enumerate() {
        acc += c;
        if target < acc {
            return j;
        }
    }
    cond.len() - 1
}

fn walk_discrete<E, F>(env: &E, rng: &mut WalkRng, t: u64, mut visit: F) -> Result<WalkOutcome>
where
    E: Environment + ?Sized,
    F: FnMut(u64, &LatticePoint),
{
    if t == 0 {
        return Err(Error::InvalidParameter("walk horizon must be at least 1 step".into()));
    }
    let d = env.dim();
    let k = 2 * d;
    let rng_start = rng.draws();
    let mut cond = [0.0; 2 * MAX_DIM];
    let mut x = LatticePoint::origin(d);
    let mut origin_weight = 0.0;
    visit(0, &x);
    for step in 0..t {
        env.incident_conductances(&x, &mut cond[..k]);
        let total: f64 = cond[..k].iter().sum();
        if step == 0 {
            origin_weight = total;
        }
        x = neighbour(x, pick_slot(&cond[..k], total, rng.uniform()));
        visit(step + 1, &x);
    }
    Ok(WalkOutcome {
        final_position: x,
        origin_weight,
        horizon: Horizon::Steps(t),
        env_index: rng.env_index(),
        draws: k as u64 * t + (rng.draws() - rng_start),
        jumps: t,
    })
}

/// Runs `Y` for exactly `t` steps.
pub fn run_discrete_walk<E: Environment + ?Sized>(
    env: &E,
    rng: &mut WalkRng,
    t: u64,
) -> Result<WalkOutcome> {
    walk_discrete(env, rng, t, |_, _| {})
}

/// Like [`run_discrete_walk`], also returning every visited site
/// (`t + 1` entries, starting at the origin).
pub fn run_discrete_walk_traced<E: Environment + ?Sized>(
    env: &E,
    rng: &mut WalkRng,
    t: u64,
) -> Result<(WalkOutcome, Vec<LatticePoint>)> {
    let mut trace = Vec::with_capacity(t as usize + 1);
    let outcome = walk_discrete(env, rng, t, |_, x| trace.push(*x))?;
    Ok((outcome, trace))
}

/// Writes a trace as CSV: `step,x1,…,xd`.
pub fn write_trace_csv<W: Write>(mut w: W, trace: &[LatticePoint]) -> std::io::Result<()> {
    let d = trace.first().map_or(0, |p| p.dim());
    write!(w, "step")?;
    for i in 1..=d {
        write!(w, ",x{i}")?;
    }
    writeln!(w)?;
    for (step, p) in trace.iter().enumerate() {
        write!(w, "{step}")?;
        for c in p.coords() {
            write!(w, ",{c}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Runs `X` up to real time `t`: exponential holding times of rate `p_ω(x)`,
/// jumps chosen as for `Y`.
pub fn run_continuous_walk<E: Environment + ?Sized>(
    env: &E,
    rng: &mut WalkRng,
    t: f64,
) -> Result<WalkOutcome> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("walk time must be positive, got {t}")));
    }
    let d = env.dim();
    let k = 2 * d;
    let rng_start = rng.draws();
    let mut cond = [0.0; 2 * MAX_DIM];
    let mut x = LatticePoint::origin(d);
    let mut origin_weight = 0.0;
    let mut clock = 0.0;
    let mut jumps = 0u64;
    let mut env_draws = 0u64;
    loop {
        env.incident_conductances(&x, &mut cond[..k]);
        env_draws += k as u64;
        let rate: f64 = cond[..k].iter().sum();
        if jumps == 0 && clock == 0.0 {
            origin_weight = rate;
        }
        clock += rng.exp1() / rate;
        if clock > t {
            break;
        }
        x = neighbour(x, pick_slot(&cond[..k], rate, rng.uniform()));
        jumps += 1;
    }
    Ok(WalkOutcome {
        final_position: x,
        origin_weight,
        horizon: Horizon::Time(t),
        env_index: rng.env_index(),
        draws: env_draws + (rng.draws() - rng_start),
        jumps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_field::{ConductanceLaw, Edge, EnvironmentField};

    struct Fixed2d;
    impl Environment for Fixed2d {
        fn dim(&self) -> usize {
            2
        }
        fn conductance(&self, e: &Edge) -> f64 {
            if e.axis == 0 {
                1.0
            } else {
                4.0
            }
        }
    }

    #[test]
    fn step_distribution_direct_formula() {
        let p = step_distribution(&Fixed2d, &LatticePoint::origin(2));
        assert_eq!(p, vec![0.1, 0.1, 0.4, 0.4]);
    }

    #[test]
    fn step_distribution_constant_is_uniform() {
        let law = ConductanceLaw::constant(3.0).unwrap();
        let f = EnvironmentField::new(&law, 3, 5, 0).unwrap();
        let p = step_distribution(&f, &LatticePoint::from_coords(&[1, 2, 3]));
        assert!(p.iter().all(|&v| v == 1.0 / 6.0));
    }

    #[test]
    fn step_distribution_matches_field_values() {
        let law = ConductanceLaw::symmetric_two_point_1_4();
        let f = EnvironmentField::new(&law, 2, 2024, 11).unwrap();
        let o = LatticePoint::origin(2);
        let c = [
            f.conductance(&Edge::new(o, 0)),
            f.conductance(&Edge::new(o.shifted(0, -1), 0)),
            f.conductance(&Edge::new(o, 1)),
            f.conductance(&Edge::new(o.shifted(1, -1), 1)),
        ];
        let total: f64 = c.iter().sum();
        let expected: Vec<f64> = c.iter().map(|v| v / total).collect();
        assert_eq!(step_distribution(&f, &o), expected);
        let s: f64 = expected.iter().sum();
        assert!((s - 1.0).abs() <= f64::EPSILON);
    }

    #[test]
    fn zero_horizon_rejected() {
        let mut rng = WalkRng::new(1, 0);
        assert!(run_discrete_walk(&Fixed2d, &mut rng, 0).is_err());
        assert!(run_continuous_walk(&Fixed2d, &mut rng, 0.0).is_err());
        assert!(run_continuous_walk(&Fixed2d, &mut rng, f64::NAN).is_err());
    }

    #[test]
    fn single_step_moves_to_neighbour() {
        let law = ConductanceLaw::symmetric_two_point_1_4();
        for i in 0..100 {
            let f = EnvironmentField::new(&law, 2, 8, i).unwrap();
            let out = run_discrete_walk(&f, &mut WalkRng::new(8, i), 1).unwrap();
            assert_eq!(out.final_position.l1_norm(), 1);
            assert_eq!(out.origin_weight, f.site_weight(&LatticePoint::origin(2)));
        }
    }

    #[test]
    fn discrete_walk_is_deterministic() {
        let law = ConductanceLaw::symmetric_two_point_1_4();
        let f = EnvironmentField::new(&law, 2, 99, 4).unwrap();
        let a = run_discrete_walk(&f, &mut WalkRng::new(99, 4), 500).unwrap();
        let b = run_discrete_walk(&f, &mut WalkRng::new(99, 4), 500).unwrap();
        assert_eq!(a, b);
        let c = run_discrete_walk(&f, &mut WalkRng::with_replica(99, 4, 1), 500).unwrap();
        assert_ne!(a.final_position, c.final_position);
    }

    #[test]
    fn trace_is_a_nearest_neighbour_path() {
        let law = ConductanceLaw::uniform(1.0, 3.0).unwrap();
        let f = EnvironmentField::new(&law, 3, 1, 2).unwrap();
        let (out, trace) = run_discrete_walk_traced(&f, &mut WalkRng::new(1, 2), 40).unwrap();
        assert_eq!(trace.len(), 41);
        assert_eq!(trace[0], LatticePoint::origin(3));
        assert_eq!(*trace.last().unwrap(), out.final_position);
        for w in trace.windows(2) {
            assert!(Edge::between(&w[0], &w[1]).is_some());
        }
        let plain = run_discrete_walk(&f, &mut WalkRng::new(1, 2), 40).unwrap();
        assert_eq!(plain, out);

        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace[..3]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("step,x1,x2,x3"));
        assert_eq!(lines.next(), Some("0,0,0,0"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn draw_count_for_discrete_walk() {
        let law = ConductanceLaw::symmetric_two_point_1_4();
        let f = EnvironmentField::new(&law, 2, 3, 0).unwrap();
        let out = run_discrete_walk(&f, &mut WalkRng::new(3, 0), 25).unwrap();
        assert_eq!(out.draws, 5 * 25);
    }

    #[test]
    fn continuous_walk_origin_weight_and_time() {
        let law = ConductanceLaw::symmetric_two_point_1_4();
        let f = EnvironmentField::new(&law, 2, 12, 7).unwrap();
        let out = run_continuous_walk(&f, &mut WalkRng::new(12, 7), 5.0).unwrap();
        assert_eq!(out.origin_weight, f.site_weight(&LatticePoint::origin(2)));
        assert_eq!(out.horizon, Horizon::Time(5.0));
        assert!(out.final_position.l1_norm() <= out.jumps);
        assert_eq!(out.draws, 4 * (out.jumps + 1) + (2 * out.jumps + 1));
    }
}
