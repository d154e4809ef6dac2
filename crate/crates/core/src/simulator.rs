//! Monte Carlo execution of a policy on the block-arrival process.
//!
//! Each round draws one uniform to decide who found the block (attacker iff
//! `u < alpha`) and, only when an honest block lands during a race, a second
//! uniform deciding whether it extends the attacker's branch (`u < gamma`, or
//! `u < 1/2` under uniform tie breaking). The generator is ChaCha8 seeded
//! with the 64-bit seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::BoundaryRule;
use crate::model::{
    feasible_actions, sm1_policy, Action, MiningParams, ATTACKER_START, HONEST_START,
};
use crate::policy::Policy;
use crate::transitions::{is_race, outcomes, Event};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: MiningParams,
    pub policy: Policy,
    /// Number of blocks created.
    pub rounds: u64,
    pub seed: u64,
    /// Behaviour once `max(a, h)` reaches the policy's truncation.
    pub boundary: BoundaryRule,
}

impl SimConfig {
    pub fn new(params: MiningParams, policy: Policy, rounds: u64, seed: u64) -> Self {
        Self {
            params,
            policy,
            rounds,
            seed,
            boundary: BoundaryRule::ForcedAdopt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub seed: u64,
    pub rounds: u64,
    pub attacker_blocks: u64,
    pub honest_blocks: u64,
    pub rev: f64,
    /// Standard error of `rev` from the regenerative ratio estimator over
    /// completed epochs; NaN with fewer than two epochs.
    pub stderr: f64,
    /// Completed epochs (runs ending in an adopt).
    pub epochs: u64,
}

/// Per-epoch sums for the ratio estimator.
#[derive(Default)]
struct EpochStats {
    n: f64,
    a: f64,
    b: f64,
    aa: f64,
    bb: f64,
    ab: f64,
}

impl EpochStats {
    fn push(&mut self, attacker: f64, total: f64) {
        self.n += 1.0;
        self.a += attacker;
        self.b += total;
        self.aa += attacker * attacker;
        self.bb += total * total;
        self.ab += attacker * total;
    }

    /// Delta-method standard error of `sum(a) / sum(b)`.
    fn stderr(&self) -> f64 {
        if self.n < 2.0 || self.b == 0.0 {
            return f64::NAN;
        }
        let n = self.n;
        let r = self.a / self.b;
        let mean_b = self.b / n;
        let ss = self.aa - 2.0 * r * self.ab + r * r * self.bb;
        let var = (ss / (n - 1.0)).max(0.0);
        (var / n).sqrt() / mean_b
    }
}

pub fn simulate_policy(cfg: &SimConfig) -> Result<SimResult> {
    if cfg.rounds == 0 {
        return Err(Error::InvalidParameter("rounds must be at least 1".into()));
    }
    let p = &cfg.params;
    let t = cfg.policy.truncation();
    let alpha = p.alpha();
    let race_gamma = p.race_gamma();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut state = if rng.random::<f64>() < alpha {
        ATTACKER_START
    } else {
        HONEST_START
    };
    let (mut attacker, mut honest) = (0u64, 0u64);
    let (mut epoch_att, mut epoch_hon) = (0u64, 0u64);
    let mut stats = EpochStats::default();

    for _ in 0..cfg.rounds {
        let action = if state.a.max(state.h) >= t {
            match cfg.boundary {
                BoundaryRule::ForcedAdopt => Action::Adopt,
                BoundaryRule::Sm1Tail => sm1_policy(state),
            }
        } else {
            let action = cfg.policy.action(state);
            if !feasible_actions(state, p).contains(action) {
                return Err(Error::InfeasibleAction { state, action });
            }
            action
        };
        let event = if rng.random::<f64>() < alpha {
            Event::Attacker
        } else if is_race(state, action) && rng.random::<f64>() < race_gamma {
            Event::HonestOnAttacker
        } else {
            Event::Honest
        };
        let outcome = outcomes(state, action, p)
            .into_iter()
            .find(|o| o.event == event)
            .expect("drawn event has positive probability");
        epoch_att += u64::from(outcome.reward.attacker);
        epoch_hon += u64::from(outcome.reward.honest);
        state = outcome.next;
        if action == Action::Adopt {
            stats.push(epoch_att as f64, (epoch_att + epoch_hon) as f64);
            attacker += epoch_att;
            honest += epoch_hon;
            epoch_att = 0;
            epoch_hon = 0;
        }
    }
    attacker += epoch_att;
    honest += epoch_hon;

    let total = attacker + honest;
    Ok(SimResult {
        seed: cfg.seed,
        rounds: cfg.rounds,
        attacker_blocks: attacker,
        honest_blocks: honest,
        rev: if total > 0 {
            attacker as f64 / total as f64
        } else {
            f64::NAN
        },
        stderr: stats.stderr(),
        epochs: stats.n as u64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub mean_rev: f64,
    /// Sample standard deviation across replicas.
    pub std_rev: f64,
    pub replicas: Vec<SimResult>,
}

impl BatchResult {
    /// `replica,seed,rev` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("replica,seed,rev\n");
        for (k, r) in self.replicas.iter().enumerate() {
            out.push_str(&format!("{k},{},{:.9}\n", r.seed, r.rev));
        }
        out
    }
}

/// Runs `replicas` independent copies with seeds `seed + k * stride`.
pub fn simulate_batch(cfg: &SimConfig, replicas: usize, seed_stride: u64) -> Result<BatchResult> {
    if replicas < 2 {
        return Err(Error::InvalidParameter(format!("a batch needs at least 2 replicas (got {replicas})")));
    }
    let results: Vec<SimResult> = (0..replicas as u64)
        .into_par_iter()
        .map(|k| {
            let mut c = cfg.clone();
            c.seed = cfg.seed.wrapping_add(k.wrapping_mul(seed_stride));
            simulate_policy(&c)
        })
        .collect::<Result<_>>()?;
    let n = results.len() as f64;
    let mean = results.iter().map(|r| r.rev).sum::<f64>() / n;
    let var = results.iter().map(|r| (r.rev - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(BatchResult {
        mean_rev: mean,
        std_rev: var.sqrt(),
        replicas: results,
    })
}

/// Steps a single round from `state` with a fixed event, for tests that pin
/// the accounting against the shared transition table.
#[cfg(test)]
fn step(state: crate::model::ChainState, action: Action, event: Event, p: &MiningParams) -> Option<crate::transitions::Outcome> {
    outcomes(state, action, p).into_iter().find(|o| o.event == event)
}
