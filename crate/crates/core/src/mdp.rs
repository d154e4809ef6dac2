//! Finite average-reward MDPs and relative value iteration.
//!
//! [`MiningModel`] keeps the transition structure with untransformed
//! [`RewardPair`]s in a compressed row layout (state -> choices -> entries).
//! A [`ScalarModel`] pairs it with a price `rho` and precomputed expected
//! scalar rewards per choice, so one built model serves every probe of the
//! binary search.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, ActionSet, ChainState, MiningParams, RewardPair, StateIndex, StateSpace, ATTACKER_START, HONEST_START};
use crate::policy::Policy;

/// Damping weight kept on the previous iterate.
pub const DAMPING: f64 = 0.01;

pub const DEFAULT_MAX_ITERS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionEntry {
    pub probability: f64,
    pub next: StateIndex,
    pub reward: RewardPair,
}

#[derive(Debug, Clone)]
pub struct MiningModel {
    pub(crate) params: MiningParams,
    pub(crate) space: StateSpace,
    /// `choice_start[s]..choice_start[s+1]` are the choices of state `s`.
    pub(crate) choice_start: Vec<usize>,
    pub(crate) choice_action: Vec<Action>,
    /// `entry_start[c]..entry_start[c+1]` are the entries of choice `c`.
    pub(crate) entry_start: Vec<usize>,
    pub(crate) next: Vec<u32>,
    pub(crate) prob: Vec<f64>,
    pub(crate) reward: Vec<RewardPair>,
}

impl MiningModel {
    /// Assembles a model from per-state rows of `(action, entries)`.
    /// Rows must be given in state-index order.
    pub(crate) fn from_rows(
        params: MiningParams,
        space: StateSpace,
        rows: impl IntoIterator<Item = Vec<(Action, Vec<TransitionEntry>)>>,
    ) -> Self {
        let mut m = MiningModel {
            params,
            space,
            choice_start: vec![0],
            choice_action: Vec::new(),
            entry_start: vec![0],
            next: Vec::new(),
            prob: Vec::new(),
            reward: Vec::new(),
        };
        for row in rows {
            for (action, entries) in row {
                m.choice_action.push(action);
                for e in entries {
                    m.next.push(e.next.0 as u32);
                    m.prob.push(e.probability);
                    m.reward.push(e.reward);
                }
                m.entry_start.push(m.next.len());
            }
            m.choice_start.push(m.choice_action.len());
        }
        debug_assert_eq!(m.choice_start.len(), space.len() + 1);
        m
    }

    pub fn params(&self) -> &MiningParams {
        &self.params
    }

    pub fn truncation(&self) -> u32 {
        self.space.truncation()
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn num_states(&self) -> usize {
        self.space.len()
    }

    pub fn num_choices(&self) -> usize {
        self.choice_action.len()
    }

    pub fn choices(&self, s: StateIndex) -> Range<usize> {
        self.choice_start[s.0]..self.choice_start[s.0 + 1]
    }

    pub fn choice_action(&self, c: usize) -> Action {
        self.choice_action[c]
    }

    pub fn actions_at(&self, s: StateIndex) -> ActionSet {
        self.choices(s).map(|c| self.choice_action[c]).collect()
    }

    pub fn find_choice(&self, s: StateIndex, action: Action) -> Option<usize> {
        self.choices(s).find(|&c| self.choice_action[c] == action)
    }

    pub fn entries(&self, c: usize) -> impl Iterator<Item = TransitionEntry> + '_ {
        (self.entry_start[c]..self.entry_start[c + 1]).map(move |k| TransitionEntry {
            probability: self.prob[k],
            next: StateIndex(self.next[k] as usize),
            reward: self.reward[k],
        })
    }

    /// Expected attacker and honest blocks paid by choice `c`.
    pub fn expected_reward(&self, c: usize) -> (f64, f64) {
        let r = self.entry_start[c]..self.entry_start[c + 1];
        self.prob[r.clone()]
            .iter()
            .zip(&self.reward[r])
            .fold((0.0, 0.0), |(x, y), (p, rw)| {
                (x + p * f64::from(rw.attacker), y + p * f64::from(rw.honest))
            })
    }

    /// Starting distribution: `(1,0,irrelevant)` with probability alpha,
    /// `(0,1,irrelevant)` otherwise.
    pub fn initial_distribution(&self) -> [(StateIndex, f64); 2] {
        let alpha = self.params.alpha();
        [
            (self.space.index_of(ATTACKER_START), alpha),
            (self.space.index_of(HONEST_START), 1.0 - alpha),
        ]
    }

    pub fn state(&self, s: StateIndex) -> ChainState {
        self.space.state_of(s)
    }
}

/// Anything relative value iteration can run on.
pub trait AverageRewardModel {
    fn num_states(&self) -> usize;
    /// State whose relative value is pinned to zero.
    fn reference_state(&self) -> usize;
    fn choices(&self, s: usize) -> Range<usize>;
    fn reward(&self, c: usize) -> f64;
    /// Calls `f(next, probability)` for every successor of choice `c`.
    fn for_each_successor(&self, c: usize, f: impl FnMut(usize, f64));
}

/// A [`MiningModel`] scalarised at price `rho`, with an optional override of
/// the expected reward of each choice (used for over-paying boundaries).
#[derive(Debug, Clone)]
pub struct ScalarModel<'m> {
    model: &'m MiningModel,
    rho: f64,
    rewards: Vec<f64>,
}

impl<'m> ScalarModel<'m> {
    /// Plain scalarisation `w_rho` of every stored reward pair.
    pub fn new(model: &'m MiningModel, rho: f64) -> Self {
        let rewards = (0..model.num_choices())
            .map(|c| {
                let (x, y) = model.expected_reward(c);
                (1.0 - rho) * x - rho * y
            })
            .collect();
        Self { model, rho, rewards }
    }

    /// Replaces the expected scalar reward of the given choices.
    pub(crate) fn with_overrides(mut self, overrides: impl IntoIterator<Item = (usize, f64)>) -> Self {
        for (c, r) in overrides {
            self.rewards[c] = r;
        }
        self
    }

    pub fn model(&self) -> &'m MiningModel {
        self.model
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn choice_rewards(&self) -> &[f64] {
        &self.rewards
    }
}

impl AverageRewardModel for ScalarModel<'_> {
    fn num_states(&self) -> usize {
        self.model.num_states()
    }

    fn reference_state(&self) -> usize {
        self.model.space.index_of(ATTACKER_START).0
    }

    fn choices(&self, s: usize) -> Range<usize> {
        self.model.choice_start[s]..self.model.choice_start[s + 1]
    }

    fn reward(&self, c: usize) -> f64 {
        self.rewards[c]
    }

    #[inline]
    fn for_each_successor(&self, c: usize, mut f: impl FnMut(usize, f64)) {
        let m = self.model;
        for k in m.entry_start[c]..m.entry_start[c + 1] {
            f(m.next[k] as usize, m.prob[k]);
        }
    }
}

/// Raw result of [`relative_value_iteration`].
#[derive(Debug, Clone, PartialEq)]
pub struct RviOutcome {
    pub gain: f64,
    pub span: f64,
    pub iterations: usize,
    /// Greedy choice index per state at the final iterate.
    pub choices: Vec<usize>,
}

/// Damped relative value iteration with reusable scratch space. Keeping the
/// solver alive between calls warm-starts the next solve from the previous
/// relative values, which is what makes a binary search over `rho` cheap.
#[derive(Debug, Clone, Default)]
pub struct RelativeValueIteration {
    values: Vec<f64>,
    backup: Vec<f64>,
}

impl RelativeValueIteration {
    pub fn new() -> Self {
        Self::default()
    }

    /// Iterates until the span of `B(V) - V` drops to `eps`. The gain is the
    /// midpoint of the final `min`/`max` of `B(V) - V`, which bracket the
    /// optimal gain of a unichain model.
    pub fn run<M: AverageRewardModel>(
        &mut self,
        m: &M,
        eps: f64,
        max_iters: usize,
    ) -> Result<RviOutcome> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("solver tolerance must be positive (got {eps})")));
        }
        let n = m.num_states();
        if self.values.len() != n {
            self.values = vec![0.0; n];
        }
        self.backup.resize(n, 0.0);
        let reference = m.reference_state();
        let mut span = f64::INFINITY;
        for iter in 1..=max_iters {
            let (lo, hi) = self.backup_sweep(m);
            span = hi - lo;
            if span <= eps {
                let choices = self.greedy(m);
                return Ok(RviOutcome {
                    gain: 0.5 * (lo + hi),
                    span,
                    iterations: iter,
                    choices,
                });
            }
            let pin = DAMPING * self.values[reference] + (1.0 - DAMPING) * self.backup[reference];
            for (v, b) in self.values.iter_mut().zip(&self.backup) {
                *v = DAMPING * *v + (1.0 - DAMPING) * b - pin;
            }
        }
        Err(Error::NotConverged {
            iterations: max_iters,
            span,
        })
    }

    /// Writes `B(V)` into `backup` and returns the range of `B(V) - V`.
    fn backup_sweep<M: AverageRewardModel>(&mut self, m: &M) -> (f64, f64) {
        let values = &self.values;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..values.len() {
            let mut best = f64::NEG_INFINITY;
            for c in m.choices(s) {
                let q = q_value(m, values, c);
                if q > best {
                    best = q;
                }
            }
            self.backup[s] = best;
            let d = best - values[s];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }

    fn greedy<M: AverageRewardModel>(&self, m: &M) -> Vec<usize> {
        (0..self.values.len())
            .map(|s| {
                let mut best = f64::NEG_INFINITY;
                let mut arg = usize::MAX;
                for c in m.choices(s) {
                    let q = q_value(m, &self.values, c);
                    // strict comparison keeps the lowest action ordinal on ties
                    if q > best {
                        best = q;
                        arg = c;
                    }
                }
                arg
            })
            .collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[inline]
fn q_value<M: AverageRewardModel>(m: &M, values: &[f64], c: usize) -> f64 {
    let mut q = m.reward(c);
    m.for_each_successor(c, |j, p| q += p * values[j]);
    q
}

/// Solver output in domain terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub policy: Policy,
    pub gain: f64,
    pub iterations: usize,
    pub span: f64,
}

#[derive(Serialize, Deserialize)]
struct SolveResultJson {
    gain: f64,
    iterations: usize,
    span: f64,
    policy: Vec<Action>,
}

impl SolveResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&SolveResultJson {
            gain: self.gain,
            iterations: self.iterations,
            span: self.span,
            policy: self.policy.actions().to_vec(),
        })
        .expect("solve result serialises")
    }
}

/// Translates greedy choice indices into a [`Policy`].
pub(crate) fn policy_from_choices(model: &MiningModel, choices: &[usize]) -> Policy {
    let actions = choices.iter().map(|&c| model.choice_action(c)).collect();
    Policy::from_actions(model.truncation(), actions).expect("one choice per state")
}

/// Cold-start solve of a scalarised mining model.
pub fn solve_average_reward(m: &ScalarModel<'_>, eps: f64, max_iters: usize) -> Result<SolveResult> {
    RelativeValueIteration::new().solve(m, eps, max_iters)
}

impl RelativeValueIteration {
    /// [`run`](Self::run) followed by conversion of the greedy choices.
    pub fn solve(&mut self, m: &ScalarModel<'_>, eps: f64, max_iters: usize) -> Result<SolveResult> {
        let out = self.run(m, eps, max_iters)?;
        Ok(SolveResult {
            policy: policy_from_choices(m.model(), &out.choices),
            gain: out.gain,
            iterations: out.iterations,
            span: out.span,
        })
    }
}
