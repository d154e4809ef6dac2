//! Exact long-run evaluation of a fixed policy.
//!
//! Every adopt restarts the process from a fresh draw of the initial state, so
//! the chain induced by a policy is regenerative: long-run rates equal
//! expected reward per epoch over expected epoch length, an epoch running from
//! the initial draw up to and including the next adopt.
//!
//! The per-epoch expectations solve `x = r + Q x`. Under any policy a step
//! either climbs one level (`a + h` grows by one), adopts, or lands on one of a
//! small set of "hub" states (`(x,0,irrelevant)`, `(x,1,relevant)`, the two
//! starting states). Sweeping levels from the top down expresses every
//! non-hub value as an affine function of the hub values, which leaves a
//! dense system of a few hundred unknowns.

use arrayvec::ArrayVec;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{MiningModel, ScalarModel};
use crate::model::{Action, ChainState, Fork, StateIndex, ATTACKER_START, HONEST_START};
use crate::policy::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Attacker blocks accepted per round.
    pub attacker_rate: f64,
    /// Honest blocks accepted per round.
    pub honest_rate: f64,
    /// Relative revenue `attacker / (attacker + honest)`.
    pub rev: f64,
    /// Expected rounds between consecutive adopts.
    pub epoch_length: f64,
    /// Grid states visited with positive probability.
    pub reachable_states: usize,
}

/// What happens once the process reaches the truncation boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryRule {
    /// Adopt, exactly as in the truncated model.
    #[default]
    ForcedAdopt,
    /// Leave the grid and continue with the classic withholding strategy:
    /// with the attacker ahead, wait until the lead shrinks to one block and
    /// override; otherwise adopt. The continuation is summed in closed form,
    /// so evaluating that strategy this way gives its untruncated revenue.
    Sm1Tail,
}

/// Long-run attacker and honest rates and relative revenue of `pi` on `m`.
pub fn evaluate_policy_exact(m: &MiningModel, pi: &Policy) -> Result<Evaluation> {
    evaluate_policy_with(m, pi, BoundaryRule::ForcedAdopt)
}

/// [`evaluate_policy_exact`] with a choice of boundary behaviour.
pub fn evaluate_policy_with(m: &MiningModel, pi: &Policy, rule: BoundaryRule) -> Result<Evaluation> {
    let chain = induced_chain(m, pi, rule, |c| {
        let (x, y) = m.expected_reward(c);
        [x, y]
    })?;
    let [att, hon, len] = epoch_totals(m, &chain)?;
    if !(att + hon > 0.0) {
        return Err(Error::Degenerate("no blocks accepted in an epoch".into()));
    }
    Ok(Evaluation {
        attacker_rate: att / len,
        honest_rate: hon / len,
        rev: att / (att + hon),
        epoch_length: len,
        reachable_states: chain.reachable.iter().filter(|x| **x).count(),
    })
}

/// Average scalar reward per round of `pi` on a scalarised model, including
/// over-paying terminal rewards.
pub fn evaluate_scalar_gain(m: &ScalarModel<'_>, pi: &Policy) -> Result<f64> {
    let rewards = m.choice_rewards();
    let chain = induced_chain(m.model(), pi, BoundaryRule::ForcedAdopt, |c| [rewards[c], 0.0])?;
    let [r, _, len] = epoch_totals(m.model(), &chain)?;
    Ok(r / len)
}

/// Reachability mask of `pi` on `m`, using the model's own action sets.
pub fn reachable_states(m: &MiningModel, pi: &Policy) -> Result<Vec<bool>> {
    Ok(induced_chain(m, pi, BoundaryRule::ForcedAdopt, |_| [0.0; 2])?.reachable)
}

/// One state of the induced chain: expected rewards on two channels and
/// rounds spent until the next state, then the successors. No successors
/// means the epoch ends here.
#[derive(Debug, Clone, Default)]
struct Row {
    reward: [f64; 2],
    rounds: f64,
    next: ArrayVec<(usize, f64), 3>,
}

struct InducedChain {
    reachable: Vec<bool>,
    rows: Vec<Row>,
}

const NONE: u32 = u32::MAX;

/// Forward closure from the starting states with the row used at each
/// reachable state.
fn induced_chain(
    m: &MiningModel,
    pi: &Policy,
    rule: BoundaryRule,
    reward: impl Fn(usize) -> [f64; 2],
) -> Result<InducedChain> {
    if pi.truncation() != m.truncation() {
        return Err(Error::TruncationMismatch {
            policy: pi.truncation(),
            model: m.truncation(),
        });
    }
    let t = m.truncation();
    let n = m.num_states();
    let mut seen = vec![false; n];
    let mut rows = vec![Row::default(); n];
    let mut stack: Vec<usize> = m.initial_distribution().iter().map(|(s, _)| s.0).collect();
    for &s in &stack {
        seen[s] = true;
    }
    while let Some(s) = stack.pop() {
        let state = m.state(StateIndex(s));
        let row = if rule == BoundaryRule::Sm1Tail && state.a == t && state.a > state.h {
            sm1_tail_row(m, state.a, state.h)
        } else {
            let action = pi.action(state);
            let c = m
                .find_choice(StateIndex(s), action)
                .ok_or(Error::InfeasibleAction { state, action })?;
            let mut row = Row {
                reward: reward(c),
                rounds: 1.0,
                next: ArrayVec::new(),
            };
            if action != Action::Adopt {
                row.next.extend(m.entries(c).map(|e| (e.next.0, e.probability)));
            }
            row
        };
        for &(j, _) in &row.next {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
        rows[s] = row;
    }
    Ok(InducedChain {
        reachable: seen,
        rows,
    })
}

/// Closed-form continuation from `(a, h)` with lead `d = a - h >= 1`: the
/// lead performs a walk with up-probability alpha until it first hits one,
/// taking `(d - 1)/(1 - 2 alpha)` rounds on average, then the attacker
/// overrides with all of its blocks.
fn sm1_tail_row(m: &MiningModel, a: u32, h: u32) -> Row {
    let alpha = m.params().alpha();
    let rounds_to_lead_one = f64::from(a - h - 1) / (1.0 - 2.0 * alpha);
    let space = m.space();
    let mut next = ArrayVec::new();
    next.push((space.index_of(ATTACKER_START).0, alpha));
    next.push((space.index_of(ChainState::new(0, 1, Fork::Relevant)).0, 1.0 - alpha));
    Row {
        reward: [f64::from(a) + alpha * rounds_to_lead_one, 0.0],
        rounds: rounds_to_lead_one + 1.0,
        next,
    }
}

fn epoch_totals(m: &MiningModel, chain: &InducedChain) -> Result<[f64; 3]> {
    let InducedChain { reachable: seen, rows } = chain;
    let space = m.space();
    let level = |s: usize| {
        let st = space.state_of(StateIndex(s));
        (st.a + st.h) as usize
    };

    let mut hub = vec![NONE; seen.len()];
    let mut nh = 0usize;
    let mut mark = |s: usize, hub: &mut Vec<u32>| {
        if hub[s] == NONE {
            hub[s] = nh as u32;
            nh += 1;
        }
    };
    for start in [ATTACKER_START, HONEST_START] {
        mark(space.index_of(start).0, &mut hub);
    }
    let max_level = 2 * m.truncation() as usize;
    let mut by_level = vec![Vec::new(); max_level + 1];
    for s in (0..seen.len()).filter(|&s| seen[s]) {
        by_level[level(s)].push(s);
        for &(t, _) in &rows[s].next {
            if level(t) != level(s) + 1 {
                mark(t, &mut hub);
            }
        }
    }

    // affine expressions of the level above: value = konst + coef . y_hub
    let mut slot = vec![NONE; seen.len()];
    let mut upper_coef: Vec<f64> = Vec::new();
    let mut upper_const: Vec<[f64; 3]> = Vec::new();
    let mut cur_coef: Vec<f64> = Vec::new();
    let mut cur_const: Vec<[f64; 3]> = Vec::new();
    let mut a = DMatrix::<f64>::identity(nh, nh);
    let mut b = DMatrix::<f64>::zeros(nh, 3);
    let mut coef = vec![0.0; nh];

    for states in by_level.iter().rev() {
        cur_coef.clear();
        cur_const.clear();
        for &s in states {
            let row = &rows[s];
            let mut k = [row.reward[0], row.reward[1], row.rounds];
            coef.iter_mut().for_each(|x| *x = 0.0);
            for &(t, p) in &row.next {
                if hub[t] != NONE {
                    coef[hub[t] as usize] += p;
                } else {
                    let j = slot[t] as usize;
                    debug_assert!(slot[t] != NONE && level(t) == level(s) + 1);
                    for (x, u) in coef.iter_mut().zip(&upper_coef[j * nh..(j + 1) * nh]) {
                        *x += p * u;
                    }
                    for (kk, u) in k.iter_mut().zip(&upper_const[j]) {
                        *kk += p * u;
                    }
                }
            }
            if hub[s] != NONE {
                let i = hub[s] as usize;
                for (col, x) in coef.iter().enumerate() {
                    a[(i, col)] -= x;
                }
                for (col, kk) in k.iter().enumerate() {
                    b[(i, col)] = *kk;
                }
            } else {
                slot[s] = cur_const.len() as u32;
                cur_coef.extend_from_slice(&coef);
                cur_const.push(k);
            }
        }
        std::mem::swap(&mut upper_coef, &mut cur_coef);
        std::mem::swap(&mut upper_const, &mut cur_const);
    }

    let y = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Degenerate("epoch system is singular".into()))?;
    let mut expectations = [0.0; 3];
    for (s, p) in m.initial_distribution() {
        let i = hub[s.0] as usize;
        for (col, e) in expectations.iter_mut().enumerate() {
            *e += p * y[(i, col)];
        }
    }
    Ok(expectations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_base_model, build_truncated, BoundaryMode, Compensation};
    use crate::model::{MiningParams, Variant};

    /// Long-run rates by iterating the distribution of the induced chain,
    /// lazily to kill periodicity.
    fn power_iteration(m: &MiningModel, pi: &Policy, rho: Option<&ScalarModel>) -> (f64, f64, f64) {
        let n = m.num_states();
        let mut dist = vec![0.0; n];
        for (s, p) in m.initial_distribution() {
            dist[s.0] = p;
        }
        let choice: Vec<usize> = (0..n)
            .map(|s| {
                let st = m.state(StateIndex(s));
                m.find_choice(StateIndex(s), pi.action(st)).unwrap_or(usize::MAX)
            })
            .collect();
        for _ in 0..200_000 {
            let mut next = vec![0.0; n];
            for s in 0..n {
                if dist[s] == 0.0 {
                    continue;
                }
                next[s] += 0.5 * dist[s];
                for e in m.entries(choice[s]) {
                    next[e.next.0] += 0.5 * dist[s] * e.probability;
                }
            }
            let delta: f64 = next.iter().zip(&dist).map(|(x, y)| (x - y).abs()).sum();
            dist = next;
            if delta < 1e-15 {
                break;
            }
        }
        let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
        for s in 0..n {
            if dist[s] > 0.0 {
                let (rx, ry) = m.expected_reward(choice[s]);
                x += dist[s] * rx;
                y += dist[s] * ry;
                if let Some(sm) = rho {
                    z += dist[s] * sm.choice_rewards()[choice[s]];
                }
            }
        }
        (x, y, z)
    }

    #[test]
    fn honest_revenue_is_alpha() {
        for &(alpha, gamma) in &[(0.1, 0.0), (0.3, 0.7), (0.45, 1.0)] {
            let p = MiningParams::standard(alpha, gamma).unwrap();
            let m = build_base_model(&p, 20).unwrap();
            let ev = evaluate_policy_exact(&m, &Policy::honest(20).unwrap()).unwrap();
            assert!((ev.rev - alpha).abs() < 1e-12);
            assert!((ev.attacker_rate - alpha).abs() < 1e-12);
            assert_eq!(ev.reachable_states, 3);
        }
    }

    #[test]
    fn matches_power_iteration() {
        for variant in [Variant::Standard, Variant::UniformTieBreak] {
            for &(alpha, gamma) in &[(0.2, 0.3), (0.35, 0.0), (0.45, 0.9)] {
                let p = MiningParams::new(alpha, gamma, variant).unwrap();
                let t = 12;
                let m = build_base_model(&p, t).unwrap();
                for pi in [Policy::sm1(t).unwrap(), Policy::honest(t).unwrap()] {
                    let ev = evaluate_policy_exact(&m, &pi).unwrap();
                    let (x, y, _) = power_iteration(&m, &pi, None);
                    assert!((ev.attacker_rate - x).abs() < 1e-9, "{} vs {x}", ev.attacker_rate);
                    assert!((ev.honest_rate - y).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn scalar_gain_matches_power_iteration_on_overpaying() {
        let p = MiningParams::standard(0.4, 0.5).unwrap();
        let t = 10;
        let m = build_base_model(&p, t).unwrap();
        // a greedy policy that lingers near the boundary
        let pi = Policy::from_fn(t, |s| {
            if s.h > s.a + 2 {
                Action::Adopt
            } else {
                Action::Wait
            }
        })
        .unwrap();
        let sm = build_truncated(&m, BoundaryMode::OverPaying(Compensation::Printed), 0.45).unwrap();
        let g = evaluate_scalar_gain(&sm, &pi).unwrap();
        let (_, _, z) = power_iteration(&m, &pi, Some(&sm));
        assert!((g - z).abs() < 1e-9, "{g} vs {z}");
    }

    #[test]
    fn rejects_infeasible_and_mismatched() {
        let p = MiningParams::standard(0.3, 0.0).unwrap();
        let m = build_base_model(&p, 6).unwrap();
        let pi = Policy::from_fn(6, |s| if s.h > s.a { Action::Match } else { Action::Wait }).unwrap();
        let err = evaluate_policy_exact(&m, &pi).unwrap_err();
        assert!(matches!(err, Error::InfeasibleAction { action: Action::Match, .. }));
        let err = evaluate_policy_exact(&m, &Policy::honest(7).unwrap()).unwrap_err();
        assert_eq!(err, Error::TruncationMismatch { policy: 7, model: 6 });
    }

    /// Closed-form long-run revenue of the classic withholding strategy.
    fn sm1_closed_form(alpha: f64, gamma: f64) -> f64 {
        let num = alpha * (1.0 - alpha).powi(2) * (4.0 * alpha + gamma * (1.0 - 2.0 * alpha)) - alpha.powi(3);
        num / (1.0 - alpha * (1.0 + (2.0 - alpha) * alpha))
    }

    #[test]
    fn sm1_tail_gives_untruncated_revenue() {
        for &(alpha, gamma) in &[(0.2, 0.5), (0.35, 0.0), (0.45, 0.0), (0.475, 0.0), (0.4, 1.0)] {
            let p = MiningParams::standard(alpha, gamma).unwrap();
            for t in [5, 30] {
                let m = build_base_model(&p, t).unwrap();
                let ev = evaluate_policy_with(&m, &Policy::sm1(t).unwrap(), BoundaryRule::Sm1Tail).unwrap();
                let want = sm1_closed_form(alpha, gamma);
                assert!((ev.rev - want).abs() < 1e-10, "{alpha} {gamma} {t}: {} vs {want}", ev.rev);
            }
        }
    }

    #[test]
    fn sm1_at_one_third_is_one_third() {
        let p = MiningParams::standard(1.0 / 3.0, 0.0).unwrap();
        let m = build_base_model(&p, 95).unwrap();
        let ev = evaluate_policy_exact(&m, &Policy::sm1(95).unwrap()).unwrap();
        assert!((ev.rev - 1.0 / 3.0).abs() < 1e-6, "{}", ev.rev);
    }
}
