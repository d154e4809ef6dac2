//! Builders that turn the game into [`MiningModel`]s and scalarised
//! truncations of them.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{MiningModel, ScalarModel, TransitionEntry};
use crate::model::{
    feasible_actions, Action, ChainState, MiningParams, StateSpace, ATTACKER_START, HONEST_START,
};
use crate::transitions::outcomes;

/// How the attacker is compensated at the truncation boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMode {
    /// Forced adopt with its ordinary reward; the attacker loses its branch.
    #[default]
    UnderPaying,
    /// Forced adopt paying the expected value of the abandoned race.
    OverPaying(Compensation),
}

/// Which closed form pays the attacker at an `a = T` boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Compensation {
    /// `(1 - rho) beta + ((a - h)/(1 - 2 alpha) + a + h) / 2`: only the
    /// first term is priced.
    #[default]
    Printed,
    /// `(1 - rho)` applied to the whole expected chain length.
    Discounted,
}

/// Honest-mining action removed when testing whether honest mining is optimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThresholdVariant {
    /// No override at `(1,0,irrelevant)`.
    OverrideDisabledAt10,
    /// No adopt at `(0,1,irrelevant)`.
    AdoptDisabledAt01,
}

impl ThresholdVariant {
    pub const BOTH: [ThresholdVariant; 2] = [
        ThresholdVariant::OverrideDisabledAt10,
        ThresholdVariant::AdoptDisabledAt01,
    ];

    pub fn removed(self) -> (ChainState, Action) {
        match self {
            ThresholdVariant::OverrideDisabledAt10 => (ATTACKER_START, Action::Override),
            ThresholdVariant::AdoptDisabledAt01 => (HONEST_START, Action::Adopt),
        }
    }
}

/// The full game on the `T`-truncated grid. Boundary states carry a single
/// adopt choice.
pub fn build_base_model(p: &MiningParams, truncation: u32) -> Result<MiningModel> {
    build_with(p, truncation, |_, _| true)
}

/// Like [`build_base_model`] but keeps only interior actions for which
/// `keep(state, action)` holds.
pub fn build_with(
    p: &MiningParams,
    truncation: u32,
    keep: impl Fn(ChainState, Action) -> bool,
) -> Result<MiningModel> {
    let space = StateSpace::new(truncation)?;
    let mut rows = Vec::with_capacity(space.len());
    for s in space.states() {
        let actions: Vec<Action> = if s.is_boundary(truncation) {
            vec![Action::Adopt]
        } else {
            feasible_actions(s, p).iter().filter(|&a| keep(s, a)).collect()
        };
        if actions.is_empty() {
            return Err(Error::InvalidParameter(format!("every action removed at {s}")));
        }
        let row = actions
            .into_iter()
            .map(|action| {
                let entries = outcomes(s, action, p)
                    .into_iter()
                    .map(|o| TransitionEntry {
                        probability: o.probability,
                        next: space.index_of(o.next),
                        reward: o.reward,
                    })
                    .collect();
                (action, entries)
            })
            .collect();
        rows.push(row);
    }
    Ok(MiningModel::from_rows(*p, space, rows))
}

/// Base model with one honest-mining action removed.
pub fn build_honest_disabled(
    p: &MiningParams,
    truncation: u32,
    variant: ThresholdVariant,
) -> Result<MiningModel> {
    let (state, action) = variant.removed();
    build_with(p, truncation, |s, a| !(s == state && a == action))
}

/// Scalar terminal reward of the over-paying truncation at a boundary state.
///
/// With `beta = alpha (1 - alpha) / (1 - 2 alpha)^2` and `x = alpha / (1 - alpha)`:
/// when the attacker is at the boundary (`a = T > h`) the reward is
/// `(1 - rho) beta + ((a - h)/(1 - 2 alpha) + a + h) / 2`; when the honest
/// branch is (`h = T >= a`) the attacker catches up with probability
/// `x^(h-a)` and is then paid as if it led by `h - a`, otherwise it adopts.
pub fn overpaying_terminal_reward(
    a: u32,
    h: u32,
    rho: f64,
    alpha: f64,
    compensation: Compensation,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let q = 1.0 - 2.0 * alpha;
    let beta = alpha * (1.0 - alpha) / (q * q);
    let (af, hf) = (f64::from(a), f64::from(h));
    if a > h {
        let length = 0.5 * ((af - hf) / q + af + hf);
        Ok(match compensation {
            Compensation::Printed => (1.0 - rho) * beta + length,
            Compensation::Discounted => (1.0 - rho) * (beta + length),
        })
    } else {
        let lead = h - a;
        let catch_up = (alpha / (1.0 - alpha)).powi(lead as i32);
        Ok((1.0 - catch_up) * (-rho * hf) + catch_up * (1.0 - rho) * (beta + f64::from(lead) / q))
    }
}

/// Scalarises `m` at price `rho`, pricing boundary states per `mode`.
pub fn build_truncated(m: &MiningModel, mode: BoundaryMode, rho: f64) -> Result<ScalarModel<'_>> {
    let base = ScalarModel::new(m, rho);
    let BoundaryMode::OverPaying(compensation) = mode else {
        return Ok(base);
    };
    let t = m.truncation();
    let alpha = m.params().alpha();
    let mut overrides = Vec::new();
    for (i, s) in m.space().states().enumerate() {
        if s.is_boundary(t) {
            let r = overpaying_terminal_reward(s.a, s.h, rho, alpha, compensation)?;
            for c in m.choices(crate::model::StateIndex(i)) {
                overrides.push((c, r));
            }
        }
    }
    Ok(base.with_overrides(overrides))
}

/// Text dump with one line per (state, choice), for diffing models.
pub fn dump(m: &MiningModel) -> String {
    let mut out = String::new();
    for (i, s) in m.space().states().enumerate() {
        for c in m.choices(crate::model::StateIndex(i)) {
            let _ = write!(out, "{},{},{} | {} ->", s.a, s.h, s.fork, m.choice_action(c));
            for e in m.entries(c) {
                let n = m.state(e.next);
                let _ = write!(
                    out,
                    " [{}:({},{},{}):{},{}]",
                    e.probability, n.a, n.h, n.fork, e.reward.attacker, e.reward.honest
                );
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ActionSet, Fork, RewardPair, StateIndex, Variant};

    fn idx(m: &MiningModel, a: u32, h: u32, f: Fork) -> StateIndex {
        m.space().index_of(ChainState::new(a, h, f))
    }

    #[test]
    fn adopt_row_matches_table() {
        let p = MiningParams::standard(0.4, 0.5).unwrap();
        let m = build_base_model(&p, 6).unwrap();
        let c = m.find_choice(idx(&m, 2, 3, Fork::Relevant), Action::Adopt).unwrap();
        let entries: Vec<_> = m.entries(c).collect();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].next, idx(&m, 1, 0, Fork::Irrelevant));
        assert!((entries[0].probability - 0.4).abs() < 1e-15);
        assert_eq!(entries[1].next, idx(&m, 0, 1, Fork::Irrelevant));
        assert!(entries.iter().all(|e| e.reward == RewardPair::new(0, 3)));
    }

    #[test]
    fn boundary_has_single_adopt() {
        let p = MiningParams::standard(0.3, 0.5).unwrap();
        let m = build_base_model(&p, 5).unwrap();
        for (i, s) in m.space().states().enumerate() {
            let set = m.actions_at(StateIndex(i));
            if s.is_boundary(5) {
                assert_eq!(set, ActionSet::only(Action::Adopt));
            } else {
                assert_eq!(set, feasible_actions(s, &p));
            }
        }
    }

    #[test]
    fn a_side_terminal_reward() {
        let r = overpaying_terminal_reward(10, 4, 0.5, 0.4, Compensation::Printed).unwrap();
        assert!((r - 25.0).abs() < 1e-12);
        let r = overpaying_terminal_reward(5, 3, 0.5, 0.4, Compensation::Printed).unwrap();
        assert!((r - 12.0).abs() < 1e-12);
        // discounted: 0.5 * (6 + 22)
        let r = overpaying_terminal_reward(10, 4, 0.5, 0.4, Compensation::Discounted).unwrap();
        assert!((r - 14.0).abs() < 1e-12);
    }

    #[test]
    fn h_side_terminal_reward() {
        let r = overpaying_terminal_reward(4, 6, 0.4, 0.3, Compensation::Printed).unwrap();
        assert!((r - (-1.263_520_4)).abs() < 1e-7, "{r}");
        let beta = 0.3 * 0.7 / (0.4 * 0.4);
        let r = overpaying_terminal_reward(7, 7, 0.25, 0.3, Compensation::Printed).unwrap();
        assert!((r - 0.75 * beta).abs() < 1e-12);
        assert!(overpaying_terminal_reward(4, 6, 0.4, 0.5, Compensation::Printed).is_err());
    }

    #[test]
    fn truncated_rewards() {
        let p = MiningParams::standard(0.4, 0.0).unwrap();
        let m = build_base_model(&p, 5).unwrap();
        let under = build_truncated(&m, BoundaryMode::UnderPaying, 0.5).unwrap();
        let c = m.choices(idx(&m, 3, 5, Fork::Relevant)).start;
        assert!((under.choice_rewards()[c] + 2.5).abs() < 1e-12);

        let over = build_truncated(&m, BoundaryMode::OverPaying(Compensation::Printed), 0.5).unwrap();
        let c = m.choices(idx(&m, 5, 3, Fork::Irrelevant)).start;
        assert!((over.choice_rewards()[c] - 12.0).abs() < 1e-12);

        let one = build_truncated(&m, BoundaryMode::UnderPaying, 1.0).unwrap();
        let c = m.find_choice(idx(&m, 3, 1, Fork::Irrelevant), Action::Override).unwrap();
        assert_eq!(one.choice_rewards()[c], 0.0);
    }

    #[test]
    fn honest_disabled_is_local() {
        let p = MiningParams::standard(0.3, 0.5).unwrap();
        let base = build_base_model(&p, 6).unwrap();
        for variant in ThresholdVariant::BOTH {
            let m = build_honest_disabled(&p, 6, variant).unwrap();
            let (state, removed) = variant.removed();
            for (i, s) in base.space().states().enumerate() {
                let mut expect = base.actions_at(StateIndex(i));
                if s == state {
                    expect.remove(removed);
                }
                assert_eq!(m.actions_at(StateIndex(i)), expect, "{s}");
                for a in expect.iter() {
                    let x: Vec<_> = base.entries(base.find_choice(StateIndex(i), a).unwrap()).collect();
                    let y: Vec<_> = m.entries(m.find_choice(StateIndex(i), a).unwrap()).collect();
                    assert_eq!(x, y);
                }
            }
        }
        let m = build_honest_disabled(&p, 6, ThresholdVariant::AdoptDisabledAt01).unwrap();
        assert_eq!(m.actions_at(m.space().index_of(HONEST_START)), ActionSet::only(Action::Wait));
    }

    #[test]
    fn uniform_restricted_to_relevant_equals_standard_half() {
        let std = MiningParams::standard(0.35, 0.5).unwrap();
        let uni = MiningParams::new(0.35, 0.5, Variant::UniformTieBreak).unwrap();
        let a = build_base_model(&std, 8).unwrap();
        let b = build_with(&uni, 8, |s, act| act != Action::Match || s.fork == Fork::Relevant).unwrap();
        assert_eq!(dump(&a), dump(&b));
    }

    #[test]
    fn dump_format() {
        let p = MiningParams::standard(0.25, 0.0).unwrap();
        let m = build_base_model(&p, 2).unwrap();
        let text = dump(&m);
        assert!(text.contains(
            "1,0,irrelevant | override -> [0.25:(1,0,irrelevant):1,0] [0.75:(0,1,relevant):1,0]"
        ));
    }
}
