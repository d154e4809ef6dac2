//! Structural diagnostics for built models.

use serde::{Deserialize, Serialize};

use crate::mdp::MiningModel;
use crate::model::{feasible_actions, Action, ChainState, Fork, RewardPair, StateIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// First offending (state, action) or a summary.
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    /// States reachable from the starting states under some sequence of
    /// feasible actions.
    pub reachable_states: usize,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const NORMALIZATION_TOL: f64 = 1e-12;

pub fn validate_model(m: &MiningModel) -> ValidationReport {
    let t = m.truncation();
    let n = m.num_states();
    let mut normalization = None;
    let mut positivity = None;
    let mut in_grid = None;
    let mut reward_signs = None;
    let mut boundary = None;
    let mut feasibility = None;

    for i in 0..n {
        let s = m.state(StateIndex(i));
        let choices = m.choices(StateIndex(i));
        if s.is_boundary(t) {
            if choices.len() != 1 || m.choice_action(choices.start) != Action::Adopt {
                boundary.get_or_insert_with(|| format!("{s} carries {:?}", m.actions_at(StateIndex(i))));
            }
        } else {
            let allowed = feasible_actions(s, m.params());
            if let Some(c) = choices.clone().find(|&c| !allowed.contains(m.choice_action(c))) {
                feasibility.get_or_insert_with(|| format!("{s} {}", m.choice_action(c)));
            }
        }
        for c in choices {
            let action = m.choice_action(c);
            let mut total = 0.0;
            for k in m.entry_start[c]..m.entry_start[c + 1] {
                let p = m.prob[k];
                total += p;
                if !(p > 0.0 && p <= 1.0) {
                    positivity.get_or_insert_with(|| format!("{s} {action}: probability {p}"));
                }
                let next = m.next[k] as usize;
                if next >= n {
                    in_grid.get_or_insert_with(|| format!("{s} {action}: successor index {next}"));
                    continue;
                }
                if !reward_allowed(s, action, m.state(StateIndex(next)), m.reward[k]) {
                    reward_signs.get_or_insert_with(|| {
                        format!("{s} {action}: reward {:?}", m.reward[k])
                    });
                }
            }
            if (total - 1.0).abs() > NORMALIZATION_TOL {
                normalization.get_or_insert_with(|| format!("{s} {action}: probabilities sum to {total}"));
            }
        }
    }

    let reachable_states = if in_grid.is_none() {
        reachable_under_any_action(m)
    } else {
        0
    };

    let check = |name: &str, failure: Option<String>, ok: String| Check {
        name: name.to_string(),
        passed: failure.is_none(),
        detail: failure.unwrap_or(ok),
    };
    ValidationReport {
        checks: vec![
            check("normalization", normalization, format!("{} choices sum to 1", m.num_choices())),
            check("positive-probabilities", positivity, "all entries in (0, 1]".into()),
            check("successors-in-grid", in_grid, "no escapes past the truncation".into()),
            check("reward-signs", reward_signs, "rewards follow the transition table".into()),
            check("boundary-restriction", boundary, "boundary states adopt only".into()),
            check("feasibility", feasibility, "interior actions are feasible".into()),
            Check {
                name: "reachability".into(),
                passed: reachable_states > 0,
                detail: format!("{reachable_states} states reachable"),
            },
        ],
        reachable_states,
    }
}

/// Which rewards a transition may carry: attacker blocks on overrides
/// (`h + 1`) and on won races (`h`), honest blocks on adopts (`h`).
fn reward_allowed(s: ChainState, action: Action, next: ChainState, r: RewardPair) -> bool {
    match action {
        Action::Adopt => r == RewardPair::new(0, s.h),
        Action::Override => r == RewardPair::new(s.h + 1, 0),
        Action::Match | Action::Wait => {
            let won_race = s.a >= s.h
                && next == ChainState::new(s.a - s.h, 1, Fork::Relevant)
                && crate::transitions::is_race(s, action);
            r == RewardPair::ZERO || (won_race && r == RewardPair::new(s.h, 0))
        }
    }
}

fn reachable_under_any_action(m: &MiningModel) -> usize {
    let mut seen = vec![false; m.num_states()];
    let mut stack: Vec<usize> = m.initial_distribution().iter().map(|(s, _)| s.0).collect();
    for &s in &stack {
        seen[s] = true;
    }
    let mut count = stack.len();
    while let Some(s) = stack.pop() {
        for c in m.choices(StateIndex(s)) {
            for e in m.entries(c) {
                if !seen[e.next.0] {
                    seen[e.next.0] = true;
                    count += 1;
                    stack.push(e.next.0);
                }
            }
        }
    }
    count
}
