//! Deterministic stationary policies over a truncated grid.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    feasible_actions, honest_policy, sm1_policy, Action, ChainState, Fork, MiningParams, StateSpace,
    ATTACKER_START, HONEST_START,
};
use crate::transitions::outcomes;

/// Total map from grid states to actions, stored in state-index order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    truncation: u32,
    actions: Vec<Action>,
}

impl Policy {
    pub fn from_actions(truncation: u32, actions: Vec<Action>) -> Result<Self> {
        let space = StateSpace::new(truncation)?;
        if actions.len() != space.len() {
            return Err(Error::InvalidParameter(format!(
                "policy for truncation {truncation} needs {} actions, got {}",
                space.len(),
                actions.len()
            )));
        }
        Ok(Self {
            truncation,
            actions,
        })
    }

    /// Builds a policy from a rule; boundary states always adopt.
    pub fn from_fn(truncation: u32, rule: impl Fn(ChainState) -> Action) -> Result<Self> {
        let space = StateSpace::new(truncation)?;
        let actions = space
            .states()
            .map(|s| if s.is_boundary(truncation) { Action::Adopt } else { rule(s) })
            .collect();
        Ok(Self {
            truncation,
            actions,
        })
    }

    pub fn honest(truncation: u32) -> Result<Self> {
        Self::from_fn(truncation, honest_policy)
    }

    pub fn sm1(truncation: u32) -> Result<Self> {
        Self::from_fn(truncation, sm1_policy)
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn space(&self) -> StateSpace {
        StateSpace::new(self.truncation).expect("validated at construction")
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    /// Action taken at `s`; the truncation boundary forces adopt.
    pub fn action(&self, s: ChainState) -> Action {
        if s.is_boundary(self.truncation) {
            Action::Adopt
        } else {
            self.actions[self.space().index_of(s).0]
        }
    }

    /// Forward closure of the two starting states under this policy.
    /// Returns a membership mask in state-index order.
    pub fn reachable(&self, params: &MiningParams) -> Result<Vec<bool>> {
        let space = self.space();
        let mut seen = vec![false; space.len()];
        let mut queue = VecDeque::new();
        for start in [ATTACKER_START, HONEST_START] {
            let i = space.index_of(start).0;
            if !seen[i] {
                seen[i] = true;
                queue.push_back(start);
            }
        }
        while let Some(s) = queue.pop_front() {
            let action = self.action(s);
            if !s.is_boundary(self.truncation) && !feasible_actions(s, params).contains(action) {
                return Err(Error::InfeasibleAction { state: s, action });
            }
            for o in outcomes(s, action, params) {
                let j = space.index_of(o.next).0;
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(o.next);
                }
            }
        }
        Ok(seen)
    }

    /// Text table in the usual layout: rows are `a`, columns are `h`, each cell
    /// holds three letters for the irrelevant, relevant and active forks, with
    /// `*` marking states the policy never reaches.
    pub fn render_table(&self, params: &MiningParams, view: u32) -> Result<String> {
        let grid = self.letter_grid(params, view)?;
        let view = view.min(self.truncation);
        let mut out = String::new();
        let _ = write!(out, "a\\h");
        for h in 0..=view {
            let _ = write!(out, " {h:>3}");
        }
        out.push('\n');
        for a in 0..=view {
            let _ = write!(out, "{a:>3}");
            for h in 0..=view {
                let cell: String = grid[a as usize][h as usize].iter().collect();
                let _ = write!(out, " {cell}");
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// The `(view+1) x (view+1)` grid of three-letter cells behind
    /// [`render_table`](Self::render_table).
    pub fn letter_grid(&self, params: &MiningParams, view: u32) -> Result<Vec<Vec<[char; 3]>>> {
        let reachable = self.reachable(params)?;
        let space = self.space();
        let view = view.min(self.truncation);
        let grid = (0..=view)
            .map(|a| {
                (0..=view)
                    .map(|h| {
                        let mut cell = ['*'; 3];
                        for fork in Fork::ALL {
                            let s = ChainState::new(a, h, fork);
                            if reachable[space.index_of(s).0] {
                                cell[fork.ordinal()] = self.action(s).letter();
                            }
                        }
                        cell
                    })
                    .collect()
            })
            .collect();
        Ok(grid)
    }
}

/// On-disk policy document: the action table plus the parameters it was
/// computed for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<MiningParams>,
    #[serde(flatten)]
    pub policy: Policy,
}

impl PolicyFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("policy serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PolicyFile = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("malformed policy file: {e}")))?;
        // re-check the length invariant that serde bypasses
        Policy::from_actions(file.policy.truncation, file.policy.actions.clone())?;
        Ok(file)
    }
}
