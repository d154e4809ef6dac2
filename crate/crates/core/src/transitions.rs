//! The one-step dynamics of the game.
//!
//! Both the MDP builders and the Monte Carlo simulator go through [`outcomes`],
//! so the two can never disagree about probabilities, successor states or
//! accepted-block rewards.

use arrayvec::ArrayVec;

use crate::model::{Action, ChainState, Fork, MiningParams, RewardPair, ATTACKER_START, HONEST_START};

/// Which block was created during the round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    /// The attacker found the block.
    Attacker,
    /// An honest miner found the block on the honest branch.
    Honest,
    /// An honest miner found the block on top of the attacker's published
    /// branch during a race.
    HonestOnAttacker,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub event: Event,
    pub probability: f64,
    pub next: ChainState,
    pub reward: RewardPair,
}

pub type Outcomes = ArrayVec<Outcome, 3>;

/// Whether `action` at `s` starts or continues a block race, i.e. whether an
/// honest block is split between the two branches.
pub fn is_race(s: ChainState, action: Action) -> bool {
    match action {
        Action::Match => true,
        Action::Wait => s.fork == Fork::Active && s.a >= s.h,
        _ => false,
    }
}

/// Successor distribution of `action` at `s`. Zero-probability entries are
/// omitted. Feasibility is not checked here.
pub fn outcomes(s: ChainState, action: Action, p: &MiningParams) -> Outcomes {
    let alpha = p.alpha();
    let mut out = Outcomes::new();
    let mut push = |event, probability: f64, next, reward| {
        if probability > 0.0 {
            out.push(Outcome {
                event,
                probability,
                next,
                reward,
            });
        }
    };
    let (a, h) = (s.a, s.h);
    match action {
        Action::Adopt => {
            let r = RewardPair::new(0, h);
            push(Event::Attacker, alpha, ATTACKER_START, r);
            push(Event::Honest, 1.0 - alpha, HONEST_START, r);
        }
        Action::Override => {
            debug_assert!(a > h, "override at {s}");
            let r = RewardPair::new(h + 1, 0);
            push(Event::Attacker, alpha, ChainState::new(a - h, 0, Fork::Irrelevant), r);
            push(
                Event::Honest,
                1.0 - alpha,
                ChainState::new(a - h - 1, 1, Fork::Relevant),
                r,
            );
        }
        Action::Match | Action::Wait if is_race(s, action) => {
            let g = p.race_gamma();
            push(
                Event::Attacker,
                alpha,
                ChainState::new(a + 1, h, Fork::Active),
                RewardPair::ZERO,
            );
            push(
                Event::HonestOnAttacker,
                g * (1.0 - alpha),
                ChainState::new(a - h, 1, Fork::Relevant),
                RewardPair::new(h, 0),
            );
            push(
                Event::Honest,
                (1.0 - g) * (1.0 - alpha),
                ChainState::new(a, h + 1, Fork::Relevant),
                RewardPair::ZERO,
            );
        }
        Action::Match | Action::Wait => {
            push(
                Event::Attacker,
                alpha,
                ChainState::new(a + 1, h, Fork::Irrelevant),
                RewardPair::ZERO,
            );
            push(
                Event::Honest,
                1.0 - alpha,
                ChainState::new(a, h + 1, Fork::Relevant),
                RewardPair::ZERO,
            );
        }
    }
    out
}
