//! Domain types of the block-withholding game: parameters, chain states,
//! actions and the two reference policies.
//!
//! A state `(a, h, fork)` records the length of the attacker's secret branch,
//! the length of the public honest branch since the last common block, and
//! whether a block race (`match`) is possible or already running.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest truncation accepted anywhere in the crate.
pub const MAX_TRUNCATION: u32 = 10_000;

/// Tie-breaking rule used by honest nodes facing two chains of equal length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// First-seen rule: the attacker wins a fraction `gamma` of honest power.
    #[default]
    Standard,
    /// Honest nodes pick uniformly among equal-length chains.
    #[serde(rename = "uniform")]
    UniformTieBreak,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Standard => "standard",
            Variant::UniformTieBreak => "uniform",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Variant::Standard),
            "uniform" | "uniform-tie-break" => Ok(Variant::UniformTieBreak),
            other => Err(Error::InvalidParameter(format!("unknown variant '{other}'"))),
        }
    }
}

/// Attacker hashrate, connectivity and protocol variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct MiningParams {
    alpha: f64,
    gamma: f64,
    variant: Variant,
}

#[derive(Deserialize)]
struct RawParams {
    alpha: f64,
    gamma: f64,
    #[serde(default)]
    variant: Variant,
}

impl TryFrom<RawParams> for MiningParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        MiningParams::new(raw.alpha, raw.gamma, raw.variant)
    }
}

impl MiningParams {
    pub fn new(alpha: f64, gamma: f64, variant: Variant) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::InvalidAlpha(alpha));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidGamma(gamma));
        }
        Ok(Self {
            alpha,
            gamma,
            variant,
        })
    }

    pub fn standard(alpha: f64, gamma: f64) -> Result<Self> {
        Self::new(alpha, gamma, Variant::Standard)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Probability that an honest block created during a race extends the
    /// attacker's branch, as a fraction of honest power.
    pub fn race_gamma(&self) -> f64 {
        match self.variant {
            Variant::Standard => self.gamma,
            Variant::UniformTieBreak => 0.5,
        }
    }
}

/// Fork label of a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fork {
    /// The last block was the attacker's; every honest node already has the
    /// `h`-th honest block, so a match is useless.
    Irrelevant = 0,
    /// The last block was honest and still propagating.
    Relevant = 1,
    /// The honest network is split by an earlier match.
    Active = 2,
}

impl Fork {
    pub const ALL: [Fork; 3] = [Fork::Irrelevant, Fork::Relevant, Fork::Active];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(i: usize) -> Fork {
        Fork::ALL[i]
    }
}

impl fmt::Display for Fork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fork::Irrelevant => "irrelevant",
            Fork::Relevant => "relevant",
            Fork::Active => "active",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChainState {
    pub a: u32,
    pub h: u32,
    pub fork: Fork,
}

impl ChainState {
    pub const fn new(a: u32, h: u32, fork: Fork) -> Self {
        Self { a, h, fork }
    }

    pub fn is_boundary(&self, truncation: u32) -> bool {
        self.a.max(self.h) >= truncation
    }
}

impl fmt::Display for ChainState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.a, self.h, self.fork)
    }
}

/// The two possible starting states, with their probabilities `alpha` and
/// `1 - alpha`. Every adopt leads back to this distribution.
pub const ATTACKER_START: ChainState = ChainState::new(1, 0, Fork::Irrelevant);
pub const HONEST_START: ChainState = ChainState::new(0, 1, Fork::Irrelevant);

/// Attacker actions, in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Adopt = 0,
    Override = 1,
    Match = 2,
    Wait = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Adopt, Action::Override, Action::Match, Action::Wait];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    /// Single-letter code used in rendered policy tables.
    pub fn letter(self) -> char {
        match self {
            Action::Adopt => 'a',
            Action::Override => 'o',
            Action::Match => 'm',
            Action::Wait => 'w',
        }
    }

    pub fn from_letter(c: char) -> Option<Action> {
        match c {
            'a' => Some(Action::Adopt),
            'o' => Some(Action::Override),
            'm' => Some(Action::Match),
            'w' => Some(Action::Wait),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Adopt => "adopt",
            Action::Override => "override",
            Action::Match => "match",
            Action::Wait => "wait",
        })
    }
}

/// Small set of actions, iterated in ordinal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ActionSet(u8);

impl ActionSet {
    pub const EMPTY: ActionSet = ActionSet(0);

    pub fn only(action: Action) -> Self {
        ActionSet(1 << action.ordinal())
    }

    pub fn insert(&mut self, action: Action) {
        self.0 |= 1 << action.ordinal();
    }

    pub fn remove(&mut self, action: Action) {
        self.0 &= !(1 << action.ordinal());
    }

    pub fn contains(&self, action: Action) -> bool {
        self.0 & (1 << action.ordinal()) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = Action> + '_ {
        Action::ALL.into_iter().filter(|a| self.contains(*a))
    }
}

impl FromIterator<Action> for ActionSet {
    fn from_iter<I: IntoIterator<Item = Action>>(iter: I) -> Self {
        let mut set = ActionSet::EMPTY;
        for a in iter {
            set.insert(a);
        }
        set
    }
}

/// Accepted-block counts `(attacker, honest)` carried by a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RewardPair {
    pub attacker: u32,
    pub honest: u32,
}

impl RewardPair {
    pub const ZERO: RewardPair = RewardPair {
        attacker: 0,
        honest: 0,
    };

    pub const fn new(attacker: u32, honest: u32) -> Self {
        Self { attacker, honest }
    }

    /// Scalarised reward `(1 - rho) * attacker - rho * honest`.
    pub fn scalar(&self, rho: f64) -> f64 {
        (1.0 - rho) * f64::from(self.attacker) - rho * f64::from(self.honest)
    }
}

/// Dense identifier of a grid state for a fixed truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateIndex(pub usize);

/// Bijection between the grid `{0..T} x {0..T} x fork` and `0..3(T+1)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    truncation: u32,
}

impl StateSpace {
    pub fn new(truncation: u32) -> Result<Self> {
        if truncation == 0 || truncation > MAX_TRUNCATION {
            return Err(Error::InvalidTruncation(truncation));
        }
        Ok(Self { truncation })
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn len(&self) -> usize {
        let side = self.truncation as usize + 1;
        3 * side * side
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, s: ChainState) -> bool {
        s.a <= self.truncation && s.h <= self.truncation
    }

    pub fn index_of(&self, s: ChainState) -> StateIndex {
        debug_assert!(self.contains(s), "{s} outside grid of size {}", self.truncation);
        let side = self.truncation as usize + 1;
        StateIndex(s.fork.ordinal() + 3 * (s.h as usize + side * s.a as usize))
    }

    pub fn state_of(&self, idx: StateIndex) -> ChainState {
        let side = self.truncation as usize + 1;
        let fork = Fork::from_ordinal(idx.0 % 3);
        let cell = idx.0 / 3;
        ChainState::new((cell / side) as u32, (cell % side) as u32, fork)
    }

    pub fn states(&self) -> impl Iterator<Item = ChainState> + '_ {
        (0..self.len()).map(|i| self.state_of(StateIndex(i)))
    }
}

/// All `3 (T+1)^2` grid states in index order.
pub fn enumerate_states(truncation: u32) -> Result<Vec<ChainState>> {
    let space = StateSpace::new(truncation)?;
    Ok(space.states().collect())
}

/// Actions allowed at an interior state. Truncation boundaries are handled by
/// the model builders, which allow only the terminal action there.
pub fn feasible_actions(s: ChainState, p: &MiningParams) -> ActionSet {
    let mut set = ActionSet::EMPTY;
    set.insert(Action::Adopt);
    if s.a > s.h {
        set.insert(Action::Override);
    }
    let match_fork = match p.variant() {
        Variant::Standard => s.fork == Fork::Relevant,
        Variant::UniformTieBreak => matches!(s.fork, Fork::Irrelevant | Fork::Relevant),
    };
    if s.a >= s.h && match_fork {
        set.insert(Action::Match);
    }
    set.insert(Action::Wait);
    set
}

/// Protocol-following behaviour: adopt a longer public chain, publish a longer
/// private one, wait on ties.
pub fn honest_policy(s: ChainState) -> Action {
    use std::cmp::Ordering::*;
    match s.h.cmp(&s.a) {
        Greater => Action::Adopt,
        Less => Action::Override,
        Equal => Action::Wait,
    }
}

/// The classic withholding strategy: race at `(1,1)`, override when one block
/// ahead of a non-empty honest branch, give up when behind.
pub fn sm1_policy(s: ChainState) -> Action {
    if s.h > s.a {
        Action::Adopt
    } else if s.h == 1 && s.a == 1 {
        // (1,1,irrelevant) is unreachable under this policy in the standard
        // variant; match is only defined from a relevant fork.
        if s.fork == Fork::Relevant {
            Action::Match
        } else {
            Action::Wait
        }
    } else if s.h >= 1 && s.a == s.h + 1 {
        Action::Override
    } else {
        Action::Wait
    }
}

/// Revenue ceiling `alpha / (1 - alpha)` that no policy can exceed.
pub fn upper_bound_revenue(alpha: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok(alpha / (1.0 - alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(actions: &[Action]) -> ActionSet {
        actions.iter().copied().collect()
    }

    #[test]
    fn enumeration_sizes_and_order() {
        assert_eq!(enumerate_states(2).unwrap().len(), 27);
        assert_eq!(enumerate_states(75).unwrap().len(), 17_328);
        assert_eq!(
            enumerate_states(3).unwrap()[0],
            ChainState::new(0, 0, Fork::Irrelevant)
        );
        assert_eq!(enumerate_states(0), Err(Error::InvalidTruncation(0)));
        assert!(enumerate_states(MAX_TRUNCATION + 1).is_err());
    }

    #[test]
    fn index_formula() {
        let space = StateSpace::new(4).unwrap();
        let s = ChainState::new(2, 3, Fork::Active);
        assert_eq!(space.index_of(s), StateIndex(2 + 3 * (3 + 5 * 2)));
        for (i, st) in space.states().enumerate() {
            assert_eq!(space.index_of(st), StateIndex(i));
        }
    }

    #[test]
    fn feasibility_examples() {
        let std = MiningParams::standard(0.3, 0.5).unwrap();
        let uni = MiningParams::new(0.3, 0.5, Variant::UniformTieBreak).unwrap();
        assert_eq!(
            feasible_actions(ChainState::new(2, 1, Fork::Irrelevant), &std),
            set(&[Action::Adopt, Action::Override, Action::Wait])
        );
        assert_eq!(
            feasible_actions(ChainState::new(1, 1, Fork::Relevant), &std),
            set(&[Action::Adopt, Action::Match, Action::Wait])
        );
        assert_eq!(
            feasible_actions(ChainState::new(2, 2, Fork::Irrelevant), &uni),
            set(&[Action::Adopt, Action::Match, Action::Wait])
        );
        // no match out of an already running race
        assert!(!feasible_actions(ChainState::new(3, 1, Fork::Active), &uni).contains(Action::Match));
        assert!(!feasible_actions(ChainState::new(1, 2, Fork::Relevant), &std).contains(Action::Match));
    }

    #[test]
    fn reference_policies() {
        assert_eq!(honest_policy(ChainState::new(0, 1, Fork::Irrelevant)), Action::Adopt);
        assert_eq!(honest_policy(ChainState::new(1, 0, Fork::Irrelevant)), Action::Override);
        assert_eq!(honest_policy(ChainState::new(1, 1, Fork::Relevant)), Action::Wait);

        assert_eq!(sm1_policy(ChainState::new(1, 1, Fork::Relevant)), Action::Match);
        assert_eq!(sm1_policy(ChainState::new(1, 1, Fork::Irrelevant)), Action::Wait);
        assert_eq!(sm1_policy(ChainState::new(3, 2, Fork::Irrelevant)), Action::Override);
        assert_eq!(sm1_policy(ChainState::new(2, 3, Fork::Relevant)), Action::Adopt);
        assert_eq!(sm1_policy(ChainState::new(1, 0, Fork::Irrelevant)), Action::Wait);
    }

    #[test]
    fn revenue_ceiling() {
        assert!((upper_bound_revenue(1.0 / 3.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((upper_bound_revenue(0.475).unwrap() - 0.904_761_904_761_904_8).abs() < 1e-12);
        assert_eq!(upper_bound_revenue(0.0).unwrap(), 0.0);
        assert!(upper_bound_revenue(0.5).is_err());
    }

    #[test]
    fn params_validation() {
        assert_eq!(MiningParams::standard(0.5, 0.0), Err(Error::InvalidAlpha(0.5)));
        assert_eq!(MiningParams::standard(0.0, 0.0), Err(Error::InvalidAlpha(0.0)));
        assert_eq!(MiningParams::standard(0.3, 1.5), Err(Error::InvalidGamma(1.5)));
        let p = MiningParams::new(0.3, 0.9, Variant::UniformTieBreak).unwrap();
        assert_eq!(p.race_gamma(), 0.5);
    }

    #[test]
    fn json_encodings() {
        let s = ChainState::new(2, 1, Fork::Relevant);
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"{"a":2,"h":1,"fork":"relevant"}"#
        );
        assert_eq!(serde_json::to_string(&Action::Override).unwrap(), r#""override""#);
        let p: std::result::Result<MiningParams, _> =
            serde_json::from_str(r#"{"alpha":0.6,"gamma":0.0}"#);
        assert!(p.is_err());
    }
}
