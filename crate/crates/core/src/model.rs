//! Agent types, round-state sampling and the vote decision tables.

use alloc::vec::Vec;
use core::fmt;
use core::ops::{Neg, Range};

use rand::Rng;

use crate::rng::StreamKey;
use crate::{Error, Result};

/// A binary value in {+1, −1}: a post property, a belief, or a vote.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Minus,
    Plus,
}

/// Up (+1) or down (−1) vote.
pub type Vote = Sign;

impl Sign {
    #[inline]
    pub const fn from_bool(plus: bool) -> Sign {
        if plus {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    /// Parses `1`/`-1`; every other value is rejected.
    pub const fn from_value(v: i64) -> Option<Sign> {
        match v {
            1 => Some(Sign::Plus),
            -1 => Some(Sign::Minus),
            _ => None,
        }
    }

    #[inline]
    pub const fn value(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    #[inline]
    pub const fn is_plus(self) -> bool {
        matches!(self, Sign::Plus)
    }
}

impl Neg for Sign {
    type Output = Sign;

    #[inline]
    fn neg(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// The ten behaviour-defining agent types.
///
/// Boosters coordinate on the shared property p2, distorters on p3, and lone
/// wolves act like distorters on a private property instead of p3. The
/// `Up`/`Down`/`Both` suffix names the direction in which the agent leaves
/// authentic behaviour when cued.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentType {
    Authentic,
    BoosterUp,
    BoosterDown,
    BoosterBoth,
    DistorterUp,
    DistorterDown,
    DistorterBoth,
    LoneWolfUp,
    LoneWolfDown,
    LoneWolfBoth,
}

impl AgentType {
    /// All types in canonical order. Populations lay agents out in this order.
    pub const ALL: [AgentType; 10] = [
        AgentType::Authentic,
        AgentType::BoosterUp,
        AgentType::BoosterDown,
        AgentType::BoosterBoth,
        AgentType::DistorterUp,
        AgentType::DistorterDown,
        AgentType::DistorterBoth,
        AgentType::LoneWolfUp,
        AgentType::LoneWolfDown,
        AgentType::LoneWolfBoth,
    ];

    pub const INAUTHENTIC: [AgentType; 9] = [
        AgentType::BoosterUp,
        AgentType::BoosterDown,
        AgentType::BoosterBoth,
        AgentType::DistorterUp,
        AgentType::DistorterDown,
        AgentType::DistorterBoth,
        AgentType::LoneWolfUp,
        AgentType::LoneWolfDown,
        AgentType::LoneWolfBoth,
    ];

    #[inline]
    pub const fn index(self) -> usize {
        self as usize
    }

    /// ASCII tag used in file formats.
    pub const fn tag(self) -> &'static str {
        match self {
            AgentType::Authentic => "A",
            AgentType::BoosterUp => "B_up",
            AgentType::BoosterDown => "B_down",
            AgentType::BoosterBoth => "B_both",
            AgentType::DistorterUp => "D_up",
            AgentType::DistorterDown => "D_down",
            AgentType::DistorterBoth => "D_both",
            AgentType::LoneWolfUp => "L_up",
            AgentType::LoneWolfDown => "L_down",
            AgentType::LoneWolfBoth => "L_both",
        }
    }

    /// Accepts the ASCII tag as well as the arrow notation (`B↑`, `D↕`, ...).
    pub fn from_tag(tag: &str) -> Option<AgentType> {
        let t = tag.trim();
        if t == "A" {
            return Some(AgentType::Authentic);
        }
        let mut chars = t.chars();
        let family = chars.next()?;
        let dir = match chars.as_str().trim_start_matches('_') {
            "up" | "↑" => 0,
            "down" | "↓" => 1,
            "both" | "↕" => 2,
            _ => return None,
        };
        let base = match family {
            'B' => 1,
            'D' => 4,
            'L' => 7,
            _ => return None,
        };
        Some(AgentType::ALL[base + dir])
    }

    #[inline]
    pub const fn is_authentic(self) -> bool {
        matches!(self, AgentType::Authentic)
    }

    #[inline]
    pub const fn is_lone_wolf(self) -> bool {
        matches!(
            self,
            AgentType::LoneWolfUp | AgentType::LoneWolfDown | AgentType::LoneWolfBoth
        )
    }

    /// Applies the type's vote table to an agent's beliefs.
    ///
    /// # Panics
    ///
    /// If `self` is a lone-wolf type and `beliefs.personal` is `None`.
    pub fn vote(self, beliefs: &Beliefs) -> Vote {
        let authentic = beliefs.quality;
        match self {
            AgentType::Authentic => authentic,
            AgentType::BoosterUp => {
                if beliefs.boost.is_plus() {
                    Sign::Plus
                } else {
                    authentic
                }
            }
            AgentType::BoosterDown => {
                if beliefs.boost.is_plus() {
                    authentic
                } else {
                    Sign::Minus
                }
            }
            AgentType::BoosterBoth => beliefs.boost,
            AgentType::DistorterUp => distort(Direction::Up, beliefs.distort, authentic),
            AgentType::DistorterDown => distort(Direction::Down, beliefs.distort, authentic),
            AgentType::DistorterBoth => distort(Direction::Both, beliefs.distort, authentic),
            AgentType::LoneWolfUp => distort(Direction::Up, personal(beliefs), authentic),
            AgentType::LoneWolfDown => distort(Direction::Down, personal(beliefs), authentic),
            AgentType::LoneWolfBoth => distort(Direction::Both, personal(beliefs), authentic),
        }
    }
}

impl fmt::Display for AgentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Up,
    Down,
    Both,
}

fn personal(beliefs: &Beliefs) -> Sign {
    beliefs
        .personal
        .expect("lone-wolf agent state must carry a personal property")
}

/// Distorter table: when cued, vote against the quality belief in the
/// type's direction; otherwise vote authentically.
#[inline]
fn distort(dir: Direction, cue: Sign, quality: Sign) -> Vote {
    if !cue.is_plus() {
        return quality;
    }
    match (dir, quality) {
        (Direction::Up, Sign::Minus) | (Direction::Down, Sign::Plus) | (Direction::Both, _) => {
            -quality
        }
        _ => quality,
    }
}

/// Number of agents of each type, indexed by [`AgentType::index`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct TypeCounts(pub [usize; 10]);

impl TypeCounts {
    pub const fn empty() -> Self {
        TypeCounts([0; 10])
    }

    /// 1000 authentic agents and 100 of every inauthentic type (n = 1900).
    pub const fn full() -> Self {
        TypeCounts([1000, 100, 100, 100, 100, 100, 100, 100, 100, 100])
    }

    /// 100 agents of every type (n = 1000).
    pub const fn all() -> Self {
        TypeCounts([100; 10])
    }

    /// 100 authentic agents and 100 agents of `t` (n = 200).
    pub fn pair(t: AgentType) -> Self {
        TypeCounts::empty().with(AgentType::Authentic, 100).with(t, 100)
    }

    pub fn with(mut self, t: AgentType, count: usize) -> Self {
        self.0[t.index()] = count;
        self
    }

    #[inline]
    pub fn get(&self, t: AgentType) -> usize {
        self.0[t.index()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn inauthentic_total(&self) -> usize {
        self.total() - self.get(AgentType::Authentic)
    }

    /// True when every count is at most the corresponding count of `other`.
    pub fn fits_within(&self, other: &TypeCounts) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a <= b)
    }
}

/// Named populations used throughout the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PopulationPreset {
    Full,
    All,
    BoosterUp,
    DistorterUp,
    LoneWolfUp,
}

impl PopulationPreset {
    pub const ALL: [PopulationPreset; 5] = [
        PopulationPreset::Full,
        PopulationPreset::All,
        PopulationPreset::BoosterUp,
        PopulationPreset::DistorterUp,
        PopulationPreset::LoneWolfUp,
    ];

    pub fn counts(self) -> TypeCounts {
        match self {
            PopulationPreset::Full => TypeCounts::full(),
            PopulationPreset::All => TypeCounts::all(),
            PopulationPreset::BoosterUp => TypeCounts::pair(AgentType::BoosterUp),
            PopulationPreset::DistorterUp => TypeCounts::pair(AgentType::DistorterUp),
            PopulationPreset::LoneWolfUp => TypeCounts::pair(AgentType::LoneWolfUp),
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            PopulationPreset::Full => "Full",
            PopulationPreset::All => "All",
            PopulationPreset::BoosterUp => "B_up",
            PopulationPreset::DistorterUp => "D_up",
            PopulationPreset::LoneWolfUp => "L_up",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let n = name.trim();
        PopulationPreset::ALL.into_iter().find(|p| {
            p.name().eq_ignore_ascii_case(n)
                || match p {
                    PopulationPreset::BoosterUp => n == "B↑",
                    PopulationPreset::DistorterUp => n == "D↑",
                    PopulationPreset::LoneWolfUp => n == "L↑",
                    _ => false,
                }
        })
    }
}

/// Assignment of agent ids `0..n` to types. Agents of one type occupy a
/// contiguous id range, types appear in canonical order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Population {
    counts: TypeCounts,
    types: Vec<AgentType>,
}

impl Population {
    pub fn new(counts: TypeCounts) -> Result<Self> {
        if counts.total() == 0 {
            return Err(Error::invalid("population must contain at least one agent"));
        }
        let mut types = Vec::with_capacity(counts.total());
        for t in AgentType::ALL {
            types.extend(core::iter::repeat(t).take(counts.get(t)));
        }
        Ok(Population { counts, types })
    }

    pub fn preset(p: PopulationPreset) -> Self {
        Population::new(p.counts()).expect("presets are nonempty")
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.types.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    #[inline]
    pub fn counts(&self) -> &TypeCounts {
        &self.counts
    }

    #[inline]
    pub fn agent_type(&self, agent: usize) -> AgentType {
        self.types[agent]
    }

    pub fn types(&self) -> &[AgentType] {
        &self.types
    }

    /// Id range of the agents of type `t`.
    pub fn agents_of(&self, t: AgentType) -> Range<usize> {
        let start: usize = self.counts.0[..t.index()].iter().sum();
        start..start + self.counts.get(t)
    }

    /// Sub-population keeping the first `counts[t]` agents of every type.
    /// Returns it together with the kept ids of `self`, in order.
    pub fn restrict(&self, counts: &TypeCounts) -> Result<(Population, Vec<usize>)> {
        if !counts.fits_within(&self.counts) {
            return Err(Error::invalid(alloc::format!(
                "requested counts {:?} exceed available counts {:?}",
                counts.0,
                self.counts.0
            )));
        }
        let mut kept = Vec::with_capacity(counts.total());
        for t in AgentType::ALL {
            kept.extend(self.agents_of(t).take(counts.get(t)));
        }
        Ok((Population::new(*counts)?, kept))
    }
}

/// Probabilities that each shared property is +1 in a round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseLevel {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

impl NoiseLevel {
    pub const LOW: NoiseLevel = NoiseLevel { p1: 0.75, p2: 0.75, p3: 0.9 };
    pub const MID: NoiseLevel = NoiseLevel { p1: 0.75, p2: 0.5, p3: 0.5 };
    pub const HIGH: NoiseLevel = NoiseLevel { p1: 0.75, p2: 0.1, p3: 0.1 };

    pub fn new(p1: f64, p2: f64, p3: f64) -> Result<Self> {
        for (name, p) in [("p1", p1), ("p2", p2), ("p3", p3)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(alloc::format!(
                    "probability {name} = {p} is outside [0, 1]"
                )));
            }
        }
        Ok(NoiseLevel { p1, p2, p3 })
    }

    pub fn preset(name: &str) -> Option<NoiseLevel> {
        match name.trim().to_ascii_lowercase().as_str() {
            "low" => Some(NoiseLevel::LOW),
            "mid" => Some(NoiseLevel::MID),
            "high" => Some(NoiseLevel::HIGH),
            _ => None,
        }
    }

    /// Preset name if the probabilities match one exactly.
    pub fn preset_name(&self) -> Option<&'static str> {
        if *self == NoiseLevel::LOW {
            Some("low")
        } else if *self == NoiseLevel::MID {
            Some("mid")
        } else if *self == NoiseLevel::HIGH {
            Some("high")
        } else {
            None
        }
    }
}

/// Interval from which every agent's quality competence is drawn uniformly,
/// independently per round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompetenceRange {
    low: f64,
    high: f64,
}

impl Default for CompetenceRange {
    fn default() -> Self {
        CompetenceRange { low: 0.65, high: 0.95 }
    }
}

impl CompetenceRange {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(0.0 <= low && low <= high && high <= 1.0) {
            return Err(Error::invalid(alloc::format!(
                "competence range [{low}, {high}] must satisfy 0 <= low <= high <= 1"
            )));
        }
        Ok(CompetenceRange { low, high })
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.low + (self.high - self.low) * rng.gen::<f64>()
    }
}

/// The three shared post properties of a round; p1 is quality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Properties {
    pub p1: Sign,
    pub p2: Sign,
    pub p3: Sign,
}

impl Properties {
    pub const fn new(p1: Sign, p2: Sign, p3: Sign) -> Self {
        Properties { p1, p2, p3 }
    }

    fn sample<R: Rng + ?Sized>(noise: &NoiseLevel, rng: &mut R) -> Self {
        Properties {
            p1: Sign::from_bool(rng.gen_bool(noise.p1)),
            p2: Sign::from_bool(rng.gen_bool(noise.p2)),
            p3: Sign::from_bool(rng.gen_bool(noise.p3)),
        }
    }
}

/// An agent's beliefs about the round's properties.
///
/// Competence on p2 and p3 is 1, so `boost` and `distort` always equal the
/// true p2 and p3. `personal` is the private property of a lone wolf (believed
/// with certainty) and `None` for every other type.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Beliefs {
    pub quality: Sign,
    pub boost: Sign,
    pub distort: Sign,
    pub personal: Option<Sign>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentState {
    pub competence: f64,
    pub beliefs: Beliefs,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundState {
    pub properties: Properties,
    pub agents: Vec<AgentState>,
}

/// Votes of all agents in one round, indexed by agent id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoteProfile(pub Vec<Vote>);

impl VoteProfile {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

// Child indices under a round key.
const PROPERTY_STREAM: u64 = 0;
const AGENT_STREAMS: u64 = 1;

/// Samples a round's properties and every agent's competence and beliefs.
///
/// Properties come from one substream of `round`; each agent draws from its
/// own substream keyed by agent id, so skipping draws for one agent (the
/// private property of non-lone-wolves) never shifts another agent's draws.
pub fn sample_round_state(
    population: &Population,
    noise: &NoiseLevel,
    competence: &CompetenceRange,
    round: StreamKey,
) -> RoundState {
    let properties = Properties::sample(noise, &mut round.child(PROPERTY_STREAM).stream());
    let agent_root = round.child(AGENT_STREAMS);
    let agents = population
        .types()
        .iter()
        .enumerate()
        .map(|(id, &t)| sample_agent(t, &properties, noise, competence, agent_root.child(id as u64)))
        .collect();
    RoundState { properties, agents }
}

#[inline]
fn sample_agent(
    t: AgentType,
    properties: &Properties,
    noise: &NoiseLevel,
    competence: &CompetenceRange,
    key: StreamKey,
) -> AgentState {
    let mut rng = key.stream();
    let c = competence.sample(&mut rng);
    let quality = if rng.gen_bool(c) {
        properties.p1
    } else {
        -properties.p1
    };
    let personal = t
        .is_lone_wolf()
        .then(|| Sign::from_bool(rng.gen_bool(noise.p3)));
    AgentState {
        competence: c,
        beliefs: Beliefs {
            quality,
            boost: properties.p2,
            distort: properties.p3,
            personal,
        },
    }
}

/// Vote of `agent` in `state`.
pub fn decide_vote(t: AgentType, agent: usize, state: &RoundState) -> Vote {
    t.vote(&state.agents[agent].beliefs)
}

/// One independent voting round over the whole population.
pub fn simulate_round(
    population: &Population,
    noise: &NoiseLevel,
    competence: &CompetenceRange,
    round: StreamKey,
) -> (RoundState, VoteProfile) {
    let state = sample_round_state(population, noise, competence, round);
    let votes = population
        .types()
        .iter()
        .zip(&state.agents)
        .map(|(t, a)| t.vote(&a.beliefs))
        .collect();
    (state, VoteProfile(votes))
}
