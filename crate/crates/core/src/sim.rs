//! Multi-run experiments, vote datasets, bootstrap resampling and round
//! filters.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::model::{
    AgentType, CompetenceRange, NoiseLevel, Population, Properties, Sign, TypeCounts,
};
use crate::rng::StreamKey;
use crate::{Error, Result};

/// Dense rounds × agents matrix of ±1 votes, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoteMatrix {
    rounds: usize,
    agents: usize,
    data: Vec<i8>,
}

impl VoteMatrix {
    /// Builds a matrix from row-major ±1 entries.
    pub fn from_raw(rounds: usize, agents: usize, data: Vec<i8>) -> Result<Self> {
        if data.len() != rounds * agents {
            return Err(Error::invalid(format!(
                "vote matrix of {rounds}x{agents} needs {} entries, got {}",
                rounds * agents,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|&v| v != 1 && v != -1) {
            return Err(Error::invalid(format!(
                "vote at round {}, agent {} is {} (expected 1 or -1)",
                pos / agents.max(1),
                pos % agents.max(1),
                data[pos]
            )));
        }
        Ok(VoteMatrix { rounds, agents, data })
    }

    pub fn from_rows<I, R>(agents: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[Sign]>,
    {
        let mut data = Vec::new();
        let mut rounds = 0;
        for row in rows {
            let row = row.as_ref();
            if row.len() != agents {
                return Err(Error::invalid(format!(
                    "row {rounds} has {} votes, expected {agents}",
                    row.len()
                )));
            }
            data.extend(row.iter().map(|s| s.value()));
            rounds += 1;
        }
        Ok(VoteMatrix { rounds, agents, data })
    }

    #[inline]
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    #[inline]
    pub fn agents(&self) -> usize {
        self.agents
    }

    #[inline]
    pub fn get(&self, round: usize, agent: usize) -> i8 {
        self.data[round * self.agents + agent]
    }

    #[inline]
    pub fn row(&self, round: usize) -> &[i8] {
        &self.data[round * self.agents..(round + 1) * self.agents]
    }

    pub fn as_raw(&self) -> &[i8] {
        &self.data
    }

    /// Column-major copy: agent `a`'s votes are `out[a * rounds..(a + 1) * rounds]`.
    pub fn columns(&self) -> Vec<i8> {
        let mut out = alloc::vec![0i8; self.data.len()];
        for (t, row) in self.data.chunks_exact(self.agents.max(1)).enumerate() {
            for (a, &v) in row.iter().enumerate() {
                out[a * self.rounds + t] = v;
            }
        }
        out
    }

    pub fn select_rows(&self, rows: &[usize]) -> VoteMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.agents);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        VoteMatrix { rounds: rows.len(), agents: self.agents, data }
    }

    pub fn select_columns(&self, cols: &[usize]) -> VoteMatrix {
        let mut data = Vec::with_capacity(self.rounds * cols.len());
        for t in 0..self.rounds {
            let row = self.row(t);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        VoteMatrix { rounds: self.rounds, agents: cols.len(), data }
    }
}

/// Provenance of a simulated run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMeta {
    pub population: Population,
    pub noise: NoiseLevel,
    pub competence: CompetenceRange,
    pub seed: u64,
    pub run_index: usize,
}

/// Votes of one run plus the per-round properties that generated them.
#[derive(Clone, Debug, PartialEq)]
pub struct RunData {
    pub votes: VoteMatrix,
    pub props: Vec<Properties>,
    pub meta: RunMeta,
}

impl RunData {
    pub fn new(votes: VoteMatrix, props: Vec<Properties>, meta: RunMeta) -> Result<Self> {
        if votes.rounds() != props.len() {
            return Err(Error::invalid(format!(
                "{} vote rows but {} property records",
                votes.rounds(),
                props.len()
            )));
        }
        if votes.agents() != meta.population.len() {
            return Err(Error::invalid(format!(
                "{} vote columns but population of {}",
                votes.agents(),
                meta.population.len()
            )));
        }
        Ok(RunData { votes, props, meta })
    }

    #[inline]
    pub fn rounds(&self) -> usize {
        self.props.len()
    }

    #[inline]
    pub fn agents(&self) -> usize {
        self.votes.agents()
    }

    pub fn population(&self) -> &Population {
        &self.meta.population
    }

    /// Quality (p1) of every round.
    pub fn quality(&self) -> impl Iterator<Item = Sign> + '_ {
        self.props.iter().map(|p| p.p1)
    }

    fn with_rows(&self, rows: &[usize]) -> RunData {
        RunData {
            votes: self.votes.select_rows(rows),
            props: rows.iter().map(|&r| self.props[r]).collect(),
            meta: self.meta.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub rounds: usize,
    pub population: TypeCounts,
    pub noise: NoiseLevel,
    pub competence: CompetenceRange,
    pub runs: usize,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::invalid("rounds must be at least 1"));
        }
        if self.runs == 0 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        if self.population.total() == 0 {
            return Err(Error::invalid("population must contain at least one agent"));
        }
        Ok(())
    }

    /// Key of run `index`: every round of that run derives from it.
    pub fn run_key(&self, index: usize) -> StreamKey {
        StreamKey::new(self.seed).child(index as u64)
    }
}

/// Simulates run `index` of `config` in isolation.
pub fn simulate_run(config: &RunConfig, index: usize) -> Result<RunData> {
    config.validate()?;
    let population = Population::new(config.population)?;
    let key = config.run_key(index);
    let n = population.len();
    let mut data = Vec::with_capacity(config.rounds * n);
    let mut props = Vec::with_capacity(config.rounds);
    for t in 0..config.rounds {
        let (state, profile) = crate::model::simulate_round(
            &population,
            &config.noise,
            &config.competence,
            key.child(t as u64),
        );
        props.push(state.properties);
        data.extend(profile.0.iter().map(|v| v.value()));
    }
    let votes = VoteMatrix { rounds: config.rounds, agents: n, data };
    RunData::new(
        votes,
        props,
        RunMeta {
            population,
            noise: config.noise,
            competence: config.competence,
            seed: config.seed,
            run_index: index,
        },
    )
}

/// All `config.runs` runs, in index order.
pub fn run(config: &RunConfig) -> Result<Vec<RunData>> {
    config.validate()?;
    (0..config.runs).map(|i| simulate_run(config, i)).collect()
}

/// First `rounds` rounds of `data`.
pub fn take_rounds(data: &RunData, rounds: usize) -> Result<RunData> {
    if rounds == 0 || rounds > data.rounds() {
        return Err(Error::invalid(format!(
            "cannot take {rounds} rounds from a run of {}",
            data.rounds()
        )));
    }
    let rows: Vec<usize> = (0..rounds).collect();
    Ok(data.with_rows(&rows))
}

/// Resamples rounds uniformly with replacement; votes and properties move
/// together. The output has the same number of rounds as the input.
pub fn bootstrap_rounds<R: Rng + ?Sized>(data: &RunData, rng: &mut R) -> Result<RunData> {
    let r = data.rounds();
    if r == 0 {
        return Err(Error::invalid("cannot bootstrap an empty run"));
    }
    let rows: Vec<usize> = (0..r).map(|_| rng.gen_range(0..r)).collect();
    Ok(data.with_rows(&rows))
}

/// Conjunction of required property values; `None` leaves a property free.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct RoundFilter {
    pub p1: Option<Sign>,
    pub p2: Option<Sign>,
    pub p3: Option<Sign>,
}

impl RoundFilter {
    pub const NONE: RoundFilter = RoundFilter { p1: None, p2: None, p3: None };
    /// Rounds in which the up-boosters and up-distorters are cued.
    pub const ACTIVE: RoundFilter = RoundFilter {
        p1: None,
        p2: Some(Sign::Plus),
        p3: Some(Sign::Plus),
    };

    #[inline]
    pub fn matches(&self, props: &Properties) -> bool {
        self.p1.map_or(true, |s| s == props.p1)
            && self.p2.map_or(true, |s| s == props.p2)
            && self.p3.map_or(true, |s| s == props.p3)
    }

    pub fn name(&self) -> Option<&'static str> {
        if *self == RoundFilter::NONE {
            Some("none")
        } else if *self == RoundFilter::ACTIVE {
            Some("active")
        } else {
            None
        }
    }

    pub fn from_name(name: &str) -> Option<RoundFilter> {
        match name.trim().to_ascii_lowercase().as_str() {
            "none" => Some(RoundFilter::NONE),
            "active" => Some(RoundFilter::ACTIVE),
            _ => None,
        }
    }
}

/// Rounds satisfying `filter`, in original order. May be empty.
pub fn filter_rounds(data: &RunData, filter: &RoundFilter) -> RunData {
    let rows: Vec<usize> = (0..data.rounds())
        .filter(|&t| filter.matches(&data.props[t]))
        .collect();
    data.with_rows(&rows)
}

/// Restricts a run to the first `counts[t]` agents of each type.
pub fn restrict_population(data: &RunData, counts: &TypeCounts) -> Result<RunData> {
    let (population, kept) = data.population().restrict(counts)?;
    Ok(RunData {
        votes: data.votes.select_columns(&kept),
        props: data.props.clone(),
        meta: RunMeta { population, ..data.meta.clone() },
    })
}

/// Agent ids of `data` whose type is `t`.
pub fn agents_of(data: &RunData, t: AgentType) -> core::ops::Range<usize> {
    data.population().agents_of(t)
}
