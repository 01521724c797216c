//! Corpus generation, classification and scoring shared by the command line
//! and the acceptance checks.
//!
//! Every noise level gets one corpus of `Full`-population runs of 1000
//! rounds. Smaller populations are column subsets of it and evaluation uses
//! its leading rounds, so all populations at a noise level see the same
//! posts.

use jury_core::clustering::Method;
use jury_core::labeling::{classify_agents_multi, expected_jury, AgentLabeling, ClassifyConfig, Jury, JuryMode, MisclassSummary};
use jury_core::metrics::{aggregate_mcs, mcs, misclassification, McsReport};
use jury_core::model::{AgentType, CompetenceRange, NoiseLevel, Population, PopulationPreset, TypeCounts};
use jury_core::rng::StreamKey;
use jury_core::sim::{restrict_population, simulate_run, take_rounds, RoundFilter, RunConfig, RunData};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const CORPUS_ROUNDS: usize = 1000;
pub const EVAL_ROUNDS: usize = 500;
pub const PAPER_RUNS: usize = 100;

pub const NOISES: [NoiseLevel; 3] = [NoiseLevel::LOW, NoiseLevel::MID, NoiseLevel::HIGH];
pub const TABLE_POPULATIONS: [PopulationPreset; 4] =
    [PopulationPreset::All, PopulationPreset::BoosterUp, PopulationPreset::DistorterUp, PopulationPreset::LoneWolfUp];

pub fn noise_index(name: &str) -> Option<usize> {
    let n = NoiseLevel::preset(name)?;
    NOISES.iter().position(|m| *m == n)
}

pub fn population_index(p: PopulationPreset) -> Option<usize> {
    TABLE_POPULATIONS.iter().position(|&q| q == p)
}

/// Runs at `scale` times the published run count, at least one.
pub fn runs_for_scale(scale: f64) -> usize {
    ((PAPER_RUNS as f64 * scale).round() as usize).max(1)
}

/// Maps `f` over `items` on `jobs` worker threads, preserving order.
/// Results do not depend on `jobs`.
pub fn par_map<T, U, F>(jobs: usize, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    if jobs <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Clone, Debug)]
pub struct Study {
    pub seed: u64,
    pub runs: usize,
    pub jobs: usize,
    pub classify: ClassifyConfig,
}

/// Per-method classification outcome over a set of runs.
#[derive(Clone, Debug)]
pub struct MethodOutcome {
    pub method: Method,
    /// Per run, per type misclassification rate.
    pub per_run: Vec<[Option<f64>; 10]>,
    /// Per run, fraction of authentic agents labeled inauthentic.
    pub authentic: Vec<f64>,
    /// Per run, fraction of all inauthentic agents labeled authentic.
    pub inauthentic: Vec<f64>,
    pub summary: MisclassSummary,
}

#[derive(Clone, Debug)]
pub struct Classified {
    pub population: Population,
    pub rounds: usize,
    pub outcomes: Vec<MethodOutcome>,
}

impl Classified {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }
}

/// Authentic and pooled inauthentic misclassification from per-type rates.
pub fn class_rates(rates: &[Option<f64>; 10], counts: &TypeCounts) -> (f64, f64) {
    let authentic = rates[0].unwrap_or(f64::NAN);
    let mut wrong = 0.0;
    let mut total = 0usize;
    for t in AgentType::INAUTHENTIC {
        if let Some(r) = rates[t.index()] {
            wrong += r * counts.get(t) as f64;
            total += counts.get(t);
        }
    }
    let inauthentic = if total == 0 { f64::NAN } else { wrong / total as f64 };
    (authentic, inauthentic)
}

pub fn outcome_from_labelings(method: Method, labelings: &[&AgentLabeling], pop: &Population) -> Result<MethodOutcome> {
    let mut per_run = Vec::with_capacity(labelings.len());
    let mut authentic = Vec::with_capacity(labelings.len());
    let mut inauthentic = Vec::with_capacity(labelings.len());
    for l in labelings {
        let rates = misclassification(&l.final_labels, pop)?;
        let (a, i) = class_rates(&rates, pop.counts());
        per_run.push(rates);
        authentic.push(a);
        inauthentic.push(i);
    }
    let summary = MisclassSummary::from_runs(&per_run);
    Ok(MethodOutcome { method, per_run, authentic, inauthentic, summary })
}

/// `data` restricted to `counts` and to its first `rounds` rounds.
pub fn subset(data: &RunData, counts: &TypeCounts, rounds: usize) -> Result<RunData> {
    let restricted = restrict_population(data, counts)?;
    Ok(take_rounds(&restricted, rounds)?)
}

/// Agents of `counts` inside the full population, taking the leading agents
/// of every type.
pub fn jury_within(pop: &Population, counts: &TypeCounts) -> Result<Jury> {
    if !counts.fits_within(pop.counts()) {
        return Err(Error::invalid("jury composition exceeds the corpus population"));
    }
    let mut ids = Vec::with_capacity(counts.total());
    for t in AgentType::ALL {
        ids.extend(pop.agents_of(t).take(counts.get(t)));
    }
    Ok(Jury::new(ids))
}

impl Study {
    pub fn corpus_config(&self, noise: usize) -> RunConfig {
        RunConfig {
            seed: StreamKey::new(self.seed).child(noise as u64).seed(),
            rounds: CORPUS_ROUNDS,
            population: TypeCounts::full(),
            noise: NOISES[noise],
            competence: CompetenceRange::default(),
            runs: self.runs,
        }
    }

    pub fn corpus(&self, noise: usize) -> Result<Vec<RunData>> {
        let cfg = self.corpus_config(noise);
        let idx: Vec<usize> = (0..self.runs).collect();
        par_map(self.jobs, &idx, |&i| simulate_run(&cfg, i)).into_iter().map(|r| r.map_err(Error::from)).collect()
    }

    fn classify_key(&self, noise: usize, counts: &TypeCounts, rounds: usize) -> StreamKey {
        let mut key = StreamKey::new(self.seed).child(1000 + noise as u64).child(rounds as u64);
        for c in counts.0 {
            key = key.child(c as u64);
        }
        key
    }

    /// Classifies the `counts` sub-population of every corpus run on its
    /// first `rounds` rounds.
    pub fn classify_counts(
        &self,
        corpus: &[RunData],
        noise: usize,
        counts: &TypeCounts,
        rounds: usize,
        methods: &[Method],
    ) -> Result<Classified> {
        let population = Population::new(*counts)?;
        let key = self.classify_key(noise, counts, rounds);
        let labelings: Vec<Vec<AgentLabeling>> = par_map(self.jobs, corpus, |run| {
            let sub = subset(run, counts, rounds)?;
            Ok(classify_agents_multi(&sub, methods, key.child(run.meta.run_index as u64), &self.classify)?)
        })
        .into_iter()
        .collect::<Result<_>>()?;
        let outcomes = methods
            .iter()
            .enumerate()
            .map(|(mi, &m)| {
                let per_method: Vec<&AgentLabeling> = labelings.iter().map(|l| &l[mi]).collect();
                outcome_from_labelings(m, &per_method, &population)
            })
            .collect::<Result<_>>()?;
        Ok(Classified { population, rounds, outcomes })
    }

    pub fn classify(
        &self,
        corpus: &[RunData],
        noise: usize,
        preset: PopulationPreset,
        rounds: usize,
        methods: &[Method],
    ) -> Result<Classified> {
        self.classify_counts(corpus, noise, &preset.counts(), rounds, methods)
    }

    /// MCS of the whole `counts` population on the evaluation rounds.
    pub fn baseline(&self, corpus: &[RunData], counts: &TypeCounts, filter: &RoundFilter) -> Result<McsReport> {
        let values = par_map(self.jobs, corpus, |run| {
            let head = take_rounds(run, EVAL_ROUNDS.min(run.rounds()))?;
            Ok(mcs(&head, &jury_within(run.population(), counts)?, filter))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(aggregate_mcs(&values))
    }

    /// MCS of the jury a method with `summary`'s error rates would select.
    pub fn expected(
        &self,
        corpus: &[RunData],
        counts: &TypeCounts,
        summary: &MisclassSummary,
        mode: JuryMode,
        filter: &RoundFilter,
    ) -> Result<McsReport> {
        let local = expected_jury(&Population::new(*counts)?, summary, mode)?;
        let jury_counts = TypeCounts(local.composition(&Population::new(*counts)?));
        self.baseline(corpus, &jury_counts, filter)
    }
}
