//! Majority votes, majority correctness scores (MCS), misclassification
//! rates and baseline sweeps.

use alloc::format;
use alloc::vec::Vec;

use libm::sqrt;

use crate::labeling::{Jury, Label};
use crate::model::{AgentType, Population, Sign, TypeCounts, VoteProfile};
use crate::sim::{restrict_population, RoundFilter, RunData};
use crate::{Error, Result};

/// Majority of the jury's votes in one round; ties (and the empty jury) go
/// to +1.
pub fn majority_vote(row: &[i8], jury: &Jury) -> Sign {
    let sum: i64 = jury.members().iter().map(|&a| row[a] as i64).sum();
    Sign::from_bool(sum >= 0)
}

pub fn majority_of_profile(profile: &VoteProfile, jury: &Jury) -> Sign {
    let sum: i64 = jury.members().iter().map(|&a| profile.0[a].value() as i64).sum();
    Sign::from_bool(sum >= 0)
}

/// Percentage of rounds passing `filter` whose jury majority equals the
/// post's quality; `None` when no round passes.
pub fn mcs(data: &RunData, jury: &Jury, filter: &RoundFilter) -> Option<f64> {
    let mut total = 0usize;
    let mut correct = 0usize;
    for (t, props) in data.props.iter().enumerate() {
        if !filter.matches(props) {
            continue;
        }
        total += 1;
        if majority_vote(data.votes.row(t), jury) == props.p1 {
            correct += 1;
        }
    }
    (total > 0).then(|| 100.0 * correct as f64 / total as f64)
}

/// Sample mean and sample standard deviation (`n − 1`); the deviation of
/// fewer than two values is 0.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, sqrt(var))
}

#[derive(Clone, Debug, PartialEq)]
pub struct McsReport {
    pub mean: f64,
    pub sd: f64,
    /// Runs with a defined MCS.
    pub runs: usize,
    /// Runs whose filtered round set was empty.
    pub undefined: usize,
}

/// Aggregates per-run MCS values; undefined runs are counted, not averaged.
/// When every run is undefined the mean is NaN.
pub fn aggregate_mcs(values: &[Option<f64>]) -> McsReport {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    let (mean, sd) = mean_sd(&defined);
    McsReport { mean, sd, runs: defined.len(), undefined: values.len() - defined.len() }
}

/// Misclassification rate per agent type: for authentic agents the fraction
/// labeled inauthentic, for inauthentic types the fraction labeled
/// authentic. Types absent from the population are `None`.
pub fn misclassification(labels: &[Label], pop: &Population) -> Result<[Option<f64>; 10]> {
    if labels.len() != pop.len() {
        return Err(Error::invalid(format!(
            "{} labels for a population of {}",
            labels.len(),
            pop.len()
        )));
    }
    let mut out = [None; 10];
    for t in AgentType::ALL {
        let range = pop.agents_of(t);
        if range.is_empty() {
            continue;
        }
        let size = range.len();
        let wrong = labels[range]
            .iter()
            .filter(|l| l.is_authentic() != t.is_authentic())
            .count();
        out[t.index()] = Some(wrong as f64 / size as f64);
    }
    Ok(out)
}

/// Authentic-count sweep against a fixed inauthentic composition.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub authentic: Vec<usize>,
    /// Inauthentic agents kept at every point; the authentic entry is
    /// ignored.
    pub inauthentic: TypeCounts,
    pub filter: RoundFilter,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.authentic.is_empty() {
            return Err(Error::invalid("sweep needs at least one authentic count"));
        }
        if self.authentic.iter().any(|&a| a == 0) {
            return Err(Error::invalid("authentic counts must be positive"));
        }
        if self.authentic.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("authentic counts must be strictly ascending"));
        }
        Ok(())
    }

    fn counts_at(&self, authentic: usize) -> TypeCounts {
        self.inauthentic.with(AgentType::Authentic, authentic)
    }
}

/// The count ladder 1, 3, 5, 10, 25, 50, 75, … in steps of 25 up to `max`.
pub fn standard_sweep(max: usize) -> Vec<usize> {
    let mut v: Vec<usize> = [1, 3, 5, 10].into_iter().filter(|&c| c <= max).collect();
    let mut c = 25;
    while c <= max {
        v.push(c);
        c += 25;
    }
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub authentic: usize,
    pub report: McsReport,
}

/// MCS of the whole restricted population (every agent on the jury) for
/// each authentic count, averaged over the corpus runs.
pub fn baseline_sweep(spec: &SweepSpec, corpus: &[RunData]) -> Result<Vec<SweepPoint>> {
    spec.validate()?;
    if corpus.is_empty() {
        return Err(Error::invalid("sweep corpus is empty"));
    }
    let mut out = Vec::with_capacity(spec.authentic.len());
    for &a in &spec.authentic {
        let counts = spec.counts_at(a);
        let mut values = Vec::with_capacity(corpus.len());
        for run in corpus {
            let sub = restrict_population(run, &counts)?;
            values.push(mcs(&sub, &Jury::everyone(sub.agents()), &spec.filter));
        }
        out.push(SweepPoint { authentic: a, report: aggregate_mcs(&values) });
    }
    Ok(out)
}
