//! JSON and CSV reports: misclassification summaries, MCS reports and the
//! reproduction tables and figures.

use std::fmt::Write as _;

use jury_core::clustering::Method;
use jury_core::labeling::{JuryMode, MisclassSummary, TypeStat};
use jury_core::metrics::{mean_sd, standard_sweep, McsReport};
use jury_core::model::{AgentType, TypeCounts};
use jury_core::sim::{RoundFilter, RunData};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{noise_index, population_index, Classified, Study, EVAL_ROUNDS, NOISES, TABLE_POPULATIONS};
use crate::reference::{self, Cell, Class, MCS_TOLERANCE, MISCLASS_TOLERANCE, NOISE_NAMES};

/// Mean and SD serialised with `null` for undefined values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let defined: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if defined.is_empty() {
            return Stat { mean: None, sd: None };
        }
        let (m, s) = mean_sd(&defined);
        Stat { mean: Some(m), sd: Some(s) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McsJson {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub runs: usize,
    pub undefined: usize,
}

impl From<&McsReport> for McsJson {
    fn from(r: &McsReport) -> Self {
        let defined = r.runs > 0;
        McsJson { mean: defined.then_some(r.mean), sd: defined.then_some(r.sd), runs: r.runs, undefined: r.undefined }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeStatJson {
    #[serde(rename = "type")]
    pub agent_type: String,
    pub mean: f64,
    pub sd: f64,
}

/// Misclassification summary across runs, as written by `classify` and read
/// by `evaluate` for expected juries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryJson {
    pub method: String,
    pub runs: usize,
    pub authentic: Stat,
    pub inauthentic: Stat,
    pub types: Vec<TypeStatJson>,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl SummaryJson {
    pub fn new(method: Method, runs: usize, summary: &MisclassSummary, authentic: &[f64], inauthentic: &[f64], config: serde_json::Value) -> Self {
        let types = AgentType::ALL
            .into_iter()
            .filter_map(|t| summary.get(t).map(|s| TypeStatJson { agent_type: t.tag().to_owned(), mean: s.mean, sd: s.sd }))
            .collect();
        SummaryJson {
            method: method.name().to_owned(),
            runs,
            authentic: Stat::of(authentic),
            inauthentic: Stat::of(inauthentic),
            types,
            config,
        }
    }

    pub fn to_summary(&self) -> Result<MisclassSummary> {
        let mut out = MisclassSummary::default();
        for t in &self.types {
            let at = AgentType::from_tag(&t.agent_type)
                .ok_or_else(|| Error::invalid(format!("unknown agent type {:?} in summary", t.agent_type)))?;
            out.set(at, TypeStat { mean: t.mean, sd: t.sd });
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub expected: Cell,
    pub got: Stat,
    pub tolerance: f64,
    pub within: bool,
}

impl Comparison {
    pub fn new(expected: Cell, got: Stat, tolerance: f64) -> Self {
        let within = got.mean.is_some_and(|m| (m - expected.mean).abs() <= tolerance);
        Comparison { expected, got, tolerance, within }
    }
}

fn mcs_stat(r: &McsReport) -> Stat {
    let j = McsJson::from(r);
    Stat { mean: j.mean, sd: j.sd }
}

#[derive(Clone, Debug, Serialize)]
pub struct Table2Cell {
    pub method: String,
    pub class: Class,
    pub noise: String,
    pub population: String,
    #[serde(flatten)]
    pub comparison: Comparison,
}

#[derive(Clone, Debug, Serialize)]
pub struct TypeRow {
    pub method: String,
    pub noise: String,
    pub population: String,
    pub rounds: usize,
    pub types: Vec<TypeStatJson>,
}

pub fn type_rows(noise: usize, name: &str, classified: &Classified) -> Vec<TypeRow> {
    classified
        .outcomes
        .iter()
        .map(|o| TypeRow {
            method: o.method.name().to_owned(),
            noise: NOISE_NAMES[noise].to_owned(),
            population: name.to_owned(),
            rounds: classified.rounds,
            types: AgentType::ALL
                .into_iter()
                .filter_map(|t| o.summary.get(t).map(|s| TypeStatJson { agent_type: t.tag().to_owned(), mean: s.mean, sd: s.sd }))
                .collect(),
        })
        .collect()
}

pub fn table2_cells(noise: usize, pop: usize, classified: &Classified) -> Vec<Table2Cell> {
    let mut out = Vec::new();
    for o in &classified.outcomes {
        for (class, values) in [(Class::Authentic, &o.authentic), (Class::Inauthentic, &o.inauthentic)] {
            out.push(Table2Cell {
                method: o.method.name().to_owned(),
                class,
                noise: NOISE_NAMES[noise].to_owned(),
                population: reference::POPULATION_NAMES[pop].to_owned(),
                comparison: Comparison::new(
                    reference::misclassification(o.method, class, noise, pop),
                    Stat::of(values),
                    MISCLASS_TOLERANCE,
                ),
            });
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct Table3Cell {
    pub population: String,
    pub noise: String,
    pub filter: String,
    /// `base`, or method and jury mode such as `GMM best`.
    pub jury: String,
    #[serde(flatten)]
    pub comparison: Comparison,
    pub runs: usize,
    pub undefined: usize,
}

fn filter_name(f: &RoundFilter) -> String {
    f.name().unwrap_or("custom").to_owned()
}

pub fn table3_cells(study: &Study, corpus: &[RunData], noise: usize, pop: usize, classified: &Classified) -> Result<Vec<Table3Cell>> {
    let counts = TABLE_POPULATIONS[pop].counts();
    let mut out = Vec::new();
    for filter in [RoundFilter::NONE, RoundFilter::ACTIVE] {
        let active = filter == RoundFilter::ACTIVE;
        let refs = reference::mcs(pop, active, noise);
        let mut push = |jury: String, expected: Cell, r: &McsReport| {
            out.push(Table3Cell {
                population: reference::POPULATION_NAMES[pop].to_owned(),
                noise: NOISE_NAMES[noise].to_owned(),
                filter: filter_name(&filter),
                jury,
                comparison: Comparison::new(expected, mcs_stat(r), MCS_TOLERANCE),
                runs: r.runs,
                undefined: r.undefined,
            });
        };
        push("base".into(), refs.base, &study.baseline(corpus, &counts, &filter)?);
        for o in &classified.outcomes {
            let row = match o.method {
                Method::Gmm => refs.gmm,
                Method::KMeans => refs.km,
            };
            for (mi, mode) in JuryMode::ALL.into_iter().enumerate() {
                let r = study.expected(corpus, &counts, &o.summary, mode, &filter)?;
                push(format!("{} {}", o.method.name(), mode.name()), row[mi], &r);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct RobustnessRow {
    pub method: String,
    #[serde(rename = "type")]
    pub agent_type: String,
    pub rounds: usize,
    pub expected: f64,
    pub got: Stat,
    pub tolerance: f64,
    pub within: bool,
}

/// False-negative rates of boosters and distorters in the mixed population
/// at LOW noise next to the reference values for `rounds` (250 or 500).
pub fn robustness_rows(classified: &Classified) -> Vec<RobustnessRow> {
    let mut out = Vec::new();
    for o in &classified.outcomes {
        for (t, r500, r250) in reference::KM_FALSE_NEGATIVES {
            let expected = match o.method {
                Method::Gmm => 0.0,
                Method::KMeans if classified.rounds == 250 => r250,
                Method::KMeans => r500,
            };
            let values: Vec<f64> = o.per_run.iter().filter_map(|r| r[t.index()]).collect();
            let got = Stat::of(&values);
            out.push(RobustnessRow {
                method: o.method.name().to_owned(),
                agent_type: t.tag().to_owned(),
                rounds: classified.rounds,
                expected,
                got,
                tolerance: MISCLASS_TOLERANCE * 2.0,
                within: got.mean.is_some_and(|m| (m - expected).abs() <= MISCLASS_TOLERANCE * 2.0),
            });
        }
    }
    out
}

/// One curve of an MCS-versus-authentic-count figure.
#[derive(Clone, Debug)]
pub struct Curve {
    pub name: String,
    pub noise: usize,
    pub inauthentic: TypeCounts,
    pub filter: RoundFilter,
}

/// Curves of the figure with the active-round filter: authentic agents
/// alone, against 100 of each up-type at LOW noise, and against 100 of
/// every inauthentic type at each noise level.
pub fn fig1_curves() -> Vec<Curve> {
    let mut v = vec![Curve { name: "A".into(), noise: 0, inauthentic: TypeCounts::empty(), filter: RoundFilter::ACTIVE }];
    for t in [AgentType::BoosterUp, AgentType::DistorterUp, AgentType::LoneWolfUp] {
        v.push(Curve { name: format!("A+{}", t.tag()), noise: 0, inauthentic: TypeCounts::empty().with(t, 100), filter: RoundFilter::ACTIVE });
    }
    for noise in 0..3 {
        v.push(Curve { name: "A+all".into(), noise, inauthentic: TypeCounts::all().with(AgentType::Authentic, 0), filter: RoundFilter::ACTIVE });
    }
    v
}

/// Curves of the unfiltered figure: every single inauthentic type and all
/// of them together, at every noise level.
pub fn fig2_curves() -> Vec<Curve> {
    let mut v = Vec::new();
    for noise in 0..3 {
        for t in AgentType::INAUTHENTIC {
            v.push(Curve { name: format!("A+{}", t.tag()), noise, inauthentic: TypeCounts::empty().with(t, 100), filter: RoundFilter::NONE });
        }
        v.push(Curve { name: "A+all".into(), noise, inauthentic: TypeCounts::all().with(AgentType::Authentic, 0), filter: RoundFilter::NONE });
    }
    v
}

pub const FIG_HEADER: &str = "curve,noise,filter,authentic,mcs_mean,mcs_sd,runs,undefined\n";

/// Figure rows for the curves at one noise level, computed on its corpus.
pub fn figure_rows(study: &Study, corpus: &[RunData], noise: usize, curves: &[Curve]) -> Result<String> {
    let mut out = String::new();
    let max_a = TypeCounts::full().get(AgentType::Authentic);
    for curve in curves.iter().filter(|c| c.noise == noise) {
        for a in standard_sweep(max_a) {
            let counts = curve.inauthentic.with(AgentType::Authentic, a);
            let r = study.baseline(corpus, &counts, &curve.filter)?;
            let j = McsJson::from(&r);
            let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.4}"));
            let _ = writeln!(
                out,
                "{},{},{},{a},{},{},{},{}",
                curve.name,
                NOISE_NAMES[noise],
                filter_name(&curve.filter),
                fmt(j.mean),
                fmt(j.sd),
                j.runs,
                j.undefined
            );
        }
    }
    Ok(out)
}

/// Reproduction targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Target {
    Table2,
    Table3,
    Fig1,
    Fig2,
    Robustness,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct TablesReport {
    pub config: serde_json::Value,
    pub runs: usize,
    pub evaluation_rounds: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub table2: Vec<Table2Cell>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_type: Vec<TypeRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub table3: Vec<Table3Cell>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub robustness: Vec<RobustnessRow>,
}

impl TablesReport {
    pub fn within_counts(&self) -> (usize, usize) {
        let flags: Vec<bool> = self
            .table2
            .iter()
            .map(|c| c.comparison.within)
            .chain(self.table3.iter().map(|c| c.comparison.within))
            .chain(self.robustness.iter().map(|r| r.within))
            .collect();
        (flags.iter().filter(|&&w| w).count(), flags.len())
    }
}

pub struct ReproduceOptions {
    pub targets: Vec<Target>,
    pub noises: Vec<usize>,
    pub populations: Vec<usize>,
    pub methods: Vec<Method>,
}

pub struct Reproduction {
    pub tables: TablesReport,
    pub fig1: Option<String>,
    pub fig2: Option<String>,
}

/// Runs the requested targets, sharing one corpus per noise level and one
/// classification per population across tables.
pub fn reproduce(study: &Study, opts: &ReproduceOptions, config: serde_json::Value) -> Result<Reproduction> {
    let wants = |t: Target| opts.targets.contains(&t);
    let mut tables = TablesReport { config, runs: study.runs, evaluation_rounds: EVAL_ROUNDS, ..Default::default() };
    let mut fig1 = wants(Target::Fig1).then(|| FIG_HEADER.to_owned());
    let mut fig2 = wants(Target::Fig2).then(|| FIG_HEADER.to_owned());
    let fig1_curves = fig1_curves();
    let fig2_curves = fig2_curves();
    for noise in 0..NOISES.len() {
        let fig_noise = (fig1.is_some() && fig1_curves.iter().any(|c| c.noise == noise)) || fig2.is_some();
        let table_noise = opts.noises.contains(&noise) && (wants(Target::Table2) || wants(Target::Table3));
        let robust_noise = noise == 0 && wants(Target::Robustness);
        if !(fig_noise || table_noise || robust_noise) {
            continue;
        }
        let corpus = study.corpus(noise)?;
        if let Some(f) = fig1.as_mut() {
            f.push_str(&figure_rows(study, &corpus, noise, &fig1_curves)?);
        }
        if let Some(f) = fig2.as_mut() {
            f.push_str(&figure_rows(study, &corpus, noise, &fig2_curves)?);
        }
        if table_noise {
            for &pop in &opts.populations {
                let preset = TABLE_POPULATIONS[pop];
                let classified = study.classify(&corpus, noise, preset, EVAL_ROUNDS, &opts.methods)?;
                if wants(Target::Table2) {
                    tables.table2.extend(table2_cells(noise, pop, &classified));
                    tables.per_type.extend(type_rows(noise, preset.name(), &classified));
                }
                if wants(Target::Table3) {
                    tables.table3.extend(table3_cells(study, &corpus, noise, pop, &classified)?);
                }
            }
        }
        if robust_noise {
            for rounds in [EVAL_ROUNDS, EVAL_ROUNDS / 2] {
                let classified = study.classify(&corpus, noise, jury_core::model::PopulationPreset::All, rounds, &opts.methods)?;
                tables.robustness.extend(robustness_rows(&classified));
            }
        }
    }
    Ok(Reproduction { tables, fig1, fig2 })
}

pub fn parse_noise_list(names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| noise_index(n).ok_or_else(|| Error::invalid(format!("unknown noise level {n:?} (expected LOW, MID or HIGH)"))))
        .collect()
}

pub fn parse_population_list(names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            jury_core::model::PopulationPreset::from_name(n)
                .and_then(population_index)
                .ok_or_else(|| Error::invalid(format!("unknown table population {n:?} (expected All, B_up, D_up or L_up)")))
        })
        .collect()
}
