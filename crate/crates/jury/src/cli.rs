use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use jury_core::clustering::Method;
use jury_core::labeling::{classify_agents_multi, ClassifyConfig, Jury, JuryMode};
use jury_core::metrics::{aggregate_mcs, mcs, misclassification};
use jury_core::model::{AgentType, CompetenceRange, NoiseLevel, PopulationPreset, TypeCounts};
use jury_core::rng::StreamKey;
use jury_core::sim::{simulate_run, RoundFilter, RunConfig, RunData};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::experiment::{class_rates, default_jobs, outcome_from_labelings, par_map, runs_for_scale, Study};
use crate::format::{self, read_json, run_stem, write_atomic, write_json};
use crate::report::{self, McsJson, ReproduceOptions, Stat, SummaryJson, Target};

#[derive(Debug, Parser)]
#[command(name = "jury", version, about = "Simulate coordinated voting and select wise juries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate runs and write one vote CSV plus manifest per run.
    Simulate(SimulateArgs),
    /// Label the agents of a dataset authentic or inauthentic.
    Classify(ClassifyArgs),
    /// Score baseline, selected and expected juries on a dataset.
    Evaluate(EvaluateArgs),
    /// Recompute the published tables and figures on fresh corpora.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Preset (Full, All, B_up, D_up, L_up) or per-type counts such as `A=25,B_up=100`.
    #[arg(long, default_value = "All")]
    pub population: String,
    /// Preset (LOW, MID, HIGH) or explicit `p1,p2,p3`.
    #[arg(long, default_value = "LOW")]
    pub noise: String,
    #[arg(long, default_value_t = 500)]
    pub rounds: usize,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Quality competence interval `low,high`.
    #[arg(long, default_value = "0.65,0.95")]
    pub competence: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// GMM, KM or both.
    #[arg(long, default_value = "both")]
    pub method: String,
    #[arg(long, default_value_t = 5)]
    pub bootstraps: usize,
    /// Authentic bootstrap labels needed for a final authentic label.
    #[arg(long, default_value_t = 4)]
    pub threshold: usize,
    /// Spectral components clustered.
    #[arg(long, default_value_t = 2)]
    pub q: usize,
    /// Candidate cluster counts, `min..max`.
    #[arg(long = "k-range", default_value = "2..20")]
    pub k_range: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Dataset directory, run manifest or vote CSV.
    pub dataset: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub dataset: PathBuf,
    /// Directory written by `classify`, or one labels CSV for a single run.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Misclassification summary JSON(s) for expected juries.
    #[arg(long)]
    pub summary: Vec<PathBuf>,
    /// none or active.
    #[arg(long, default_value = "none")]
    pub filter: String,
    /// best, average, worst or all.
    #[arg(long = "jury-mode", default_value = "all")]
    pub jury_mode: String,
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long = "target", value_enum, required = true)]
    pub targets: Vec<Target>,
    /// Fraction of the published 100 runs per configuration.
    #[arg(long, default_value_t = 0.2)]
    pub scale: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Noise levels for the tables.
    #[arg(long, value_delimiter = ',', default_value = "LOW,MID,HIGH")]
    pub noise: Vec<String>,
    /// Populations for the tables.
    #[arg(long, value_delimiter = ',', default_value = "All,B_up,D_up,L_up")]
    pub populations: Vec<String>,
    #[arg(long, default_value = "both")]
    pub method: String,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Classify(a) => classify(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Reproduce(a) => reproduce(&a),
    }
}

pub fn parse_population(s: &str) -> Result<TypeCounts> {
    if let Some(p) = PopulationPreset::from_name(s) {
        return Ok(p.counts());
    }
    let mut counts = TypeCounts::empty();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (tag, n) = part
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("population entry {part:?} is not TYPE=COUNT")))?;
        let t = AgentType::from_tag(tag.trim()).ok_or_else(|| Error::invalid(format!("unknown agent type {tag:?}")))?;
        let n: usize = n.trim().parse().map_err(|_| Error::invalid(format!("bad count in {part:?}")))?;
        counts = counts.with(t, n);
    }
    if counts.total() == 0 {
        return Err(Error::invalid(format!("population {s:?} is empty")));
    }
    Ok(counts)
}

fn parse_floats<const N: usize>(s: &str, what: &str) -> Result<[f64; N]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::invalid(format!("{what} {s:?} is not a list of {N} numbers")))?;
    v.try_into().map_err(|_| Error::invalid(format!("{what} {s:?} needs exactly {N} numbers")))
}

pub fn parse_noise(s: &str) -> Result<NoiseLevel> {
    if let Some(n) = NoiseLevel::preset(s) {
        return Ok(n);
    }
    let [p1, p2, p3] = parse_floats::<3>(s, "noise")?;
    Ok(NoiseLevel::new(p1, p2, p3)?)
}

pub fn parse_k_range(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| Error::invalid(format!("k-range {s:?} is not min..max")))?;
    let a: usize = a.trim().parse().map_err(|_| Error::invalid(format!("bad k-range {s:?}")))?;
    let b: usize = b.trim().parse().map_err(|_| Error::invalid(format!("bad k-range {s:?}")))?;
    if a == 0 || a > b {
        return Err(Error::invalid(format!("k-range {s:?} must satisfy 1 <= min <= max")));
    }
    Ok((a, b))
}

pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    if s.eq_ignore_ascii_case("both") {
        return Ok(Method::BOTH.to_vec());
    }
    Method::from_name(s).map(|m| vec![m]).ok_or_else(|| Error::invalid(format!("unknown method {s:?} (expected GMM, KM or both)")))
}

fn jobs(j: Option<usize>) -> usize {
    j.unwrap_or_else(default_jobs).max(1)
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let [lo, hi] = parse_floats::<2>(&a.competence, "competence")?;
    let cfg = RunConfig {
        seed: a.seed,
        rounds: a.rounds,
        population: parse_population(&a.population)?,
        noise: parse_noise(&a.noise)?,
        competence: CompetenceRange::new(lo, hi)?,
        runs: a.runs,
    };
    cfg.validate()?;
    let echo = json!({
        "command": "simulate",
        "population": a.population,
        "noise": a.noise,
        "rounds": a.rounds,
        "runs": a.runs,
        "seed": a.seed,
        "competence": a.competence,
    });
    let idx: Vec<usize> = (0..a.runs).collect();
    let written = par_map(jobs(a.jobs), &idx, |&i| {
        let data = simulate_run(&cfg, i)?;
        format::write_run(&a.out, &data, echo.clone())
    });
    for w in written {
        w?;
    }
    Ok(())
}

impl PipelineArgs {
    fn config(&self) -> Result<ClassifyConfig> {
        let cfg = ClassifyConfig {
            bootstraps: self.bootstraps,
            threshold: self.threshold,
            q: self.q,
            k_range: parse_k_range(&self.k_range)?,
            ..ClassifyConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn echo(&self) -> serde_json::Value {
        json!({
            "method": self.method,
            "bootstraps": self.bootstraps,
            "threshold": self.threshold,
            "q": self.q,
            "k_range": self.k_range,
            "seed": self.seed,
        })
    }
}

#[derive(Serialize)]
struct RunMisclass<'a> {
    method: &'a str,
    run_index: usize,
    agents: usize,
    authentic: Option<f64>,
    inauthentic: Option<f64>,
    types: Vec<serde_json::Value>,
    selected_k: Vec<usize>,
    config: &'a serde_json::Value,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn classify(a: &ClassifyArgs) -> Result<()> {
    let cfg = a.pipeline.config()?;
    let methods = parse_methods(&a.pipeline.method)?;
    let mut echo = a.pipeline.echo();
    echo["command"] = json!("classify");
    echo["dataset"] = json!(a.dataset.display().to_string());
    let manifests = format::dataset_manifests(&a.dataset)?;
    let key = StreamKey::new(a.pipeline.seed);
    let results = par_map(jobs(a.pipeline.jobs), &manifests, |m| -> Result<_> {
        let data = format::read_run(m)?;
        let labelings = classify_agents_multi(&data, &methods, key.child(data.meta.run_index as u64), &cfg)?;
        let stem = run_stem(data.meta.run_index);
        for l in &labelings {
            let name = l.method.name();
            let pop = data.population();
            write_atomic(&a.out.join(format!("{stem}.{name}.labels.csv")), format::labels_csv(l, pop).as_bytes())?;
            let rates = misclassification(&l.final_labels, pop)?;
            let (au, inau) = class_rates(&rates, pop.counts());
            let report = RunMisclass {
                method: name,
                run_index: data.meta.run_index,
                agents: data.agents(),
                authentic: finite(au),
                inauthentic: finite(inau),
                types: AgentType::ALL
                    .into_iter()
                    .filter_map(|t| rates[t.index()].map(|r| json!({ "type": t.tag(), "rate": r })))
                    .collect(),
                selected_k: l.boots.iter().map(|b| b.clustering.k).collect(),
                config: &echo,
            };
            write_json(&a.out.join(format!("{stem}.{name}.misclass.json")), &report)?;
        }
        Ok((data.meta.population.clone(), labelings))
    });
    let results: Vec<_> = results.into_iter().collect::<Result<_>>()?;
    let pop = &results[0].0;
    if results.iter().any(|(p, _)| p != pop) {
        // per-run files are written; a cross-run summary needs one population
        return Err(Error::invalid("dataset runs have different populations; no summary written"));
    }
    for (mi, &m) in methods.iter().enumerate() {
        let per: Vec<_> = results.iter().map(|(_, l)| &l[mi]).collect();
        let o = outcome_from_labelings(m, &per, pop)?;
        let summary = SummaryJson::new(m, per.len(), &o.summary, &o.authentic, &o.inauthentic, echo.clone());
        write_json(&a.out.join(format!("summary.{}.json", m.name())), &summary)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvaluateReport {
    config: serde_json::Value,
    filter: String,
    runs: usize,
    baseline: McsJson,
    selected: Vec<serde_json::Value>,
    expected: Vec<serde_json::Value>,
}

fn labels_for(labels: &Path, data: &[RunData], method: Method) -> Result<Option<Vec<Jury>>> {
    let files: Vec<PathBuf> = if labels.is_dir() {
        data.iter()
            .map(|d| labels.join(format!("{}.{}.labels.csv", run_stem(d.meta.run_index), method.name())))
            .collect()
    } else {
        let name = labels.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if !name.contains(&format!(".{}.", method.name())) && !(method == Method::Gmm && !name.contains(".KM.")) {
            return Ok(None);
        }
        if data.len() != 1 {
            return Err(Error::invalid("a single labels file needs a single-run dataset"));
        }
        vec![labels.to_path_buf()]
    };
    if !files.iter().all(|f| f.exists()) {
        return Ok(None);
    }
    let mut juries = Vec::with_capacity(files.len());
    for (f, d) in files.iter().zip(data) {
        let l = format::read_labels(f)?;
        if l.final_labels.len() != d.agents() {
            return Err(Error::invalid(format!(
                "{}: {} labeled agents but the dataset run has {}",
                f.display(),
                l.final_labels.len(),
                d.agents()
            )));
        }
        juries.push(Jury::new(l.final_labels.iter().enumerate().filter(|(_, l)| l.is_authentic()).map(|(i, _)| i).collect()));
    }
    Ok(Some(juries))
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let filter = RoundFilter::from_name(&a.filter).ok_or_else(|| Error::invalid(format!("unknown filter {:?} (expected none or active)", a.filter)))?;
    let modes: Vec<JuryMode> = if a.jury_mode.eq_ignore_ascii_case("all") {
        JuryMode::ALL.to_vec()
    } else {
        vec![JuryMode::from_name(&a.jury_mode).ok_or_else(|| Error::invalid(format!("unknown jury mode {:?}", a.jury_mode)))?]
    };
    let data = format::read_dataset(&a.dataset)?;
    let everyone: Vec<_> = data.iter().map(|d| mcs(d, &Jury::everyone(d.agents()), &filter)).collect();
    let mut report = EvaluateReport {
        config: json!({
            "command": "evaluate",
            "dataset": a.dataset.display().to_string(),
            "labels": a.labels.as_ref().map(|p| p.display().to_string()),
            "summary": a.summary.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "filter": a.filter,
            "jury_mode": a.jury_mode,
        }),
        filter: filter.name().unwrap_or("custom").to_owned(),
        runs: data.len(),
        baseline: (&aggregate_mcs(&everyone)).into(),
        selected: Vec::new(),
        expected: Vec::new(),
    };
    if let Some(labels) = &a.labels {
        let mut any = false;
        for m in Method::BOTH {
            if let Some(juries) = labels_for(labels, &data, m)? {
                any = true;
                let values: Vec<_> = data.iter().zip(&juries).map(|(d, j)| mcs(d, j, &filter)).collect();
                let sizes: Vec<f64> = juries.iter().map(|j| j.len() as f64).collect();
                report.selected.push(json!({
                    "method": m.name(),
                    "mcs": McsJson::from(&aggregate_mcs(&values)),
                    "jury_size": Stat::of(&sizes),
                }));
            }
        }
        if !any {
            return Err(Error::invalid(format!("{}: no labels files match the dataset runs", labels.display())));
        }
    }
    for path in &a.summary {
        let s: SummaryJson = read_json(path)?;
        let summary = s.to_summary()?;
        for &mode in &modes {
            let mut values = Vec::with_capacity(data.len());
            for d in &data {
                let jury = jury_core::labeling::expected_jury(d.population(), &summary, mode)?;
                values.push(mcs(d, &jury, &filter));
            }
            report.expected.push(json!({
                "method": s.method,
                "mode": mode.name(),
                "mcs": McsJson::from(&aggregate_mcs(&values)),
            }));
        }
    }
    match &a.out {
        Some(p) => write_json(p, &report),
        None => {
            let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Json { path: PathBuf::from("<stdout>"), source: e })?;
            println!("{text}");
            Ok(())
        }
    }
}

fn reproduce(a: &ReproduceArgs) -> Result<()> {
    if !(a.scale > 0.0 && a.scale.is_finite()) {
        return Err(Error::invalid(format!("scale {} must be positive", a.scale)));
    }
    let study = Study { seed: a.seed, runs: runs_for_scale(a.scale), jobs: jobs(a.jobs), classify: ClassifyConfig::default() };
    let opts = ReproduceOptions {
        targets: a.targets.clone(),
        noises: report::parse_noise_list(&a.noise)?,
        populations: report::parse_population_list(&a.populations)?,
        methods: parse_methods(&a.method)?,
    };
    let echo = json!({
        "command": "reproduce",
        "targets": a.targets.iter().map(|t| format!("{t:?}").to_lowercase()).collect::<Vec<_>>(),
        "scale": a.scale,
        "runs": study.runs,
        "seed": a.seed,
        "noise": a.noise,
        "populations": a.populations,
        "method": a.method,
    });
    let out = report::reproduce(&study, &opts, echo)?;
    let t = &out.tables;
    if !t.table2.is_empty() || !t.table3.is_empty() || !t.robustness.is_empty() {
        write_json(&a.out.join("tables.json"), t)?;
        let (ok, total) = t.within_counts();
        println!("tables.json: {ok}/{total} cells within tolerance ({} runs)", study.runs);
    }
    if let Some(f) = &out.fig1 {
        write_atomic(&a.out.join("fig1.csv"), f.as_bytes())?;
        println!("fig1.csv: {} rows", f.lines().count() - 1);
    }
    if let Some(f) = &out.fig2 {
        write_atomic(&a.out.join("fig2.csv"), f.as_bytes())?;
        println!("fig2.csv: {} rows", f.lines().count() - 1);
    }
    Ok(())
}
