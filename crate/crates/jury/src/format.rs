//! On-disk formats: vote CSV plus run manifest, labels CSV, JSON reports.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use jury_core::labeling::{AgentLabeling, Label};
use jury_core::model::{AgentType, CompetenceRange, NoiseLevel, Population, Properties, Sign, TypeCounts};
use jury_core::sim::{RunData, RunMeta, VoteMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json { path: path.to_path_buf(), source: e })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json { path: path.to_path_buf(), source: e })
}

/// Per-type agent counts keyed by type tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsJson {
    #[serde(rename = "A", default)]
    pub a: usize,
    #[serde(rename = "B_up", default)]
    pub b_up: usize,
    #[serde(rename = "B_down", default)]
    pub b_down: usize,
    #[serde(rename = "B_both", default)]
    pub b_both: usize,
    #[serde(rename = "D_up", default)]
    pub d_up: usize,
    #[serde(rename = "D_down", default)]
    pub d_down: usize,
    #[serde(rename = "D_both", default)]
    pub d_both: usize,
    #[serde(rename = "L_up", default)]
    pub l_up: usize,
    #[serde(rename = "L_down", default)]
    pub l_down: usize,
    #[serde(rename = "L_both", default)]
    pub l_both: usize,
}

impl From<&TypeCounts> for CountsJson {
    fn from(c: &TypeCounts) -> Self {
        let [a, b_up, b_down, b_both, d_up, d_down, d_both, l_up, l_down, l_both] = c.0;
        CountsJson { a, b_up, b_down, b_both, d_up, d_down, d_both, l_up, l_down, l_both }
    }
}

impl From<CountsJson> for TypeCounts {
    fn from(c: CountsJson) -> Self {
        TypeCounts([c.a, c.b_up, c.b_down, c.b_both, c.d_up, c.d_down, c.d_both, c.l_up, c.l_down, c.l_both])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseJson {
    pub preset: Option<String>,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

impl From<&NoiseLevel> for NoiseJson {
    fn from(n: &NoiseLevel) -> Self {
        NoiseJson { preset: n.preset_name().map(str::to_owned), p1: n.p1, p2: n.p2, p3: n.p3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompetenceJson {
    pub low: f64,
    pub high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    pub run_index: usize,
    pub rounds: usize,
    pub agents: usize,
    /// Ground-truth type counts; agents are laid out type by type in
    /// canonical order.
    pub population: CountsJson,
    pub noise: NoiseJson,
    pub competence: CompetenceJson,
    /// Vote CSV file name, relative to the manifest.
    pub votes: String,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl Manifest {
    pub fn for_run(data: &RunData, votes_file: &str, config: serde_json::Value) -> Self {
        let meta = &data.meta;
        Manifest {
            format_version: FORMAT_VERSION,
            seed: meta.seed,
            run_index: meta.run_index,
            rounds: data.rounds(),
            agents: data.agents(),
            population: meta.population.counts().into(),
            noise: (&meta.noise).into(),
            competence: CompetenceJson { low: meta.competence.low(), high: meta.competence.high() },
            votes: votes_file.to_owned(),
            config,
        }
    }

    fn meta(&self, path: &Path) -> Result<RunMeta> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "{}: unsupported format_version {} (expected {FORMAT_VERSION})",
                path.display(),
                self.format_version
            )));
        }
        let population = Population::new(self.population.into())?;
        if population.len() != self.agents {
            return Err(Error::invalid(format!(
                "{}: population counts sum to {} but agents = {}",
                path.display(),
                population.len(),
                self.agents
            )));
        }
        Ok(RunMeta {
            population,
            noise: NoiseLevel::new(self.noise.p1, self.noise.p2, self.noise.p3)?,
            competence: CompetenceRange::new(self.competence.low, self.competence.high)?,
            seed: self.seed,
            run_index: self.run_index,
        })
    }
}

pub fn votes_csv(data: &RunData) -> String {
    let n = data.agents();
    let mut out = String::with_capacity((data.rounds() + 1) * (3 * n + 16));
    out.push_str("round,p1,p2,p3");
    for a in 0..n {
        let _ = write!(out, ",agent_{a}");
    }
    out.push('\n');
    for (t, props) in data.props.iter().enumerate() {
        let _ = write!(out, "{t},{},{},{}", props.p1.value(), props.p2.value(), props.p3.value());
        for &v in data.votes.row(t) {
            out.push_str(if v > 0 { ",1" } else { ",-1" });
        }
        out.push('\n');
    }
    out
}

fn parse_sign(path: &Path, line: u64, column: usize, field: &[u8]) -> Result<Sign> {
    match field {
        b"1" => Ok(Sign::Plus),
        b"-1" => Ok(Sign::Minus),
        other => Err(Error::parse(
            path,
            line,
            column,
            format!("expected 1 or -1, found {:?}", String::from_utf8_lossy(other)),
        )),
    }
}

/// Parses a vote CSV against the agent count and round count it must have.
pub fn parse_votes_csv(path: &Path, text: &[u8], agents: usize, rounds: usize) -> Result<(VoteMatrix, Vec<Properties>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text);
    let mut record = csv::ByteRecord::new();
    let width = 4 + agents;
    let read = |reader: &mut csv::Reader<&[u8]>, record: &mut csv::ByteRecord| -> Result<bool> {
        reader.read_byte_record(record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(path, line, 1, e.to_string())
        })
    };
    if !read(&mut reader, &mut record)? {
        return Err(Error::parse(path, 1, 1, "empty file, expected a header row"));
    }
    for (i, field) in record.iter().enumerate() {
        let want = match i {
            0 => "round".to_owned(),
            1..=3 => format!("p{i}"),
            _ => format!("agent_{}", i - 4),
        };
        if field != want.as_bytes() {
            return Err(Error::parse(
                path,
                1,
                i + 1,
                format!("header field {:?}, expected {want:?}", String::from_utf8_lossy(field)),
            ));
        }
    }
    if record.len() != width {
        return Err(Error::parse(path, 1, record.len().min(width) + 1, format!("header has {} fields, expected {width}", record.len())));
    }
    let mut data = Vec::with_capacity(rounds * agents);
    let mut props = Vec::with_capacity(rounds);
    let mut t = 0usize;
    while read(&mut reader, &mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(Error::parse(path, line, record.len().min(width) + 1, format!("row has {} fields, expected {width}", record.len())));
        }
        if record[0] != *t.to_string().as_bytes() {
            return Err(Error::parse(path, line, 1, format!("expected round index {t}")));
        }
        let p = [
            parse_sign(path, line, 2, &record[1])?,
            parse_sign(path, line, 3, &record[2])?,
            parse_sign(path, line, 4, &record[3])?,
        ];
        props.push(Properties::new(p[0], p[1], p[2]));
        for (j, field) in record.iter().enumerate().skip(4) {
            data.push(parse_sign(path, line, j + 1, field)?.value());
        }
        t += 1;
    }
    if t != rounds {
        let line = reader.position().line();
        return Err(Error::parse(path, line, 1, format!("file ends after {t} rounds, manifest declares {rounds}")));
    }
    Ok((VoteMatrix::from_raw(rounds, agents, data)?, props))
}

/// Manifest path belonging to a vote CSV (`run_000.csv` → `run_000.manifest.json`).
pub fn manifest_path_for(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}.manifest.json"))
}

pub fn run_stem(index: usize) -> String {
    format!("run_{index:03}")
}

/// Writes `run_XXX.csv` and `run_XXX.manifest.json` into `dir`.
pub fn write_run(dir: &Path, data: &RunData, config: serde_json::Value) -> Result<PathBuf> {
    let stem = run_stem(data.meta.run_index);
    let csv_name = format!("{stem}.csv");
    write_atomic(&dir.join(&csv_name), votes_csv(data).as_bytes())?;
    let manifest_path = dir.join(format!("{stem}.manifest.json"));
    write_json(&manifest_path, &Manifest::for_run(data, &csv_name, config))?;
    Ok(manifest_path)
}

pub fn read_run(manifest_path: &Path) -> Result<RunData> {
    let manifest: Manifest = read_json(manifest_path)?;
    let meta = manifest.meta(manifest_path)?;
    let csv_path = manifest_path.with_file_name(&manifest.votes);
    let text = fs::read(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let (votes, props) = parse_votes_csv(&csv_path, &text, manifest.agents, manifest.rounds)?;
    Ok(RunData::new(votes, props, meta)?)
}

/// Manifests of a dataset given as a directory, a manifest or a vote CSV.
pub fn dataset_manifests(path: &Path) -> Result<Vec<PathBuf>> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_dir() {
        let mut found = Vec::new();
        for entry in fs::read_dir(path).map_err(|e| Error::io(path, e))? {
            let p = entry.map_err(|e| Error::io(path, e))?.path();
            if p.file_name().is_some_and(|n| n.to_string_lossy().ends_with(".manifest.json")) {
                found.push(p);
            }
        }
        found.sort();
        if found.is_empty() {
            return Err(Error::invalid(format!("{}: no run manifests found", path.display())));
        }
        Ok(found)
    } else if path.to_string_lossy().ends_with(".manifest.json") {
        Ok(vec![path.to_path_buf()])
    } else {
        Ok(vec![manifest_path_for(path)])
    }
}

pub fn read_dataset(path: &Path) -> Result<Vec<RunData>> {
    dataset_manifests(path)?.iter().map(|m| read_run(m)).collect()
}

pub fn labels_csv(labeling: &AgentLabeling, pop: &Population) -> String {
    let mut out = String::from("agent_id,true_type");
    for b in 1..=labeling.boots.len() {
        let _ = write!(out, ",boot_{b}");
    }
    out.push_str(",final\n");
    for a in 0..labeling.agents() {
        let _ = write!(out, "{a},{}", pop.agent_type(a).tag());
        for boot in &labeling.boots {
            let _ = write!(out, ",{}", boot.agent_labels[a].name());
        }
        let _ = writeln!(out, ",{}", labeling.final_labels[a].name());
    }
    out
}

/// Per-agent labels read back from a labels CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelsFile {
    pub true_types: Vec<AgentType>,
    pub boots: Vec<Vec<Label>>,
    pub final_labels: Vec<Label>,
}

pub fn parse_labels_csv(path: &Path, text: &[u8]) -> Result<LabelsFile> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text);
    let header = reader
        .headers()
        .map_err(|e| Error::parse(path, e.position().map_or(1, |p| p.line()), 1, e.to_string()))?
        .clone();
    let n_fields = header.len();
    let ok = n_fields >= 3
        && &header[0] == "agent_id"
        && &header[1] == "true_type"
        && &header[n_fields - 1] == "final"
        && (2..n_fields - 1).all(|i| header[i] == format!("boot_{}", i - 1));
    if !ok {
        return Err(Error::parse(path, 1, 1, "expected header agent_id,true_type,boot_1..boot_B,final"));
    }
    let n_boots = n_fields - 3;
    let mut out = LabelsFile { true_types: Vec::new(), boots: vec![Vec::new(); n_boots], final_labels: Vec::new() };
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, e.position().map_or(0, |p| p.line()), 1, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec[0] != *i.to_string() {
            return Err(Error::parse(path, line, 1, format!("expected agent_id {i}")));
        }
        let t = AgentType::from_tag(&rec[1]).ok_or_else(|| Error::parse(path, line, 2, format!("unknown agent type {:?}", &rec[1])))?;
        out.true_types.push(t);
        let label = |j: usize| Label::from_name(&rec[j]).ok_or_else(|| Error::parse(path, line, j + 1, format!("unknown label {:?}", &rec[j])));
        for b in 0..n_boots {
            out.boots[b].push(label(2 + b)?);
        }
        out.final_labels.push(label(n_fields - 1)?);
    }
    Ok(out)
}

pub fn read_labels(path: &Path) -> Result<LabelsFile> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_labels_csv(path, &text)
}
