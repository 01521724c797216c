//! Cluster labeling by L1-penalised logistic regression, bootstrap
//! aggregation and jury selection.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, fabs, floor, log, sqrt};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::clustering::{self, ClusteringResult, GapConfig, GmmConfig, Method, Points};
use crate::model::{AgentType, Population, Sign};
use crate::numerics::{component_scores, leading_correlation_pairs};
use crate::rng::StreamKey;
use crate::sim::{bootstrap_rounds, RunData, VoteMatrix};
use crate::{Error, Result};

/// Per-round mean vote of each cluster, with post quality as response.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterDesign {
    rounds: usize,
    k: usize,
    /// Row-major `rounds × k`.
    data: Vec<f64>,
    response: Vec<Sign>,
}

impl ClusterDesign {
    pub fn new(rounds: usize, k: usize, data: Vec<f64>, response: Vec<Sign>) -> Result<Self> {
        if data.len() != rounds * k || response.len() != rounds {
            return Err(Error::invalid(format!(
                "design of {rounds} rounds and {k} columns got {} values and {} responses",
                data.len(),
                response.len()
            )));
        }
        Ok(ClusterDesign { rounds, k, data, response })
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.data[t * self.k + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rounds).map(|t| self.get(t, j)).collect()
    }

    pub fn response(&self) -> &[Sign] {
        &self.response
    }
}

/// Column `j` at round `t` is the mean of `votes[t][a]` over agents `a` in
/// cluster `j`.
pub fn cluster_mean_votes(votes: &VoteMatrix, response: &[Sign], assignments: &[usize], k: usize) -> Result<ClusterDesign> {
    let (r, n) = (votes.rounds(), votes.agents());
    if assignments.len() != n {
        return Err(Error::invalid(format!(
            "{} assignments for {n} agents",
            assignments.len()
        )));
    }
    if let Some(&bad) = assignments.iter().find(|&&a| a >= k) {
        return Err(Error::invalid(format!("cluster index {bad} out of range for k = {k}")));
    }
    let mut size = vec![0usize; k];
    for &a in assignments {
        size[a] += 1;
    }
    if let Some(j) = size.iter().position(|&s| s == 0) {
        return Err(Error::invalid(format!("cluster {j} is empty")));
    }
    let mut data = vec![0.0; r * k];
    let mut sums = vec![0i32; k];
    for t in 0..r {
        sums.iter_mut().for_each(|s| *s = 0);
        for (&v, &a) in votes.row(t).iter().zip(assignments) {
            sums[a] += v as i32;
        }
        for j in 0..k {
            data[t * k + j] = sums[j] as f64 / size[j] as f64;
        }
    }
    ClusterDesign::new(r, k, data, response.to_vec())
}

/// Held-out loss used to pick lambda.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CvMeasure {
    /// Binomial deviance.
    Deviance,
    /// Misclassification rate at the 0.5 cut.
    Class,
}

impl CvMeasure {
    #[inline]
    fn loss(self, y: f64, p: f64) -> f64 {
        match self {
            CvMeasure::Deviance => {
                let p = p.clamp(CV_P_MIN, 1.0 - CV_P_MIN);
                -2.0 * (y * log(p) + (1.0 - y) * log(1.0 - p))
            }
            CvMeasure::Class => {
                if (p > 0.5) == (y == 1.0) {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            CvMeasure::Deviance => "deviance",
            CvMeasure::Class => "class",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.trim() {
            "deviance" => Some(CvMeasure::Deviance),
            "class" => Some(CvMeasure::Class),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LassoConfig {
    pub folds: usize,
    pub measure: CvMeasure,
    pub n_lambda: usize,
    /// Smallest-to-largest lambda ratio; `None` picks 1e-4 when there are
    /// more observations than predictors and 1e-2 otherwise.
    pub lambda_min_ratio: Option<f64>,
    pub tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig { folds: 5, measure: CvMeasure::Class, n_lambda: 100, lambda_min_ratio: None, tol: 1e-7, max_outer: 100, max_inner: 100_000 }
    }
}

/// Penalised logistic fit at the one-standard-error lambda.
#[derive(Clone, Debug, PartialEq)]
pub struct LassoFit {
    pub intercept: f64,
    /// Coefficients on the original column scale; exact zeros are kept.
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub lambda_min: f64,
    pub lambdas: Vec<f64>,
    pub cv_mean: Vec<f64>,
    pub cv_se: Vec<f64>,
}

/// Fitted probabilities are kept in `[FIT_P_MIN, 1 − FIT_P_MIN]`.
const FIT_P_MIN: f64 = 1e-9;
/// Held-out probabilities are clamped harder when scoring deviance.
const CV_P_MIN: f64 = 1e-5;

#[inline]
fn sigmoid(eta: f64) -> f64 {
    1.0 / (1.0 + exp(-eta))
}

/// Standardised predictors; constant columns are flagged and left out.
struct Standardized {
    n: usize,
    p: usize,
    /// Column-major `n × p`.
    x: Vec<f64>,
    mean: Vec<f64>,
    sd: Vec<f64>,
    active: Vec<bool>,
}

impl Standardized {
    fn new(design: &ClusterDesign, rows: &[usize]) -> Self {
        let (n, p) = (rows.len(), design.k);
        let mut x = vec![0.0; n * p];
        let mut mean = vec![0.0; p];
        let mut sd = vec![1.0; p];
        let mut active = vec![false; p];
        for j in 0..p {
            let col = &mut x[j * n..(j + 1) * n];
            for (c, &t) in col.iter_mut().zip(rows) {
                *c = design.get(t, j);
            }
            let first = col.first().copied().unwrap_or(0.0);
            if col.iter().all(|&v| v == first) {
                col.iter_mut().for_each(|v| *v = 0.0);
                continue;
            }
            let m = col.iter().sum::<f64>() / n as f64;
            let s = sqrt(col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64);
            col.iter_mut().for_each(|v| *v = (*v - m) / s);
            mean[j] = m;
            sd[j] = s;
            active[j] = true;
        }
        Standardized { n, p, x, mean, sd, active }
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.x[j * self.n..(j + 1) * self.n]
    }
}

/// One coefficient vector on the standardised scale.
#[derive(Clone, Debug)]
struct PathPoint {
    b0: f64,
    beta: Vec<f64>,
}

struct PathFit {
    points: Vec<PathPoint>,
}

fn null_deviance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    -2.0 * n * (ybar * log(ybar) + (1.0 - ybar) * log(1.0 - ybar))
}

fn binomial_deviance(y: &[f64], eta: &[f64]) -> f64 {
    y.iter()
        .zip(eta)
        .map(|(&yi, &e)| {
            let p = sigmoid(e).clamp(FIT_P_MIN, 1.0 - FIT_P_MIN);
            -2.0 * (yi * log(p) + (1.0 - yi) * log(1.0 - p))
        })
        .sum()
}

fn lambda_max(std: &Standardized, y: &[f64]) -> f64 {
    let ybar = y.iter().sum::<f64>() / std.n as f64;
    (0..std.p)
        .filter(|&j| std.active[j])
        .map(|j| fabs(std.col(j).iter().zip(y).map(|(x, yi)| x * (yi - ybar)).sum::<f64>()) / std.n as f64)
        .fold(0.0, f64::max)
}

/// Coordinate-descent IRLS along `lambdas`, warm-started. Stops early (as
/// glmnet does) once the fraction of deviance explained saturates; the
/// returned path may then be shorter than `lambdas`.
fn fit_path(std: &Standardized, y: &[f64], lambdas: &[f64], cfg: &LassoConfig, early_stop: bool) -> Result<PathFit> {
    let (n, p) = (std.n, std.p);
    let nf = n as f64;
    let ybar = y.iter().sum::<f64>() / nf;
    let mut b0 = log(ybar / (1.0 - ybar));
    let mut beta = vec![0.0; p];
    let dev0 = null_deviance(y);
    let mut eta = vec![b0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut resid = vec![0.0; n];
    let mut points = Vec::with_capacity(lambdas.len());
    let mut prev_ratio = 0.0;
    // at or above lambda_max the exact solution is the null model; solving
    // for it numerically can leave round-off sized coefficients
    let null_above = lambda_max(std, y) * (1.0 - 1e-9);
    for (li, &lambda) in lambdas.iter().enumerate() {
        if lambda >= null_above && beta.iter().all(|&b| b == 0.0) {
            points.push(PathPoint { b0, beta: beta.clone() });
            continue;
        }
        let mut outer = 0;
        loop {
            outer += 1;
            if outer > cfg.max_outer {
                return Err(Error::LassoNoConvergence { lambda });
            }
            // quadratic approximation at the current coefficients
            for i in 0..n {
                let pi = sigmoid(eta[i]).clamp(FIT_P_MIN, 1.0 - FIT_P_MIN);
                w[i] = pi * (1.0 - pi);
                z[i] = eta[i] + (y[i] - pi) / w[i];
                resid[i] = z[i] - eta[i];
            }
            let wsum: f64 = w.iter().sum();
            let xw: Vec<f64> = (0..p)
                .map(|j| if std.active[j] { std.col(j).iter().zip(&w).map(|(x, wi)| wi * x * x).sum::<f64>() / nf } else { 0.0 })
                .collect();
            let old_b0 = b0;
            let old_beta = beta.clone();
            let mut inner = 0;
            loop {
                inner += 1;
                if inner > cfg.max_inner {
                    return Err(Error::LassoNoConvergence { lambda });
                }
                let mut max_change = 0.0f64;
                for j in 0..p {
                    if !std.active[j] {
                        continue;
                    }
                    let xj = std.col(j);
                    let bj = beta[j];
                    let grad = xj.iter().zip(&w).zip(&resid).map(|((x, wi), r)| wi * x * r).sum::<f64>() / nf + xw[j] * bj;
                    let nb = soft_threshold(grad, lambda) / xw[j];
                    if nb != bj {
                        let d = nb - bj;
                        for ((r, x), _) in resid.iter_mut().zip(xj).zip(0..) {
                            *r -= d * x;
                        }
                        beta[j] = nb;
                        max_change = max_change.max(xw[j] * d * d);
                    }
                }
                let d0 = resid.iter().zip(&w).map(|(r, wi)| r * wi).sum::<f64>() / wsum;
                if d0 != 0.0 {
                    b0 += d0;
                    resid.iter_mut().for_each(|r| *r -= d0);
                    max_change = max_change.max(wsum / nf * d0 * d0);
                }
                if max_change < cfg.tol {
                    break;
                }
            }
            for i in 0..n {
                let mut e = b0;
                for j in 0..p {
                    if beta[j] != 0.0 {
                        e += beta[j] * std.x[j * n + i];
                    }
                }
                eta[i] = e;
            }
            // same scale as the inner test: curvature-weighted squared steps
            let mut change = wsum / nf * (b0 - old_b0) * (b0 - old_b0);
            for j in 0..p {
                let d = beta[j] - old_beta[j];
                change = change.max(xw[j] * d * d);
            }
            if change < cfg.tol {
                break;
            }
        }
        points.push(PathPoint { b0, beta: beta.clone() });
        if early_stop && li >= 4 {
            let ratio = 1.0 - binomial_deviance(y, &eta) / dev0;
            if ratio > 0.999 || ratio - prev_ratio < 1e-5 * ratio {
                break;
            }
            prev_ratio = ratio;
        } else if early_stop {
            prev_ratio = 1.0 - binomial_deviance(y, &eta) / dev0;
        }
    }
    Ok(PathFit { points })
}

#[inline]
fn soft_threshold(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

fn predict_eta(std_train: &Standardized, pt: &PathPoint, design: &ClusterDesign, t: usize) -> f64 {
    let mut e = pt.b0;
    for j in 0..std_train.p {
        if pt.beta[j] != 0.0 {
            e += pt.beta[j] * (design.get(t, j) - std_train.mean[j]) / std_train.sd[j];
        }
    }
    e
}

/// L1-penalised logistic regression of `p1` (+1 ↦ 1) on the design columns
/// with an unpenalised intercept. Lambda is chosen by `cfg.folds`-fold
/// cross-validated binomial deviance under the one-standard-error rule.
pub fn lasso_logistic<R: Rng + ?Sized>(design: &ClusterDesign, rng: &mut R, cfg: &LassoConfig) -> Result<LassoFit> {
    let n = design.rounds;
    let p = design.k;
    if p == 0 {
        return Err(Error::invalid("design has no columns"));
    }
    if cfg.folds < 2 || n < cfg.folds {
        return Err(Error::invalid(format!("{n} rounds cannot be split into {} folds", cfg.folds)));
    }
    let y: Vec<f64> = design.response.iter().map(|s| if s.is_plus() { 1.0 } else { 0.0 }).collect();
    let positives = y.iter().filter(|&&v| v == 1.0).count();
    if positives == 0 || positives == n {
        return Err(Error::DegenerateResponse(format!(
            "all {n} rounds have the same quality, nothing to regress"
        )));
    }
    let all: Vec<usize> = (0..n).collect();
    let std = Standardized::new(design, &all);

    let lmax = lambda_max(&std, &y);
    if lmax == 0.0 {
        // no usable predictor: intercept-only model, every coefficient zero
        let ybar = positives as f64 / n as f64;
        return Ok(LassoFit {
            intercept: log(ybar / (1.0 - ybar)),
            beta: vec![0.0; p],
            lambda: 0.0,
            lambda_min: 0.0,
            lambdas: Vec::new(),
            cv_mean: Vec::new(),
            cv_se: Vec::new(),
        });
    }
    let ratio = cfg.lambda_min_ratio.unwrap_or(if n > p { 1e-4 } else { 1e-2 });
    let n_lambda = cfg.n_lambda.max(2);
    let lambdas_full: Vec<f64> = (0..n_lambda)
        .map(|i| lmax * libm::pow(ratio, i as f64 / (n_lambda - 1) as f64))
        .collect();
    let full = fit_path(&std, &y, &lambdas_full, cfg, true)?;
    let lambdas: Vec<f64> = lambdas_full[..full.points.len()].to_vec();
    let l = lambdas.len();

    // folds: random permutation, fold = position mod K
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold_of[i] = pos % cfg.folds;
    }
    let mut cv_raw = vec![vec![0.0; l]; cfg.folds];
    let mut fold_size = vec![0usize; cfg.folds];
    for f in 0..cfg.folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        fold_size[f] = test.len();
        let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let tr_pos = ytr.iter().filter(|&&v| v == 1.0).count();
        if tr_pos == 0 || tr_pos == ytr.len() {
            return Err(Error::DegenerateResponse(format!(
                "cross-validation fold {f} leaves a single response class for training"
            )));
        }
        let std_tr = Standardized::new(design, &train);
        let path = fit_path(&std_tr, &ytr, &lambdas, cfg, true)?;
        for li in 0..l {
            let pt = &path.points[li.min(path.points.len() - 1)];
            let loss: f64 = test
                .iter()
                .map(|&t| cfg.measure.loss(y[t], sigmoid(predict_eta(&std_tr, pt, design, t))))
                .sum();
            cv_raw[f][li] = loss / test.len() as f64;
        }
    }
    let total: f64 = fold_size.iter().sum::<usize>() as f64;
    let mut cv_mean = vec![0.0; l];
    let mut cv_se = vec![0.0; l];
    for li in 0..l {
        let m = (0..cfg.folds).map(|f| cv_raw[f][li] * fold_size[f] as f64).sum::<f64>() / total;
        let v = (0..cfg.folds)
            .map(|f| (cv_raw[f][li] - m) * (cv_raw[f][li] - m) * fold_size[f] as f64)
            .sum::<f64>()
            / total;
        cv_mean[li] = m;
        cv_se[li] = sqrt(v / (cfg.folds - 1) as f64);
    }
    // largest lambda attaining the minimum, then the 1-SE choice
    let mut imin = 0;
    for li in 1..l {
        if cv_mean[li] < cv_mean[imin] {
            imin = li;
        }
    }
    let bound = cv_mean[imin] + cv_se[imin];
    let i1se = (0..=imin).find(|&li| cv_mean[li] <= bound).unwrap_or(imin);

    let pt = &full.points[i1se];
    let mut beta = vec![0.0; p];
    let mut intercept = pt.b0;
    for j in 0..p {
        if pt.beta[j] != 0.0 {
            beta[j] = pt.beta[j] / std.sd[j];
            intercept -= beta[j] * std.mean[j];
        }
    }
    Ok(LassoFit { intercept, beta, lambda: lambdas[i1se], lambda_min: lambdas[imin], lambdas, cv_mean, cv_se })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Authentic,
    Inauthentic,
}

impl Label {
    pub const fn name(self) -> &'static str {
        match self {
            Label::Authentic => "authentic",
            Label::Inauthentic => "inauthentic",
        }
    }

    pub fn from_name(s: &str) -> Option<Label> {
        match s.trim() {
            "authentic" => Some(Label::Authentic),
            "inauthentic" => Some(Label::Inauthentic),
            _ => None,
        }
    }

    pub fn is_authentic(self) -> bool {
        self == Label::Authentic
    }
}

/// A zero coefficient marks the cluster inauthentic.
pub fn label_clusters(fit: &LassoFit) -> Vec<Label> {
    fit.beta
        .iter()
        .map(|&b| if b == 0.0 { Label::Inauthentic } else { Label::Authentic })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifyConfig {
    pub bootstraps: usize,
    /// Minimum number of authentic bootstrap labels for a final authentic
    /// label.
    pub threshold: usize,
    /// Number of spectral components clustered.
    pub q: usize,
    pub k_range: (usize, usize),
    pub gmm: GmmConfig,
    pub gap: GapConfig,
    pub lasso: LassoConfig,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            bootstraps: 5,
            threshold: 4,
            q: 2,
            k_range: (2, 20),
            gmm: GmmConfig::default(),
            gap: GapConfig::default(),
            lasso: LassoConfig::default(),
        }
    }
}

impl ClassifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bootstraps == 0 {
            return Err(Error::invalid("at least one bootstrap is required"));
        }
        if self.threshold == 0 || self.threshold > self.bootstraps {
            return Err(Error::invalid(format!(
                "threshold {} must lie in 1..={}",
                self.threshold, self.bootstraps
            )));
        }
        if self.q == 0 {
            return Err(Error::invalid("q must be positive"));
        }
        Ok(())
    }
}

/// Result of one bootstrap for one method.
#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapLabels {
    pub clustering: ClusteringResult,
    pub lasso: LassoFit,
    pub cluster_labels: Vec<Label>,
    /// Label forwarded to each agent from its cluster.
    pub agent_labels: Vec<Label>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentLabeling {
    pub method: Method,
    pub threshold: usize,
    pub boots: Vec<BootstrapLabels>,
    pub final_labels: Vec<Label>,
}

impl AgentLabeling {
    pub fn agents(&self) -> usize {
        self.final_labels.len()
    }

    /// Number of bootstraps that labeled `agent` authentic.
    pub fn authentic_votes(&self, agent: usize) -> usize {
        self.boots.iter().filter(|b| b.agent_labels[agent].is_authentic()).count()
    }

    /// Aggregates per-bootstrap agent labels with the threshold rule.
    pub fn from_bootstraps(method: Method, threshold: usize, boots: Vec<BootstrapLabels>) -> Self {
        let n = boots.first().map_or(0, |b| b.agent_labels.len());
        let final_labels = aggregate_labels(boots.iter().map(|b| b.agent_labels.as_slice()), n, threshold);
        AgentLabeling { method, threshold, boots, final_labels }
    }
}

/// Final label per agent: authentic iff at least `threshold` of the given
/// label vectors say authentic.
pub fn aggregate_labels<'a>(boots: impl Iterator<Item = &'a [Label]>, n: usize, threshold: usize) -> Vec<Label> {
    let mut count = vec![0usize; n];
    for labels in boots {
        for (c, l) in count.iter_mut().zip(labels) {
            if l.is_authentic() {
                *c += 1;
            }
        }
    }
    count
        .into_iter()
        .map(|c| if c >= threshold { Label::Authentic } else { Label::Inauthentic })
        .collect()
}

fn method_id(m: Method) -> u64 {
    match m {
        Method::Gmm => 0,
        Method::KMeans => 1,
    }
}

/// Runs every method on the same bootstrap samples and spectral
/// decompositions. Bootstrap `b` resamples with `key.child(b).child(0)`;
/// method `m` clusters with `key.child(b).child(1).child(m)` and draws its
/// cross-validation folds from `key.child(b).child(2).child(m)`. The result
/// for a method does not depend on which other methods are requested.
pub fn classify_agents_multi(data: &RunData, methods: &[Method], key: StreamKey, cfg: &ClassifyConfig) -> Result<Vec<AgentLabeling>> {
    cfg.validate()?;
    if data.rounds() < 2 {
        return Err(Error::invalid("classification needs at least two rounds"));
    }
    let mut per_method: Vec<Vec<BootstrapLabels>> = vec![Vec::with_capacity(cfg.bootstraps); methods.len()];
    for b in 0..cfg.bootstraps {
        let bkey = key.child(b as u64);
        let wrap = |e: Error| Error::Bootstrap { index: b, source: alloc::boxed::Box::new(e) };
        let sample = bootstrap_rounds(data, &mut bkey.child(0).stream()).map_err(wrap)?;
        let points = spectral_points(&sample.votes, cfg.q).map_err(wrap)?;
        let response: Vec<Sign> = sample.props.iter().map(|p| p.p1).collect();
        for (mi, &m) in methods.iter().enumerate() {
            let id = method_id(m);
            let out = label_bootstrap(&sample.votes, &response, &points, m, bkey.child(1).child(id), bkey.child(2).child(id), cfg)
                .map_err(wrap)?;
            per_method[mi].push(out);
        }
    }
    Ok(methods
        .iter()
        .zip(per_method)
        .map(|(&m, boots)| AgentLabeling::from_bootstraps(m, cfg.threshold, boots))
        .collect())
}

pub fn classify_agents(data: &RunData, method: Method, key: StreamKey, cfg: &ClassifyConfig) -> Result<AgentLabeling> {
    Ok(classify_agents_multi(data, &[method], key, cfg)?.remove(0))
}

/// Agents' scores on the leading `q` components of their vote correlation
/// matrix.
pub fn spectral_points(votes: &VoteMatrix, q: usize) -> Result<Points> {
    let d = leading_correlation_pairs(votes, q)?;
    Ok(component_scores(&d, q)?.into())
}

fn label_bootstrap(
    votes: &VoteMatrix,
    response: &[Sign],
    points: &Points,
    method: Method,
    cluster_key: StreamKey,
    lasso_key: StreamKey,
    cfg: &ClassifyConfig,
) -> Result<BootstrapLabels> {
    let clustering = clustering::select(points, method, cfg.k_range, cluster_key, &cfg.gmm, &cfg.gap)?;
    let design = cluster_mean_votes(votes, response, &clustering.assignments, clustering.k)?;
    let lasso = lasso_logistic(&design, &mut lasso_key.stream(), &cfg.lasso)?;
    let cluster_labels = label_clusters(&lasso);
    let agent_labels = clustering.assignments.iter().map(|&c| cluster_labels[c]).collect();
    Ok(BootstrapLabels { clustering, lasso, cluster_labels, agent_labels })
}

/// Set of agent ids, ascending.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Jury(Vec<usize>);

impl Jury {
    pub fn new(mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Jury(ids)
    }

    pub fn everyone(n: usize) -> Self {
        Jury((0..n).collect())
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, agent: usize) -> bool {
        self.0.binary_search(&agent).is_ok()
    }

    /// Members per agent type.
    pub fn composition(&self, pop: &Population) -> [usize; 10] {
        let mut c = [0; 10];
        for &a in &self.0 {
            c[pop.agent_type(a).index()] += 1;
        }
        c
    }
}

/// The agents whose final label is authentic.
pub fn select_jury(labeling: &AgentLabeling) -> Jury {
    Jury(
        labeling
            .final_labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_authentic())
            .map(|(i, _)| i)
            .collect(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TypeStat {
    pub mean: f64,
    pub sd: f64,
}

/// Mean and standard deviation of misclassification per agent type across
/// runs; `None` for types absent from the population.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MisclassSummary(pub [Option<TypeStat>; 10]);

impl MisclassSummary {
    pub fn get(&self, t: AgentType) -> Option<TypeStat> {
        self.0[t.index()]
    }

    pub fn set(&mut self, t: AgentType, stat: TypeStat) {
        self.0[t.index()] = Some(stat);
    }

    /// Summarises per-run rates (sample SD; 0 for a single run).
    pub fn from_runs(runs: &[[Option<f64>; 10]]) -> Self {
        let mut out = MisclassSummary::default();
        for t in AgentType::ALL {
            let vals: Vec<f64> = runs.iter().filter_map(|r| r[t.index()]).collect();
            if vals.is_empty() {
                continue;
            }
            let (mean, sd) = crate::metrics::mean_sd(&vals);
            out.set(t, TypeStat { mean, sd });
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum JuryMode {
    Best,
    Average,
    Worst,
}

impl JuryMode {
    pub const ALL: [JuryMode; 3] = [JuryMode::Best, JuryMode::Average, JuryMode::Worst];

    pub const fn name(self) -> &'static str {
        match self {
            JuryMode::Best => "best",
            JuryMode::Average => "average",
            JuryMode::Worst => "worst",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        JuryMode::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s.trim()))
    }

    /// Misclassification rate assumed by the mode.
    pub fn delta(self, stat: TypeStat) -> f64 {
        match self {
            JuryMode::Average => stat.mean,
            JuryMode::Best => (stat.mean - 2.0 * stat.sd).max(0.0),
            JuryMode::Worst => (stat.mean + 2.0 * stat.sd).min(1.0),
        }
    }
}

/// `min(⌊size·fraction⌋, size)`. A relative slack of 1e-9 absorbs binary
/// round-off so that e.g. 100·0.29 counts as 29.
pub fn keep_count(size: usize, fraction: f64) -> usize {
    let x = size as f64 * fraction.clamp(0.0, 1.0);
    (floor(x + 1e-9 * x.max(1.0)) as usize).min(size)
}

/// Jury that a method with the summarised error rates would select: the
/// first `⌊|A|(1−δ_A)⌋` authentic agents and, of every inauthentic type
/// `Y`, the first `⌊|Y|δ_Y⌋`.
pub fn expected_jury(pop: &Population, summary: &MisclassSummary, mode: JuryMode) -> Result<Jury> {
    let mut ids = Vec::new();
    for t in AgentType::ALL {
        let size = pop.counts().get(t);
        if size == 0 {
            continue;
        }
        let stat = summary
            .get(t)
            .ok_or_else(|| Error::invalid(format!("misclassification summary lacks type {}", t.tag())))?;
        let delta = mode.delta(stat);
        let keep = if t.is_authentic() { keep_count(size, 1.0 - delta) } else { keep_count(size, delta) };
        ids.extend(pop.agents_of(t).take(keep));
    }
    Ok(Jury(ids))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NoiseLevel, Properties, PopulationPreset, TypeCounts};
    use crate::sim::RunConfig;

    fn design_from_columns(cols: &[Vec<f64>], y: &[Sign]) -> ClusterDesign {
        let r = y.len();
        let k = cols.len();
        let mut data = vec![0.0; r * k];
        for t in 0..r {
            for j in 0..k {
                data[t * k + j] = cols[j][t];
            }
        }
        ClusterDesign::new(r, k, data, y.to_vec()).unwrap()
    }

    fn random_response(r: usize, seed: u64) -> Vec<Sign> {
        let mut rng = StreamKey::new(seed).stream();
        (0..r).map(|_| Sign::from_bool(rng.gen_bool(0.6))).collect()
    }

    #[test]
    fn mean_votes_trivial_cases() {
        let v = VoteMatrix::from_raw(3, 3, vec![1, 1, 1, 1, -1, 1, 1, -1, -1]).unwrap();
        let y = vec![Sign::Plus; 3];
        let d = cluster_mean_votes(&v, &y, &[0, 0, 0], 1).unwrap();
        assert_eq!(d.column(0), vec![1.0, 1.0 / 3.0, -1.0 / 3.0]);
        let d = cluster_mean_votes(&v, &y, &[1, 0, 0], 2).unwrap();
        assert_eq!(d.column(0), vec![1.0, 0.0, -1.0]);
        assert_eq!(d.column(1), vec![1.0, 1.0, 1.0]);
        assert!(cluster_mean_votes(&v, &y, &[0, 0, 0], 2).is_err());
        assert!(cluster_mean_votes(&v, &y, &[0, 3, 0], 2).is_err());
    }

    #[test]
    fn pair_voting_plus_minus_gives_zero_column() {
        let v = VoteMatrix::from_raw(2, 2, vec![1, -1, -1, 1]).unwrap();
        let d = cluster_mean_votes(&v, &[Sign::Plus, Sign::Minus], &[0, 0], 1).unwrap();
        assert_eq!(d.column(0), vec![0.0, 0.0]);
    }

    #[test]
    fn lasso_keeps_signal_and_drops_noise() {
        let r = 500;
        let y = random_response(r, 1);
        let mut rng = StreamKey::new(2).stream();
        let signal: Vec<f64> = y.iter().map(|s| if rng.gen_bool(0.8) { s.value() as f64 } else { -s.value() as f64 }).collect();
        let noise: Vec<f64> = (0..r).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let d = design_from_columns(&[signal, noise], &y);
        let fit = lasso_logistic(&d, &mut StreamKey::new(3).stream(), &LassoConfig::default()).unwrap();
        assert!(fit.beta[0] > 0.0);
        assert_eq!(fit.beta[1], 0.0);
        assert_eq!(label_clusters(&fit), vec![Label::Authentic, Label::Inauthentic]);
        assert!(fit.lambda >= fit.lambda_min);
    }

    #[test]
    fn lasso_on_perfect_predictor() {
        let y = random_response(200, 4);
        let x: Vec<f64> = y.iter().map(|s| s.value() as f64).collect();
        let d = design_from_columns(&[x], &y);
        let fit = lasso_logistic(&d, &mut StreamKey::new(5).stream(), &LassoConfig::default()).unwrap();
        assert!(fit.beta[0] > 0.0);
    }

    #[test]
    fn lasso_constant_column_is_zero() {
        let y = random_response(300, 6);
        let x: Vec<f64> = y.iter().map(|s| s.value() as f64 * 0.5).collect();
        let d = design_from_columns(&[vec![0.7; 300], x], &y);
        let fit = lasso_logistic(&d, &mut StreamKey::new(7).stream(), &LassoConfig::default()).unwrap();
        assert_eq!(fit.beta[0], 0.0);
        assert!(fit.beta[1] > 0.0);
    }

    #[test]
    fn lasso_rejects_single_class() {
        let y = vec![Sign::Plus; 50];
        let d = design_from_columns(&[vec![1.0; 50]], &y);
        assert!(matches!(
            lasso_logistic(&d, &mut StreamKey::new(1).stream(), &LassoConfig::default()),
            Err(Error::DegenerateResponse(_))
        ));
    }

    #[test]
    fn lasso_unpenalised_limit_matches_plain_logistic() {
        // With a tiny lambda the fit approaches the maximum likelihood
        // estimate, checked here against Newton's method on the raw scale.
        let r = 400;
        let y = random_response(r, 8);
        let mut rng = StreamKey::new(9).stream();
        let x: Vec<f64> = y.iter().map(|s| s.value() as f64 * 0.3 + rng.gen_range(-1.0..1.0)).collect();
        let yv: Vec<f64> = y.iter().map(|s| if s.is_plus() { 1.0 } else { 0.0 }).collect();
        let (mut a, mut b) = (0.0f64, 0.0f64);
        for _ in 0..50 {
            let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (xi, yi) in x.iter().zip(&yv) {
                let p = sigmoid(a + b * xi);
                let w = p * (1.0 - p);
                ga += yi - p;
                gb += (yi - p) * xi;
                haa += w;
                hab += w * xi;
                hbb += w * xi * xi;
            }
            let det = haa * hbb - hab * hab;
            a += (hbb * ga - hab * gb) / det;
            b += (haa * gb - hab * ga) / det;
        }
        let all: Vec<usize> = (0..r).collect();
        let d = design_from_columns(&[x], &y);
        let std = Standardized::new(&d, &all);
        let path = fit_path(&std, &yv, &[1e-9], &LassoConfig::default(), false).unwrap();
        let beta = path.points[0].beta[0] / std.sd[0];
        let intercept = path.points[0].b0 - beta * std.mean[0];
        assert!((beta - b).abs() < 1e-4, "{beta} vs {b}");
        assert!((intercept - a).abs() < 1e-4);
    }

    #[test]
    fn label_rule() {
        let fit = LassoFit {
            intercept: 0.0,
            beta: vec![0.8, 0.0, -0.3],
            lambda: 0.1,
            lambda_min: 0.1,
            lambdas: vec![],
            cv_mean: vec![],
            cv_se: vec![],
        };
        assert_eq!(label_clusters(&fit), vec![Label::Authentic, Label::Inauthentic, Label::Authentic]);
        let zero = LassoFit { beta: vec![0.0; 2], ..fit };
        assert!(label_clusters(&zero).iter().all(|l| *l == Label::Inauthentic));
    }

    #[test]
    fn four_of_five_rule() {
        use Label::*;
        let boots: Vec<Vec<Label>> = vec![
            vec![Authentic, Authentic, Authentic],
            vec![Authentic, Authentic, Inauthentic],
            vec![Authentic, Authentic, Authentic],
            vec![Authentic, Inauthentic, Inauthentic],
            vec![Inauthentic, Inauthentic, Authentic],
        ];
        let f = aggregate_labels(boots.iter().map(|b| b.as_slice()), 3, 4);
        assert_eq!(f, vec![Authentic, Inauthentic, Inauthentic]);
    }

    #[test]
    fn keep_counts() {
        assert_eq!(keep_count(100, 1.0 - 0.04), 96);
        assert_eq!(keep_count(100, 0.13), 13);
        assert_eq!(keep_count(100, 0.29), 29);
        assert_eq!(keep_count(100, 1.1), 100);
        assert_eq!(keep_count(7, 0.5), 3);
        assert_eq!(keep_count(0, 0.5), 0);
    }

    fn summary(a: TypeStat, rest: TypeStat) -> MisclassSummary {
        let mut s = MisclassSummary::default();
        for t in AgentType::ALL {
            s.set(t, if t.is_authentic() { a } else { rest });
        }
        s
    }

    #[test]
    fn expected_jury_sizes_per_mode() {
        let pop = Population::preset(PopulationPreset::All);
        let s = summary(TypeStat { mean: 0.04, sd: 0.04 }, TypeStat { mean: 0.5, sd: 0.3 });
        let avg = expected_jury(&pop, &s, JuryMode::Average).unwrap().composition(&pop);
        let best = expected_jury(&pop, &s, JuryMode::Best).unwrap().composition(&pop);
        let worst = expected_jury(&pop, &s, JuryMode::Worst).unwrap().composition(&pop);
        assert_eq!(avg[0], 96);
        assert_eq!(best[0], 100);
        assert_eq!(worst[0], 88);
        for t in 1..10 {
            assert_eq!(avg[t], 50);
            assert_eq!(best[t], 0);
            assert_eq!(worst[t], 100);
            assert!(best[t] <= avg[t] && avg[t] <= worst[t]);
        }
        let pair = Population::preset(PopulationPreset::BoosterUp);
        let s = summary(TypeStat { mean: 0.0, sd: 0.0 }, TypeStat { mean: 0.13, sd: 0.0 });
        let j = expected_jury(&pair, &s, JuryMode::Average).unwrap();
        assert_eq!(j.composition(&pair)[AgentType::BoosterUp.index()], 13);
        assert_eq!(j.members()[100], 100);
    }

    #[test]
    fn expected_jury_needs_every_present_type() {
        let pop = Population::preset(PopulationPreset::BoosterUp);
        let mut s = MisclassSummary::default();
        s.set(AgentType::Authentic, TypeStat { mean: 0.0, sd: 0.0 });
        assert!(expected_jury(&pop, &s, JuryMode::Average).is_err());
        s.set(AgentType::BoosterUp, TypeStat { mean: 0.1, sd: 0.0 });
        assert!(expected_jury(&pop, &s, JuryMode::Average).is_ok());
    }

    #[test]
    fn select_jury_takes_final_authentic() {
        use Label::*;
        let l = AgentLabeling {
            method: Method::Gmm,
            threshold: 4,
            boots: vec![],
            final_labels: vec![Authentic, Inauthentic, Authentic],
        };
        assert_eq!(select_jury(&l).members(), &[0, 2]);
    }

    #[test]
    fn classify_is_deterministic_and_forwards_labels() {
        let cfg = RunConfig {
            seed: 11,
            rounds: 200,
            population: TypeCounts::pair(AgentType::DistorterUp),
            noise: NoiseLevel::LOW,
            competence: Default::default(),
            runs: 1,
        };
        let data = crate::sim::simulate_run(&cfg, 0).unwrap();
        let ccfg = ClassifyConfig { k_range: (2, 6), ..ClassifyConfig::default() };
        let a = classify_agents(&data, Method::Gmm, StreamKey::new(3), &ccfg).unwrap();
        let b = classify_agents(&data, Method::Gmm, StreamKey::new(3), &ccfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.boots.len(), 5);
        for boot in &a.boots {
            for i in 0..data.agents() {
                for j in 0..data.agents() {
                    if boot.clustering.assignments[i] == boot.clustering.assignments[j] {
                        assert_eq!(boot.agent_labels[i], boot.agent_labels[j]);
                    }
                }
            }
        }
        let both = classify_agents_multi(&data, &[Method::KMeans, Method::Gmm], StreamKey::new(3), &ccfg).unwrap();
        assert_eq!(both[1], a);
    }

    #[test]
    fn distorters_are_separated_at_low_noise() {
        let cfg = RunConfig {
            seed: 5,
            rounds: 500,
            population: TypeCounts::pair(AgentType::DistorterUp),
            noise: NoiseLevel::LOW,
            competence: Default::default(),
            runs: 1,
        };
        let data = crate::sim::simulate_run(&cfg, 0).unwrap();
        let l = classify_agents(&data, Method::Gmm, StreamKey::new(1), &ClassifyConfig::default()).unwrap();
        let authentic_ok = l.final_labels[..100].iter().filter(|x| x.is_authentic()).count();
        let distorter_caught = l.final_labels[100..].iter().filter(|x| !x.is_authentic()).count();
        assert!(authentic_ok >= 95, "{authentic_ok}");
        assert!(distorter_caught >= 95, "{distorter_caught}");
    }

    #[test]
    fn classify_rejects_bad_config() {
        let data = RunData::new(
            VoteMatrix::from_raw(1, 1, vec![1]).unwrap(),
            vec![Properties { p1: Sign::Plus, p2: Sign::Plus, p3: Sign::Plus }],
            crate::sim::RunMeta {
                population: Population::new(TypeCounts::empty().with(AgentType::Authentic, 1)).unwrap(),
                noise: NoiseLevel::LOW,
                competence: Default::default(),
                seed: 0,
                run_index: 0,
            },
        )
        .unwrap();
        let bad = ClassifyConfig { threshold: 6, ..ClassifyConfig::default() };
        assert!(classify_agents(&data, Method::Gmm, StreamKey::new(1), &bad).is_err());
        assert!(classify_agents(&data, Method::Gmm, StreamKey::new(1), &ClassifyConfig::default()).is_err());
    }
}
