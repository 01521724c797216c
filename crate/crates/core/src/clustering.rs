//! Gaussian mixtures selected by BIC and k-means selected by the gap
//! statistic.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use rand::Rng;

use crate::numerics::ComponentScores;
use crate::rng::StreamKey;
use crate::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// `n` points in `dim` dimensions, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Points {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(n: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("points need at least one dimension"));
        }
        if data.len() != n * dim {
            return Err(Error::invalid(format!(
                "{n} points of dimension {dim} need {} values, got {}",
                n * dim,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("points must be finite"));
        }
        Ok(Points { n, dim, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.first().map_or(1, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::invalid("rows differ in dimension"));
            }
            data.extend_from_slice(r);
        }
        Points::new(rows.len(), dim, data)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for i in 0..self.n {
            for (a, &x) in m.iter_mut().zip(self.row(i)) {
                *a += x;
            }
        }
        m.iter_mut().for_each(|a| *a /= self.n.max(1) as f64);
        m
    }

    /// Mean over dimensions of the per-dimension (population) variance.
    pub fn average_variance(&self) -> f64 {
        let m = self.mean();
        let mut s = 0.0;
        for i in 0..self.n {
            for (x, mu) in self.row(i).iter().zip(&m) {
                s += (x - mu) * (x - mu);
            }
        }
        s / (self.n.max(1) * self.dim) as f64
    }

    /// Per-dimension `(min, max)`.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for i in 0..self.n {
            for ((lo, hi), &x) in b.iter_mut().zip(self.row(i)) {
                *lo = lo.min(x);
                *hi = hi.max(x);
            }
        }
        b
    }

    pub fn scaled(&self, factor: f64) -> Points {
        Points { n: self.n, dim: self.dim, data: self.data.iter().map(|x| x * factor).collect() }
    }

    pub fn permuted(&self, order: &[usize]) -> Points {
        let mut data = Vec::with_capacity(self.data.len());
        for &i in order {
            data.extend_from_slice(self.row(i));
        }
        Points { n: order.len(), dim: self.dim, data }
    }
}

impl From<ComponentScores> for Points {
    fn from(s: ComponentScores) -> Self {
        let (n, dim) = (s.n(), s.q());
        Points { n, dim, data: s.into_raw() }
    }
}

impl From<&ComponentScores> for Points {
    fn from(s: &ComponentScores) -> Self {
        Points { n: s.n(), dim: s.q(), data: s.as_slice().to_vec() }
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the centre nearest to `x`; ties go to the lowest index.
#[inline]
fn nearest(x: &[f64], centres: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centres.chunks_exact(dim).enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding: `k` centres drawn from the points with probability
/// proportional to squared distance from the centres chosen so far. When all
/// remaining distances are zero the draw falls back to uniform.
fn kmeans_pp<R: Rng + ?Sized>(points: &Points, k: usize, rng: &mut R) -> Vec<f64> {
    let (n, dim) = (points.n, points.dim);
    let mut centres = Vec::with_capacity(k * dim);
    centres.extend_from_slice(points.row(rng.gen_range(0..n)));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), &centres[..dim])).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            // guard against round-off landing on a zero-weight tail
            while d2[chosen] == 0.0 && chosen > 0 {
                chosen -= 1;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        let c = points.row(pick);
        centres.extend_from_slice(c);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), c));
        }
    }
    centres
}

// ---------------------------------------------------------------------------
// Gaussian mixtures

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmmConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Relative log-likelihood change below which EM stops.
    pub tol: f64,
    /// Diagonal regularisation as a multiple of the average data variance.
    pub reg_scale: f64,
    /// Failed restarts tolerated before the fit is abandoned.
    pub max_failed_restarts: usize,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig { restarts: 5, max_iter: 500, tol: 1e-6, reg_scale: 1e-6, max_failed_restarts: 20 }
    }
}

/// Mixture of `k` full-covariance Gaussians.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmModel {
    pub k: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    /// `k × dim`, row-major.
    pub means: Vec<f64>,
    /// `k` row-major `dim × dim` blocks.
    pub covariances: Vec<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after each E-step.
    pub loglik_trace: Vec<f64>,
    /// Maximum-responsibility component of each point.
    pub assignments: Vec<usize>,
}

impl GmmModel {
    pub fn mean(&self, j: usize) -> &[f64] {
        &self.means[j * self.dim..(j + 1) * self.dim]
    }

    pub fn covariance(&self, j: usize) -> &[f64] {
        let s = self.dim * self.dim;
        &self.covariances[j * s..(j + 1) * s]
    }

    /// Number of free parameters.
    pub fn parameters(&self) -> usize {
        gmm_parameters(self.k, self.dim)
    }

    pub fn bic(&self, n: usize) -> f64 {
        -2.0 * self.loglik + self.parameters() as f64 * log(n as f64)
    }
}

pub fn gmm_parameters(k: usize, dim: usize) -> usize {
    (k - 1) + k * dim + k * dim * (dim + 1) / 2
}

/// Lower Cholesky factor of a `d × d` row-major SPD matrix; `None` when not
/// positive definite.
fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for p in 0..j {
                s -= l[i * d + p] * l[j * d + p];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * d + i] = sqrt(s);
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

struct Component {
    log_weight: f64,
    mean: Vec<f64>,
    chol: Vec<f64>,
    /// `−½(d ln 2π + ln|Σ|)`
    log_norm: f64,
}

struct EmState {
    k: usize,
    dim: usize,
    weights: Vec<f64>,
    means: Vec<f64>,
    covariances: Vec<f64>,
    components: Vec<Component>,
}

enum StepFailure {
    Collapsed(usize),
    NotPositiveDefinite(usize),
}

/// Responsibility-weighted counts, means and (lower-triangle) scatter
/// matrices of every component.
fn weighted_moments(points: &Points, resp: &[f64], k: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (n, d) = (points.n, points.dim);
    let mut nk = vec![0.0; k];
    let mut means = vec![0.0; k * d];
    for i in 0..n {
        let x = points.row(i);
        for j in 0..k {
            let r = resp[i * k + j];
            if r == 0.0 {
                continue;
            }
            nk[j] += r;
            for (m, &xv) in means[j * d..(j + 1) * d].iter_mut().zip(x) {
                *m += r * xv;
            }
        }
    }
    for j in 0..k {
        if nk[j] > 0.0 {
            means[j * d..(j + 1) * d].iter_mut().for_each(|m| *m /= nk[j]);
        }
    }
    let mut scatter = vec![0.0; k * d * d];
    let mut diff = vec![0.0; d];
    for i in 0..n {
        let x = points.row(i);
        for j in 0..k {
            let r = resp[i * k + j];
            if r == 0.0 {
                continue;
            }
            for ((df, &xv), &m) in diff.iter_mut().zip(x).zip(&means[j * d..(j + 1) * d]) {
                *df = xv - m;
            }
            let cov = &mut scatter[j * d * d..(j + 1) * d * d];
            for a in 0..d {
                let ra = r * diff[a];
                for b in 0..=a {
                    cov[a * d + b] += ra * diff[b];
                }
            }
        }
    }
    (nk, means, scatter)
}

fn weighted_moments_2d(points: &Points, resp: &[f64], k: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut acc = vec![[0.0f64; 3]; k];
    for (x, row) in points.data.chunks_exact(2).zip(resp.chunks_exact(k)) {
        for (a, &r) in acc.iter_mut().zip(row) {
            if r != 0.0 {
                a[0] += r;
                a[1] += r * x[0];
                a[2] += r * x[1];
            }
        }
    }
    let nk: Vec<f64> = acc.iter().map(|a| a[0]).collect();
    let mut means = vec![0.0; 2 * k];
    for (j, a) in acc.iter().enumerate() {
        if a[0] > 0.0 {
            means[2 * j] = a[1] / a[0];
            means[2 * j + 1] = a[2] / a[0];
        }
    }
    let mut sc = vec![[0.0f64; 3]; k];
    for (x, row) in points.data.chunks_exact(2).zip(resp.chunks_exact(k)) {
        for ((s, &r), m) in sc.iter_mut().zip(row).zip(means.chunks_exact(2)) {
            if r != 0.0 {
                let dx = x[0] - m[0];
                let dy = x[1] - m[1];
                s[0] += r * dx * dx;
                s[1] += r * dy * dx;
                s[2] += r * dy * dy;
            }
        }
    }
    let mut scatter = vec![0.0; 4 * k];
    for (j, s) in sc.iter().enumerate() {
        scatter[4 * j] = s[0];
        scatter[4 * j + 2] = s[1];
        scatter[4 * j + 3] = s[2];
    }
    (nk, means, scatter)
}

impl EmState {
    /// M-step from responsibilities (`n × k`).
    fn m_step(points: &Points, resp: &[f64], k: usize, reg: f64) -> core::result::Result<Self, StepFailure> {
        let (n, d) = (points.n, points.dim);
        let (nk, means, mut covariances) = if d == 2 {
            weighted_moments_2d(points, resp, k)
        } else {
            weighted_moments(points, resp, k)
        };
        // a component holding less than a hundredth of a point has collapsed
        if let Some(j) = nk.iter().position(|&w| w < 1e-2) {
            return Err(StepFailure::Collapsed(j));
        }
        let mut components = Vec::with_capacity(k);
        let weights: Vec<f64> = nk.iter().map(|w| w / n as f64).collect();
        for j in 0..k {
            let cov = &mut covariances[j * d * d..(j + 1) * d * d];
            for a in 0..d {
                for b in 0..=a {
                    let v = cov[a * d + b] / nk[j];
                    cov[a * d + b] = v;
                    cov[b * d + a] = v;
                }
                cov[a * d + a] += reg;
            }
            let chol = cholesky(cov, d).ok_or(StepFailure::NotPositiveDefinite(j))?;
            let log_det: f64 = (0..d).map(|a| 2.0 * log(chol[a * d + a])).sum();
            components.push(Component {
                log_weight: log(weights[j]),
                mean: means[j * d..(j + 1) * d].to_vec(),
                chol,
                log_norm: -0.5 * (d as f64 * LN_2PI + log_det),
            });
        }
        Ok(EmState { k, dim: d, weights, means, covariances, components })
    }

    /// E-step: fills `resp` and returns the log-likelihood.
    fn e_step(&self, points: &Points, resp: &mut [f64]) -> f64 {
        let (k, d) = (self.k, self.dim);
        let mut ll = 0.0;
        if d == 2 {
            // [μx, μy, 1/l00, l10, 1/l11, log w + log norm]
            let comps: Vec<[f64; 6]> = self
                .components
                .iter()
                .map(|c| {
                    [c.mean[0], c.mean[1], 1.0 / c.chol[0], c.chol[2], 1.0 / c.chol[3], c.log_weight + c.log_norm]
                })
                .collect();
            for (x, row) in points.data.chunks_exact(2).zip(resp.chunks_exact_mut(k)) {
                let mut max = f64::NEG_INFINITY;
                for (v, c) in row.iter_mut().zip(&comps) {
                    let z0 = (x[0] - c[0]) * c[2];
                    let z1 = (x[1] - c[1] - c[3] * z0) * c[4];
                    let lp = c[5] - 0.5 * (z0 * z0 + z1 * z1);
                    *v = lp;
                    max = max.max(lp);
                }
                ll += max + normalize_log_row(row, max);
            }
            return ll;
        }
        let mut z = vec![0.0; d];
        for i in 0..points.n {
            let x = points.row(i);
            let row = &mut resp[i * k..(i + 1) * k];
            let mut max = f64::NEG_INFINITY;
            for (j, c) in self.components.iter().enumerate() {
                // solve L z = x − μ
                let mut maha = 0.0;
                for a in 0..d {
                    let mut s = x[a] - c.mean[a];
                    for b in 0..a {
                        s -= c.chol[a * d + b] * z[b];
                    }
                    z[a] = s / c.chol[a * d + a];
                    maha += z[a] * z[a];
                }
                let lp = c.log_weight + c.log_norm - 0.5 * maha;
                row[j] = lp;
                max = max.max(lp);
            }
            ll += max + normalize_log_row(row, max);
        }
        ll
    }
}

/// Turns log-densities into responsibilities and returns `log Σ exp(v − max)`.
/// Terms more than 40 nats below the maximum vanish against the leading
/// term in double precision and are set to 0 without evaluating `exp`.
#[inline]
fn normalize_log_row(row: &mut [f64], max: f64) -> f64 {
    let mut sum = 0.0;
    for v in row.iter_mut() {
        let t = *v - max;
        *v = if t < -40.0 { 0.0 } else { exp(t) };
        sum += *v;
    }
    let inv = 1.0 / sum;
    row.iter_mut().for_each(|v| *v *= inv);
    log(sum)
}

fn hard_responsibilities(points: &Points, centres: &[f64], k: usize) -> Vec<f64> {
    let mut resp = vec![0.0; points.n * k];
    for i in 0..points.n {
        let (j, _) = nearest(points.row(i), centres, points.dim);
        resp[i * k + j] = 1.0;
    }
    resp
}

fn argmax_rows(resp: &[f64], k: usize) -> Vec<usize> {
    resp.chunks_exact(k)
        .map(|row| {
            let mut best = 0;
            for j in 1..k {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn regularisation(points: &Points, scale: f64) -> f64 {
    let v = points.average_variance();
    scale * if v > 0.0 { v } else { 1.0 }
}

/// One EM run from a k-means++ start.
fn em_attempt<R: Rng + ?Sized>(
    points: &Points,
    k: usize,
    cfg: &GmmConfig,
    reg: f64,
    rng: &mut R,
) -> core::result::Result<GmmModel, StepFailure> {
    let centres = kmeans_pp(points, k, rng);
    let mut resp = hard_responsibilities(points, &centres, k);
    let mut state = EmState::m_step(points, &resp, k, reg)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut prev = f64::NEG_INFINITY;
    for _ in 0..cfg.max_iter {
        let ll = state.e_step(points, &mut resp);
        trace.push(ll);
        if (ll - prev).abs() <= cfg.tol * ll.abs() {
            converged = true;
            break;
        }
        prev = ll;
        state = EmState::m_step(points, &resp, k, reg)?;
    }
    let loglik = *trace.last().expect("at least one E-step");
    Ok(GmmModel {
        k,
        dim: state.dim,
        weights: state.weights,
        means: state.means,
        covariances: state.covariances,
        loglik,
        iterations: trace.len(),
        converged,
        loglik_trace: trace,
        assignments: argmax_rows(&resp, k),
    })
}

/// Fits a `k`-component mixture by EM; keeps the best log-likelihood of
/// `cfg.restarts` successful restarts.
pub fn fit_gmm<R: Rng + ?Sized>(points: &Points, k: usize, rng: &mut R, cfg: &GmmConfig) -> Result<GmmModel> {
    if k == 0 || k > points.n {
        return Err(Error::invalid(format!("cannot fit {k} components to {} points", points.n)));
    }
    let reg = regularisation(points, cfg.reg_scale);
    let mut best: Option<GmmModel> = None;
    let mut done = 0;
    let mut failed = 0;
    let mut last_failure = StepFailure::Collapsed(0);
    while done < cfg.restarts.max(1) {
        match em_attempt(points, k, cfg, reg, rng) {
            Ok(m) => {
                done += 1;
                if best.as_ref().map_or(true, |b| m.loglik > b.loglik) {
                    best = Some(m);
                }
            }
            Err(e) => {
                failed += 1;
                last_failure = e;
                if failed > cfg.max_failed_restarts {
                    break;
                }
            }
        }
    }
    best.ok_or_else(|| Error::GmmFailed {
        k,
        reason: match last_failure {
            StepFailure::Collapsed(j) => format!("component {j} collapsed in every restart"),
            StepFailure::NotPositiveDefinite(j) => {
                format!("covariance of component {j} not positive definite in every restart")
            }
        },
    })
}

// ---------------------------------------------------------------------------
// k-means

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig { restarts: 10, max_iter: 300 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansModel {
    pub k: usize,
    pub dim: usize,
    /// `k × dim`, row-major.
    pub centroids: Vec<f64>,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares.
    pub dispersion: f64,
    pub iterations: usize,
    /// Dispersion after each update step.
    pub dispersion_trace: Vec<f64>,
}

impl KMeansModel {
    pub fn centroid(&self, j: usize) -> &[f64] {
        &self.centroids[j * self.dim..(j + 1) * self.dim]
    }
}

fn update_centroids(points: &Points, assign: &[usize], k: usize, centroids: &mut [f64], counts: &mut [usize]) {
    let d = points.dim;
    centroids.iter_mut().for_each(|c| *c = 0.0);
    counts.iter_mut().for_each(|c| *c = 0);
    for (i, &j) in assign.iter().enumerate() {
        counts[j] += 1;
        for (c, &x) in centroids[j * d..(j + 1) * d].iter_mut().zip(points.row(i)) {
            *c += x;
        }
    }
    for j in 0..k {
        if counts[j] > 0 {
            let inv = counts[j] as f64;
            centroids[j * d..(j + 1) * d].iter_mut().for_each(|c| *c /= inv);
        }
    }
}

fn dispersion(points: &Points, assign: &[usize], centroids: &[f64]) -> f64 {
    let d = points.dim;
    assign
        .iter()
        .enumerate()
        .map(|(i, &j)| sq_dist(points.row(i), &centroids[j * d..(j + 1) * d]))
        .sum()
}

/// Moves the point farthest from its centroid (among clusters with more than
/// one member) into each empty cluster.
fn reseed_empty(points: &Points, assign: &mut [usize], k: usize, centroids: &mut [f64], counts: &mut [usize]) -> bool {
    let d = points.dim;
    let mut changed = false;
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &a) in assign.iter().enumerate() {
            if counts[a] < 2 {
                continue;
            }
            let dist = sq_dist(points.row(i), &centroids[a * d..(a + 1) * d]);
            if dist > far_d {
                far_d = dist;
                far = Some(i);
            }
        }
        let Some(i) = far else { break };
        assign[i] = j;
        update_centroids(points, assign, k, centroids, counts);
        changed = true;
    }
    changed
}

fn lloyd<R: Rng + ?Sized>(points: &Points, k: usize, cfg: &KMeansConfig, rng: &mut R) -> KMeansModel {
    let (n, d) = (points.n, points.dim);
    let mut centroids = kmeans_pp(points, k, rng);
    let mut assign: Vec<usize> = (0..n).map(|i| nearest(points.row(i), &centroids, d).0).collect();
    let mut counts = vec![0usize; k];
    update_centroids(points, &assign, k, &mut centroids, &mut counts);
    reseed_empty(points, &mut assign, k, &mut centroids, &mut counts);
    let mut trace = vec![dispersion(points, &assign, &centroids)];
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let mut changed = false;
        for (i, a) in assign.iter_mut().enumerate() {
            let (j, dj) = nearest(points.row(i), &centroids, d);
            // keep the current cluster on ties so the fixed point is stable
            let cur = sq_dist(points.row(i), &centroids[*a * d..(*a + 1) * d]);
            if j != *a && dj < cur {
                *a = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        update_centroids(points, &assign, k, &mut centroids, &mut counts);
        reseed_empty(points, &mut assign, k, &mut centroids, &mut counts);
        trace.push(dispersion(points, &assign, &centroids));
    }
    KMeansModel {
        k,
        dim: d,
        dispersion: *trace.last().expect("nonempty trace"),
        centroids,
        assignments: assign,
        iterations,
        dispersion_trace: trace,
    }
}

/// Lloyd's algorithm from `cfg.restarts` k-means++ starts; keeps the lowest
/// dispersion (earliest restart on ties).
pub fn fit_kmeans<R: Rng + ?Sized>(points: &Points, k: usize, rng: &mut R, cfg: &KMeansConfig) -> Result<KMeansModel> {
    if k == 0 || k > points.n {
        return Err(Error::invalid(format!("cannot form {k} clusters from {} points", points.n)));
    }
    let mut best = lloyd(points, k, cfg, rng);
    for _ in 1..cfg.restarts.max(1) {
        let m = lloyd(points, k, cfg, rng);
        if m.dispersion < best.dispersion {
            best = m;
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Model selection

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Gmm,
    KMeans,
}

impl Method {
    pub const BOTH: [Method; 2] = [Method::Gmm, Method::KMeans];

    pub const fn name(self) -> &'static str {
        match self {
            Method::Gmm => "GMM",
            Method::KMeans => "KM",
        }
    }

    pub fn from_name(name: &str) -> Option<Method> {
        match name.trim().to_ascii_lowercase().as_str() {
            "gmm" => Some(Method::Gmm),
            "km" | "kmeans" | "k-means" => Some(Method::KMeans),
            _ => None,
        }
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Criterion value for one candidate `k`. For GMM `score` is the BIC and
/// `spread` is absent; for k-means `score` is Gap(k) and `spread` is `s_k`.
/// `score` is `None` when the fit for that `k` failed.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionEntry {
    pub k: usize,
    pub score: Option<f64>,
    pub spread: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusteringResult {
    pub method: Method,
    /// Number of nonempty clusters in `assignments`.
    pub k: usize,
    /// Number of components of the selected model (may exceed `k` when a
    /// mixture component owns no point outright).
    pub selected_k: usize,
    pub assignments: Vec<usize>,
    pub selection_trace: Vec<SelectionEntry>,
}

/// Relabels clusters to `0..m` in increasing order of original index,
/// dropping empty ones.
fn compact(assign: &[usize], k: usize) -> (usize, Vec<usize>) {
    let mut used = vec![false; k];
    for &a in assign {
        used[a] = true;
    }
    let mut map = vec![usize::MAX; k];
    let mut m = 0;
    for j in 0..k {
        if used[j] {
            map[j] = m;
            m += 1;
        }
    }
    (m, assign.iter().map(|&a| map[a]).collect())
}

fn check_range(points: &Points, k_range: (usize, usize)) -> Result<()> {
    let (lo, hi) = k_range;
    if lo == 0 || lo > hi {
        return Err(Error::invalid(format!("invalid cluster range {lo}..={hi}")));
    }
    if points.n < hi {
        return Err(Error::invalid(format!(
            "{} points cannot support up to {hi} clusters",
            points.n
        )));
    }
    Ok(())
}

/// Fits a mixture for every `k` in `k_range` (inclusive) and keeps the one
/// with the lowest BIC. The fit for `k` draws from `key.child(k)`.
pub fn select_gmm(points: &Points, k_range: (usize, usize), key: StreamKey, cfg: &GmmConfig) -> Result<ClusteringResult> {
    check_range(points, k_range)?;
    let mut trace = Vec::new();
    let mut best: Option<(f64, GmmModel)> = None;
    for k in k_range.0..=k_range.1 {
        match fit_gmm(points, k, &mut key.child(k as u64).stream(), cfg) {
            Ok(m) => {
                let bic = m.bic(points.n);
                trace.push(SelectionEntry { k, score: Some(bic), spread: None });
                if best.as_ref().map_or(true, |(b, _)| bic < *b) {
                    best = Some((bic, m));
                }
            }
            Err(Error::GmmFailed { .. }) => trace.push(SelectionEntry { k, score: None, spread: None }),
            Err(e) => return Err(e),
        }
    }
    let (_, model) = best.ok_or(Error::NoModelFitted)?;
    let (k, assignments) = compact(&model.assignments, model.k);
    Ok(ClusteringResult { method: Method::Gmm, k, selected_k: model.k, assignments, selection_trace: trace })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GapConfig {
    /// Number of uniform reference data sets `B`.
    pub references: usize,
    pub data: KMeansConfig,
    pub reference: KMeansConfig,
}

impl Default for GapConfig {
    fn default() -> Self {
        GapConfig {
            references: 25,
            data: KMeansConfig::default(),
            reference: KMeansConfig { restarts: 1, ..KMeansConfig::default() },
        }
    }
}

/// Gap statistic of `k` against uniform references over the bounding box.
#[derive(Clone, Debug, PartialEq)]
pub struct GapCurve {
    pub ks: Vec<usize>,
    pub gap: Vec<f64>,
    /// `s_k = sd · sqrt(1 + 1/B)`.
    pub s: Vec<f64>,
    pub log_w: Vec<f64>,
    pub models: Vec<KMeansModel>,
}

fn safe_log(w: f64) -> f64 {
    log(w.max(f64::MIN_POSITIVE))
}

fn uniform_reference<R: Rng + ?Sized>(bbox: &[(f64, f64)], n: usize, rng: &mut R) -> Points {
    let dim = bbox.len();
    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n {
        for &(lo, hi) in bbox {
            data.push(lo + (hi - lo) * rng.gen::<f64>());
        }
    }
    Points { n, dim, data }
}

/// Gap curve over `k_range`. Data fits for `k` use `key.child(k)`;
/// reference set `b` is drawn from `key.child(0).child(b)` and its fits use
/// children of that key.
pub fn gap_curve(points: &Points, k_range: (usize, usize), key: StreamKey, cfg: &GapConfig) -> Result<GapCurve> {
    check_range(points, k_range)?;
    if cfg.references < 2 {
        return Err(Error::invalid("the gap statistic needs at least two reference sets"));
    }
    let ks: Vec<usize> = (k_range.0..=k_range.1).collect();
    let bbox = points.bounding_box();
    let b_count = cfg.references;
    // ref_log_w[b][ki]
    let mut ref_log_w = vec![vec![0.0; ks.len()]; b_count];
    for (b, row) in ref_log_w.iter_mut().enumerate() {
        let ref_key = key.child(0).child(b as u64);
        let reference = uniform_reference(&bbox, points.n, &mut ref_key.child(0).stream());
        for (ki, &k) in ks.iter().enumerate() {
            let m = fit_kmeans(&reference, k, &mut ref_key.child(k as u64).stream(), &cfg.reference)?;
            row[ki] = safe_log(m.dispersion);
        }
    }
    let mut gap = Vec::with_capacity(ks.len());
    let mut s = Vec::with_capacity(ks.len());
    let mut log_w = Vec::with_capacity(ks.len());
    let mut models = Vec::with_capacity(ks.len());
    for (ki, &k) in ks.iter().enumerate() {
        let m = fit_kmeans(points, k, &mut key.child(k as u64).stream(), &cfg.data)?;
        let lw = safe_log(m.dispersion);
        let mean = ref_log_w.iter().map(|r| r[ki]).sum::<f64>() / b_count as f64;
        let var = ref_log_w.iter().map(|r| (r[ki] - mean) * (r[ki] - mean)).sum::<f64>() / b_count as f64;
        gap.push(mean - lw);
        s.push(sqrt(var) * sqrt(1.0 + 1.0 / b_count as f64));
        log_w.push(lw);
        models.push(m);
    }
    Ok(GapCurve { ks, gap, s, log_w, models })
}

impl GapCurve {
    /// Smallest `k` with `Gap(k) ≥ Gap(k+1) − s_{k+1}`; the maximiser of the
    /// gap when no `k` qualifies. Returns an index into `ks`.
    pub fn select(&self) -> usize {
        for i in 0..self.ks.len().saturating_sub(1) {
            if self.gap[i] >= self.gap[i + 1] - self.s[i + 1] {
                return i;
            }
        }
        let mut best = 0;
        for i in 1..self.gap.len() {
            if self.gap[i] > self.gap[best] {
                best = i;
            }
        }
        best
    }
}

pub fn select_kmeans_gap(points: &Points, k_range: (usize, usize), key: StreamKey, cfg: &GapConfig) -> Result<ClusteringResult> {
    let curve = gap_curve(points, k_range, key, cfg)?;
    let i = curve.select();
    let trace = curve
        .ks
        .iter()
        .zip(curve.gap.iter().zip(&curve.s))
        .map(|(&k, (&g, &s))| SelectionEntry { k, score: Some(g), spread: Some(s) })
        .collect();
    let model = &curve.models[i];
    let (k, assignments) = compact(&model.assignments, model.k);
    Ok(ClusteringResult { method: Method::KMeans, k, selected_k: model.k, assignments, selection_trace: trace })
}

/// Runs the selector for `method` with default configurations.
pub fn select(points: &Points, method: Method, k_range: (usize, usize), key: StreamKey, gmm: &GmmConfig, gap: &GapConfig) -> Result<ClusteringResult> {
    match method {
        Method::Gmm => select_gmm(points, k_range, key, gmm),
        Method::KMeans => select_kmeans_gap(points, k_range, key, gap),
    }
}
