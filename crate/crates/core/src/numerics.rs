//! Agent correlation matrix and its spectral decomposition.
//!
//! The eigensolver is the classical dense route: Householder reduction to
//! tridiagonal form followed by implicit QL with Wilkinson-style shifts.
//! [`decompose`] accumulates all eigenvectors; [`decompose_leading`]
//! computes exact eigenvalues but only the leading eigenvectors (by inverse
//! iteration on the tridiagonal matrix), which is what clustering needs and
//! avoids the O(n³) eigenvector accumulation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, hypot, sqrt};

use crate::sim::VoteMatrix;
use crate::{Error, Result};

/// Dense symmetric matrix, row-major, full storage.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    /// Builds a matrix from row-major data; rejects asymmetry beyond
    /// `1e-12 * max|a_ij|`.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::invalid(format!(
                "{n}x{n} matrix needs {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        let scale = data.iter().fold(0.0f64, |m, v| m.max(fabs(*v)));
        for i in 0..n {
            for j in 0..i {
                if fabs(data[i * n + j] - data[j * n + i]) > 1e-12 * scale {
                    return Err(Error::invalid(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        Ok(SymmetricMatrix { n, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self::from_row_major(n, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        SymmetricMatrix { n, data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn frobenius_norm(&self) -> f64 {
        sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }
}

/// Pearson correlation between agent vote columns.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix(SymmetricMatrix);

impl CorrelationMatrix {
    pub fn matrix(&self) -> &SymmetricMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> SymmetricMatrix {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }
}

/// Sample correlation matrix of the vote columns.
///
/// Votes are ±1, so all sums are exact integers and
/// `corr(a, b) = (r·Σv_a v_b − s_a s_b) / sqrt((r² − s_a²)(r² − s_b²))`
/// with `s_a = Σ_t v_ta`. An agent whose votes never vary has no defined
/// correlation; its row and column are 0 except for a unit diagonal.
pub fn correlation_matrix(votes: &VoteMatrix) -> Result<CorrelationMatrix> {
    let r = votes.rounds();
    let n = votes.agents();
    if r < 2 {
        return Err(Error::invalid(format!(
            "correlation needs at least 2 rounds, got {r}"
        )));
    }
    let cols = votes.columns();
    let col = |a: usize| &cols[a * r..(a + 1) * r];
    let sums: Vec<i64> = (0..n).map(|a| col(a).iter().map(|&v| v as i64).sum()).collect();
    let r_i = r as i64;
    let spread: Vec<f64> = sums.iter().map(|&s| (r_i * r_i - s * s) as f64).collect();

    let mut data = vec![0.0; n * n];
    for a in 0..n {
        data[a * n + a] = 1.0;
        if spread[a] == 0.0 {
            continue;
        }
        let ca = col(a);
        for b in 0..a {
            if spread[b] == 0.0 {
                continue;
            }
            let dot = dot_i8(ca, col(b));
            let num = (r_i * dot - sums[a] * sums[b]) as f64;
            let c = (num / sqrt(spread[a] * spread[b])).clamp(-1.0, 1.0);
            data[a * n + b] = c;
            data[b * n + a] = c;
        }
    }
    Ok(CorrelationMatrix(SymmetricMatrix { n, data }))
}

#[inline]
fn dot_i8(a: &[i8], b: &[i8]) -> i64 {
    // i16 products summed in i32 lanes; chunks bound the lane sums.
    let mut total = 0i64;
    for (ca, cb) in a.chunks(1 << 16).zip(b.chunks(1 << 16)) {
        let s: i32 = ca.iter().zip(cb).map(|(&x, &y)| (x as i16 * y as i16) as i32).sum();
        total += s as i64;
    }
    total
}

/// Eigenpairs of a symmetric matrix, eigenvalues sorted descending.
///
/// Holds all `n` pairs when produced by [`decompose`], or only the leading
/// ones when produced by [`decompose_leading`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    n: usize,
    values: Vec<f64>,
    /// Eigenvector `j` is `vectors[j * n..(j + 1) * n]`.
    vectors: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of eigenpairs held.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.values.len() == self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.n..(j + 1) * self.n]
    }

    /// Entry `U[i][j]`: component `i` of eigenvector `j`.
    pub fn u(&self, i: usize, j: usize) -> f64 {
        self.vectors[j * self.n + i]
    }

    /// `U·diag(D)·Uᵀ` from the held pairs.
    pub fn reconstruct(&self) -> SymmetricMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for (j, &lambda) in self.values.iter().enumerate() {
            let v = self.vector(j);
            for i in 0..n {
                let s = lambda * v[i];
                let row = &mut data[i * n..(i + 1) * n];
                for (x, &vk) in row.iter_mut().zip(v) {
                    *x += s * vk;
                }
            }
        }
        SymmetricMatrix { n, data }
    }
}

/// Full eigendecomposition.
///
/// Negative eigenvalues within round-off of zero (`|λ| <= n·ε·‖A‖_F`) are
/// set to 0; larger negative values are kept, since they are genuine for a
/// matrix that is not positive semidefinite. Each eigenvector's largest
/// magnitude entry is made positive.
pub fn decompose(m: &SymmetricMatrix) -> Result<SpectralDecomposition> {
    let n = m.n;
    if n == 0 {
        return Ok(SpectralDecomposition { n, values: Vec::new(), vectors: Vec::new() });
    }
    let tri = Tridiagonal::reduce(m);
    let mut vt = tri.transposed_q();
    let mut d = tri.diag.clone();
    let mut e = tri.off.clone();
    implicit_ql(&mut d, &mut e, Some(&mut vt), m.frobenius_norm())?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let floor = round_off_floor(m);
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n * n);
    for &j in &order {
        values.push(clamp_round_off(d[j], floor));
        let start = vectors.len();
        vectors.extend_from_slice(&vt[j * n..(j + 1) * n]);
        normalize_sign(&mut vectors[start..]);
    }
    Ok(SpectralDecomposition { n, values, vectors })
}

/// The `q` leading eigenpairs.
///
/// Eigenvalues are computed exactly as in [`decompose`]; eigenvectors of the
/// tridiagonal form come from inverse iteration (orthogonalised against the
/// previously found ones) and are mapped back through the Householder
/// reflectors.
pub fn decompose_leading(m: &SymmetricMatrix, q: usize) -> Result<SpectralDecomposition> {
    let n = m.n;
    if q > n {
        return Err(Error::invalid(format!("requested {q} eigenpairs of a {n}x{n} matrix")));
    }
    let tri = Tridiagonal::reduce(m);
    let mut d = tri.diag.clone();
    let mut e = tri.off.clone();
    let norm = m.frobenius_norm();
    implicit_ql(&mut d, &mut e, None, norm)?;
    d.sort_by(|a, b| b.total_cmp(a));

    let floor = round_off_floor(m);
    let mut values = Vec::with_capacity(q);
    let mut found: Vec<Vec<f64>> = Vec::with_capacity(q);
    for (j, &lambda) in d.iter().take(q).enumerate() {
        let y = tri.inverse_iteration(lambda, &found, j, norm);
        found.push(y);
        values.push(clamp_round_off(lambda, floor));
    }
    let mut vectors = Vec::with_capacity(q * n);
    for y in found {
        let mut x = tri.apply_q(y);
        normalize_sign(&mut x);
        vectors.extend_from_slice(&x);
    }
    Ok(SpectralDecomposition { n, values, vectors })
}

/// Leading `q` eigenpairs of the vote correlation matrix.
///
/// Equivalent to `decompose_leading(correlation_matrix(votes)?.matrix(), q)`.
/// When there are fewer rounds than agents the pairs come from the
/// `rounds × rounds` Gram matrix `Z Zᵀ` of the standardised votes, whose
/// nonzero spectrum is that of the correlation matrix `Zᵀ Z`; eigenvectors
/// map back as `u = Zᵀ v / sqrt(λ)`. Agents whose votes never vary
/// contribute eigenvalue 1 with a unit eigenvector, as they do in
/// [`correlation_matrix`].
pub fn leading_correlation_pairs(votes: &VoteMatrix, q: usize) -> Result<SpectralDecomposition> {
    let (r, n) = (votes.rounds(), votes.agents());
    if q > n {
        return Err(Error::invalid(format!("requested {q} eigenpairs for {n} agents")));
    }
    if r < 2 {
        return Err(Error::invalid(format!("correlation needs at least 2 rounds, got {r}")));
    }
    if r >= n {
        return decompose_leading(correlation_matrix(votes)?.matrix(), q);
    }
    // standardised votes, row-major r × n; constant columns stay zero
    let mut constant = Vec::new();
    let mut scale = vec![0.0; n];
    let mut mean = vec![0.0; n];
    let cols = votes.columns();
    for a in 0..n {
        let col = &cols[a * r..(a + 1) * r];
        let s: i64 = col.iter().map(|&v| v as i64).sum();
        let var = ((r * r) as i64 - s * s) as f64;
        if var == 0.0 {
            constant.push(a);
            continue;
        }
        mean[a] = s as f64 / r as f64;
        // 1 / sqrt(Σ_t (v − m)²) = sqrt(r) / sqrt(r² − s²)
        scale[a] = sqrt(r as f64) / sqrt(var);
    }
    let mut z = vec![0.0; r * n];
    for t in 0..r {
        let row = votes.row(t);
        let zr = &mut z[t * n..(t + 1) * n];
        for a in 0..n {
            zr[a] = (row[a] as f64 - mean[a]) * scale[a];
        }
    }
    let mut g = vec![0.0; r * r];
    for s in 0..r {
        let zs = &z[s * n..(s + 1) * n];
        for t in 0..=s {
            let v = dot(zs, &z[t * n..(t + 1) * n]);
            g[s * r + t] = v;
            g[t * r + s] = v;
        }
    }
    let gram = SymmetricMatrix { n: r, data: g };
    let inner = decompose_leading(&gram, q.min(r))?;
    let floor = round_off_floor(&gram);

    // merge Gram pairs with the unit pairs of constant columns
    let mut values = Vec::with_capacity(q);
    let mut vectors = Vec::with_capacity(q * n);
    let (mut gi, mut ci) = (0, 0);
    while values.len() < q {
        let from_gram = gi < inner.len() && inner.values()[gi] > floor && (ci >= constant.len() || inner.values()[gi] >= 1.0);
        if from_gram {
            let lambda = inner.values()[gi];
            let v = inner.vector(gi);
            let mut u = vec![0.0; n];
            for (t, &vt) in v.iter().enumerate() {
                if vt == 0.0 {
                    continue;
                }
                for (ua, &za) in u.iter_mut().zip(&z[t * n..(t + 1) * n]) {
                    *ua += vt * za;
                }
            }
            let inv = 1.0 / sqrt(lambda);
            u.iter_mut().for_each(|x| *x *= inv);
            normalize_sign(&mut u);
            values.push(lambda);
            vectors.extend_from_slice(&u);
            gi += 1;
        } else if ci < constant.len() {
            let mut u = vec![0.0; n];
            u[constant[ci]] = 1.0;
            values.push(1.0);
            vectors.extend_from_slice(&u);
            ci += 1;
        } else {
            // the request reaches into the null space; take the direct route
            return decompose_leading(correlation_matrix(votes)?.matrix(), q);
        }
    }
    Ok(SpectralDecomposition { n, values, vectors })
}

fn round_off_floor(m: &SymmetricMatrix) -> f64 {
    (m.n.max(1) as f64) * f64::EPSILON * m.frobenius_norm().max(f64::MIN_POSITIVE)
}

fn clamp_round_off(lambda: f64, floor: f64) -> f64 {
    if lambda < 0.0 && -lambda <= floor {
        0.0
    } else {
        lambda
    }
}

fn normalize_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if fabs(*x) > fabs(v[best]) {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

struct Reflector {
    v: Vec<f64>,
    beta: f64,
}

/// `A = Q T Qᵀ` with `T` tridiagonal and `Q = H_0 H_1 ⋯ H_{n−2}`; reflector
/// `H_k` acts on coordinates `k+1..n`.
struct Tridiagonal {
    n: usize,
    diag: Vec<f64>,
    /// `off[k] = T[k][k+1]`, `off[n−1] = 0`.
    off: Vec<f64>,
    reflectors: Vec<Reflector>,
}

impl Tridiagonal {
    fn reduce(m: &SymmetricMatrix) -> Self {
        let n = m.n;
        let mut a = m.data.clone();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n];
        let mut reflectors = Vec::with_capacity(n.saturating_sub(1));
        let mut p = vec![0.0; n];
        for k in 0..n.saturating_sub(1) {
            diag[k] = a[k * n + k];
            let x = &a[k * n + k + 1..(k + 1) * n];
            let (v, beta, alpha) = householder(x);
            off[k] = alpha;
            if beta != 0.0 {
                let m_len = n - k - 1;
                // p = beta * A22 v
                for i in 0..m_len {
                    let row = &a[(k + 1 + i) * n + k + 1..(k + 2 + i) * n];
                    p[i] = beta * dot(row, &v);
                }
                // w = p - (beta/2)(pᵀv) v
                let pv = dot(&p[..m_len], &v);
                let c = 0.5 * beta * pv;
                for i in 0..m_len {
                    p[i] -= c * v[i];
                }
                // A22 -= v wᵀ + w vᵀ
                for i in 0..m_len {
                    let (vi, wi) = (v[i], p[i]);
                    let row = &mut a[(k + 1 + i) * n + k + 1..(k + 2 + i) * n];
                    for ((x, &vj), &wj) in row.iter_mut().zip(&v).zip(&p[..m_len]) {
                        *x -= vi * wj + wi * vj;
                    }
                }
            }
            reflectors.push(Reflector { v, beta });
        }
        if n > 0 {
            diag[n - 1] = a[(n - 1) * n + n - 1];
        }
        Tridiagonal { n, diag, off, reflectors }
    }

    /// `Qᵀ`, row-major, accumulated backwards.
    fn transposed_q(&self) -> Vec<f64> {
        let n = self.n;
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = 1.0;
        }
        let mut w = vec![0.0; n];
        for (k, h) in self.reflectors.iter().enumerate().rev() {
            if h.beta == 0.0 {
                continue;
            }
            let lo = k + 1;
            // w = vᵀ Q[lo.., lo..]
            w[lo..].iter_mut().for_each(|x| *x = 0.0);
            for (i, &vi) in h.v.iter().enumerate() {
                let row = &q[(lo + i) * n + lo..(lo + i + 1) * n];
                for (wj, &qj) in w[lo..].iter_mut().zip(row) {
                    *wj += vi * qj;
                }
            }
            for (i, &vi) in h.v.iter().enumerate() {
                let s = h.beta * vi;
                let row = &mut q[(lo + i) * n + lo..(lo + i + 1) * n];
                for (qj, &wj) in row.iter_mut().zip(&w[lo..]) {
                    *qj -= s * wj;
                }
            }
        }
        // q holds Q; transpose in place
        for i in 0..n {
            for j in 0..i {
                q.swap(i * n + j, j * n + i);
            }
        }
        q
    }

    /// `Q y`.
    fn apply_q(&self, mut y: Vec<f64>) -> Vec<f64> {
        for (k, h) in self.reflectors.iter().enumerate().rev() {
            if h.beta == 0.0 {
                continue;
            }
            let seg = &mut y[k + 1..];
            let s = h.beta * dot(&h.v, seg);
            for (x, &v) in seg.iter_mut().zip(&h.v) {
                *x -= s * v;
            }
        }
        y
    }

    /// Unit eigenvector of `T` for the (already accurate) eigenvalue `lambda`.
    fn inverse_iteration(&self, lambda: f64, previous: &[Vec<f64>], salt: usize, norm: f64) -> Vec<f64> {
        let n = self.n;
        let shift = lambda + f64::EPSILON * norm.max(1.0) * 10.0;
        let lu = TridiagonalLu::factor(&self.diag, &self.off, shift, norm);
        let mut x: Vec<f64> = (0..n).map(|i| start_entry(i, salt)).collect();
        orthogonalize(&mut x, previous);
        normalize(&mut x);
        for _ in 0..4 {
            lu.solve(&mut x);
            orthogonalize(&mut x, previous);
            normalize(&mut x);
        }
        x
    }
}

/// Deterministic, non-degenerate starting vector for inverse iteration.
fn start_entry(i: usize, salt: usize) -> f64 {
    let h = crate::rng::StreamKey::new(salt as u64).child(i as u64).seed();
    0.5 + (h >> 11) as f64 / (1u64 << 53) as f64
}

fn orthogonalize(x: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(x, b);
        for (xi, &bi) in x.iter_mut().zip(b) {
            *xi -= c * bi;
        }
    }
}

fn normalize(x: &mut [f64]) {
    let s = sqrt(dot(x, x));
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    }
}

/// Householder vector with `v[0] = 1` such that `(I − β v vᵀ) x = α e₁`.
fn householder(x: &[f64]) -> (Vec<f64>, f64, f64) {
    let x0 = x[0];
    let sigma: f64 = x[1..].iter().map(|v| v * v).sum();
    let mut v = x.to_vec();
    v[0] = 1.0;
    if sigma == 0.0 {
        return (v, 0.0, x0);
    }
    let mu = sqrt(x0 * x0 + sigma);
    let v0 = if x0 <= 0.0 { x0 - mu } else { -sigma / (x0 + mu) };
    let beta = 2.0 * v0 * v0 / (sigma + v0 * v0);
    for t in v[1..].iter_mut() {
        *t /= v0;
    }
    (v, beta, mu)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Implicit QL on a symmetric tridiagonal matrix (`d` diagonal,
/// `e[i] = T[i][i+1]`, `e[n−1] = 0`). On return `d` holds the eigenvalues,
/// unsorted. When `vt` is given, its rows are rotated along, turning rows of
/// `Qᵀ` into eigenvectors.
fn implicit_ql(d: &mut [f64], e: &mut [f64], mut vt: Option<&mut Vec<f64>>, norm: f64) -> Result<()> {
    const MAX_ITER: usize = 60;
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(fabs(d[l]) + fabs(e[l]));
        let mut m = l;
        while m < n - 1 {
            if fabs(e[m]) <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_ITER {
                    return Err(Error::EigenNoConvergence {
                        n,
                        index: l,
                        iterations: MAX_ITER,
                        norm,
                        residual: fabs(e[l]),
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for x in d[l + 2..].iter_mut() {
                    *x -= h;
                }
                f += h;

                p = d[m];
                let (mut c, mut c2, mut c3) = (1.0, 1.0, 1.0);
                let el1 = e[l + 1];
                let (mut s, mut s2) = (0.0, 0.0);
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(v) = vt.as_deref_mut() {
                        let (head, tail) = v.split_at_mut((i + 1) * n);
                        let vi = &mut head[i * n..];
                        let vi1 = &mut tail[..n];
                        for (a, b) in vi.iter_mut().zip(vi1.iter_mut()) {
                            let hb = *b;
                            *b = s * *a + c * hb;
                            *a = c * *a - s * hb;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if fabs(e[l]) <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// LU factorisation with partial pivoting of `T − shift·I` (LAPACK `gttrf`
/// layout); exact zero pivots are replaced by a tiny multiple of the norm,
/// which is the standard treatment for inverse iteration.
struct TridiagonalLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(diag: &[f64], off: &[f64], shift: f64, norm: f64) -> Self {
        let n = diag.len();
        let mut d: Vec<f64> = diag.iter().map(|x| x - shift).collect();
        let mut dl: Vec<f64> = off[..n.saturating_sub(1)].to_vec();
        let mut du = dl.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let tiny = f64::EPSILON * norm.max(f64::MIN_POSITIVE);
        for i in 0..n.saturating_sub(1) {
            if fabs(d[i]) >= fabs(dl[i]) {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        for x in d.iter_mut() {
            if fabs(*x) < tiny {
                *x = if *x < 0.0 { -tiny } else { tiny };
            }
        }
        TridiagonalLu { dl, d, du, du2, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        if n == 0 {
            return;
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
        // rescale to avoid overflow across iterations
        let m = b.iter().fold(0.0f64, |m, v| m.max(fabs(*v)));
        if m > 0.0 && m.is_finite() {
            b.iter_mut().for_each(|v| *v /= m);
        }
    }
}

/// Agents' coordinates on the leading `q` components: `U_q · diag(D_q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentScores {
    n: usize,
    q: usize,
    data: Vec<f64>,
}

impl ComponentScores {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.q..(i + 1) * self.q]
    }

    /// Row-major `n × q` data.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<f64> {
        self.data
    }
}

pub fn component_scores(d: &SpectralDecomposition, q: usize) -> Result<ComponentScores> {
    if q == 0 || q > d.len() {
        return Err(Error::invalid(format!(
            "cannot take {q} components from a decomposition holding {} of {}",
            d.len(),
            d.n
        )));
    }
    let n = d.n;
    let mut data = vec![0.0; n * q];
    for j in 0..q {
        let lambda = d.values[j];
        for (i, &u) in d.vector(j).iter().enumerate() {
            data[i * q + j] = u * lambda;
        }
    }
    Ok(ComponentScores { n, q, data })
}
