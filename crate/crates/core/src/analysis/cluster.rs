use std::collections::BTreeMap;

use super::AnalysisError;
use crate::numkit::Matrix;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Davies-Bouldin index: the mean over clusters `i` of
/// `max_{j != i} (s_i + s_j) / d_ij`, with `s` the mean distance to the
/// centroid and `d` the distance between centroids.
pub fn dbi(points: &Matrix, cluster_ids: &[usize]) -> Result<f64, AnalysisError> {
    if points.rows() != cluster_ids.len() {
        return Err(AnalysisError::Length(points.rows(), cluster_ids.len()));
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (r, &c) in cluster_ids.iter().enumerate() {
        members.entry(c).or_default().push(r);
    }
    if members.len() < 2 {
        return Err(AnalysisError::TooFewClusters(members.len()));
    }
    let d = points.cols();
    let ids: Vec<usize> = members.keys().copied().collect();
    let mut centroids = Vec::new();
    let mut spread = Vec::new();
    for rows in members.values() {
        let mut c = vec![0.0; d];
        for &r in rows {
            c.iter_mut().zip(points.row(r)).for_each(|(a, b)| *a += b);
        }
        c.iter_mut().for_each(|v| *v /= rows.len() as f64);
        spread.push(rows.iter().map(|&r| dist(points.row(r), &c)).sum::<f64>() / rows.len() as f64);
        centroids.push(c);
    }
    let k = ids.len();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for j in (0..k).filter(|&j| j != i) {
            let dij = dist(&centroids[i], &centroids[j]);
            if dij == 0.0 {
                return Err(AnalysisError::Degenerate(ids[i], ids[j]));
            }
            worst = worst.max((spread[i] + spread[j]) / dij);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

/// Maps an `n x d` embedding to `n x dims`.
pub trait Projector {
    fn project(&self, emb: &Matrix, dims: usize) -> Result<Matrix, AnalysisError>;
}

/// Principal-component projection.
#[derive(Debug, Clone, Copy, Default)]
pub struct PcaProjector;

impl Projector for PcaProjector {
    fn project(&self, emb: &Matrix, dims: usize) -> Result<Matrix, AnalysisError> {
        pca_project(emb, dims)
    }
}

const TOL: f64 = 1e-10;
const MAX_ITERS: usize = 10_000;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// Modified Gram-Schmidt over columns held as vectors. A column that
// collapses is replaced by the first unit vector not yet spanned.
fn orthonormalize(cols: &mut [Vec<f64>]) {
    let d = cols.first().map_or(0, Vec::len);
    let mut spare = 0;
    for k in 0..cols.len() {
        loop {
            let (done, rest) = cols.split_at_mut(k);
            let v = &mut rest[0];
            for b in done.iter() {
                let p = dot(v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
            let n = dot(v, v).sqrt();
            if n > 1e-12 {
                v.iter_mut().for_each(|x| *x /= n);
                break;
            }
            *v = (0..d).map(|i| if i == spare { 1.0 } else { 0.0 }).collect();
            spare += 1;
        }
    }
}

// Cyclic Jacobi for a small symmetric matrix; eigenpairs sorted by
// decreasing eigenvalue, eigenvectors as columns of the returned rows.
fn symmetric_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = a.len();
    let mut v: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| f64::from(i == j)).collect())
        .collect();
    for _ in 0..100 {
        let off: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for i in 0..p {
            for j in i + 1..p {
                if a[i][j].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[j][j] - a[i][i]) / (2.0 * a[i][j]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (aki, akj) = (row[i], row[j]);
                    row[i] = c * aki - s * akj;
                    row[j] = s * aki + c * akj;
                }
                let (head, tail) = a.split_at_mut(j);
                for (x, y) in head[i].iter_mut().zip(tail[0].iter_mut()) {
                    let (aik, ajk) = (*x, *y);
                    *x = c * aik - s * ajk;
                    *y = s * aik + c * ajk;
                }
                for row in v.iter_mut() {
                    let (vi, vj) = (row[i], row[j]);
                    row[i] = c * vi - s * vj;
                    row[j] = s * vi + c * vj;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let vals = order.iter().map(|&k| a[k][k]).collect();
    let vecs = order
        .iter()
        .map(|&k| v.iter().map(|row| row[k]).collect())
        .collect();
    (vals, vecs)
}

/// Centers the columns and projects onto the top `dims` principal
/// directions of the covariance, found by subspace iteration with a
/// Rayleigh-Ritz step (stopping once every wanted Ritz pair has residual
/// below 1e-10 relative to the top eigenvalue). Each direction is signed so
/// its largest-magnitude loading is positive.
pub fn pca_project(emb: &Matrix, dims: usize) -> Result<Matrix, AnalysisError> {
    let (n, d) = emb.shape();
    if n < dims || dims > d || n == 0 {
        return Err(AnalysisError::Dims { rows: n, dims });
    }
    let mut x = emb.clone();
    for c in 0..d {
        let mean = (0..n).map(|r| x.get(r, c)).sum::<f64>() / n as f64;
        for r in 0..n {
            x.set(r, c, x.get(r, c) - mean);
        }
    }
    let cov = x
        .transpose()
        .matmul(&x)
        .expect("square")
        .map(|v| v / n as f64);
    let apply = |v: &[f64]| -> Vec<f64> { (0..d).map(|i| dot(cov.row(i), v)).collect() };

    let p = (dims + 2).min(d);
    let mut q: Vec<Vec<f64>> = (0..p)
        .map(|k| {
            (0..d)
                .map(|i| 1.0 + ((i * 7 + k * 13) % 17) as f64 / 17.0 + f64::from(i == k))
                .collect()
        })
        .collect();
    orthonormalize(&mut q);
    let mut ritz = q.clone();
    for _ in 0..MAX_ITERS {
        let cq: Vec<Vec<f64>> = q.iter().map(|v| apply(v)).collect();
        let h: Vec<Vec<f64>> = (0..p)
            .map(|i| (0..p).map(|j| dot(&q[i], &cq[j])).collect())
            .collect();
        let (vals, w) = symmetric_eigen(h);
        ritz = w
            .iter()
            .map(|wk| {
                (0..d)
                    .map(|i| (0..p).map(|j| q[j][i] * wk[j]).sum())
                    .collect()
            })
            .collect();
        let scale = vals[0].abs().max(1e-300);
        let converged = (0..dims).all(|k| {
            let cv = apply(&ritz[k]);
            let r: f64 = cv
                .iter()
                .zip(&ritz[k])
                .map(|(a, b)| (a - vals[k] * b).powi(2))
                .sum::<f64>()
                .sqrt();
            r <= TOL * scale
        });
        if converged {
            break;
        }
        q = ritz.iter().map(|v| apply(v)).collect();
        orthonormalize(&mut q);
    }

    let mut out = Matrix::zeros(n, dims);
    for (k, v) in ritz.iter_mut().take(dims).enumerate() {
        let lead = (0..d).fold(
            0,
            |best, i| if v[i].abs() > v[best].abs() { i } else { best },
        );
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for r in 0..n {
            out.set(r, k, dot(x.row(r), v));
        }
    }
    Ok(out)
}
