//! Pixel labelling from feature rows: cityblock k-means with k-means++ seeding
//! and replications, and semi-supervised multiclass MBO on a graph whose
//! spectrum is approximated with the Nyström extension.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::LabelMap;
use crate::par;
use crate::texture_features::FeatureMatrix;

/// L1 distance.
#[inline]
pub fn cityblock(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Labels per row plus run statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub labels: Vec<u32>,
    pub k: usize,
    /// Within-cluster sum of cityblock distances for k-means; 0 for MBO.
    pub objective: f64,
    pub iterations: usize,
}

impl ClusterResult {
    pub fn to_label_map(&self, width: usize, height: usize) -> Result<LabelMap> {
        LabelMap::new(width, height, self.labels.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cityblock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansParams {
    pub k: usize,
    pub metric: Metric,
    pub replications: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            k: 2,
            metric: Metric::Cityblock,
            replications: 10,
            max_iter: 100,
            seed: 0,
        }
    }
}

impl KMeansParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.replications == 0 || self.max_iter == 0 {
            return Err(Error::param(format!(
                "k, replications and max_iter must be positive (got {}, {}, {})",
                self.k, self.replications, self.max_iter
            )));
        }
        Ok(())
    }
}

/// k-means++ seeding: a uniform first centroid, then each further one drawn
/// with probability proportional to its distance to the nearest chosen
/// centroid.
pub fn kmeans_pp_seed(d: &FeatureMatrix, k: usize, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::param("k must be positive"));
    }
    let n = d.rows();
    let mut centroids = vec![d.row(rng.random_range(0..n)).to_vec()];
    let mut nearest: Vec<f64> = (0..n).map(|i| cityblock(d.row(i), &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        if !(total > 0.0) {
            return Err(Error::param(format!(
                "k = {k} exceeds the {} distinct rows of the feature matrix",
                centroids.len()
            )));
        }
        let t = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in nearest.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                pick = Some(i);
                if acc > t {
                    break;
                }
            }
        }
        let c = d.row(pick.expect("positive mass")).to_vec();
        for (i, v) in nearest.iter_mut().enumerate() {
            *v = v.min(cityblock(d.row(i), &c));
        }
        centroids.push(c);
    }
    Ok(centroids)
}

fn assign(d: &FeatureMatrix, centroids: &[Vec<f64>]) -> (Vec<u32>, Vec<f64>) {
    let best = par::map_range(d.rows(), |i| {
        let row = d.row(i);
        let mut best = (0u32, f64::INFINITY);
        for (j, c) in centroids.iter().enumerate() {
            let dist = cityblock(row, c);
            if dist < best.1 {
                best = (j as u32, dist);
            }
        }
        best
    });
    best.into_iter().unzip()
}

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    let (_, &mut hi, _) = values.select_nth_unstable_by(n / 2, f64::total_cmp);
    if n % 2 == 1 {
        hi
    } else {
        let lo = values[..n / 2]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// One Lloyd run from the given centroids. Returns the final labels,
/// the objective after every assignment, and the number of update steps.
fn lloyd(
    d: &FeatureMatrix,
    mut centroids: Vec<Vec<f64>>,
    max_iter: usize,
) -> (Vec<u32>, Vec<f64>, usize) {
    let k = centroids.len();
    let cols = d.cols();
    let (mut labels, mut dist) = assign(d, &centroids);
    let mut history = vec![dist.iter().sum::<f64>()];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            members[l as usize].push(i);
        }
        let mut taken: Vec<usize> = Vec::new();
        for j in 0..k {
            if members[j].is_empty() {
                // move the empty centroid onto the worst-served row
                let far = (0..d.rows())
                    .filter(|i| !taken.contains(i))
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                    .expect("at least k rows");
                taken.push(far);
                centroids[j] = d.row(far).to_vec();
                continue;
            }
            let mut buf = vec![0.0; members[j].len()];
            for c in 0..cols {
                for (b, &i) in buf.iter_mut().zip(&members[j]) {
                    *b = d.row(i)[c];
                }
                centroids[j][c] = median(&mut buf);
            }
        }
        let (next, next_dist) = assign(d, &centroids);
        history.push(next_dist.iter().sum());
        dist = next_dist;
        if next == labels {
            break;
        }
        labels = next;
    }
    (labels, history, iterations)
}

/// Cityblock k-means with coordinate-median updates; the best of
/// `replications` seeded restarts by objective.
pub fn kmeans(d: &FeatureMatrix, params: &KMeansParams) -> Result<ClusterResult> {
    params.validate()?;
    let runs = par::map_range(params.replications, |rep| -> Result<ClusterResult> {
        let mut rng = rng_for(params.seed, rep as u64);
        let init = kmeans_pp_seed(d, params.k, &mut rng)?;
        let (labels, history, iterations) = lloyd(d, init, params.max_iter);
        Ok(ClusterResult {
            labels,
            k: params.k,
            objective: *history.last().expect("non-empty"),
            iterations,
        })
    });
    let mut best: Option<ClusterResult> = None;
    for r in runs {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.objective < b.objective) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one replication"))
}

/// Truncated eigenpairs of the symmetric-normalised graph Laplacian;
/// `vectors` is `rows x n_eigs`, eigenvalues ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphBasis {
    pub eigenvalues: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

fn affinity_scale(d: &FeatureMatrix, idx: &[usize]) -> f64 {
    let mut s = 0.0;
    let mut count = 0usize;
    for a in 0..idx.len() {
        for b in a + 1..idx.len() {
            s += cityblock(d.row(idx[a]), d.row(idx[b]));
            count += 1;
        }
    }
    let tau = if count > 0 { s / count as f64 } else { 0.0 };
    if tau > 0.0 {
        tau
    } else {
        1.0
    }
}

/// `M^{-1/2}` of a symmetric positive semi-definite matrix, pseudo-inverting
/// eigenvalues below `1e-12` of the largest.
fn inv_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let scaled = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues
            .iter()
            .map(|&l| if l > 1e-12 * top { 1.0 / l.sqrt() } else { 0.0 }),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&scaled) * eig.eigenvectors.transpose()
}

fn check_sizes(rows: usize, n_samples: usize, n_eigs: usize) -> Result<()> {
    if n_samples == 0 || n_eigs == 0 || n_samples > rows || n_eigs > n_samples {
        return Err(Error::param(format!(
            "need 0 < n_eigs ({n_eigs}) <= n_samples ({n_samples}) <= rows ({rows})"
        )));
    }
    Ok(())
}

/// Leading eigenpairs selected from `(eigenvalue of the normalised affinity,
/// vector)` candidates, returned as Laplacian eigenvalues `1 - lambda`.
fn leading(values: &[f64], vectors: &DMatrix<f64>, n_eigs: usize) -> GraphBasis {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(n_eigs);
    GraphBasis {
        eigenvalues: order.iter().map(|&j| 1.0 - values[j]).collect(),
        vectors: DMatrix::from_fn(vectors.nrows(), order.len(), |i, c| vectors[(i, order[c])]),
    }
}

/// Nyström approximation of the graph with affinities
/// `exp(-cityblock / tau)`, `tau` being the mean distance between sampled
/// rows. Uses the one-shot orthogonalised completion.
pub fn nystrom_eigs(
    d: &FeatureMatrix,
    n_samples: usize,
    n_eigs: usize,
    rng: &mut impl Rng,
) -> Result<GraphBasis> {
    let n = d.rows();
    check_sizes(n, n_samples, n_eigs)?;
    let mut sample = index::sample(rng, n, n_samples).into_vec();
    sample.sort_unstable();
    let mut is_sample = vec![false; n];
    for &i in &sample {
        is_sample[i] = true;
    }
    let rest: Vec<usize> = (0..n).filter(|&i| !is_sample[i]).collect();
    let tau = affinity_scale(d, &sample);
    let kernel = |i: usize, j: usize| (-cityblock(d.row(i), d.row(j)) / tau).exp();
    let (s, r) = (sample.len(), rest.len());
    let a = DMatrix::from_fn(s, s, |i, j| kernel(sample[i], sample[j]));
    let b_cols = par::map_range(r, |j| {
        (0..s)
            .map(|i| kernel(sample[i], rest[j]))
            .collect::<Vec<_>>()
    });
    let b = DMatrix::from_fn(s, r, |i, j| b_cols[j][i]);

    // degrees of the completed affinity [A B; B' B' A^-1 B]
    let a_pinv = inv_sqrt(&a);
    let a_pinv = &a_pinv * &a_pinv;
    let b_row = b.column_sum();
    let deg_s: DVector<f64> = a.column_sum() + &b_row;
    let deg_r: DVector<f64> = b.row_sum().transpose() + b.transpose() * (&a_pinv * &b_row);
    let isq = |x: f64| if x > 0.0 { 1.0 / x.sqrt() } else { 0.0 };
    let an = DMatrix::from_fn(s, s, |i, j| a[(i, j)] * isq(deg_s[i]) * isq(deg_s[j]));
    let bn = DMatrix::from_fn(s, r, |i, j| b[(i, j)] * isq(deg_s[i]) * isq(deg_r[j]));

    let asi = inv_sqrt(&an);
    let q = &an + &asi * (&bn * bn.transpose()) * &asi;
    let q = (&q + q.transpose()) * 0.5;
    let eig = SymmetricEigen::new(q);
    let lam: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let lam_isq = DMatrix::from_diagonal(&DVector::from_iterator(s, lam.iter().map(|&l| isq(l))));
    let proj = &asi * &eig.eigenvectors * lam_isq;
    let vs = &an * &proj;
    let vr = bn.transpose() * &proj;
    let mut full = DMatrix::zeros(n, s);
    for (k, &i) in sample.iter().enumerate() {
        full.row_mut(i).copy_from(&vs.row(k));
    }
    for (k, &i) in rest.iter().enumerate() {
        full.row_mut(i).copy_from(&vr.row(k));
    }
    Ok(leading(&lam, &full, n_eigs))
}

/// Exact eigenpairs of the full graph built like [`nystrom_eigs`] with every
/// row sampled. Quadratic in memory; meant for small inputs and as a
/// reference.
pub fn dense_eigs(d: &FeatureMatrix, n_eigs: usize) -> Result<GraphBasis> {
    let n = d.rows();
    check_sizes(n, n, n_eigs)?;
    let all: Vec<usize> = (0..n).collect();
    let tau = affinity_scale(d, &all);
    let w = DMatrix::from_fn(n, n, |i, j| (-cityblock(d.row(i), d.row(j)) / tau).exp());
    let deg = w.column_sum();
    let wn = DMatrix::from_fn(n, n, |i, j| w[(i, j)] / (deg[i] * deg[j]).sqrt());
    let eig = SymmetricEigen::new(wn);
    let lam: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    Ok(leading(&lam, &eig.eigenvectors, n_eigs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MboClusterParams {
    pub mu_fidelity: f64,
    pub tolerance: f64,
    pub dt: f64,
    pub threshold_interval: usize,
    pub n_samples: usize,
    pub n_eigs: usize,
    pub seed_fraction: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for MboClusterParams {
    fn default() -> Self {
        Self {
            mu_fidelity: 30.0,
            tolerance: 1e-7,
            dt: 0.05,
            threshold_interval: 3,
            n_samples: 300,
            n_eigs: 30,
            seed_fraction: 0.25,
            max_iter: 300,
            seed: 0,
        }
    }
}

impl MboClusterParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.mu_fidelity, self.tolerance, self.dt]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if !positive
            || self.threshold_interval == 0
            || self.n_samples == 0
            || self.n_eigs == 0
            || self.max_iter == 0
            || !(self.seed_fraction > 0.0 && self.seed_fraction <= 1.0)
        {
            return Err(Error::param(format!(
                "invalid MBO clustering parameters: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Draws `max(1, round(fraction * size))` rows of every class.
pub fn sample_seeds(
    labels: &[u32],
    k: usize,
    fraction: f64,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        let l = l as usize;
        if l >= k {
            return Err(Error::input(format!("label {l} outside 0..{k}")));
        }
        by_class[l].push(i);
    }
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::input(format!("class {c} has no rows to seed from")));
    }
    // visiting classes by first occurrence keeps the draw independent of label names
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&c| by_class[c][0]);
    let mut seeds = Vec::new();
    for rows in order.iter().map(|&c| &by_class[c]) {
        let take = ((fraction * rows.len() as f64).round() as usize).clamp(1, rows.len());
        seeds.extend(
            index::sample(rng, rows.len(), take)
                .into_iter()
                .map(|j| rows[j]),
        );
    }
    seeds.sort_unstable();
    Ok(seeds)
}

/// Row-wise projection onto the nearest simplex vertex (ties go to the lower
/// class).
fn threshold_rows(u: &mut DMatrix<f64>) {
    for i in 0..u.nrows() {
        let mut best = 0;
        for c in 1..u.ncols() {
            if u[(i, c)] > u[(i, best)] {
                best = c;
            }
        }
        for c in 0..u.ncols() {
            u[(i, c)] = if c == best { 1.0 } else { 0.0 };
        }
    }
}

/// MBO iterations in a given eigenbasis. Every row starts at its `init`
/// class; the rows listed in `seeds` are also pulled towards it by the
/// fidelity term.
pub fn mbo_with_basis(
    basis: &GraphBasis,
    init: &[u32],
    k: usize,
    seeds: &[usize],
    params: &MboClusterParams,
) -> Result<ClusterResult> {
    params.validate()?;
    let n = basis.vectors.nrows();
    if init.len() != n {
        return Err(Error::input(format!("{} labels for {n} rows", init.len())));
    }
    let mut target = DMatrix::zeros(n, k);
    let mut seeded = vec![false; n];
    for &i in seeds {
        target[(i, init[i] as usize)] = 1.0;
        seeded[i] = true;
    }
    let mut u = DMatrix::from_fn(n, k, |i, c| if init[i] as usize == c { 1.0 } else { 0.0 });
    let phi = &basis.vectors;
    let damp: Vec<f64> = basis
        .eigenvalues
        .iter()
        .map(|l| 1.0 / (1.0 + params.dt * l))
        .collect();
    let fid = params.dt * params.mu_fidelity;
    let mut iterations = 0;
    while iterations < params.max_iter {
        iterations += 1;
        let before = u.clone();
        for _ in 0..params.threshold_interval {
            let mut a = phi.transpose() * &u;
            for (r, s) in damp.iter().enumerate() {
                a.row_mut(r).scale_mut(*s);
            }
            u = phi * a;
            for i in (0..n).filter(|&i| seeded[i]) {
                for c in 0..k {
                    u[(i, c)] = (u[(i, c)] + fid * target[(i, c)]) / (1.0 + fid);
                }
            }
        }
        threshold_rows(&mut u);
        let change = (&u - &before).norm_squared();
        let size = u.norm_squared();
        if change <= params.tolerance * size {
            break;
        }
    }
    let labels = (0..n)
        .map(|i| (0..k).find(|&c| u[(i, c)] == 1.0).unwrap_or(0) as u32)
        .collect();
    Ok(ClusterResult {
        labels,
        k,
        objective: 0.0,
        iterations,
    })
}

/// Multiclass MBO seeded from a fraction of `init`'s labels, on the Nyström
/// basis. `n_samples` is capped at the number of rows.
pub fn multiclass_mbo(
    d: &FeatureMatrix,
    init: &[u32],
    k: usize,
    params: &MboClusterParams,
) -> Result<ClusterResult> {
    params.validate()?;
    if init.len() != d.rows() {
        return Err(Error::input(format!(
            "{} labels for {} rows",
            init.len(),
            d.rows()
        )));
    }
    let n_samples = params.n_samples.min(d.rows());
    let n_eigs = params.n_eigs.min(n_samples);
    let basis = nystrom_eigs(d, n_samples, n_eigs, &mut rng_for(params.seed, 0))?;
    let seeds = sample_seeds(init, k, params.seed_fraction, &mut rng_for(params.seed, 1))?;
    mbo_with_basis(&basis, init, k, &seeds, params)
}
