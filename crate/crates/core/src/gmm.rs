//! Diagonal-covariance Gaussian mixtures fitted by EM, and maximum-posterior
//! component assignment.
//!
//! Initialization is seeded k-means++ (greedy, with `2 + ln m` candidate
//! draws per center) followed by a few Lloyd iterations, repeated a few
//! times from the same random stream keeping the lowest inertia. All density
//! math stays in log space.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::DEFAULT_VAR_FLOOR;

/// Responsibility mass below `COLLAPSE_FRACTION * n` marks a component as collapsed.
const COLLAPSE_FRACTION: f64 = 1e-8;
const KMEANS_ITERS: usize = 10;
/// k-means++ restarts; the lowest-inertia clustering seeds EM.
const KMEANS_RESTARTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub floor: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            max_iters: 200,
            rel_tol: 1e-6,
            floor: DEFAULT_VAR_FLOOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl GmmComponent {
    fn log_density(&self, e: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((x, mu), v) in e.iter().zip(&self.mean).zip(&self.var) {
            let z = x - mu;
            acc += (2.0 * PI * v).ln() + z * z / v;
        }
        -0.5 * acc
    }
}

/// A fitted mixture for one leaf. Serialized as parallel
/// `weights` / `means` / `vars` arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GmmRecord", into = "GmmRecord")]
pub struct LeafGmm {
    components: Vec<GmmComponent>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct GmmRecord {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    vars: Vec<Vec<f64>>,
}

impl TryFrom<GmmRecord> for LeafGmm {
    type Error = Error;

    fn try_from(rec: GmmRecord) -> Result<Self> {
        if rec.weights.len() != rec.means.len() || rec.weights.len() != rec.vars.len() {
            return Err(Error::ModelCorruption("GMM arrays differ in length".into()));
        }
        let components = rec
            .weights
            .into_iter()
            .zip(rec.means)
            .zip(rec.vars)
            .map(|((weight, mean), var)| GmmComponent { weight, mean, var })
            .collect();
        LeafGmm::new(components)
    }
}

impl From<LeafGmm> for GmmRecord {
    fn from(g: LeafGmm) -> Self {
        let mut rec = GmmRecord {
            weights: Vec::with_capacity(g.components.len()),
            means: Vec::with_capacity(g.components.len()),
            vars: Vec::with_capacity(g.components.len()),
        };
        for c in g.components {
            rec.weights.push(c.weight);
            rec.means.push(c.mean);
            rec.vars.push(c.var);
        }
        rec
    }
}

impl LeafGmm {
    /// Validates shapes, positive weights summing to one, and positive variances.
    pub fn new(components: Vec<GmmComponent>) -> Result<Self> {
        let corrupt = |m: &str| Error::ModelCorruption(m.to_string());
        let first = components
            .first()
            .ok_or_else(|| corrupt("GMM has no components"))?;
        let dim = first.mean.len();
        if dim == 0 {
            return Err(corrupt("GMM dimension is zero"));
        }
        for c in &components {
            if c.mean.len() != dim || c.var.len() != dim {
                return Err(corrupt("GMM component dimensions differ"));
            }
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(corrupt("GMM weight outside (0, 1]"));
            }
            if c.var.iter().any(|v| !(*v > 0.0 && v.is_finite()))
                || c.mean.iter().any(|m| !m.is_finite())
            {
                return Err(corrupt("GMM mean or variance is not finite and positive"));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(corrupt("GMM weights do not sum to 1"));
        }
        Ok(LeafGmm { components, dim })
    }

    pub fn components(&self) -> &[GmmComponent] {
        &self.components
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_dim(&self, e: &[f64]) -> Result<()> {
        if e.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: e.len(),
            });
        }
        Ok(())
    }

    /// Total log-likelihood of `samples` under the mixture.
    pub fn log_likelihood(&self, samples: &[&[f64]]) -> Result<f64> {
        let mut total = 0.0;
        for e in samples {
            total += log_sum_exp(&posterior_log_scores(e, self)?);
        }
        Ok(total)
    }
}

/// `ln sum_i exp(x_i)`, stable for large magnitudes; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Unnormalized log-posteriors `ln N(e | mu_k, var_k) + ln w_k`.
pub fn posterior_log_scores(e: &[f64], gmm: &LeafGmm) -> Result<Vec<f64>> {
    gmm.check_dim(e)?;
    Ok(gmm
        .components
        .iter()
        .map(|c| c.log_density(e) + c.weight.ln())
        .collect())
}

/// Normalized posterior probabilities over components.
pub fn posterior_probabilities(e: &[f64], gmm: &LeafGmm) -> Result<Vec<f64>> {
    let scores = posterior_log_scores(e, gmm)?;
    let norm = log_sum_exp(&scores);
    Ok(scores.iter().map(|s| (s - norm).exp()).collect())
}

/// Index of the highest log-posterior; ties go to the smallest index.
pub fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = k;
        }
    }
    best
}

pub fn assign_component(e: &[f64], gmm: &LeafGmm) -> Result<usize> {
    Ok(argmax_first(&posterior_log_scores(e, gmm)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub gmm: LeafGmm,
    /// Total log-likelihood evaluated before each M-step, plus the final one.
    /// Restarts after a collapsed component is re-seeded.
    pub ll_trace: Vec<f64>,
    pub iterations: usize,
    pub reseeds: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn global_variance(samples: &[&[f64]], floor: f64) -> Vec<f64> {
    let n = samples.len() as f64;
    let dim = samples[0].len();
    (0..dim)
        .map(|j| {
            let mu = samples.iter().map(|x| x[j]).sum::<f64>() / n;
            (samples.iter().map(|x| (x[j] - mu).powi(2)).sum::<f64>() / n).max(floor)
        })
        .collect()
}

/// Draws an index with probability proportional to `weights`.
fn weighted_index(rng: &mut ChaCha8Rng, weights: &[f64], total: f64) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if acc > target {
            return i;
        }
    }
    weights
        .iter()
        .rposition(|w| *w > 0.0)
        .unwrap_or(weights.len() - 1)
}

/// Greedy k-means++ seeding.
fn kmeans_plus_plus(samples: &[&[f64]], m: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = samples.len();
    let trials = 2 + (m as f64).ln().floor() as usize;
    let mut centers = vec![samples[rng.random_range(0..n)].to_vec()];
    let mut closest: Vec<f64> = samples.iter().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < m {
        let potential: f64 = closest.iter().sum();
        if potential <= 0.0 {
            centers.push(samples[rng.random_range(0..n)].to_vec());
            continue;
        }
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let cand = weighted_index(rng, &closest, potential);
            let updated: Vec<f64> = samples
                .iter()
                .zip(&closest)
                .map(|(x, c)| c.min(sq_dist(x, samples[cand])))
                .collect();
            let pot: f64 = updated.iter().sum();
            if best.as_ref().is_none_or(|(p, _, _)| pot < *p) {
                best = Some((pot, cand, updated));
            }
        }
        let (_, idx, updated) = best.expect("at least one trial");
        centers.push(samples[idx].to_vec());
        closest = updated;
    }
    centers
}

fn nearest(x: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Lloyd iterations; empty clusters are moved to the worst-fit sample.
fn lloyd(samples: &[&[f64]], centers: &mut [Vec<f64>], iters: usize) -> Vec<usize> {
    let dim = samples[0].len();
    let m = centers.len();
    let mut labels: Vec<usize> = samples.iter().map(|x| nearest(x, centers).0).collect();
    for _ in 0..iters {
        let mut sums = vec![vec![0.0; dim]; m];
        let mut counts = vec![0usize; m];
        for (x, &k) in samples.iter().zip(&labels) {
            counts[k] += 1;
            for (s, v) in sums[k].iter_mut().zip(x.iter()) {
                *s += v;
            }
        }
        for k in 0..m {
            if counts[k] > 0 {
                centers[k] = sums[k].iter().map(|s| s / counts[k] as f64).collect();
            }
        }
        for k in 0..m {
            if counts[k] == 0 {
                let far = (0..samples.len())
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| {
                        let da = sq_dist(samples[a], &centers[labels[a]]);
                        let db = sq_dist(samples[b], &centers[labels[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    });
                if let Some(i) = far {
                    counts[labels[i]] -= 1;
                    counts[k] = 1;
                    labels[i] = k;
                    centers[k] = samples[i].to_vec();
                }
            }
        }
        let next: Vec<usize> = samples.iter().map(|x| nearest(x, centers).0).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

fn init_from_labels(
    samples: &[&[f64]],
    labels: &[usize],
    m: usize,
    global_var: &[f64],
    floor: f64,
) -> Vec<GmmComponent> {
    let n = samples.len() as f64;
    (0..m)
        .map(|k| {
            let members: Vec<&[f64]> = samples
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == k)
                .map(|(x, _)| *x)
                .collect();
            if members.len() < 2 {
                let mean = members
                    .first()
                    .map_or_else(|| samples[0].to_vec(), |x| x.to_vec());
                return GmmComponent {
                    weight: (members.len().max(1)) as f64 / n,
                    mean,
                    var: global_var.to_vec(),
                };
            }
            let cnt = members.len() as f64;
            let dim = members[0].len();
            let mean: Vec<f64> = (0..dim)
                .map(|j| members.iter().map(|x| x[j]).sum::<f64>() / cnt)
                .collect();
            let var = (0..dim)
                .map(|j| {
                    (members
                        .iter()
                        .map(|x| (x[j] - mean[j]).powi(2))
                        .sum::<f64>()
                        / cnt)
                        .max(floor)
                })
                .collect();
            GmmComponent {
                weight: cnt / n,
                mean,
                var,
            }
        })
        .collect()
}

fn normalize_weights(components: &mut [GmmComponent]) {
    for c in components.iter_mut() {
        c.weight = c.weight.max(f64::MIN_POSITIVE);
    }
    let total: f64 = components.iter().map(|c| c.weight).sum();
    for c in components.iter_mut() {
        c.weight /= total;
    }
}

/// Fits an `m`-component diagonal GMM by EM.
///
/// Stops after `max_iters` M-steps or once the relative log-likelihood
/// improvement falls below `rel_tol`. Deterministic for a given seed.
pub fn fit_gmm(samples: &[&[f64]], m: usize, seed: u64, config: &GmmConfig) -> Result<GmmFit> {
    if m == 0 {
        return Err(Error::Config(
            "number of components must be at least 1".into(),
        ));
    }
    if samples.len() < m {
        return Err(Error::InsufficientData {
            samples: samples.len(),
            components: m,
        });
    }
    if config.floor.is_nan()
        || config.floor <= 0.0
        || config.rel_tol.is_nan()
        || config.rel_tol < 0.0
    {
        return Err(Error::Config(
            "GMM floor must be positive and rel_tol non-negative".into(),
        ));
    }
    let dim = samples[0].len();
    if let Some(bad) = samples.iter().find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    let n = samples.len();
    let floor = config.floor;
    let global_var = global_variance(samples, floor);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let restarts = if m == 1 { 1 } else { KMEANS_RESTARTS };
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..restarts {
        let mut centers = kmeans_plus_plus(samples, m, &mut rng);
        let labels = lloyd(samples, &mut centers, KMEANS_ITERS);
        let inertia: f64 = samples
            .iter()
            .zip(&labels)
            .map(|(x, &k)| sq_dist(x, &centers[k]))
            .sum();
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, labels));
        }
    }
    let (_, labels) = best.expect("at least one restart");
    let mut components = init_from_labels(samples, &labels, m, &global_var, floor);
    normalize_weights(&mut components);

    let max_reseeds = 3 * m;
    let mut reseeds = 0;
    let mut trace: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let mut resp = vec![0.0; n * m];
    let mut row_ll = vec![0.0; n];
    let mut scores = vec![0.0; m];

    loop {
        // E-step.
        let consts: Vec<f64> = components
            .iter()
            .map(|c| c.weight.ln() - 0.5 * c.var.iter().map(|v| (2.0 * PI * v).ln()).sum::<f64>())
            .collect();
        let mut total = 0.0;
        for (i, x) in samples.iter().enumerate() {
            for (k, c) in components.iter().enumerate() {
                let quad: f64 = x
                    .iter()
                    .zip(&c.mean)
                    .zip(&c.var)
                    .map(|((xv, mu), v)| (xv - mu) * (xv - mu) / v)
                    .sum();
                scores[k] = consts[k] - 0.5 * quad;
            }
            let lse = log_sum_exp(&scores);
            row_ll[i] = lse;
            total += lse;
            for k in 0..m {
                resp[i * m + k] = (scores[k] - lse).exp();
            }
        }
        let converged = trace.last().is_some_and(|prev| {
            (total - prev) / prev.abs().max(f64::MIN_POSITIVE) < config.rel_tol
        });
        trace.push(total);
        if converged || iterations >= config.max_iters {
            break;
        }

        // M-step.
        iterations += 1;
        let mut reseeded = false;
        for k in 0..m {
            let mass: f64 = (0..n).map(|i| resp[i * m + k]).sum();
            if mass < COLLAPSE_FRACTION * n as f64 && reseeds < max_reseeds {
                let worst = (0..n)
                    .min_by(|&a, &b| row_ll[a].total_cmp(&row_ll[b]).then(a.cmp(&b)))
                    .expect("non-empty");
                components[k] = GmmComponent {
                    weight: 1.0 / n as f64,
                    mean: samples[worst].to_vec(),
                    var: global_var.clone(),
                };
                reseeds += 1;
                reseeded = true;
                log::debug!("re-seeded collapsed component {k} at sample {worst}");
                continue;
            }
            if mass <= 0.0 {
                components[k].weight = 0.0;
                continue;
            }
            let mean: Vec<f64> = (0..dim)
                .map(|j| (0..n).map(|i| resp[i * m + k] * samples[i][j]).sum::<f64>() / mass)
                .collect();
            let var: Vec<f64> = (0..dim)
                .map(|j| {
                    let s: f64 = (0..n)
                        .map(|i| {
                            let z = samples[i][j] - mean[j];
                            resp[i * m + k] * z * z
                        })
                        .sum();
                    (s / mass).max(floor)
                })
                .collect();
            components[k] = GmmComponent {
                weight: mass / n as f64,
                mean,
                var,
            };
        }
        normalize_weights(&mut components);
        if reseeded {
            // A re-seeded component starts a fresh EM run.
            trace.clear();
        }
    }

    Ok(GmmFit {
        gmm: LeafGmm::new(components)?,
        ll_trace: trace,
        iterations,
        reseeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn refs(xs: &[Vec<f64>]) -> Vec<&[f64]> {
        xs.iter().map(Vec::as_slice).collect()
    }

    fn assert_monotone(trace: &[f64]) {
        for w in trace.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0),
                "trace decreased: {w:?}"
            );
        }
    }

    fn direct_log_density(e: &[f64], mean: &[f64], var: &[f64]) -> f64 {
        let mut total = 0.0;
        for j in 0..e.len() {
            total += -0.5 * (2.0 * PI * var[j]).ln() - (e[j] - mean[j]).powi(2) / (2.0 * var[j]);
        }
        total
    }

    fn two_component(w0: f64, mu0: f64, mu1: f64) -> LeafGmm {
        LeafGmm::new(vec![
            GmmComponent {
                weight: w0,
                mean: vec![mu0],
                var: vec![1.0],
            },
            GmmComponent {
                weight: 1.0 - w0,
                mean: vec![mu1],
                var: vec![1.0],
            },
        ])
        .unwrap()
    }

    #[test]
    fn single_component_is_the_ml_gaussian() {
        let xs: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64 * 0.5, (i % 3) as f64])
            .collect();
        let fit = fit_gmm(&refs(&xs), 1, 3, &GmmConfig::default()).unwrap();
        let c = &fit.gmm.components()[0];
        assert_eq!(c.weight, 1.0);
        let n = xs.len() as f64;
        for j in 0..2 {
            let mu = xs.iter().map(|x| x[j]).sum::<f64>() / n;
            let var = xs.iter().map(|x| (x[j] - mu).powi(2)).sum::<f64>() / n;
            assert!((c.mean[j] - mu).abs() < 1e-12);
            assert!((c.var[j] - var).abs() < 1e-12);
        }
        assert_eq!(fit.iterations, 1);
        assert_monotone(&fit.ll_trace);
    }

    #[test]
    fn recovers_two_separated_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let xs: Vec<Vec<f64>> = (0..100)
            .map(|i| vec![if i < 50 { 0.0 } else { 10.0 } + noise.sample(&mut rng)])
            .collect();
        let fit = fit_gmm(&refs(&xs), 2, 0, &GmmConfig::default()).unwrap();
        let mut comps: Vec<&GmmComponent> = fit.gmm.components().iter().collect();
        comps.sort_by(|a, b| a.mean[0].total_cmp(&b.mean[0]));
        assert!((comps[0].mean[0] - 0.0).abs() < 0.1);
        assert!((comps[1].mean[0] - 10.0).abs() < 0.1);
        assert!((comps[0].weight - 0.5).abs() < 0.05);
        assert!((comps[1].weight - 0.5).abs() < 0.05);
        assert_monotone(&fit.ll_trace);
    }

    #[test]
    fn too_few_samples() {
        let xs = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            fit_gmm(&refs(&xs), 3, 0, &GmmConfig::default()),
            Err(Error::InsufficientData {
                samples: 2,
                components: 3
            })
        ));
    }

    #[test]
    fn identical_points_keep_all_components() {
        let xs = vec![vec![2.0, 2.0]; 12];
        let fit = fit_gmm(&refs(&xs), 4, 1, &GmmConfig::default()).unwrap();
        assert_eq!(fit.gmm.num_components(), 4);
        assert!(fit
            .gmm
            .components()
            .iter()
            .all(|c| c.var.iter().all(|v| *v >= 1e-6)));
    }

    #[test]
    fn fitting_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<Vec<f64>> = (0..80)
            .map(|_| {
                (0..3)
                    .map(|_| rand::Rng::random_range(&mut rng, -4.0..4.0))
                    .collect()
            })
            .collect();
        let a = fit_gmm(&refs(&xs), 4, 17, &GmmConfig::default()).unwrap();
        let b = fit_gmm(&refs(&xs), 4, 17, &GmmConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_component_posterior_is_one() {
        let g = LeafGmm::new(vec![GmmComponent {
            weight: 1.0,
            mean: vec![0.0, 1.0],
            var: vec![2.0, 0.5],
        }])
        .unwrap();
        let p = posterior_probabilities(&[3.0, -1.0], &g).unwrap();
        assert_eq!(p, vec![1.0]);
        assert_eq!(assign_component(&[3.0, -1.0], &g).unwrap(), 0);
    }

    #[test]
    fn closer_component_scores_higher() {
        let g = two_component(0.5, 0.0, 10.0);
        let s = posterior_log_scores(&[1.0], &g).unwrap();
        assert!(s[0] > s[1]);
    }

    #[test]
    fn midpoint_tie_goes_to_first() {
        let g = two_component(0.5, -1.0, 1.0);
        assert_eq!(assign_component(&[0.0], &g).unwrap(), 0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let g = two_component(0.5, 0.0, 1.0);
        assert!(matches!(
            posterior_log_scores(&[0.0, 1.0], &g),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(
            log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]),
            f64::NEG_INFINITY
        );
        let big = log_sum_exp(&[1234.0, 1232.0]);
        assert!((big - (1232.0 + (2f64.exp() + 1.0).ln())).abs() < 1e-9);
    }

    #[test]
    fn invalid_mixtures_are_rejected() {
        let bad_weights = vec![
            GmmComponent {
                weight: 0.7,
                mean: vec![0.0],
                var: vec![1.0],
            },
            GmmComponent {
                weight: 0.7,
                mean: vec![1.0],
                var: vec![1.0],
            },
        ];
        assert!(LeafGmm::new(bad_weights).is_err());
        assert!(LeafGmm::new(vec![GmmComponent {
            weight: 1.0,
            mean: vec![0.0],
            var: vec![0.0]
        }])
        .is_err());
        assert!(LeafGmm::new(vec![]).is_err());
    }

    fn random_gmm() -> impl Strategy<Value = (LeafGmm, Vec<f64>)> {
        (1usize..5, 1usize..6).prop_flat_map(|(m, d)| {
            (
                prop::collection::vec(
                    (
                        0.05f64..1.0,
                        prop::collection::vec(-5.0f64..5.0, d),
                        prop::collection::vec(0.05f64..4.0, d),
                    ),
                    m,
                ),
                prop::collection::vec(-8.0f64..8.0, d),
            )
                .prop_map(|(raw, e)| {
                    let total: f64 = raw.iter().map(|r| r.0).sum();
                    let comps = raw
                        .into_iter()
                        .map(|(w, mean, var)| GmmComponent {
                            weight: w / total,
                            mean,
                            var,
                        })
                        .collect();
                    (LeafGmm::new(comps).unwrap(), e)
                })
        })
    }

    proptest! {
        #[test]
        fn scores_match_direct_formula((g, e) in random_gmm()) {
            let scores = posterior_log_scores(&e, &g).unwrap();
            for (s, c) in scores.iter().zip(g.components()) {
                let oracle = direct_log_density(&e, &c.mean, &c.var) + c.weight.ln();
                prop_assert!((s - oracle).abs() <= 1e-9 * oracle.abs().max(1.0));
            }
            let p: f64 = posterior_probabilities(&e, &g).unwrap().iter().sum();
            prop_assert!((p - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn assignment_is_brute_force_argmax((g, e) in random_gmm(), shift in -50.0f64..50.0) {
            let scores: Vec<f64> = g
                .components()
                .iter()
                .map(|c| direct_log_density(&e, &c.mean, &c.var) + c.weight.ln())
                .collect();
            let mut best = 0;
            for k in 0..scores.len() {
                if scores[k] > scores[best] {
                    best = k;
                }
            }
            let t = assign_component(&e, &g).unwrap();
            prop_assert!(t == best || (scores[t] - scores[best]).abs() < 1e-12);
            let shifted: Vec<f64> = posterior_log_scores(&e, &g).unwrap().iter().map(|s| s + shift).collect();
            prop_assert_eq!(argmax_first(&shifted), t);
        }

        #[test]
        fn em_never_decreases_likelihood(
            xs in prop::collection::vec(prop::collection::vec(-6.0f64..6.0, 2), 8..60),
            m in 1usize..5,
            seed in 0u64..1000,
        ) {
            let fit = fit_gmm(&refs(&xs), m, seed, &GmmConfig::default()).unwrap();
            for w in fit.ll_trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0));
            }
            let total: f64 = fit.gmm.components().iter().map(|c| c.weight).sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
            prop_assert!(fit.gmm.components().iter().all(|c| c.var.iter().all(|v| *v >= 1e-6)));
        }
    }
}
