//! Operating-mode discovery: K-means on standardised classification vectors
//! with the number of clusters chosen as the smallest K whose
//! between-group / total sum of squares ratio reaches a threshold.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Per-dimension mean and population standard deviation; constant
    /// dimensions keep scale 1.
    pub fn fit(points: &[Vec<f64>]) -> Result<Self> {
        let dim = check_points(points)?;
        let n = points.len() as f64;
        let mut mean = vec![0.0; dim];
        for p in points {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v / n;
            }
        }
        let mut scale = vec![0.0; dim];
        for p in points {
            for ((s, v), m) in scale.iter_mut().zip(p).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in scale.iter_mut() {
            *s = if *s > 0.0 { libm::sqrt(*s) } else { 1.0 };
        }
        Ok(Standardizer { mean, scale })
    }

    pub fn identity(dim: usize) -> Self {
        Standardizer { mean: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, t: &[f64]) -> Vec<f64> {
        t.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| v * s + m).collect()
    }
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let dim = points.first().map(Vec::len).ok_or_else(|| Error::Degenerate("no points".into()))?;
    if dim == 0 {
        return Err(Error::Degenerate("zero-dimensional points".into()));
    }
    for p in points {
        if p.len() != dim {
            return Err(Error::Dimension(format!("point of length {} among length {}", p.len(), dim)));
        }
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("classification vector"));
        }
    }
    Ok(dim)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, p);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn mean_of(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len() as f64;
    let mut m = vec![0.0; points[0].len()];
    for p in points {
        for (a, v) in m.iter_mut().zip(p) {
            *a += v / n;
        }
    }
    m
}

/// Between-group over total sum of squares for a given labelling.
pub fn bss_tss_ratio(points: &[Vec<f64>], assignments: &[usize], centroids: &[Vec<f64>]) -> Result<f64> {
    check_points(points)?;
    if assignments.len() != points.len() {
        return Err(Error::Dimension(format!(
            "{} assignments for {} points",
            assignments.len(),
            points.len()
        )));
    }
    let grand = mean_of(points);
    let tss: f64 = points.iter().map(|p| sq_dist(p, &grand)).sum();
    if tss == 0.0 {
        return Err(Error::Degenerate("all classification vectors are identical".into()));
    }
    let mut counts = vec![0usize; centroids.len()];
    for &a in assignments {
        *counts
            .get_mut(a)
            .ok_or(Error::StateIndex { index: a, states: centroids.len() })? += 1;
    }
    let bss: f64 = centroids.iter().zip(&counts).map(|(c, &n)| n as f64 * sq_dist(c, &grand)).sum();
    Ok(bss / tss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub wss: f64,
    /// Within-group sum of squares after each Lloyd iteration.
    pub wss_trace: Vec<f64>,
}

/// Lloyd's algorithm from a K-means++ seeding.
pub fn kmeans_once(points: &[Vec<f64>], k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> KMeansFit {
    let n = points.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points[idx].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }

    let mut assignments = vec![usize::MAX; n];
    let mut wss_trace = Vec::new();
    for _ in 0..max_iter {
        let mut changed = false;
        for (a, p) in assignments.iter_mut().zip(points) {
            let (best, _) = nearest(&centroids, p);
            if *a != best {
                *a = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; points[0].len()]; k];
        let mut counts = vec![0usize; k];
        for (a, p) in assignments.iter().zip(points) {
            counts[*a] += 1;
            for (s, v) in sums[*a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        // Empty clusters take over the point farthest from its centroid.
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[assignments[i]] > 1)
                .max_by(|&a, &b| {
                    sq_dist(&points[a], &centroids[assignments[a]])
                        .total_cmp(&sq_dist(&points[b], &centroids[assignments[b]]))
                });
            if let Some(i) = far {
                counts[assignments[i]] -= 1;
                assignments[i] = j;
                counts[j] = 1;
                centroids[j] = points[i].clone();
            }
        }
        wss_trace.push(wss(points, &assignments, &centroids));
    }
    let wss = wss(points, &assignments, &centroids);
    KMeansFit { centroids, assignments, wss, wss_trace }
}

fn wss(points: &[Vec<f64>], assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points.iter().zip(assignments).map(|(p, a)| sq_dist(p, &centroids[*a])).sum()
}

/// Best of `restarts` seeded K-means runs by within-group sum of squares.
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> KMeansFit {
    let mut best: Option<KMeansFit> = None;
    for _ in 0..restarts.max(1) {
        let fit = kmeans_once(points, k, max_iter, rng);
        if best.as_ref().is_none_or(|b| fit.wss < b.wss) {
            best = Some(fit);
        }
    }
    best.expect("at least one restart")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoKSettings {
    pub threshold: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for AutoKSettings {
    fn default() -> Self {
        AutoKSettings { threshold: 0.8, k_min: 2, k_max: 12, restarts: 10, max_iter: 300, seed: 0 }
    }
}

impl AutoKSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        if self.k_min < 2 || self.k_max < self.k_min {
            return Err(Error::Config(format!("invalid K range {}..={}", self.k_min, self.k_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    /// Centroids in standardised space.
    pub centroids: Vec<Vec<f64>>,
    pub counts: Vec<u64>,
    pub standardizer: Standardizer,
    /// Achieved between/total sum of squares ratio; `None` for fixed centroids.
    pub gof: Option<f64>,
    /// False when the sweep stopped at `k_max` without reaching the threshold.
    pub reached_threshold: bool,
}

impl ClusterModel {
    /// Model with fixed centroids given in the original units.
    pub fn from_centroids(centroids: &[Vec<f64>], standardizer: Standardizer) -> Result<Self> {
        if centroids.len() < 2 {
            return Err(Error::Config("at least two centroids are required".into()));
        }
        if centroids.iter().any(|c| c.len() != standardizer.dim()) {
            return Err(Error::Dimension("centroid dimension differs from standardizer".into()));
        }
        Ok(ClusterModel {
            centroids: centroids.iter().map(|c| standardizer.apply(c)).collect(),
            counts: vec![1; centroids.len()],
            standardizer,
            gof: None,
            reached_threshold: true,
        })
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    /// Centroids mapped back to the original units.
    pub fn centroids_original(&self) -> Vec<Vec<f64>> {
        self.centroids.iter().map(|c| self.standardizer.invert(c)).collect()
    }

    pub fn assign(&self, t: &[f64]) -> Result<usize> {
        if t.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "classification vector of length {}, expected {}",
                t.len(),
                self.dim()
            )));
        }
        if !t.iter().all(|v| v.is_finite()) {
            return Err(Error::Input("non-finite classification vector".into()));
        }
        Ok(nearest(&self.centroids, &self.standardizer.apply(t)).0)
    }

    /// Running-mean update of centroid `k` with the standardised `t`.
    pub fn update_centroid(&mut self, k: usize, t: &[f64]) -> Result<()> {
        if k >= self.k() {
            return Err(Error::StateIndex { index: k, states: self.k() });
        }
        if t.len() != self.dim() {
            return Err(Error::Dimension(format!("classification vector of length {}", t.len())));
        }
        let z = self.standardizer.apply(t);
        let c = self.counts[k] as f64;
        for (o, v) in self.centroids[k].iter_mut().zip(&z) {
            *o = (c * *o + v) / (c + 1.0);
        }
        self.counts[k] += 1;
        Ok(())
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if self.k() < 2
            || self.counts.len() != self.k()
            || self.standardizer.scale.len() != dim
            || self.centroids.iter().any(|c| c.len() != dim)
        {
            return Err(Error::Dimension("inconsistent cluster model".into()));
        }
        Ok(())
    }
}

/// Chooses the number of clusters and fits the final model.
pub fn fit_auto_k(points: &[Vec<f64>], settings: &AutoKSettings) -> Result<ClusterModel> {
    settings.validate()?;
    check_points(points)?;
    let distinct = count_distinct(points);
    if distinct < settings.k_min {
        return Err(Error::Degenerate(format!(
            "{} distinct classification vectors, need at least {}",
            distinct, settings.k_min
        )));
    }
    let standardizer = Standardizer::fit(points)?;
    let z: Vec<Vec<f64>> = points.iter().map(|p| standardizer.apply(p)).collect();
    let k_max = settings.k_max.min(distinct);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut last = None;
    for k in settings.k_min..=k_max {
        let fit = kmeans(&z, k, settings.restarts, settings.max_iter, &mut rng);
        let gof = bss_tss_ratio(&z, &fit.assignments, &fit.centroids)?;
        let reached = gof >= settings.threshold;
        last = Some((fit, gof, reached));
        if reached {
            break;
        }
    }
    let (fit, gof, reached) = last.expect("k range is nonempty");
    if !reached {
        log::warn!("BSS/TSS {:.4} below threshold {} at K = {}", gof, settings.threshold, k_max);
    }
    let mut counts = vec![0u64; fit.centroids.len()];
    for a in &fit.assignments {
        counts[*a] += 1;
    }
    Ok(ClusterModel { centroids: fit.centroids, counts, standardizer, gof: Some(gof), reached_threshold: reached })
}

fn count_distinct(points: &[Vec<f64>]) -> usize {
    let mut keys: Vec<Vec<u64>> = points.iter().map(|p| p.iter().map(|v| v.to_bits()).collect()).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OeeBand {
    Optimal,
    Good,
    Improvable,
    Poor,
}

/// Four-level OEE banding with right-closed intervals:
/// `> 0.85`, `(0.60, 0.85]`, `(0.40, 0.60]`, `<= 0.40`.
pub fn oee_band(oee: f64) -> Result<OeeBand> {
    if !(0.0..=1.0).contains(&oee) {
        return Err(Error::Input(format!("oee {} outside [0, 1]", oee)));
    }
    Ok(if oee > 0.85 {
        OeeBand::Optimal
    } else if oee > 0.60 {
        OeeBand::Good
    } else if oee > 0.40 {
        OeeBand::Improvable
    } else {
        OeeBand::Poor
    })
}
