//! Mode-coverage and accuracy diagnostics for the mixture experiments: mode
//! assignment by nearest symmetric mode, traversal time, the coupon-collector
//! baseline, histogram and kernel-density outputs, and estimator summaries.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The symmetric modes of the mixture-mean posterior: all permutations of
/// the true means (full modes) and all ordered pairs of distinct true means
/// (modes of the first-two-coordinates marginal). A sample belongs to the
/// nearest mode if it lies within `capture_radius` of it.
#[derive(Clone, Debug)]
pub struct ModeAtlas<T> {
    true_means: Vec<T>,
    full_modes: Vec<Vec<T>>,
    marginal_modes: Vec<[T; 2]>,
    capture_radius: T,
}

impl<T: Scalar> ModeAtlas<T> {
    pub fn new(true_means: Vec<T>, capture_radius: T) -> Result<Self> {
        if true_means.len() < 2 {
            return Err(Error::InvalidConfig(
                "mode atlas needs at least two true means".into(),
            ));
        }
        let mut min_gap = T::infinity();
        for i in 0..true_means.len() {
            for j in (i + 1)..true_means.len() {
                let gap = (true_means[i] - true_means[j]).abs();
                if gap < min_gap {
                    min_gap = gap;
                }
            }
        }
        if !(capture_radius > T::zero()) || capture_radius >= min_gap * T::half() {
            return Err(Error::InvalidConfig(format!(
                "capture radius must lie in (0, {}/2)",
                min_gap
            )));
        }
        let indices: Vec<usize> = (0..true_means.len()).collect();
        let full_modes = lexicographic_permutations(&indices)
            .into_iter()
            .map(|perm| perm.iter().map(|&i| true_means[i]).collect())
            .collect();
        let mut marginal_modes = Vec::new();
        for i in 0..true_means.len() {
            for j in 0..true_means.len() {
                if i != j {
                    marginal_modes.push([true_means[i], true_means[j]]);
                }
            }
        }
        Ok(ModeAtlas {
            true_means,
            full_modes,
            marginal_modes,
            capture_radius,
        })
    }

    /// The atlas of the four-component demo posterior: true means
    /// (-3, 0, 3, 6), 24 full modes, 12 marginal modes, capture radius 1
    /// (well under half the minimum mode separation of 3).
    pub fn default_mixture() -> Self {
        let f = T::from_f64_lossy;
        ModeAtlas::new(vec![f(-3.0), f(0.0), f(3.0), f(6.0)], T::one())
            .expect("default atlas parameters are valid")
    }

    pub fn true_means(&self) -> &[T] {
        &self.true_means
    }

    pub fn full_mode_count(&self) -> usize {
        self.full_modes.len()
    }

    pub fn marginal_mode_count(&self) -> usize {
        self.marginal_modes.len()
    }

    pub fn full_mode(&self, index: usize) -> &[T] {
        &self.full_modes[index]
    }

    /// Index of the nearest full mode by Euclidean distance, or None when
    /// the sample is farther than the capture radius from every mode.
    pub fn assign_mode(&self, sample: &[T]) -> Option<usize> {
        let mut best = None;
        let mut best_dist = T::infinity();
        for (index, mode) in self.full_modes.iter().enumerate() {
            let mut d = T::zero();
            for (s, m) in sample.iter().zip(mode) {
                let diff = *s - *m;
                d = d + diff * diff;
            }
            if d < best_dist {
                best_dist = d;
                best = Some(index);
            }
        }
        if best_dist.sqrt() <= self.capture_radius {
            best
        } else {
            None
        }
    }

    /// Nearest marginal mode of the first two coordinates.
    pub fn assign_marginal_mode(&self, sample: &[T]) -> Option<usize> {
        let mut best = None;
        let mut best_dist = T::infinity();
        for (index, mode) in self.marginal_modes.iter().enumerate() {
            let dx = sample[0] - mode[0];
            let dy = sample[1] - mode[1];
            let d = dx * dx + dy * dy;
            if d < best_dist {
                best_dist = d;
                best = Some(index);
            }
        }
        if best_dist.sqrt() <= self.capture_radius {
            best
        } else {
            None
        }
    }
}

fn lexicographic_permutations(items: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    let mut used = vec![false; items.len()];
    permute_rec(items, &mut current, &mut used, &mut out);
    out
}

fn permute_rec(
    items: &[usize],
    current: &mut Vec<usize>,
    used: &mut [bool],
    out: &mut Vec<Vec<usize>>,
) {
    if current.len() == items.len() {
        out.push(current.clone());
        return;
    }
    for (i, &item) in items.iter().enumerate() {
        if !used[i] {
            used[i] = true;
            current.push(item);
            permute_rec(items, current, used, out);
            current.pop();
            used[i] = false;
        }
    }
}

/// Histogram over modes; counts are real so that weighted populations sum
/// weights instead of heads. Totals conserve the input mass exactly up to
/// summation rounding.
#[derive(Clone, Debug)]
pub struct ModeHistogram {
    pub counts: Vec<f64>,
    pub unassigned: f64,
}

impl ModeHistogram {
    pub fn total(&self) -> f64 {
        self.counts.iter().sum::<f64>() + self.unassigned
    }

    pub fn occupied(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0.0).count()
    }

    pub fn min_count(&self) -> f64 {
        self.counts.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_count(&self) -> f64 {
        self.counts.iter().cloned().fold(0.0, f64::max)
    }
}

/// Counts samples (or sums weights) per mode. With `marginal` set the
/// assignment uses the first two coordinates against the 12 marginal modes.
pub fn mode_counts<T: Scalar>(
    samples: &[Vec<T>],
    weights: Option<&[T]>,
    atlas: &ModeAtlas<T>,
    marginal: bool,
) -> ModeHistogram {
    let bins = if marginal {
        atlas.marginal_mode_count()
    } else {
        atlas.full_mode_count()
    };
    let mut counts = vec![0.0f64; bins];
    let mut unassigned = 0.0f64;
    for (i, sample) in samples.iter().enumerate() {
        let weight = weights.map_or(1.0, |w| w[i].to_f64_lossy());
        let assignment = if marginal {
            atlas.assign_marginal_mode(sample)
        } else {
            atlas.assign_mode(sample)
        };
        match assignment {
            Some(idx) => counts[idx] += weight,
            None => unassigned += weight,
        }
    }
    ModeHistogram { counts, unassigned }
}

/// Smallest prefix length of the assignment sequence that covers all
/// `mode_count` modes, or None if the sequence never does.
pub fn traversal_time<I>(assignments: I, mode_count: usize) -> Option<usize>
where
    I: IntoIterator<Item = Option<usize>>,
{
    let mut seen = vec![false; mode_count];
    let mut covered = 0usize;
    for (i, assignment) in assignments.into_iter().enumerate() {
        if let Some(idx) = assignment {
            if !seen[idx] {
                seen[idx] = true;
                covered += 1;
                if covered == mode_count {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

/// Expected draws to collect all `k` coupons under uniform sampling:
/// `k * H_k`.
pub fn coupon_expectation(k: usize) -> f64 {
    let harmonic: f64 = (1..=k).map(|i| 1.0 / i as f64).sum();
    k as f64 * harmonic
}

/// Mean, unbiased variance and standard error of repeated estimator runs.
#[derive(Clone, Copy, Debug)]
pub struct EstimatorReport {
    pub runs: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

pub fn estimator_report(values: &[f64]) -> Result<EstimatorReport> {
    if values.len() < 2 {
        return Err(Error::InvalidConfig(
            "estimator report needs at least two runs".into(),
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(EstimatorReport {
        runs: values.len(),
        mean,
        variance,
        std_error: (variance / n).sqrt(),
    })
}

/// A weighted 2-D Gaussian kernel density on a square grid, for rendering
/// marginal posteriors externally. Returns (x, y, density) triples in
/// row-major grid order. The bandwidth defaults to Scott's rule on the
/// weighted standard deviations.
pub fn kde_grid_2d(
    points: &[(f64, f64)],
    weights: Option<&[f64]>,
    range: (f64, f64),
    grid: usize,
    bandwidth: Option<f64>,
) -> Vec<(f64, f64, f64)> {
    assert!(grid >= 2, "grid needs at least two points per axis");
    let total: f64 = match weights {
        Some(w) => w.iter().sum(),
        None => points.len() as f64,
    };
    let weight_at = |i: usize| weights.map_or(1.0, |w| w[i]);
    let h = bandwidth.unwrap_or_else(|| {
        let mut mean = (0.0, 0.0);
        for (i, p) in points.iter().enumerate() {
            mean.0 += weight_at(i) * p.0 / total;
            mean.1 += weight_at(i) * p.1 / total;
        }
        let mut var = (0.0, 0.0);
        for (i, p) in points.iter().enumerate() {
            var.0 += weight_at(i) * (p.0 - mean.0) * (p.0 - mean.0) / total;
            var.1 += weight_at(i) * (p.1 - mean.1) * (p.1 - mean.1) / total;
        }
        let sd = ((var.0 + var.1) * 0.5).sqrt().max(1e-6);
        sd * (points.len() as f64).powf(-1.0 / 6.0)
    });
    let (lo, hi) = range;
    let step = (hi - lo) / (grid - 1) as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * h * h * total);
    let mut out = Vec::with_capacity(grid * grid);
    for gy in 0..grid {
        let y = lo + gy as f64 * step;
        for gx in 0..grid {
            let x = lo + gx as f64 * step;
            let mut density = 0.0;
            for (i, p) in points.iter().enumerate() {
                let dx = (x - p.0) / h;
                let dy = (y - p.1) / h;
                let e = 0.5 * (dx * dx + dy * dy);
                if e < 40.0 {
                    density += weight_at(i) * (-e).exp();
                }
            }
            out.push((x, y, density * norm));
        }
    }
    out
}
