//! Ensemble moments and autocorrelations over independently seeded samples.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamRng};
use crate::table;

/// Uniform lag grid `0, step, …, (n_lags − 1)·step`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LagGrid {
    pub step: f64,
    pub n_lags: usize,
}

impl LagGrid {
    pub fn new(step: f64, n_lags: usize) -> Result<Self> {
        if !(step > 0.0) || n_lags == 0 {
            return Err(Error::InvalidConfig(format!("bad lag grid: step {step}, {n_lags} lags")));
        }
        Ok(LagGrid { step, n_lags })
    }

    /// Grid from 0 to `t_end` inclusive.
    pub fn covering(step: f64, t_end: f64) -> Result<Self> {
        LagGrid::new(step, (t_end / step).round() as usize + 1)
    }

    pub fn t_end(&self) -> f64 {
        self.step * (self.n_lags - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_lags).map(|m| m as f64 * self.step).collect()
    }
}

/// Running sums of a fixed-width vector of per-sample values.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentAccumulator {
    pub count: usize,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(width: usize) -> Self {
        MomentAccumulator {
            count: 0,
            sum: vec![0.0; width],
            sum_sq: vec![0.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.sum.len()
    }

    pub fn add(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.sum.len());
        self.count += 1;
        for ((s, q), &v) in self.sum.iter_mut().zip(self.sum_sq.iter_mut()).zip(values) {
            *s += v;
            *q += v * v;
        }
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        self.count += other.count;
        for (s, o) in self.sum.iter_mut().zip(&other.sum) {
            *s += o;
        }
        for (s, o) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *s += o;
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.sum.iter().map(|s| s / n).collect()
    }

    /// Standard error of the mean, `sd / sqrt(n)`.
    pub fn stderr(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(&s, &q)| {
                let m = s / n;
                let var = ((q - n * m * m) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            })
            .collect()
    }

    /// Mean and standard error of the entries `range`.
    pub fn estimate(&self, range: std::ops::Range<usize>, step: f64) -> CorrelationEstimate {
        let mean = self.mean();
        let se = self.stderr();
        CorrelationEstimate {
            step,
            values: mean[range.clone()].to_vec(),
            stderr: se[range].to_vec(),
            n_samples: self.count,
        }
    }
}

/// Samples per parallel work unit. Fixed so that the summation order, and
/// hence every bit of the result, does not depend on the thread count.
pub const BATCH_SIZE: usize = 32;

/// Result of an ensemble loop.
#[derive(Clone, Debug)]
pub struct EnsembleOutcome {
    pub moments: MomentAccumulator,
    /// Samples dropped because their trajectory blew up.
    pub n_failed: usize,
}

/// Runs `sample(rng, out)` for `n_samples` sample indices in parallel, each
/// with its own stream under `seed`, and accumulates the `width` values it
/// writes. Samples that report [`Error::BlowUp`] are dropped and counted.
pub fn ensemble_moments<F>(n_samples: usize, seed: u64, width: usize, sample: F) -> Result<EnsembleOutcome>
where
    F: Fn(&mut StreamRng, &mut [f64]) -> Result<()> + Sync,
{
    ensemble_moments_indexed(n_samples, seed, width, |_, rng, out| sample(rng, out))
}

/// As [`ensemble_moments`], also passing the sample index.
pub fn ensemble_moments_indexed<F>(n_samples: usize, seed: u64, width: usize, sample: F) -> Result<EnsembleOutcome>
where
    F: Fn(usize, &mut StreamRng, &mut [f64]) -> Result<()> + Sync,
{
    let n_batches = n_samples.div_ceil(BATCH_SIZE);
    let batches: Vec<Result<(MomentAccumulator, usize)>> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut acc = MomentAccumulator::new(width);
            let mut failed = 0;
            let mut buf = vec![0.0; width];
            let end = ((b + 1) * BATCH_SIZE).min(n_samples);
            for i in b * BATCH_SIZE..end {
                let mut rng = stream_rng(seed, i as u64);
                match sample(i, &mut rng, &mut buf) {
                    Ok(()) => acc.add(&buf),
                    Err(Error::BlowUp { .. }) => failed += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok((acc, failed))
        })
        .collect();
    let mut moments = MomentAccumulator::new(width);
    let mut n_failed = 0;
    for batch in batches {
        let (acc, failed) = batch?;
        moments.merge(&acc);
        n_failed += failed;
    }
    Ok(EnsembleOutcome { moments, n_failed })
}

/// Sampled autocorrelation `E[v(t) v(0)]` on a uniform lag grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationEstimate {
    pub step: f64,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_samples: usize,
}

impl CorrelationEstimate {
    /// Exact values with zero error, e.g. an analytic target.
    pub fn exact(step: f64, values: Vec<f64>) -> Self {
        let stderr = vec![0.0; values.len()];
        CorrelationEstimate {
            step,
            values,
            stderr,
            n_samples: 0,
        }
    }

    pub fn from_fn(grid: LagGrid, f: impl Fn(f64) -> f64) -> Self {
        CorrelationEstimate::exact(grid.step, grid.times().into_iter().map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grid(&self) -> LagGrid {
        LagGrid {
            step: self.step,
            n_lags: self.values.len(),
        }
    }

    pub fn lag(&self, m: usize) -> f64 {
        m as f64 * self.step
    }

    pub fn same_grid(&self, other: &CorrelationEstimate) -> bool {
        self.values.len() == other.values.len() && (self.step - other.step).abs() <= 1e-12 * self.step
    }

    /// Pointwise mean of two estimates on the same grid; errors add in
    /// quadrature as if independent, which overstates them when correlated.
    pub fn average(&self, other: &CorrelationEstimate) -> Result<CorrelationEstimate> {
        if !self.same_grid(other) {
            return Err(Error::GridIncompatible("cannot average correlations on different grids".into()));
        }
        Ok(CorrelationEstimate {
            step: self.step,
            values: self.values.iter().zip(&other.values).map(|(a, b)| 0.5 * (a + b)).collect(),
            stderr: self
                .stderr
                .iter()
                .zip(&other.stderr)
                .map(|(a, b)| 0.5 * (a * a + b * b).sqrt())
                .collect(),
            n_samples: self.n_samples.min(other.n_samples),
        })
    }

    /// Copy multiplied by [`taper_weights`].
    pub fn tapered(&self, fraction: f64) -> CorrelationEstimate {
        let w = taper_weights(self.len(), fraction);
        CorrelationEstimate {
            step: self.step,
            values: self.values.iter().zip(&w).map(|(v, w)| v * w).collect(),
            stderr: self.stderr.iter().zip(&w).map(|(v, w)| v * w).collect(),
            n_samples: self.n_samples,
        }
    }

    pub fn scaled(&self, c: f64) -> CorrelationEstimate {
        CorrelationEstimate {
            step: self.step,
            values: self.values.iter().map(|v| v * c).collect(),
            stderr: self.stderr.iter().map(|v| v * c.abs()).collect(),
            n_samples: self.n_samples,
        }
    }

    /// Prefix of the first `n_lags` lags.
    pub fn truncated(&self, n_lags: usize) -> CorrelationEstimate {
        let n = n_lags.min(self.values.len());
        CorrelationEstimate {
            step: self.step,
            values: self.values[..n].to_vec(),
            stderr: self.stderr[..n].to_vec(),
            n_samples: self.n_samples,
        }
    }

    /// Every `every`-th lag.
    pub fn subsampled(&self, every: usize) -> CorrelationEstimate {
        CorrelationEstimate {
            step: self.step * every as f64,
            values: self.values.iter().step_by(every).copied().collect(),
            stderr: self.stderr.iter().step_by(every).copied().collect(),
            n_samples: self.n_samples,
        }
    }

    /// Trapezoidal area over the whole grid.
    pub fn area(&self) -> f64 {
        trapezoid(&self.values, self.step)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let lags: Vec<f64> = (0..self.len()).map(|m| self.lag(m)).collect();
        table::write_columns(w, &["lag", "value", "stderr"], &[&lags, &self.values, &self.stderr])
    }

    pub fn write_csv_to(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: std::io::Read>(r: R, n_samples: usize) -> Result<CorrelationEstimate> {
        let (headers, mut cols) = table::read_columns(r)?;
        if headers != ["lag", "value", "stderr"] {
            return Err(Error::Parse(format!("unexpected correlation columns {headers:?}")));
        }
        let stderr = cols.pop().unwrap_or_default();
        let values = cols.pop().unwrap_or_default();
        let lags = cols.pop().unwrap_or_default();
        if lags.len() < 2 {
            return Err(Error::Parse("correlation needs at least two lags".into()));
        }
        Ok(CorrelationEstimate {
            step: lags[1] - lags[0],
            values,
            stderr,
            n_samples,
        })
    }

    pub fn read_csv_from(path: &Path, n_samples: usize) -> Result<CorrelationEstimate> {
        CorrelationEstimate::read_csv(std::fs::File::open(path)?, n_samples)
    }
}

/// Weights of a cosine taper over `n` grid points that fall from 1 to 0 over
/// the last `fraction` of the span.
pub fn taper_weights(n: usize, fraction: f64) -> Vec<f64> {
    if n < 2 || fraction <= 0.0 {
        return vec![1.0; n];
    }
    let span = (n - 1) as f64;
    let start = span * (1.0 - fraction.min(1.0));
    (0..n)
        .map(|m| {
            let s = m as f64;
            if s <= start {
                1.0
            } else {
                0.5 * (1.0 + (std::f64::consts::PI * (s - start) / (span - start)).cos())
            }
        })
        .collect()
}

pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => step * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Autocorrelations `E[v_c(t) v_c(0)]` of several components from one ensemble.
///
/// `source(rng, grid)` returns one trajectory sampled at the grid lags, one
/// state vector per lag, started from a stationary sample.
pub fn ensemble_autocorrelations<S>(
    source: S,
    components: &[usize],
    grid: LagGrid,
    n_samples: usize,
    seed: u64,
) -> Result<(Vec<CorrelationEstimate>, usize)>
where
    S: Fn(&mut StreamRng, LagGrid) -> Result<Vec<Vec<f64>>> + Sync,
{
    if n_samples < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: n_samples,
        });
    }
    let nl = grid.n_lags;
    let outcome = ensemble_moments(n_samples, seed, components.len() * nl, |rng, out| {
        let path = source(rng, grid)?;
        if path.len() != nl {
            return Err(Error::DimensionMismatch {
                expected: nl,
                got: path.len(),
            });
        }
        for (ci, &c) in components.iter().enumerate() {
            let v0 = path[0][c];
            for (m, state) in path.iter().enumerate() {
                out[ci * nl + m] = state[c] * v0;
            }
        }
        Ok(())
    })?;
    if outcome.moments.count < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: outcome.moments.count,
        });
    }
    let estimates = (0..components.len())
        .map(|ci| outcome.moments.estimate(ci * nl..(ci + 1) * nl, grid.step))
        .collect();
    Ok((estimates, outcome.n_failed))
}

/// Autocorrelation of a single component.
pub fn ensemble_autocorrelation<S>(
    source: S,
    component: usize,
    grid: LagGrid,
    n_samples: usize,
    seed: u64,
) -> Result<CorrelationEstimate>
where
    S: Fn(&mut StreamRng, LagGrid) -> Result<Vec<Vec<f64>>> + Sync,
{
    let (mut v, _) = ensemble_autocorrelations(source, &[component], grid, n_samples, seed)?;
    Ok(v.remove(0))
}

/// Relaxation rate from the area under a correlation: `1 / (2β · area)`.
pub fn estimate_gamma_dns(corr: &CorrelationEstimate, beta: f64) -> Result<f64> {
    let area = corr.area();
    if !(area > 0.0) {
        return Err(Error::NonPositiveArea(area));
    }
    Ok(1.0 / (2.0 * beta * area))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal, StandardNormal};

    /// Exact OU path sampler: stationary start, exact transition on the grid.
    fn ou_source(gamma: f64, var: f64) -> impl Fn(&mut StreamRng, LagGrid) -> Result<Vec<Vec<f64>>> + Sync {
        move |rng, grid| {
            let a = (-gamma * grid.step).exp();
            let s = (var * (1.0 - a * a)).sqrt();
            let g0: f64 = StandardNormal.sample(rng);
            let mut x = var.sqrt() * g0;
            let mut out = Vec::with_capacity(grid.n_lags);
            for m in 0..grid.n_lags {
                if m > 0 {
                    let g: f64 = StandardNormal.sample(rng);
                    x = a * x + s * g;
                }
                out.push(vec![x]);
            }
            Ok(out)
        }
    }

    #[test]
    fn ou_autocorrelation_within_three_stderr() {
        let grid = LagGrid::covering(0.1, 3.0).unwrap();
        let est = ensemble_autocorrelation(ou_source(1.0, 0.01), 0, grid, 10_000, 7).unwrap();
        for m in 0..grid.n_lags {
            let exact = 0.01 * (-est.lag(m)).exp();
            assert!((est.values[m] - exact).abs() < 3.5 * est.stderr[m], "lag {m}");
        }
    }

    #[test]
    fn constant_paths_give_flat_correlation() {
        let q: f64 = 0.04;
        let src = move |rng: &mut StreamRng, grid: LagGrid| {
            let c: f64 = Normal::new(0.0, q.sqrt()).unwrap().sample(rng);
            Ok(vec![vec![c]; grid.n_lags])
        };
        let est = ensemble_autocorrelation(src, 0, LagGrid::new(0.5, 5).unwrap(), 20_000, 1).unwrap();
        for m in 1..5 {
            assert_eq!(est.values[m], est.values[0]);
        }
        assert!((est.values[0] - q).abs() < 3.0 * est.stderr[0]);
    }

    #[test]
    fn too_few_samples() {
        let r = ensemble_autocorrelation(ou_source(1.0, 1.0), 0, LagGrid::new(0.1, 3).unwrap(), 1, 0);
        assert!(matches!(r, Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn blow_ups_are_counted_not_fatal() {
        let out = ensemble_moments(100, 3, 1, |rng, out| {
            let u: f64 = StandardNormal.sample(rng);
            if u > 1.0 {
                return Err(Error::BlowUp { step: 0 });
            }
            out[0] = u;
            Ok(())
        })
        .unwrap();
        assert_eq!(out.moments.count + out.n_failed, 100);
        assert!(out.n_failed > 0);
    }

    #[test]
    fn result_independent_of_thread_count() {
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                ensemble_autocorrelation(ou_source(2.0, 0.5), 0, LagGrid::new(0.2, 6).unwrap(), 333, 9).unwrap()
            })
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn stderr_shrinks_like_inverse_sqrt() {
        let grid = LagGrid::new(0.1, 4).unwrap();
        let a = ensemble_autocorrelation(ou_source(1.0, 1.0), 0, grid, 4_000, 11).unwrap();
        let b = ensemble_autocorrelation(ou_source(1.0, 1.0), 0, grid, 16_000, 12).unwrap();
        let ratio = a.stderr[0] / b.stderr[0];
        assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn gamma_dns_on_exact_ou() {
        let beta = 50.0;
        let grid = LagGrid::covering(0.01, 10.0).unwrap();
        let corr = CorrelationEstimate::from_fn(grid, |t| (-2.0 * t).exp() / (2.0 * beta));
        let g = estimate_gamma_dns(&corr, beta).unwrap();
        assert!((g - 2.0).abs() < 1e-3, "{g}");
        let scaled = estimate_gamma_dns(&corr.scaled(4.0), beta).unwrap();
        assert!((scaled - g / 4.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_dns_rejects_negative_area() {
        let corr = CorrelationEstimate::exact(0.1, vec![-1.0, -0.5, 0.0]);
        assert!(matches!(estimate_gamma_dns(&corr, 1.0), Err(Error::NonPositiveArea(_))));
    }

    #[test]
    fn csv_round_trip() {
        let est = CorrelationEstimate {
            step: 0.05,
            values: vec![0.01, 0.005, -0.001],
            stderr: vec![1e-4, 2e-4, 3e-4],
            n_samples: 10,
        };
        let mut buf = Vec::new();
        est.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("lag,value,stderr\n"));
        let back = CorrelationEstimate::read_csv(&buf[..], 10).unwrap();
        assert_eq!(back.values, est.values);
        assert_eq!(back.stderr, est.stderr);
        assert!((back.step - 0.05).abs() < 1e-15);
    }

    #[test]
    fn merge_matches_sequential_accumulation() {
        let mut all = MomentAccumulator::new(2);
        let mut a = MomentAccumulator::new(2);
        let mut b = MomentAccumulator::new(2);
        for i in 0..10 {
            let v = [i as f64, (i * i) as f64];
            all.add(&v);
            if i < 4 { a.add(&v) } else { b.add(&v) }
        }
        a.merge(&b);
        assert_eq!(a, all);
    }
}
