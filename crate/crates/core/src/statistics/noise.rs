//! Stationary Gaussian colored noise as a moving average of white noise.
//!
//! Taps come from a zero-phase spectral factorization of the target
//! autocovariance, so the filter is symmetric: `F_n = Σ_{|i|≤M} a_{|i|} ξ_{n−i}`.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::statistics::correlation::CorrelationEstimate;
use crate::table;

/// Fraction of the spectral mass that clipping may remove before the target
/// is rejected.
pub const MAX_CLIPPED_FRACTION: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct ColoredNoiseModel {
    pub dt: f64,
    /// Half taps `a_0..=a_M` of the symmetric filter.
    pub taps: Vec<f64>,
    pub target: CorrelationEstimate,
}

impl ColoredNoiseModel {
    /// White noise of variance `variance` on step `dt`.
    pub fn white(dt: f64, variance: f64) -> Self {
        ColoredNoiseModel {
            dt,
            taps: vec![variance.sqrt()],
            target: CorrelationEstimate::exact(dt, vec![variance]),
        }
    }

    pub fn order(&self) -> usize {
        self.taps.len() - 1
    }

    /// Autocovariance at lag `m·dt` implied by the taps.
    pub fn autocovariance(&self, m: usize) -> f64 {
        let big_m = self.order() as isize;
        let m = m as isize;
        let mut acc = 0.0;
        for i in -big_m..=big_m {
            let j = i + m;
            if j.abs() <= big_m {
                acc += self.taps[i.unsigned_abs()] * self.taps[j.unsigned_abs()];
            }
        }
        acc
    }

    pub fn variance(&self) -> f64 {
        self.autocovariance(0)
    }

    pub fn is_zero(&self) -> bool {
        self.taps.iter().all(|&a| a == 0.0)
    }

    /// Writes `n` consecutive stationary noise values into `out`.
    pub fn synthesize_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let m = self.order();
        let n = out.len();
        let xi: Vec<f64> = (0..n + 2 * m).map(|_| rng.sample(StandardNormal)).collect();
        for (k, o) in out.iter_mut().enumerate() {
            // centre of the window for output k is xi[k + m]
            let c = k + m;
            let mut acc = self.taps[0] * xi[c];
            for i in 1..=m {
                acc += self.taps[i] * (xi[c - i] + xi[c + i]);
            }
            *o = acc;
        }
    }

    pub fn synthesize<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.synthesize_into(rng, &mut out);
        out
    }

    pub fn write_taps<W: std::io::Write>(&self, w: W) -> Result<()> {
        let lags: Vec<f64> = (0..self.taps.len()).map(|i| i as f64 * self.dt).collect();
        table::write_columns(w, &["lag", "tap"], &[&lags, &self.taps])
    }

    pub fn write_taps_to(&self, path: &Path) -> Result<()> {
        self.write_taps(std::fs::File::create(path)?)
    }

    /// Reads taps written by [`Self::write_taps`]; `target` is attached as is.
    pub fn read_taps<R: std::io::Read>(r: R, dt: f64, target: CorrelationEstimate) -> Result<Self> {
        let (headers, mut cols) = table::read_columns(r)?;
        if headers != ["lag", "tap"] {
            return Err(Error::Parse(format!("unexpected tap columns {headers:?}")));
        }
        let taps = cols.pop().unwrap_or_default();
        if taps.is_empty() {
            return Err(Error::Parse("empty tap list".into()));
        }
        Ok(ColoredNoiseModel { dt, taps, target })
    }

    pub fn read_taps_from(path: &Path, dt: f64, target: CorrelationEstimate) -> Result<Self> {
        Self::read_taps(std::fs::File::open(path)?, dt, target)
    }
}

/// Smallest `M` with `M·dt ≥ 5·τ`, `τ = area / c(0)` being the integral time
/// of the target, capped by the target length.
pub fn default_tap_count(target: &CorrelationEstimate) -> usize {
    let cap = target.len().saturating_sub(1);
    let c0 = target.values.first().copied().unwrap_or(0.0);
    let area = target.area();
    if !(c0 > 0.0) || !(area > 0.0) {
        return cap;
    }
    let tau = area / c0;
    ((5.0 * tau / target.step).ceil() as usize).clamp(1, cap.max(1)).min(cap)
}

/// Fits symmetric moving-average taps to `target` by zero-phase spectral
/// factorization; `m = None` picks [`default_tap_count`].
pub fn fit_ma_coefficients(target: &CorrelationEstimate, m: Option<usize>) -> Result<ColoredNoiseModel> {
    let n = target.len();
    if n == 0 {
        return Err(Error::InvalidConfig("empty correlation target".into()));
    }
    let m = m.unwrap_or_else(|| default_tap_count(target)).min(n - 1);
    if target.values.iter().all(|&v| v == 0.0) {
        return Ok(ColoredNoiseModel {
            dt: target.step,
            taps: vec![0.0; m + 1],
            target: target.clone(),
        });
    }
    // even extension of length 2n with a zero at the Nyquist index
    let len = 2 * n;
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for (k, &v) in target.values.iter().enumerate() {
        buf[k].re = v;
        if k > 0 {
            buf[len - k].re = v;
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(len).process(&mut buf);
    let total: f64 = buf.iter().map(|c| c.re.abs()).sum();
    let clipped: f64 = buf.iter().map(|c| (-c.re).max(0.0)).sum();
    if total > 0.0 && clipped / total > MAX_CLIPPED_FRACTION {
        return Err(Error::InvalidCorrelation(100.0 * clipped / total));
    }
    for c in buf.iter_mut() {
        *c = Complex::new(c.re.max(0.0).sqrt(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let scale = 1.0 / len as f64;
    let taps = buf[..=m].iter().map(|c| c.re * scale).collect();
    Ok(ColoredNoiseModel {
        dt: target.step,
        taps,
        target: target.clone(),
    })
}

/// `n_steps` noise values from stream 0 of `seed`.
pub fn synthesize_colored_noise(model: &ColoredNoiseModel, n_steps: usize, seed: u64) -> Vec<f64> {
    model.synthesize(&mut stream_rng(seed, 0), n_steps)
}
