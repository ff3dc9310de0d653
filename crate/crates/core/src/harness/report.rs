use std::path::Path;

use crate::error::{Error, Result};
use crate::statistics::CorrelationEstimate;
use crate::table;

/// Relative errors are reported only where `|truth| > MASK_FACTOR · stderr`.
pub const MASK_FACTOR: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ReportColumn {
    pub name: String,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `None` where the truth is masked.
    pub rel_error: Vec<Option<f64>>,
}

impl ReportColumn {
    /// Largest unmasked relative error over lags with `t` in `[from, to]`.
    pub fn max_error(&self, lags: &[f64], from: f64, to: f64) -> Option<f64> {
        lags.iter()
            .zip(&self.rel_error)
            .filter(|(&t, _)| t >= from - 1e-12 && t <= to + 1e-12)
            .filter_map(|(_, e)| *e)
            .reduce(f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub lags: Vec<f64>,
    pub truth: Vec<f64>,
    pub truth_stderr: Vec<f64>,
    pub columns: Vec<ReportColumn>,
}

impl ComparisonReport {
    pub fn column(&self, name: &str) -> Option<&ReportColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn is_masked(&self, m: usize) -> bool {
        !(self.truth[m].abs() > MASK_FACTOR * self.truth_stderr[m])
    }

    /// Columns `lag, truth, truth_stderr`, then `<name>, <name>_stderr,
    /// <name>_relerr` per estimate; masked errors are written as NaN.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut headers = vec!["lag".to_string(), "truth".into(), "truth_stderr".into()];
        let mut cols: Vec<Vec<f64>> = vec![self.lags.clone(), self.truth.clone(), self.truth_stderr.clone()];
        for c in &self.columns {
            headers.extend([c.name.clone(), format!("{}_stderr", c.name), format!("{}_relerr", c.name)]);
            cols.push(c.values.clone());
            cols.push(c.stderr.clone());
            cols.push(c.rel_error.iter().map(|e| e.unwrap_or(f64::NAN)).collect());
        }
        let h: Vec<&str> = headers.iter().map(String::as_str).collect();
        let c: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        table::write_columns(w, &h, &c)
    }

    pub fn write_csv_to(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Lines up named estimates against the truth on a common lag grid.
pub fn compare(truth: &CorrelationEstimate, estimates: &[(&str, &CorrelationEstimate)]) -> Result<ComparisonReport> {
    let mut columns = Vec::with_capacity(estimates.len());
    for (name, est) in estimates {
        if !truth.same_grid(est) {
            return Err(Error::GridIncompatible(format!(
                "`{name}` has {} lags of {}, truth has {} of {}",
                est.len(),
                est.step,
                truth.len(),
                truth.step
            )));
        }
        let rel_error = truth
            .values
            .iter()
            .zip(&truth.stderr)
            .zip(&est.values)
            .map(|((&t, &se), &e)| (t.abs() > MASK_FACTOR * se).then(|| (e - t).abs() / t.abs()))
            .collect();
        columns.push(ReportColumn {
            name: name.to_string(),
            values: est.values.clone(),
            stderr: est.stderr.clone(),
            rel_error,
        });
    }
    Ok(ComparisonReport {
        lags: (0..truth.len()).map(|m| truth.lag(m)).collect(),
        truth: truth.values.clone(),
        truth_stderr: truth.stderr.clone(),
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth() -> CorrelationEstimate {
        let mut t = CorrelationEstimate::exact(0.5, vec![0.01, 0.008, 0.005, 1e-5]);
        t.stderr = vec![1e-4; 4];
        t
    }

    #[test]
    fn identical_estimate_has_zero_error() {
        let t = truth();
        let r = compare(&t, &[("mz", &t)]).unwrap();
        let c = r.column("mz").unwrap();
        assert_eq!(&c.rel_error[..3], &[Some(0.0); 3]);
    }

    #[test]
    fn scaled_estimate_is_ten_percent_off() {
        let t = truth();
        let e = t.scaled(1.1);
        let r = compare(&t, &[("amrs", &e)]).unwrap();
        for m in 0..3 {
            assert!((r.columns[0].rel_error[m].unwrap() - 0.1).abs() < 1e-12);
        }
        assert!((r.columns[0].max_error(&r.lags, 0.0, 1.0).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn small_truth_is_masked() {
        let t = truth();
        let r = compare(&t, &[("mz", &t.scaled(2.0))]).unwrap();
        assert!(r.is_masked(3));
        assert_eq!(r.columns[0].rel_error[3], None);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lag,truth,truth_stderr,mz,mz_stderr,mz_relerr\n"));
        assert!(text.lines().last().unwrap().ends_with("NaN"));
    }

    #[test]
    fn grid_mismatch_rejected() {
        let t = truth();
        let other = CorrelationEstimate::exact(0.25, vec![0.0; 4]);
        assert!(matches!(compare(&t, &[("x", &other)]), Err(Error::GridIncompatible(_))));
    }
}
