use std::path::PathBuf;

use crate::amrs::{FitProcedure, P3Options};
use crate::error::{Error, Result};
use crate::kv;
use crate::mz::default_t0;
use crate::statistics::LagGrid;
use crate::triad::{ModelCase, ModelConfig};

/// Everything needed to run the pipeline for one model.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub config: ModelConfig,
    pub procedure: FitProcedure,
    /// Scaling constant, required by P1 only.
    pub c1: Option<f64>,
    pub n_truth: usize,
    pub n_kernel: usize,
    pub n_amrs: usize,
    pub n_mz: usize,
    pub lag_step: f64,
    pub t_end: f64,
    pub truth_dt: f64,
    pub reduced_dt: f64,
    pub kernel_ds: f64,
    pub noise_horizon: f64,
    pub t0: f64,
    pub taper: bool,
    pub tap_count: Option<usize>,
    pub p3_samples: usize,
    pub p3_dt: f64,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn reference(case: ModelCase) -> Self {
        ExperimentSpec {
            config: ModelConfig::reference(case),
            procedure: FitProcedure::P2,
            c1: None,
            n_truth: 10_000,
            n_kernel: 10_000,
            n_amrs: 20_000,
            n_mz: 10_000,
            lag_step: 0.05,
            t_end: 10.0,
            truth_dt: 1e-3,
            reduced_dt: 1e-2,
            kernel_ds: 1e-2,
            noise_horizon: 10.0,
            t0: default_t0(case),
            taper: true,
            tap_count: None,
            p3_samples: P3Options::default().n_samples,
            p3_dt: P3Options::default().dt,
            out_dir: PathBuf::from(format!("runs/{case}")),
            seed: 1,
        }
    }

    pub fn lag_grid(&self) -> Result<LagGrid> {
        LagGrid::covering(self.lag_step, self.t_end)
    }

    pub fn p3_options(&self) -> Result<P3Options> {
        Ok(P3Options {
            n_samples: self.p3_samples,
            dt: self.p3_dt,
            grid: self.lag_grid()?,
            seed: crate::rng::derive_seed(self.seed, 3),
            ..P3Options::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let counts = [
            ("n_truth", self.n_truth),
            ("n_kernel", self.n_kernel),
            ("n_amrs", self.n_amrs),
            ("n_mz", self.n_mz),
        ];
        for (k, n) in counts {
            if n < 2 {
                return Err(Error::InvalidConfig(format!("{k} must be at least 2")));
            }
        }
        let steps = [
            ("lag_step", self.lag_step),
            ("t_end", self.t_end),
            ("truth_dt", self.truth_dt),
            ("reduced_dt", self.reduced_dt),
            ("kernel_ds", self.kernel_ds),
            ("t0", self.t0),
            ("p3_dt", self.p3_dt),
        ];
        for (k, v) in steps {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{k} must be positive")));
            }
        }
        if self.noise_horizon < self.t0 {
            return Err(Error::InvalidConfig("noise_horizon must be at least t0".into()));
        }
        if self.procedure == FitProcedure::P1 && self.c1.is_none() {
            return Err(Error::InvalidConfig("procedure P1 needs c1".into()));
        }
        Ok(())
    }

    /// Parses a flat `key = value` spec. `case` selects the defaults that the
    /// remaining keys override; `lambda` sets the strength of a single-coupling case.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let pairs = kv::parse(text)?;
        let case = match pairs.iter().find(|(k, _)| k == "case") {
            Some((_, v)) => v.parse()?,
            None => ModelCase::Additive,
        };
        let mut s = ExperimentSpec::reference(case);
        let mut t0_set = false;
        for (k, v) in &pairs {
            let f = || kv::parse_f64(k, v);
            let n = || kv::parse_usize(k, v);
            match k.as_str() {
                "case" => {}
                "lambda" => match case {
                    ModelCase::Additive => s.config.lambda_a = f()?,
                    ModelCase::Multiplicative => s.config.lambda_m = f()?,
                    ModelCase::Combined => {
                        return Err(Error::InvalidConfig("combined case takes lambda_a and lambda_m".into()));
                    }
                },
                "lambda_a" => s.config.lambda_a = f()?,
                "lambda_m" => s.config.lambda_m = f()?,
                "capital_lambda" => s.config.capital_lambda = n()?,
                "beta" => s.config.beta = f()?,
                "n_active" => s.config.n_active = n()?,
                "coupling_seed" => s.config.seed = kv::parse_u64(k, v)?,
                "procedure" => s.procedure = v.parse()?,
                "c1" => s.c1 = Some(f()?),
                "n_truth" => s.n_truth = n()?,
                "n_kernel" => s.n_kernel = n()?,
                "n_amrs" => s.n_amrs = n()?,
                "n_mz" => s.n_mz = n()?,
                "lag_step" => s.lag_step = f()?,
                "t_end" => s.t_end = f()?,
                "truth_dt" => s.truth_dt = f()?,
                "reduced_dt" => s.reduced_dt = f()?,
                "kernel_ds" => s.kernel_ds = f()?,
                "noise_horizon" => s.noise_horizon = f()?,
                "t0" => {
                    s.t0 = f()?;
                    t0_set = true;
                }
                "taper" => {
                    s.taper = v
                        .parse()
                        .map_err(|_| Error::Parse(format!("`taper`: expected true or false, got `{v}`")))?
                }
                "tap_count" => s.tap_count = Some(n()?),
                "p3_samples" => s.p3_samples = n()?,
                "p3_dt" => s.p3_dt = f()?,
                "out" => s.out_dir = PathBuf::from(v),
                "seed" => s.seed = kv::parse_u64(k, v)?,
                other => return Err(Error::Parse(format!("unknown spec key `{other}`"))),
            }
        }
        if !t0_set {
            s.t0 = default_t0(case);
        }
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_kv_string(&self) -> String {
        let c = &self.config;
        let f = kv::fmt_f64;
        let mut lines = vec![
            format!("case = {}", c.case),
            format!("lambda_a = {}", f(c.lambda_a)),
            format!("lambda_m = {}", f(c.lambda_m)),
            format!("capital_lambda = {}", c.capital_lambda),
            format!("beta = {}", f(c.beta)),
            format!("n_active = {}", c.n_active),
            format!("coupling_seed = {}", c.seed),
            format!("procedure = {}", self.procedure),
        ];
        if let Some(c1) = self.c1 {
            lines.push(format!("c1 = {}", f(c1)));
        }
        lines.extend([
            format!("n_truth = {}", self.n_truth),
            format!("n_kernel = {}", self.n_kernel),
            format!("n_amrs = {}", self.n_amrs),
            format!("n_mz = {}", self.n_mz),
            format!("lag_step = {}", f(self.lag_step)),
            format!("t_end = {}", f(self.t_end)),
            format!("truth_dt = {}", f(self.truth_dt)),
            format!("reduced_dt = {}", f(self.reduced_dt)),
            format!("kernel_ds = {}", f(self.kernel_ds)),
            format!("noise_horizon = {}", f(self.noise_horizon)),
            format!("t0 = {}", f(self.t0)),
            format!("taper = {}", self.taper),
        ]);
        if let Some(m) = self.tap_count {
            lines.push(format!("tap_count = {m}"));
        }
        lines.extend([
            format!("p3_samples = {}", self.p3_samples),
            format!("p3_dt = {}", f(self.p3_dt)),
            format!("out = {}", self.out_dir.display()),
            format!("seed = {}", self.seed),
        ]);
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_specs_are_valid() {
        for case in [ModelCase::Additive, ModelCase::Multiplicative, ModelCase::Combined] {
            let s = ExperimentSpec::reference(case);
            s.validate().unwrap();
            assert_eq!(ExperimentSpec::from_kv_str(&s.to_kv_string()).unwrap(), s);
        }
        assert_eq!(ExperimentSpec::reference(ModelCase::Multiplicative).t0, 2.0);
    }

    #[test]
    fn keys_override_case_defaults() {
        let s = ExperimentSpec::from_kv_str("case = multiplicative\nlambda = 2.5\nn_truth = 100\nseed = 9\n").unwrap();
        assert_eq!(s.config.lambda_m, 2.5);
        assert_eq!(s.n_truth, 100);
        assert_eq!(s.seed, 9);
        assert_eq!(s.t0, 2.0);
    }

    #[test]
    fn bad_specs_rejected() {
        assert!(ExperimentSpec::from_kv_str("colour = red\n").is_err());
        assert!(ExperimentSpec::from_kv_str("n_truth = 1\n").is_err());
        assert!(ExperimentSpec::from_kv_str("procedure = P1\n").is_err());
        assert!(ExperimentSpec::from_kv_str("case = combined\nlambda = 2\n").is_err());
        assert!(ExperimentSpec::from_kv_str("t0 = 2\nnoise_horizon = 1\n").is_err());
    }
}
