//! Full deterministic test systems: one or two slow variables coupled through
//! triad interactions to a Fourier-Galerkin truncation of the inviscid
//! Burgers-Hopf equation.
//!
//! State layout is flat: the resolved variables first (`x1` or `x1, x2`),
//! followed by the bath as interleaved pairs `(y_k, z_k)` for `k = 1..=Λ`,
//! with `u_k = y_k + i z_k`. The mean mode `u_0` is identically zero and
//! negative modes follow from `u_{-k} = conj(u_k)`.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::kv;
use crate::numerics::Rk4;
use crate::rng::{stream_rng, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelCase {
    Additive,
    Multiplicative,
    Combined,
}

impl ModelCase {
    pub const ALL: [ModelCase; 3] = [
        ModelCase::Additive,
        ModelCase::Multiplicative,
        ModelCase::Combined,
    ];

    pub fn n_resolved(self) -> usize {
        match self {
            ModelCase::Additive => 1,
            ModelCase::Multiplicative | ModelCase::Combined => 2,
        }
    }

    /// Zero-sum coefficient triples present in this case.
    pub fn triples(self) -> &'static [Triple] {
        match self {
            ModelCase::Additive => &[Triple::AddX1],
            ModelCase::Multiplicative => &[Triple::MulY, Triple::MulZ],
            ModelCase::Combined => &[Triple::AddX1, Triple::AddX2, Triple::MulY, Triple::MulZ],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelCase::Additive => "additive",
            ModelCase::Multiplicative => "multiplicative",
            ModelCase::Combined => "combined",
        }
    }
}

impl fmt::Display for ModelCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "additive" => Ok(ModelCase::Additive),
            "multiplicative" => Ok(ModelCase::Multiplicative),
            "combined" => Ok(ModelCase::Combined),
            other => Err(Error::Parse(format!("unknown model case `{other}`"))),
        }
    }
}

/// One interaction coefficient family. The name reads `target|sources`, so
/// `1|yz` multiplies `y_k z_k` in the equation for `x1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    X1Yz,
    YX1z,
    ZX1y,
    X2Yz,
    YX2z,
    ZX2y,
    X1X2y,
    X2X1y,
    YX12,
    X1X2z,
    X2X1z,
    ZX12,
}

impl Family {
    pub const ALL: [Family; 12] = [
        Family::X1Yz,
        Family::YX1z,
        Family::ZX1y,
        Family::X2Yz,
        Family::YX2z,
        Family::ZX2y,
        Family::X1X2y,
        Family::X2X1y,
        Family::YX12,
        Family::X1X2z,
        Family::X2X1z,
        Family::ZX12,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::X1Yz => "1|yz",
            Family::YX1z => "y|1z",
            Family::ZX1y => "z|1y",
            Family::X2Yz => "2|yz",
            Family::YX2z => "y|2z",
            Family::ZX2y => "z|2y",
            Family::X1X2y => "1|2y",
            Family::X2X1y => "2|1y",
            Family::YX12 => "y|12",
            Family::X1X2z => "1|2z",
            Family::X2X1z => "2|1z",
            Family::ZX12 => "z|12",
        }
    }

    pub fn from_name(name: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// A zero-sum group of three families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Triple {
    AddX1,
    AddX2,
    MulY,
    MulZ,
}

impl Triple {
    pub fn members(self) -> [Family; 3] {
        match self {
            Triple::AddX1 => [Family::X1Yz, Family::YX1z, Family::ZX1y],
            Triple::AddX2 => [Family::X2Yz, Family::YX2z, Family::ZX2y],
            Triple::MulY => [Family::X1X2y, Family::X2X1y, Family::YX12],
            Triple::MulZ => [Family::X1X2z, Family::X2X1z, Family::ZX12],
        }
    }
}

/// Coefficients attached to one bath mode; families absent from the case are 0.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ModeCoupling(pub [f64; 12]);

impl Index<Family> for ModeCoupling {
    type Output = f64;
    fn index(&self, f: Family) -> &f64 {
        &self.0[f as usize]
    }
}

impl IndexMut<Family> for ModeCoupling {
    fn index_mut(&mut self, f: Family) -> &mut f64 {
        &mut self.0[f as usize]
    }
}

/// Interaction coefficients for modes `1..=n_active`; higher modes are uncoupled.
#[derive(Clone, Debug, PartialEq)]
pub struct TriadCoupling {
    pub case: ModelCase,
    pub modes: Vec<ModeCoupling>,
}

/// Two triple members are drawn with magnitude in this range; the third must
/// also land in it.
pub const COEFFICIENT_RANGE: (f64, f64) = (0.5, 1.5);
const MAX_REDRAWS: usize = 1000;

impl TriadCoupling {
    pub fn zeros(case: ModelCase, n_active: usize) -> Self {
        TriadCoupling {
            case,
            modes: vec![ModeCoupling::default(); n_active],
        }
    }

    pub fn n_active(&self) -> usize {
        self.modes.len()
    }

    /// Coefficient for 1-based mode `k` (0 beyond `n_active`).
    pub fn get(&self, k: usize, family: Family) -> f64 {
        self.modes.get(k - 1).map_or(0.0, |m| m[family])
    }

    pub fn set(&mut self, k: usize, family: Family, value: f64) {
        self.modes[k - 1][family] = value;
    }

    /// Largest absolute triple sum over all modes and the case's triples.
    pub fn max_triple_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for mode in &self.modes {
            for triple in self.case.triples() {
                let s: f64 = triple.members().iter().map(|&f| mode[f]).sum();
                worst = worst.max(s.abs());
            }
        }
        worst
    }

    pub fn to_kv_string(&self) -> String {
        let mut s = format!("case = {}\nn_active = {}\n", self.case, self.n_active());
        for (i, mode) in self.modes.iter().enumerate() {
            for triple in self.case.triples() {
                for f in triple.members() {
                    s.push_str(&format!("b[{}].{} = {}\n", i + 1, f.name(), kv::fmt_f64(mode[f])));
                }
            }
        }
        s
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let pairs = kv::parse(text)?;
        let mut case = None;
        let mut n_active = None;
        let mut entries = Vec::new();
        for (key, value) in pairs {
            match key.as_str() {
                "case" => case = Some(value.parse::<ModelCase>()?),
                "n_active" => n_active = Some(kv::parse_usize(&key, &value)?),
                _ => {
                    let (k, family) = parse_coefficient_key(&key)?;
                    entries.push((k, family, kv::parse_f64(&key, &value)?));
                }
            }
        }
        let case = case.ok_or_else(|| Error::Parse("missing `case`".into()))?;
        let n_active = n_active
            .or_else(|| entries.iter().map(|e| e.0).max())
            .ok_or_else(|| Error::Parse("missing `n_active`".into()))?;
        let mut out = TriadCoupling::zeros(case, n_active);
        for (k, family, value) in entries {
            if k == 0 || k > n_active {
                return Err(Error::Parse(format!("mode index {k} outside 1..={n_active}")));
            }
            out.set(k, family, value);
        }
        Ok(out)
    }
}

fn parse_coefficient_key(key: &str) -> Result<(usize, Family)> {
    let bad = || Error::Parse(format!("unrecognised key `{key}`"));
    let rest = key.strip_prefix("b[").ok_or_else(bad)?;
    let (index, family) = rest.split_once("].").ok_or_else(bad)?;
    let k = index.trim().parse::<usize>().map_err(|_| bad())?;
    let family = Family::from_name(family.trim()).ok_or_else(bad)?;
    Ok((k, family))
}

/// Draws couplings satisfying every triple's zero-sum constraint.
///
/// Two members of each triple are uniform in magnitude over
/// [`COEFFICIENT_RANGE`] with random sign; the third is their negated sum and
/// the draw is repeated until it also falls in the range.
pub fn generate_couplings(case: ModelCase, n_active: usize, seed: u64) -> Result<TriadCoupling> {
    if n_active == 0 {
        return Err(Error::InvalidConfig("n_active must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let (lo, hi) = COEFFICIENT_RANGE;
    let mut out = TriadCoupling::zeros(case, n_active);
    for k in 1..=n_active {
        for triple in case.triples() {
            let [fa, fb, fc] = triple.members();
            let mut accepted = false;
            for _ in 0..MAX_REDRAWS {
                let a = signed_uniform(&mut rng, lo, hi);
                let b = signed_uniform(&mut rng, lo, hi);
                let c = -(a + b);
                if (lo..=hi).contains(&c.abs()) {
                    out.set(k, fa, a);
                    out.set(k, fb, b);
                    out.set(k, fc, c);
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return Err(Error::CouplingGeneration(MAX_REDRAWS));
            }
        }
    }
    Ok(out)
}

fn signed_uniform(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    let mag = rng.random_range(lo..=hi);
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub case: ModelCase,
    /// Additive coupling strength (λ for the additive case, λ_a for combined).
    pub lambda_a: f64,
    /// Multiplicative coupling strength (λ for the multiplicative case, λ_m for combined).
    pub lambda_m: f64,
    /// Number of complex bath modes Λ.
    pub capital_lambda: usize,
    pub beta: f64,
    pub n_active: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Parameter set used for each case in the reference experiments.
    pub fn reference(case: ModelCase) -> Self {
        let (lambda_a, lambda_m) = match case {
            ModelCase::Additive => (4.0, 0.0),
            ModelCase::Multiplicative => (0.0, 3.0),
            ModelCase::Combined => (4.0, 3.0),
        };
        ModelConfig {
            case,
            lambda_a,
            lambda_m,
            capital_lambda: 50,
            beta: 50.0,
            n_active: 5,
            seed: 2024,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_active == 0 {
            return bad("n_active must be at least 1");
        }
        if self.capital_lambda < self.n_active {
            return bad("capital_lambda must be >= n_active");
        }
        if !(self.beta > 0.0) {
            return bad("beta must be positive");
        }
        let needs_a = matches!(self.case, ModelCase::Additive | ModelCase::Combined);
        let needs_m = matches!(self.case, ModelCase::Multiplicative | ModelCase::Combined);
        if needs_a && !(self.lambda_a > 0.0) {
            return bad("lambda_a must be positive");
        }
        if needs_m && !(self.lambda_m > 0.0) {
            return bad("lambda_m must be positive");
        }
        Ok(())
    }

    pub fn n_resolved(&self) -> usize {
        self.case.n_resolved()
    }

    pub fn state_len(&self) -> usize {
        self.n_resolved() + 2 * self.capital_lambda
    }

    /// Strength multiplying the additive (`|yz`) families, 0 if absent.
    pub fn additive_strength(&self) -> f64 {
        match self.case {
            ModelCase::Multiplicative => 0.0,
            _ => self.lambda_a,
        }
    }

    /// Strength multiplying the multiplicative families, 0 if absent.
    pub fn multiplicative_strength(&self) -> f64 {
        match self.case {
            ModelCase::Additive => 0.0,
            _ => self.lambda_m,
        }
    }

    /// Coupling strength entering the scale-separation parameter.
    pub fn effective_strength(&self) -> f64 {
        self.additive_strength().max(self.multiplicative_strength())
    }

    /// Per-variable variance 1/(2β) of the invariant density.
    pub fn equilibrium_variance(&self) -> f64 {
        0.5 / self.beta
    }
}

/// Resolved variables followed by interleaved `(y_k, z_k)` bath pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct FullState {
    pub n_resolved: usize,
    pub data: Vec<f64>,
}

impl FullState {
    pub fn zeros(n_resolved: usize, capital_lambda: usize) -> Self {
        FullState {
            n_resolved,
            data: vec![0.0; n_resolved + 2 * capital_lambda],
        }
    }

    pub fn resolved(&self) -> &[f64] {
        &self.data[..self.n_resolved]
    }

    pub fn bath(&self) -> &[f64] {
        &self.data[self.n_resolved..]
    }

    pub fn capital_lambda(&self) -> usize {
        (self.data.len() - self.n_resolved) / 2
    }

    /// Index of `y_k` (1-based k) in `data`; `z_k` follows it.
    pub fn y_index(&self, k: usize) -> usize {
        self.n_resolved + 2 * (k - 1)
    }
}

/// Draws every component independently from N(0, 1/(2β)).
pub fn sample_initial_state<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> FullState {
    let normal = Normal::new(0.0, config.equilibrium_variance().sqrt()).expect("positive variance");
    let mut state = FullState::zeros(config.n_resolved(), config.capital_lambda);
    for v in state.data.iter_mut() {
        *v = normal.sample(rng);
    }
    state
}

/// Seeded convenience wrapper around [`sample_initial_state`].
pub fn sample_initial_state_seeded(config: &ModelConfig, seed: u64) -> FullState {
    sample_initial_state(config, &mut stream_rng(seed, 0))
}

/// Sum of squares of every component.
pub fn energy(state: &[f64]) -> f64 {
    state.iter().map(|v| v * v).sum()
}

/// A full system ready for repeated right-hand-side evaluations.
///
/// Shared read-only across ensemble workers.
#[derive(Clone, Debug)]
pub struct TriadSystem {
    pub config: ModelConfig,
    pub coupling: TriadCoupling,
}

impl TriadSystem {
    pub fn new(config: ModelConfig, coupling: TriadCoupling) -> Result<Self> {
        config.validate()?;
        if coupling.case != config.case {
            return Err(Error::InvalidConfig(format!(
                "coupling is for the {} case but config is {}",
                coupling.case, config.case
            )));
        }
        if coupling.n_active() > config.capital_lambda {
            return Err(Error::InvalidConfig("more coupled modes than bath modes".into()));
        }
        Ok(TriadSystem { config, coupling })
    }

    pub fn n_resolved(&self) -> usize {
        self.config.n_resolved()
    }

    pub fn state_len(&self) -> usize {
        self.config.state_len()
    }

    /// Writes the full right-hand side of `state` into `out`.
    pub fn rhs_into(&self, state: &[f64], out: &mut [f64]) {
        let nr = self.n_resolved();
        let lam = self.config.capital_lambda;
        debug_assert_eq!(state.len(), nr + 2 * lam);
        debug_assert_eq!(out.len(), state.len());
        let (res, bath) = state.split_at(nr);
        let (dres, dbath) = out.split_at_mut(nr);
        burgers_rhs(bath, dbath);
        self.add_coupling_terms(res, bath, dres, dbath);
    }

    /// Sets `dres` to the resolved right-hand side and adds the coupling
    /// terms of the coupled bath modes to `dbath`. `bath` may be truncated to
    /// the coupled modes.
    pub fn add_coupling_terms(&self, res: &[f64], bath: &[f64], dres: &mut [f64], dbath: &mut [f64]) {
        let nr = self.n_resolved();
        let la = self.config.additive_strength();
        let lm = self.config.multiplicative_strength();
        let x1 = res[0];
        let x2 = if nr > 1 { res[1] } else { 0.0 };
        let mut f1 = 0.0;
        let mut f2 = 0.0;
        for (i, c) in self.coupling.modes.iter().enumerate() {
            let y = bath[2 * i];
            let z = bath[2 * i + 1];
            let yz = y * z;
            f1 += la * c[Family::X1Yz] * yz
                + lm * x2 * (c[Family::X1X2y] * y + c[Family::X1X2z] * z);
            f2 += la * c[Family::X2Yz] * yz
                + lm * x1 * (c[Family::X2X1y] * y + c[Family::X2X1z] * z);
            dbath[2 * i] += la * (c[Family::YX1z] * x1 + c[Family::YX2z] * x2) * z
                + lm * c[Family::YX12] * x1 * x2;
            dbath[2 * i + 1] += la * (c[Family::ZX1y] * x1 + c[Family::ZX2y] * x2) * y
                + lm * c[Family::ZX12] * x1 * x2;
        }
        dres[0] = f1;
        if nr > 1 {
            dres[1] = f2;
        }
    }

    /// Integrates `state` with RK4 at step `dt`, calling `record(m, state)` at
    /// `t = m · dt · every` for `m = 0..n_records`.
    ///
    /// Stops with [`Error::BlowUp`] as soon as a recorded state is non-finite.
    pub fn integrate_recorded<F>(
        &self,
        state: &mut [f64],
        dt: f64,
        every: usize,
        n_records: usize,
        mut record: F,
    ) -> Result<()>
    where
        F: FnMut(usize, &[f64]),
    {
        let mut rk = Rk4::new(state.len());
        let rhs = |s: &[f64], d: &mut [f64]| self.rhs_into(s, d);
        for m in 0..n_records {
            if m > 0 {
                for _ in 0..every {
                    rk.step(rhs, state, dt);
                }
                if state.iter().any(|v| !v.is_finite()) {
                    return Err(Error::BlowUp { step: m * every });
                }
            }
            record(m, state);
        }
        Ok(())
    }

    /// `R_j` for the resolved variables only, i.e. `L x_j`.
    pub fn resolved_rhs(&self, state: &[f64]) -> [f64; 2] {
        let nr = self.n_resolved();
        let la = self.config.additive_strength();
        let lm = self.config.multiplicative_strength();
        let x1 = state[0];
        let x2 = if nr > 1 { state[1] } else { 0.0 };
        let bath = &state[nr..];
        let mut f1 = 0.0;
        let mut f2 = 0.0;
        for (i, c) in self.coupling.modes.iter().enumerate() {
            let y = bath[2 * i];
            let z = bath[2 * i + 1];
            f1 += la * c[Family::X1Yz] * y * z
                + lm * x2 * (c[Family::X1X2y] * y + c[Family::X1X2z] * z);
            f2 += la * c[Family::X2Yz] * y * z
                + lm * x1 * (c[Family::X2X1y] * y + c[Family::X2X1z] * z);
        }
        if nr > 1 {
            [f1, f2]
        } else {
            [f1, 0.0]
        }
    }
}

/// Checked, allocating form of [`TriadSystem::rhs_into`].
pub fn full_rhs(config: &ModelConfig, coupling: &TriadCoupling, state: &FullState) -> Result<FullState> {
    let expected = config.state_len();
    if state.data.len() != expected || state.n_resolved != config.n_resolved() {
        return Err(Error::DimensionMismatch {
            expected,
            got: state.data.len(),
        });
    }
    let system = TriadSystem::new(config.clone(), coupling.clone())?;
    let mut out = FullState::zeros(config.n_resolved(), config.capital_lambda);
    system.rhs_into(&state.data, &mut out.data);
    Ok(out)
}

/// Truncated inviscid Burgers: `du_k/dt = -(ik/2) Σ u_{k'} u_{k-k'}` over
/// `1 <= |k'|, |k-k'| <= Λ`, written into interleaved `(y, z)` derivatives.
///
/// The sum splits into `Σ_{p=1}^{k-1} u_p u_{k-p}` plus twice
/// `Σ_{m=1}^{Λ-k} u_{k+m} conj(u_m)` (the two mixed-sign ranges coincide).
pub fn burgers_rhs(bath: &[f64], out: &mut [f64]) {
    let lam = bath.len() / 2;
    // de-interleave into 1-based arrays so the sums below are plain slice dot products
    let mut buf = [0.0f64; 2 * (MAX_STACK_MODES + 1)];
    let mut heap;
    let (y, z) = if lam <= MAX_STACK_MODES {
        buf.split_at_mut(MAX_STACK_MODES + 1)
    } else {
        heap = vec![0.0; 2 * (lam + 1)];
        heap.split_at_mut(lam + 1)
    };
    for k in 1..=lam {
        y[k] = bath[2 * (k - 1)];
        z[k] = bath[2 * (k - 1) + 1];
    }
    for k in 1..=lam {
        let mut sr = 0.0;
        let mut si = 0.0;
        // positive pairs, symmetric in p <-> k-p
        let half = (k - 1) / 2;
        for p in 1..=half {
            let q = k - p;
            sr += y[p] * y[q] - z[p] * z[q];
            si += y[p] * z[q] + z[p] * y[q];
        }
        sr *= 2.0;
        si *= 2.0;
        if k % 2 == 0 {
            let h = k / 2;
            sr += y[h] * y[h] - z[h] * z[h];
            si += 2.0 * y[h] * z[h];
        }
        let n = lam - k;
        let (ya, za) = (&y[k + 1..=lam], &z[k + 1..=lam]);
        let (yb, zb) = (&y[1..=n], &z[1..=n]);
        let mut cr = 0.0;
        let mut ci = 0.0;
        for m in 0..n {
            cr += ya[m] * yb[m] + za[m] * zb[m];
            ci += za[m] * yb[m] - ya[m] * zb[m];
        }
        sr += 2.0 * cr;
        si += 2.0 * ci;
        let kf = k as f64 * 0.5;
        out[2 * (k - 1)] = kf * si;
        out[2 * (k - 1) + 1] = -kf * sr;
    }
}

const MAX_STACK_MODES: usize = 128;
