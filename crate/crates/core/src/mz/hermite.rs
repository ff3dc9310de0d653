//! Modified Hermite polynomials, orthonormal under the Gaussian
//! N(0, 1/(2β)), and products of them over the resolved variables.

use std::fmt;

use crate::error::{Error, Result};
use crate::triad::ModelCase;

/// Normalised Hermite polynomial `H_n(u)` (weight `e^{-u²/2}`) by the
/// three-term recursion.
fn normalized_hermite(degree: u32, u: f64) -> (f64, f64) {
    // returns (H_degree, H_{degree-1}) with H_{-1} = 0
    let mut prev = 0.0;
    let mut cur = 1.0;
    for n in 1..=degree {
        let nf = n as f64;
        let next = (u * cur - (nf - 1.0).sqrt() * prev) / nf.sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// `H̃_κ(x) = H_κ(sqrt(2β(1+2α)) x) (1+2α)^{1/4} e^{-αβx²}`.
pub fn hermite_value(degree: u32, x: f64, alpha: f64, beta: f64) -> f64 {
    let u = (2.0 * beta * (1.0 + 2.0 * alpha)).sqrt() * x;
    let (h, _) = normalized_hermite(degree, u);
    h * envelope(x, alpha, beta)
}

fn envelope(x: f64, alpha: f64, beta: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else {
        (1.0 + 2.0 * alpha).powf(0.25) * (-alpha * beta * x * x).exp()
    }
}

/// `dH̃_κ/dx = sqrt(κ) sqrt(2β(1+2α)) H̃_{κ-1}(x) − 2αβx H̃_κ(x)`.
pub fn hermite_derivative(degree: u32, x: f64, alpha: f64, beta: f64) -> f64 {
    let c = (2.0 * beta * (1.0 + 2.0 * alpha)).sqrt();
    let (h, h_prev) = normalized_hermite(degree, c * x);
    let env = envelope(x, alpha, beta);
    (degree as f64).sqrt() * c * h_prev * env - 2.0 * alpha * beta * x * h * env
}

/// Degrees per resolved variable, e.g. `(1, 2)` for `H̃_1(x_1) H̃_2(x_2)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Compact label such as `1_2`.
    pub fn label(&self) -> String {
        self.0.iter().map(u32::to_string).collect::<Vec<_>>().join("_")
    }

    pub fn parse_label(s: &str) -> Result<Self> {
        s.split('_')
            .map(|d| d.parse::<u32>().map_err(|_| Error::Parse(format!("bad multi-index `{s}`"))))
            .collect::<Result<Vec<_>>>()
            .map(MultiIndex)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.0.iter().map(u32::to_string).collect::<Vec<_>>().join(","))
    }
}

/// A memory term: basis function `kappa` in the equation for `equation`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisTerm {
    pub equation: usize,
    pub kappa: usize,
}

/// Product Hermite basis over the resolved variables together with the
/// memory terms kept in each resolved equation.
#[derive(Clone, Debug, PartialEq)]
pub struct HermiteBasis {
    pub beta: f64,
    /// Scaling factor α by polynomial degree; missing degrees use 0.
    pub alpha: Vec<f64>,
    pub kappas: Vec<MultiIndex>,
    pub terms: Vec<BasisTerm>,
}

impl HermiteBasis {
    pub fn new(beta: f64, kappas: Vec<MultiIndex>, terms: Vec<BasisTerm>) -> Result<Self> {
        let dim = kappas.first().map_or(0, |k| k.0.len());
        if dim == 0 || kappas.iter().any(|k| k.0.len() != dim) {
            return Err(Error::InvalidConfig("multi-indices must share a non-zero length".into()));
        }
        if terms.iter().any(|t| t.kappa >= kappas.len() || t.equation >= dim) {
            return Err(Error::InvalidConfig("basis term out of range".into()));
        }
        Ok(HermiteBasis {
            beta,
            alpha: Vec::new(),
            kappas,
            terms,
        })
    }

    /// Memory terms for each case: `H̃_1(x_1)` in the additive case, and for
    /// two resolved variables `H̃_1(x_j)` plus `H̃_2(x_other) H̃_1(x_j)` in
    /// the equation for `x_j`.
    pub fn for_case(case: ModelCase, beta: f64) -> Self {
        let (kappas, terms) = match case {
            ModelCase::Additive => (vec![MultiIndex(vec![1])], vec![BasisTerm { equation: 0, kappa: 0 }]),
            ModelCase::Multiplicative | ModelCase::Combined => (
                vec![
                    MultiIndex(vec![1, 0]),
                    MultiIndex(vec![1, 2]),
                    MultiIndex(vec![0, 1]),
                    MultiIndex(vec![2, 1]),
                ],
                vec![
                    BasisTerm { equation: 0, kappa: 0 },
                    BasisTerm { equation: 0, kappa: 1 },
                    BasisTerm { equation: 1, kappa: 2 },
                    BasisTerm { equation: 1, kappa: 3 },
                ],
            ),
        };
        HermiteBasis::new(beta, kappas, terms).expect("static basis is valid")
    }

    pub fn dim(&self) -> usize {
        self.kappas[0].0.len()
    }

    pub fn alpha_for(&self, degree: u32) -> f64 {
        self.alpha.get(degree as usize).copied().unwrap_or(0.0)
    }

    /// `h^κ(x̂)` for every basis function.
    pub fn eval_into(&self, resolved: &[f64], out: &mut [f64]) {
        for (o, kappa) in out.iter_mut().zip(&self.kappas) {
            *o = self.eval_one(kappa, resolved);
        }
    }

    pub fn eval_one(&self, kappa: &MultiIndex, resolved: &[f64]) -> f64 {
        kappa
            .0
            .iter()
            .zip(resolved)
            .map(|(&d, &x)| hermite_value(d, x, self.alpha_for(d), self.beta))
            .product()
    }

    /// Gradient of `h^κ` with respect to the resolved variables.
    pub fn gradient(&self, kappa: &MultiIndex, resolved: &[f64], out: &mut [f64]) {
        let dim = kappa.0.len();
        let values: Vec<f64> = (0..dim)
            .map(|i| {
                let d = kappa.0[i];
                hermite_value(d, resolved[i], self.alpha_for(d), self.beta)
            })
            .collect();
        for i in 0..dim {
            let d = kappa.0[i];
            let mut g = hermite_derivative(d, resolved[i], self.alpha_for(d), self.beta);
            for (l, v) in values.iter().enumerate() {
                if l != i {
                    g *= v;
                }
            }
            out[i] = g;
        }
    }

    /// `(L h^κ)(x) = Σ_i R_i(x) ∂h^κ/∂x_i`, given the resolved right-hand side.
    pub fn generator_into(&self, resolved: &[f64], resolved_rhs: &[f64], out: &mut [f64]) {
        let mut grad = vec![0.0; self.dim()];
        for (o, kappa) in out.iter_mut().zip(&self.kappas) {
            self.gradient(kappa, resolved, &mut grad);
            *o = grad.iter().zip(resolved_rhs).map(|(g, r)| g * r).sum();
        }
    }

    pub fn to_manifest(&self) -> String {
        let mut s = format!("beta = {}\n", crate::kv::fmt_f64(self.beta));
        for (d, a) in self.alpha.iter().enumerate() {
            s.push_str(&format!("alpha[{d}] = {}\n", crate::kv::fmt_f64(*a)));
        }
        for (i, k) in self.kappas.iter().enumerate() {
            s.push_str(&format!("kappa[{i}] = {}\n", k.label()));
        }
        for (i, t) in self.terms.iter().enumerate() {
            s.push_str(&format!("term[{i}] = {} {}\n", t.equation, t.kappa));
        }
        s
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let mut beta = None;
        let mut alpha = Vec::new();
        let mut kappas = Vec::new();
        let mut terms = Vec::new();
        for (key, value) in crate::kv::parse(text)? {
            if key == "beta" {
                beta = Some(crate::kv::parse_f64(&key, &value)?);
            } else if key.starts_with("alpha[") {
                alpha.push(crate::kv::parse_f64(&key, &value)?);
            } else if key.starts_with("kappa[") {
                kappas.push(MultiIndex::parse_label(&value)?);
            } else if key.starts_with("term[") {
                let mut it = value.split_whitespace();
                let mut next = || -> Result<usize> {
                    let v = it.next().ok_or_else(|| Error::Parse(format!("`{key}` needs two indices")))?;
                    crate::kv::parse_usize(&key, v)
                };
                let equation = next()?;
                let kappa = next()?;
                terms.push(BasisTerm { equation, kappa });
            } else {
                return Err(Error::Parse(format!("unknown basis key `{key}`")));
            }
        }
        let beta = beta.ok_or_else(|| Error::Parse("basis manifest lacks beta".into()))?;
        let mut basis = HermiteBasis::new(beta, kappas, terms)?;
        basis.alpha = alpha;
        Ok(basis)
    }
}
