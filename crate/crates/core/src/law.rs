//! The law of the per-generation mutation probability and reproducible
//! i.i.d. streams drawn from it.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::tanh_sinh;
use crate::seed::SeedSpec;

/// Draws at or above this are treated as the excluded value 1 and redrawn.
const UPPER_REJECT: f64 = 1.0 - 1e-15;
const QUAD_TOL: f64 = 1e-13;

/// Distribution of the mutation probability, supported on `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawSpec", into = "LawSpec")]
pub enum MutationLaw {
    Constant(f64),
    /// `(value, probability)` pairs.
    Discrete(Vec<(f64, f64)>),
    Uniform { lo: f64, hi: f64 },
    Beta { alpha: f64, gamma: f64 },
}

/// Config-file shape of a law: `{ type = "...", params = { ... } }`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "lowercase")]
pub enum LawSpec {
    Constant { b: f64 },
    Discrete { atoms: Vec<(f64, f64)> },
    Uniform { lo: f64, hi: f64 },
    Beta { alpha: f64, gamma: f64 },
}

impl TryFrom<LawSpec> for MutationLaw {
    type Error = Error;

    fn try_from(spec: LawSpec) -> Result<Self> {
        match spec {
            LawSpec::Constant { b } => MutationLaw::constant(b),
            LawSpec::Discrete { atoms } => MutationLaw::discrete(atoms),
            LawSpec::Uniform { lo, hi } => MutationLaw::uniform(lo, hi),
            LawSpec::Beta { alpha, gamma } => MutationLaw::beta(alpha, gamma),
        }
    }
}

impl From<MutationLaw> for LawSpec {
    fn from(law: MutationLaw) -> Self {
        match law {
            MutationLaw::Constant(b) => LawSpec::Constant { b },
            MutationLaw::Discrete(atoms) => LawSpec::Discrete { atoms },
            MutationLaw::Uniform { lo, hi } => LawSpec::Uniform { lo, hi },
            MutationLaw::Beta { alpha, gamma } => LawSpec::Beta { alpha, gamma },
        }
    }
}

fn check_unit(b: f64, what: &str) -> Result<()> {
    if (0.0..1.0).contains(&b) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} {b} outside [0, 1)")))
    }
}

impl MutationLaw {
    pub fn constant(b: f64) -> Result<Self> {
        check_unit(b, "constant mutation probability")?;
        Ok(MutationLaw::Constant(b))
    }

    /// Probabilities must sum to one up to 1e-9; they are renormalised.
    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Domain("discrete law without atoms".into()));
        }
        for &(b, p) in &atoms {
            check_unit(b, "discrete mutation probability")?;
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::Domain(format!("discrete law weight {p} must be positive")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("discrete law weights sum to {total}, not 1")));
        }
        Ok(MutationLaw::Discrete(
            atoms.into_iter().map(|(b, p)| (b, p / total)).collect(),
        ))
    }

    /// Uniform on `[lo, hi)`; `hi = 1` is allowed since 1 has probability zero.
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::Domain(format!(
                "uniform law needs 0 <= lo < hi <= 1, got [{lo}, {hi}]"
            )));
        }
        Ok(MutationLaw::Uniform { lo, hi })
    }

    pub fn beta(alpha: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && gamma > 0.0) || !alpha.is_finite() || !gamma.is_finite() {
            return Err(Error::Domain(format!(
                "beta law needs positive shapes, got ({alpha}, {gamma})"
            )));
        }
        Ok(MutationLaw::Beta { alpha, gamma })
    }

    /// True when every draw is the same number.
    pub fn is_deterministic(&self) -> bool {
        match self {
            MutationLaw::Constant(_) => true,
            MutationLaw::Discrete(atoms) => atoms.windows(2).all(|w| w[0].0 == w[1].0),
            _ => false,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            MutationLaw::Constant(b) => b,
            MutationLaw::Discrete(ref atoms) => atoms.iter().map(|&(b, p)| b * p).sum(),
            MutationLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            MutationLaw::Beta { alpha, gamma } => alpha / (alpha + gamma),
        }
    }

    /// One draw, redrawing anything that rounds to 1.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            MutationLaw::Constant(b) => b,
            MutationLaw::Discrete(ref atoms) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(b, p) in atoms {
                    acc += p;
                    if u < acc {
                        return b;
                    }
                }
                atoms[atoms.len() - 1].0
            }
            MutationLaw::Uniform { lo, hi } => loop {
                let u: f64 = rng.random();
                let v = lo + (hi - lo) * u;
                if v < UPPER_REJECT {
                    return v;
                }
            },
            MutationLaw::Beta { alpha, gamma } => {
                let dist = Beta::new(alpha, gamma).expect("shapes validated at construction");
                loop {
                    let v = dist.sample(rng);
                    if v < UPPER_REJECT {
                        return v;
                    }
                }
            }
        }
    }

    /// `n` i.i.d. draws from the substream named by `seed`.
    pub fn sample_sequence(&self, seed: SeedSpec, n: usize) -> Vec<f64> {
        let mut rng = seed.rng();
        (0..n).map(|_| self.sample(&mut rng)).collect()
    }

    /// `E[ln(1 - beta)]`: exact for atomic laws, tanh-sinh quadrature for
    /// the continuous families.
    pub fn expected_log_one_minus(&self) -> Result<f64> {
        match *self {
            MutationLaw::Constant(b) => Ok((-b).ln_1p()),
            MutationLaw::Discrete(ref atoms) => {
                Ok(atoms.iter().map(|&(b, p)| p * (-b).ln_1p()).sum())
            }
            MutationLaw::Uniform { lo, hi } => {
                let integral = tanh_sinh(|_, _, to_hi| (1.0 - hi + to_hi).ln(), lo, hi, QUAD_TOL)?;
                Ok(integral / (hi - lo))
            }
            MutationLaw::Beta { alpha, gamma } => {
                // Unnormalised density x^(alpha-1) (1-x)^(gamma-1); the
                // normalising constant is integrated the same way.
                let kernel = |l: f64, r: f64| l.powf(alpha - 1.0) * r.powf(gamma - 1.0);
                let norm = tanh_sinh(|_, l, r| kernel(l, r), 0.0, 1.0, QUAD_TOL)?;
                let top = tanh_sinh(|_, l, r| r.ln() * kernel(l, r), 0.0, 1.0, QUAD_TOL * norm)?;
                Ok(top / norm)
            }
        }
    }
}

impl fmt::Display for MutationLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MutationLaw::Constant(b) => write!(f, "constant:{b}"),
            MutationLaw::Discrete(atoms) => {
                write!(f, "discrete:")?;
                for (i, (b, p)) in atoms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{b}@{p}")?;
                }
                Ok(())
            }
            MutationLaw::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            MutationLaw::Beta { alpha, gamma } => write!(f, "beta:{alpha},{gamma}"),
        }
    }
}

/// Parses `constant:B`, `uniform:LO,HI`, `beta:A,G` or `discrete:B@P,B@P,...`.
impl FromStr for MutationLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Usage(format!("cannot parse mutation law '{s}'"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let parts: Vec<&str> = rest.split(',').collect();
        match (kind.trim(), parts.as_slice()) {
            ("constant", [b]) => MutationLaw::constant(num(b)?),
            ("uniform", [lo, hi]) => MutationLaw::uniform(num(lo)?, num(hi)?),
            ("beta", [a, g]) => MutationLaw::beta(num(a)?, num(g)?),
            ("discrete", atoms) => {
                let pairs = atoms
                    .iter()
                    .map(|t| {
                        let (b, p) = t.split_once('@').ok_or_else(bad)?;
                        Ok((num(b)?, num(p)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                MutationLaw::discrete(pairs)
            }
            _ => Err(bad()),
        }
    }
}

/// An i.i.d. stream of mutation probabilities that grows on demand, so
/// that deeper backward passes reuse the same prefix.
#[derive(Clone, Debug)]
pub struct BetaStream {
    source: Option<(MutationLaw, ChaCha8Rng)>,
    values: Vec<f64>,
}

impl BetaStream {
    pub fn new(law: &MutationLaw, seed: SeedSpec) -> Self {
        BetaStream { source: Some((law.clone(), seed.rng())), values: Vec::new() }
    }

    /// A finite stream; asking for more than `values.len()` draws fails.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        for &b in &values {
            check_unit(b, "mutation probability")?;
        }
        Ok(BetaStream { source: None, values })
    }

    /// `beta_1, ..., beta_n`.
    pub fn prefix(&mut self, n: usize) -> Result<&[f64]> {
        if n > self.values.len() {
            let (law, rng) = self.source.as_mut().ok_or_else(|| {
                Error::Usage(format!(
                    "finite beta stream of length {} asked for {n} values",
                    self.values.len()
                ))
            })?;
            while self.values.len() < n {
                self.values.push(law.sample(rng));
            }
        }
        Ok(&self.values[..n])
    }
}
