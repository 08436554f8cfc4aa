//! Finite atomic measures on `[0, 1]`.
//!
//! Every dynamical map of the model sends atomic measures to atomic measures
//! on the union of the input supports, so all population states, mutant laws
//! and limits are represented exactly by [`DiscreteMeasure`] once the initial
//! data has been discretised.

use std::cmp::Ordering;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Atoms closer than this are the same location.
pub const MERGE_TOL: f64 = 1e-12;
/// Allowed deviation of the total mass from one in probability contexts.
pub const PROB_TOL: f64 = 1e-12;
/// Tolerance used by the atomwise order relations.
pub const ORDER_TOL: f64 = 1e-12;

/// Drift below this is left alone after a dynamical step.
const DRIFT_SILENT: f64 = 1e-14;
/// Drift above this indicates a logic error rather than rounding.
const DRIFT_FATAL: f64 = 1e-8;

/// A point mass `w` at location `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub w: f64,
}

/// Largest point of the support and the mass sitting there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportInfo {
    pub sup_point: f64,
    pub mass_at_sup: f64,
}

/// A finite nonnegative atomic measure on `[0, 1]` in canonical form:
/// strictly increasing locations, strictly positive weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct DiscreteMeasure {
    atoms: Vec<Atom>,
    total: f64,
}

impl TryFrom<Vec<Atom>> for DiscreteMeasure {
    type Error = Error;

    fn try_from(atoms: Vec<Atom>) -> Result<Self> {
        Self::canonicalize(atoms.into_iter().map(|a| (a.x, a.w)))
    }
}

impl From<DiscreteMeasure> for Vec<Atom> {
    fn from(m: DiscreteMeasure) -> Self {
        m.atoms
    }
}

impl DiscreteMeasure {
    /// Validates, sorts, merges and prunes a raw list of `(location, weight)`.
    pub fn canonicalize<I>(raw: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut atoms = Vec::new();
        for (x, w) in raw {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Domain(format!("atom location {x} outside [0, 1]")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Domain(format!("atom weight {w} is not a finite nonnegative number")));
            }
            if w > 0.0 {
                atoms.push(Atom { x, w });
            }
        }
        atoms.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap_or(Ordering::Equal));
        Ok(Self::from_sorted(atoms))
    }

    /// Builds from atoms already sorted by location with positive weights,
    /// coalescing neighbours within [`MERGE_TOL`].
    fn from_sorted(sorted: Vec<Atom>) -> Self {
        let mut out: Vec<Atom> = Vec::with_capacity(sorted.len());
        // Cluster anchor, so that merging does not chain across long runs.
        let mut anchor = f64::NEG_INFINITY;
        let mut exact = true;
        for a in sorted {
            if a.w <= 0.0 {
                continue;
            }
            match out.last_mut() {
                Some(last) if a.x - anchor <= MERGE_TOL => {
                    if a.x != last.x || !exact {
                        exact = false;
                        last.x = ((last.x * last.w + a.x * a.w) / (last.w + a.w)).clamp(0.0, 1.0);
                    }
                    last.w += a.w;
                }
                _ => {
                    anchor = a.x;
                    exact = true;
                    out.push(a);
                }
            }
        }
        let total = out.iter().map(|a| a.w).sum();
        DiscreteMeasure { atoms: out, total }
    }

    /// The Dirac measure at `x`.
    pub fn dirac(x: f64) -> Result<Self> {
        Self::canonicalize([(x, 1.0)])
    }

    /// The zero measure.
    pub fn zero() -> Self {
        DiscreteMeasure { atoms: Vec::new(), total: 0.0 }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Sum of the weights.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn is_probability(&self) -> bool {
        (self.total - 1.0).abs() <= PROB_TOL
    }

    pub(crate) fn ensure_probability(&self, what: &str) -> Result<()> {
        if self.is_probability() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{what} must be a probability measure (total mass {})",
                self.total
            )))
        }
    }

    /// Mass carried by the atom at `x` (zero if there is none).
    pub fn mass_at(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .find(|a| (a.x - x).abs() <= MERGE_TOL)
            .map_or(0.0, |a| a.w)
    }

    /// True when the measure is a unit point mass at 0.
    pub fn is_dirac_zero(&self) -> bool {
        self.atoms.len() == 1 && self.atoms[0].x == 0.0
    }

    /// `sum w x^k`, divided by the total mass when `normalized` is set.
    pub fn moment(&self, k: u32, normalized: bool) -> f64 {
        let raw: f64 = self
            .atoms
            .iter()
            .map(|a| if k == 0 { a.w } else { a.w * a.x.powi(k as i32) })
            .sum();
        if normalized {
            if self.total > 0.0 {
                raw / self.total
            } else {
                0.0
            }
        } else {
            raw
        }
    }

    /// Normalised first moment, the mean fitness.
    pub fn mean(&self) -> f64 {
        self.moment(1, true)
    }

    /// The size-biased law `x mu(dx) / int y mu(dy)`.
    pub fn size_bias(&self) -> Result<Self> {
        let first: f64 = self.atoms.iter().map(|a| a.w * a.x).sum();
        if !(first > 0.0) {
            return Err(Error::DegenerateMeasure(
                "size-biasing a measure with zero mean".into(),
            ));
        }
        let atoms = self
            .atoms
            .iter()
            .filter(|a| a.x > 0.0)
            .map(|a| Atom { x: a.x, w: a.w * a.x / first })
            .collect();
        Ok(Self::from_sorted(atoms))
    }

    /// Returns `(Q^k, m_k)` where `Q^k(dx) = x^k Q(dx) / m_k` and
    /// `m_k = int x^k Q(dx)`. The tilt is formed in log space so that large
    /// `k` does not underflow the shape; `m_k` itself may underflow to zero.
    pub fn tilt_power(&self, k: u32) -> Result<(Self, f64)> {
        self.ensure_probability("tilted measure")?;
        if k == 0 {
            return Ok((self.clone(), 1.0));
        }
        let kf = f64::from(k);
        let logs: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .filter(|a| a.x > 0.0)
            .map(|a| (a.x, a.w.ln() + kf * a.x.ln()))
            .collect();
        let Some(max) = logs.iter().map(|&(_, l)| l).reduce(f64::max) else {
            return Err(Error::DegenerateMeasure(
                "tilting the point mass at 0 by x^k, k >= 1".into(),
            ));
        };
        let scaled: Vec<Atom> = logs
            .iter()
            .map(|&(x, l)| Atom { x, w: (l - max).exp() })
            .collect();
        let norm: f64 = scaled.iter().map(|a| a.w).sum();
        let atoms = scaled
            .into_iter()
            .map(|a| Atom { x: a.x, w: a.w / norm })
            .collect();
        let m_k = (max + norm.ln()).exp() / self.total;
        Ok((Self::from_sorted(atoms), m_k))
    }

    /// Total variation distance `sup_B |mu(B) - nu(B)|`.
    pub fn tv_distance(&self, other: &Self) -> f64 {
        0.5 * zip_atoms(self, other)
            .iter()
            .map(|&(_, a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// Distribution function `mu([0, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .take_while(|a| a.x <= x + MERGE_TOL)
            .map(|a| a.w)
            .sum()
    }

    /// Largest support point and its mass.
    pub fn support_sup(&self) -> Result<SupportInfo> {
        self.atoms
            .last()
            .map(|a| SupportInfo { sup_point: a.x, mass_at_sup: a.w })
            .ok_or_else(|| Error::Domain("supremum of the support of the zero measure".into()))
    }

    /// `mu <=_a nu` (or `<=_{a-}` when `open_at_a`): `mu(A) <= nu(A)` for every
    /// `A` inside `[0, a]` (resp. `[0, a)`), checked atom by atom.
    pub fn component_leq(&self, nu: &Self, a: f64, open_at_a: bool) -> bool {
        zip_atoms(self, nu)
            .iter()
            .filter(|&&(x, _, _)| {
                if open_at_a {
                    x < a - MERGE_TOL
                } else {
                    x <= a + MERGE_TOL
                }
            })
            .all(|&(_, wm, wn)| wm <= wn + ORDER_TOL)
    }

    /// Stochastic order `mu ⪯ nu`: `D_mu(x) >= D_nu(x)` everywhere.
    pub fn stochastic_leq(&self, nu: &Self) -> bool {
        let mut dm = 0.0;
        let mut dn = 0.0;
        zip_atoms(self, nu).iter().all(|&(_, wm, wn)| {
            dm += wm;
            dn += wn;
            dm >= dn - ORDER_TOL
        })
    }

    /// `alpha * self + beta * other`.
    pub fn mix(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        let mut merged = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.atoms, &other.atoms);
        while i < a.len() || j < b.len() {
            let take_left = j >= b.len() || (i < a.len() && a[i].x <= b[j].x);
            if take_left {
                merged.push(Atom { x: a[i].x, w: alpha * a[i].w });
                i += 1;
            } else {
                merged.push(Atom { x: b[j].x, w: beta * b[j].w });
                j += 1;
            }
        }
        Self::from_sorted(merged)
    }

    /// Every weight multiplied by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self::from_sorted(self.atoms.iter().map(|a| Atom { x: a.x, w: a.w * c }).collect())
    }

    /// Divides by the total mass.
    pub fn normalized(&self) -> Result<Self> {
        if !(self.total > 0.0) {
            return Err(Error::DegenerateMeasure("normalising the zero measure".into()));
        }
        Ok(self.scaled(1.0 / self.total))
    }

    /// Applies the drift policy after a dynamical step: renormalise small
    /// rounding drift, fail on anything that cannot be rounding.
    pub(crate) fn settle(self) -> Result<Self> {
        let drift = (self.total - 1.0).abs();
        if drift > DRIFT_FATAL {
            Err(Error::Numeric(format!(
                "probability mass drifted to {} after a step",
                self.total
            )))
        } else if drift > DRIFT_SILENT {
            self.normalized()
        } else {
            Ok(self)
        }
    }

    /// Writes the measure as a two-column `x,w` CSV table.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for a in &self.atoms {
            w.serialize(a).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads an `x,w` CSV table and canonicalises it.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let atoms = r
            .deserialize::<Atom>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(csv_err)?;
        Self::try_from(atoms)
    }

    /// Midpoint-rule discretisation of a density on `[0, upper]`: `cells`
    /// equal cells, each carrying `density(midpoint) * width`, renormalised.
    pub fn discretize_density<F>(density: F, upper: f64, cells: usize) -> Result<Self>
    where
        F: Fn(f64) -> f64,
    {
        if cells == 0 {
            return Err(Error::Usage("grid needs at least one cell".into()));
        }
        if !(upper > 0.0 && upper <= 1.0) {
            return Err(Error::Domain(format!("grid upper end {upper} outside (0, 1]")));
        }
        let width = upper / cells as f64;
        let raw: Vec<(f64, f64)> = (0..cells)
            .map(|i| {
                let mid = (i as f64 + 0.5) * width;
                (mid, density(mid).max(0.0) * width)
            })
            .collect();
        Self::canonicalize(raw)?.normalized()
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Usage(format!("malformed measure CSV: {e}"))
}

/// Walks the union of two supports, pairing atoms within [`MERGE_TOL`].
pub(crate) fn zip_atoms(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Vec<(f64, f64, f64)> {
    let (a, b) = (&mu.atoms, &nu.atoms);
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if i < a.len() && j < b.len() && (a[i].x - b[j].x).abs() <= MERGE_TOL {
            out.push((a[i].x, a[i].w, b[j].w));
            i += 1;
            j += 1;
        } else if j >= b.len() || (i < a.len() && a[i].x < b[j].x) {
            out.push((a[i].x, a[i].w, 0.0));
            i += 1;
        } else {
            out.push((b[j].x, 0.0, b[j].w));
            j += 1;
        }
    }
    out
}
