//! Finite backward sequences and quenched limits.
//!
//! For a fixed realisation `β_1, β_2, ...` the backward sequence of depth `n`
//! starts from `P_n^n = δ_h` and runs
//!
//! ```text
//! P_j^n = (1 - β_{j+1}) x P_{j+1}^n(dx) / ∫ y P_{j+1}^n(dy) + β_{j+1} Q
//! ```
//!
//! down to `j = 0`. Deepening the pass only appends mutation probabilities
//! at the far end, and `P_0^n` increases in `n` below `h` while its
//! condensate weight
//!
//! ```text
//! H_n = Π_{l=1}^{n} h (1 - β_l) / ∫ y P_l^n(dy)
//! ```
//!
//! decreases. The limit `G_0` of `H_n` is the condensate mass of the
//! quenched limit, and `H_n - G_0` is its total variation distance to `P_0^n`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::{check_beta, check_mutant_law, step_unchecked};
use crate::law::BetaStream;
use crate::measure::{DiscreteMeasure, MERGE_TOL};

/// All generations of one backward pass, indexed by `j`: `measures[j]` is
/// `P_j^n` and `measures[n]` is the terminal condition.
#[derive(Clone, Debug, Serialize)]
pub struct BackwardPass {
    pub measures: Vec<DiscreteMeasure>,
    pub terminal: DiscreteMeasure,
    /// `β_1, ..., β_n`; `betas[l - 1]` produces `P_{l-1}^n` from `P_l^n`.
    pub betas: Vec<f64>,
    /// `means[j] = ∫ y P_j^n(dy)`.
    pub means: Vec<f64>,
    /// `mass_at_h[j] = Π_{l=j+1}^{n} h (1 - β_l) / ∫ y P_l^n(dy)`.
    pub mass_at_h: Vec<f64>,
    pub h: f64,
}

impl BackwardPass {
    pub fn depth(&self) -> usize {
        self.betas.len()
    }
}

/// Approximation of the quenched limit `𝓖_0 = 𝓘_0` by a finite pass.
#[derive(Clone, Debug, Serialize)]
pub struct QuenchedLimitResult {
    pub limit: DiscreteMeasure,
    /// The condensate weight `H_n` of the pass; equals `limit(h)` when
    /// `Q(h) = 0`.
    pub condensate_mass: f64,
    pub depth_used: usize,
    /// `H_n - H_{n+window}` at the accepted depth. Absent for entries of a
    /// [`quenched_sequence`], which are not separately stopped.
    pub mass_gap: Option<f64>,
    pub mean_fitness: f64,
}

/// When to stop deepening a backward pass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StoppingRule {
    pub tol: f64,
    pub window: usize,
    pub depth_cap: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule { tol: 1e-8, window: 64, depth_cap: 1_000_000 }
    }
}

impl StoppingRule {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.window == 0 || self.depth_cap < self.window {
            return Err(Error::Usage(format!(
                "invalid stopping rule: tol {} window {} depth cap {}",
                self.tol, self.window, self.depth_cap
            )));
        }
        Ok(())
    }
}

fn check_model(q: &DiscreteMeasure, h: f64) -> Result<()> {
    check_mutant_law(q)?;
    let s_q = q.support_sup()?.sup_point;
    if !(h > 0.0 && h <= 1.0) || h < s_q - MERGE_TOL {
        return Err(Error::Domain(format!("top fitness {h} must lie in [S_Q, 1] = [{s_q}, 1]")));
    }
    Ok(())
}

/// Runs the backward recursion from `terminal` over `betas`, keeping every
/// generation.
pub fn backward_pass(
    terminal: &DiscreteMeasure,
    betas: &[f64],
    q: &DiscreteMeasure,
    h: f64,
) -> Result<BackwardPass> {
    check_model(q, h)?;
    terminal.ensure_probability("terminal condition")?;
    let top = terminal.support_sup()?.sup_point;
    if (top - h).abs() > MERGE_TOL {
        return Err(Error::Domain(format!(
            "terminal condition tops out at {top}, not at h = {h}"
        )));
    }
    let n = betas.len();
    let mut measures = vec![terminal.clone(); n + 1];
    let mut means = vec![0.0; n + 1];
    let mut mass_at_h = vec![1.0; n + 1];
    means[n] = terminal.mean();
    for j in (0..n).rev() {
        let beta = betas[j];
        check_beta(beta)?;
        measures[j] = step_unchecked(&measures[j + 1], beta, q)?;
        means[j] = measures[j].mean();
        mass_at_h[j] = mass_at_h[j + 1] * h * (1.0 - beta) / means[j + 1];
    }
    Ok(BackwardPass {
        measures,
        terminal: terminal.clone(),
        betas: betas.to_vec(),
        means,
        mass_at_h,
        h,
    })
}

/// `(P_0^n, H_n)` from the terminal `δ_h`, keeping nothing else.
pub(crate) fn descend(betas: &[f64], q: &DiscreteMeasure, h: f64) -> Result<(DiscreteMeasure, f64)> {
    let mut p = DiscreteMeasure::dirac(h)?;
    let mut mass = 1.0;
    for &beta in betas.iter().rev() {
        check_beta(beta)?;
        mass *= h * (1.0 - beta) / p.mean();
        p = step_unchecked(&p, beta, q)?;
    }
    Ok((p, mass))
}

/// Deepens a backward pass from `δ_h` until the condensate weight settles.
///
/// Depths `n = w, 2w, 4w, ...` are tried in turn, each compared with depth
/// `n + w` on the same stream prefix; the first `n` with
/// `H_n - H_{n+w} < tol` is returned. A depth beyond the cap yields
/// [`Error::NonConvergence`] carrying the last `H_n`, which bounds `G_0`
/// from above.
pub fn quenched_limit(
    stream: &mut BetaStream,
    q: &DiscreteMeasure,
    h: f64,
    rule: StoppingRule,
) -> Result<QuenchedLimitResult> {
    check_model(q, h)?;
    rule.validate()?;
    let mut n = rule.window;
    let mut last_mass = 1.0;
    while n + rule.window <= rule.depth_cap {
        let betas = stream.prefix(n + rule.window)?;
        let (limit, mass) = descend(&betas[..n], q, h)?;
        let (_, deeper) = descend(betas, q, h)?;
        let gap = mass - deeper;
        if gap < rule.tol {
            let mean_fitness = limit.mean();
            return Ok(QuenchedLimitResult {
                limit,
                condensate_mass: mass,
                depth_used: n,
                mass_gap: Some(gap),
                mean_fitness,
            });
        }
        last_mass = deeper;
        n *= 2;
    }
    Err(Error::NonConvergence { depth: rule.depth_cap, mass_upper: last_mass })
}

/// Approximations of `𝓘_0, ..., 𝓘_{J-1}` read off one pass of depth
/// `J + burn_in`: entry `j` is `P_j^n` with condensate weight `H` taken from
/// generation `j` upwards.
pub fn quenched_sequence(
    stream: &mut BetaStream,
    q: &DiscreteMeasure,
    h: f64,
    count: usize,
    burn_in: usize,
) -> Result<Vec<QuenchedLimitResult>> {
    check_model(q, h)?;
    let n = count + burn_in;
    let betas = stream.prefix(n)?;
    let mut out = Vec::with_capacity(count);
    let mut p = DiscreteMeasure::dirac(h)?;
    let mut mass = 1.0;
    for j in (0..n).rev() {
        let beta = betas[j];
        check_beta(beta)?;
        mass *= h * (1.0 - beta) / p.mean();
        p = step_unchecked(&p, beta, q)?;
        if j < count {
            out.push(QuenchedLimitResult {
                mean_fitness: p.mean(),
                limit: p.clone(),
                condensate_mass: mass,
                depth_used: n - j,
                mass_gap: None,
            });
        }
    }
    out.reverse();
    Ok(out)
}

/// The condensate weight of a pass computed two ways.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CondensateRoutes {
    /// `Π_{l=1}^{n} h (1 - β_l) / ∫ y P_l^n(dy)`.
    pub product_route: f64,
    /// `1 - Σ_{j<n} Π_{l=1}^{j} (1 - β_l) / ∫ y P_l^n(dy) · β_{j+1} m_j`
    /// with `m_j = ∫ x^j Q(dx)`.
    pub series_route: f64,
}

/// Both formulas for the condensate weight of `pass`. The series is summed
/// over the whole pass; it uses only the means and the moments of `Q`, never
/// the mass at `h`.
pub fn condensate_mass_routes(pass: &BackwardPass, q: &DiscreteMeasure) -> CondensateRoutes {
    let n = pass.depth();
    let mut sum = 0.0;
    let mut coef = 1.0;
    for j in 0..n {
        if j > 0 {
            coef *= (1.0 - pass.betas[j - 1]) / pass.means[j];
        }
        let beta = pass.betas[j];
        if beta > 0.0 {
            sum += coef * beta * q.moment(j as u32, false);
        }
    }
    CondensateRoutes { product_route: pass.mass_at_h[0], series_route: 1.0 - sum }
}

/// `D_k = ∫ (y/h)^k P_k^n(dy) · Π_{l=1}^{k} h (1 - β_l) / ∫ y P_l^n(dy)` for
/// `k = 0..=n`. The sequence never increases and tends to the condensate
/// weight.
pub fn decreasing_diagnostic(pass: &BackwardPass) -> Vec<f64> {
    let h = pass.h;
    let mut log_prod = 0.0;
    (0..=pass.depth())
        .map(|k| {
            if k > 0 {
                log_prod += (h * (1.0 - pass.betas[k - 1]) / pass.means[k]).ln();
            }
            let kf = k as f64;
            let logs: Vec<f64> = pass.measures[k]
                .atoms()
                .iter()
                .filter(|a| a.x > 0.0 || k == 0)
                .map(|a| a.w.ln() + if k == 0 { 0.0 } else { kf * (a.x / h).ln() })
                .collect();
            let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
            (log_prod + lse).exp()
        })
        .collect()
}
