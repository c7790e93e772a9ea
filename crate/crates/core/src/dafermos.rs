//! Entropy-timeline comparison between a strong solution and a subsolution,
//! with the weight escalation that rules out earlier dissipation.
//!
//! Given `K~ <= K` on `[0, t0]` and `K~ < K - delta` on `(t0, t1)`, the weight
//! `h = exp(-gamma t)` on `[0, T1]` eventually makes `int h K~ < H(0) K0`,
//! which no subsolution can achieve. Finite precision caps `gamma`, so a
//! failed search is reported as inconclusive rather than as a pass.

use crate::dual_solver::{evolution_residuals, matrix_entropy, PrimalPair};
use crate::error::{Error, Result};
use crate::framework::{adapt_weight, total_entropy, EntropyTimeline, StrongSolutionRecord, WeightProfile};
use crate::grid::{MatrixField, SpaceOps, SpaceTimeGrid, StateField, TimeLayout};
use crate::linalg::{self, MAX_DIM};
use crate::models::Model;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NoViolation,
    InconsistentSubsolution,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedIntegrals {
    pub gamma: f64,
    /// `int_0^T1 h K~ dt`.
    pub subsolution: f64,
    /// `int_0^T1 h K dt`.
    pub strong: f64,
    /// `H(0) K0`.
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonVerdict {
    pub t0: f64,
    pub t1: f64,
    pub t2: f64,
    /// Right end of the weighted window.
    pub t_weight: f64,
    pub delta: f64,
    pub hypothesis_holds: bool,
    pub weighted_integrals: Vec<WeightedIntegrals>,
    pub verdict: Verdict,
    pub witness_gamma: Option<f64>,
    pub diagnostics: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DafermosConfig {
    /// `delta = delta_rel * max K`.
    pub delta_rel: f64,
    /// First `gamma`; `compare` raises it to the adapted weight when larger.
    pub gamma_start: f64,
    pub gamma_factor: f64,
    pub gamma_cap: f64,
    /// Subsolution residual tolerance (evolution, initial data, constraint, cone).
    pub residual_tol: f64,
    /// Success needs `int h K~ < H(0) K0 (1 - target_rel)`.
    pub target_rel: f64,
    /// Defaults to `(t0 + t1)/2`.
    pub t2: Option<f64>,
}

impl Default for DafermosConfig {
    fn default() -> Self {
        Self {
            delta_rel: 1e-4,
            gamma_start: 1.0,
            gamma_factor: 4.0,
            gamma_cap: 1e4,
            residual_tol: 1e-6,
            target_rel: 1e-9,
            t2: None,
        }
    }
}

impl DafermosConfig {
    fn validate(&self) -> Result<()> {
        if !(self.delta_rel >= 0.0 && self.gamma_start >= 0.0 && self.gamma_factor > 1.0 && self.gamma_cap >= self.gamma_start) {
            return Err(Error::Config("need delta_rel >= 0, 0 <= gamma_start <= gamma_cap, gamma_factor > 1".into()));
        }
        if !(self.residual_tol >= 0.0 && self.target_rel >= 0.0) {
            return Err(Error::Config("tolerances must be non-negative".into()));
        }
        Ok(())
    }
}

/// Compares a subsolution against a strong solution on the same grid.
pub fn compare(
    model: &Model,
    strong: &StrongSolutionRecord,
    sub: &PrimalPair,
    t0: f64,
    t1: f64,
    order: usize,
    cfg: &DafermosConfig,
) -> Result<ComparisonVerdict> {
    cfg.validate()?;
    let grid = strong.grid;
    let ops = SpaceOps::new(grid.nx, order)?;
    check_window(&grid, t0, t1)?;
    let (evo, init, lc) = evolution_residuals(model, &ops, &grid, sub, strong.initial_slice())?;
    let cone = cone_violation(model, &sub.z, &sub.m);
    let worst = evo.max(init).max(lc).max(cone);
    if !(worst <= cfg.residual_tol) {
        return Err(Error::Precondition(format!(
            "not a subsolution within {:.1e}: evolution {evo:.3e}, initial {init:.3e}, constraint {lc:.3e}, cone {cone:.3e}",
            cfg.residual_tol
        )));
    }
    let k_strong = total_entropy(model, &grid, &strong.v)?;
    let k_sub = matrix_entropy(&grid, &sub.m);
    let t_weight = weight_end(&grid, t1);
    // the proof needs gamma large enough for positivity on [0, T1]
    let gamma_min = if t_weight < grid.t_final {
        adapt_weight(model, &ops, strong, t_weight)?.gamma
    } else {
        0.0
    };
    let cfg = DafermosConfig { gamma_start: cfg.gamma_start.max(gamma_min), ..*cfg };
    compare_timelines(&grid, &k_strong, &k_sub, t0, t1, &cfg)
}

/// Timeline-level comparison; both timelines are reduced to slab values.
pub fn compare_timelines(
    grid: &SpaceTimeGrid,
    strong: &EntropyTimeline,
    sub: &EntropyTimeline,
    t0: f64,
    t1: f64,
    cfg: &DafermosConfig,
) -> Result<ComparisonVerdict> {
    cfg.validate()?;
    check_window(grid, t0, t1)?;
    let ks = strong.slab_values();
    let kt = sub.slab_values();
    if ks.len() != grid.nt || kt.len() != grid.nt {
        return Err(Error::Shape(format!("timelines must cover {} slabs, got {} and {}", grid.nt, ks.len(), kt.len())));
    }
    let k0 = strong.k[0];
    let kmax = ks.iter().fold(0.0_f64, |m, k| m.max(k.abs()));
    let delta = cfg.delta_rel * kmax;
    let slack = 1e-12 * kmax.max(1.0);
    let eps_t = 1e-12 * grid.t_final;
    let t2 = cfg.t2.unwrap_or(0.5 * (t0 + t1));
    if !(t2 > t0 && t2 < t1) {
        return Err(Error::Config(format!("t2 = {t2} must lie in ({t0}, {t1})")));
    }
    let t_weight = weight_end(grid, t1);

    let mut before = true;
    let mut during = true;
    let mut inside = 0;
    for k in 0..grid.nt {
        let (a, b) = (grid.t(k), grid.t(k + 1));
        if b <= t0 + eps_t {
            before &= kt[k] <= ks[k] + slack;
        } else if a >= t0 - eps_t && b <= t1 + eps_t {
            inside += 1;
            during &= kt[k] < ks[k] - delta;
        }
    }
    if inside == 0 {
        return Err(Error::Config(format!("no slab lies inside ({t0}, {t1})")));
    }
    let hypothesis_holds = before && during;
    let mut out = ComparisonVerdict {
        t0,
        t1,
        t2,
        t_weight,
        delta,
        hypothesis_holds,
        weighted_integrals: Vec::new(),
        verdict: Verdict::NoViolation,
        witness_gamma: None,
        diagnostics: String::new(),
    };
    if !hypothesis_holds {
        out.diagnostics = if before {
            format!("K~ >= K - delta somewhere on ({t0}, {t1})")
        } else {
            format!("K~ > K somewhere on [0, {t0}]")
        };
        return Ok(out);
    }
    let mut gamma = cfg.gamma_start;
    loop {
        let w = WeightProfile::new(gamma, t_weight)?;
        let entry = WeightedIntegrals {
            gamma,
            subsolution: slab_integral(grid, &w, &kt),
            strong: slab_integral(grid, &w, &ks),
            target: w.big_h(0.0) * k0,
        };
        out.weighted_integrals.push(entry);
        if entry.subsolution < entry.target - cfg.target_rel * entry.target.abs() {
            out.verdict = Verdict::InconsistentSubsolution;
            out.witness_gamma = Some(gamma);
            out.diagnostics = format!("int h K~ falls below H(0) K0 at gamma = {gamma}");
            return Ok(out);
        }
        let next = if gamma == 0.0 { 1.0 } else { gamma * cfg.gamma_factor };
        if next > cfg.gamma_cap {
            break;
        }
        gamma = next;
    }
    out.verdict = Verdict::Inconclusive;
    out.diagnostics = format!("no gamma up to {} separates the weighted integrals", cfg.gamma_cap);
    Ok(out)
}

/// `int_0^T1 h K dt` for slab-constant `K`, with exact slab weights.
fn slab_integral(grid: &SpaceTimeGrid, w: &WeightProfile, k: &[f64]) -> f64 {
    (0..grid.nt)
        .take_while(|&s| grid.t(s) < w.horizon - 1e-12 * grid.t_final)
        .map(|s| k[s] * w.h_integral(grid.t(s), grid.t(s + 1)))
        .sum()
}

/// Grid node nearest `(t1 + T)/2`, kept strictly after `t1` when possible.
fn weight_end(grid: &SpaceTimeGrid, t1: f64) -> f64 {
    let target = 0.5 * (t1 + grid.t_final);
    let mut k = ((target / grid.dt()).round() as usize).min(grid.nt);
    while k < grid.nt && grid.t(k) <= t1 + 1e-12 * grid.t_final {
        k += 1;
    }
    grid.t(k)
}

fn check_window(grid: &SpaceTimeGrid, t0: f64, t1: f64) -> Result<()> {
    if !(t0 >= 0.0 && t0 < t1 && t1 <= grid.t_final * (1.0 + 1e-12)) {
        return Err(Error::Config(format!("need 0 <= t0 < t1 <= T, got t0 = {t0}, t1 = {t1}, T = {}", grid.t_final)));
    }
    Ok(())
}

/// Largest `max(0, -lambda_min(M - F(z)))` over all cells.
pub fn cone_violation(model: &Model, z: &StateField, m: &MatrixField) -> f64 {
    let (n, nd) = (model.n(), model.dim());
    let mut f = [0.0; MAX_DIM * MAX_DIM];
    let mut worst: f64 = 0.0;
    for (zc, mc) in z.data.chunks(n).zip(m.data.chunks(nd * nd)) {
        if !model.in_domain(zc) {
            return f64::INFINITY;
        }
        model.flux(zc, &mut f);
        for i in 0..nd * nd {
            f[i] = mc[i] - f[i];
        }
        worst = worst.max(-linalg::min_eigenvalue(&f[..nd * nd], nd));
    }
    worst
}

/// `(v, F(v))` on slabs from a strong record: slab `z` is the node average.
pub fn strong_as_subsolution(model: &Model, record: &StrongSolutionRecord) -> Result<PrimalPair> {
    let g = record.grid;
    let (n, nd) = (model.n(), model.dim());
    let mut z = StateField::zeros(&g, TimeLayout::Slabs, n);
    let mut m = MatrixField::zeros(&g, TimeLayout::Slabs, nd);
    for k in 0..g.nt {
        let (a, b) = (record.v.slice(k), record.v.slice(k + 1));
        for (i, zi) in z.slice_mut(k).iter_mut().enumerate() {
            *zi = 0.5 * (a[i] + b[i]);
        }
        for j in 0..g.nx {
            let f = model.flux_checked(z.cell(k, j))?;
            m.cell_mut(k, j).copy_from_slice(&f);
        }
    }
    Ok(PrimalPair { v_nodes: record.v.clone(), z, m })
}

/// `int h K~ dt` for the slab entropy `1/2 int tr M dx`.
pub fn weighted_subsolution_entropy(grid: &SpaceTimeGrid, weight: &WeightProfile, m: &MatrixField) -> f64 {
    matrix_entropy(grid, m).weighted_integral(weight, grid)
}
