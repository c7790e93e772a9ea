//! Model-independent machinery: time weights, entropy timelines,
//! conservativity and sharp-equation residuals, strong-solution records.

use crate::error::{Error, Result};
use crate::grid::{SpaceOps, SpaceTimeGrid, StateField, TimeLayout};
use crate::linalg::{self, MAX_DIM};
use crate::models::Model;
use rayon::prelude::*;
use serde::Serialize;

/// Exponential weight `h(t) = exp(-gamma t)` and its tail `H(t) = int_t^T1 h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightProfile {
    pub gamma: f64,
    /// Right end `T1` of the weighted window; `H` vanishes from there on.
    pub horizon: f64,
}

impl WeightProfile {
    pub fn new(gamma: f64, horizon: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Config(format!("weight horizon must be positive, got {horizon}")));
        }
        Ok(Self { gamma, horizon })
    }

    pub fn unit(horizon: f64) -> Result<Self> {
        Self::new(0.0, horizon)
    }

    pub fn h(&self, t: f64) -> f64 {
        (-self.gamma * t).exp()
    }

    pub fn big_h(&self, t: f64) -> f64 {
        let t = t.min(self.horizon);
        let tail = self.horizon - t;
        if self.gamma == 0.0 {
            tail
        } else {
            -(-self.gamma * t).exp() * (-self.gamma * tail).exp_m1() / self.gamma
        }
    }

    /// `int_a^b h(s) ds` in closed form.
    pub fn h_integral(&self, a: f64, b: f64) -> f64 {
        self.big_h(a) - self.big_h(b)
    }

    /// Mean of `h` over `[a, b]` (exact).
    pub fn h_mean(&self, a: f64, b: f64) -> f64 {
        if self.gamma == 0.0 {
            return 1.0;
        }
        let ea = (-self.gamma * a).exp();
        ea * -(-self.gamma * (b - a)).exp_m1() / (self.gamma * (b - a))
    }

    pub fn h_samples(&self, grid: &SpaceTimeGrid) -> Vec<f64> {
        (0..=grid.nt).map(|k| self.h(grid.t(k))).collect()
    }

    pub fn big_h_samples(&self, grid: &SpaceTimeGrid) -> Vec<f64> {
        (0..=grid.nt).map(|k| self.big_h(grid.t(k))).collect()
    }

    /// Slab averages of `h` over `[t_k, t_{k+1}]`, so `sum dt * avg = H(0)` on a grid ending at the horizon.
    pub fn h_slab_means(&self, grid: &SpaceTimeGrid) -> Vec<f64> {
        (0..grid.nt).map(|k| self.h_mean(grid.t(k), grid.t(k + 1))).collect()
    }
}

/// Total entropy sampled on a time layout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyTimeline {
    pub layout: TimeLayout,
    pub times: Vec<f64>,
    pub k: Vec<f64>,
}

impl EntropyTimeline {
    /// `int h K dt` with `K` piecewise constant on slabs (node samples are averaged per slab).
    pub fn weighted_integral(&self, weight: &WeightProfile, grid: &SpaceTimeGrid) -> f64 {
        let slabs = self.slab_values();
        slabs
            .iter()
            .enumerate()
            .map(|(k, kv)| kv * weight.h_integral(grid.t(k), grid.t(k + 1)))
            .sum()
    }

    pub fn slab_values(&self) -> Vec<f64> {
        match self.layout {
            TimeLayout::Slabs => self.k.clone(),
            TimeLayout::Nodes => self.k.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
        }
    }
}

/// Per-level quadrature of `K(v)`.
pub fn total_entropy(model: &Model, grid: &SpaceTimeGrid, v: &StateField) -> Result<EntropyTimeline> {
    v.check(grid, model.n())?;
    let dx = grid.dx();
    let mut k = Vec::with_capacity(v.levels);
    for lvl in 0..v.levels {
        let mut s = 0.0;
        for j in 0..grid.nx {
            let c = v.cell(lvl, j);
            if !model.in_domain(c) {
                return Err(Error::domain(
                    format!("level {lvl}, cell {j}"),
                    format!("{c:?} outside dom F"),
                ));
            }
            s += model.entropy(c);
        }
        k.push(s * dx);
    }
    let times = (0..v.levels).map(|l| grid.time_of(v.layout, l)).collect();
    Ok(EntropyTimeline { layout: v.layout, times, k })
}

/// `|int F(v) : L*(v#) dx|` for one spatial slice.
pub fn conservativity_residual(model: &Model, ops: &SpaceOps, v: &[f64], constraint_tol: f64) -> Result<f64> {
    let nx = ops.nx;
    let n = model.n();
    let nd = model.dim();
    if v.len() != nx * n {
        return Err(Error::Shape(format!("slice has {} values, expected {}", v.len(), nx * n)));
    }
    let z = model.z();
    if z > 0 && !matches!(model, Model::Burgers) {
        let mut c = vec![0.0; nx * z];
        model.lc_apply(ops, v, &mut c);
        let worst = c.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if worst > constraint_tol {
            return Err(Error::Precondition(format!(
                "constraint residual {worst:.3e} exceeds {constraint_tol:.1e}"
            )));
        }
    }
    let mut vs = vec![0.0; nx * n];
    for j in 0..nx {
        let c = &v[j * n..(j + 1) * n];
        if !model.in_interior(c) {
            return Err(Error::domain(format!("cell {j}"), format!("{c:?} is not interior")));
        }
        model.sharp_cell(c, &mut vs[j * n..(j + 1) * n]);
    }
    let mut a = vec![0.0; nx * nd * nd];
    model.lstar_apply(ops, &vs, &mut a);
    let mut f = [0.0; MAX_DIM * MAX_DIM];
    let mut total = 0.0;
    for j in 0..nx {
        model.flux(&v[j * n..(j + 1) * n], &mut f);
        total += linalg::frobenius(&f[..nd * nd], &a[j * nd * nd..(j + 1) * nd * nd]);
    }
    Ok((total * ops.dx).abs())
}

/// A smooth solution sampled on time nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongSolutionRecord {
    pub grid: SpaceTimeGrid,
    pub v: StateField,
    /// Constraint multiplier on nodes (`Z` components); `None` when `Z = 0`.
    pub pi: Option<StateField>,
    /// Smallest `c >= 0` with `c I + (T - t) L*(v#) >= 0` everywhere.
    pub positivity_margin: f64,
    pub label: String,
}

impl StrongSolutionRecord {
    pub fn initial_slice(&self) -> &[f64] {
        self.v.slice(0)
    }

    /// Sharp field on every node.
    pub fn sharp_field(&self, model: &Model) -> Result<StateField> {
        let mut s = self.v.clone();
        for k in 0..self.v.levels {
            for j in 0..self.grid.nx {
                let c = self.v.cell(k, j);
                if !model.in_interior(c) {
                    return Err(Error::domain(format!("level {k}, cell {j}"), format!("{c:?} is not interior")));
                }
                model.sharp_cell(c, s.cell_mut(k, j));
            }
        }
        Ok(s)
    }

    /// Largest relative entropy drift `max_t |K(t) - K0| / max(1, K0)`.
    pub fn entropy_drift(&self, model: &Model) -> Result<f64> {
        let tl = total_entropy(model, &self.grid, &self.v)?;
        let k0 = tl.k[0];
        Ok(tl.k.iter().map(|k| (k - k0).abs()).fold(0.0, f64::max) / k0.abs().max(1.0))
    }
}

/// `L*(v#)` on every node, as `levels * nx * N * N`.
pub fn lstar_of_sharp(model: &Model, ops: &SpaceOps, sharp: &StateField) -> Vec<f64> {
    let nd = model.dim();
    let w = ops.nx * nd * nd;
    let mut out = vec![0.0; sharp.levels * w];
    out.par_chunks_mut(w).enumerate().for_each(|(k, chunk)| {
        model.lstar_apply(ops, sharp.slice(k), chunk);
    });
    out
}

/// `L*(a) : dF_l(v)` per cell and component for one level.
pub fn lstar_contraction(model: &Model, v: &[f64], lsa: &[f64], nx: usize, out: &mut [f64]) {
    let n = model.n();
    let nd = model.dim();
    let mut d = [0.0; MAX_DIM * MAX_DIM];
    for j in 0..nx {
        let c = &v[j * n..(j + 1) * n];
        let a = &lsa[j * nd * nd..(j + 1) * nd * nd];
        for l in 0..n {
            model.flux_derivative(c, l, &mut d);
            out[j * n + l] = linalg::frobenius(&d[..nd * nd], a);
        }
    }
}

/// Second-order time derivative of node samples (one-sided at the ends).
pub fn node_time_derivative(levels: &[&[f64]], dt: f64, k: usize) -> Vec<f64> {
    let last = levels.len() - 1;
    let len = levels[0].len();
    (0..len)
        .map(|i| {
            if k == 0 {
                (-3.0 * levels[0][i] + 4.0 * levels[1][i] - levels[2][i]) / (2.0 * dt)
            } else if k == last {
                (3.0 * levels[last][i] - 4.0 * levels[last - 1][i] + levels[last - 2][i]) / (2.0 * dt)
            } else {
                (levels[k + 1][i] - levels[k - 1][i]) / (2.0 * dt)
            }
        })
        .collect()
}

/// Max over components, interior nodes and cells of
/// `|h v#_l + d_t(H v#)_l + H L*(v#):d_l F(v) - H (l* pi)_l|`.
pub fn sharp_residual(model: &Model, ops: &SpaceOps, record: &StrongSolutionRecord, weight: &WeightProfile) -> Result<f64> {
    let grid = &record.grid;
    let n = model.n();
    let nx = grid.nx;
    let dt = grid.dt();
    let sharp = record.sharp_field(model)?;
    let lsa = lstar_of_sharp(model, ops, &sharp);
    let w = nx * model.dim() * model.dim();
    let worst: Vec<f64> = (1..grid.nt)
        .into_par_iter()
        .map(|k| {
            let (tm, t, tp) = (grid.t(k - 1), grid.t(k), grid.t(k + 1));
            let (hm, hk, hp) = (weight.big_h(tm), weight.big_h(t), weight.big_h(tp));
            let h = weight.h(t);
            let mut contr = vec![0.0; nx * n];
            lstar_contraction(model, record.v.slice(k), &lsa[k * w..(k + 1) * w], nx, &mut contr);
            let mut lpi = vec![0.0; nx * n];
            if let Some(pi) = &record.pi {
                model.lcstar_apply(ops, pi.slice(k), &mut lpi);
            }
            let (sm, sk, sp) = (sharp.slice(k - 1), sharp.slice(k), sharp.slice(k + 1));
            let mut m: f64 = 0.0;
            for i in 0..nx * n {
                let dth = (hp * sp[i] - hm * sm[i]) / (2.0 * dt);
                let r = h * sk[i] + dth + hk * contr[i] - hk * lpi[i];
                m = m.max(r.abs());
            }
            m
        })
        .collect();
    Ok(worst.into_iter().fold(0.0, f64::max))
}

/// Adapted rate `gamma = max(0, -2 min eig L*(v#))` over nodes with `t <= t1`, weight on `[0, t1]`.
pub fn adapt_weight(model: &Model, ops: &SpaceOps, record: &StrongSolutionRecord, t1: f64) -> Result<WeightProfile> {
    let grid = &record.grid;
    if !(t1 > 0.0 && t1 <= grid.t_final * (1.0 + 1e-12)) {
        return Err(Error::Config(format!("weight horizon {t1} outside (0, {}]", grid.t_final)));
    }
    let lam = min_eigen_lstar(model, ops, record, t1)?;
    WeightProfile::new((-2.0 * lam).max(0.0), t1)
}

/// Minimum eigenvalue of `L*(v#)` over nodes with `t <= t1`.
pub fn min_eigen_lstar(model: &Model, ops: &SpaceOps, record: &StrongSolutionRecord, t1: f64) -> Result<f64> {
    let grid = &record.grid;
    let nd = model.dim();
    let sharp = record.sharp_field(model)?;
    let lsa = lstar_of_sharp(model, ops, &sharp);
    let mut lam = f64::INFINITY;
    for k in 0..=grid.nt {
        if grid.t(k) > t1 * (1.0 + 1e-12) {
            break;
        }
        for j in 0..grid.nx {
            let o = (k * grid.nx + j) * nd * nd;
            lam = lam.min(linalg::min_eigenvalue(&lsa[o..o + nd * nd], nd));
        }
    }
    Ok(lam)
}
