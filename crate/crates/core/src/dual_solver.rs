//! Discrete relaxed primal problem and its dual, solved by PDHG.
//!
//! Primal unknowns live on time slabs: `z^k` (argument of `F`) and `M^k`
//! (the relaxed flux) for `k = 0..nt`. Node values follow from
//! `v^{k+1} = v^k + dt L M^k` with `v^0 = v0`, and the slab value is the
//! midpoint `z^k = v0 + dt sum_{j<k} L M^j + dt/2 L M^k`, written
//! `A(z, M) = z - S(L M) = v0`. The objective is `1/2 sum hbar_k tr M dx dt`
//! with `hbar_k` the exact slab mean of the weight, so `sum dt hbar = H(0)`.
//!
//! The multiplier of `A` is the density `E`. Its companion is
//! `B^j = -L*(dt sum_{k>j} E^k + dt/2 E^j)`, which vanishes after the last
//! slab. The dual value is
//! `-<v0, E> + sum dx dt inf_z [z.E + 1/2 F(z):(hbar I + 2B)]`.

use crate::error::{Error, Result};
use crate::framework::{EntropyTimeline, WeightProfile};
use crate::grid::{MatrixField, SpaceOps, SpaceTimeGrid, StateField, TimeLayout};
use crate::linalg::{self, MAX_DIM};
use crate::models::{FluidModel, Model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Primal step; `None` uses `0.95 / (||A|| omega)`.
    pub tau: Option<f64>,
    /// Dual step; `None` uses `0.95 omega / ||A||`.
    pub sigma: Option<f64>,
    /// Primal weight `omega` balancing the two steps.
    pub primal_weight: f64,
    pub max_iterations: usize,
    pub gap_rel: f64,
    pub feas_abs: f64,
    pub power_iterations: usize,
    pub record_every: usize,
    /// Stencil order of the solver's `D`.
    pub order: usize,
    pub seed: u64,
    /// Restart from the running average when its certified gap halves.
    pub restarts: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau: None,
            sigma: None,
            primal_weight: 1.0,
            max_iterations: 50_000,
            gap_rel: 1e-3,
            feas_abs: 1e-6,
            power_iterations: 50,
            record_every: 100,
            order: 2,
            seed: 0,
            restarts: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64, name: &str| -> Result<()> {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {x}")))
            }
        };
        pos(self.primal_weight, "primal_weight")?;
        pos(self.gap_rel, "gap_rel")?;
        pos(self.feas_abs, "feas_abs")?;
        if let Some(t) = self.tau {
            pos(t, "tau")?;
        }
        if let Some(s) = self.sigma {
            pos(s, "sigma")?;
        }
        if self.max_iterations == 0 || self.power_iterations == 0 || self.record_every == 0 {
            return Err(Error::Config("iteration counts must be positive".into()));
        }
        if self.order != 2 && self.order != 4 {
            return Err(Error::Config(format!("stencil order must be 2 or 4, got {}", self.order)));
        }
        Ok(())
    }
}

/// Subsolution candidate: node values plus the slab (or node) pair `(z, M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalPair {
    pub v_nodes: StateField,
    pub z: StateField,
    pub m: MatrixField,
}

/// Dual densities on slabs; `B` after the last slab is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPair {
    pub e: StateField,
    pub b: MatrixField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterRecord {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub feasibility: f64,
    /// Evaluated at the running average rather than the current iterate.
    pub averaged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualReport {
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub rel_gap: f64,
    pub constraint_residual: f64,
    pub cone_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restarts: usize,
    pub op_norm: f64,
    pub tau: f64,
    pub sigma: f64,
    pub projection_fallbacks: usize,
    pub entropy_timeline: EntropyTimeline,
    pub history: Vec<IterRecord>,
}

/// `A(z, M) = z - S(L M)` on slabs with its transpose.
#[derive(Debug, Clone)]
pub struct ConstraintOperator {
    pub model: Model,
    pub grid: SpaceTimeGrid,
    pub ops: SpaceOps,
}

impl ConstraintOperator {
    pub fn new(model: &Model, grid: &SpaceTimeGrid, order: usize) -> Result<Self> {
        Ok(Self { model: *model, grid: *grid, ops: SpaceOps::new(grid.nx, order)? })
    }

    fn sizes(&self) -> (usize, usize) {
        let n = self.model.n();
        let nd = self.model.dim();
        (self.grid.nx * n, self.grid.nx * nd * nd)
    }

    /// `L M^k` for every slab.
    fn l_all(&self, m: &[f64]) -> Vec<f64> {
        let (ws, wm) = self.sizes();
        let mut out = vec![0.0; self.grid.nt * ws];
        out.par_chunks_mut(ws).enumerate().for_each(|(k, o)| {
            self.model.l_apply(&self.ops, &m[k * wm..(k + 1) * wm], o);
        });
        out
    }

    /// `S(L M)` on slabs.
    pub fn integrate(&self, m: &[f64]) -> Vec<f64> {
        let (ws, _) = self.sizes();
        let lm = self.l_all(m);
        let dt = self.grid.dt();
        let mut out = vec![0.0; lm.len()];
        let mut acc = vec![0.0; ws];
        for k in 0..self.grid.nt {
            let src = &lm[k * ws..(k + 1) * ws];
            let dst = &mut out[k * ws..(k + 1) * ws];
            for i in 0..ws {
                dst[i] = acc[i] + 0.5 * dt * src[i];
                acc[i] += dt * src[i];
            }
        }
        out
    }

    /// Node values `v^k` from `v0` and slab fluxes.
    pub fn node_values(&self, v0: &[f64], m: &[f64]) -> StateField {
        let (ws, _) = self.sizes();
        let lm = self.l_all(m);
        let dt = self.grid.dt();
        let mut v = StateField::zeros(&self.grid, TimeLayout::Nodes, self.model.n());
        v.slice_mut(0).copy_from_slice(v0);
        for k in 0..self.grid.nt {
            let prev = v.slice(k).to_vec();
            let next = v.slice_mut(k + 1);
            for i in 0..ws {
                next[i] = prev[i] + dt * lm[k * ws + i];
            }
        }
        v
    }

    pub fn apply(&self, z: &[f64], m: &[f64]) -> Vec<f64> {
        let s = self.integrate(m);
        z.iter().zip(&s).map(|(a, b)| a - b).collect()
    }

    /// `Psi^j = dt sum_{k>j} y^k + dt/2 y^j`.
    pub fn tail_sums(&self, y: &[f64]) -> Vec<f64> {
        let (ws, _) = self.sizes();
        let dt = self.grid.dt();
        let mut psi = vec![0.0; y.len()];
        let mut acc = vec![0.0; ws];
        for k in (0..self.grid.nt).rev() {
            let src = &y[k * ws..(k + 1) * ws];
            let dst = &mut psi[k * ws..(k + 1) * ws];
            for i in 0..ws {
                dst[i] = acc[i] + 0.5 * dt * src[i];
                acc[i] += dt * src[i];
            }
        }
        psi
    }

    /// `B = -L*(Psi)` on slabs.
    pub fn b_from_e(&self, y: &[f64]) -> Vec<f64> {
        let (ws, wm) = self.sizes();
        let psi = self.tail_sums(y);
        let mut b = vec![0.0; self.grid.nt * wm];
        b.par_chunks_mut(wm).enumerate().for_each(|(k, o)| {
            self.model.lstar_apply(&self.ops, &psi[k * ws..(k + 1) * ws], o);
            o.iter_mut().for_each(|x| *x = -*x);
        });
        b
    }

    /// Transpose: `(y, -L* Psi(y)) = (y, B(y))`.
    pub fn apply_transpose(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (y.to_vec(), self.b_from_e(y))
    }

    /// Norm estimate by power iteration on `A^T A` from a seeded start.
    pub fn norm_estimate(&self, iterations: usize, seed: u64) -> f64 {
        let (ws, wm) = self.sizes();
        let nt = self.grid.nt;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z: Vec<f64> = (0..nt * ws).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut m: Vec<f64> = (0..nt * wm).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut est = 0.0;
        for _ in 0..iterations {
            let nrm = (dot(&z, &z) + dot(&m, &m)).sqrt();
            if nrm == 0.0 {
                return 0.0;
            }
            z.iter_mut().for_each(|x| *x /= nrm);
            m.iter_mut().for_each(|x| *x /= nrm);
            let y = self.apply(&z, &m);
            est = dot(&y, &y).sqrt();
            let (z2, m2) = self.apply_transpose(&y);
            z = z2;
            m = m2;
        }
        est
    }

    /// Largest normalised defect `|<A x, y> - <x, A^T y>| / (|x| |y| ||A||)` over seeded pairs.
    pub fn adjointness_probe(&self, seed: u64) -> f64 {
        let (ws, wm) = self.sizes();
        let nt = self.grid.nt;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let na = self.norm_estimate(20, seed).max(1.0);
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let z: Vec<f64> = (0..nt * ws).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let m: Vec<f64> = (0..nt * wm).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..nt * ws).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ax = self.apply(&z, &m);
            let (tz, tm) = self.apply_transpose(&y);
            let lhs = dot(&ax, &y);
            let rhs = dot(&z, &tz) + dot(&m, &tm);
            let nx = (dot(&z, &z) + dot(&m, &m)).sqrt();
            let ny = dot(&y, &y).sqrt();
            worst = worst.max((lhs - rhs).abs() / (nx * ny * na));
        }
        worst
    }
}

/// Differential-form residuals of a node/slab subsolution candidate:
/// `max |(v^{k+1} - v^k)/dt - L M^k|`, `max |v^0 - v0|`, `max |l v|`.
pub fn evolution_residuals(model: &Model, ops: &SpaceOps, grid: &SpaceTimeGrid, pair: &PrimalPair, v0: &[f64]) -> Result<(f64, f64, f64)> {
    let n = model.n();
    let nd = model.dim();
    pair.v_nodes.check(grid, n)?;
    pair.m.check(grid, nd)?;
    let dt = grid.dt();
    let nx = grid.nx;
    let mut evo: f64 = 0.0;
    let mut lm = vec![0.0; nx * n];
    for k in 0..grid.nt {
        match pair.m.layout {
            TimeLayout::Slabs => model.l_apply(ops, pair.m.slice(k), &mut lm),
            TimeLayout::Nodes => {
                // trapezoid in time
                let mut a = vec![0.0; nx * n];
                let mut b = vec![0.0; nx * n];
                model.l_apply(ops, pair.m.slice(k), &mut a);
                model.l_apply(ops, pair.m.slice(k + 1), &mut b);
                for i in 0..nx * n {
                    lm[i] = 0.5 * (a[i] + b[i]);
                }
            }
        }
        let (a, b) = (pair.v_nodes.slice(k), pair.v_nodes.slice(k + 1));
        for i in 0..nx * n {
            evo = evo.max(((b[i] - a[i]) / dt - lm[i]).abs());
        }
    }
    let init = pair
        .v_nodes
        .slice(0)
        .iter()
        .zip(v0)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let mut lc: f64 = 0.0;
    if model.z() > 0 {
        let mut c = vec![0.0; nx * model.z()];
        for k in 0..=grid.nt {
            model.lc_apply(ops, pair.v_nodes.slice(k), &mut c);
            lc = lc.max(c.iter().fold(0.0_f64, |m, x| m.max(x.abs())));
        }
    }
    Ok((evo, init, lc))
}

/// Outcome of a cellwise epigraph projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub fallback: bool,
}

/// Euclidean projection of `(z, M)` onto `{F(z) <= M, rho >= rho_min}`, in place.
pub fn project_epigraph(model: &Model, z: &mut [f64], m: &mut [f64]) -> Projection {
    let n = model.n();
    let nd = model.dim();
    match model {
        Model::Burgers => {
            let (z0, m0) = (z[0], m[0]);
            if z0 * z0 <= m0 {
                return Projection { fallback: false };
            }
            // phi'(z) = z - z0 + 2 z (z^2 - m0)_+ is increasing; root lies between 0 and z0
            let dphi = |x: f64| x - z0 + 2.0 * x * (x * x - m0).max(0.0);
            let (mut lo, mut hi) = if z0 >= 0.0 { (0.0, z0) } else { (z0, 0.0) };
            let mut x = z0;
            for _ in 0..200 {
                let g = dphi(x);
                if g > 0.0 {
                    hi = x;
                } else {
                    lo = x;
                }
                let dg = 1.0 + if x * x > m0 { 6.0 * x * x - 2.0 * m0 } else { 0.0 };
                let mut nx = x - g / dg;
                if !(nx > lo && nx < hi) {
                    nx = 0.5 * (lo + hi);
                }
                if (nx - x).abs() <= 1e-16 * (1.0 + x.abs()) || hi - lo <= 1e-16 * (1.0 + x.abs()) {
                    x = nx;
                    break;
                }
                x = nx;
            }
            z[0] = x;
            m[0] = m0.max(x * x);
            Projection { fallback: false }
        }
        Model::Fluid(f) => {
            let rho_min = f.rho_min;
            let mut fz = [0.0; MAX_DIM * MAX_DIM];
            if z[n - 1] >= rho_min {
                model.flux(z, &mut fz);
                let mut d = [0.0; MAX_DIM * MAX_DIM];
                for i in 0..nd * nd {
                    d[i] = fz[i] - m[i];
                }
                if linalg::max_eigenvalue(&d[..nd * nd], nd) <= 0.0 {
                    return Projection { fallback: false };
                }
            }
            let z0: Vec<f64> = z.to_vec();
            let m0: Vec<f64> = m[..nd * nd].to_vec();
            let (zs, fallback) = epigraph_newton(model, f, &z0, &m0);
            z.copy_from_slice(&zs);
            model.flux(&zs, &mut fz);
            let mut d = [0.0; MAX_DIM * MAX_DIM];
            for i in 0..nd * nd {
                d[i] = fz[i] - m0[i];
            }
            let mut plus = [0.0; MAX_DIM * MAX_DIM];
            linalg::psd_part(&d[..nd * nd], nd, &mut plus);
            for i in 0..nd * nd {
                m[i] = m0[i] + plus[i];
            }
            // remove residual rounding so F(z) <= M holds to machine precision
            for i in 0..nd * nd {
                d[i] = fz[i] - m[i];
            }
            let lam = linalg::max_eigenvalue(&d[..nd * nd], nd);
            if lam > 0.0 {
                for a in 0..nd {
                    m[a * nd + a] += lam;
                }
            }
            Projection { fallback }
        }
    }
}

/// `phi(z) = |z - z0|^2/2 + ||(F(z) - M0)_+||^2/2` and its gradient.
fn epi_phi(model: &Model, z: &[f64], z0: &[f64], m0: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let n = model.n();
    let nd = model.dim();
    let mut fz = [0.0; MAX_DIM * MAX_DIM];
    model.flux(z, &mut fz);
    let mut d = [0.0; MAX_DIM * MAX_DIM];
    for i in 0..nd * nd {
        d[i] = fz[i] - m0[i];
    }
    let mut plus = [0.0; MAX_DIM * MAX_DIM];
    linalg::psd_part(&d[..nd * nd], nd, &mut plus);
    let mut phi = 0.5 * linalg::frobenius(&plus[..nd * nd], &plus[..nd * nd]);
    for l in 0..n {
        phi += 0.5 * (z[l] - z0[l]) * (z[l] - z0[l]);
    }
    if let Some(g) = grad {
        let mut df = [0.0; MAX_DIM * MAX_DIM];
        for l in 0..n {
            model.flux_derivative(z, l, &mut df);
            g[l] = z[l] - z0[l] + linalg::frobenius(&plus[..nd * nd], &df[..nd * nd]);
        }
    }
    phi
}

/// Projected damped Newton on `phi` with a difference Hessian; gradient descent as fallback.
fn epigraph_newton(model: &Model, f: &FluidModel, z0: &[f64], m0: &[f64]) -> (Vec<f64>, bool) {
    let n = model.n();
    let rho_min = f.rho_min;
    let clamp = |z: &mut [f64]| {
        if z[n - 1] < rho_min {
            z[n - 1] = rho_min;
        }
    };
    let scale = 1.0 + z0.iter().map(|x| x.abs()).fold(0.0, f64::max) + m0.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let tol = 1e-10 * scale;
    let mut z = z0.to_vec();
    clamp(&mut z);
    let mut g = vec![0.0; n];
    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];
    let mut phi = epi_phi(model, &z, z0, m0, Some(&mut g));
    let active = |z: &[f64], g: &[f64], l: usize| l == n - 1 && z[l] <= rho_min * (1.0 + 1e-14) && g[l] > 0.0;
    let pg_norm = |z: &[f64], g: &[f64]| -> f64 {
        (0..n).filter(|&l| !active(z, g, l)).map(|l| g[l] * g[l]).sum::<f64>().sqrt()
    };
    for _ in 0..100 {
        if pg_norm(&z, &g) <= tol {
            return (z, false);
        }
        let free: Vec<usize> = (0..n).filter(|&l| !active(&z, &g, l)).collect();
        let nf = free.len();
        let mut h = [0.0; MAX_DIM * MAX_DIM];
        for (a, &l) in free.iter().enumerate() {
            let step = 1e-7 * (1.0 + z[l].abs());
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[l] += step;
            let back = if l == n - 1 { step.min(0.5 * (z[l] - 0.5 * rho_min).max(0.0)) } else { step };
            zm[l] -= back;
            epi_phi(model, &zp, z0, m0, Some(&mut gp));
            epi_phi(model, &zm, z0, m0, Some(&mut gm));
            for (b, &r) in free.iter().enumerate() {
                h[b * nf + a] = (gp[r] - gm[r]) / (step + back);
            }
        }
        for a in 0..nf {
            for b in 0..a {
                let s = 0.5 * (h[a * nf + b] + h[b * nf + a]);
                h[a * nf + b] = s;
                h[b * nf + a] = s;
            }
        }
        let mut dir: Vec<f64> = free.iter().map(|&l| -g[l]).collect();
        let ok = linalg::solve_in_place(&mut h[..nf * nf], &mut dir, nf);
        if !ok || dir.iter().any(|x| !x.is_finite()) {
            break;
        }
        let slope: f64 = free.iter().zip(&dir).map(|(&l, d)| g[l] * d).sum();
        if slope >= 0.0 {
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut zt = z.clone();
            for (a, &l) in free.iter().enumerate() {
                zt[l] += alpha * dir[a];
            }
            clamp(&mut zt);
            let mut gt = vec![0.0; n];
            let pt = epi_phi(model, &zt, z0, m0, Some(&mut gt));
            // at roundoff level in phi, accept on a smaller projected gradient
            let flat = (pt - phi).abs() <= 1e-13 * (1.0 + phi) && pg_norm(&zt, &gt) < pg_norm(&z, &g);
            if pt <= phi + 1e-4 * alpha * slope || flat {
                z = zt;
                phi = pt;
                g = gt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // no decrease at machine precision: accept if stationary enough
            if pg_norm(&z, &g) <= 1e-7 * scale {
                return (z, false);
            }
            break;
        }
    }
    if pg_norm(&z, &g) <= tol {
        return (z, false);
    }
    // projected gradient descent with backtracking
    let mut step = 1.0;
    for _ in 0..20_000 {
        if pg_norm(&z, &g) <= tol {
            break;
        }
        let mut moved = false;
        for _ in 0..60 {
            let mut zt = z.clone();
            for l in 0..n {
                zt[l] -= step * g[l];
            }
            clamp(&mut zt);
            let dec: f64 = (0..n).map(|l| g[l] * (z[l] - zt[l])).sum();
            let pt = epi_phi(model, &zt, z0, m0, None);
            if pt <= phi - 0.5 * dec.max(0.0) && pt < phi {
                z = zt;
                phi = epi_phi(model, &z, z0, m0, Some(&mut g));
                moved = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (z, true)
}

/// Cellwise `inf_z z.E + 1/2 F(z):P` over `dom F` (with `rho >= rho_min`).
/// `None` when the infimum is `-inf`; otherwise `(value, minimiser)`.
pub fn cell_dual_min(model: &Model, e: &[f64], p: &[f64]) -> Option<(f64, [f64; MAX_DIM])> {
    let mut zmin = [0.0; MAX_DIM];
    match model {
        Model::Burgers => {
            let (e, p) = (e[0], p[0]);
            if p > 0.0 {
                zmin[0] = -e / p;
                Some((-0.5 * e * e / p, zmin))
            } else if p == 0.0 && e == 0.0 {
                Some((0.0, zmin))
            } else {
                None
            }
        }
        Model::Fluid(f) => {
            let n = f.n();
            let nb = n - 1;
            let p11 = p[0];
            let pnn = p[n * n - 1];
            if p11 < 0.0 || pnn < 0.0 {
                return None;
            }
            // r = E_w + p_w with p_w the last column of P above the diagonal
            let mut r = [0.0; MAX_DIM];
            for i in 0..nb {
                r[i] = e[i] + 0.5 * (p[i * n + nb] + p[nb * n + i]);
            }
            let mut pb = [0.0; MAX_DIM * MAX_DIM];
            for i in 0..nb {
                for j in 0..nb {
                    pb[i * nb + j] = p[i * n + j];
                }
            }
            let mut vals = [0.0; MAX_DIM];
            let mut vecs = [0.0; MAX_DIM * MAX_DIM];
            linalg::sym_eigen(&pb[..nb * nb], nb, &mut vals, &mut vecs);
            let pscale = vals[..nb].iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1e-300);
            let mut quad = 0.0;
            let mut wdir = [0.0; MAX_DIM];
            for k in 0..nb {
                let c: f64 = (0..nb).map(|i| vecs[i * nb + k] * r[i]).sum();
                if vals[k] <= 1e-14 * pscale {
                    if vals[k] < -1e-14 * pscale || c.abs() > 1e-12 * (1.0 + r[..nb].iter().map(|x| x.abs()).sum::<f64>()) {
                        return None;
                    }
                    continue;
                }
                quad += c * c / vals[k];
                for i in 0..nb {
                    wdir[i] += vecs[i * nb + k] * c / vals[k];
                }
            }
            let c = e[nb] - 0.5 * quad;
            let law = &f.pressure;
            let h = |y: f64| c * y + 0.5 * p11 * law.p(y) + 0.5 * pnn * (2.0 * law.u(y) - law.p(y));
            let dh = |y: f64| c + 0.5 * p11 * law.dp(y) + 0.5 * pnn * (2.0 * law.du(y) - law.dp(y));
            let d2h = |y: f64| 0.5 * p11 * law.d2p(y) + 0.5 * pnn * (2.0 * law.d2u(y) - law.d2p(y));
            let lo0 = f.rho_min;
            let rho = if dh(lo0) >= 0.0 {
                lo0
            } else {
                let mut lo = lo0;
                let mut hi = (2.0 * lo0).max(1.0);
                let mut grow = 0;
                while dh(hi) < 0.0 {
                    lo = hi;
                    hi *= 4.0;
                    grow += 1;
                    if grow > 60 || !hi.is_finite() {
                        return None;
                    }
                }
                let mut y = 0.5 * (lo + hi);
                for _ in 0..200 {
                    let g = dh(y);
                    if g > 0.0 {
                        hi = y;
                    } else {
                        lo = y;
                    }
                    let c2 = d2h(y);
                    let mut ny = if c2 > 0.0 { y - g / c2 } else { f64::NAN };
                    if !(ny > lo && ny < hi) {
                        ny = 0.5 * (lo + hi);
                    }
                    if (ny - y).abs() <= 1e-15 * y || hi - lo <= 1e-15 * hi {
                        y = ny;
                        break;
                    }
                    y = ny;
                }
                y
            };
            for i in 0..nb {
                zmin[i] = -rho * wdir[i];
            }
            zmin[nb] = rho;
            Some((h(rho), zmin))
        }
    }
}

/// Value of `K(E, B) = sum dx dt inf_z [z.E + 1/2 F(z):(hbar I + 2B)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualEval {
    /// `-inf` when positivity fails.
    pub value: f64,
    /// First offending `(slab, cell)`.
    pub violation: Option<(usize, usize)>,
}

pub fn eval_dual_functional(model: &Model, grid: &SpaceTimeGrid, hbar: &[f64], e: &[f64], b: &[f64]) -> Result<DualEval> {
    let n = model.n();
    let nd = model.dim();
    let nx = grid.nx;
    if hbar.len() != grid.nt || e.len() != grid.nt * nx * n || b.len() != grid.nt * nx * nd * nd {
        return Err(Error::Shape("dual functional inputs do not match the grid".into()));
    }
    let per_slab: Vec<std::result::Result<f64, usize>> = (0..grid.nt)
        .into_par_iter()
        .map(|k| {
            let mut p = [0.0; MAX_DIM * MAX_DIM];
            let mut s = 0.0;
            for j in 0..nx {
                let c = k * nx + j;
                let bb = &b[c * nd * nd..(c + 1) * nd * nd];
                for i in 0..nd * nd {
                    p[i] = 2.0 * bb[i];
                }
                for a in 0..nd {
                    p[a * nd + a] += hbar[k];
                }
                match cell_dual_min(model, &e[c * n..(c + 1) * n], &p[..nd * nd]) {
                    Some((v, _)) => s += v,
                    None => return Err(j),
                }
            }
            Ok(s)
        })
        .collect();
    let cell = grid.dx() * grid.dt();
    let mut total = 0.0;
    for (k, r) in per_slab.into_iter().enumerate() {
        match r {
            Ok(s) => total += s * cell,
            Err(j) => return Ok(DualEval { value: f64::NEG_INFINITY, violation: Some((k, j)) }),
        }
    }
    Ok(DualEval { value: total, violation: None })
}

/// Everything the PDHG loop needs about the problem instance.
struct Problem<'a> {
    model: Model,
    grid: SpaceTimeGrid,
    op: ConstraintOperator,
    hbar: Vec<f64>,
    v0: &'a [f64],
}

impl Problem<'_> {
    fn sizes(&self) -> (usize, usize) {
        self.op.sizes()
    }

    /// Feasible primal point from `(z, M)`: recompute `z` from `M` and lift each slab by `c I`.
    fn restore_primal(&self, m: &[f64]) -> Option<(Vec<f64>, Vec<f64>, f64)> {
        let (ws, _) = self.sizes();
        let n = self.model.n();
        let nd = self.model.dim();
        let nx = self.grid.nx;
        let s = self.op.integrate(m);
        let mut z = vec![0.0; s.len()];
        for k in 0..self.grid.nt {
            for i in 0..ws {
                z[k * ws + i] = self.v0[i] + s[k * ws + i];
            }
        }
        let rho_min = self.model.rho_min();
        let lifts: Vec<Option<f64>> = (0..self.grid.nt)
            .into_par_iter()
            .map(|k| {
                let mut fz = [0.0; MAX_DIM * MAX_DIM];
                let mut lift: f64 = 0.0;
                for j in 0..nx {
                    let c = k * nx + j;
                    let zc = &z[c * n..(c + 1) * n];
                    if let Some(r) = rho_min {
                        if zc[n - 1] < r {
                            return None;
                        }
                    }
                    self.model.flux(zc, &mut fz);
                    let mc = &m[c * nd * nd..(c + 1) * nd * nd];
                    for i in 0..nd * nd {
                        fz[i] -= mc[i];
                    }
                    lift = lift.max(linalg::max_eigenvalue(&fz[..nd * nd], nd));
                }
                Some(lift.max(0.0))
            })
            .collect();
        let mut mm = m.to_vec();
        let mut value = 0.0;
        let cell = self.grid.dx() * self.grid.dt();
        for k in 0..self.grid.nt {
            let lift = lifts[k]?;
            let mut tr = 0.0;
            for j in 0..nx {
                let c = k * nx + j;
                let blk = &mut mm[c * nd * nd..(c + 1) * nd * nd];
                for a in 0..nd {
                    blk[a * nd + a] += lift;
                    tr += blk[a * nd + a];
                }
            }
            value += 0.5 * self.hbar[k] * tr * cell;
        }
        Some((z, mm, value))
    }

    fn dual_value_at(&self, e: &[f64], b: &[f64], theta: f64) -> f64 {
        let es: Vec<f64> = e.iter().map(|x| theta * x).collect();
        let bs: Vec<f64> = b.iter().map(|x| theta * x).collect();
        let k = match eval_dual_functional(&self.model, &self.grid, &self.hbar, &es, &bs) {
            Ok(d) => d.value,
            Err(_) => f64::NEG_INFINITY,
        };
        k - theta * self.pair_v0(e)
    }

    fn pair_v0(&self, e: &[f64]) -> f64 {
        let (ws, _) = self.sizes();
        let cell = self.grid.dx() * self.grid.dt();
        let mut s = 0.0;
        for k in 0..self.grid.nt {
            s += dot(&e[k * ws..(k + 1) * ws], self.v0);
        }
        s * cell
    }

    /// Largest `theta <= 1` keeping `hbar I + 2 theta B >= 0`, slightly inside.
    fn theta_max(&self, b: &[f64]) -> f64 {
        let nd = self.model.dim();
        let nx = self.grid.nx;
        let mut theta: f64 = 1.0;
        for k in 0..self.grid.nt {
            for j in 0..nx {
                let c = k * nx + j;
                let lam = linalg::min_eigenvalue(&b[c * nd * nd..(c + 1) * nd * nd], nd);
                if lam < 0.0 {
                    theta = theta.min(self.hbar[k] / (-2.0 * lam));
                }
            }
        }
        theta * (1.0 - 1e-9)
    }

    /// Certified dual value: scale `(E, B)` into the positivity set and line-search the concave value.
    fn restore_dual(&self, e: &[f64]) -> (f64, f64) {
        let b = self.op.b_from_e(e);
        let tmax = self.theta_max(&b);
        let f = |t: f64| self.dual_value_at(e, &b, t);
        let at_max = f(tmax);
        let (mut a, mut bnd) = (0.0, tmax);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = bnd - r * (bnd - a);
        let mut d = a + r * (bnd - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..40 {
            if fc >= fd {
                bnd = d;
                d = c;
                fd = fc;
                c = bnd - r * (bnd - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (bnd - a);
                fd = f(d);
            }
        }
        let mut best = (f(0.0), 0.0);
        for (t, v) in [(c, fc), (d, fd), (tmax, at_max)] {
            if v > best.0 {
                best = (v, t);
            }
        }
        best
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Validates `v0` for the solver: interior, above the density floor, constraint-consistent.
pub fn check_initial_data(model: &Model, ops: &SpaceOps, v0: &[f64]) -> Result<()> {
    let n = model.n();
    if v0.len() != ops.nx * n {
        return Err(Error::Shape(format!("initial slice has {} values, expected {}", v0.len(), ops.nx * n)));
    }
    for (j, c) in v0.chunks(n).enumerate() {
        if !model.in_interior(c) {
            return Err(Error::Precondition(format!("initial state at cell {j} is not interior: {c:?}")));
        }
        if let Some(r) = model.rho_min() {
            if c[n - 1] < r {
                return Err(Error::Precondition(format!(
                    "initial density {} at cell {j} is below rho_min = {r}",
                    c[n - 1]
                )));
            }
        }
    }
    if model.z() > 0 {
        let mut c = vec![0.0; ops.nx * model.z()];
        model.lc_apply(ops, v0, &mut c);
        let worst = c.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let scale = v0.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1.0);
        if worst > 1e-6 * scale {
            return Err(Error::Precondition(format!("initial data violate the linear constraint by {worst:.3e}")));
        }
    }
    Ok(())
}

/// Result of a solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub primal: PrimalPair,
    pub dual: DualPair,
    pub report: DualReport,
}

/// PDHG on the slab discretisation.
pub fn solve(model: &Model, grid: &SpaceTimeGrid, weight: &WeightProfile, v0: &[f64], cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    if (weight.horizon - grid.t_final).abs() > 1e-12 * grid.t_final {
        return Err(Error::Config(format!(
            "weight horizon {} differs from the grid final time {}",
            weight.horizon, grid.t_final
        )));
    }
    solve_weighted(model, grid, &weight.h_slab_means(grid), v0, cfg)
}

/// As [`solve`] with explicit slab means of the weight (positive, one per slab).
pub fn solve_weighted(model: &Model, grid: &SpaceTimeGrid, hbar: &[f64], v0: &[f64], cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    if hbar.len() != grid.nt || hbar.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
        return Err(Error::Config("weight slab means must be positive, one per slab".into()));
    }
    let op = ConstraintOperator::new(model, grid, cfg.order)?;
    check_initial_data(model, &op.ops, v0)?;
    let n = model.n();
    let nd = model.dim();
    let nx = grid.nx;
    let nt = grid.nt;
    // structural check L(I) = 0 on one level
    {
        let mut id = vec![0.0; nx * nd * nd];
        for j in 0..nx {
            for a in 0..nd {
                id[j * nd * nd + a * nd + a] = 1.0;
            }
        }
        let mut out = vec![0.0; nx * n];
        model.l_apply(&op.ops, &id, &mut out);
        if out.iter().any(|&x| x != 0.0) {
            return Err(Error::Internal("L(I) != 0 for this model".into()));
        }
    }
    let prob = Problem { model: *model, grid: *grid, op: op.clone(), hbar: hbar.to_vec(), v0 };
    let (ws, wm) = prob.sizes();

    let norm = op.norm_estimate(cfg.power_iterations, cfg.seed).max(1e-12);
    let tau = cfg.tau.unwrap_or(0.95 / (norm * cfg.primal_weight));
    let sigma = cfg.sigma.unwrap_or(0.95 * cfg.primal_weight / norm);
    if tau * sigma * norm * norm > 1.0 + 1e-12 {
        return Err(Error::Config(format!(
            "step sizes violate tau sigma ||A||^2 <= 1 ({:.4})",
            tau * sigma * norm * norm
        )));
    }

    // warm start: z = v0, M = F(v0) on every slab, E = 0
    let mut z = vec![0.0; nt * ws];
    let mut m = vec![0.0; nt * wm];
    for k in 0..nt {
        z[k * ws..(k + 1) * ws].copy_from_slice(v0);
        for j in 0..nx {
            let c = k * nx + j;
            model.flux(&v0[j * n..(j + 1) * n], &mut m[c * nd * nd..(c + 1) * nd * nd]);
        }
    }
    let mut y = vec![0.0; nt * ws];
    // objective gradient in M: hbar/2 I per cell
    let mut cgrad = vec![0.0; nt * wm];
    for k in 0..nt {
        for j in 0..nx {
            let c = k * nx + j;
            for a in 0..nd {
                cgrad[c * nd * nd + a * nd + a] = 0.5 * prob.hbar[k];
            }
        }
    }

    let mut history = Vec::new();
    let mut fallbacks = 0usize;
    let mut restarts = 0usize;
    let mut avg_z = z.clone();
    let mut avg_m = m.clone();
    let mut avg_y = y.clone();
    let mut avg_count = 0.0;
    let mut last_restart_gap = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut best_primal: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut best_dual: Option<(f64, Vec<f64>)> = None;

    let evaluate = |z_: &[f64], m_: &[f64], y_: &[f64]| -> (Option<(Vec<f64>, Vec<f64>, f64)>, (f64, f64), f64) {
        let primal = prob.restore_primal(m_);
        let dual = prob.restore_dual(y_);
        let ax = op.apply(z_, m_);
        let feas = ax
            .chunks(ws)
            .flat_map(|s| s.iter().zip(v0).map(|(a, b)| (a - b).abs()))
            .fold(0.0_f64, f64::max);
        (primal, dual, feas)
    };

    for it in 1..=cfg.max_iterations {
        iterations = it;
        // primal step
        let (_, bt) = op.apply_transpose(&y);
        let mut zn = z.clone();
        let mut mn = m.clone();
        for i in 0..zn.len() {
            zn[i] -= tau * y[i];
        }
        for i in 0..mn.len() {
            mn[i] -= tau * (cgrad[i] + bt[i]);
        }
        let fb: usize = zn
            .par_chunks_mut(n)
            .zip(mn.par_chunks_mut(nd * nd))
            .map(|(zc, mc)| usize::from(project_epigraph(model, zc, mc).fallback))
            .sum();
        fallbacks += fb;
        // dual step with extrapolation
        let zbar: Vec<f64> = zn.iter().zip(&z).map(|(a, b)| 2.0 * a - b).collect();
        let mbar: Vec<f64> = mn.iter().zip(&m).map(|(a, b)| 2.0 * a - b).collect();
        let ax = op.apply(&zbar, &mbar);
        for k in 0..nt {
            for i in 0..ws {
                y[k * ws + i] += sigma * (ax[k * ws + i] - v0[i]);
            }
        }
        z = zn;
        m = mn;
        // running average since the last restart
        avg_count += 1.0;
        let w = 1.0 / avg_count;
        for (a, b) in avg_z.iter_mut().zip(&z) {
            *a += w * (b - *a);
        }
        for (a, b) in avg_m.iter_mut().zip(&m) {
            *a += w * (b - *a);
        }
        for (a, b) in avg_y.iter_mut().zip(&y) {
            *a += w * (b - *a);
        }

        if it % cfg.record_every == 0 || it == cfg.max_iterations {
            let mut candidates = vec![(z.clone(), m.clone(), y.clone(), false)];
            if cfg.restarts && avg_count > 1.0 {
                candidates.push((avg_z.clone(), avg_m.clone(), avg_y.clone(), true));
            }
            let mut round_best: Option<(f64, usize)> = None;
            for (idx, (cz, cm, cy, averaged)) in candidates.iter().enumerate() {
                let (primal, (jval, theta), feas) = evaluate(cz, cm, cy);
                let ival = primal.as_ref().map(|p| p.2).unwrap_or(f64::INFINITY);
                history.push(IterRecord {
                    iteration: it,
                    primal: ival,
                    dual: jval,
                    gap: ival - jval,
                    feasibility: feas,
                    averaged: *averaged,
                });
                if let Some((zp, mp, iv)) = primal {
                    if best_primal.as_ref().is_none_or(|b| iv < b.0) {
                        best_primal = Some((iv, zp, mp));
                    }
                }
                if best_dual.as_ref().is_none_or(|b| jval > b.0) {
                    best_dual = Some((jval, cy.iter().map(|x| theta * x).collect()));
                }
                let g = ival - jval;
                if round_best.is_none_or(|r| g < r.0) {
                    round_best = Some((g, idx));
                }
            }
            // restart to the average when it certifies a much smaller gap
            if let Some((g, idx)) = round_best {
                if candidates[idx].3 && (g <= 0.5 * last_restart_gap || !last_restart_gap.is_finite()) {
                    z = avg_z.clone();
                    m = avg_m.clone();
                    y = avg_y.clone();
                    restarts += 1;
                    last_restart_gap = g;
                    avg_count = 0.0;
                }
                if !candidates[idx].3 && g <= 0.5 * last_restart_gap {
                    last_restart_gap = g;
                }
            }
            let bi = best_primal.as_ref().map(|b| b.0).unwrap_or(f64::INFINITY);
            let bj = best_dual.as_ref().map(|b| b.0).unwrap_or(f64::NEG_INFINITY);
            if bi - bj <= cfg.gap_rel * bi.abs().max(1e-300) || bi - bj <= 0.0 {
                converged = true;
                break;
            }
        }
    }

    let (ival, zf, mf) = best_primal.unwrap_or((f64::INFINITY, z.clone(), m.clone()));
    let (jval, ef) = best_dual.unwrap_or((f64::NEG_INFINITY, y.clone()));
    let bf = op.b_from_e(&ef);
    // residual diagnostics on the last raw iterate
    let ax = op.apply(&z, &m);
    let constraint_residual = ax
        .chunks(ws)
        .flat_map(|s| s.iter().zip(v0).map(|(a, b)| (a - b).abs()))
        .fold(0.0_f64, f64::max);
    let mut cone_residual: f64 = 0.0;
    let mut fz = [0.0; MAX_DIM * MAX_DIM];
    for c in 0..nt * nx {
        let zc = &z[c * n..(c + 1) * n];
        if model.in_domain(zc) {
            model.flux(zc, &mut fz);
            for i in 0..nd * nd {
                fz[i] -= m[c * nd * nd + i];
            }
            cone_residual = cone_residual.max(linalg::max_eigenvalue(&fz[..nd * nd], nd));
        }
    }
    let v_nodes = op.node_values(v0, &mf);
    let zfield = StateField { layout: TimeLayout::Slabs, levels: nt, nx, n, data: zf };
    let mfield = MatrixField { layout: TimeLayout::Slabs, levels: nt, nx, dim: nd, data: mf };
    let timeline = matrix_entropy(grid, &mfield);
    let gap = ival - jval;
    let report = DualReport {
        primal_value: ival,
        dual_value: jval,
        gap,
        rel_gap: gap / ival.abs().max(1e-300),
        constraint_residual,
        cone_residual: cone_residual.max(0.0),
        iterations,
        converged,
        restarts,
        op_norm: norm,
        tau,
        sigma,
        projection_fallbacks: fallbacks,
        entropy_timeline: timeline,
        history,
    };
    Ok(Solution {
        primal: PrimalPair { v_nodes, z: zfield, m: mfield },
        dual: DualPair {
            e: StateField { layout: TimeLayout::Slabs, levels: nt, nx, n, data: ef },
            b: MatrixField { layout: TimeLayout::Slabs, levels: nt, nx, dim: nd, data: bf },
        },
        report,
    })
}

/// Subsolution entropy `1/2 int tr M dx` per level.
pub fn matrix_entropy(grid: &SpaceTimeGrid, m: &MatrixField) -> EntropyTimeline {
    let nd = m.dim;
    let k: Vec<f64> = (0..m.levels)
        .map(|l| {
            let s: f64 = m.slice(l).chunks(nd * nd).map(|b| linalg::trace(b, nd)).sum();
            0.5 * s * grid.dx()
        })
        .collect();
    let times = (0..m.levels).map(|l| grid.time_of(m.layout, l)).collect();
    EntropyTimeline { layout: m.layout, times, k }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::pressure::PressureLaw;

    #[test]
    fn burgers_projection_examples() {
        let m = Model::burgers();
        let (mut z, mut mm) = ([0.0], [-1.0]);
        project_epigraph(&m, &mut z, &mut mm);
        assert!(z[0].abs() < 1e-15 && mm[0].abs() < 1e-15);
        let (mut z, mut mm) = ([1.0], [1.0]);
        project_epigraph(&m, &mut z, &mut mm);
        assert_eq!((z[0], mm[0]), (1.0, 1.0));
        // dense-scan oracle for an off-boundary point
        let (z0, m0) = (1.3, 0.2);
        let (mut z, mut mm) = ([z0], [m0]);
        project_epigraph(&m, &mut z, &mut mm);
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=200_000 {
            let x = -2.0 + 4.0 * i as f64 / 200_000.0;
            let mx = m0.max(x * x);
            let d = (x - z0).powi(2) + (mx - m0).powi(2);
            if d < best.0 {
                best = (d, x);
            }
        }
        assert!((z[0] - best.1).abs() < 1e-4);
    }

    #[test]
    fn fluid_projection_is_feasible_and_optimal() {
        let model = Model::barotropic(PressureLaw::log(), 1e-3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let z0 = [rng.gen_range(-1.0..1.0), rng.gen_range(0.1..2.0)];
            let m0 = [rng.gen_range(-1.0..1.0), 0.3, 0.3, rng.gen_range(-1.0..1.0)];
            let (mut z, mut m) = (z0, m0);
            project_epigraph(&model, &mut z, &mut m);
            let f = model.flux_checked(&z).unwrap();
            let d: Vec<f64> = f.iter().zip(&m).map(|(a, b)| a - b).collect();
            assert!(linalg::max_eigenvalue(&d, 2) <= 1e-12);
            let dist = |z: &[f64], m: &[f64]| -> f64 {
                z.iter().zip(&z0).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                    + m.iter().zip(&m0).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            };
            let best = dist(&z, &m);
            // random feasible competitors are never closer
            for _ in 0..200 {
                let zc = [z[0] + rng.gen_range(-0.2..0.2), (z[1] + rng.gen_range(-0.2..0.2)).max(1e-3)];
                let fc = model.flux_checked(&zc).unwrap();
                let dc: Vec<f64> = fc.iter().zip(&m0).map(|(a, b)| a - b).collect();
                let mut plus = [0.0; 4];
                linalg::psd_part(&dc, 2, &mut plus);
                let mc: Vec<f64> = m0.iter().zip(&plus).map(|(a, b)| a + b).collect();
                assert!(dist(&zc, &mc) >= best - 1e-9);
            }
        }
    }

    #[test]
    fn burgers_dual_functional_closed_form() {
        let g = SpaceTimeGrid::new(4, 4, 1.0).unwrap();
        let hbar = vec![1.0; 4];
        let b = vec![0.0; 16];
        let e = vec![1.0; 16];
        let d = eval_dual_functional(&Model::burgers(), &g, &hbar, &e, &b).unwrap();
        assert!((d.value + 0.5).abs() < 1e-14);
        let bad_b = vec![-1.0; 16];
        let d = eval_dual_functional(&Model::burgers(), &g, &hbar, &e, &bad_b).unwrap();
        assert_eq!(d.value, f64::NEG_INFINITY);
        assert_eq!(d.violation, Some((0, 0)));
    }

    #[test]
    fn fluid_cell_min_matches_scan() {
        let model = Model::barotropic(PressureLaw::log(), 1e-3).unwrap();
        let e = [0.3, -0.7];
        let p = [1.2, 0.1, 0.1, 0.8];
        let (v, z) = cell_dual_min(&model, &e, &p).unwrap();
        let obj = |w: f64, r: f64| {
            let f = model.flux_checked(&[w, r]).unwrap();
            w * e[0] + r * e[1] + 0.5 * linalg::frobenius(&f, &p)
        };
        assert!((obj(z[0], z[1]) - v).abs() < 1e-12);
        let mut best = f64::INFINITY;
        for i in 0..400 {
            for j in 1..400 {
                best = best.min(obj(-2.0 + 4.0 * i as f64 / 400.0, 3.0 * j as f64 / 400.0));
            }
        }
        assert!(v <= best + 1e-12 && v >= best - 1e-3);
    }

    #[test]
    fn operator_adjointness() {
        for model in [Model::burgers(), Model::qhd(PressureLaw::log(), 1e-3).unwrap()] {
            let g = SpaceTimeGrid::new(16, 8, 0.3).unwrap();
            let op = ConstraintOperator::new(&model, &g, 2).unwrap();
            assert!(op.adjointness_probe(3) <= 1e-12);
        }
    }

    #[test]
    fn trivial_solve() {
        let g = SpaceTimeGrid::new(16, 8, 0.5).unwrap();
        let w = WeightProfile::unit(0.5).unwrap();
        let sol = solve(&Model::burgers(), &g, &w, &vec![0.0; 16], &SolverConfig::default()).unwrap();
        assert!(sol.report.converged);
        assert_eq!(sol.report.primal_value, 0.0);
        assert_eq!(sol.report.dual_value, 0.0);
    }
}
