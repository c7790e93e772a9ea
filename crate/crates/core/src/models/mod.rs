//! Concrete models in one space dimension.
//!
//! Every model is written as `d_t v = L F(v)` with a linear constraint
//! `l v = 0`. The three fluid systems share the flux template
//! `F(z) = z z^T / rho + P(rho) e_1 e_1^T + (2U - P - rho) e_N e_N^T`
//! where `rho` is the last component of `z`.
//!
//! Discrete operators: first derivatives use the periodic stencil `D` and
//! second derivatives use `D D`, which keeps `l L = 0` and makes `L*` the
//! exact transpose of `L` in the cellwise Euclidean product.

pub mod manufacture;
pub mod pressure;

use crate::error::{Error, Result};
use crate::grid::SpaceOps;
use crate::linalg::{self, MAX_DIM};
use crate::series::TrigSeries;
use pressure::PressureLaw;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FluidKind {
    Barotropic,
    Qhd,
    /// Euler-Korteweg with capillarity exponent `s`; `nu = (s + 3) / 2`.
    Korteweg { s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluidModel {
    pub kind: FluidKind,
    pub pressure: PressureLaw,
    pub rho_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Model {
    Burgers,
    Fluid(FluidModel),
}

impl FluidModel {
    pub fn nu(&self) -> f64 {
        match self.kind {
            FluidKind::Korteweg { s } => 0.5 * (s + 3.0),
            _ => 1.0,
        }
    }

    pub fn n(&self) -> usize {
        match self.kind {
            FluidKind::Barotropic => 2,
            FluidKind::Qhd => 3,
            FluidKind::Korteweg { .. } => 4,
        }
    }
}

impl Model {
    pub fn burgers() -> Self {
        Model::Burgers
    }

    pub fn barotropic(pressure: PressureLaw, rho_min: f64) -> Result<Self> {
        Self::fluid(FluidKind::Barotropic, pressure, rho_min)
    }

    pub fn qhd(pressure: PressureLaw, rho_min: f64) -> Result<Self> {
        Self::fluid(FluidKind::Qhd, pressure, rho_min)
    }

    /// Euler-Korteweg with `P = rho^(s+2) / 2`; pass `offset` to override the
    /// automatically normalised energy constant.
    pub fn korteweg(s: f64, rho_min: f64, offset: Option<f64>) -> Result<Self> {
        let mut p = PressureLaw::korteweg(s)?;
        if let Some(o) = offset {
            p = p.with_offset(o);
        }
        Self::fluid(FluidKind::Korteweg { s }, p, rho_min)
    }

    pub fn fluid(kind: FluidKind, pressure: PressureLaw, rho_min: f64) -> Result<Self> {
        if !(rho_min > 0.0 && rho_min.is_finite()) {
            return Err(Error::Config(format!("rho_min must be positive, got {rho_min}")));
        }
        if let FluidKind::Korteweg { s } = kind {
            if !(s > -1.0 && s <= 1.0) {
                return Err(Error::Config(format!("capillarity exponent s must lie in (-1, 1], got {s}")));
            }
        }
        pressure.validate()?;
        let m = Model::Fluid(FluidModel { kind, pressure, rho_min });
        m.check_flux_derivatives()?;
        Ok(m)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Burgers => "burgers",
            Model::Fluid(f) => match f.kind {
                FluidKind::Barotropic => "barotropic",
                FluidKind::Qhd => "qhd",
                FluidKind::Korteweg { .. } => "korteweg",
            },
        }
    }

    /// State dimension `n`.
    pub fn n(&self) -> usize {
        match self {
            Model::Burgers => 1,
            Model::Fluid(f) => f.n(),
        }
    }

    /// Matrix dimension `N` (equal to `n` for every model here).
    pub fn dim(&self) -> usize {
        self.n()
    }

    /// Constraint dimension `Z`.
    pub fn z(&self) -> usize {
        match self {
            Model::Fluid(FluidModel { kind: FluidKind::Barotropic, .. }) => 0,
            _ => 1,
        }
    }

    pub fn rho_min(&self) -> Option<f64> {
        match self {
            Model::Burgers => None,
            Model::Fluid(f) => Some(f.rho_min),
        }
    }

    pub fn labels(&self) -> &'static [&'static str] {
        match self {
            Model::Burgers => &["v"],
            Model::Fluid(f) => match f.kind {
                FluidKind::Barotropic => &["q", "rho"],
                FluidKind::Qhd => &["q", "G", "rho"],
                FluidKind::Korteweg { .. } => &["q", "G", "xi", "rho"],
            },
        }
    }

    pub fn sharp_labels(&self) -> &'static [&'static str] {
        match self {
            Model::Burgers => &["v"],
            Model::Fluid(f) => match f.kind {
                FluidKind::Barotropic => &["u", "zeta"],
                FluidKind::Qhd => &["u", "lambda", "zeta"],
                FluidKind::Korteweg { .. } => &["u", "lambda", "w", "zeta"],
            },
        }
    }

    pub fn in_domain(&self, v: &[f64]) -> bool {
        match self {
            Model::Burgers => v[0].is_finite(),
            Model::Fluid(_) => {
                let rho = v[v.len() - 1];
                v.iter().all(|x| x.is_finite()) && (rho > 0.0 || v.iter().all(|&x| x == 0.0))
            }
        }
    }

    pub fn in_interior(&self, v: &[f64]) -> bool {
        match self {
            Model::Burgers => v[0].is_finite(),
            Model::Fluid(_) => v.iter().all(|x| x.is_finite()) && v[v.len() - 1] > 0.0,
        }
    }

    /// `F(v)` into `out` (row-major `N x N`). The caller guarantees `v` in dom F.
    pub fn flux(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Model::Burgers => out[0] = v[0] * v[0],
            Model::Fluid(f) => {
                let n = f.n();
                let rho = v[n - 1];
                out[..n * n].fill(0.0);
                if rho == 0.0 {
                    out[n * n - 1] = 2.0 * f.pressure.u(0.0);
                    return;
                }
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = v[i] * v[j] / rho;
                    }
                }
                out[0] += f.pressure.p(rho);
                out[n * n - 1] += f.pressure.g(rho);
            }
        }
    }

    pub fn flux_checked(&self, v: &[f64]) -> Result<Vec<f64>> {
        if !self.in_domain(v) {
            return Err(Error::domain("state", format!("{v:?} outside dom F")));
        }
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        self.flux(v, &mut out);
        Ok(out)
    }

    /// `d F / d v_l` at an interior point.
    pub fn flux_derivative(&self, v: &[f64], l: usize, out: &mut [f64]) {
        match self {
            Model::Burgers => out[0] = 2.0 * v[0],
            Model::Fluid(f) => {
                let n = f.n();
                let rho = v[n - 1];
                out[..n * n].fill(0.0);
                for i in 0..n {
                    out[l * n + i] += v[i] / rho;
                    out[i * n + l] += v[i] / rho;
                }
                if l == n - 1 {
                    let r2 = rho * rho;
                    for i in 0..n {
                        for j in 0..n {
                            out[i * n + j] -= v[i] * v[j] / r2;
                        }
                    }
                    let dp = f.pressure.dp(rho);
                    out[0] += dp;
                    out[n * n - 1] += 2.0 * f.pressure.du(rho) - dp - 1.0;
                }
            }
        }
    }

    /// Entropy `K(v) = tr F(v) / 2`; `+inf` outside dom F.
    pub fn entropy(&self, v: &[f64]) -> f64 {
        match self {
            Model::Burgers => 0.5 * v[0] * v[0],
            Model::Fluid(f) => {
                let n = f.n();
                let rho = v[n - 1];
                if !self.in_domain(v) {
                    return f64::INFINITY;
                }
                if rho == 0.0 {
                    return f.pressure.u(0.0);
                }
                let kin: f64 = v[..n - 1].iter().map(|x| x * x).sum();
                0.5 * kin / rho + f.pressure.u(rho)
            }
        }
    }

    /// Sharp vector `grad K(v)` for interior `v`.
    pub fn sharp_cell(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Model::Burgers => out[0] = v[0],
            Model::Fluid(f) => {
                let n = f.n();
                let rho = v[n - 1];
                let mut kin = 0.0;
                for i in 0..n - 1 {
                    out[i] = v[i] / rho;
                    kin += v[i] * v[i];
                }
                out[n - 1] = -0.5 * kin / (rho * rho) + f.pressure.du(rho);
            }
        }
    }

    pub fn sharp(&self, v: &[f64]) -> Result<Vec<f64>> {
        if !self.in_interior(v) {
            return Err(Error::domain("state", format!("{v:?} is not an interior point")));
        }
        let mut out = vec![0.0; self.n()];
        self.sharp_cell(v, &mut out);
        Ok(out)
    }

    /// Inverse of the sharp map.
    pub fn unsharp(&self, s: &[f64]) -> Result<Vec<f64>> {
        match self {
            Model::Burgers => Ok(vec![s[0]]),
            Model::Fluid(f) => {
                let n = f.n();
                if s.len() != n || s.iter().any(|x| !x.is_finite()) {
                    return Err(Error::domain("sharp vector", format!("{s:?} is not a finite {n}-vector")));
                }
                let kin: f64 = s[..n - 1].iter().map(|x| x * x).sum();
                let rho = f.pressure.inv_du(s[n - 1] + 0.5 * kin).ok_or_else(|| {
                    Error::domain("sharp vector", format!("{s:?} is outside the range of grad K"))
                })?;
                let mut v: Vec<f64> = s[..n - 1].iter().map(|x| x * rho).collect();
                v.push(rho);
                Ok(v)
            }
        }
    }

    /// `L M` on one time level: `m` holds `nx` row-major `N x N` blocks, `out` holds `nx * n`.
    pub fn l_apply(&self, ops: &SpaceOps, m: &[f64], out: &mut [f64]) {
        let nx = ops.nx;
        let nd = self.dim();
        let e = |a: usize, b: usize| sym_entry(m, nx, nd, a, b);
        let neg_d = |u: &[f64]| -> Vec<f64> { ops.d(u).into_iter().map(|x| -x).collect() };
        let comps: Vec<Vec<f64>> = match self {
            Model::Burgers => vec![ops.d(&e(0, 0)).into_iter().map(|x| -0.5 * x).collect()],
            Model::Fluid(f) => match f.kind {
                FluidKind::Barotropic => vec![neg_d(&e(0, 0)), neg_d(&e(0, 1))],
                FluidKind::Qhd => {
                    let dxi = ops.d(&e(0, 0));
                    let dups = ops.d(&e(1, 1));
                    let ddr = ops.dd(&e(1, 2));
                    let g = e(0, 2);
                    let q: Vec<f64> = (0..nx).map(|j| -dxi[j] - dups[j] + ddr[j]).collect();
                    let gg: Vec<f64> = ops.dd(&g).into_iter().map(|x| -x).collect();
                    vec![q, gg, neg_d(&g)]
                }
                FluidKind::Korteweg { .. } => {
                    let nu = f.nu();
                    let dxi = ops.d(&e(0, 0));
                    let dups = ops.d(&e(1, 1));
                    let dal = ops.d(&e(2, 2));
                    let ddb = ops.dd(&e(1, 2));
                    let a = e(0, 2);
                    let gam = e(0, 1);
                    let dda = ops.dd(&a);
                    let da = ops.d(&a);
                    let dgam = ops.d(&gam);
                    let q: Vec<f64> = (0..nx)
                        .map(|j| -dxi[j] - dups[j] - (nu - 1.0) * dal[j] + nu * ddb[j] + (1.0 - nu) * dups[j])
                        .collect();
                    let gg: Vec<f64> = (0..nx).map(|j| -nu * dda[j] + (nu - 1.0) * dgam[j]).collect();
                    let xi: Vec<f64> = (0..nx).map(|j| -nu * da[j] + (nu - 1.0) * gam[j]).collect();
                    vec![q, gg, xi, neg_d(&e(0, 3))]
                }
            },
        };
        scatter(&comps, nx, out);
    }

    /// `L* a` on one time level, written as symmetric matrices.
    pub fn lstar_apply(&self, ops: &SpaceOps, a: &[f64], out: &mut [f64]) {
        let nx = ops.nx;
        let n = self.n();
        let nd = self.dim();
        out[..nx * nd * nd].fill(0.0);
        let c = |i: usize| gather(a, nx, n, i);
        // -D^T and its square; D^T is applied as the exact transpose
        let mdt = |u: &[f64]| -> Vec<f64> { ops.dt(u).into_iter().map(|x| -x).collect() };
        match self {
            Model::Burgers => {
                let v: Vec<f64> = ops.dt(&c(0)).into_iter().map(|x| -0.5 * x).collect();
                add_sym(out, nx, nd, 0, 0, &v, 1.0);
            }
            Model::Fluid(f) => match f.kind {
                FluidKind::Barotropic => {
                    add_sym(out, nx, nd, 0, 0, &mdt(&c(0)), 1.0);
                    add_sym(out, nx, nd, 0, 1, &mdt(&c(1)), 0.5);
                }
                FluidKind::Qhd => {
                    let eta = c(0);
                    let meta = mdt(&eta);
                    add_sym(out, nx, nd, 0, 0, &meta, 1.0);
                    add_sym(out, nx, nd, 1, 1, &meta, 1.0);
                    add_sym(out, nx, nd, 1, 2, &ops.dtdt(&eta), 0.5);
                    let a02: Vec<f64> = ops
                        .dtdt(&c(1))
                        .iter()
                        .zip(ops.dt(&c(2)))
                        .map(|(x, y)| -x - y)
                        .collect();
                    add_sym(out, nx, nd, 0, 2, &a02, 0.5);
                }
                FluidKind::Korteweg { .. } => {
                    let nu = f.nu();
                    let (eta, ups, pi, th) = (c(0), c(1), c(2), c(3));
                    let meta = mdt(&eta);
                    add_sym(out, nx, nd, 0, 0, &meta, 1.0);
                    add_sym(out, nx, nd, 1, 1, &meta, nu);
                    add_sym(out, nx, nd, 2, 2, &meta, nu - 1.0);
                    add_sym(out, nx, nd, 1, 2, &ops.dtdt(&eta), 0.5 * nu);
                    let a02: Vec<f64> = ops.dtdt(&ups).iter().zip(ops.dt(&pi)).map(|(x, y)| -x - y).collect();
                    add_sym(out, nx, nd, 0, 2, &a02, 0.5 * nu);
                    let a01: Vec<f64> = ops.dt(&ups).iter().zip(&pi).map(|(x, y)| x + y).collect();
                    add_sym(out, nx, nd, 0, 1, &a01, 0.5 * (nu - 1.0));
                    add_sym(out, nx, nd, 0, 3, &mdt(&th), 0.5);
                }
            },
        }
    }

    /// Constraint `l v` on one time level (`nx * Z` values).
    pub fn lc_apply(&self, ops: &SpaceOps, v: &[f64], out: &mut [f64]) {
        let nx = ops.nx;
        let n = self.n();
        match self {
            Model::Burgers => {
                let m = v[..nx].iter().sum::<f64>() / nx as f64;
                out[..nx].fill(m);
            }
            Model::Fluid(f) => match f.kind {
                FluidKind::Barotropic => {}
                FluidKind::Qhd | FluidKind::Korteweg { .. } => {
                    // rho for QHD, xi for Korteweg; both sit at index 2
                    let d = ops.d(&gather(v, nx, n, 2));
                    for j in 0..nx {
                        out[j] = d[j] - v[j * n + 1];
                    }
                }
            },
        }
    }

    /// Adjoint constraint `l* w` on one time level (`nx * n` values).
    pub fn lcstar_apply(&self, ops: &SpaceOps, w: &[f64], out: &mut [f64]) {
        let nx = ops.nx;
        let n = self.n();
        out[..nx * n].fill(0.0);
        match self {
            Model::Burgers => {
                let m = w[..nx].iter().sum::<f64>() / nx as f64;
                out[..nx].fill(m);
            }
            Model::Fluid(f) => match f.kind {
                FluidKind::Barotropic => {}
                FluidKind::Qhd | FluidKind::Korteweg { .. } => {
                    let dt = ops.dt(&w[..nx]);
                    for j in 0..nx {
                        out[j * n + 1] = -w[j];
                        out[j * n + 2] = dt[j];
                    }
                }
            },
        }
    }

    /// Index of the component whose sharp equation isolates the multiplier.
    pub fn multiplier_component(&self) -> Option<usize> {
        match self {
            Model::Fluid(FluidModel { kind: FluidKind::Qhd | FluidKind::Korteweg { .. }, .. }) => Some(1),
            _ => None,
        }
    }

    /// Builds a grid slice from named trig series. Derived components
    /// (`G`, `xi`) are computed so the discrete constraint holds exactly.
    pub fn initial_slice(&self, ops: &SpaceOps, comps: &[(String, TrigSeries)]) -> Result<Vec<f64>> {
        let nx = ops.nx;
        let xs: Vec<f64> = (0..nx).map(|j| (j as f64 + 0.5) / nx as f64).collect();
        let find = |names: &[&str]| comps.iter().find(|(k, _)| names.contains(&k.as_str())).map(|c| c.1.sample(&xs));
        let allowed: &[&str] = match self {
            Model::Burgers => &["", "v"],
            Model::Fluid(f) => match f.kind {
                FluidKind::Barotropic => &["q", "rho"],
                FluidKind::Qhd => &["q", "rho", "G"],
                FluidKind::Korteweg { .. } => &["q", "rho", "G", "xi"],
            },
        };
        for (k, _) in comps {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown component '{k}' for model {}", self.name())));
            }
        }
        let n = self.n();
        let mut out = vec![0.0; nx * n];
        match self {
            Model::Burgers => {
                let v = find(&["", "v"]).ok_or_else(|| Error::Config("missing component v".into()))?;
                out.copy_from_slice(&v);
            }
            Model::Fluid(f) => {
                let q = find(&["q"]).unwrap_or_else(|| vec![0.0; nx]);
                let rho = find(&["rho"]).ok_or_else(|| Error::Config("missing component rho".into()))?;
                let derived_base = match f.kind {
                    FluidKind::Korteweg { .. } => {
                        let nu = f.nu();
                        match find(&["xi"]) {
                            Some(x) => x,
                            None => rho.iter().map(|r| r.max(0.0).powf(nu)).collect(),
                        }
                    }
                    _ => rho.clone(),
                };
                let g = match find(&["G"]) {
                    Some(g) => g,
                    None => ops.d(&derived_base),
                };
                for j in 0..nx {
                    let c = &mut out[j * n..(j + 1) * n];
                    c[0] = q[j];
                    c[n - 1] = rho[j];
                    match f.kind {
                        FluidKind::Barotropic => {}
                        FluidKind::Qhd => c[1] = g[j],
                        FluidKind::Korteweg { .. } => {
                            c[1] = g[j];
                            c[2] = derived_base[j];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Cross-checks the analytic `dF` against centred differences at sample points.
    fn check_flux_derivatives(&self) -> Result<()> {
        let n = self.n();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut fp = [0.0; MAX_DIM * MAX_DIM];
        let mut fm = [0.0; MAX_DIM * MAX_DIM];
        let mut d = [0.0; MAX_DIM * MAX_DIM];
        for _ in 0..8 {
            let v = self.random_state(&mut rng);
            for l in 0..n {
                let h = 1e-6 * (1.0 + v[l].abs());
                let mut vp = v.clone();
                let mut vm = v.clone();
                vp[l] += h;
                vm[l] -= h;
                self.flux(&vp, &mut fp);
                self.flux(&vm, &mut fm);
                self.flux_derivative(&v, l, &mut d);
                for i in 0..n * n {
                    let fd = (fp[i] - fm[i]) / (2.0 * h);
                    if (fd - d[i]).abs() > 1e-5 * (1.0 + d[i].abs()) {
                        return Err(Error::Internal(format!(
                            "{}: dF/dv{l} entry {i} analytic {} vs difference {fd}",
                            self.name(),
                            d[i]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Random interior state: density in `[max(rho_min, 0.2), 3]`, other components in `[-2, 2]`.
    pub fn random_state(&self, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            Model::Burgers => vec![rng.gen_range(-3.0..3.0)],
            Model::Fluid(f) => {
                let n = f.n();
                let mut v: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
                v.push(rng.gen_range(f.rho_min.max(0.2)..3.0));
                v
            }
        }
    }
}

/// Most negative eigenvalue of `(F(v1) + F(v2)) / 2 - F((v1 + v2) / 2)` over seeded random pairs.
pub fn lowner_convexity_probe(model: &Model, trials: usize, seed: u64) -> f64 {
    let n = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f1 = [0.0; MAX_DIM * MAX_DIM];
    let mut f2 = [0.0; MAX_DIM * MAX_DIM];
    let mut fm = [0.0; MAX_DIM * MAX_DIM];
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let a = model.random_state(&mut rng);
        let b = model.random_state(&mut rng);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        model.flux(&a, &mut f1);
        model.flux(&b, &mut f2);
        model.flux(&mid, &mut fm);
        let mut gap = [0.0; MAX_DIM * MAX_DIM];
        for i in 0..n * n {
            gap[i] = 0.5 * (f1[i] + f2[i]) - fm[i];
        }
        worst = worst.min(linalg::min_eigenvalue(&gap[..n * n], n));
    }
    worst
}

/// Component `c` of an interleaved `nx * n` slice.
pub fn gather(v: &[f64], nx: usize, n: usize, c: usize) -> Vec<f64> {
    (0..nx).map(|j| v[j * n + c]).collect()
}

fn scatter(comps: &[Vec<f64>], nx: usize, out: &mut [f64]) {
    let n = comps.len();
    for (c, col) in comps.iter().enumerate() {
        for j in 0..nx {
            out[j * n + c] = col[j];
        }
    }
}

/// Symmetrised entry `(M_ab + M_ba) / 2` of every cell.
fn sym_entry(m: &[f64], nx: usize, nd: usize, a: usize, b: usize) -> Vec<f64> {
    let s = nd * nd;
    (0..nx)
        .map(|j| 0.5 * (m[j * s + a * nd + b] + m[j * s + b * nd + a]))
        .collect()
}

/// Adds `w * vals` to entries `(a, b)` and `(b, a)` (once on the diagonal).
fn add_sym(out: &mut [f64], nx: usize, nd: usize, a: usize, b: usize, vals: &[f64], w: f64) {
    let s = nd * nd;
    for j in 0..nx {
        out[j * s + a * nd + b] += w * vals[j];
        if a != b {
            out[j * s + b * nd + a] += w * vals[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_models() -> Vec<Model> {
        vec![
            Model::burgers(),
            Model::barotropic(PressureLaw::log(), 1e-3).unwrap(),
            Model::barotropic(PressureLaw::gamma_law(1.4).unwrap(), 1e-3).unwrap(),
            Model::qhd(PressureLaw::log(), 1e-3).unwrap(),
            Model::korteweg(-0.5, 1e-3, None).unwrap(),
            Model::korteweg(0.7, 1e-3, None).unwrap(),
        ]
    }

    #[test]
    fn barotropic_flux_at_one_one() {
        let m = Model::barotropic(PressureLaw::log(), 1e-3).unwrap();
        let f = m.flux_checked(&[1.0, 1.0]).unwrap();
        assert_eq!(f, vec![2.0, 1.0, 1.0, 1.0]);
        assert_eq!(m.entropy(&[1.0, 1.0]), 1.5);
        assert_eq!(m.sharp(&[1.0, 1.0]).unwrap(), vec![1.0, 0.5]);
        let back = m.unsharp(&[1.0, 0.5]).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-15 && (back[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn burgers_sharp_is_identity() {
        let m = Model::burgers();
        assert_eq!(m.sharp(&[0.37]).unwrap(), vec![0.37]);
        assert_eq!(m.unsharp(&[-2.0]).unwrap(), vec![-2.0]);
    }

    #[test]
    fn entropy_is_half_trace_and_gradient_is_sharp() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in all_models() {
            let n = m.n();
            for _ in 0..50 {
                let v = m.random_state(&mut rng);
                let f = m.flux_checked(&v).unwrap();
                let k = m.entropy(&v);
                assert!((k - 0.5 * linalg::trace(&f, n)).abs() <= 1e-12 * k.abs().max(1.0));
                let s = m.sharp(&v).unwrap();
                for l in 0..n {
                    let h = 1e-5;
                    let mut vp = v.clone();
                    let mut vm = v.clone();
                    vp[l] += h;
                    vm[l] -= h;
                    let fd = (m.entropy(&vp) - m.entropy(&vm)) / (2.0 * h);
                    assert!((fd - s[l]).abs() < 1e-6 * (1.0 + s[l].abs()), "{} l={l}", m.name());
                }
                let back = m.unsharp(&s).unwrap();
                for l in 0..n {
                    assert!((back[l] - v[l]).abs() <= 1e-10 * v[l].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn flux_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in all_models() {
            let n = m.dim();
            for _ in 0..200 {
                let v = m.random_state(&mut rng);
                let f = m.flux_checked(&v).unwrap();
                let norm = linalg::frobenius(&f, &f).sqrt();
                assert!(linalg::min_eigenvalue(&f, n) >= -1e-10 * norm.max(1.0), "{}", m.name());
            }
        }
    }

    #[test]
    fn lowner_probe_examples() {
        assert!(lowner_convexity_probe(&Model::burgers(), 1000, 1) >= -1e-15);
        let b = Model::barotropic(PressureLaw::log(), 1e-3).unwrap();
        assert!(lowner_convexity_probe(&b, 1000, 2) >= -1e-10);
        let k = Model::korteweg(-0.5, 1e-3, None).unwrap();
        assert!(lowner_convexity_probe(&k, 1000, 3) >= -1e-10);
    }

    #[test]
    fn operators_are_transposes() {
        let nx = 32;
        let ops = SpaceOps::new(nx, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in all_models() {
            let n = m.n();
            let nd = m.dim();
            let z = m.z();
            for _ in 0..5 {
                let mut mm: Vec<f64> = (0..nx * nd * nd).map(|_| rng.gen_range(-1.0..1.0)).collect();
                for j in 0..nx {
                    for a in 0..nd {
                        for b in 0..a {
                            mm[j * nd * nd + a * nd + b] = mm[j * nd * nd + b * nd + a];
                        }
                    }
                }
                let a: Vec<f64> = (0..nx * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut lm = vec![0.0; nx * n];
                let mut la = vec![0.0; nx * nd * nd];
                m.l_apply(&ops, &mm, &mut lm);
                m.lstar_apply(&ops, &a, &mut la);
                let lhs: f64 = lm.iter().zip(&a).map(|(x, y)| x * y).sum();
                let rhs: f64 = mm.iter().zip(&la).map(|(x, y)| x * y).sum();
                assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1e3), "{}: {lhs} vs {rhs}", m.name());

                if z > 0 {
                    let w: Vec<f64> = (0..nx * z).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let mut lv = vec![0.0; nx * z];
                    let mut lw = vec![0.0; nx * n];
                    m.lc_apply(&ops, &a, &mut lv);
                    m.lcstar_apply(&ops, &w, &mut lw);
                    let lhs: f64 = lv.iter().zip(&w).map(|(x, y)| x * y).sum();
                    let rhs: f64 = a.iter().zip(&lw).map(|(x, y)| x * y).sum();
                    assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1e2), "{}", m.name());
                    // l L = 0
                    let mut llm = vec![0.0; nx * z];
                    m.lc_apply(&ops, &lm, &mut llm);
                    let scale = lm.iter().fold(0.0_f64, |s, x| s.max(x.abs()));
                    assert!(llm.iter().all(|x| x.abs() < 1e-11 * scale.max(1.0)), "{}", m.name());
                }
            }
        }
    }

    #[test]
    fn l_annihilates_identity() {
        let nx = 16;
        let ops = SpaceOps::new(nx, 4).unwrap();
        for m in all_models() {
            let nd = m.dim();
            let mut id = vec![0.0; nx * nd * nd];
            for j in 0..nx {
                for a in 0..nd {
                    id[j * nd * nd + a * nd + a] = 1.0;
                }
            }
            let mut out = vec![1.0; nx * m.n()];
            m.l_apply(&ops, &id, &mut out);
            assert!(out.iter().all(|&x| x == 0.0), "{}", m.name());
        }
    }

    #[test]
    fn initial_slice_satisfies_constraint() {
        let nx = 64;
        let ops = SpaceOps::new(nx, 4).unwrap();
        let comps = crate::series::parse_components("q=sin:1:0.1;rho=const:1+cos:1:0.3").unwrap();
        for m in [Model::qhd(PressureLaw::log(), 1e-3).unwrap(), Model::korteweg(-0.5, 1e-3, None).unwrap()] {
            let v = m.initial_slice(&ops, &comps).unwrap();
            let mut c = vec![0.0; nx];
            m.lc_apply(&ops, &v, &mut c);
            assert!(c.iter().all(|x| x.abs() < 1e-12));
        }
        assert!(Model::burgers().initial_slice(&ops, &comps).is_err());
    }
}
