//! Periodic 1D space times uniform time discretization.
//!
//! Space is the unit torus split into `nx` cells sampled at their centres.
//! Time carries two layouts: `Nodes` (the `nt + 1` instants `k dt`) and
//! `Slabs` (the `nt` midpoints `(k + 1/2) dt`). The dual solver works on
//! slabs so that the terminal time carries no matrix multiplier.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpaceTimeGrid {
    pub nx: usize,
    pub nt: usize,
    pub t_final: f64,
}

impl SpaceTimeGrid {
    pub fn new(nx: usize, nt: usize, t_final: f64) -> Result<Self> {
        if nx < 2 {
            return Err(Error::Config(format!("nx must be >= 2, got {nx}")));
        }
        if nt < 1 {
            return Err(Error::Config("nt must be >= 1".into()));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::Config(format!("T must be positive, got {t_final}")));
        }
        Ok(Self { nx, nt, t_final })
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    /// Cell centre of cell `j`.
    pub fn x(&self, j: usize) -> f64 {
        (j as f64 + 0.5) / self.nx as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.x(j)).collect()
    }

    /// Time node `k` (0..=nt).
    pub fn t(&self, k: usize) -> f64 {
        if k == self.nt {
            self.t_final
        } else {
            k as f64 * self.dt()
        }
    }

    /// Midpoint of slab `k` (0..nt).
    pub fn t_mid(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dt()
    }

    pub fn levels(&self, layout: TimeLayout) -> usize {
        match layout {
            TimeLayout::Nodes => self.nt + 1,
            TimeLayout::Slabs => self.nt,
        }
    }

    pub fn time_of(&self, layout: TimeLayout, k: usize) -> f64 {
        match layout {
            TimeLayout::Nodes => self.t(k),
            TimeLayout::Slabs => self.t_mid(k),
        }
    }

    /// Quadrature weight in time for level `k` (trapezoid on nodes, midpoint on slabs).
    pub fn time_weight(&self, layout: TimeLayout, k: usize) -> f64 {
        let dt = self.dt();
        match layout {
            TimeLayout::Nodes if k == 0 || k == self.nt => 0.5 * dt,
            _ => dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TimeLayout {
    Nodes,
    Slabs,
}

/// Grid samples of a vector field `v : [0,T] x Omega -> R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub layout: TimeLayout,
    pub levels: usize,
    pub nx: usize,
    pub n: usize,
    pub data: Vec<f64>,
}

impl StateField {
    pub fn zeros(grid: &SpaceTimeGrid, layout: TimeLayout, n: usize) -> Self {
        let levels = grid.levels(layout);
        Self {
            layout,
            levels,
            nx: grid.nx,
            n,
            data: vec![0.0; levels * grid.nx * n],
        }
    }

    pub fn from_slice_broadcast(grid: &SpaceTimeGrid, layout: TimeLayout, slice: &[f64], n: usize) -> Result<Self> {
        if slice.len() != grid.nx * n {
            return Err(Error::Shape(format!(
                "slice has {} values, expected {}",
                slice.len(),
                grid.nx * n
            )));
        }
        let mut f = Self::zeros(grid, layout, n);
        for k in 0..f.levels {
            f.slice_mut(k).copy_from_slice(slice);
        }
        Ok(f)
    }

    pub fn check(&self, grid: &SpaceTimeGrid, n: usize) -> Result<()> {
        if self.nx != grid.nx || self.n != n || self.levels != grid.levels(self.layout) || self.data.len() != self.levels * self.nx * self.n {
            return Err(Error::Shape(format!(
                "state field {}x{}x{} ({:?}) does not match grid nx={} nt={} and n={}",
                self.levels, self.nx, self.n, self.layout, grid.nx, grid.nt, n
            )));
        }
        Ok(())
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let w = self.nx * self.n;
        &self.data[k * w..(k + 1) * w]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let w = self.nx * self.n;
        &mut self.data[k * w..(k + 1) * w]
    }

    pub fn cell(&self, k: usize, j: usize) -> &[f64] {
        let o = (k * self.nx + j) * self.n;
        &self.data[o..o + self.n]
    }

    pub fn cell_mut(&mut self, k: usize, j: usize) -> &mut [f64] {
        let o = (k * self.nx + j) * self.n;
        &mut self.data[o..o + self.n]
    }

    /// Component `c` of level `k` as a contiguous periodic array.
    pub fn component(&self, k: usize, c: usize) -> Vec<f64> {
        (0..self.nx).map(|j| self.cell(k, j)[c]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Grid samples of a symmetric-matrix field `M : [0,T] x Omega -> R^{N x N}_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    pub layout: TimeLayout,
    pub levels: usize,
    pub nx: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl MatrixField {
    pub fn zeros(grid: &SpaceTimeGrid, layout: TimeLayout, dim: usize) -> Self {
        let levels = grid.levels(layout);
        Self {
            layout,
            levels,
            nx: grid.nx,
            dim,
            data: vec![0.0; levels * grid.nx * dim * dim],
        }
    }

    pub fn check(&self, grid: &SpaceTimeGrid, dim: usize) -> Result<()> {
        if self.nx != grid.nx || self.dim != dim || self.levels != grid.levels(self.layout) || self.data.len() != self.levels * self.nx * dim * dim {
            return Err(Error::Shape(format!(
                "matrix field {}x{}x{}^2 ({:?}) does not match grid nx={} nt={} and N={}",
                self.levels, self.nx, self.dim, self.layout, grid.nx, grid.nt, dim
            )));
        }
        Ok(())
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let w = self.nx * self.dim * self.dim;
        &self.data[k * w..(k + 1) * w]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let w = self.nx * self.dim * self.dim;
        &mut self.data[k * w..(k + 1) * w]
    }

    pub fn cell(&self, k: usize, j: usize) -> &[f64] {
        let d2 = self.dim * self.dim;
        let o = (k * self.nx + j) * d2;
        &self.data[o..o + d2]
    }

    pub fn cell_mut(&mut self, k: usize, j: usize) -> &mut [f64] {
        let d2 = self.dim * self.dim;
        let o = (k * self.nx + j) * d2;
        &mut self.data[o..o + d2]
    }

    /// Largest relative asymmetry over all cells.
    pub fn asymmetry(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for m in self.data.chunks(d * d) {
            let scale = m.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-300);
            for i in 0..d {
                for j in (i + 1)..d {
                    worst = worst.max((m[i * d + j] - m[j * d + i]).abs() / scale);
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StencilKind {
    D1,
    D2,
    Identity,
    Mean,
}

/// Circulant stencil on the periodic grid.
///
/// `D1` is applied in antisymmetric pair form and `D2` in the form
/// `sum c_m ((u_{j+m} - u_j) + (u_{j-m} - u_j))`, so constants are annihilated
/// exactly in floating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub order: usize,
    pub kind: StencilKind,
    /// `(offset, coefficient)` for the positive half (`D1`, `D2`); empty otherwise.
    pub taps: Vec<(usize, f64)>,
}

impl Stencil {
    pub fn d1(order: usize, dx: f64) -> Result<Self> {
        let taps = match order {
            2 => vec![(1, 0.5 / dx)],
            4 => vec![(1, 2.0 / (3.0 * dx)), (2, -1.0 / (12.0 * dx))],
            _ => return Err(Error::Config(format!("stencil order must be 2 or 4, got {order}"))),
        };
        Ok(Self { order, kind: StencilKind::D1, taps })
    }

    pub fn d2(order: usize, dx: f64) -> Result<Self> {
        let h2 = dx * dx;
        let taps = match order {
            2 => vec![(1, 1.0 / h2)],
            4 => vec![(1, 4.0 / (3.0 * h2)), (2, -1.0 / (12.0 * h2))],
            _ => return Err(Error::Config(format!("stencil order must be 2 or 4, got {order}"))),
        };
        Ok(Self { order, kind: StencilKind::D2, taps })
    }

    pub fn identity() -> Self {
        Self { order: 0, kind: StencilKind::Identity, taps: vec![] }
    }

    pub fn mean() -> Self {
        Self { order: 0, kind: StencilKind::Mean, taps: vec![] }
    }

    /// Full circulant row as `(offset, coefficient)` pairs with signed offsets.
    pub fn full_taps(&self, nx: usize) -> Vec<(isize, f64)> {
        match self.kind {
            StencilKind::D1 => self
                .taps
                .iter()
                .flat_map(|&(m, c)| [(m as isize, c), (-(m as isize), -c)])
                .collect(),
            StencilKind::D2 => {
                let mut v: Vec<(isize, f64)> = vec![(0, -2.0 * self.taps.iter().map(|t| t.1).sum::<f64>())];
                for &(m, c) in &self.taps {
                    v.push((m as isize, c));
                    v.push((-(m as isize), c));
                }
                v
            }
            StencilKind::Identity => vec![(0, 1.0)],
            StencilKind::Mean => (0..nx as isize).map(|m| (m, 1.0 / nx as f64)).collect(),
        }
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let nx = u.len();
        debug_assert_eq!(out.len(), nx);
        match self.kind {
            StencilKind::D1 => {
                for j in 0..nx {
                    let mut s = 0.0;
                    for &(m, c) in &self.taps {
                        s += c * (u[(j + m) % nx] - u[(j + nx - m % nx) % nx]);
                    }
                    out[j] = s;
                }
            }
            StencilKind::D2 => {
                for j in 0..nx {
                    let mut s = 0.0;
                    for &(m, c) in &self.taps {
                        s += c * ((u[(j + m) % nx] - u[j]) + (u[(j + nx - m % nx) % nx] - u[j]));
                    }
                    out[j] = s;
                }
            }
            StencilKind::Identity => out.copy_from_slice(u),
            StencilKind::Mean => {
                let m = u.iter().sum::<f64>() / nx as f64;
                out.fill(m);
            }
        }
    }

    /// Applies the exact transpose of the circulant matrix.
    pub fn apply_transpose(&self, u: &[f64], out: &mut [f64]) {
        match self.kind {
            StencilKind::D1 => {
                let nx = u.len();
                for j in 0..nx {
                    let mut s = 0.0;
                    for &(m, c) in &self.taps {
                        s += c * (u[(j + nx - m % nx) % nx] - u[(j + m) % nx]);
                    }
                    out[j] = s;
                }
            }
            _ => self.apply(u, out),
        }
    }

    pub fn apply_vec(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.apply(u, &mut out);
        out
    }
}

/// First-derivative machinery on one time level: `D` and its exact transpose,
/// with second derivatives realised as `D` composed with itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceOps {
    pub nx: usize,
    pub dx: f64,
    pub order: usize,
    pub d1: Stencil,
}

impl SpaceOps {
    pub fn new(nx: usize, order: usize) -> Result<Self> {
        let dx = 1.0 / nx as f64;
        Ok(Self { nx, dx, order, d1: Stencil::d1(order, dx)? })
    }

    pub fn d(&self, u: &[f64]) -> Vec<f64> {
        self.d1.apply_vec(u)
    }

    pub fn dt(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.d1.apply_transpose(u, &mut out);
        out
    }

    pub fn dd(&self, u: &[f64]) -> Vec<f64> {
        self.d(&self.d(u))
    }

    pub fn dtdt(&self, u: &[f64]) -> Vec<f64> {
        self.dt(&self.dt(u))
    }
}

/// `sum u_j dx` over one time level.
pub fn space_integral(u: &[f64], nx: usize) -> Result<f64> {
    if u.len() != nx {
        return Err(Error::Shape(format!("expected {nx} samples, got {}", u.len())));
    }
    Ok(u.iter().sum::<f64>() / nx as f64)
}

/// Space-time integral of a scalar field stored level-major (`levels * nx`).
pub fn spacetime_integral(grid: &SpaceTimeGrid, layout: TimeLayout, u: &[f64]) -> Result<f64> {
    let levels = grid.levels(layout);
    if u.len() != levels * grid.nx {
        return Err(Error::Shape(format!(
            "expected {} samples, got {}",
            levels * grid.nx,
            u.len()
        )));
    }
    let dx = grid.dx();
    let mut total = 0.0;
    for k in 0..levels {
        let s: f64 = u[k * grid.nx..(k + 1) * grid.nx].iter().sum();
        total += grid.time_weight(layout, k) * s * dx;
    }
    Ok(total)
}

/// Largest normalised adjointness defect `|<S a, b> - <a, S^T b>| / (|a| |b|)`
/// over ten seeded random pairs.
pub fn adjointness_check(op: &Stencil, nx: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut sa = vec![0.0; nx];
    let mut stb = vec![0.0; nx];
    for _ in 0..10 {
        let a: Vec<f64> = (0..nx).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..nx).map(|_| rng.gen_range(-1.0..1.0)).collect();
        op.apply(&a, &mut sa);
        op.apply_transpose(&b, &mut stb);
        let lhs: f64 = sa.iter().zip(&b).map(|(x, y)| x * y).sum();
        let rhs: f64 = a.iter().zip(&stb).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        // scale by the operator magnitude so derivative stencils are judged in relative terms
        let scale: f64 = op.full_taps(nx).iter().map(|t| t.1.abs()).sum::<f64>().max(1.0);
        worst = worst.max((lhs - rhs).abs() / (na * nb * scale));
    }
    worst
}
