//! Optimal dual pair built from a strong solution, its certificate, and the
//! recovery of `v#` from a dual density `E`.
//!
//! With `W = H v#` on nodes, the pair lives in the solver's slab space:
//! `E^k = (W^{k+1} - W^k)/dt - (H l* pi)^{k+1/2}` and
//! `B^k = L*((W^k + W^{k+1})/2)`, which is exactly `B(E)` of the solver
//! because `W` vanishes at the horizon and `L* l* = 0`.

use crate::dual_solver::{cell_dual_min, eval_dual_functional, ConstraintOperator, DualPair};
use crate::error::{Error, Result};
use crate::framework::{total_entropy, StrongSolutionRecord, WeightProfile};
use crate::grid::{MatrixField, SpaceOps, SpaceTimeGrid, StateField, TimeLayout};
use crate::linalg::{self, MAX_DIM};
use crate::models::Model;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalPairCertificate {
    /// Named residuals: `constraint`, `positivity`, `stationarity`, `objective`,
    /// `objective_rel`, `dual_value`, `target`, and `recovery` when computed.
    pub checks: BTreeMap<String, f64>,
}

impl OptimalPairCertificate {
    pub fn get(&self, name: &str) -> f64 {
        self.checks.get(name).copied().unwrap_or(f64::NAN)
    }
}

fn check_weight(record: &StrongSolutionRecord, weight: &WeightProfile) -> Result<()> {
    let t = record.grid.t_final;
    if (weight.horizon - t).abs() > 1e-12 * t {
        return Err(Error::Config(format!("weight horizon {} differs from the record final time {t}", weight.horizon)));
    }
    Ok(())
}

/// `(E+, B+)` on slabs. Fails with a weight error when `hbar I + 2 B+` is not PSD.
pub fn build_optimal_pair(model: &Model, record: &StrongSolutionRecord, weight: &WeightProfile, order: usize) -> Result<DualPair> {
    check_weight(record, weight)?;
    let grid = record.grid;
    let ops = SpaceOps::new(grid.nx, order)?;
    let n = model.n();
    let nd = model.dim();
    let nx = grid.nx;
    let nt = grid.nt;
    let dt = grid.dt();
    let sharp = record.sharp_field(model)?;
    let big_h = weight.big_h_samples(&grid);
    let w_nodes: Vec<Vec<f64>> = (0..=nt).map(|k| sharp.slice(k).iter().map(|s| big_h[k] * s).collect()).collect();
    let mut e = StateField::zeros(&grid, TimeLayout::Slabs, n);
    let mut b = MatrixField::zeros(&grid, TimeLayout::Slabs, nd);
    e.data.par_chunks_mut(nx * n).zip(b.data.par_chunks_mut(nx * nd * nd)).enumerate().for_each(|(k, (ek, bk))| {
        let mut lpi = vec![0.0; nx * n];
        if let Some(pi) = &record.pi {
            let mut a = vec![0.0; nx * n];
            let mut c = vec![0.0; nx * n];
            model.lcstar_apply(&ops, pi.slice(k), &mut a);
            model.lcstar_apply(&ops, pi.slice(k + 1), &mut c);
            for i in 0..nx * n {
                lpi[i] = 0.5 * (big_h[k] * a[i] + big_h[k + 1] * c[i]);
            }
        }
        let mut avg = vec![0.0; nx * n];
        for i in 0..nx * n {
            ek[i] = (w_nodes[k + 1][i] - w_nodes[k][i]) / dt - lpi[i];
            avg[i] = 0.5 * (w_nodes[k][i] + w_nodes[k + 1][i]);
        }
        model.lstar_apply(&ops, &avg, bk);
    });
    let hbar = weight.h_slab_means(&grid);
    let lam = min_positivity(model, &grid, &hbar, &b.data);
    if lam < -1e-10 {
        return Err(Error::Weight { violation: lam });
    }
    Ok(DualPair { e, b })
}

/// `min lambda_min(hbar_k I + 2 B^k)` over slabs and cells.
pub fn min_positivity(model: &Model, grid: &SpaceTimeGrid, hbar: &[f64], b: &[f64]) -> f64 {
    let nd = model.dim();
    let nx = grid.nx;
    (0..grid.nt)
        .into_par_iter()
        .map(|k| {
            let mut p = [0.0; MAX_DIM * MAX_DIM];
            let mut m = f64::INFINITY;
            for j in 0..nx {
                let o = (k * nx + j) * nd * nd;
                for i in 0..nd * nd {
                    p[i] = 2.0 * b[o + i];
                }
                for a in 0..nd {
                    p[a * nd + a] += hbar[k];
                }
                m = m.min(linalg::min_eigenvalue(&p[..nd * nd], nd));
            }
            m
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// `-<v0, E> + K(E, B)` for slab densities.
pub fn dual_objective(model: &Model, grid: &SpaceTimeGrid, weight: &WeightProfile, v0: &[f64], pair: &DualPair) -> Result<f64> {
    let hbar = weight.h_slab_means(grid);
    let k = eval_dual_functional(model, grid, &hbar, &pair.e.data, &pair.b.data)?;
    let pairing: f64 = (0..grid.nt).map(|s| pair.e.slice(s).iter().zip(v0).map(|(a, b)| a * b).sum::<f64>()).sum();
    Ok(k.value - pairing * grid.dx() * grid.dt())
}

/// Residual of the weak constraint `<d_t Psi, B> + <L Psi, E> = 0` over smooth
/// symmetric test fields with `Psi(0) = 0`, normalised by `||Psi||`.
pub fn constraint_residual(model: &Model, ops: &SpaceOps, grid: &SpaceTimeGrid, pair: &DualPair) -> f64 {
    let n = model.n();
    let nd = model.dim();
    let nx = grid.nx;
    let t_end = grid.t_final;
    let mut worst: f64 = 0.0;
    for mode in 1..=3usize {
        // Psi_ab(t, x) = sin(pi t / 2T) cos(2 pi mode x + phase_ab)
        let phase = |a: usize, c: usize| 0.7 * (a + c) as f64 + 0.3 * (a * c) as f64;
        let mut spatial = vec![0.0; nx * nd * nd];
        for j in 0..nx {
            let x = grid.x(j);
            for a in 0..nd {
                for c in 0..nd {
                    spatial[j * nd * nd + a * nd + c] = (2.0 * PI * mode as f64 * x + phase(a.min(c), a.max(c))).cos();
                }
            }
        }
        let mut lsp = vec![0.0; nx * n];
        model.l_apply(ops, &spatial, &mut lsp);
        let mut total = 0.0;
        let mut norm2 = 0.0;
        for k in 0..grid.nt {
            let t = grid.t_mid(k);
            let s = (PI * t / (2.0 * t_end)).sin();
            let ds = PI / (2.0 * t_end) * (PI * t / (2.0 * t_end)).cos();
            let bk = pair.b.slice(k);
            let ek = pair.e.slice(k);
            let tb: f64 = spatial.iter().zip(bk).map(|(p, b)| p * b).sum();
            let te: f64 = lsp.iter().zip(ek).map(|(p, e)| p * e).sum();
            total += ds * tb + s * te;
            norm2 += s * s * spatial.iter().map(|p| p * p).sum::<f64>();
        }
        let cell = grid.dx() * grid.dt();
        worst = worst.max((total * cell).abs() / (norm2 * cell).sqrt());
    }
    worst
}

/// Evaluates every certificate residual for `pair` against `record`.
pub fn verify_certificate(model: &Model, record: &StrongSolutionRecord, weight: &WeightProfile, pair: &DualPair, order: usize) -> Result<OptimalPairCertificate> {
    check_weight(record, weight)?;
    let grid = record.grid;
    let ops = SpaceOps::new(grid.nx, order)?;
    let n = model.n();
    let nd = model.dim();
    let nx = grid.nx;
    pair.e.check(&grid, n)?;
    pair.b.check(&grid, nd)?;
    let hbar = weight.h_slab_means(&grid);
    let mut checks = BTreeMap::new();

    checks.insert("constraint".to_string(), constraint_residual(model, &ops, &grid, pair));
    // the solver's own form of the constraint: B = B(E)
    let op = ConstraintOperator::new(model, &grid, order)?;
    let bfe = op.b_from_e(&pair.e.data);
    let defect = bfe.iter().zip(&pair.b.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    checks.insert("constraint_discrete".to_string(), defect);
    checks.insert("positivity".to_string(), min_positivity(model, &grid, &hbar, &pair.b.data));

    // |1/2 (hbar I + 2B):d_l F(v) + E_l| at slab midpoints
    let stat = (0..grid.nt)
        .into_par_iter()
        .map(|k| {
            let mut p = [0.0; MAX_DIM * MAX_DIM];
            let mut d = [0.0; MAX_DIM * MAX_DIM];
            let mut z = [0.0; MAX_DIM];
            let mut m: f64 = 0.0;
            for j in 0..nx {
                let (a, c) = (record.v.cell(k, j), record.v.cell(k + 1, j));
                for i in 0..n {
                    z[i] = 0.5 * (a[i] + c[i]);
                }
                let bk = pair.b.cell(k, j);
                for i in 0..nd * nd {
                    p[i] = bk[i];
                }
                for q in 0..nd {
                    p[q * nd + q] += 0.5 * hbar[k];
                }
                let ek = pair.e.cell(k, j);
                for l in 0..n {
                    model.flux_derivative(&z[..n], l, &mut d);
                    m = m.max((linalg::frobenius(&p[..nd * nd], &d[..nd * nd]) + ek[l]).abs());
                }
            }
            m
        })
        .reduce(|| 0.0, f64::max);
    checks.insert("stationarity".to_string(), stat);

    let k0 = total_entropy(model, &grid, &record.v)?.k[0];
    let target = weight.big_h(0.0) * k0;
    let value = dual_objective(model, &grid, weight, record.initial_slice(), pair)?;
    checks.insert("dual_value".to_string(), value);
    checks.insert("target".to_string(), target);
    checks.insert("objective".to_string(), (value - target).abs());
    checks.insert("objective_rel".to_string(), (value - target).abs() / target.abs().max(1e-300));
    Ok(OptimalPairCertificate { checks })
}

/// Convenience: the inner minimiser of the certificate at one cell, for diagnostics.
pub fn certificate_minimiser(model: &Model, e: &[f64], p: &[f64]) -> Option<Vec<f64>> {
    cell_dual_min(model, e, p).map(|(_, z)| z[..model.n()].to_vec())
}

/// Sharp field recovered from a dual density on nodes `0..=last` of the retained window.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    /// Node values `levels = last + 1`.
    pub sharp: StateField,
    pub times: Vec<f64>,
    pub truncated_slabs: usize,
    pub basis_size: usize,
}

impl Recovery {
    /// `max_t ||recovered - reference||_{L2(x)}` over the retained nodes.
    pub fn l2_error(&self, reference: &StateField, dx: f64) -> f64 {
        (0..self.sharp.levels)
            .map(|k| {
                let s: f64 = self.sharp.slice(k).iter().zip(reference.slice(k)).map(|(a, b)| (a - b) * (a - b)).sum();
                (s * dx).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

// 5-point Gauss-Legendre on [-1, 1]
const GL_X: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GL_W: [f64; 5] = [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];

fn gauss(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    GL_X.iter().zip(&GL_W).map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

/// Orthonormal coefficient vectors of `ker l` inside `span{cos_k, sin_k} (x) R^n`.
fn kernel_modes(model: &Model, ops: &SpaceOps, grid: &SpaceTimeGrid, k: usize) -> Result<Vec<Vec<f64>>> {
    let n = model.n();
    let nx = grid.nx;
    let waves: Vec<Vec<f64>> = if k == 0 {
        vec![vec![1.0; nx]]
    } else {
        let w = 2.0 * PI * k as f64;
        vec![(0..nx).map(|j| (w * grid.x(j)).cos()).collect(), (0..nx).map(|j| (w * grid.x(j)).sin()).collect()]
    };
    let nw = waves.len();
    let dim = nw * n;
    let zc = model.z();
    // matrix of l on the candidate space, rows in span(waves) (x) R^Z
    let mut rows: Vec<Vec<f64>> = vec![vec![0.0; dim]; nw * zc];
    if zc > 0 {
        let mut out = vec![0.0; nx * zc];
        for a in 0..dim {
            let (wi, c) = (a / n, a % n);
            let mut cand = vec![0.0; nx * n];
            for j in 0..nx {
                cand[j * n + c] = waves[wi][j];
            }
            model.lc_apply(ops, &cand, &mut out);
            let mut recon = vec![0.0; nx * zc];
            for (wo, wave) in waves.iter().enumerate() {
                let nrm: f64 = wave.iter().map(|x| x * x).sum();
                for q in 0..zc {
                    let coef: f64 = (0..nx).map(|j| out[j * zc + q] * wave[j]).sum::<f64>() / nrm;
                    rows[wo * zc + q][a] = coef;
                    for j in 0..nx {
                        recon[j * zc + q] += coef * wave[j];
                    }
                }
            }
            let leak = out.iter().zip(&recon).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if leak > 1e-8 * (1.0 + out.iter().map(|x| x.abs()).fold(0.0, f64::max)) {
                return Err(Error::Internal(format!("constraint operator mixes Fourier modes (leak {leak:.2e})")));
            }
        }
    }
    // orthonormal basis of the row space, then its complement
    let floor = 1e-10 * rows.iter().map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(1.0, f64::max);
    let mut row_basis: Vec<Vec<f64>> = Vec::new();
    for r in rows {
        if let Some(v) = orthonormalise(&r, &row_basis, floor) {
            row_basis.push(v);
        }
    }
    let mut all = row_basis.clone();
    let mut kernel = Vec::new();
    for a in 0..dim {
        let mut e = vec![0.0; dim];
        e[a] = 1.0;
        if let Some(v) = orthonormalise(&e, &all, 1e-10) {
            all.push(v.clone());
            kernel.push(v);
        }
    }
    Ok(kernel)
}

/// Gram-Schmidt step; `None` when the remainder is below `floor`.
fn orthonormalise(v: &[f64], basis: &[Vec<f64>], floor: f64) -> Option<Vec<f64>> {
    let mut w = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
            w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    let nrm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm <= floor {
        return None;
    }
    w.iter_mut().for_each(|x| *x /= nrm);
    Some(w)
}

/// Recovers `v#` on nodes from `<psi, v#> = -<int_0^t psi/H ds, E>` with `psi`
/// ranging over time hats times constraint-compatible trig modes up to `nx/4`.
/// The last `max(1, nt/16)` slabs are dropped because `1/H` blows up at the horizon.
pub fn recover_sharp(model: &Model, grid: &SpaceTimeGrid, weight: &WeightProfile, e: &StateField, order: usize) -> Result<Recovery> {
    let n = model.n();
    let nx = grid.nx;
    let nt = grid.nt;
    e.check(grid, n)?;
    if e.layout != TimeLayout::Slabs {
        return Err(Error::Shape("dual density must live on slabs".into()));
    }
    if (weight.horizon - grid.t_final).abs() > 1e-12 * grid.t_final {
        return Err(Error::Config("weight horizon must equal the grid final time".into()));
    }
    let truncated = (nt / 16).max(1);
    if nt < truncated + 2 {
        return Err(Error::Config(format!("need more than {} slabs for recovery", truncated + 1)));
    }
    let last = nt - truncated - 1;
    let dt = grid.dt();
    let dx = grid.dx();
    let ops = SpaceOps::new(nx, order)?;

    // Phi_i slab means and total masses
    let inv_h = |s: f64| 1.0 / weight.big_h(s);
    let hat = |i: usize, s: f64| (1.0 - (s - grid.t(i)).abs() / dt).max(0.0);
    struct HatData {
        before: f64,
        after: f64,
        total: f64,
        mass: f64,
    }
    let hats: Vec<HatData> = (0..=last)
        .map(|i| {
            let ti = grid.t(i);
            // Phi_i(t) on [t_{i-1}, t_{i+1}]
            let phi = |t: f64| -> f64 {
                let mut acc = 0.0;
                if i > 0 {
                    let a = grid.t(i - 1);
                    acc += gauss(a, t.min(ti), |s| hat(i, s) * inv_h(s));
                }
                if t > ti {
                    acc += gauss(ti, t, |s| hat(i, s) * inv_h(s));
                }
                acc
            };
            let before = if i > 0 { gauss(grid.t(i - 1), ti, &phi) / dt } else { 0.0 };
            let after = gauss(ti, grid.t(i + 1), &phi) / dt;
            let total = phi(grid.t(i + 1));
            let mass = if i == 0 { 0.5 * dt } else { dt };
            HatData { before, after, total, mass }
        })
        .collect();

    let kmax = nx / 4;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in 0..=kmax {
        let nw = if k == 0 { 1 } else { 2 };
        let w = 2.0 * PI * k as f64;
        for coef in kernel_modes(model, &ops, grid, k)? {
            let mut psi = vec![0.0; nx * n];
            for j in 0..nx {
                let x = grid.x(j);
                for a in 0..nw * n {
                    let (wi, c) = (a / n, a % n);
                    let wave = if wi == 0 { if k == 0 { 1.0 } else { (w * x).cos() } } else { (w * x).sin() };
                    psi[j * n + c] += coef[a] * wave;
                }
            }
            basis.push(psi);
        }
    }

    let levels = last + 1;
    let contributions: Vec<Vec<f64>> = basis
        .par_iter()
        .map(|psi| {
            let norm2: f64 = psi.iter().map(|x| x * x).sum::<f64>() * dx;
            let a: Vec<f64> = (0..nt).map(|k| psi.iter().zip(e.slice(k)).map(|(p, q)| p * q).sum::<f64>() * dx).collect();
            let mut suffix = vec![0.0; nt + 1];
            for k in (0..nt).rev() {
                suffix[k] = suffix[k + 1] + a[k];
            }
            (0..levels)
                .map(|i| {
                    let h = &hats[i];
                    let mut pairing = h.after * a[i] + h.total * suffix[i + 1];
                    if i > 0 {
                        pairing += h.before * a[i - 1];
                    }
                    -pairing * dt / h.mass / norm2
                })
                .collect()
        })
        .collect();
    let mut sharp = StateField { layout: TimeLayout::Nodes, levels, nx, n, data: vec![0.0; levels * nx * n] };
    for (psi, coefs) in basis.iter().zip(&contributions) {
        for i in 0..levels {
            let s = sharp.slice_mut(i);
            for (x, p) in s.iter_mut().zip(psi) {
                *x += coefs[i] * p;
            }
        }
    }
    Ok(Recovery { sharp, times: (0..levels).map(|i| grid.t(i)).collect(), truncated_slabs: truncated, basis_size: basis.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::manufacture::{manufacture_strong_solution, Scenario};
    use crate::models::pressure::PressureLaw;

    #[test]
    fn zero_record_gives_zero_pair() {
        let g = SpaceTimeGrid::new(16, 8, 0.2).unwrap();
        let m = Model::burgers();
        let rec = manufacture_strong_solution(&m, &g, &Scenario::BurgersCharacteristics { v0: Default::default() }, 4).unwrap();
        let w = WeightProfile::unit(0.2).unwrap();
        let pair = build_optimal_pair(&m, &rec, &w, 4).unwrap();
        assert!(pair.e.max_abs() == 0.0 && pair.b.data.iter().all(|&x| x == 0.0));
        let cert = verify_certificate(&m, &rec, &w, &pair, 4).unwrap();
        for key in ["constraint", "stationarity", "objective", "constraint_discrete"] {
            assert_eq!(cert.get(key), 0.0, "{key}");
        }
        let r = recover_sharp(&m, &g, &w, &pair.e, 4).unwrap();
        assert!(r.sharp.max_abs() == 0.0);
    }

    #[test]
    fn stationary_barotropic_pair_vanishes() {
        let g = SpaceTimeGrid::new(16, 8, 0.5).unwrap();
        let m = Model::barotropic(PressureLaw::log(), 1e-3).unwrap();
        let rec = manufacture_strong_solution(&m, &g, &Scenario::Stationary { state: vec![0.0, 1.0] }, 4).unwrap();
        let w = WeightProfile::unit(0.5).unwrap();
        let pair = build_optimal_pair(&m, &rec, &w, 4).unwrap();
        // v# = (0, 1) is constant, so L* v# = 0; E+ = -h v# per slab
        assert!(pair.b.data.iter().all(|x| x.abs() < 1e-14));
        let cert = verify_certificate(&m, &rec, &w, &pair, 4).unwrap();
        assert!(cert.get("objective") < 1e-12, "{:?}", cert.checks);
    }

    #[test]
    fn kernel_modes_respect_constraint() {
        let g = SpaceTimeGrid::new(16, 4, 0.1).unwrap();
        let ops = SpaceOps::new(16, 4).unwrap();
        let q = Model::qhd(PressureLaw::log(), 1e-3).unwrap();
        assert_eq!(kernel_modes(&q, &ops, &g, 2).unwrap().len(), 4);
        assert_eq!(kernel_modes(&Model::burgers(), &ops, &g, 0).unwrap().len(), 0);
        assert_eq!(kernel_modes(&Model::burgers(), &ops, &g, 3).unwrap().len(), 2);
    }
}
