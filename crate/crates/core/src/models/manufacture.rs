//! Smooth reference solutions sampled on time nodes.
//!
//! Burgers uses the method of characteristics. Every other scenario is
//! stepped with classical RK4 on the semi-discrete system `d_t v = L F(v)`,
//! which keeps the discrete constraint `l v = 0` exactly because `l L = 0`.

use super::{FluidKind, Model};
use crate::error::{Error, Result};
use crate::framework::{lstar_contraction, lstar_of_sharp, node_time_derivative, StrongSolutionRecord};
use crate::grid::{SpaceOps, SpaceTimeGrid, StateField, TimeLayout};
use crate::linalg::{self, MAX_DIM};
use crate::models::pressure::PressureLaw;
use crate::series::TrigSeries;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// Burgers from `v0` by characteristics.
    BurgersCharacteristics { v0: TrigSeries },
    /// Barotropic `rho0 = 1 + eps sin(2 pi x)`, `u0 = eps sin(2 pi x)`.
    BarotropicAcoustic { amplitude: f64 },
    /// Constant state.
    Stationary { state: Vec<f64> },
    /// Named trig data stepped with RK4 (any model).
    Smooth { data: Vec<(String, TrigSeries)> },
}

impl Scenario {
    pub fn label(&self) -> &'static str {
        match self {
            Scenario::BurgersCharacteristics { .. } => "burgers_characteristics",
            Scenario::BarotropicAcoustic { .. } => "barotropic_acoustic",
            Scenario::Stationary { .. } => "stationary_state",
            Scenario::Smooth { .. } => "smooth_data",
        }
    }
}

/// Smoothness horizon `1 / max(-v0')` of Burgers data (infinite when `v0' >= 0`).
pub fn burgers_horizon(v0: &TrigSeries) -> f64 {
    let n = 20_000;
    let mut best = (0.0_f64, 0.0_f64);
    for i in 0..n {
        let x = i as f64 / n as f64;
        let s = -v0.derivative(x);
        if s > best.0 {
            best = (s, x);
        }
    }
    if best.0 <= 0.0 {
        return f64::INFINITY;
    }
    // refine the maximum of -v0' by golden section around the best sample
    let h = 1.0 / n as f64;
    let (mut a, mut b) = (best.1 - h, best.1 + h);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if -v0.derivative(c) > -v0.derivative(d) {
            b = d;
        } else {
            a = c;
        }
    }
    1.0 / (-v0.derivative(0.5 * (a + b))).max(best.0)
}

/// Foot `y` of the characteristic through `(t, x)`: `y + t v0(y) = x`.
pub fn characteristic_foot(v0: &TrigSeries, t: f64, x: f64) -> f64 {
    let sup = v0.sup_bound();
    let (mut lo, mut hi) = (x - t * sup - 1e-12, x + t * sup + 1e-12);
    let mut y = x - t * v0.eval(x);
    y = y.clamp(lo, hi);
    for _ in 0..100 {
        let g = y + t * v0.eval(y) - x;
        if g > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let dg = 1.0 + t * v0.derivative(y);
        let mut next = y - g / dg;
        if !(next > lo && next < hi) || dg <= 0.0 {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 1e-15 * (1.0 + y.abs()) {
            return next;
        }
        y = next;
    }
    y
}

pub fn manufacture_strong_solution(model: &Model, grid: &SpaceTimeGrid, scenario: &Scenario, order: usize) -> Result<StrongSolutionRecord> {
    let ops = SpaceOps::new(grid.nx, order)?;
    let n = model.n();
    let xs = grid.xs();
    let v = match scenario {
        Scenario::BurgersCharacteristics { v0 } => {
            if !matches!(model, Model::Burgers) {
                return Err(Error::Config("characteristics scenario needs the Burgers model".into()));
            }
            let horizon = burgers_horizon(v0);
            if grid.t_final >= horizon {
                return Err(Error::Horizon {
                    detail: format!("characteristics cross before T = {}", grid.t_final),
                    max_t1: horizon,
                });
            }
            let mut v = StateField::zeros(grid, TimeLayout::Nodes, 1);
            for k in 0..=grid.nt {
                let t = grid.t(k);
                for (j, &x) in xs.iter().enumerate() {
                    v.cell_mut(k, j)[0] = v0.eval(characteristic_foot(v0, t, x));
                }
            }
            v
        }
        Scenario::BarotropicAcoustic { amplitude } => {
            if !matches!(model, Model::Fluid(f) if f.kind == FluidKind::Barotropic) {
                return Err(Error::Config("acoustic scenario needs the barotropic model".into()));
            }
            let eps = *amplitude;
            if !(eps.abs() < 1.0) {
                return Err(Error::Config(format!("acoustic amplitude must satisfy |eps| < 1, got {eps}")));
            }
            let mut v0 = vec![0.0; grid.nx * 2];
            for (j, &x) in xs.iter().enumerate() {
                let s = (2.0 * PI * x).sin();
                let rho = 1.0 + eps * s;
                v0[2 * j] = rho * eps * s;
                v0[2 * j + 1] = rho;
            }
            rk4_evolve(model, &ops, grid, &v0)?
        }
        Scenario::Stationary { state } => {
            if state.len() != n {
                return Err(Error::Shape(format!("stationary state has {} components, model needs {n}", state.len())));
            }
            if !model.in_interior(state) {
                return Err(Error::Precondition(format!("stationary state {state:?} is not interior")));
            }
            let slice: Vec<f64> = (0..grid.nx).flat_map(|_| state.iter().copied()).collect();
            check_constraint(model, &ops, &slice)?;
            StateField::from_slice_broadcast(grid, TimeLayout::Nodes, &slice, n)?
        }
        Scenario::Smooth { data } => {
            let v0 = model.initial_slice(&ops, data)?;
            rk4_evolve(model, &ops, grid, &v0)?
        }
    };
    for k in 0..v.levels {
        for j in 0..grid.nx {
            if !model.in_interior(v.cell(k, j)) {
                return Err(Error::domain(format!("level {k}, cell {j}"), "manufactured state left the interior"));
            }
        }
    }
    let mut rec = StrongSolutionRecord {
        grid: *grid,
        v,
        pi: None,
        positivity_margin: 0.0,
        label: scenario.label().to_string(),
    };
    rec.pi = reconstruct_multiplier(model, &ops, &rec)?;
    rec.positivity_margin = positivity_margin(model, &ops, &rec)?;
    Ok(rec)
}

fn check_constraint(model: &Model, ops: &SpaceOps, slice: &[f64]) -> Result<()> {
    if model.z() == 0 || matches!(model, Model::Burgers) {
        return Ok(());
    }
    let mut c = vec![0.0; ops.nx * model.z()];
    model.lc_apply(ops, slice, &mut c);
    let worst = c.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if worst > 1e-6 {
        return Err(Error::Precondition(format!("initial data violate the linear constraint by {worst:.3e}")));
    }
    Ok(())
}

/// Right-hand side `L F(v)` of one level.
pub fn semi_discrete_rhs(model: &Model, ops: &SpaceOps, v: &[f64], out: &mut [f64]) {
    let n = model.n();
    let nd = model.dim();
    let nx = ops.nx;
    let mut f = vec![0.0; nx * nd * nd];
    for j in 0..nx {
        model.flux(&v[j * n..(j + 1) * n], &mut f[j * nd * nd..(j + 1) * nd * nd]);
    }
    model.l_apply(ops, &f, out);
}

/// Stable RK4 step for the model at state `v`.
fn stable_dt(model: &Model, ops: &SpaceOps, v: &[f64]) -> f64 {
    let n = model.n();
    let dx = ops.dx;
    match model {
        Model::Burgers => {
            let m = v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
            0.5 * dx / m.max(1e-12)
        }
        Model::Fluid(f) => {
            let mut speed: f64 = 0.0;
            for c in v.chunks(n) {
                let rho = c[n - 1];
                let u = c[0] / rho;
                speed = speed.max(u.abs() + f.pressure.dp(rho).max(0.0).sqrt());
            }
            let hyper = 0.5 * dx / speed.max(1e-12);
            match f.kind {
                FluidKind::Barotropic => hyper,
                // dispersive terms scale like dx^2
                _ => hyper.min(0.25 * dx * dx / (1.0 + speed * dx)),
            }
        }
    }
}

fn rk4_evolve(model: &Model, ops: &SpaceOps, grid: &SpaceTimeGrid, v0: &[f64]) -> Result<StateField> {
    let n = model.n();
    let len = grid.nx * n;
    check_constraint(model, ops, v0)?;
    for (j, c) in v0.chunks(n).enumerate() {
        if !model.in_interior(c) {
            return Err(Error::Precondition(format!("initial state {c:?} at cell {j} is not interior")));
        }
    }
    let grad0 = max_gradient(ops, v0, n);
    let threshold = 1e3 * (1.0 + grad0);
    let mut v = StateField::zeros(grid, TimeLayout::Nodes, n);
    v.slice_mut(0).copy_from_slice(v0);
    let mut cur = v0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let mut tmp = vec![0.0; len];
    let big_dt = grid.dt();
    for k in 0..grid.nt {
        let subs = (big_dt / stable_dt(model, ops, &cur)).ceil().max(1.0) as usize;
        let h = big_dt / subs as f64;
        for _ in 0..subs {
            semi_discrete_rhs(model, ops, &cur, &mut k1);
            for i in 0..len {
                tmp[i] = cur[i] + 0.5 * h * k1[i];
            }
            semi_discrete_rhs(model, ops, &tmp, &mut k2);
            for i in 0..len {
                tmp[i] = cur[i] + 0.5 * h * k2[i];
            }
            semi_discrete_rhs(model, ops, &tmp, &mut k3);
            for i in 0..len {
                tmp[i] = cur[i] + h * k3[i];
            }
            semi_discrete_rhs(model, ops, &tmp, &mut k4);
            for i in 0..len {
                cur[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let ok = cur.iter().all(|x| x.is_finite())
            && cur.chunks(n).all(|c| model.in_interior(c))
            && max_gradient(ops, &cur, n) <= threshold;
        if !ok {
            return Err(Error::Horizon {
                detail: format!("gradient blow-up or vacuum between t = {} and {}", grid.t(k), grid.t(k + 1)),
                max_t1: grid.t(k),
            });
        }
        v.slice_mut(k + 1).copy_from_slice(&cur);
    }
    Ok(v)
}

fn max_gradient(ops: &SpaceOps, v: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|c| {
            let comp: Vec<f64> = v.iter().skip(c).step_by(n).copied().collect();
            ops.d(&comp).iter().fold(0.0_f64, |m, x| m.max(x.abs()))
        })
        .fold(0.0, f64::max)
}

/// Multiplier from the sharp equation: the `G` row for the augmented systems,
/// the spatial mean of the residual for Burgers.
pub fn reconstruct_multiplier(model: &Model, ops: &SpaceOps, rec: &StrongSolutionRecord) -> Result<Option<StateField>> {
    if model.z() == 0 {
        return Ok(None);
    }
    let grid = &rec.grid;
    let n = model.n();
    let nx = grid.nx;
    let w = nx * model.dim() * model.dim();
    let sharp = rec.sharp_field(model)?;
    let lsa = lstar_of_sharp(model, ops, &sharp);
    let levels: Vec<&[f64]> = (0..=grid.nt).map(|k| sharp.slice(k)).collect();
    let mut pi = StateField::zeros(grid, TimeLayout::Nodes, model.z());
    let mut contr = vec![0.0; nx * n];
    for k in 0..=grid.nt {
        let dts = if grid.nt >= 2 {
            node_time_derivative(&levels, grid.dt(), k)
        } else {
            vec![0.0; nx * n]
        };
        lstar_contraction(model, rec.v.slice(k), &lsa[k * w..(k + 1) * w], nx, &mut contr);
        let out = pi.slice_mut(k);
        match model.multiplier_component() {
            Some(c) => {
                for j in 0..nx {
                    out[j] = -(dts[j * n + c] + contr[j * n + c]);
                }
            }
            None => {
                let mean = (0..nx).map(|j| dts[j * n] + contr[j * n]).sum::<f64>() / nx as f64;
                out.fill(mean);
            }
        }
    }
    Ok(Some(pi))
}

/// `max(0, -min (T - t) lambda_min(L* v#))` over all nodes.
fn positivity_margin(model: &Model, ops: &SpaceOps, rec: &StrongSolutionRecord) -> Result<f64> {
    let grid = &rec.grid;
    let nd = model.dim();
    let sharp = rec.sharp_field(model)?;
    let lsa = lstar_of_sharp(model, ops, &sharp);
    let mut c: f64 = 0.0;
    let mut buf = [0.0; MAX_DIM * MAX_DIM];
    for k in 0..=grid.nt {
        let tail = grid.t_final - grid.t(k);
        for j in 0..grid.nx {
            let o = (k * grid.nx + j) * nd * nd;
            buf[..nd * nd].copy_from_slice(&lsa[o..o + nd * nd]);
            c = c.max(-tail * linalg::min_eigenvalue(&buf[..nd * nd], nd));
        }
    }
    Ok(c)
}

/// Steps the barotropic sharp system in `(u, zeta)` with RK4 and returns `(q, rho)` at the final time.
pub fn barotropic_sharp_evolve(pressure: &PressureLaw, ops: &SpaceOps, v0: &[f64], t1: f64, steps: usize) -> Result<Vec<f64>> {
    let nx = ops.nx;
    let mut s = vec![0.0; 2 * nx];
    for j in 0..nx {
        let (q, rho) = (v0[2 * j], v0[2 * j + 1]);
        if rho <= 0.0 {
            return Err(Error::Precondition(format!("density {rho} at cell {j}")));
        }
        s[2 * j] = q / rho;
        s[2 * j + 1] = -0.5 * q * q / (rho * rho) + pressure.du(rho);
    }
    let rhs = |s: &[f64]| -> Vec<f64> {
        let u: Vec<f64> = s.iter().step_by(2).copied().collect();
        let z: Vec<f64> = s.iter().skip(1).step_by(2).copied().collect();
        let du = ops.d(&u);
        let u2: Vec<f64> = u.iter().map(|x| x * x).collect();
        let du2 = ops.d(&u2);
        let dz = ops.d(&z);
        let mut out = vec![0.0; 2 * nx];
        for j in 0..nx {
            let rho = pressure.inv_du(z[j] + 0.5 * u2[j]).unwrap_or(f64::NAN);
            out[2 * j] = -u[j] * du[j] - 0.5 * du2[j] - dz[j];
            out[2 * j + 1] = u2[j] * du[j] - pressure.dp(rho) * du[j];
        }
        out
    };
    let h = t1 / steps as f64;
    for _ in 0..steps {
        let k1 = rhs(&s);
        let a: Vec<f64> = s.iter().zip(&k1).map(|(x, k)| x + 0.5 * h * k).collect();
        let k2 = rhs(&a);
        let b: Vec<f64> = s.iter().zip(&k2).map(|(x, k)| x + 0.5 * h * k).collect();
        let k3 = rhs(&b);
        let c: Vec<f64> = s.iter().zip(&k3).map(|(x, k)| x + h * k).collect();
        let k4 = rhs(&c);
        for i in 0..2 * nx {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    let mut out = vec![0.0; 2 * nx];
    for j in 0..nx {
        let (u, z) = (s[2 * j], s[2 * j + 1]);
        let rho = pressure
            .inv_du(z + 0.5 * u * u)
            .ok_or_else(|| Error::domain(format!("cell {j}"), "sharp state left the range of U'"))?;
        out[2 * j] = u * rho;
        out[2 * j + 1] = rho;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::{adapt_weight, sharp_residual, WeightProfile};

    #[test]
    fn burgers_characteristics_gradient() {
        let g = SpaceTimeGrid::new(256, 32, 0.1).unwrap();
        let rec = manufacture_strong_solution(
            &Model::burgers(),
            &g,
            &Scenario::BurgersCharacteristics { v0: TrigSeries::sin(1, 1.0) },
            4,
        )
        .unwrap();
        let last: Vec<f64> = rec.v.component(g.nt, 0);
        // fixed-point oracle on the final slice
        for (j, &x) in g.xs().iter().enumerate().step_by(17) {
            let mut v = 0.0;
            for _ in 0..200 {
                v = (2.0 * PI * (x - v * 0.1)).sin();
            }
            assert!((v - last[j]).abs() < 1e-10);
        }
        let ops = SpaceOps::new(256, 4).unwrap();
        let grad = ops.d(&last).iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let expect = 2.0 * PI / (1.0 - 0.2 * PI);
        assert!((grad / expect - 1.0).abs() < 0.02, "{grad} vs {expect}");
    }

    #[test]
    fn burgers_horizon_error() {
        let g = SpaceTimeGrid::new(32, 8, 0.2).unwrap();
        let r = manufacture_strong_solution(
            &Model::burgers(),
            &g,
            &Scenario::BurgersCharacteristics { v0: TrigSeries::sin(1, 1.0) },
            4,
        );
        match r {
            Err(Error::Horizon { max_t1, .. }) => assert!((max_t1 - 1.0 / (2.0 * PI)).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stationary_barotropic_is_exact() {
        let m = Model::barotropic(PressureLaw::log(), 1e-3).unwrap();
        let g = SpaceTimeGrid::new(16, 8, 0.5).unwrap();
        let rec = manufacture_strong_solution(&m, &g, &Scenario::Stationary { state: vec![0.0, 1.0] }, 4).unwrap();
        let ops = SpaceOps::new(16, 4).unwrap();
        let w = WeightProfile::unit(0.5).unwrap();
        assert!(sharp_residual(&m, &ops, &rec, &w).unwrap() <= 1e-12);
        assert_eq!(adapt_weight(&m, &ops, &rec, 0.5).unwrap().gamma, 0.0);
        assert_eq!(rec.entropy_drift(&m).unwrap(), 0.0);
    }

    #[test]
    fn zero_burgers_record() {
        let g = SpaceTimeGrid::new(16, 8, 0.5).unwrap();
        let rec = manufacture_strong_solution(
            &Model::burgers(),
            &g,
            &Scenario::BurgersCharacteristics { v0: TrigSeries::constant(0.0) },
            4,
        )
        .unwrap();
        assert_eq!(rec.v.max_abs(), 0.0);
        let ops = SpaceOps::new(16, 4).unwrap();
        let w = adapt_weight(&Model::burgers(), &ops, &rec, 0.5).unwrap();
        assert_eq!(w.gamma, 0.0);
        assert_eq!(w.h(0.3), 1.0);
    }

    #[test]
    fn sharp_and_conservative_barotropic_agree() {
        let m = Model::barotropic(PressureLaw::log(), 1e-3).unwrap();
        let Model::Fluid(f) = m else { unreachable!() };
        let mut errs = vec![];
        for &nx in &[32usize, 64] {
            let g = SpaceTimeGrid::new(nx, 64, 0.2).unwrap();
            let rec = manufacture_strong_solution(&m, &g, &Scenario::BarotropicAcoustic { amplitude: 0.1 }, 4).unwrap();
            let ops = SpaceOps::new(nx, 4).unwrap();
            let sharp_end = barotropic_sharp_evolve(&f.pressure, &ops, rec.v.slice(0), 0.2, 400).unwrap();
            let err = sharp_end
                .iter()
                .zip(rec.v.slice(g.nt))
                .fold(0.0_f64, |e, (a, b)| e.max((a - b).abs()));
            errs.push(err);
        }
        assert!(errs[0] < 1e-4 && errs[1] < errs[0], "{errs:?}");
    }
}
