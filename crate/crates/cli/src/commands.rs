//! One pipeline per subcommand. Each writes its artifacts before reporting
//! numerical failure, so a non-converged run still leaves a report behind.

use crate::config::{Candidate, Command, RunConfig};
use crate::output::{num, FieldRows, OutDir};
use dualpde::burgers_exact::{entropy_profile, shock_free_substitute, terminal_l1, verify_proposition};
use dualpde::consistency::{build_optimal_pair, recover_sharp, verify_certificate};
use dualpde::dafermos::{compare, strong_as_subsolution, DafermosConfig};
use dualpde::dual_solver::{matrix_entropy, solve, ConstraintOperator, PrimalPair};
use dualpde::framework::{adapt_weight, conservativity_residual, total_entropy};
use dualpde::models::lowner_convexity_probe;
use dualpde::models::manufacture::{manufacture_strong_solution, Scenario};
use dualpde::series::{TrigSeries, TrigTerm, Wave};
use dualpde::{Error, MatrixField, Model, Result, SpaceOps, SpaceTimeGrid, StateField, StrongSolutionRecord, WeightProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::f64::consts::PI;

pub fn run(cfg: &RunConfig, out: &mut OutDir) -> Result<()> {
    match cfg.command()? {
        Command::Solve => solve_cmd(cfg, out),
        Command::Consistency => consistency_cmd(cfg, out),
        Command::BurgersSubstitute => substitute_cmd(cfg, out),
        Command::Dafermos => dafermos_cmd(cfg, out),
        Command::VerifyModel => verify_cmd(cfg, out),
        Command::GapStudy => gap_study_cmd(cfg, out),
    }
}

/// Sampled initial slice and the matching strong-solution scenario.
fn initial_data(cfg: &RunConfig, model: &Model, grid: &SpaceTimeGrid, order: usize) -> Result<(Vec<f64>, Scenario)> {
    match model {
        Model::Burgers => {
            if cfg.data.components.is_some() {
                return Err(Error::Config("burgers takes data.v0 (--v0), not data.components".into()));
            }
            let s = cfg.v0_series()?;
            Ok((s.sample(&grid.xs()), Scenario::BurgersCharacteristics { v0: s }))
        }
        Model::Fluid(_) => {
            if cfg.data.v0.is_some() {
                return Err(Error::Config("fluid models take data.components (--data), not data.v0".into()));
            }
            let comps = cfg.components()?;
            let v0 = model.initial_slice(&SpaceOps::new(grid.nx, order)?, &comps)?;
            Ok((v0, Scenario::Smooth { data: comps }))
        }
    }
}

fn strong_record(model: &Model, grid: &SpaceTimeGrid, scen: &Scenario) -> Result<StrongSolutionRecord> {
    manufacture_strong_solution(model, grid, scen, 4)
}

fn weight(cfg: &RunConfig, model: &Model, rec: Option<&StrongSolutionRecord>, grid: &SpaceTimeGrid, scen: &Scenario) -> Result<WeightProfile> {
    match cfg.fixed_gamma()? {
        Some(g) => WeightProfile::new(g, grid.t_final),
        None => {
            let owned;
            let rec = match rec {
                Some(r) => r,
                None => {
                    owned = strong_record(model, grid, scen)?;
                    &owned
                }
            };
            adapt_weight(model, &SpaceOps::new(grid.nx, 4)?, rec, grid.t_final)
        }
    }
}

fn grid_json(g: &SpaceTimeGrid) -> serde_json::Value {
    json!({ "nx": g.nx, "nt": g.nt, "t": g.t_final })
}

fn push_state(rows: &mut FieldRows, grid: &SpaceTimeGrid, f: &StateField, prefix: &str, labels: &[&str]) {
    for k in 0..f.levels {
        let t = grid.time_of(f.layout, k);
        for j in 0..f.nx {
            for (c, v) in f.cell(k, j).iter().enumerate() {
                rows.push(t, grid.x(j), &format!("{prefix}{}", labels.get(c).copied().unwrap_or("?")), *v);
            }
        }
    }
}

fn push_matrix(rows: &mut FieldRows, grid: &SpaceTimeGrid, f: &MatrixField, prefix: &str) {
    let nd = f.dim;
    for k in 0..f.levels {
        let t = grid.time_of(f.layout, k);
        for j in 0..f.nx {
            let b = f.cell(k, j);
            for a in 0..nd {
                for c in a..nd {
                    rows.push(t, grid.x(j), &format!("{prefix}[{a},{c}]"), b[a * nd + c]);
                }
            }
        }
    }
}

fn write_fields(out: &mut OutDir, rows: FieldRows) -> Result<()> {
    out.csv("fields.csv", "fields", &["t", "x", "component", "value"], &rows.rows)
}

fn solve_cmd(cfg: &RunConfig, out: &mut OutDir) -> Result<()> {
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    let scfg = cfg.solver()?;
    let (v0, scen) = initial_data(cfg, &model, &grid, scfg.order)?;
    let w = weight(cfg, &model, None, &grid, &scen)?;
    let sol = solve(&model, &grid, &w, &v0, &scfg)?;
    let r = &sol.report;

    let mut rows = FieldRows::default();
    push_state(&mut rows, &grid, &sol.primal.v_nodes, "v:", model.labels());
    push_state(&mut rows, &grid, &sol.dual.e, "E:", model.labels());
    push_matrix(&mut rows, &grid, &sol.dual.b, "B");
    write_fields(out, rows)?;
    let tl: Vec<Vec<String>> = r.entropy_timeline.times.iter().zip(&r.entropy_timeline.k).map(|(t, k)| vec![num(*t), num(*k)]).collect();
    out.csv("entropy.csv", "timeline", &["t", "K"], &tl)?;
    let hist: Vec<Vec<String>> = r
        .history
        .iter()
        .map(|h| vec![h.iteration.to_string(), num(h.primal), num(h.dual), num(h.gap), num(h.feasibility), h.averaged.to_string()])
        .collect();
    out.csv("history.csv", "history", &["iteration", "primal", "dual", "gap", "feasibility", "averaged"], &hist)?;
    out.report(cfg, &json!({ "model": model.name(), "grid": grid_json(&grid), "weight": w, "solver": r }))?;
    if !r.converged {
        return Err(Error::NonConvergence(format!("relative gap {:.3e} after {} iterations", r.rel_gap, r.iterations)));
    }
    Ok(())
}

fn consistency_cmd(cfg: &RunConfig, out: &mut OutDir) -> Result<()> {
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    let (_, scen) = initial_data(cfg, &model, &grid, 4)?;
    let rec = strong_record(&model, &grid, &scen)?;
    let w = weight(cfg, &model, Some(&rec), &grid, &scen)?;
    let pair = build_optimal_pair(&model, &rec, &w, 4)?;
    let cert = verify_certificate(&model, &rec, &w, &pair, 4)?;
    let recov = recover_sharp(&model, &grid, &w, &pair.e, 4)?;

    let mut rows = FieldRows::default();
    push_state(&mut rows, &grid, &rec.v, "v:", model.labels());
    push_state(&mut rows, &grid, &pair.e, "E:", model.labels());
    push_matrix(&mut rows, &grid, &pair.b, "B");
    for (k, &t) in recov.times.iter().enumerate() {
        for j in 0..grid.nx {
            for (c, v) in recov.sharp.cell(k, j).iter().enumerate() {
                rows.push(t, grid.x(j), &format!("sharp_recovered:{}", model.sharp_labels()[c]), *v);
            }
        }
    }
    write_fields(out, rows)?;
    out.report(
        cfg,
        &json!({
            "model": model.name(),
            "grid": grid_json(&grid),
            "scenario": scen.label(),
            "weight": w,
            "positivity_margin": rec.positivity_margin,
            "certificate": cert.checks,
            "recovery": { "levels": recov.times.len(), "truncated_slabs": recov.truncated_slabs, "basis_size": recov.basis_size },
        }),
    )
}

fn substitute_cmd(cfg: &RunConfig, out: &mut OutDir) -> Result<()> {
    if cfg.model.name.is_some_and(|m| m != crate::config::ModelName::Burgers) {
        return Err(Error::Config("burgers-substitute is defined for the burgers model only".into()));
    }
    let v0 = cfg.v0_series()?;
    let nx = cfg.grid.nx.ok_or_else(|| Error::Config("grid.nx (--Nx) is required".into()))?;
    let t_end = cfg.grid.t.ok_or_else(|| Error::Config("grid.t (--T) is required".into()))?;
    let nt = cfg.grid.nt.unwrap_or((nx / 4).max(16));
    let grid = SpaceTimeGrid::new(nx, nt, t_end)?;
    let samples = cfg.substitute.samples.unwrap_or(nx.max(4096));
    let snapshots = cfg.substitute.snapshots.unwrap_or(5);
    if snapshots < 2 {
        return Err(Error::Config("substitute.snapshots must be at least 2".into()));
    }
    let sub = shock_free_substitute(&v0, t_end, samples)?;
    let residuals = verify_proposition(&sub, &grid)?;
    let l1 = terminal_l1(&sub, nx)?;

    let xs = grid.xs();
    let mut rows = FieldRows::default();
    for i in 0..snapshots {
        let k = (i * nt + (snapshots - 1) / 2) / (snapshots - 1);
        let t = grid.t(k);
        let ve = entropy_profile(&v0, t, &xs)?;
        let rho = sub.rho_cells(t, nx);
        for j in 0..nx {
            let vt = sub.value(t, xs[j]);
            rows.push(t, xs[j], "v_entropy", ve[j]);
            rows.push(t, xs[j], "vT", vt);
            rows.push(t, xs[j], "rhoT", rho[j]);
            rows.push(t, xs[j], "q", vt * rho[j]);
        }
    }
    out.csv("substitute.csv", "fields", &["t", "x", "component", "value"], &rows.rows)?;
    out.report(
        cfg,
        &json!({
            "horizon": t_end,
            "grid": grid_json(&grid),
            "envelope_samples": samples,
            "gaps": sub.gaps,
            "terminal_l1": l1,
            "residuals": residuals,
        }),
    )
}

fn dafermos_cmd(cfg: &RunConfig, out: &mut OutDir) -> Result<()> {
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    let (_, scen) = initial_data(cfg, &model, &grid, 4)?;
    let rec = strong_record(&model, &grid, &scen)?;
    let d = &cfg.dafermos;
    let candidate = d.candidate.unwrap_or(Candidate::Strong);
    let (pair, order): (PrimalPair, usize) = match candidate {
        Candidate::Strong => (strong_as_subsolution(&model, &rec)?, 4),
        Candidate::Inflated => {
            let c = d.inflate.unwrap_or(0.1);
            if !(c >= 0.0) {
                return Err(Error::Config(format!("dafermos.inflate must be non-negative, got {c}")));
            }
            let mut p = strong_as_subsolution(&model, &rec)?;
            let nd = model.dim();
            for blk in p.m.data.chunks_mut(nd * nd) {
                for a in 0..nd {
                    blk[a * nd + a] += c;
                }
            }
            (p, 4)
        }
        Candidate::Solver => {
            let scfg = cfg.solver()?;
            let w = weight(cfg, &model, Some(&rec), &grid, &scen)?;
            (solve(&model, &grid, &w, rec.initial_slice(), &scfg)?.primal, scfg.order)
        }
    };
    let base = DafermosConfig::default();
    let dcfg = DafermosConfig {
        residual_tol: d.residual_tol.unwrap_or(base.residual_tol),
        delta_rel: d.delta_rel.unwrap_or(base.delta_rel),
        gamma_cap: d.gamma_cap.unwrap_or(base.gamma_cap),
        ..base
    };
    let t0 = d.t0.unwrap_or(0.0);
    let t1 = d.t1.unwrap_or(0.5 * grid.t_final);
    let verdict = compare(&model, &rec, &pair, t0, t1, order, &dcfg)?;

    let ks = total_entropy(&model, &grid, &rec.v)?.slab_values();
    let kt = matrix_entropy(&grid, &pair.m).slab_values();
    let rows: Vec<Vec<String>> = (0..grid.nt).map(|s| vec![num(grid.t_mid(s)), num(ks[s]), num(kt[s])]).collect();
    out.csv("timelines.csv", "timeline-pair", &["t", "strong", "subsolution"], &rows)?;
    out.report(cfg, &json!({ "model": model.name(), "grid": grid_json(&grid), "candidate": candidate, "comparison": verdict }))
}

fn random_series(rng: &mut ChaCha8Rng, amp: f64) -> TrigSeries {
    let mut s = TrigSeries::default();
    for _ in 0..3 {
        s.terms.push(TrigTerm {
            wave: if rng.gen_bool(0.5) { Wave::Sin } else { Wave::Cos },
            freq: rng.gen_range(1..=2),
            amp: rng.gen_range(-amp..amp),
            phase: rng.gen_range(0.0..2.0 * PI),
        });
    }
    s
}

fn verify_cmd(cfg: &RunConfig, out: &mut OutDir) -> Result<()> {
    let model = cfg.model()?;
    let trials = cfg.verify.trials.unwrap_or(1000);
    if trials == 0 {
        return Err(Error::Config("verify.trials must be positive".into()));
    }
    let seed = cfg.run.seed.unwrap_or(0);
    let nx = cfg.grid.nx.unwrap_or(256);
    if nx < 16 || nx % 2 != 0 {
        return Err(Error::Config(format!("verify-model needs an even grid.nx >= 16, got {nx}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let lowner = lowner_convexity_probe(&model, trials, seed);
    let mut trip: f64 = 0.0;
    for _ in 0..trials {
        let v = model.random_state(&mut rng);
        let back = model.unsharp(&model.sharp(&v)?)?;
        for (a, b) in back.iter().zip(&v) {
            trip = trip.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    let mut cons: f64 = 0.0;
    let mut order_min = f64::INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    for _ in 0..trials.min(20) {
        let data = match model {
            Model::Burgers => vec![("v".to_string(), random_series(&mut rng, 0.5))],
            Model::Fluid(_) => vec![
                ("q".to_string(), random_series(&mut rng, 0.3)),
                ("rho".to_string(), TrigSeries::constant(1.0).plus(&random_series(&mut rng, 0.2))),
            ],
        };
        let mut res = [0.0; 2];
        for (i, n) in [nx / 2, nx].into_iter().enumerate() {
            let ops = SpaceOps::new(n, 4)?;
            res[i] = conservativity_residual(&model, &ops, &model.initial_slice(&ops, &data)?, 1e-8)?;
        }
        cons = cons.max(res[1]);
        if res[1] > 1e-13 {
            order_min = order_min.min((res[0] / res[1]).log2());
        }
    }
    let nd = model.dim();
    let mut l_id: f64 = 0.0;
    let mut adj: f64 = 0.0;
    for order in [2, 4] {
        let ops = SpaceOps::new(nx, order)?;
        let mut id = vec![0.0; nx * nd * nd];
        for blk in id.chunks_mut(nd * nd) {
            for a in 0..nd {
                blk[a * nd + a] = 1.0;
            }
        }
        let mut o = vec![0.0; nx * model.n()];
        model.l_apply(&ops, &id, &mut o);
        l_id = l_id.max(o.iter().fold(0.0, |m: f64, x| m.max(x.abs())));
        adj = adj.max(ConstraintOperator::new(&model, &SpaceTimeGrid::new(12, 6, 0.2)?, order)?.adjointness_probe(seed));
    }

    let order_shown = if order_min.is_finite() { order_min } else { f64::NAN };
    let checks: Vec<(&str, f64, &str, bool)> = vec![
        ("sharp_round_trip", trip, "<= 1e-10", trip <= 1e-10),
        ("lowner_midpoint_convexity", lowner, ">= -1e-10", lowner >= -1e-10),
        ("conservativity_residual", cons, "<= 1e-5", cons <= 1e-5),
        // roundoff-level residuals carry no rate
        ("conservativity_order", order_shown, ">= 3.5", !order_min.is_finite() || order_min >= 3.5),
        ("l_of_identity", l_id, "== 0", l_id == 0.0),
        ("adjointness", adj, "<= 1e-12", adj <= 1e-12),
    ];
    println!("{:<28} {:>12}  {:<10} result", "check", "value", "tolerance");
    for (name, v, tol, ok) in &checks {
        println!("{name:<28} {v:>12.3e}  {tol:<10} {}", if *ok { "pass" } else { "FAIL" });
    }
    let rows: Vec<Vec<String>> = checks.iter().map(|(n, v, t, ok)| vec![n.to_string(), num(*v), t.to_string(), ok.to_string()]).collect();
    out.csv("checks.csv", "checks", &["check", "value", "tolerance", "pass"], &rows)?;
    let table: Vec<_> = checks.iter().map(|(n, v, t, ok)| json!({ "check": n, "value": v, "tolerance": t, "pass": ok })).collect();
    out.report(cfg, &json!({ "model": model.name(), "trials": trials, "nx": nx, "checks": table }))?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.3).map(|c| c.0).collect();
    if !failed.is_empty() {
        return Err(Error::Internal(format!("model checks failed: {}", failed.join(", "))));
    }
    Ok(())
}

fn gap_study_cmd(cfg: &RunConfig, out: &mut OutDir) -> Result<()> {
    let model = cfg.model()?;
    let t_end = cfg.grid.t.ok_or_else(|| Error::Config("grid.t (--T) is required".into()))?;
    let sizes = cfg.study.sizes.clone().unwrap_or_else(|| vec![16, 32, 64]);
    if sizes.is_empty() {
        return Err(Error::Config("study.sizes must not be empty".into()));
    }
    let scfg = cfg.solver()?;
    let mut rows = Vec::new();
    let mut table = Vec::new();
    let mut failed = Vec::new();
    for &n in &sizes {
        let grid = SpaceTimeGrid::new(n, n, t_end)?;
        let (v0, scen) = initial_data(cfg, &model, &grid, scfg.order)?;
        let w = weight(cfg, &model, None, &grid, &scen)?;
        let r = solve(&model, &grid, &w, &v0, &scfg)?.report;
        if !r.converged {
            failed.push(n);
        }
        rows.push(vec![
            n.to_string(),
            n.to_string(),
            r.iterations.to_string(),
            num(r.primal_value),
            num(r.dual_value),
            num(r.gap),
            num(r.rel_gap),
            r.converged.to_string(),
        ]);
        table.push(json!({
            "nx": n, "nt": n, "gamma": w.gamma, "iterations": r.iterations, "primal": r.primal_value,
            "dual": r.dual_value, "gap": r.gap, "rel_gap": r.rel_gap, "converged": r.converged,
        }));
    }
    out.csv("gap_study.csv", "gap-study", &["nx", "nt", "iterations", "primal", "dual", "gap", "rel_gap", "converged"], &rows)?;
    out.report(cfg, &json!({ "model": model.name(), "runs": table }))?;
    if !failed.is_empty() {
        return Err(Error::NonConvergence(format!("no convergence at Nx = {failed:?}")));
    }
    Ok(())
}
