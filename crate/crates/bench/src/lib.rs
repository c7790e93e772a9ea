//! Shared fixtures for the kernel benchmarks.

use dualpde::dual_solver::SolverConfig;
use dualpde::series::TrigSeries;
use dualpde::models::pressure::PressureLaw;
use dualpde::{Model, SpaceTimeGrid, WeightProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn models() -> Vec<(&'static str, Model)> {
    vec![
        ("burgers", Model::burgers()),
        ("barotropic", Model::barotropic(PressureLaw::log(), 1e-3).unwrap()),
        ("qhd", Model::qhd(PressureLaw::log(), 1e-3).unwrap()),
        ("korteweg", Model::korteweg(-0.5, 1e-3, None).unwrap()),
    ]
}

/// Burgers problem on an `n x n` grid with `sin(2 pi x)` data.
pub fn burgers_problem(n: usize) -> (Model, SpaceTimeGrid, WeightProfile, Vec<f64>) {
    let g = SpaceTimeGrid::new(n, n, 0.1).unwrap();
    let v0 = TrigSeries::sin(1, 1.0).sample(&g.xs());
    (Model::burgers(), g, WeightProfile::new(1.0, 0.1).unwrap(), v0)
}

pub fn fixed_iterations(iters: usize) -> SolverConfig {
    // unreachable tolerance, so every run does exactly `iters` iterations
    SolverConfig { max_iterations: iters, gap_rel: f64::MIN_POSITIVE, ..SolverConfig::default() }
}

/// Random `(z, M)` cells, `cells` of them, for the epigraph projection.
pub fn random_cells(model: &Model, cells: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, nd) = (model.n(), model.dim());
    let z = (0..cells).flat_map(|_| model.random_state(&mut rng)).collect::<Vec<_>>();
    let mut m = vec![0.0; cells * nd * nd];
    for blk in m.chunks_mut(nd * nd) {
        for a in 0..nd {
            for c in 0..=a {
                let x = rng.gen_range(-1.0..1.0);
                blk[a * nd + c] = x;
                blk[c * nd + a] = x;
            }
        }
    }
    debug_assert_eq!(z.len(), cells * n);
    (z, m)
}
