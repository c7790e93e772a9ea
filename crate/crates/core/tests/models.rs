use dualpde::framework::{adapt_weight, conservativity_residual, sharp_residual, total_entropy};
use dualpde::models::manufacture::{manufacture_strong_solution, Scenario};
use dualpde::models::pressure::PressureLaw;
use dualpde::models::lowner_convexity_probe;
use dualpde::series::{TrigSeries, TrigTerm, Wave};
use dualpde::{Model, SpaceOps, SpaceTimeGrid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn models() -> Vec<Model> {
    vec![
        Model::burgers(),
        Model::barotropic(PressureLaw::log(), 1e-3).unwrap(),
        Model::qhd(PressureLaw::log(), 1e-3).unwrap(),
        Model::korteweg(-0.5, 1e-3, None).unwrap(),
    ]
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

fn random_data(model: &Model, rng: &mut ChaCha8Rng) -> Vec<(String, TrigSeries)> {
    match model {
        Model::Burgers => vec![("v".into(), random_series(rng, 0.5))],
        _ => vec![
            ("q".into(), random_series(rng, 0.3)),
            ("rho".into(), TrigSeries::constant(1.0).plus(&random_series(rng, 0.2))),
        ],
    }
}

#[test]
fn conservativity_small_and_high_order() {
    let rng = ChaCha8Rng::seed_from_u64(2024);
    for m in models() {
        let mut rng = rng.clone();
        let mut worst_order = f64::INFINITY;
        for _ in 0..20 {
            let data = random_data(&m, &mut rng);
            let mut res = vec![];
            for &nx in &[128usize, 256] {
                let ops = SpaceOps::new(nx, 4).unwrap();
                let v = m.initial_slice(&ops, &data).unwrap();
                res.push(conservativity_residual(&m, &ops, &v, 1e-8).unwrap());
            }
            assert!(res[1] <= 1e-5, "{}: {:e}", m.name(), res[1]);
            if res[1] > 1e-13 {
                worst_order = worst_order.min((res[0] / res[1]).log2());
            }
        }
        assert!(worst_order >= 3.5, "{}: order {worst_order}", m.name());
    }
}

#[test]
fn lowner_probe_all_models() {
    for (i, m) in models().into_iter().enumerate() {
        assert!(lowner_convexity_probe(&m, 1000, i as u64) >= -1e-10, "{}", m.name());
    }
}

#[test]
fn burgers_sharp_residual_refines() {
    let mut res = vec![];
    for &n in &[128usize, 256, 512] {
        let g = SpaceTimeGrid::new(n, n, 0.1).unwrap();
        let m = Model::burgers();
        let rec = manufacture_strong_solution(&m, &g, &Scenario::BurgersCharacteristics { v0: TrigSeries::sin(1, 1.0) }, 4).unwrap();
        let ops = SpaceOps::new(n, 4).unwrap();
        let w = adapt_weight(&m, &ops, &rec, 0.1).unwrap();
        res.push(sharp_residual(&m, &ops, &rec, &w).unwrap());
    }
    eprintln!("burgers sharp residuals {res:?}");
    assert!(res[1] <= 1e-3);
    assert!(res[0] / res[1] >= 1.7 && res[1] / res[2] >= 1.7, "{res:?}");
}

#[test]
fn adapted_gamma_matches_characteristics() {
    let g = SpaceTimeGrid::new(512, 512, 0.1).unwrap();
    let m = Model::burgers();
    let rec = manufacture_strong_solution(&m, &g, &Scenario::BurgersCharacteristics { v0: TrigSeries::sin(1, 1.0) }, 4).unwrap();
    let ops = SpaceOps::new(512, 4).unwrap();
    let w = adapt_weight(&m, &ops, &rec, 0.1).unwrap();
    let expect = 2.0 * PI / (1.0 - 2.0 * PI * 0.1);
    assert!((w.gamma / expect - 1.0).abs() < 0.02, "{} vs {expect}", w.gamma);
}

#[test]
fn manufactured_entropy_drift_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for m in models() {
        let data = random_data(&m, &mut rng);
        let scen = match m {
            Model::Burgers => Scenario::BurgersCharacteristics { v0: TrigSeries::sin(1, 0.5) },
            _ => Scenario::Smooth { data },
        };
        let g = SpaceTimeGrid::new(128, 32, 0.1).unwrap();
        let rec = manufacture_strong_solution(&m, &g, &scen, 4).unwrap();
        let drift = rec.entropy_drift(&m).unwrap();
        assert!(drift <= 1e-6, "{}: {drift:e}", m.name());
        let tl = total_entropy(&m, &g, &rec.v).unwrap();
        assert!(tl.k.iter().all(|&k| k >= 0.0));
    }
}

#[test]
fn qhd_and_korteweg_sharp_residuals_refine() {
    for m in [Model::qhd(PressureLaw::log(), 1e-3).unwrap(), Model::korteweg(-0.5, 1e-3, None).unwrap()] {
        let data = vec![
            ("q".to_string(), TrigSeries::sin(1, 0.1)),
            ("rho".to_string(), TrigSeries::constant(1.0).plus(&TrigSeries::cos(1, 0.1))),
        ];
        let mut res = vec![];
        for &n in &[32usize, 64] {
            let g = SpaceTimeGrid::new(n, 2 * n, 0.05).unwrap();
            let rec = manufacture_strong_solution(&m, &g, &Scenario::Smooth { data: data.clone() }, 4).unwrap();
            let ops = SpaceOps::new(n, 4).unwrap();
            let w = dualpde::WeightProfile::unit(0.05).unwrap();
            res.push(sharp_residual(&m, &ops, &rec, &w).unwrap());
        }
        eprintln!("{} sharp residuals {res:?}", m.name());
        assert!(res[1] < res[0], "{}: {res:?}", m.name());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sharp_round_trip(q in -3.0..3.0f64, g in -3.0..3.0f64, xi in 0.0..3.0f64, rho in 0.05..5.0f64) {
        for m in models() {
            let v: Vec<f64> = match m.n() {
                1 => vec![q],
                2 => vec![q, rho],
                3 => vec![q, g, rho],
                _ => vec![q, g, xi, rho],
            };
            let back = m.unsharp(&m.sharp(&v).unwrap()).unwrap();
            for (a, b) in back.iter().zip(&v) {
                prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn argmin_characterisation(seed in 0u64..1000) {
        // y -> -y . grad(F(.):P)(v) + F(y):P is minimised at y = v for P >= 0
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for m in models() {
            let n = m.n();
            let v = m.random_state(&mut rng);
            let root: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut p = vec![0.0; n * n];
            for i in 0..n { for j in 0..n { for k in 0..n { p[i * n + j] += root[i * n + k] * root[j * n + k]; } } }
            let mut d = vec![0.0; n * n];
            let grad: Vec<f64> = (0..n).map(|l| { m.flux_derivative(&v, l, &mut d); d.iter().zip(&p).map(|(a, b)| a * b).sum() }).collect();
            let phi = |y: &[f64]| -> f64 {
                let f = m.flux_checked(y).unwrap();
                f.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() - y.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>()
            };
            let base = phi(&v);
            for _ in 0..50 {
                let mut y = v.clone();
                for c in y.iter_mut() { *c += rng.gen_range(-0.1..0.1); }
                if !m.in_interior(&y) { continue; }
                prop_assert!(phi(&y) >= base - 1e-10 * (1.0 + base.abs()));
            }
        }
    }
}
