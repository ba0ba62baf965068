mod common;

use std::sync::Arc;

use proptest::prelude::*;
use qc_chain::lattice::classify_bonds;
use qc_chain::newton::EnergyModel;
use qc_chain::{estimate, par, solve_qc, Mesh, QcModel, QcState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{morse, random_lattice_field, random_mesh};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_meshes_are_valid_and_round_trip(seed in any::<u64>(), n in 24usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = random_mesh(&mut rng, n, 1.0);
        mesh.check_invariants().unwrap();
        let back = Mesh::from_text(&mesh.to_text()).unwrap();
        prop_assert_eq!(back.len(), mesh.len());
        for (a, b) in back.nodes().iter().zip(mesh.nodes()) {
            prop_assert_eq!(a.ell, b.ell);
            prop_assert!((a.x - b.x).abs() < 1e-15);
        }
    }

    #[test]
    fn bonds_cover_each_length_once(seed in any::<u64>(), n in 24usize..120) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = random_mesh(&mut rng, n, 1.0);
        let bonds = classify_bonds(&mesh).unwrap();
        for r in [1usize, 2] {
            let total: f64 = bonds
                .bonds()
                .iter()
                .filter(|b| b.r == r)
                .map(|b| b.atomistic_len() + b.continuum_len())
                .sum();
            // n bonds of length rε each
            prop_assert!((total - r as f64).abs() < 1e-12, "r = {}: {}", r, total);
        }
    }

    #[test]
    fn qc_energy_is_translation_invariant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = random_mesh(&mut rng, 48, 1.0);
        let model = QcModel::new(mesh.clone(), morse(), None).unwrap();
        let eps = 1.0 / 48.0;
        let y: Vec<f64> = mesh.nodes().iter().map(|nd| nd.x + 0.2 * eps * rng.gen_range(-1.0..1.0)).collect();
        let shift: f64 = rng.gen_range(-1.0..1.0);
        let ys: Vec<f64> = y.iter().map(|v| v + shift).collect();
        let (e, es) = (model.energy(&y).unwrap(), model.energy(&ys).unwrap());
        prop_assert!((e - es).abs() < 1e-12 * (1.0 + e.abs()));
        let g: f64 = model.gradient(&y).unwrap().iter().sum();
        prop_assert!(g.abs() < 1e-11);
    }
}

#[test]
fn parallel_and_sequential_runs_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mesh = random_mesh(&mut rng, 96, 1.0);
    let f = random_lattice_field(&mut rng, 96, true);
    let scaled = qc_chain::Field::new(
        f.partition().clone(),
        f.values().iter().map(|v| 0.05 * v).collect(),
        f.kind(),
    )
    .unwrap();
    let run = |sequential: bool| {
        par::set_force_sequential(sequential);
        let (y, _) = solve_qc(mesh.clone(), morse(), Some(&scaled), None).unwrap();
        let rep = estimate(&y, &morse(), Some(&scaled)).unwrap();
        par::set_force_sequential(false);
        (y.values().to_vec(), rep.eta_e, rep.eta_f, rep.deformation_bound)
    };
    assert_eq!(run(true), run(false));
}

#[test]
fn solved_state_has_small_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mesh: Arc<Mesh> = random_mesh(&mut rng, 64, 1.05);
    let f = random_lattice_field(&mut rng, 64, true);
    let scaled =
        qc_chain::Field::new(f.partition().clone(), f.values().iter().map(|v| 0.05 * v).collect(), f.kind()).unwrap();
    let (y, report) = solve_qc(mesh.clone(), morse(), Some(&scaled), None).unwrap();
    assert!(report.converged);
    let model = QcModel::new(mesh.clone(), morse(), Some(&scaled)).unwrap();
    let g = model.gradient(y.values()).unwrap();
    assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-10 * (mesh.len() as f64).sqrt() * 10.0);
    // the solution beats the homogeneous state
    let e0 = model.energy(QcState::homogeneous(mesh).values()).unwrap();
    assert!(model.energy(y.values()).unwrap() <= e0);
}
