use std::f64::consts::PI;

use fibdirac::clifford::{build_clifford_module, clifford_action, factorize_spinors, identity, max_abs, relation_defect, Mat};
use fibdirac::geometry::{compute_tensors, model_geometry, ModelName};
use fibdirac::lattice::{DiscreteOperator, C};
use fibdirac::operators::Setup;
use fibdirac::verify::{run_check, CheckConfig, CheckName};
use proptest::prelude::*;

fn model() -> impl Strategy<Value = ModelName> {
    prop::sample::select(ModelName::ALL.to_vec())
}

/// Smallest resolution that keeps each model cheap.
fn small(m: ModelName) -> usize {
    match m {
        ModelName::PuncturedSphere => 16,
        _ => 4,
    }
}

fn covector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n)
}

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<C>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C::new(a, b)), len)
}

fn squares_to_minus_norm(gens: &[Mat], v: &[f64]) -> f64 {
    let coeffs: Vec<C> = v.iter().map(|&x| C::new(x, 0.0)).collect();
    let c = fibdirac::clifford::combine(gens, &coeffs).unwrap();
    let n2: f64 = v.iter().map(|x| x * x).sum();
    max_abs(&(&c * &c + identity(c.nrows()) * C::new(n2, 0.0))) / (1.0 + n2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn clifford_action_squares_and_is_skew(k in 1usize..=4, v in covector(8)) {
        let n = 2 * k;
        let m = build_clifford_module(n).unwrap();
        let v = &v[..n];
        let coeffs: Vec<C> = v.iter().map(|&x| C::new(x, 0.0)).collect();
        let c = clifford_action(&m, &coeffs).unwrap();
        prop_assert!(squares_to_minus_norm(&m.generators, v) <= 1e-13);
        prop_assert!(max_abs(&(c.adjoint() + &c)) <= 1e-13);
        prop_assert!(max_abs(&(&m.grading * &c + &c * &m.grading)) <= 1e-13);
    }

    #[test]
    fn factorized_generators_form_a_module(pair in prop::sample::select(vec![(1usize, 1usize), (2, 2), (2, 4), (4, 2)]), v in covector(6)) {
        let f = factorize_spinors(pair.0, pair.1).unwrap();
        let gens = f.total_generators();
        prop_assert_eq!(gens.len(), pair.0 + pair.1);
        prop_assert!(relation_defect(&gens) <= 1e-13);
        prop_assert!(squares_to_minus_norm(&gens, &v[..gens.len()]) <= 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tensor_invariants(m in model(), step in 0usize..3) {
        let n = small(m) + 2 * step;
        let g = model_geometry(m, &[n]).unwrap();
        let t = compute_tensors(&g);
        prop_assert!(t.invariant_defect() <= 1e-13);
        prop_assert_eq!(g.submersion_defect(), 0.0);
        prop_assert!(g.antisymmetry_defect() <= 1e-13);
        for p in (0..g.grid.len()).step_by(7) {
            for al in 0..g.dim_base {
                let tr: f64 = (0..g.dim_fiber).map(|j| t.s(p, j, j, al)).sum();
                prop_assert_eq!(tr, t.k(p, al));
            }
        }
    }

    #[test]
    fn sphere_area_converges(n in 8usize..96) {
        let g = model_geometry(ModelName::PuncturedSphere, &[n]).unwrap();
        prop_assert!((g.volume() - 4.0 * PI).abs() / (4.0 * PI) <= 1.0 / n as f64);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn dirac_operators_are_symmetric(m in model(), seed in any::<u64>()) {
        let s = Setup::new(model_geometry(m, &[small(m)]).unwrap()).unwrap();
        let len = s.total.len();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let mut draw = || -> Vec<C> {
            use rand::Rng;
            (0..len).map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
        };
        let (u, v) = (draw(), draw());
        for op in [s.dirac_total(), s.dirac_vertical(), s.horizontal_lift(true), s.tensor_sum()] {
            let d = (s.total.inner(&op.apply(&u), &v) - s.total.inner(&u, &op.apply(&v))).norm();
            prop_assert!(d <= 1e-10 * s.total.norm(&u) * s.total.norm(&v));
        }
    }

    #[test]
    fn vertical_dirac_is_base_linear(m in model(), f in prop::collection::vec(-1.0f64..1.0, 1024)) {
        let s = Setup::new(model_geometry(m, &[small(m)]).unwrap()).unwrap();
        let g = &s.geometry;
        let r = s.total.len() / g.grid.len();
        let nb = g.base_len();
        let pull = |u: &[C]| -> Vec<C> {
            u.iter().enumerate().map(|(i, z)| z * f[g.base_point(i / r) % nb % f.len()]).collect()
        };
        let dv = s.dirac_vertical();
        let u: Vec<C> = (0..s.total.len()).map(|i| C::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let a = dv.apply(&pull(&u));
        let b = pull(&dv.apply(&u));
        let diff: Vec<C> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        prop_assert!(s.total.norm(&diff) <= 1e-12 * (1.0 + s.total.norm(&a)));
    }

    #[test]
    fn reports_are_deterministic(seed in any::<u64>(), check in prop::sample::select(vec![CheckName::Symmetry, CheckName::Ellipticity, CheckName::Factorization])) {
        let cfg = CheckConfig { seed, geometry: Some(ModelName::KodairaThurston), resolutions: vec![4], ..CheckConfig::default() };
        let a = run_check(check, &cfg).unwrap().to_json();
        let b = run_check(check, &cfg).unwrap().to_json();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn section_bytes_roundtrip(m in model(), data in complex_vec(64)) {
        let s = Setup::new(model_geometry(m, &[small(m)]).unwrap()).unwrap();
        let u: Vec<C> = (0..s.total.len()).map(|i| data[i % data.len()] * (1.0 + i as f64)).collect();
        let mut bytes = Vec::new();
        s.total.write_section(&u, &mut bytes).unwrap();
        prop_assert_eq!(s.total.read_section(&bytes).unwrap(), u);
    }
}
