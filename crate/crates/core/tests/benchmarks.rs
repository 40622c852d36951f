mod common;

use common::*;
use mahabo::benchmarks::sobol::sobol_unit;
use mahabo::benchmarks::{eval_objective, make_embedded_problem, sobol_init, BaseFunction, EmbeddedProblem, Objective};
use mahabo::reconstruction::LinearEmbedding;
use mahabo::BoxDomain;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

#[test]
fn branin_at_a_published_minimizer() {
    let v = BaseFunction::Branin.eval_native(&[std::f64::consts::PI, 2.275]);
    assert!((v - 0.397887).abs() < 1e-5);
}

#[test]
fn identity_embedding_is_the_base_function() {
    for base in BaseFunction::ALL {
        let d = base.d_true();
        let p = EmbeddedProblem::with_embedding(base, DMatrix::identity(d, d), 0.0).unwrap();
        let mut r = rng(1);
        for x in uniform_points(20, &BoxDomain::unit(d), &mut r) {
            assert_eq!(eval_objective(&p, &x, &mut r).unwrap(), base.eval_normalized(&x));
        }
    }
}

#[test]
fn embedded_values_never_undercut_the_base_minimum() {
    let base = BaseFunction::Branin;
    // dense grid oracle over the normalized box
    let n = 400;
    let mut grid_min = f64::INFINITY;
    for i in 0..=n {
        for j in 0..=n {
            let z = [-1.0 + 2.0 * i as f64 / n as f64, -1.0 + 2.0 * j as f64 / n as f64];
            grid_min = grid_min.min(base.eval_normalized(&z));
        }
    }
    assert!(grid_min >= base.global_min() - 1e-9);
    let mut r = rng(2);
    let p = make_embedded_problem(base, 30, 0.0, &mut r).unwrap();
    for x in uniform_points(10_000, &BoxDomain::unit(30), &mut r) {
        assert!(p.eval_clean(&x).unwrap() >= base.global_min() - 1e-9);
    }
}

#[test]
fn out_of_domain_queries_are_rejected() {
    let p = make_embedded_problem(BaseFunction::Hartmann6, 8, 0.0, &mut rng(3)).unwrap();
    let mut x = vec![0.0; 8];
    x[2] = 1.5;
    assert!(p.eval_clean(&x).is_err());
    assert!(p.eval_clean(&[0.0; 7]).is_err());
}

#[test]
fn noise_is_unbiased() {
    let p = make_embedded_problem(BaseFunction::SixHumpCamel, 5, 0.1, &mut rng(4)).unwrap();
    let mut r = rng(40);
    let x = [0.1, -0.3, 0.2, 0.5, -0.9];
    let clean = p.eval_clean(&x).unwrap();
    let a = eval_objective(&p, &x, &mut r).unwrap();
    let b = eval_objective(&p, &x, &mut r).unwrap();
    assert_ne!(a, b);
    let mean = (0..10_000).map(|_| eval_objective(&p, &x, &mut r).unwrap()).sum::<f64>() / 10_000.0;
    assert!((mean - clean).abs() < 3.0 * 0.1 / 100.0);
}

#[test]
fn objective_trait_uses_the_unit_box() {
    let mut p = make_embedded_problem(BaseFunction::Colville, 6, 0.0, &mut rng(5)).unwrap();
    assert_eq!(p.domain(), &BoxDomain::unit(6));
    let v = p.evaluate(&[0.0; 6], &mut rng(6)).unwrap();
    assert_eq!(v, p.eval_clean(&[0.0; 6]).unwrap());
}

#[test]
fn sobol_reference_and_determinism() {
    let pts = sobol_unit(1, 4, 0).unwrap();
    assert_eq!(pts.concat(), vec![0.5, 0.75, 0.25, 0.375]);
    let dom = BoxDomain::new(vec![-2.0, 0.0, 5.0], vec![1.0, 0.5, 6.0]).unwrap();
    let a = sobol_init(&dom, 25, 7).unwrap();
    assert_eq!(a, sobol_init(&dom, 25, 7).unwrap());
    assert_ne!(a, sobol_init(&dom, 25, 8).unwrap());
    assert!(a.iter().all(|x| dom.contains(x)));
}

#[test]
fn unknown_function_names_are_config_errors() {
    assert!(BaseFunction::from_name("rover").is_err());
    for f in BaseFunction::ALL {
        assert_eq!(BaseFunction::from_name(f.name()).unwrap(), f);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn rows_are_normalized_and_the_box_maps_inside(seed in 0u64..10_000, dim in 6usize..60, fi in 0usize..5) {
        let base = BaseFunction::ALL[fi];
        let dim = dim.max(base.d_true());
        let mut r = rng(seed);
        let p = make_embedded_problem(base, dim, 0.0, &mut r).unwrap();
        for i in 0..base.d_true() {
            let s: f64 = p.embedding().row(i).iter().map(|v| v.abs()).sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }
        for x in uniform_points(200, &BoxDomain::unit(dim), &mut r) {
            prop_assert!(p.project(&x).iter().all(|v| v.abs() <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn objective_is_constant_along_the_null_space(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let p = make_embedded_problem(BaseFunction::Branin, 10, 0.0, &mut r).unwrap();
        let emb = LinearEmbedding::new(p.embedding().clone()).unwrap();
        let x: Vec<f64> = BoxDomain::unit(10).sample_uniform(&mut r).iter().map(|v| 0.5 * v).collect();
        let w = emb.null_projector() * DVector::from_vec(normal_matrix(10, 1, &mut r).as_slice().to_vec());
        let w = &w * (0.4 / w.amax().max(1e-12));
        let x2: Vec<f64> = x.iter().zip(w.iter()).map(|(a, b)| a + b).collect();
        prop_assert!((p.eval_clean(&x).unwrap() - p.eval_clean(&x2).unwrap()).abs() < 1e-10);
    }
}
