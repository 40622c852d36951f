mod common;

use common::*;
use mahabo::acquisition::{
    confidence_bound_value, optimize_acquisition, uniform_prior, AcquisitionSpec, OptimizerConfig, UncertaintyScale,
};
use mahabo::batch_dpp::{
    condition_on_pending, dpp_kernel_eval, dpp_kernel_matrix, min_ucb, sample_kdpp_gibbs, sample_relevant_region,
    select_batch, DppConfig, RelevantRegion,
};
use mahabo::gp::{fit_posterior, GpPosterior, MahaKernelParams};
use mahabo::linalg::logdet_psd;
use mahabo::reconstruction::LinearEmbedding;
use mahabo::{BoxDomain, Dataset, Error};
use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

fn fitted(seed: u64, n: usize, dim: usize, d: usize) -> GpPosterior {
    let mut r = rng(seed);
    let data = random_dataset(n, dim, &mut r);
    let b = normal_matrix(d, dim, &mut r) * (1.5 / (dim as f64).sqrt());
    fit_posterior(&data, &MahaKernelParams::new(1.0, b, 0.01).unwrap()).unwrap()
}

#[test]
fn kernel_diagonal_is_conditioned_variance_and_minors_are_psd() {
    let post = fitted(1, 12, 4, 2);
    let dom = BoxDomain::unit(4);
    let mut r = rng(10);
    let cond = condition_on_pending(&post, &dom.sample_uniform(&mut r)).unwrap();
    for _ in 0..100 {
        let (a, b) = (dom.sample_uniform(&mut r), dom.sample_uniform(&mut r));
        let laa = dpp_kernel_eval(&cond, &a, &a).unwrap();
        assert!((laa - cond.mean_var(&a).unwrap().1).abs() < 1e-14);
        let lbb = dpp_kernel_eval(&cond, &b, &b).unwrap();
        let lab = dpp_kernel_eval(&cond, &a, &b).unwrap();
        assert!((lab - dpp_kernel_eval(&cond, &b, &a).unwrap()).abs() < 1e-15);
        assert!(laa >= 0.0 && laa * lbb - lab * lab >= -1e-8);
    }
}

#[test]
fn points_sharing_an_embedding_are_never_co_selected() {
    let post = fitted(2, 10, 4, 2);
    let emb = LinearEmbedding::new(post.params().embedding().clone()).unwrap();
    let dom = BoxDomain::unit(4);
    let mut r = rng(20);
    let cond = condition_on_pending(&post, &dom.sample_uniform(&mut r)).unwrap();
    let a = vec![0.1, -0.2, 0.3, 0.0];
    let w = emb.null_projector() * DVector::from_vec(vec![0.3, 0.2, -0.1, 0.4]);
    let b: Vec<f64> = a.iter().zip(w.iter()).map(|(x, y)| x + y).collect();
    let m = dpp_kernel_matrix(&cond, &[a, b]).unwrap();
    assert!(m.determinant() < 1e-10);
    assert_eq!(logdet_psd(&m), f64::NEG_INFINITY);
}

#[test]
fn min_ucb_on_the_prior_is_beta_gamma() {
    let p = MahaKernelParams::new(1.5, DMatrix::from_row_slice(1, 2, &[1.0, 0.5]), 0.1).unwrap();
    let post = fit_posterior(&Dataset::new(), &p).unwrap();
    let v = min_ucb(&post, 2.0, UncertaintyScale::StdDev, &BoxDomain::unit(2), &OptimizerConfig::default(), &mut rng(3)).unwrap();
    assert!((v - 3.0).abs() < 1e-12);
}

#[test]
fn min_ucb_lower_bounds_random_probes() {
    let post = fitted(4, 15, 5, 2);
    let dom = BoxDomain::unit(5);
    let v = min_ucb(&post, 1.0, UncertaintyScale::StdDev, &dom, &OptimizerConfig::default(), &mut rng(40)).unwrap();
    let mut r = rng(41);
    for _ in 0..1000 {
        let x = dom.sample_uniform(&mut r);
        assert!(v <= confidence_bound_value(&post, 1.0, UncertaintyScale::StdDev, &x).unwrap() + 1e-9);
    }
}

#[test]
fn min_ucb_matches_grid_oracle_in_one_dimension() {
    let dom = BoxDomain::unit(1);
    let data = Dataset::from_parts(&dom, vec![vec![-0.6], vec![0.1], vec![0.7]], vec![0.5, -0.4, 0.2]).unwrap();
    let post = fit_posterior(&data, &MahaKernelParams::new(1.0, DMatrix::from_element(1, 1, 1.5), 0.01).unwrap()).unwrap();
    let v = min_ucb(&post, 1.0, UncertaintyScale::StdDev, &dom, &OptimizerConfig::default(), &mut rng(5)).unwrap();
    let grid = (0..10_000)
        .map(|i| confidence_bound_value(&post, 1.0, UncertaintyScale::StdDev, &[-1.0 + 2.0 * i as f64 / 9_999.0]).unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!((v - grid).abs() < 1e-3);
}

#[test]
fn prior_region_is_the_whole_box() {
    let p = MahaKernelParams::new(1.0, DMatrix::from_row_slice(1, 2, &[1.0, 0.5]), 0.1).unwrap();
    let post = fit_posterior(&Dataset::new(), &p).unwrap();
    let dom = BoxDomain::unit(2);
    let region = RelevantRegion::new(&post, 2.0, 1.0, 2.0, UncertaintyScale::StdDev).unwrap();
    let mut r = rng(6);
    assert!(uniform_points(1000, &dom, &mut r).iter().all(|x| region.contains(x).unwrap()));
}

#[test]
fn region_samples_pass_membership_and_volume_grows_with_lambda() {
    let post = fitted(7, 20, 3, 1);
    let dom = BoxDomain::unit(3);
    let cfg = DppConfig::default();
    let ucb = min_ucb(&post, 1.0, UncertaintyScale::StdDev, &dom, &OptimizerConfig::default(), &mut rng(70)).unwrap();
    let mut region = RelevantRegion::new(&post, 1.0, 2.0, ucb, UncertaintyScale::StdDev).unwrap();
    let mut r = rng(71);
    for _ in 0..200 {
        let x = sample_relevant_region(&mut region, &dom, &cfg, &mut r).unwrap();
        assert!(region.contains(&x).unwrap());
    }
    let probes = uniform_points(20_000, &dom, &mut r);
    let mut last = 0usize;
    for lambda in [2.0, 3.0, 4.5] {
        let hits = probes.iter().filter(|x| region.contains_at(x, lambda).unwrap()).count();
        assert!(hits >= last);
        last = hits;
    }
    // pointwise monotonicity
    for x in &probes[..2000] {
        if region.contains_at(x, 2.0).unwrap() {
            assert!(region.contains_at(x, 3.0).unwrap());
        }
    }
}

#[test]
fn empty_region_is_reported_as_degenerate() {
    let post = fitted(8, 10, 2, 1);
    let mut region = RelevantRegion::new(&post, 1.0, 2.0, -1e12, UncertaintyScale::StdDev).unwrap();
    let cfg = DppConfig { rejection_budget: 5, ..Default::default() };
    let err = sample_relevant_region(&mut region, &BoxDomain::unit(2), &cfg, &mut rng(80)).unwrap_err();
    assert!(matches!(err, Error::RegionDegenerate { .. }));
}

fn discrete_kernel(l: &DMatrix<f64>) -> impl Fn(&[usize]) -> mahabo::Result<DMatrix<f64>> + '_ {
    move |s: &[usize]| Ok(DMatrix::from_fn(s.len(), s.len(), |i, j| l[(s[i], s[j])]))
}

#[test]
fn single_item_chain_follows_the_diagonal() {
    let l = DMatrix::from_diagonal(&DVector::from_iterator(8, (1..=8).rev().map(f64::from)));
    let cfg = DppConfig { gibbs_steps: Some(16), ..Default::default() };
    let mut r = rng(9);
    let mut counts = [0f64; 8];
    let runs = 50_000;
    for _ in 0..runs {
        let s = sample_kdpp_gibbs(1, discrete_kernel(&l), |r: &mut ChaCha8Rng| Ok(r.random_range(0..8usize)), &cfg, &mut r).unwrap();
        counts[s.points[0]] += 1.0 / runs as f64;
    }
    let exact: Vec<f64> = (1..=8).rev().map(|v| v as f64 / 36.0).collect();
    assert!(tv(&counts, &exact) < 0.03);
}

#[test]
fn acceptance_ratios_satisfy_detailed_balance() {
    let mut r = rng(10);
    let v = normal_matrix(8, 3, &mut r);
    let l = &v * v.transpose() + DMatrix::identity(8, 8) * 0.1;
    let cfg = DppConfig { gibbs_steps: Some(2000), ..Default::default() };
    let s = sample_kdpp_gibbs(3, discrete_kernel(&l), |r: &mut ChaCha8Rng| Ok(r.random_range(0..8usize)), &cfg, &mut r).unwrap();
    assert_eq!(s.transitions.len(), 2000);
    for t in &s.transitions {
        if t.logdet_proposed == f64::NEG_INFINITY {
            assert_eq!(t.accept_prob, 0.0);
            continue;
        }
        let forward = t.accept_prob;
        let backward = (t.logdet_current - t.logdet_proposed).exp().min(1.0);
        let ratio = (t.logdet_proposed - t.logdet_current).exp();
        assert!((forward / backward - ratio).abs() <= 1e-10 * ratio.max(1.0));
    }
}

#[test]
fn gibbs_needs_at_least_k_squared_steps() {
    let l = DMatrix::<f64>::identity(4, 4);
    let cfg = DppConfig { gibbs_steps: Some(3), ..Default::default() };
    let res = sample_kdpp_gibbs(2, discrete_kernel(&l), |r: &mut ChaCha8Rng| Ok(r.random_range(0..4usize)), &cfg, &mut rng(0));
    assert!(res.is_err());
}

#[test]
fn singular_ground_set_falls_back_to_independent_samples() {
    let l = DMatrix::from_element(3, 3, 1.0);
    let cfg = DppConfig { init_budget: 5, ..Default::default() };
    let s = sample_kdpp_gibbs(2, discrete_kernel(&l), |r: &mut ChaCha8Rng| Ok(r.random_range(0..3usize)), &cfg, &mut rng(1)).unwrap();
    assert!(s.degraded);
    assert_eq!(s.points.len(), 2);
}

#[test]
fn single_query_batch_is_the_acquisition_optimum() {
    let post = fitted(11, 12, 4, 2);
    let dom = BoxDomain::unit(4);
    let spec = AcquisitionSpec::fixed(1.0).unwrap();
    let cfg = OptimizerConfig::default();
    let sel = select_batch(&post, &dom, 1, &spec, &cfg, &DppConfig::default(), &mut rng(110)).unwrap();
    let mut prior = uniform_prior::<ChaCha8Rng>(&dom);
    let opt = optimize_acquisition(&post, &spec, &dom, &cfg, &mut prior, &mut rng(110)).unwrap();
    assert_eq!(sel.points, vec![opt.x]);
}

#[test]
fn batches_are_distinct_in_embedding_space_and_in_the_region() {
    for seed in 0..20 {
        let post = fitted(200 + seed, 15, 5, 2);
        let dom = BoxDomain::unit(5);
        let spec = AcquisitionSpec::fixed(1.0).unwrap();
        let cfg = OptimizerConfig::default();
        let sel = select_batch(&post, &dom, 5, &spec, &cfg, &DppConfig::default(), &mut rng(seed)).unwrap();
        assert_eq!(sel.points.len(), 5);
        assert!(sel.points.iter().all(|x| dom.contains(x)));
        let zs = project_all(post.params().embedding(), &sel.points);
        for i in 0..5 {
            for j in 0..i {
                let d: f64 = zs[i].iter().zip(&zs[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                assert!(d > 1e-6, "seed {seed}: points {i} and {j} coincide in z");
            }
        }
        let region =
            RelevantRegion::new(&post, spec.beta, sel.final_lambda.unwrap(), sel.ucb_min.unwrap(), spec.scale).unwrap();
        assert!(sel.points[1..].iter().all(|x| region.contains(x).unwrap()));
        let cond = condition_on_pending(&post, &sel.points[0]).unwrap();
        if !sel.flags.contains(&mahabo::flags::Flag::DppInitFallback) {
            assert!(logdet_psd(&dpp_kernel_matrix(&cond, &sel.points[1..]).unwrap()).is_finite());
        }
    }
}
