mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rds_floquet::cocycle::{apply_vector, Cocycle};
use rds_floquet::driver::{DriverSystem, TimeKind, DEFAULT_RHO};
use rds_floquet::estimators::*;
use rds_floquet::linalg;
use rds_floquet::matrix::{ConstantMatrix, IidList, LeslieModel, MatrixCocycle};
use rds_floquet::ode::{ConstantOde, OdeCocycle, PiecewiseConstantOde, QuasiPeriodicOde};
use rds_floquet::matrix::{ParamDist, RandomEntries};
use rds_floquet::Matrix;

fn disc() -> DriverSystem {
    DriverSystem::iid(TimeKind::Discrete)
}

fn constant_matrix(a: Matrix) -> MatrixCocycle<f64, ConstantMatrix<f64>> {
    MatrixCocycle::new(ConstantMatrix::new(a).unwrap(), disc()).unwrap()
}

fn constant_flow(a: Matrix) -> OdeCocycle<f64, ConstantOde<f64>> {
    OdeCocycle::new(ConstantOde::new(a).unwrap(), DriverSystem::iid(TimeKind::Continuous)).unwrap()
}

fn iid_model(seed: u64) -> MatrixCocycle<f64, IidList<f64>> {
    MatrixCocycle::new(IidList::new(random_list(seed, 3, 4), None).unwrap(), disc()).unwrap()
}

#[test]
fn forward_floquet_examples() {
    let j = constant_matrix(Matrix::filled(3, 3, 1.0));
    let om = disc().sample_initial(1);
    let tr = forward_floquet(&j, &om, &[1.0, 0.0, 0.0], 10.0, None, true).unwrap();
    let e = [1.0 / 3f64.sqrt(); 3];
    assert!(dist(&tr.history.as_ref().unwrap()[0].w, &e) < 1e-15);
    // ‖J e₁‖ = √3, then ρ = 3 on every later step
    assert!((tr.ln_rho[0] - 0.5 * 3f64.ln()).abs() < 1e-15);
    assert!(tr.ln_rho[1..].iter().all(|r| (r - 3f64.ln()).abs() < 1e-15));

    let b = constant_flow(mat(&[&[0.0, 1.0], &[1.0, 0.0]]));
    let tr = forward_floquet(&b, &b.driver.sample_initial(1), &[1.0, 0.0], 20.0, None, false).unwrap();
    assert!(dist(&tr.w, &[std::f64::consts::FRAC_1_SQRT_2; 2]) < 1e-9);
    // ‖e^{20B} e₁‖ = √(cosh² 20 + sinh² 20)
    let exact = ((20f64.cosh().powi(2) + 20f64.sinh().powi(2)).sqrt()).ln() / 20.0;
    assert!((tr.lambda1_hat() - exact).abs() < 1e-9);
    assert!((tr.lambda1_hat() - 1.0).abs() < 0.02);

    let fib = MatrixCocycle::new(LeslieModel::constant(&[1.0, 1.0], &[1.0]).unwrap(), disc()).unwrap();
    let tr = forward_floquet(&fib, &om, &[1.0, 1.0], 2000.0, None, false).unwrap();
    assert!((tr.lambda1_hat() - golden().ln()).abs() < 1e-3);
}

#[test]
fn forward_floquet_rejects_bad_input() {
    let j = constant_matrix(Matrix::filled(2, 2, 1.0));
    let om = disc().sample_initial(1);
    assert!(forward_floquet(&j, &om, &[0.0, 0.0], 5.0, None, false).is_err());
    assert!(forward_floquet(&j, &om, &[1.0, -1.0], 5.0, None, false).is_err());
    let rot = constant_matrix(mat(&[&[1.0, -1.0], &[1.0, 1.0]]));
    assert!(matches!(
        forward_floquet(&rot, &om, &[1.0, 0.0], 5.0, None, false),
        Err(rds_floquet::Error::LeftCone { .. })
    ));
}

#[test]
fn perron_oracles() {
    let om = disc().sample_initial(3);
    for a in [mat(&[&[2.0, 1.0], &[1.0, 1.0]]), mat(&[&[0.5, 3.0], &[0.2, 1.5]])] {
        let (lam, v) = perron_2x2(&a);
        let c = constant_matrix(a);
        let w: Vec<f64> = warm_up(&c, &om, 50.0, None).unwrap();
        assert!(dist(&w, &v) < 1e-8);
        let tr = forward_floquet(&c, &om, &w, 1000.0, None, false).unwrap();
        assert!((tr.lambda1_hat() - lam.ln()).abs() < 1e-6);
    }
    let a = mat(&[&[1.0, 2.0, 0.5], &[0.3, 1.0, 2.0], &[1.5, 0.2, 0.7]]);
    let (lam, v) = perron_3x3(&a);
    let c = constant_matrix(a);
    let w: Vec<f64> = warm_up(&c, &om, 50.0, None).unwrap();
    assert!(dist(&w, &v) < 1e-8);
    assert!((forward_floquet(&c, &om, &w, 1000.0, None, false).unwrap().lambda1_hat() - lam.ln()).abs() < 1e-6);
}

#[test]
fn dual_floquet_examples() {
    let om = disc().sample_initial(3);
    let sym = constant_matrix(mat(&[&[2.0, 1.0], &[1.0, 3.0]]));
    let w: Vec<f64> = warm_up(&sym, &om, 50.0, None).unwrap();
    let ws: Vec<f64> = dual_floquet(&sym, &om, 50.0).unwrap();
    assert!(dist(&w, &ws) < 1e-12);

    // left Perron vector of [[2,1],[1,1]] is the right one of its transpose
    let a = mat(&[&[2.0, 1.0], &[1.0, 1.0]]);
    let (_, v) = perron_2x2(&a.transpose());
    let ws: Vec<f64> = dual_floquet(&constant_matrix(a), &om, 50.0).unwrap();
    assert!(dist(&ws, &v) < 1e-10);
    let a = mat(&[&[0.5, 3.0], &[0.2, 1.5]]);
    let (_, v) = perron_2x2(&a.transpose());
    let ws: Vec<f64> = dual_floquet(&constant_matrix(a), &om, 50.0).unwrap();
    assert!(dist(&ws, &v) < 1e-10);
}

#[test]
fn entire_orbits() {
    let j = constant_matrix(Matrix::filled(3, 3, 1.0));
    let om = disc().sample_initial(1);
    let orbit = backward_entire_orbit(&j, &om, 10, &[0.2, 0.5, 0.3]).unwrap();
    for p in orbit.points.iter().skip(1) {
        assert!(dist(&p.direction, &[1.0 / 3f64.sqrt(); 3]) < 1e-15);
    }

    let c = MatrixCocycle::new(IidList::new(random_list(5, 2, 3), None).unwrap(), disc()).unwrap();
    let orbit = backward_entire_orbit(&c, &om, 20, &[1.0, 1.0]).unwrap();
    for n in -20..0 {
        let v = orbit.vector(n).unwrap();
        let next = orbit.vector(n + 1).unwrap();
        let base = c.shift(&om, n as f64).unwrap();
        let (d, l) = apply_vector(&c, &base, &v, 1.0).unwrap();
        let img: Vec<f64> = d.iter().map(|x| x * l.exp()).collect();
        assert!(dist(&img, &next) <= 1e-12 * linalg::norm2(&next));
    }
    assert!(orbit_convergence(&c, &om, 20, &[1.0, 1.0]).unwrap() < 1e-8);
    assert!(matches!(backward_entire_orbit(&c, &om, 0, &[1.0, 1.0]), Err(rds_floquet::Error::InvalidParameter(_))));
}

#[test]
fn separation_examples() {
    let b = constant_flow(mat(&[&[0.0, 1.0], &[1.0, 0.0]]));
    let est = separation_estimate(&b, &b.driver.sample_initial(2), 20.0, &SeparationOptions::default()).unwrap();
    assert!((est.lambda1_hat - 1.0).abs() < 1e-8);
    assert!((est.lambda2_hat.unwrap() + 1.0).abs() < 1e-6);
    assert!((est.sigma_hat.unwrap() - 2.0).abs() < 1e-6);
    assert!(est.max_invariance_residual() < 1e-6);

    let j = constant_matrix(Matrix::filled(2, 2, 1.0));
    let est = separation_estimate(&j, &disc().sample_initial(2), 20.0, &SeparationOptions::default()).unwrap();
    assert!(est.lambda2_hat.is_none() && est.sigma_hat.is_none());
    assert!((est.lambda1_hat - 2f64.ln()).abs() < 1e-14);
}

#[test]
fn oseledets_examples() {
    let om = disc().sample_initial(1);
    let d = constant_matrix(Matrix::diag(&[2f64.exp(), (-1f64).exp()]));
    let ex = oseledets_qr(&d, &om, 100.0, None).unwrap();
    assert!((ex[0] - 2.0).abs() < 1e-12 && (ex[1] + 1.0).abs() < 1e-12);

    let b = constant_flow(mat(&[&[0.0, 1.0], &[1.0, 0.0]]));
    let ex = oseledets_qr(&b, &b.driver.sample_initial(1), 200.0, None).unwrap();
    assert!((ex[0] - 1.0).abs() < 1e-2 && (ex[1] + 1.0).abs() < 1e-2);

    let j = constant_matrix(Matrix::filled(2, 2, 1.0));
    assert_eq!(oseledets_qr(&j, &om, 10.0, None).unwrap()[1], f64::NEG_INFINITY);

    let c = iid_model(9);
    let ex = oseledets_qr(&c, &om, 10_000.0, None).unwrap();
    let tr = forward_floquet(&c, &om, &[1.0, 1.0, 1.0], 10_000.0, None, false).unwrap();
    assert!((ex[0] - tr.lambda1_hat()).abs() <= 0.01 * ex[0].abs());
}

#[test]
fn separation_invariants_on_random_iid_model() {
    let c = iid_model(21);
    let om = disc().sample_initial(4);
    let est = separation_estimate(&c, &om, 400.0, &SeparationOptions::default()).unwrap();
    assert!(est.max_invariance_residual() < 1e-6);
    assert!(est.tempered_slope().abs() <= 1e-2);
    // F̃₁ contains no positive vector
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let coef: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..3).map(|i| coef[0] * est.f1_basis[0][i] + coef[1] * est.f1_basis[1][i]).collect();
        assert!(v.iter().any(|&x| x < 0.0));
    }
    // exponents of the dual agree with the primal
    let dual = c.dual();
    let dual_track = forward_floquet(&*dual, &om, &[1.0, 1.0, 1.0], 400.0, None, false).unwrap();
    assert!((dual_track.lambda1_hat() - est.lambda1_hat).abs() < 0.02);
    let sigma = est.sigma_hat.unwrap();
    let qr = oseledets_qr(&c, &om, 400.0, None).unwrap();
    assert!((sigma - (qr[0] - qr[1])).abs() <= 0.1 * sigma);
}

#[test]
fn initial_conditions_are_forgotten() {
    let c = iid_model(2);
    let om = disc().sample_initial(7);
    let qr = oseledets_qr(&c, &om, 2000.0, None).unwrap();
    let gap = qr[0] - qr[1];
    let a = forward_floquet(&c, &om, &[1.0, 0.0, 0.0], 40.0, None, true).unwrap();
    let b = forward_floquet(&c, &om, &[0.0, 0.1, 1.0], 40.0, None, true).unwrap();
    let (ha, hb) = (a.history.unwrap(), b.history.unwrap());
    let (ts, ls): (Vec<f64>, Vec<f64>) = ha
        .iter()
        .zip(&hb)
        .map(|(x, y)| (x.t, dist(&x.w, &y.w)))
        .filter(|&(_, d)| d > 1e-13)
        .map(|(t, d)| (t, d.ln()))
        .unzip();
    let rate = -rds_floquet::stats::ols_slope(&ts, &ls);
    assert!(rate >= 0.8 * gap, "decay {rate} vs gap {gap}");
}

#[test]
fn birkhoff_examples() {
    let td = DriverSystem::torus(DEFAULT_RHO).unwrap();
    let om = td.sample_initial(1);
    let c = birkhoff_average(&|_| 2.5, &td, &om, 100.0, 10).unwrap();
    assert!((c.mean - 2.5).abs() < 1e-12 && c.half_width < 1e-12);
    let f = |w: &rds_floquet::driver::DriverState| (std::f64::consts::TAU * w.torus_coords().unwrap().0).sin();
    let short = birkhoff_average(&f, &td, &om, 100.0, 10).unwrap();
    let long = birkhoff_average(&f, &td, &om, 1000.0, 10).unwrap();
    // the exact average over [0, T] is (cos 2πx₁ − cos 2π(x₁+T)) / (2πT), bounded by 1/(πT)
    assert!(short.mean.abs() <= 1.0 / (std::f64::consts::PI * 100.0) + 1e-12);
    assert!(long.mean.abs() <= 1.0 / (std::f64::consts::PI * 1000.0) + 1e-12);

    let dd = disc();
    let om = dd.sample_initial(1);
    let idx = birkhoff_average(&|w| w.index() as f64, &dd, &om, 10.0, 2).unwrap();
    assert_eq!(idx.mean, 4.5);
    assert!(birkhoff_average(&|_| 1.0, &dd, &om, 10.0, 1).is_err());
    assert!(divergence_diagnostic(&|_| 1.0, &dd, &om, &[10.0, 20.0, 40.0], 2, 0.0).is_err());
    let diag = divergence_diagnostic(&|w| -(w.index() as f64), &dd, &om, &[10.0, 20.0, 40.0, 80.0], 2, 0.0).unwrap();
    assert!(diag.diverging);
}

#[test]
fn kappa_route_examples() {
    let b = constant_flow(mat(&[&[0.0, 1.0], &[1.0, 0.0]]));
    let om = b.driver.sample_initial(1);
    let r = lambda1_via_kappa(&b, &om, 20.0, &KappaOptions::default()).unwrap();
    assert!((r.estimate.mean - 1.0).abs() < 1e-9);

    let a = Matrix::diag(&[3.0, 3.0, 3.0]).add(&Matrix::filled(3, 3, 1.0)).unwrap();
    let r = lambda1_via_kappa(&constant_flow(a), &om, 20.0, &KappaOptions::default()).unwrap();
    assert!((r.estimate.mean - 6.0).abs() < 1e-9);
}

#[test]
fn kappa_route_matches_forward_iteration() {
    let d = DriverSystem::iid(TimeKind::Continuous);
    let pc = OdeCocycle::new(
        PiecewiseConstantOde { inner: RandomEntries::new(3, ParamDist::Uniform { lo: 0.0, hi: 1.0 }).unwrap() },
        d.clone(),
    )
    .unwrap();
    let om = d.sample_initial(3);
    let horizon = 300.0;
    let r = lambda1_via_kappa(&pc, &om, horizon, &KappaOptions::default()).unwrap();
    assert!((r.estimate.mean - r.lambda1_track).abs() < 1e-7);
    let tr = forward_floquet(&pc, &om, &[1.0, 1.0, 1.0], horizon, None, false).unwrap();
    let tol = 1e-3f64.max(3.0 * r.estimate.half_width);
    assert!((r.estimate.mean - tr.lambda1_hat()).abs() <= tol);

    let qp = OdeCocycle::new(
        QuasiPeriodicOde::new(
            mat(&[&[-1.0, 0.5], &[0.3, 0.2]]),
            mat(&[&[0.5, 0.2], &[0.1, 0.3]]),
            mat(&[&[0.2, 0.1], &[0.3, -0.4]]),
        )
        .unwrap(),
        DriverSystem::torus(DEFAULT_RHO).unwrap(),
    )
    .unwrap();
    let om = qp.driver.sample_initial(3);
    let r = lambda1_via_kappa(&qp, &om, horizon, &KappaOptions::default()).unwrap();
    let tr = forward_floquet(&qp, &om, &[1.0, 1.0], horizon, None, false).unwrap();
    assert!((r.estimate.mean - tr.lambda1_hat()).abs() <= 1e-3f64.max(3.0 * r.estimate.half_width));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    /// Principal directions of positive i.i.d. products stay in the cone
    /// and attract every positive start.
    #[test]
    fn pullback_direction_is_positive_and_unique(seed in any::<u64>(), s in any::<u64>()) {
        let c = MatrixCocycle::new(IidList::new(random_list(seed, 3, 3), None).unwrap(), disc()).unwrap();
        let om = disc().sample_initial(s);
        let a = backward_entire_orbit(&c, &om, 40, &[1.0, 0.0, 0.0]).unwrap();
        let b = backward_entire_orbit(&c, &om, 40, &[0.0, 0.0, 1.0]).unwrap();
        let wa = &a.points.last().unwrap().direction;
        let wb = &b.points.last().unwrap().direction;
        prop_assert!(wa.iter().all(|&x| x > 0.0));
        prop_assert!((linalg::norm2(wa) - 1.0).abs() < 1e-14);
        prop_assert!(dist(wa, wb) < 1e-8);
    }
}
