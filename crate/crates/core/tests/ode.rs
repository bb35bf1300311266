use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rds_floquet::cocycle::Cocycle;
use rds_floquet::driver::{DriverState, DriverSystem, TimeKind, DEFAULT_RHO};
use rds_floquet::linalg::{self, Mat};
use rds_floquet::matrix::{ParamDist, RandomEntries};
use rds_floquet::ode::*;
use rds_floquet::report::Verdict;
use rds_floquet::torus::TorusExampleModel;
use rds_floquet::Matrix;

fn m(rows: &[&[f64]]) -> Matrix {
    Mat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn flow() -> DriverSystem {
    DriverSystem::iid(TimeKind::Continuous)
}

fn constant(a: Matrix) -> OdeCocycle<f64, ConstantOde<f64>> {
    OdeCocycle::new(ConstantOde::new(a).unwrap(), flow()).unwrap()
}

/// Random cooperative field, constant on unit intervals.
fn piecewise() -> OdeCocycle<f64, PiecewiseConstantOde<RandomEntries>> {
    let inner = RandomEntries::new(3, ParamDist::Uniform { lo: 0.0, hi: 1.5 }).unwrap();
    OdeCocycle::new(PiecewiseConstantOde { inner }, flow()).unwrap()
}

fn quasi_periodic() -> OdeCocycle<f64, QuasiPeriodicOde<f64>> {
    let a0 = m(&[&[-1.0, 0.5, 0.2], &[0.3, 0.0, 0.6], &[0.4, 0.2, -0.5]]);
    let a1 = m(&[&[0.5, 0.1, 0.1], &[0.2, 0.3, 0.1], &[0.1, 0.1, 0.2]]);
    let a2 = m(&[&[0.0, 0.1, 0.0], &[0.1, -0.4, 0.2], &[0.1, 0.0, 0.3]]);
    OdeCocycle::new(QuasiPeriodicOde::new(a0, a1, a2).unwrap(), DriverSystem::torus(DEFAULT_RHO).unwrap()).unwrap()
}

#[test]
fn integrate_examples() {
    let om = flow().sample_initial(1);
    let u0 = [0.6, -0.8];
    let (d, l) = integrate(&constant(Matrix::zeros(2, 2)), &om, &u0, 5.0).unwrap();
    assert!(linalg::norm2(&linalg::sub(&d, &u0)) < 1e-14 && l.abs() < 1e-14);

    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (d, l) = integrate(&constant(m(&[&[0.0, 1.0], &[1.0, 0.0]])), &om, &[h, h], 1.0).unwrap();
    assert!(linalg::norm2(&linalg::sub(&d, &[h, h])) < 1e-12);
    assert!((l - 1.0).abs() < 1e-10);

    let (d, l) = integrate(&constant(m(&[&[-1.0, 0.0], &[0.0, 2.0]])), &om, &[0.0, 1.0], 3.0).unwrap();
    assert!(d[0].abs() < 1e-14 && (l - 6.0).abs() < 1e-9);
}

#[test]
fn fundamental_matrix_matches_cosh_sinh() {
    let c = constant(m(&[&[0.0, 1.0], &[1.0, 0.0]]));
    let om = flow().sample_initial(2);
    for t in [0.3, 2.0, 10.0] {
        let (d, l) = fundamental_matrix(&c, &om, t).unwrap();
        let want = m(&[&[t.cosh(), t.sinh()], &[t.sinh(), t.cosh()]]);
        let got = d.scaled(l.exp());
        let rel = got.max_abs_diff(&want) / want.max_abs();
        assert!(rel <= 1e-9, "t = {t}: {rel:e}");
    }
}

#[test]
fn splitting_law_for_flows() {
    let pc = piecewise();
    let qp = quasi_periodic();
    let torus = TorusExampleModel::new(DEFAULT_RHO).unwrap().cocycle::<f64>();
    let cocycles: Vec<&dyn Cocycle<f64>> = vec![&pc, &qp, &torus];
    for (k, c) in cocycles.into_iter().enumerate() {
        let d = c.driver().clone();
        let om = d.sample_initial(10 + k as u64);
        let (s, t) = (1.37, 2.81);
        let (a, la) = fundamental_matrix(c, &om, s + t).unwrap();
        let (p1, l1) = fundamental_matrix(c, &om, s).unwrap();
        let (p2, l2) = fundamental_matrix(c, &d.advance(&om, s).unwrap(), t).unwrap();
        let b = p2.matmul(&p1).unwrap();
        let n = b.norm2();
        let lb = l1 + l2 + n.ln();
        assert!((la - lb).abs() <= 1e-8 * la.abs().max(1.0), "model {k}: {la} vs {lb}");
        assert!(a.max_abs_diff(&b.scaled(1.0 / n)) <= 1e-8, "model {k}");
    }
}

#[test]
fn cooperative_flows_stay_positive_and_obey_l1_bound() {
    let pc = piecewise();
    let d = flow();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for s in 0..10 {
        let om = d.sample_initial(s);
        let u0: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
        let n0: f64 = u0.iter().sum();
        for t in [0.5, 1.0, 2.0, 4.5] {
            let (dir, l) = integrate(&pc, &om, &u0, t).unwrap();
            assert!(dir.iter().all(|&x| x >= -1e-9));
            let l1: f64 = dir.iter().map(|x| x.abs()).sum::<f64>() * l.exp();
            let bound = l1_growth_bound::<f64, _>(&pc.model, &d, &om, t).unwrap();
            assert!(l1 <= bound * n0 * (1.0 + 1e-6));
        }
    }
}

#[test]
fn l1_bound_examples() {
    let om = flow().sample_initial(0);
    assert_eq!(l1_growth_bound(&ConstantOde::new(Matrix::zeros(2, 2)).unwrap(), &flow(), &om, 3.0).unwrap(), 1.0);
    let b = l1_growth_bound(&ConstantOde::new(m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap(), &flow(), &om, 1.0).unwrap();
    assert!((b - 2f64.exp()).abs() < 1e-12);

    let model = TorusExampleModel::new(DEFAULT_RHO).unwrap();
    let c = model.cocycle::<f64>();
    let od = model.driver();
    let om = od.sample_initial(3);
    for t in [0.5, 1.0, 2.0] {
        let (dir, l) = integrate(&c, &om, &[0.8, 0.2], t).unwrap();
        let realized = (dir[0].abs() + dir[1].abs()) * l.exp();
        assert!(realized <= l1_growth_bound::<f64, _>(&model, &od, &om, t).unwrap() * (1.0 + 1e-6));
    }
}

#[test]
fn o1_o2_examples() {
    let torus = TorusExampleModel::new(DEFAULT_RHO).unwrap();
    let td = torus.driver();
    assert!(check_o1::<f64, _>(&torus, &td, 1, 20, &[]).unwrap().passed());
    let rot = ConstantOde::new(m(&[&[0.0, -1.0], &[1.0, 0.0]])).unwrap();
    let r = check_o1(&rot, &flow(), 1, 3, &[]).unwrap();
    assert!(r.failed());
    assert!(matches!(r.witnesses[0], rds_floquet::report::Witness::FieldEntry { row: 0, col: 1, .. }));
    assert!(check_o1(&ConstantOde::new(Matrix::diag(&[-1.0, 3.0])).unwrap(), &flow(), 1, 3, &[]).unwrap().passed());

    let r = check_o2(&ConstantOde::new(m(&[&[1.0, 2.0], &[0.5, -1.0]])).unwrap(), &flow(), 1, 50, false).unwrap();
    match r.verdict {
        Verdict::Empirical { estimate } => assert!(estimate.mean == 2.0 && estimate.half_width == 0.0),
        v => panic!("{v:?}"),
    }
    match check_o2::<f64, _>(&torus, &td, 1, 200, false).unwrap().verdict {
        Verdict::Empirical { estimate } => assert_eq!(estimate.mean, 1.0),
        v => panic!("{v:?}"),
    }
}

#[test]
fn irreducibility_examples() {
    let ones = ConstantOde::new(Matrix::filled(2, 2, 1.0)).unwrap();
    let om = flow().sample_initial(0);
    let q = irreducibility_quantities::<f64, _>(&ones, &flow(), &om, Some(1.0), None).unwrap();
    assert!(q.a_tilde.iter().all(|&x| x.abs() < 1e-12));
    assert!(q.a_bar[0][1].abs() < 1e-12);
    assert!((q.beta_i[0] - 1.0).abs() < 1e-12 && (q.beta_lower - 1.0).abs() < 1e-12);
    assert!((q.beta_upper - 2f64.exp()).abs() < 1e-10);
    assert!(irreducibility_quantities::<f64, _>(&ones, &flow(), &om, Some(0.0), None).is_err());

    let torus = TorusExampleModel::new(DEFAULT_RHO).unwrap();
    let td = torus.driver();
    let om = td.sample_initial(5);
    let q = irreducibility_quantities::<f64, _>(&torus, &td, &om, Some(1.0), None).unwrap();
    assert!(q.a_bar[0][1].abs() < 1e-12 && q.a_bar[1][0].abs() < 1e-12);
    for i in 0..2 {
        assert!((q.beta_tilde_i[i] - q.a_tilde[i].exp()).abs() < 1e-12);
    }
    let reports = check_o3::<f64, _>(&torus, &td, 1, 5).unwrap();
    assert!(reports.iter().all(|r| !r.failed()));
}

#[test]
fn time_one_columns_dominate_chain_bounds() {
    // u_{j i}(ω) ≥ e^{ã_ii} δ^{k} / k! ... is implied by the weaker β̲ ≤ min entry bound
    let pc = piecewise();
    let d = flow();
    for s in 0..5 {
        let om = d.sample_initial(s);
        let q = irreducibility_quantities::<f64, _>(&pc.model, &d, &om, None, None).unwrap();
        let (f, l) = fundamental_matrix(&pc, &om, 1.0).unwrap();
        let fm = f.scaled(l.exp());
        for i in 0..3 {
            let col_min = (0..3).map(|j| fm[(j, i)]).fold(f64::INFINITY, f64::min);
            assert!(col_min >= q.beta_i[i] * (1.0 - 1e-8), "column {i}: {col_min} < {}", q.beta_i[i]);
        }
    }
}

#[test]
fn kappa_functional_examples() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let torus = TorusExampleModel::new(DEFAULT_RHO).unwrap();
    let om = DriverState::Torus { x1: 0.3, x2: 0.45 };
    let a: Matrix = field_at(&torus, &torus.driver(), &om, 0.0).unwrap();
    let k = kappa_functional(&a, &[h, h]).unwrap();
    assert!((k - (1.0 - 1.0 / 0.75f64.powi(2))).abs() < 1e-14);
    assert_eq!(kappa_functional(&Matrix::diag(&[3.0, -2.0]), &[1.0, 0.0]).unwrap(), 3.0);
    assert!(kappa_functional(&Matrix::diag(&[3.0, -2.0]), &[1.0, 1.0]).is_err());

    let s = m(&[&[2.0, 1.0, 0.0], &[1.0, 3.0, 1.0], &[0.0, 1.0, 4.0]]);
    let e = nalgebra::SymmetricEigen::new(nalgebra::DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]));
    let top = e.eigenvalues.imax();
    let v: Vec<f64> = e.eigenvectors.column(top).iter().copied().collect();
    assert!((kappa_functional(&s, &v).unwrap() - e.eigenvalues[top]).abs() < 1e-12);
}

#[test]
fn type_k_conjugacy() {
    let b = m(&[&[0.0, -1.0], &[-1.0, 0.0]]);
    assert_eq!(flip_off_blocks(&b, 1), m(&[&[0.0, 1.0], &[1.0, 0.0]]));
    assert_eq!(flip_off_blocks(&flip_off_blocks(&b, 1), 1), b);

    // (P1) field: diagonal blocks cooperative, off blocks nonpositive
    let a0 = m(&[&[-0.5, 0.4, -0.3], &[0.2, -0.1, -0.6], &[-0.2, -0.5, 0.3]]);
    let a1 = m(&[&[0.3, 0.1, -0.1], &[0.1, 0.2, -0.1], &[-0.1, -0.1, 0.1]]);
    let td = DriverSystem::torus(DEFAULT_RHO).unwrap();
    let inner = QuasiPeriodicOde::new(a0, a1, Matrix::zeros(3, 3)).unwrap();
    let coop = typek_to_cooperative(inner.clone(), &td, 2, 1, 1, 10).unwrap();
    assert!(check_o1::<f64, _>(&coop, &td, 1, 10, &[]).unwrap().passed());

    let bc = OdeCocycle::new(inner, td.clone()).unwrap();
    let ac = OdeCocycle::new(coop, td.clone()).unwrap();
    let om = td.sample_initial(8);
    let u0 = [0.3, 0.7, -0.4];
    let v0 = [0.3, 0.7, 0.4];
    for t in [0.5, 3.0] {
        let (du, lu) = integrate(&bc, &om, &u0, t).unwrap();
        let (dv, lv) = integrate(&ac, &om, &v0, t).unwrap();
        assert_eq!(lu, lv);
        assert_eq!(du[0], dv[0]);
        assert_eq!(du[1], dv[1]);
        assert_eq!(du[2], -dv[2]);
    }

    let bad = ConstantOde::new(m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
    assert!(typek_to_cooperative(bad, &flow(), 1, 1, 1, 3).is_err());
}
