use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rds_floquet::cocycle::Cocycle;
use rds_floquet::driver::{DriverSystem, TimeKind};
use rds_floquet::linalg::{dot, Mat};
use rds_floquet::matrix::*;
use rds_floquet::report::{find, Condition, Verdict, Witness};
use rds_floquet::Matrix;

fn iid() -> DriverSystem {
    DriverSystem::iid(TimeKind::Discrete)
}

fn m(rows: &[&[f64]]) -> Matrix {
    Mat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn random_positive(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let data = (0..n * n).map(|_| rng.random_range(0.05..2.0)).collect();
    Mat::from_vec(n, n, data).unwrap()
}

fn two_matrix_model() -> IidList<f64> {
    IidList::new(vec![m(&[&[2.0, 1.0], &[0.5, 1.0]]), m(&[&[1.0, 0.3], &[1.2, 3.0]])], None).unwrap()
}

#[test]
fn identity_and_all_ones_products() {
    let d = iid();
    let om = d.sample_initial(1);
    let (dir, log) = cocycle_product(&ConstantMatrix::new(Matrix::identity(3)).unwrap(), &d, &om, 100).unwrap();
    assert!(dir.max_abs_diff(&Matrix::identity(3)) < 1e-15);
    assert!(log.abs() < 1e-13);

    let j = Matrix::filled(3, 3, 1.0);
    let (dir, log) = cocycle_product(&ConstantMatrix::new(j.clone()).unwrap(), &d, &om, 5).unwrap();
    // direct fivefold product
    let mut p = Matrix::identity(3);
    for _ in 0..5 {
        p = j.matmul(&p).unwrap();
    }
    assert!(dir.scaled(log.exp()).max_abs_diff(&p) < 1e-12 * 81.0);
    assert!(p.max_abs_diff(&j.scaled(81.0)) == 0.0);
}

#[test]
fn product_splitting_law() {
    let d = iid();
    let model = two_matrix_model();
    let om = d.sample_initial(3);
    for (mm, k) in [(7u64, 13u64), (1000, 4000)] {
        let (a, la) = cocycle_product(&model, &d, &om, mm + k).unwrap();
        let (p1, l1) = cocycle_product(&model, &d, &om, mm).unwrap();
        let (p2, l2) = cocycle_product(&model, &d, &d.advance(&om, mm as f64).unwrap(), k).unwrap();
        let b = p2.matmul(&p1).unwrap();
        let s = b.norm2();
        let lb = l1 + l2 + s.ln();
        assert!((la - lb).abs() <= 1e-10 * la.abs().max(1.0), "{la} vs {lb}");
        assert!(a.max_abs_diff(&b.scaled(1.0 / s)) < 1e-10);
    }
}

#[test]
fn dual_step_examples_and_pairing() {
    let d = iid();
    let om = d.sample_initial(5);
    let s = m(&[&[1.0, 2.0], &[0.0, 1.0]]);
    let ds = dual_step(&ConstantMatrix::new(s).unwrap(), &d, &om).unwrap();
    assert_eq!(ds, m(&[&[1.0, 0.0], &[2.0, 1.0]]));
    let sym = m(&[&[2.0, 1.0], &[1.0, 3.0]]);
    assert_eq!(dual_step(&ConstantMatrix::new(sym.clone()).unwrap(), &d, &om).unwrap(), sym);

    let model = two_matrix_model();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let u: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let us: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let left = dot(&u, &dual_step(&model, &d, &om).unwrap().mul_vec(&us).unwrap());
        let back = d.advance(&om, -1.0).unwrap();
        let right = dot(&model.emit(&back).mul_vec(&u).unwrap(), &us);
        assert!((left - right).abs() <= 1e-12 * (dot(&u, &u) * dot(&us, &us)).sqrt());
    }

    // the dual of the dual is the primal one-step map
    let c = MatrixCocycle::new(model, d.clone()).unwrap();
    let dd = c.dual();
    let ddd = dd.dual();
    let mut f1 = Matrix::identity(2);
    let mut f2 = Matrix::identity(2);
    let l1 = c.propagate(&om, 1.0, &mut f1).unwrap();
    let l2 = ddd.propagate(&om, 1.0, &mut f2).unwrap();
    assert!(f1.scaled(l1.exp()).max_abs_diff(&f2.scaled(l2.exp())) < 1e-14);
}

#[test]
fn stats_of_spec_matrices() {
    let st = matrix_stats(&m(&[&[1.0, 2.0], &[3.0, 4.0]]));
    assert_eq!(st.col_min, vec![1.0, 2.0]);
    assert_eq!(st.col_max, vec![3.0, 4.0]);
    assert_eq!(st.row_min, vec![1.0, 3.0]);
    assert_eq!(st.row_max, vec![2.0, 4.0]);
    assert_eq!((st.min, st.max, st.min_row_sum, st.min_col_sum), (1.0, 4.0, 3.0, 4.0));
}

#[test]
fn d1_examples() {
    let d = iid();
    let ones = check_d1(&ConstantMatrix::new(Matrix::filled(2, 2, 1.0)).unwrap(), &d, 1, 10).unwrap();
    assert!(find(&ones, Condition::D1i).unwrap().passed());
    let sing = find(&ones, Condition::D1ii).unwrap();
    assert!(sing.failed());
    assert!(matches!(sing.witnesses[0], Witness::Singular { determinant, .. } if determinant == 0.0));

    let good = check_d1(&ConstantMatrix::new(m(&[&[2.0, 1.0], &[1.0, 1.0]])).unwrap(), &d, 1, 10).unwrap();
    assert!(find(&good, Condition::D1ii).unwrap().passed());
    match &find(&good, Condition::D1iii).unwrap().verdict {
        Verdict::Empirical { estimate } => {
            assert!((estimate.mean - 2f64.ln()).abs() < 1e-15);
            assert_eq!(estimate.half_width, 0.0);
        }
        v => panic!("unexpected verdict {v:?}"),
    }

    let neg = check_d1(&ConstantMatrix::new(m(&[&[2.0, -1.0], &[1.0, 1.0]])).unwrap(), &d, 1, 3).unwrap();
    let r = find(&neg, Condition::D1i).unwrap();
    assert!(r.failed());
    assert!(matches!(r.witnesses[0], Witness::Entry { row: 0, col: 1, .. }));
}

#[test]
fn d2_d3_on_constant_and_leslie() {
    let d = iid();
    let pos = ConstantMatrix::new(m(&[&[2.0, 1.0], &[1.0, 3.0]])).unwrap();
    for r in check_d2(&pos, &d, 1, 20, 1).unwrap().iter().chain(&check_d3(&pos, &d, 1, 20, 1).unwrap()) {
        assert!(r.passed(), "{r:?}");
        if let Verdict::Empirical { estimate } = &r.verdict {
            assert_eq!(estimate.half_width, 0.0);
        }
    }

    let leslie = LeslieModel::constant(&[1.0, 1.0, 1.0], &[1.0, 1.0]).unwrap();
    assert!(check_d2::<f64, _>(&leslie, &d, 1, 5, 1).unwrap().iter().all(|r| r.failed()));
    assert!(check_d2::<f64, _>(&leslie, &d, 1, 5, 3).unwrap().iter().all(|r| r.passed()));

    let zero = ConstantMatrix::new(m(&[&[2.0, 0.0], &[1.0, 3.0]])).unwrap();
    let r = check_d2(&zero, &d, 1, 3, 1).unwrap();
    assert!(r[0].failed() && !r[0].witnesses.is_empty());
}

#[test]
fn focusing_examples() {
    let c = focusing_certificate(&Matrix::filled(3, 3, 1.0)).unwrap();
    assert_eq!((c.kappa, c.kappa_star), (3.0, 3.0));
    assert!((c.beta(&[1.0, 0.0, 0.0]) - 3f64.sqrt()).abs() < 1e-15);
    assert_eq!(focusing_certificate(&m(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap().kappa, 4.0);
    assert!(focusing_certificate(&m(&[&[2.0, 0.0], &[1.0, 2.0]])).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn focusing_sandwich_holds(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_positive(&mut rng, n);
        let c = focusing_certificate(&s).unwrap();
        for _ in 0..20 {
            let u: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) }).collect();
            if u.iter().all(|&x| x == 0.0) {
                continue;
            }
            prop_assert!(c.sandwich_holds(&s, &u, 1e-12).unwrap());
        }
    }
}

#[test]
fn leslie_models() {
    let d = iid();
    let l3 = LeslieModel::constant(&[1.0, 1.0, 1.0], &[1.0, 1.0]).unwrap();
    assert!(leslie_n_step_positive(&l3, &d, 1, 10).unwrap().is_empty());
    let (p, _) = cocycle_product::<f64, _>(&l3, &d, &d.sample_initial(1), 3).unwrap();
    assert!(p.as_slice().iter().all(|&x| x > 0.0));

    let fib = LeslieModel::constant(&[1.0, 1.0], &[1.0]).unwrap();
    let s: Matrix = fib.emit(&d.sample_initial(0));
    assert_eq!(s, m(&[&[1.0, 1.0], &[1.0, 0.0]]));
    assert!(LeslieModel::constant(&[1.0, 0.0], &[1.0]).is_err());

    let random = LeslieModel::new(
        vec![ParamDist::Uniform { lo: 0.1, hi: 2.0 }; 4],
        vec![ParamDist::LogNormal { mu: -0.5, sigma: 0.3 }; 3],
    )
    .unwrap();
    assert!(leslie_n_step_positive(&random, &d, 9, 100).unwrap().is_empty());
}

#[test]
fn products_preserve_positivity() {
    let d = iid();
    let model = RandomEntries::new(3, ParamDist::Uniform { lo: 0.0, hi: 1.0 }).unwrap();
    let om = d.sample_initial(2);
    for n in [1, 10, 200] {
        let (p, _) = cocycle_product::<f64, _>(&model, &d, &om, n).unwrap();
        assert!(p.as_slice().iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn markov_emitted_models_follow_the_chain() {
    let d = DriverSystem::markov(vec![vec![0.9, 0.1], vec![0.4, 0.6]], TimeKind::Discrete).unwrap();
    let model = MarkovList::new(vec![Matrix::filled(2, 2, 1.0), Matrix::filled(2, 2, 2.0)]).unwrap();
    let om = d.sample_initial(4);
    for k in -5..5 {
        let w = d.advance(&om, k as f64).unwrap();
        let s: Matrix = model.emit(&w);
        assert_eq!(s[(0, 0)], 1.0 + w.chain_state().unwrap() as f64);
    }
}
