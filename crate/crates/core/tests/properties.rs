//! Property tests for the algebraic identities shared across modules.

use bianchi_core::bianchi::{bianchi_residual, rotate_tuple, tuple_space_basis, CurvatureTuple};
use bianchi_core::curvature::{adjugate3, first_bianchi_project, sharp_structure};
use bianchi_core::linalg::{random_rotation, random_symmetric};
use bianchi_core::ode::{eigen_ode_rhs, integrate, StepControl};
use bianchi_core::rd::{fourier_field, laplacian, step, MatrixField};
use bianchi_core::{CurvatureOperator, SeedStream};
use nalgebra::{DVector, Matrix3};
use proptest::prelude::{any, prop, prop_assert, prop_assert_eq, proptest, ProptestConfig, Strategy};
use rand::Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn sym3(e: [f64; 6]) -> Matrix3<f64> {
    Matrix3::new(e[0], e[1], e[2], e[1], e[3], e[4], e[2], e[4], e[5])
}

fn entries() -> impl Strategy<Value = [f64; 6]> {
    prop::array::uniform6(-10.0..10.0f64)
}

fn operator(n: usize, seed: u64) -> CurvatureOperator {
    let m = random_symmetric(n * (n - 1) / 2, &mut SeedStream::new(seed).rng("operator", 0));
    if n == 3 {
        CurvatureOperator::new(3, m).expect("symmetric")
    } else {
        first_bianchi_project(n, &m).expect("supported dimension")
    }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn adjugate_matches_structure_constants(e in entries()) {
        let m = sym3(e);
        let dm = nalgebra::DMatrix::from_fn(3, 3, |i, j| m[(i, j)]);
        let s = sharp_structure(3, &dm).unwrap();
        let a = adjugate3(&m);
        let scale = 1.0 + m.norm_squared();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((s[(i, j)] - a[(i, j)]).abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn trace_of_phi_dominates_scal_squared(e in entries()) {
        let r = CurvatureOperator::from_matrix3(&sym3(e));
        let s = r.scalar();
        let excess = r.phi().unwrap().scalar() - 2.0 / 3.0 * s * s;
        let l = r.eigenvalues().unwrap();
        let spread = ((l[0] - l[1]).powi(2) + (l[0] - l[2]).powi(2) + (l[1] - l[2]).powi(2)) / 6.0;
        prop_assert!((excess - spread).abs() <= 1e-9 * (1.0 + r.norm().powi(2)));
    }

    #[test]
    fn identity_multiples_attain_equality(c in -10.0..10.0f64) {
        let r = CurvatureOperator::identity(3).scale(c);
        let excess = r.phi().unwrap().scalar() - 2.0 / 3.0 * r.scalar().powi(2);
        prop_assert!(excess.abs() <= 1e-9 * (1.0 + c * c));
    }

    #[test]
    fn phi_is_rotation_equivariant(n in 3usize..=5, seed in any::<u64>()) {
        let r = operator(n, seed);
        let q = random_rotation(n, &mut SeedStream::new(seed).rng("rotation", 0));
        let lhs = r.phi().unwrap().rotate(&q).unwrap();
        let rhs = r.rotate(&q).unwrap().phi().unwrap();
        prop_assert!((&lhs - &rhs).norm() <= 1e-9 * (1.0 + r.norm().powi(2)));
    }

    #[test]
    fn ricci_trace_is_scal(n in 3usize..=6, seed in any::<u64>()) {
        let r = operator(n, seed);
        prop_assert!((r.ricci().trace() - r.scalar()).abs() <= 1e-10 * (1.0 + r.norm()));
    }

    #[test]
    fn kernel_is_closed_under_combination_and_rotation(seed in any::<u64>()) {
        let basis = tuple_space_basis(3).unwrap();
        let mut rng = SeedStream::new(seed).rng("kernel", 0);
        let c: DVector<f64> = DVector::from_fn(basis.dim(), |_, _| rng.random_range(-1.0..1.0));
        let t = CurvatureTuple::from_coords(3, &(&basis.columns * c)).unwrap();
        prop_assert!(bianchi_residual(&t) <= 1e-9);
        let q = random_rotation(3, &mut rng);
        prop_assert!(bianchi_residual(&rotate_tuple(&q, &t).unwrap()) <= 1e-9);
        let raw = CurvatureTuple::from_coords(3, &DVector::from_fn(basis.ambient_dim, |_, _| rng.random_range(-1.0..1.0))).unwrap();
        prop_assert!(bianchi_residual(&basis.project(&raw)) <= 1e-9);
    }

    #[test]
    fn eigen_rhs_commutes_with_permutations(l in prop::array::uniform3(-5.0..5.0f64)) {
        let d = eigen_ode_rhs(&l);
        let p = eigen_ode_rhs(&[l[2], l[0], l[1]]);
        prop_assert_eq!(p, [d[2], d[0], d[1]]);
        let m = CurvatureOperator::diagonal(3, &l).unwrap().phi().unwrap();
        for (i, di) in d.iter().enumerate() {
            prop_assert!((m.matrix()[(i, i)] - di).abs() <= 1e-12 * (1.0 + di.abs()));
        }
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn backward_integration_recovers_the_start(l in prop::array::uniform3(-0.5..0.5f64), seed in any::<u64>()) {
        let q = random_rotation(3, &mut SeedStream::new(seed).rng("rotation", 0));
        let r0 = CurvatureOperator::diagonal(3, &l).unwrap().rotate(&q).unwrap();
        let ctl = StepControl::default();
        let fwd = integrate(&r0, 0.5, &ctl).unwrap();
        let back = integrate(fwd.last(), -0.5, &ctl).unwrap();
        prop_assert!((back.last() - &r0).norm() <= 1e-5 * (1.0 + r0.norm()));
    }

    #[test]
    fn laplacian_is_linear_and_mean_free(seed in any::<u64>(), s in -3.0..3.0f64, dims in 1usize..=2) {
        let stream = SeedStream::new(seed);
        let a = fourier_field(12, dims, 0.3, 1.0, 4, &stream.child("a")).unwrap();
        let b = fourier_field(12, dims, -0.2, 2.0, 3, &stream.child("b")).unwrap();
        let combo = MatrixField::new(12, dims, a.cells.iter().zip(&b.cells).map(|(x, y)| x + y * s).collect()).unwrap();
        let (la, lb, lc) = (laplacian(&a), laplacian(&b), laplacian(&combo));
        let scale = 144.0 * (1.0 + s.abs()) * 10.0;
        for i in 0..combo.len() {
            prop_assert!((lc.cells[i] - la.cells[i] - lb.cells[i] * s).amax() <= 1e-12 * scale);
        }
        prop_assert!(lc.mean().amax() <= 1e-12 * scale);
        let h = 1.0 / 12.0;
        let next = step(&a, 0.4 * h * h / (2.0 * dims as f64), false);
        prop_assert!((next.mean() - a.mean()).amax() <= 1e-12);
    }
}
