use halfline_core::manufactured::{self, ExpPolyVec};
use halfline_core::operator::{op_norm, OperatorModel, PerturbationSet};
use halfline_core::{certifier, grid, pencil, principal, Grid, WeightedGridFunction};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spectrum() -> impl Strategy<Value = (f64, Vec<f64>)> {
    (0.2f64..5.0, prop::collection::vec(0.0f64..4.0, 1..5)).prop_map(|(l0, spread)| {
        (
            l0,
            spread.iter().map(|s| l0 * (1.0 + s)).chain([l0]).collect(),
        )
    })
}

fn matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| DMatrix::from_vec(n, n, v))
}

proptest! {
    #[test]
    fn symbol_above_lower_bound(
        l0 in 0.1f64..10.0,
        ratio in -0.999f64..0.999,
        spread in 0.0f64..20.0,
        xi in -1e3f64..1e3,
    ) {
        let kappa = 2.0 * l0 * ratio;
        let bound = pencil::symbol_lower_bound(l0, kappa).unwrap();
        let s = pencil::symbol(pencil::shifted(xi, kappa), l0 * (1.0 + spread)).norm();
        prop_assert!(s >= bound * (1.0 - 1e-12), "{s} < {bound}");
    }

    #[test]
    fn xi4_bound_at_most_one((l0, eig) in spectrum(), ratio in -0.99f64..0.99) {
        let a = OperatorModel::from_spectrum(&eig, None).unwrap();
        let xs = pencil::composite_xi_grid(l0, 400);
        let b = pencil::bound_xi4(&a, 2.0 * l0 * ratio, &xs).unwrap();
        prop_assert!(b <= 1.0 + 1e-12, "{b}");
    }

    #[test]
    fn a4_measured_below_spectral_bound((l0, eig) in spectrum(), ratio in -0.99f64..0.99) {
        let a = OperatorModel::from_spectrum(&eig, None).unwrap();
        let xs = pencil::composite_xi_grid(l0, 400);
        let b = pencil::bound_a4(&a, 2.0 * l0 * ratio, &xs).unwrap();
        prop_assert!(b.measured <= b.spectral_bound.max(1.0) * (1.0 + 1e-12));
    }

    #[test]
    fn resolvent_inverts_pencil(
        (l0, eig) in spectrum(),
        ratio in -0.99f64..0.99,
        xi in -50.0f64..50.0,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = eig.len();
        let q = manufactured::random_unit_vector(&mut rng, n);
        let a = OperatorModel::from_spectrum(&eig, None).unwrap();
        let kappa = 2.0 * l0 * ratio;
        let g = q.map(|x| num_complex::Complex64::new(x, -0.5 * x));
        let r = pencil::resolvent_apply(&a, xi, kappa, &g).unwrap();
        let back = pencil::pencil_apply(&a, pencil::shifted(xi, kappa), &r).unwrap();
        prop_assert!((back - &g).norm() <= 1e-9 * g.norm());
    }

    #[test]
    fn constants_even_and_growing(l0 in 0.1f64..10.0, r1 in 0.0f64..0.999, r2 in 0.0f64..0.999) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let c_lo = certifier::constants(l0, 2.0 * l0 * lo).unwrap();
        let c_hi = certifier::constants(l0, 2.0 * l0 * hi).unwrap();
        let c_neg = certifier::constants(l0, -2.0 * l0 * hi).unwrap();
        prop_assert_eq!(c_hi, c_neg);
        for j in 0..4 {
            prop_assert!(c_lo[j] <= c_hi[j]);
        }
    }

    #[test]
    fn certificate_is_scale_invariant(
        (l0, eig) in spectrum(),
        ratio in -0.99f64..0.99,
        s in 0.1f64..10.0,
        b in prop::array::uniform4(matrix(2)),
    ) {
        let eig: Vec<f64> = eig.into_iter().take(2).chain([l0, l0]).take(2).collect();
        let a = OperatorModel::from_spectrum(&eig, None).unwrap();
        let scaled: Vec<f64> = eig.iter().map(|x| s * x).collect();
        let sa = OperatorModel::from_spectrum(&scaled, None).unwrap();
        // A_j scaled by s^j leaves B_j = A_j A^{-j} unchanged
        let p = PerturbationSet::from_normalized(&a, b.clone()).unwrap();
        let raw = std::array::from_fn(|j| p.coefficient(j + 1) * s.powi(j as i32 + 1));
        let sp = PerturbationSet::new(&sa, raw).unwrap();
        let kappa = 2.0 * l0 * ratio;
        let c = certifier::certify(&a, &p, kappa);
        let sc = certifier::certify(&sa, &sp, s * kappa);
        prop_assert!((c.q.unwrap() - sc.q.unwrap()).abs() <= 1e-9 * c.q.unwrap().max(1.0));
        prop_assert_eq!(c.verdict, sc.verdict);
    }

    #[test]
    fn betas_are_normalized_norms(b in prop::array::uniform4(matrix(3)), l0 in 0.5f64..3.0) {
        let a = OperatorModel::from_spectrum(&[l0, 2.0 * l0, 3.0 * l0], None).unwrap();
        let p = PerturbationSet::from_normalized(&a, b.clone()).unwrap();
        let again = PerturbationSet::new(&a, std::array::from_fn(|j| p.coefficient(j + 1).clone())).unwrap();
        for (j, bj) in b.iter().enumerate() {
            prop_assert!((p.betas()[j] - op_norm(bj)).abs() <= 1e-12 * (1.0 + op_norm(bj)));
            prop_assert!((again.betas()[j] - p.betas()[j]).abs() <= 1e-9 * (1.0 + p.betas()[j]));
        }
    }

    #[test]
    fn quadrature_matches_closed_form_norm(seed in any::<u64>(), ratio in -0.9f64..0.9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kappa = 2.0 * ratio;
        let u = manufactured::random_w4_sample(&mut rng, 1.0, kappa, 2);
        let grid = manufactured::resolving_grid(u.terms()[0].rate, kappa, 2048);
        let exact = u.weighted_norm(kappa);
        let approx = grid::l2k_norm(&u.sample(grid));
        prop_assert!((approx - exact).abs() <= 1e-6 * exact, "{approx} vs {exact}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn principal_solve_is_linear(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, ratio in -0.9f64..0.9) {
        let a = OperatorModel::from_spectrum(&[1.0, 2.0], None).unwrap();
        let kappa = 2.0 * ratio;
        let grid = Grid::auto(1.0, kappa, 512).unwrap();
        let e0 = DVector::from_vec(vec![1.0, 0.0]);
        let e1 = DVector::from_vec(vec![0.3, -1.0]);
        let f = WeightedGridFunction::from_scalar(grid, &e0, |t| t * (-t).exp());
        let g = WeightedGridFunction::from_scalar(grid, &e1, |t| (-0.5 * t * t).exp());
        let solver = principal::PrincipalSolver::new(&a, grid).unwrap();
        let (uf, _) = solver.invert(&f).unwrap();
        let (ug, _) = solver.invert(&g).unwrap();
        let (ufg, _) = solver.invert(&f.scale(alpha).add(&g.scale(beta)).unwrap()).unwrap();
        let combo = uf.scale(alpha).add(&ug.scale(beta)).unwrap();
        let scale = grid::l2k_norm(&combo).max(1e-300);
        prop_assert!(grid::l2k_norm(&ufg.sub(&combo).unwrap()) <= 1e-10 * scale.max(grid::l2k_norm(&uf)));
    }
}

#[test]
fn principal_solution_satisfies_boundary_conditions() {
    let a = OperatorModel::from_spectrum(&[1.0, 1.5, 4.0], None).unwrap();
    for kappa in [-1.0, 0.0, 1.0] {
        let grid = Grid::auto(1.0, kappa, 4096).unwrap();
        let dir = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let f = WeightedGridFunction::from_scalar(grid, &dir, |t| (1.0 + t) * (-2.0 * t).exp());
        let r = principal::principal_solve(&f, &a, kappa).unwrap();
        for j in 0..3 {
            let d = grid::derivative_at_origin(&r.solution, j).unwrap();
            assert!(d.norm() < 1e-6, "kappa {kappa} order {j}: {}", d.norm());
        }
        assert!(r.residual < 1e-3);
    }
}

#[test]
fn principal_recovers_manufactured_solution() {
    let a = OperatorModel::from_spectrum(&[1.0, 3.0], None).unwrap();
    let exact = ExpPolyVec::t3_exp(1.0, DVector::from_vec(vec![0.6, 0.8]));
    for kappa in [-0.5, 0.0, 0.5] {
        let grid = manufactured::solve_grid(1.0, 1.0, kappa, 2048).unwrap();
        let f = exact.apply_p0(&a).sample(grid);
        let r = principal::principal_solve(&f, &a, kappa).unwrap();
        let err = r.solution.sub(&exact.sample(grid)).unwrap();
        let rel = grid::sobolev_norm(&err, &a).unwrap() / exact.sobolev_norm(&a, kappa);
        assert!(rel < 1e-5, "kappa {kappa}: {rel}");
    }
}
