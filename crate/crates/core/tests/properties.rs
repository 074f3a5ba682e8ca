mod common;

use altgda::analysis::{
    check_orbit_bounds, jacobian_altgd, jacobian_simgd, stepsize_safety, volume_track,
};
use altgda::dynamics::{alt_gd_step, rollout, rollout_vs_opponent, sim_gd_step, Mode, Stage2Opponent};
use altgda::numerics::{det, hull_area_2d, spectral_norm_default, Point2, SquareMatrix};
use altgda::{payoff, payoff_agent2, GameInstance, JointState, PayoffMatrix, StepSizes};
use common::{oracle_spectral_norm, rel_err, to_nalgebra};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn matrix_strategy(max_dim: usize) -> impl Strategy<Value = PayoffMatrix> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(k1, k2)| {
        prop::collection::vec(-1.0f64..=1.0, k1 * k2)
            .prop_map(move |e| PayoffMatrix::new(k1, k2, e).unwrap())
    })
}

/// A game with `√(η1 η2)·‖A‖ = coupling·2` and a random start.
fn game_strategy(max_dim: usize, max_coupling: f64) -> impl Strategy<Value = GameInstance> {
    (matrix_strategy(max_dim), 0.02..max_coupling, 0.25f64..4.0, any::<u64>()).prop_map(
        |(a, c, ratio, seed)| {
            let norm = oracle_spectral_norm(&a).max(1e-3);
            let g = 2.0 * c / norm;
            let steps = StepSizes::new(g * ratio.sqrt(), g / ratio.sqrt()).unwrap();
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            let x1 = common::random_vec(&mut rng, a.rows(), 10.0);
            let x2 = common::random_vec(&mut rng, a.cols(), 10.0);
            GameInstance::new(a, steps, x1, x2).unwrap()
        },
    )
}

fn square_strategy(max_dim: usize) -> impl Strategy<Value = (SquareMatrix, SquareMatrix)> {
    (1..=max_dim).prop_flat_map(|n| {
        (
            prop::collection::vec(-2.0f64..=2.0, n * n),
            prop::collection::vec(-2.0f64..=2.0, n * n),
        )
            .prop_map(move |(a, b)| (SquareMatrix::new(n, a).unwrap(), SquareMatrix::new(n, b).unwrap()))
    })
}

fn cloud_strategy() -> impl Strategy<Value = Vec<Point2>> {
    prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0).prop_map(|(a, b)| [a, b]), 3..60)
}

fn nalgebra_square(m: &SquareMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.n(), m.n(), m.entries())
}

proptest! {
    #[test]
    fn payoffs_are_zero_sum(a in matrix_strategy(5), seed in any::<u64>()) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let x1 = common::random_vec(&mut rng, a.rows(), 5.0);
        let x2 = common::random_vec(&mut rng, a.cols(), 5.0);
        let g = GameInstance::new(a, StepSizes::new(0.1, 0.1).unwrap(), x1.clone(), x2.clone()).unwrap();
        let s = JointState::initial(x1, x2);
        prop_assert_eq!(payoff(&g, &s).unwrap() + payoff_agent2(&g, &s).unwrap(), 0.0);
    }

    #[test]
    fn payoff_is_bilinear(a in matrix_strategy(5), seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let (k1, k2) = (a.rows(), a.cols());
        let u = common::random_vec(&mut rng, k1, 5.0);
        let v = common::random_vec(&mut rng, k1, 5.0);
        let y = common::random_vec(&mut rng, k2, 5.0);
        let z = common::random_vec(&mut rng, k2, 5.0);
        let g = GameInstance::new(a, StepSizes::new(0.1, 0.1).unwrap(), u.clone(), y.clone()).unwrap();
        let p = |x1: &[f64], x2: &[f64]| payoff(&g, &JointState::initial(x1.to_vec(), x2.to_vec())).unwrap();
        let comb = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(a, b)| alpha * a + beta * b).collect() };
        let left = p(&comb(&u, &v), &y);
        let right = alpha * p(&u, &y) + beta * p(&v, &y);
        prop_assert!((left - right).abs() <= 1e-12 * (1.0 + left.abs().max(right.abs())) * 100.0);
        let left = p(&u, &comb(&y, &z));
        let right = alpha * p(&u, &y) + beta * p(&u, &z);
        prop_assert!((left - right).abs() <= 1e-12 * (1.0 + left.abs().max(right.abs())) * 100.0);
    }

    #[test]
    fn spectral_norm_matches_svd_and_transpose(a in matrix_strategy(6)) {
        let s = spectral_norm_default(&a).unwrap();
        let t = spectral_norm_default(&a.transpose()).unwrap();
        let oracle = oracle_spectral_norm(&a);
        prop_assert!(rel_err(s, oracle) <= 1e-8, "power {s} vs svd {oracle}");
        prop_assert!(rel_err(s, t) <= 1e-8);
    }

    #[test]
    fn det_matches_nalgebra_and_is_multiplicative((m, n) in square_strategy(6)) {
        let dm = det(&m);
        let oracle = nalgebra_square(&m).determinant();
        let scale = m.entries().iter().map(|v| v.abs()).fold(1.0, f64::max).powi(m.n() as i32);
        prop_assert!((dm - oracle).abs() <= 1e-10 * scale);
        let mn = m.matmul(&n).unwrap();
        let lhs = det(&mn);
        let rhs = dm * det(&n);
        let scale2 = scale * n.entries().iter().map(|v| v.abs()).fold(1.0, f64::max).powi(n.n() as i32) * 10.0;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale2, "{lhs} vs {rhs}");
    }

    #[test]
    fn hull_area_ignores_order_and_scales_with_det(
        cloud in cloud_strategy(),
        shift in 0usize..60,
        l in prop::array::uniform4(-2.0f64..2.0),
    ) {
        let base = hull_area_2d(&cloud);
        let mut rotated = cloud.clone();
        let k = shift % rotated.len();
        rotated.rotate_left(k);
        rotated.reverse();
        let again = hull_area_2d(&rotated);
        prop_assert!((base.area - again.area).abs() <= 1e-12 * base.area.max(1.0));

        // No triangle of input points can be larger than the hull.
        let mut largest: f64 = 0.0;
        for i in 0..cloud.len() {
            for j in i + 1..cloud.len() {
                for k in j + 1..cloud.len() {
                    let (a, b, c) = (cloud[i], cloud[j], cloud[k]);
                    let t = ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs() / 2.0;
                    largest = largest.max(t);
                }
            }
        }
        prop_assert!(largest <= base.area * (1.0 + 1e-12) + 1e-12);

        let mapped: Vec<Point2> = cloud
            .iter()
            .map(|p| [l[0] * p[0] + l[1] * p[1], l[2] * p[0] + l[3] * p[1]])
            .collect();
        let d = (l[0] * l[3] - l[1] * l[2]).abs();
        let image = hull_area_2d(&mapped);
        prop_assert!((image.area - d * base.area).abs() <= 1e-9 * (d * base.area).max(1e-6));
    }

    #[test]
    fn scalar_altgd_is_the_closed_form_matrix(
        a in -2.0f64..2.0,
        eta1 in 0.01f64..1.5,
        eta2 in 0.01f64..1.5,
        x1 in -50.0f64..50.0,
        x2 in -50.0f64..50.0,
    ) {
        let g = common::scalar_game(a, eta1, eta2, x1, x2);
        let next = alt_gd_step(&g, &g.initial).unwrap();
        let e1 = x1 + eta1 * a * x2;
        let e2 = -eta2 * a * x1 + (1.0 - eta1 * eta2 * a * a) * x2;
        prop_assert!((next.x1[0] - e1).abs() <= 1e-12 * (1.0 + e1.abs()));
        prop_assert!((next.x2[0] - e2).abs() <= 1e-12 * (1.0 + e2.abs()) * 10.0);
    }

    #[test]
    fn simgd_scales_energy_by_one_plus_eta_squared(
        eta in 0.01f64..1.0,
        x1 in -50.0f64..50.0,
        x2 in -50.0f64..50.0,
    ) {
        prop_assume!(x1.abs() + x2.abs() > 1e-3);
        let g = common::scalar_game(1.0, eta, eta, x1, x2);
        let traj = rollout(&g, Mode::Sim, 30).unwrap();
        let factor = 1.0 + eta * eta;
        for w in traj.states.windows(2) {
            let ratio = w[1].norm_sq() / w[0].norm_sq();
            prop_assert!(rel_err(ratio, factor) <= 1e-12);
        }
    }

    #[test]
    fn stage2_opponent_reproduces_altgd_bitwise(g in game_strategy(5, 0.95), horizon in 0usize..200) {
        let alt = rollout(&g, Mode::Alt, horizon).unwrap();
        let mut opp = Stage2Opponent::new(&g);
        let vs = rollout_vs_opponent(&g, &mut opp, horizon).unwrap();
        prop_assert_eq!(alt.states, vs.states);
    }

    #[test]
    fn altgd_jacobian_has_unit_determinant(g in game_strategy(5, 2.0)) {
        let j = jacobian_altgd(&g).unwrap();
        prop_assert!((det(&j) - 1.0).abs() <= 1e-12);
        prop_assert!((nalgebra_square(&j).determinant() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn simgd_jacobian_determinant(g in game_strategy(5, 2.0)) {
        let j = jacobian_simgd(&g).unwrap();
        let a = to_nalgebra(&g.matrix);
        let k2 = g.k2();
        let prod = g.steps.eta1() * g.steps.eta2();
        let expected = (DMatrix::<f64>::identity(k2, k2) + a.transpose() * &a * prod).determinant();
        let d = det(&j);
        prop_assert!(rel_err(d, expected) <= 1e-9);
        prop_assert!(d >= 1.0 - 1e-12);
    }

    #[test]
    fn jacobians_match_the_update_maps(g in game_strategy(4, 0.95)) {
        let z: Vec<f64> = g.initial.x1.iter().chain(&g.initial.x2).cloned().collect();
        for (j, step) in [
            (jacobian_altgd(&g).unwrap(), alt_gd_step as fn(&GameInstance, &JointState) -> altgda::Result<JointState>),
            (jacobian_simgd(&g).unwrap(), sim_gd_step),
        ] {
            let next = step(&g, &g.initial).unwrap();
            let lin = j.apply(&z).unwrap();
            let got: Vec<f64> = next.x1.iter().chain(&next.x2).cloned().collect();
            for (a, b) in lin.iter().zip(&got) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()) * 10.0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn safe_orbits_respect_energy_bounds(g in game_strategy(5, 0.99)) {
        let traj = rollout(&g, Mode::Alt, 100_000).unwrap();
        let cert = stepsize_safety(&g).unwrap();
        prop_assert!(cert.is_safe());
        let check = check_orbit_bounds(&traj, &cert).unwrap();
        prop_assert!(!check.vacuous);
        if let Some(f) = check.first_failure() {
            prop_assert!(false, "bound failure at t = {}: {:?}", f.t, f);
        }
    }

    #[test]
    fn altgd_preserves_cloud_area(
        a in prop_oneof![-2.0f64..-0.1, 0.1f64..2.0],
        c in 0.05f64..0.95,
        ratio in 0.25f64..4.0,
        cloud in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0).prop_map(|(a, b)| [a, b]), 3..1000),
    ) {
        let g0 = 2.0 * c / a.abs();
        let g = common::scalar_game(a, g0 * ratio.sqrt(), g0 / ratio.sqrt(), 0.0, 0.0);
        let areas = volume_track(&g, &cloud, Mode::Alt, 100).unwrap();
        prop_assume!(!areas[0].degenerate && areas[0].area > 1e-6);
        for h in &areas {
            prop_assert!(rel_err(h.area, areas[0].area) <= 1e-9, "{} vs {}", h.area, areas[0].area);
        }
    }
}
