use equivar::catalogue::ACTION_NAMES;
use equivar::critical::{
    certify_regular_critical, isotropy_algebra, omega_residual, phase_gradient, sample_regular_critical,
};
use equivar::{load_action, Error, PhasePoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

#[test]
fn free_circle_gradient() {
    let a = load_action("circle_on_circle").unwrap();
    let g = phase_gradient(&a, &PhasePoint::new("angle", vec![2.5], vec![0.7], vec![-1.5])).unwrap();
    assert_eq!((g.dq, g.dp, g.ds), (vec![0.0], vec![-1.5], vec![0.7]));
}

#[test]
fn gradient_vanishes_at_zero_fiber() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for name in ACTION_NAMES {
        let a = load_action(name).unwrap();
        let c = a.kind.global_chart();
        let q: Vec<f64> = a.charts[c].domain.iter().map(|&(lo, hi)| rng.random_range(lo + 0.2..hi - 0.2)).collect();
        let pt = PhasePoint::new(a.charts[c].id, q, vec![0.0; a.manifold_dim], vec![0.0; a.group_dim]);
        assert_eq!(phase_gradient(&a, &pt).unwrap().norm(), 0.0);
    }
}

#[test]
fn omega_residual_is_the_moment_map() {
    let a = load_action("circle_on_sphere").unwrap();
    assert_eq!(omega_residual(&a, "spherical", &[1.0, 2.0], &[0.8, 0.0]).unwrap(), vec![0.0]);
    assert_eq!(omega_residual(&a, "spherical", &[1.0, 2.0], &[0.0, 0.0]).unwrap(), vec![0.0]);
    assert_eq!(omega_residual(&a, "spherical", &[0.4, 5.0], &[-1.7, 0.3]).unwrap(), vec![0.3]);
}

#[test]
fn s_derivative_vanishes_on_the_zero_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for name in ACTION_NAMES {
        let a = load_action(name).unwrap();
        let c = a.kind.global_chart();
        let (ny, nz) = a.kind.regc_dims();
        for _ in 0..100 {
            let q: Vec<f64> = a.charts[c].domain.iter().map(|&(lo, hi)| rng.random_range(lo + 0.2..hi - 0.2)).collect();
            let y: Vec<f64> = (0..ny).map(|_| rng.random_range(-2.0..2.0)).collect();
            let z: Vec<f64> = (0..nz).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (p, _) = a.kind.regc_point::<f64>(a.manifold_dim, a.group_dim, &q, &y, &z);
            let s: Vec<f64> = (0..a.group_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let om = omega_residual(&a, a.charts[c].id, &q, &p).unwrap();
            let g = phase_gradient(&a, &PhasePoint::new(a.charts[c].id, q, p, s)).unwrap();
            assert!(om.iter().all(|x| x.abs() < 1e-12));
            assert!(g.ds.iter().zip(&om).all(|(x, y)| (x - y).abs() < 1e-15));
        }
    }
}

#[test]
fn isotropy_algebra_examples() {
    let a = load_action("circle_on_sphere").unwrap();
    assert!(isotropy_algebra(&a, "spherical", &[PI / 2.0, 0.3], 1e-10).unwrap().is_empty());
    assert_eq!(isotropy_algebra(&a, "north", &[0.0, 0.0], 1e-10).unwrap().len(), 1);
    let so3 = load_action("so3_on_sphere").unwrap();
    for q in [[0.3, 0.1], [1.5, 4.0], [2.8, 6.0]] {
        assert_eq!(isotropy_algebra(&so3, "spherical", &q, 1e-10).unwrap().len(), 1);
    }
    assert_eq!(isotropy_algebra(&so3, "south", &[0.0, 0.0], 1e-10).unwrap(), vec![vec![0.0, 0.0, 1.0]]);
}

#[test]
fn free_circle_transversal_hessian() {
    let a = load_action("circle_on_circle").unwrap();
    for th in [0.0, 1.0, 3.0, 6.0] {
        let c = certify_regular_critical(&a, &PhasePoint::new("angle", vec![th], vec![0.0], vec![0.0]), 1e-10).unwrap();
        assert_eq!(c.hess, vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]);
        assert_eq!((c.rank, c.signature, c.kernel_dim), (2, 0, 1));
        // orthonormal change of basis of the swap form: trace 0, det -1
        let t = &c.trans_hess;
        assert!((t[0][0] + t[1][1]).abs() < 1e-14);
        assert!((t[0][0] * t[1][1] - t[0][1] * t[1][0] + 1.0).abs() < 1e-14);
    }
}

#[test]
fn sphere_off_pole_points_are_nondegenerate() {
    let a = load_action("circle_on_sphere").unwrap();
    for (th, ph, pt) in [(0.4, 1.0, 0.3), (1.6, 4.0, -1.0), (2.7, 0.2, 0.0)] {
        let c = certify_regular_critical(&a, &PhasePoint::new("spherical", vec![th, ph], vec![pt, 0.0], vec![0.0]), 1e-10)
            .unwrap();
        assert_eq!((c.rank, c.signature), (2, 0));
    }
}

#[test]
fn poles_and_noncritical_points_are_rejected() {
    let a = load_action("circle_on_sphere").unwrap();
    let pole = PhasePoint::new("north", vec![0.0, 0.0], vec![0.5, -0.2], vec![0.0]);
    assert!(matches!(
        certify_regular_critical(&a, &pole, 1e-10),
        Err(Error::DegenerateTransversal { .. }) | Err(Error::NotCritical(_))
    ));
    let pole_s = PhasePoint::new("north", vec![0.0, 0.0], vec![0.5, -0.2], vec![0.7]);
    assert!(certify_regular_critical(&a, &pole_s, 1e-10).is_err());
    let off = PhasePoint::new("spherical", vec![1.0, 1.0], vec![0.0, 0.4], vec![0.0]);
    assert!(matches!(certify_regular_critical(&a, &off, 1e-10), Err(Error::NotCritical(_))));
}

#[test]
fn sampled_critical_points_are_certified() {
    for (name, count) in [("circle_on_circle", 50), ("circle_on_sphere", 100), ("so3_on_sphere", 50), ("torus_on_s3", 50)] {
        let a = load_action(name).unwrap();
        assert!(sample_regular_critical(&a, 0, 1).unwrap().is_empty());
        let s = sample_regular_critical(&a, count, 7).unwrap();
        assert_eq!(s.len(), count);
        let dim = 2 * a.manifold_dim + a.group_dim;
        for c in &s {
            assert!(c.psi.abs() <= 1e-10 && c.grad_norm <= 1e-10);
            assert_eq!(c.rank, 2 * a.kappa, "{name}");
            assert_eq!(c.kernel_dim, dim - 2 * a.kappa);
            assert!(c.tangent_angle.unwrap() <= 1e-6, "{name}: {:?}", c.tangent_angle);
            for i in 0..c.trans_hess.len() {
                for j in 0..i {
                    assert!((c.trans_hess[i][j] - c.trans_hess[j][i]).abs() < 1e-12);
                }
            }
        }
        // same seed, same samples
        let again = sample_regular_critical(&a, count, 7).unwrap();
        assert!(s.iter().zip(&again).all(|(x, y)| x.pt == y.pt && x.trans_hess == y.trans_hess));
    }
}

#[test]
fn certification_survives_a_chart_change() {
    for name in ["circle_on_sphere", "so3_on_sphere", "torus_on_s3"] {
        let a = load_action(name).unwrap();
        let g = a.kind.global_chart();
        let mut moved = 0;
        for c in sample_regular_critical(&a, 200, 9).unwrap() {
            let x = a.embed(g, &c.pt.q);
            let to = (1..a.charts.len()).find(|&k| a.kind.best_chart(&x) == k).unwrap_or(1);
            let Ok((q2, p2)) = a.change_chart(g, to, &c.pt.q, &c.pt.p) else { continue };
            let pt = PhasePoint::new(a.charts[to].id, q2, p2, c.pt.s.clone());
            let c2 = certify_regular_critical(&a, &pt, 1e-9).unwrap();
            assert_eq!((c2.rank, c2.signature), (c.rank, c.signature), "{name}");
            assert!(c2.psi.abs() <= 1e-10);
            moved += 1;
            if moved == 40 {
                break;
            }
        }
        assert!(moved >= 20, "{name}: only {moved} samples in a second chart");
    }
}

#[test]
fn vanishing_p_and_s_derivatives_force_vanishing_q_derivative() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for name in ACTION_NAMES {
        let a = load_action(name).unwrap();
        let c = a.kind.global_chart();
        let id = a.charts[c].id;
        let mut checked = 0;
        while checked < 100 {
            let q: Vec<f64> = a.charts[c].domain.iter().map(|&(lo, hi)| rng.random_range(lo + 0.2..hi - 0.2)).collect();
            let (ny, nz) = a.kind.regc_dims();
            let y: Vec<f64> = (0..ny).map(|_| rng.random_range(-2.0..2.0)).collect();
            let z: Vec<f64> = (0..nz).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (p, s) = a.kind.regc_point::<f64>(a.manifold_dim, a.group_dim, &q, &y, &z);
            let g = phase_gradient(&a, &PhasePoint::new(id, q, p, s)).unwrap();
            let left = g.dp.iter().chain(&g.ds).fold(0.0f64, |m, x| m.max(x.abs()));
            if left > 1e-12 {
                continue;
            }
            assert!(g.dq.iter().all(|x| x.abs() <= 1e-9), "{name}: {:?}", g.dq);
            checked += 1;
        }
    }
}
