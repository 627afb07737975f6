use equivar::critical::phase_gradient;
use equivar::linalg;
use equivar::resolution::{
    alpha_chart_noncritical, blowup_forward, certify_weak_hessian, chain_map_jacobian, delta_substitution,
    jacobian_power, other_rho_chart, phi_closed_form, project_to_weak_critical, random_blowup_point,
    weak_critical_conditions, weak_gradient_norm, weak_transform_phase, BlowupPoint, ChainCtx,
};
use equivar::{load_action, Error, GroupActionSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CHAINS: [(&str, &str); 4] =
    [("circle_on_sphere", "north"), ("circle_on_sphere", "south"), ("torus_on_s3", "circle_a"), ("torus_on_s3", "circle_b")];

fn each_chain(mut f: impl FnMut(&GroupActionSpec, &ChainCtx, &str)) {
    for (name, chain) in CHAINS {
        let a = load_action(name).unwrap();
        let ctx = ChainCtx::new(&a, chain).unwrap();
        f(&a, &ctx, chain);
    }
}

#[test]
fn delta_substitution_truth_table() {
    assert_eq!(delta_substitution(&[0.3]), vec![0.3]);
    // two steps: (s1, s2) -> (s1, s1 s2) -> (s1 * s1 s2, s1 s2)
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..1000 {
        let s = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let t = delta_substitution(&s);
        assert!((t[0] - s[0] * s[0] * s[1]).abs() < 1e-15);
        assert!((t[1] - s[0] * s[1]).abs() < 1e-15);
        let prod = (t[0] * t[1]).abs();
        assert!((prod - s[0].abs().powi(3) * s[1].powi(2)).abs() < 1e-15);
    }
    for s in [[0.0, 0.5], [0.5, 0.0]] {
        assert_eq!(delta_substitution(&s).iter().product::<f64>(), 0.0);
    }
}

#[test]
fn zero_tau_maps_to_the_centre() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    each_chain(|a, ctx, chain| {
        for _ in 0..50 {
            let mut bp = random_blowup_point(ctx, chain, &mut rng);
            bp.sigma = vec![0.0];
            let pt = blowup_forward(a, &bp).unwrap();
            let centre = ctx.fermi(&bp.base.iter().copied().chain([0.0, 0.0]).collect::<Vec<_>>());
            assert_eq!(pt.q, centre);
            let b = ctx.lie(0.0, &bp.alpha, &bp.beta);
            let expect: Vec<f64> = (0..ctx.d)
                .map(|k| ctx.st.b_basis.iter().zip(&bp.beta).map(|(bv, w)| bv[k] * w).sum())
                .collect();
            assert_eq!(pt.s, b);
            assert!(pt.s.iter().zip(&expect).all(|(x, y)| (x - y).abs() < 1e-15));
            bp.alpha.iter_mut().for_each(|x| *x = 0.0);
            bp.beta.iter_mut().for_each(|x| *x = 0.0);
            bp.sigma = vec![0.6];
            assert!(blowup_forward(a, &bp).unwrap().s.iter().all(|&x| x == 0.0));
        }
    });
}

#[test]
fn factorization_holds_on_every_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    each_chain(|a, ctx, chain| {
        let mut worst = 0.0f64;
        for _ in 0..10_000 {
            let bp = random_blowup_point(ctx, chain, &mut rng);
            worst = worst.max(weak_transform_phase(a, &bp).unwrap().factor_residual);
        }
        assert!(worst <= 1e-10, "{chain}: {worst}");
    });
}

#[test]
fn weak_transform_at_zero_is_the_limit_of_the_quotient() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    each_chain(|a, ctx, chain| {
        for _ in 0..50 {
            let mut bp = random_blowup_point(ctx, chain, &mut rng);
            bp.sigma = vec![0.0];
            let at_zero = weak_transform_phase(a, &bp).unwrap().psi_wk;
            let t = 1e-6;
            bp.sigma = vec![t];
            let q1 = weak_transform_phase(a, &bp).unwrap().psi_tot / t;
            bp.sigma = vec![-t];
            let q2 = weak_transform_phase(a, &bp).unwrap().psi_tot / -t;
            assert!((0.5 * (q1 + q2) - at_zero).abs() < 1e-8, "{chain}: {} vs {at_zero}", 0.5 * (q1 + q2));
            bp.p.iter_mut().for_each(|x| *x = 0.0);
            assert_eq!(weak_transform_phase(a, &bp).unwrap().psi_wk, 0.0);
        }
    });
}

#[test]
fn conditions_at_the_origin_and_off_it() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    each_chain(|a, ctx, chain| {
        let mut bp = random_blowup_point(ctx, chain, &mut rng);
        bp.alpha.iter_mut().for_each(|x| *x = 0.0);
        bp.beta.iter_mut().for_each(|x| *x = 0.0);
        bp.p.iter_mut().for_each(|x| *x = 0.0);
        assert!(weak_critical_conditions(a, &bp, 1e-10).unwrap().all());
        if ctx.da > 0 {
            let mut off = project_to_weak_critical(ctx, &random_blowup_point(ctx, chain, &mut rng));
            off.sigma = vec![0.4];
            off.alpha[0] = 0.3;
            let c = weak_critical_conditions(a, &off, 1e-10).unwrap();
            assert!(!c.holds[0]);
            assert!(weak_gradient_norm(a, &off).unwrap() > 1e-3);
        }
    });
}

#[test]
fn gradient_vanishes_exactly_when_the_conditions_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let tol = 1e-8;
    each_chain(|a, ctx, chain| {
        for k in 0..1000 {
            let raw = random_blowup_point(ctx, chain, &mut rng);
            let bp = if k % 2 == 0 { project_to_weak_critical(ctx, &raw) } else { raw };
            let g = weak_gradient_norm(a, &bp).unwrap();
            let c = weak_critical_conditions(a, &bp, tol).unwrap().all();
            assert_eq!(g <= tol, c, "{chain}: gradient {g}");
            assert_eq!(c, k % 2 == 0);
        }
    });
}

#[test]
fn pole_hessian_has_the_block_form_at_sigma_zero() {
    let a = load_action("circle_on_sphere").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for chain in ["north", "south"] {
        let ctx = ChainCtx::new(&a, chain).unwrap();
        for _ in 0..20 {
            let mut raw = random_blowup_point(&ctx, chain, &mut rng);
            raw.sigma = vec![0.0];
            let bp = project_to_weak_critical(&ctx, &raw);
            let (rep, h) = certify_weak_hessian(&a, &bp).unwrap();
            assert_eq!(rep.wk_hess_rank, Some(2));
            // variables (beta, p1, p2): zero diagonal blocks, pairing off the diagonal
            let m = ctx.pairing_matrix(&bp);
            assert_eq!(h[0][0], 0.0);
            for i in 0..2 {
                for j in 0..2 {
                    assert!(h[1 + i][1 + j].abs() < 1e-14);
                }
                assert!((h[0][1 + i] - m[(i, 0)]).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn weak_hessian_rank_on_all_chains() {
    let mut rng = ChaCha8Rng::seed_from_u64(48);
    each_chain(|a, ctx, chain| {
        for k in 0..100 {
            let mut raw = random_blowup_point(ctx, chain, &mut rng);
            if k % 5 == 0 {
                raw.sigma = vec![0.0];
            }
            let bp = project_to_weak_critical(ctx, &raw);
            let (rep, _) = certify_weak_hessian(a, &bp).unwrap();
            assert_eq!(rep.wk_hess_rank, Some(2 * a.kappa), "{chain}");
            // the weak transform vanishes on its critical set
            assert!(rep.psi_wk.abs() <= 1e-10);
        }
        let raw = random_blowup_point(ctx, chain, &mut rng);
        let mut bad = raw.clone();
        bad.p = vec![1.0; ctx.n];
        bad.beta = vec![0.5; ctx.e];
        assert!(matches!(certify_weak_hessian(a, &bad), Err(Error::NotCritical(_))));
    });
}

#[test]
fn alpha_chart_has_no_critical_points() {
    let t = load_action("torus_on_s3").unwrap();
    for chain in ["circle_a", "circle_b"] {
        let m = alpha_chart_noncritical(&t, chain, 10_000, 5, 1.0).unwrap().unwrap();
        assert!(m > 1e-4, "{chain}: {m}");
        let mut last = m;
        for scale in [0.5, 0.25, 0.125] {
            let v = alpha_chart_noncritical(&t, chain, 2000, 5, scale).unwrap().unwrap();
            assert!(v > 0.0 && v.is_finite());
            last = last.min(v);
        }
        assert!(last > 0.0);
    }
    let s = load_action("circle_on_sphere").unwrap();
    assert_eq!(alpha_chart_noncritical(&s, "north", 10, 5, 1.0).unwrap(), None);
}

#[test]
fn jacobian_power_and_smooth_factor() {
    let mut rng = ChaCha8Rng::seed_from_u64(49);
    each_chain(|a, ctx, chain| {
        for _ in 0..50 {
            let bp = random_blowup_point(ctx, chain, &mut rng);
            let r = jacobian_power(a, &bp).unwrap();
            let tau = bp.tau()[0];
            assert_eq!(r.exponent, ctx.c + ctx.da - 1);
            assert!((r.power - tau.abs().powi(r.exponent as i32)).abs() < 1e-15);
            assert!((r.phi - phi_closed_form(ctx, &bp.q)).abs() < 1e-9 * r.phi, "{chain}");
            // the factor read off two different tau slices agrees
            let at = |s: f64| {
                let b = BlowupPoint { sigma: vec![s], ..bp.clone() };
                chain_map_jacobian(ctx, &b).unwrap() / s.abs().powi(r.exponent as i32)
            };
            let (f1, f2) = (at(0.2), at(-0.8));
            assert!((f1 - f2).abs() <= 1e-9 * f1.max(1.0), "{chain}: {f1} vs {f2}");
            let zero = BlowupPoint { sigma: vec![0.0], ..bp };
            assert_eq!(jacobian_power(a, &zero).unwrap().total, 0.0);
        }
    });
    let a = load_action("circle_on_sphere").unwrap();
    assert_eq!(ChainCtx::new(&a, "north").map(|c| c.c + c.da - 1).unwrap(), 1);
}

#[test]
fn weak_critical_points_map_to_critical_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    each_chain(|a, ctx, chain| {
        for _ in 0..200 {
            let mut raw = random_blowup_point(ctx, chain, &mut rng);
            if raw.sigma[0].abs() < 0.05 {
                raw.sigma = vec![0.5];
            }
            let bp = project_to_weak_critical(ctx, &raw);
            let pt = blowup_forward(a, &bp).unwrap();
            let g = phase_gradient(a, &pt).unwrap().norm();
            assert!(g <= 1e-8, "{chain}: {g}");
        }
    });
}

#[test]
fn spanning_set_ranks_add_up_to_kappa() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    each_chain(|a, ctx, chain| {
        for _ in 0..200 {
            let mut bp = random_blowup_point(ctx, chain, &mut rng);
            if bp.sigma[0].abs() < 1e-3 {
                bp.sigma = vec![0.3];
            }
            let (e, f) = ctx.spanning_sets(&bp);
            let rk = |s: &[Vec<f64>]| if s.is_empty() { 0 } else { linalg::rank(&linalg::from_cols(s, ctx.n), 1e-8) };
            assert_eq!(rk(&e) + rk(&f), a.kappa, "{chain}");
        }
    });
}

#[test]
fn second_rho_chart_gives_the_same_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    each_chain(|a, ctx, chain| {
        let mut checked = 0;
        while checked < 200 {
            let bp = random_blowup_point(ctx, chain, &mut rng);
            let Some((other, sign)) = other_rho_chart(ctx, &bp) else { continue };
            if other.sigma[0].abs() >= 1.0 {
                continue;
            }
            let (x, y) = (blowup_forward(a, &bp).unwrap(), blowup_forward(a, &other).unwrap());
            for (u, v) in x.q.iter().zip(&y.q).chain(x.p.iter().zip(&y.p)).chain(x.s.iter().zip(&y.s)) {
                assert!((u - v).abs() < 1e-12);
            }
            let (w1, w2) = (weak_transform_phase(a, &bp).unwrap().psi_wk, weak_transform_phase(a, &other).unwrap().psi_wk);
            assert!((w1 - sign * w2).abs() < 1e-10, "{chain}: {w1} vs {w2}");
            checked += 1;
        }
    });
}

#[test]
fn malformed_blowup_points_are_rejected() {
    let a = load_action("circle_on_sphere").unwrap();
    let ctx = ChainCtx::new(&a, "north").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let bp = random_blowup_point(&ctx, "north", &mut rng);
    let wrong = BlowupPoint { p: vec![0.0; 3], ..bp.clone() };
    assert!(matches!(weak_transform_phase(&a, &wrong), Err(Error::Invalid(_))));
    let far = BlowupPoint { sigma: vec![1.0], ..bp };
    assert!(matches!(blowup_forward(&a, &far), Err(Error::OutsideDomain(_))));
    assert!(ChainCtx::new(&a, "equator").is_err());
    let so3 = load_action("so3_on_sphere").unwrap();
    assert!(ChainCtx::new(&so3, "north").is_err());
}
