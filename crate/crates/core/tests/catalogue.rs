use equivar::catalogue::ACTION_NAMES;
use equivar::critical::isotropy_algebra;
use equivar::jet::{push_forward, Dual};
use equivar::resolution::jacobian_exponent;
use equivar::{load_action, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

#[test]
fn catalogue_contents() {
    let names: Vec<&str> = ACTION_NAMES.to_vec();
    assert_eq!(names, ["circle_on_circle", "circle_on_sphere", "so3_on_sphere", "torus_on_s3"]);
    let kap: Vec<usize> = names.iter().map(|n| load_action(n).unwrap().kappa).collect();
    assert_eq!(kap, [1, 1, 2, 2]);
    let free = load_action("circle_on_circle").unwrap();
    assert_eq!(free.strata.len(), 1);
    assert!(free.strata[0].principal);
    assert!(free.chains.is_empty());
    let so3 = load_action("so3_on_sphere").unwrap();
    assert!(so3.chains.is_empty() && so3.group_dim == 3);
    assert!(load_action("torus_on_s3").unwrap().extended);
    assert!(matches!(load_action("sphere_on_torus"), Err(Error::UnknownAction(_))));
}

#[test]
fn pole_strata_dimensions() {
    let a = load_action("circle_on_sphere").unwrap();
    for label in ["north_pole", "south_pole"] {
        let st = a.stratum(label).unwrap();
        assert_eq!(st.dims, (2, 0, 1));
        assert!(!st.principal);
    }
    let t = load_action("torus_on_s3").unwrap();
    for label in ["circle_a", "circle_b"] {
        assert_eq!(t.stratum(label).unwrap().dims, (2, 1, 1));
    }
}

#[test]
fn lie_bases_are_orthonormal_and_complementary() {
    for name in ACTION_NAMES {
        let a = load_action(name).unwrap();
        for st in a.strata.iter().filter(|s| !s.principal) {
            let (_, d, e) = st.dims;
            assert_eq!(d + e, a.group_dim);
            let all: Vec<&Vec<f64>> = st.a_basis.iter().chain(&st.b_basis).collect();
            assert_eq!(all.len(), a.group_dim);
            for (i, u) in all.iter().enumerate() {
                for (j, v) in all.iter().enumerate() {
                    let ip: f64 = u.iter().zip(v.iter()).map(|(x, y)| x * y).sum();
                    assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn chains_satisfy_the_kappa_inequality() {
    for name in ACTION_NAMES {
        let a = load_action(name).unwrap();
        for ch in &a.chains {
            assert_eq!(ch.depth(), 1);
            assert_eq!(ch.branch.last(), Some(&"trivial"));
            for &lvl in &ch.levels {
                assert!(jacobian_exponent(&a.strata[lvl]) >= a.kappa, "{name}/{}", ch.label);
            }
        }
    }
}

/// Fermi coordinates `(x, v)` with `|v| < r` at random.
fn fermi_sample(rng: &mut ChaCha8Rng, cd: usize, r: f64) -> (Vec<f64>, Vec<f64>) {
    let x: Vec<f64> = (0..cd).map(|_| rng.random_range(0.0..TAU)).collect();
    let rad = rng.random_range(0.0..r);
    let ang = rng.random_range(0.0..TAU);
    (x, vec![rad * ang.cos(), rad * ang.sin()])
}

#[test]
fn exponential_maps_are_unit_speed_geodesics() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for name in ["circle_on_sphere", "torus_on_s3"] {
        let a = load_action(name).unwrap();
        for st in a.strata.iter().filter(|s| !s.principal) {
            let chart = a.chart_index(st.chart).unwrap();
            let cd = st.center_dim;
            // exp(x, 0) = x
            let (x, _) = fermi_sample(&mut rng, cd, 1.0);
            let m0 = a.kind.fermi(st.label, &x, &[0.0, 0.0]);
            assert_eq!(&m0[..cd], &x[..]);
            assert!(m0[cd..].iter().all(|&c| c == 0.0));
            for _ in 0..20 {
                let (x, v) = fermi_sample(&mut rng, cd, 1.2);
                let speed = |t: f64| {
                    let xv: Vec<f64> = x.iter().copied().chain(v.iter().map(|c| c * t)).collect();
                    let w: Vec<f64> = std::iter::repeat_n(0.0, cd).chain(v.iter().copied()).collect();
                    let vel = push_forward(|u: &[Dual<f64>]| a.kind.fermi(st.label, &u[..cd], &u[cd..]), &xv, &w);
                    let m = a.kind.fermi(st.label, &x, &xv[cd..]);
                    let g = a.metric_t::<f64>(chart, &m);
                    let mut acc = 0.0;
                    for i in 0..vel.len() {
                        for j in 0..vel.len() {
                            acc += vel[i] * g[i][j] * vel[j];
                        }
                    }
                    acc.sqrt()
                };
                let n = 200;
                let len: f64 = (0..n).map(|k| speed((k as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64;
                let vn = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                assert!((len - vn).abs() < 1e-8, "{name}/{}: {len} vs {vn}", st.label);
            }
        }
    }
}

#[test]
fn lambda_is_the_linearized_action_on_the_normal_fiber() {
    // X~_B at exp(x, v) equals d exp (0, lambda(B) v): the Fermi map is
    // equivariant for the isotropy subgroup
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for name in ["circle_on_sphere", "torus_on_s3"] {
        let a = load_action(name).unwrap();
        for st in a.strata.iter().filter(|s| !s.principal) {
            let chart = a.chart_index(st.chart).unwrap();
            let cd = st.center_dim;
            for _ in 0..50 {
                let (x, v) = fermi_sample(&mut rng, cd, 1.0);
                for (b, lam) in st.b_basis.iter().zip(&st.lambda) {
                    let lv: Vec<f64> = (0..2).map(|i| lam[i][0] * v[0] + lam[i][1] * v[1]).collect();
                    let xv: Vec<f64> = x.iter().chain(&v).copied().collect();
                    let w: Vec<f64> = std::iter::repeat_n(0.0, cd).chain(lv).collect();
                    let pushed = push_forward(|u: &[Dual<f64>]| a.kind.fermi(st.label, &u[..cd], &u[cd..]), &xv, &w);
                    let m = a.kind.fermi(st.label, &x, &v);
                    let field = a.field_t::<f64>(chart, &m, b);
                    for i in 0..field.len() {
                        assert!((field[i] - pushed[i]).abs() < 1e-12, "{name}/{}", st.label);
                    }
                }
                // lambda(B) is skew, hence a representation of the abelian isotropy algebra
                for lam in &st.lambda {
                    assert!((lam[0][1] + lam[1][0]).abs() < 1e-15 && lam[0][0] == 0.0 && lam[1][1] == 0.0);
                }
            }
        }
    }
}

#[test]
fn isotropy_at_centres_matches_declared_basis() {
    for name in ["circle_on_sphere", "torus_on_s3"] {
        let a = load_action(name).unwrap();
        for st in a.strata.iter().filter(|s| !s.principal) {
            let q = a.kind.fermi(st.label, &vec![1.3; st.center_dim], &[0.0, 0.0]);
            let iso = isotropy_algebra(&a, st.chart, &q, 1e-10).unwrap();
            assert_eq!(iso.len(), st.dims.2);
            for (u, v) in iso.iter().zip(&st.b_basis) {
                let ip: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
                assert!((ip.abs() - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn rotation_field_grows_linearly_away_from_the_poles() {
    let a = load_action("circle_on_sphere").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let q = [rng.random_range(1e-4..PI - 1e-4), rng.random_range(0.0..TAU)];
        let x = a.embed(0, &q);
        let f = a.field_t::<f64>(0, &q, &[1.0]);
        let g = a.metric_t::<f64>(0, &q);
        let norm = (f[1] * f[1] * g[1][1]).sqrt();
        let dist = a.kind.singular_distance(&x).unwrap();
        worst = worst.min(norm / dist);
    }
    assert!(worst > 0.7, "{worst}");
}
