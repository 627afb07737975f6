use equivar::amplitude::amplitude;
use equivar::asymptotics::{
    brute_force_i, chain_partition, cutoff, cutoff_convergence, epsilon_split_diagnostic, fit_asymptotics,
    geometric_mu, leading_coefficient_l0, residual_slope, QuadratureConfig, SignatureConvention,
};
use equivar::{load_action, reference_l0, Error};
use num_complex::Complex64;
use std::f64::consts::TAU;

fn setup(name: &str, amp: &str) -> (equivar::GroupActionSpec, equivar::amplitude::Amplitude, QuadratureConfig) {
    let a = load_action(name).unwrap();
    let amp = amplitude(name, amp).unwrap();
    let cfg = QuadratureConfig::for_action(&a);
    (a, amp, cfg)
}

#[test]
fn zero_amplitude_gives_zero() {
    for name in equivar::catalogue::ACTION_NAMES {
        let (a, amp, cfg) = setup(name, "zero");
        assert_eq!(leading_coefficient_l0(&a, &amp, &cfg).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(brute_force_i(&a, &amp, 0.05, &cfg).unwrap(), Complex64::new(0.0, 0.0));
    }
    let (a, amp, cfg) = setup("circle_on_sphere", "zero");
    let split = epsilon_split_diagnostic(&a, "north", &amp, 0.04, &cfg).unwrap();
    assert_eq!((split.i1, split.i2), (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)));
}

#[test]
fn integrals_are_linear_in_the_amplitude() {
    for (name, id, mu) in [("circle_on_circle", "bump_A", 0.03), ("circle_on_sphere", "bump_B", 0.05)] {
        let (a, amp, cfg) = setup(name, id);
        let two = amp.scaled(2.0);
        let (l1, l2) = (leading_coefficient_l0(&a, &amp, &cfg).unwrap(), leading_coefficient_l0(&a, &two, &cfg).unwrap());
        assert!((l2 - l1 * 2.0).norm() <= 1e-12 * l1.norm());
        let (i1, i2) = (brute_force_i(&a, &amp, mu, &cfg).unwrap(), brute_force_i(&a, &two, mu, &cfg).unwrap());
        assert!((i2 - i1 * 2.0).norm() <= 1e-12 * i1.norm());
    }
}

#[test]
fn signature_conventions_agree_on_balanced_hessians() {
    let (a, amp, mut cfg) = setup("circle_on_circle", "bump_A");
    let q = leading_coefficient_l0(&a, &amp, &cfg).unwrap();
    cfg.convention = SignatureConvention::Unit;
    let u = leading_coefficient_l0(&a, &amp, &cfg).unwrap();
    assert_eq!(q, u);
    assert!((SignatureConvention::Quarter.factor(2) - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    assert!((SignatureConvention::Unit.factor(1) + 1.0).norm() < 1e-15);
}

#[test]
fn free_circle_matches_leading_term() {
    let (a, amp, cfg) = setup("circle_on_circle", "bump_A");
    let l0 = leading_coefficient_l0(&a, &amp, &cfg).unwrap();
    let r = reference_l0("circle_on_circle", "bump_A").unwrap();
    assert!((l0.re - r).abs() < 1e-9 * r);
    let mu = 0.02;
    let i = brute_force_i(&a, &amp, mu, &cfg).unwrap();
    assert!((i - l0 * (TAU * mu)).norm() <= 0.03 * TAU * mu * l0.norm());
    // halving mu roughly quarters the remainder
    let mus = geometric_mu(0.0125, 0.1, 4);
    let iv: Vec<Complex64> = mus.iter().map(|&m| brute_force_i(&a, &amp, m, &cfg).unwrap()).collect();
    let slope = residual_slope(&mus, &iv, 1.0, l0);
    assert!((1.8..=2.2).contains(&slope), "{slope}");
}

#[test]
fn too_coarse_fixed_resolution_is_reported() {
    let (a, amp, mut cfg) = setup("circle_on_circle", "bump_A");
    cfg.fiber_fixed = Some(8);
    assert!(matches!(brute_force_i(&a, &amp, 0.01, &cfg), Err(Error::ResolutionInsufficient { have: 8, .. })));
    assert!(matches!(brute_force_i(&a, &amp, -0.1, &cfg), Err(Error::Invalid(_))));
}

#[test]
fn cutoff_sequence() {
    let (a, amp, cfg) = setup("circle_on_circle", "bump_A");
    assert!(cutoff_convergence(&a, &amp, &[0.1], &cfg).unwrap().is_none());
    // the equatorial bump stays away from the poles: the cut-off changes nothing
    let (a, amp, cfg) = setup("circle_on_sphere", "bump_B_equator");
    let l0 = leading_coefficient_l0(&a, &amp, &cfg).unwrap();
    let seq = cutoff_convergence(&a, &amp, &[0.15, 0.1, 0.05], &cfg).unwrap().unwrap();
    for (_, v) in seq {
        assert_eq!(v, l0);
    }
    assert_eq!(cutoff(0.0, 0.1), 1.0);
    assert_eq!(cutoff(0.3, 0.1), 0.0);
}

#[test]
fn chain_partition_profile() {
    let a = load_action("circle_on_sphere").unwrap();
    let at = |th: f64| chain_partition(&a, "north", &[th.sin(), 0.0, th.cos()]);
    assert_eq!(at(0.0), 1.0);
    assert_eq!(at(0.5), 1.0);
    assert_eq!(at(1.0), 0.0);
    assert!(at(0.75) > 0.0 && at(0.75) < 1.0);
    assert_eq!(chain_partition(&a, "south", &[0.0, 0.0, 1.0]), 0.0);
}

#[test]
fn fit_recovers_a_constructed_expansion() {
    let (kappa, l0) = (2.0, Complex64::new(1.5, -0.25));
    let samples: Vec<(f64, Complex64)> =
        geometric_mu(0.005, 0.05, 6).into_iter().map(|m| (m, l0 * (TAU * m).powf(kappa) * (1.0 + 0.3 * m))).collect();
    let fit = fit_asymptotics(&samples, None).unwrap();
    assert!((fit.kappa_hat - kappa).abs() < 0.02);
    assert_eq!(fit.kappa_used, 2.0);
    assert!((fit.l0_hat - l0).norm() < 1e-10);
    assert!((fit.residual_slope - 3.0).abs() < 1e-6);
    assert!((fit.span_decades - 1.0).abs() < 1e-12);
    assert!(matches!(fit_asymptotics(&samples[..3], None), Err(Error::DegenerateFit(_))));
    let zeros: Vec<(f64, Complex64)> = samples.iter().map(|&(m, _)| (m, Complex64::new(0.0, 0.0))).collect();
    assert!(matches!(fit_asymptotics(&zeros, None), Err(Error::DegenerateFit(_))));
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let (a, amp, cfg) = setup("circle_on_sphere", "bump_B");
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| (brute_force_i(&a, &amp, 0.05, &cfg).unwrap(), leading_coefficient_l0(&a, &amp, &cfg).unwrap()))
    };
    let (one, three) = (run(1), run(3));
    assert_eq!(one.0.re.to_bits(), three.0.re.to_bits());
    assert_eq!(one.0.im.to_bits(), three.0.im.to_bits());
    assert_eq!(one.1.re.to_bits(), three.1.re.to_bits());
}

#[test]
fn south_chain_misses_the_sphere_bump() {
    // bump_B is supported away from the south pole tube
    let (a, amp, cfg) = setup("circle_on_sphere", "bump_B");
    let split = epsilon_split_diagnostic(&a, "south", &amp, 0.04, &cfg).unwrap();
    assert_eq!(split.eps, 0.04);
    assert_eq!(split.i2, Complex64::new(0.0, 0.0));
}

#[test]
fn torus_leading_coefficient_matches_brute_force() {
    let (a, amp, cfg) = setup("torus_on_s3", "bump_D");
    let l0 = leading_coefficient_l0(&a, &amp, &cfg).unwrap();
    let samples: Vec<(f64, Complex64)> =
        [0.06, 0.045, 0.035, 0.025].iter().map(|&m| (m, brute_force_i(&a, &amp, m, &cfg).unwrap())).collect();
    let fit = fit_asymptotics(&samples, Some(2.0)).unwrap();
    let err = (fit.l0_hat - l0).norm() / l0.norm();
    assert!(err < 0.05, "fit {} vs {l0}: {err}", fit.l0_hat);
}
