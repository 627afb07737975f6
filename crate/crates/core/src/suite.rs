//! The acceptance checks, shared by the `all` subcommand and the
//! `acceptance` test target.

use crate::amplitude::amplitude;
use crate::asymptotics::{
    brute_force_i, chain_chart_direct, cutoff_convergence, fit_asymptotics, geometric_mu, leading_coefficient_l0,
    principal_part_l0, residual_slope, resolved_chart_integral, resolved_chart_l0, QuadratureConfig,
};
use crate::catalogue::load_action;
use crate::critical::{principal_box, sample_regular_critical};
use crate::error::{Error, Result};
use crate::geometry::{dual_hessian, GroupActionSpec};
use crate::resolution::{
    certify_weak_hessian, project_to_weak_critical, random_blowup_point, weak_critical_conditions,
    weak_gradient_norm, weak_transform_phase, ChainCtx,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use std::f64::consts::TAU;
use std::str::FromStr;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Quick,
    Full,
}

impl FromStr for Budget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Budget::Quick),
            "full" => Ok(Budget::Full),
            _ => Err(Error::Invalid(format!("unknown budget {s}"))),
        }
    }
}

impl Budget {
    fn samples(self, full: usize) -> usize {
        match self {
            Budget::Full => full,
            Budget::Quick => (full / 10).max(100),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub value: f64,
    pub tolerance: String,
    pub seconds: f64,
    pub detail: Value,
}

impl CriterionResult {
    /// One-line summary.
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2} {:<28} value={:.6e} tol={} ({:.1}s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.value,
            self.tolerance,
            self.seconds
        )
    }
}

pub const CRITERIA: [(u32, &str); 10] = [
    (1, "free_baseline"),
    (2, "singular_case"),
    (3, "higher_kappa"),
    (4, "factorization"),
    (5, "first_fundamental"),
    (6, "second_fundamental"),
    (7, "resolution_independence"),
    (8, "cutoff_convergence"),
    (9, "epsilon_split"),
    (10, "differentiation"),
];

const SEED: u64 = 20240601;

struct Outcome {
    pass: bool,
    value: f64,
    tolerance: String,
    detail: Value,
    limit_s: Option<f64>,
}

fn c64(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

fn setup(name: &str, amp: &str) -> Result<(GroupActionSpec, crate::amplitude::Amplitude, QuadratureConfig)> {
    let a = load_action(name)?;
    let amp = amplitude(name, amp)?;
    let cfg = QuadratureConfig::for_action(&a);
    Ok((a, amp, cfg))
}

fn sweep(a: &GroupActionSpec, amp: &crate::amplitude::Amplitude, mus: &[f64], cfg: &QuadratureConfig) -> Result<Vec<(f64, Complex64)>> {
    mus.iter().map(|&m| Ok((m, brute_force_i(a, amp, m, cfg)?))).collect()
}

fn c1_free_baseline(_b: Budget) -> Result<Outcome> {
    let (a, amp, cfg) = setup("circle_on_circle", "bump_A")?;
    let l0 = leading_coefficient_l0(&a, &amp, &cfg)?;
    let i02 = brute_force_i(&a, &amp, 0.02, &cfg)?;
    let err = (i02 - l0 * (TAU * 0.02)).norm() / (TAU * 0.02 * l0.norm());
    let mus = geometric_mu(0.01, 0.1, 6);
    let s = sweep(&a, &amp, &mus, &cfg)?;
    let slope = residual_slope(&mus, &s.iter().map(|x| x.1).collect::<Vec<_>>(), 1.0, l0);
    Ok(Outcome {
        pass: err <= 0.03 && (1.8..=2.2).contains(&slope),
        value: err,
        tolerance: "rel_err<=3e-2, residual_slope in [1.8,2.2]".into(),
        detail: json!({"l0": c64(l0), "rel_err_mu_0.02": err, "residual_slope": slope}),
        limit_s: Some(60.0),
    })
}

fn c2_singular_case(_b: Budget) -> Result<Outcome> {
    let (a, amp, cfg) = setup("circle_on_sphere", "bump_B")?;
    let l0 = leading_coefficient_l0(&a, &amp, &cfg)?;
    let mus = [0.05, 0.035, 0.025, 0.018, 0.012, 0.008];
    let fit = fit_asymptotics(&sweep(&a, &amp, &mus, &cfg)?, None)?;
    let fit_k = fit_asymptotics(&fit.mu_values.iter().copied().zip(fit.i_values.iter().copied()).collect::<Vec<_>>(), Some(1.0))?;
    let err = rel(fit_k.l0_hat, l0);
    Ok(Outcome {
        pass: (0.95..=1.05).contains(&fit.kappa_hat) && err <= 0.05,
        value: fit.kappa_hat,
        tolerance: "kappa_hat in [0.95,1.05], L0_hat rel_err<=5e-2".into(),
        detail: json!({"l0": c64(l0), "l0_hat": c64(fit_k.l0_hat), "l0_mean": c64(fit_k.l0_mean), "rel_err": err, "kappa_hat": fit.kappa_hat}),
        limit_s: Some(600.0),
    })
}

fn c3_higher_kappa(_b: Budget) -> Result<Outcome> {
    let (a, amp, cfg) = setup("so3_on_sphere", "bump_C")?;
    let l0 = leading_coefficient_l0(&a, &amp, &cfg)?;
    let mus = geometric_mu(0.1 * 0.7f64.powi(5), 0.1, 6);
    let s = sweep(&a, &amp, &mus, &cfg)?;
    let fit = fit_asymptotics(&s, None)?;
    let fit_k = fit_asymptotics(&s, Some(2.0))?;
    let err = rel(fit_k.l0_hat, l0);
    Ok(Outcome {
        pass: (1.9..=2.1).contains(&fit.kappa_hat) && err <= 0.05,
        value: fit.kappa_hat,
        tolerance: "kappa_hat in [1.9,2.1], L0_hat rel_err<=5e-2".into(),
        detail: json!({"l0": c64(l0), "l0_hat": c64(fit_k.l0_hat), "l0_mean": c64(fit_k.l0_mean), "rel_err": err, "kappa_hat": fit.kappa_hat}),
        limit_s: Some(900.0),
    })
}

/// Chains of the actions the criteria run on.
fn suite_chains() -> Result<Vec<(GroupActionSpec, &'static str)>> {
    let a = load_action("circle_on_sphere")?;
    Ok(vec![(a.clone(), "north"), (a, "south")])
}

fn c4_factorization(b: Budget) -> Result<Outcome> {
    let n = b.samples(10_000);
    let mut worst = 0.0f64;
    let mut per = Vec::new();
    for (a, chain) in suite_chains()? {
        let ctx = ChainCtx::new(&a, chain)?;
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        let mut m = 0.0f64;
        for _ in 0..n {
            let bp = random_blowup_point(&ctx, chain, &mut rng);
            m = m.max(weak_transform_phase(&a, &bp)?.factor_residual);
        }
        per.push(json!({"chain": chain, "samples": n, "max_residual": m}));
        worst = worst.max(m);
    }
    Ok(Outcome { pass: worst <= 1e-10, value: worst, tolerance: "<=1e-10".into(), detail: json!(per), limit_s: None })
}

fn c5_first_fundamental(b: Budget) -> Result<Outcome> {
    let n = b.samples(1000);
    let tol = 1e-8;
    let mut miss = 0usize;
    let mut per = Vec::new();
    for (a, chain) in suite_chains()? {
        let ctx = ChainCtx::new(&a, chain)?;
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
        let (mut crit, mut non) = (0usize, 0usize);
        let mut local = 0usize;
        for k in 0..2 * n {
            let raw = random_blowup_point(&ctx, chain, &mut rng);
            let bp = if k % 2 == 0 { project_to_weak_critical(&ctx, &raw) } else { raw };
            let g = weak_gradient_norm(&a, &bp)?;
            let c = weak_critical_conditions(&a, &bp, tol)?.all();
            if (g <= tol) != c || (k % 2 == 0) != c {
                local += 1;
            }
            if c {
                crit += 1;
            } else {
                non += 1;
            }
        }
        per.push(json!({"chain": chain, "critical": crit, "noncritical": non, "misclassified": local}));
        miss += local;
    }
    Ok(Outcome { pass: miss == 0, value: miss as f64, tolerance: "0 misclassified at tol 1e-8".into(), detail: json!(per), limit_s: None })
}

fn c6_second_fundamental(b: Budget) -> Result<Outcome> {
    let n = b.samples(1000).max(100);
    let mut min_ratio = f64::INFINITY;
    let mut bad_rank = 0usize;
    let mut certified = 0usize;
    let mut zero_slices = 0usize;
    let sweep: Vec<f64> = (-9..=9).map(|k| k as f64 / 10.0).collect();
    let mut per = Vec::new();
    for (a, chain) in suite_chains()? {
        let ctx = ChainCtx::new(&a, chain)?;
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
        for k in 0..n {
            let mut raw = random_blowup_point(&ctx, chain, &mut rng);
            if k % 4 == 0 {
                raw.sigma = vec![0.0];
                zero_slices += 1;
            }
            let bp = project_to_weak_critical(&ctx, &raw);
            match certify_weak_hessian(&a, &bp) {
                Ok(_) => certified += 1,
                Err(Error::RankDeficient { .. }) => bad_rank += 1,
                Err(e) => return Err(e),
            }
        }
        let mut local = f64::INFINITY;
        for _ in 0..10 {
            let raw = random_blowup_point(&ctx, chain, &mut rng);
            let at = |s: f64| -> Result<f64> {
                let mut r = raw.clone();
                r.sigma = vec![s];
                let bp = project_to_weak_critical(&ctx, &r);
                Ok(certify_weak_hessian(&a, &bp)?.0.min_nonzero_eig.unwrap_or(0.0))
            };
            let reference = at(0.5)?;
            for &s in &sweep {
                local = local.min(at(s)? / reference);
            }
        }
        per.push(json!({"chain": chain, "min_eig_ratio": local}));
        min_ratio = min_ratio.min(local);
    }
    Ok(Outcome {
        pass: bad_rank == 0 && certified >= 100 && min_ratio >= 0.1,
        value: min_ratio,
        tolerance: "rank=2kappa at all points, min eig ratio>=0.1".into(),
        detail: json!({"certified": certified, "rank_failures": bad_rank, "sigma_zero_slices": zero_slices, "chains": per}),
        limit_s: None,
    })
}

fn c7_resolution_independence(_b: Budget) -> Result<Outcome> {
    let (a, amp, cfg) = setup("circle_on_sphere", "bump_B")?;
    let l0 = leading_coefficient_l0(&a, &amp, &cfg)?;
    let principal = principal_part_l0(&a, &amp, &cfg)?;
    let mut total = principal;
    let mut parts = vec![json!({"part": "principal", "value": c64(principal)})];
    for c in &a.chains {
        let v = resolved_chart_l0(&a, c.label, &amp, &cfg)?;
        parts.push(json!({"part": c.label, "value": c64(v)}));
        total += v;
    }
    let err = rel(total, l0);
    Ok(Outcome {
        pass: err <= 0.01,
        value: err,
        tolerance: "rel_err<=1e-2".into(),
        detail: json!({"l0": c64(l0), "sum": c64(total), "parts": parts}),
        limit_s: None,
    })
}

fn c8_cutoff(_b: Budget) -> Result<Outcome> {
    let (a, amp, cfg) = setup("circle_on_sphere", "bump_B")?;
    let l0 = leading_coefficient_l0(&a, &amp, &cfg)?;
    let eps = [0.2, 0.1, 0.05, 0.025];
    let seq = cutoff_convergence(&a, &amp, &eps, &cfg)?.ok_or_else(|| Error::Invalid("no singular strata".into()))?;
    let errs: Vec<f64> = seq.iter().map(|(_, v)| rel(*v, l0)).collect();
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    let at05 = errs[2];
    Ok(Outcome {
        pass: at05 <= 0.05 && monotone,
        value: at05,
        tolerance: "rel_err(eps=0.05)<=5e-2, decreasing in eps".into(),
        detail: json!({"eps": eps, "rel_err": errs, "l0": c64(l0)}),
        limit_s: None,
    })
}

fn c9_epsilon_split(_b: Budget) -> Result<Outcome> {
    let (a, amp, cfg) = setup("circle_on_sphere", "bump_B")?;
    let mus: [f64; 3] = [0.04, 0.02, 0.01];
    let kappa = a.kappa as f64;
    let mut min_slope = f64::INFINITY;
    let mut worst_add = 0.0f64;
    let mut per = Vec::new();
    for c in &a.chains {
        let depth = c.depth() as f64;
        let mut i2 = Vec::new();
        for &mu in &mus {
            let eps = mu.powf(1.0 / depth);
            i2.push(resolved_chart_integral(&a, c.label, &amp, mu, 0.0, eps, &cfg)?);
        }
        let lx: Vec<f64> = mus.iter().map(|m| m.ln()).collect();
        let ly: Vec<f64> = i2.iter().map(|v| v.norm().ln()).collect();
        // I2 identically zero satisfies the bound for any C
        let vanishes = i2.iter().all(|z| z.norm() == 0.0);
        let slope = if vanishes { f64::INFINITY } else { ls_slope(&lx, &ly) };
        let bound = mus.iter().zip(&i2).map(|(m, v)| v.norm() / m.powf(kappa + 1.0)).fold(0.0, f64::max);
        // additivity at the largest mu
        let mu = mus[0];
        let i1 = resolved_chart_integral(&a, c.label, &amp, mu, mu, 1.0, &cfg)?;
        let direct = chain_chart_direct(&a, c.label, &amp, mu, &cfg)?;
        let add = (i1 + i2[0] - direct).norm() / direct.norm();
        per.push(json!({"chain": c.label, "i2": i2.iter().map(|z| c64(*z)).collect::<Vec<_>>(), "i2_vanishes": vanishes,
            "slope": if vanishes { Value::Null } else { json!(slope) },
            "bound_c": bound, "i1": c64(i1), "direct": c64(direct), "additivity_rel_err": add}));
        min_slope = min_slope.min(slope);
        worst_add = worst_add.max(add);
    }
    Ok(Outcome {
        pass: min_slope >= kappa + 0.9 && worst_add <= 1e-3,
        value: min_slope,
        tolerance: format!("slope>={}, additivity rel_err<=1e-3", kappa + 0.9),
        detail: json!({"mu": mus, "chains": per}),
        limit_s: None,
    })
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Central finite-difference Hessian of `f` with step `h`.
#[allow(clippy::needless_range_loop)]
pub fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let k = x.len();
    let mut out = vec![vec![0.0; k]; k];
    let at = |di: usize, si: f64, dj: usize, sj: f64| {
        let mut y = x.to_vec();
        y[di] += si * h;
        y[dj] += sj * h;
        f(&y)
    };
    for i in 0..k {
        for j in i..k {
            let v = (at(i, 1.0, j, 1.0) - at(i, 1.0, j, -1.0) - at(i, -1.0, j, 1.0) + at(i, -1.0, j, -1.0)) / (4.0 * h * h);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

fn c10_differentiation(b: Budget) -> Result<Outcome> {
    let n = b.samples(100).min(100);
    let mut worst = 0.0f64;
    let mut block_fail = 0usize;
    let mut per = Vec::new();
    for name in ["circle_on_circle", "circle_on_sphere", "so3_on_sphere"] {
        let a = load_action(name)?;
        let chart = a.kind.global_chart();
        let (dim, d) = (a.manifold_dim, a.group_dim);
        // stay clear of the coordinate singularities of the spherical chart
        let mut bx = principal_box(&a);
        if a.kind == crate::catalogue::ActionKind::So3OnSphere {
            bx[0] = (0.15, std::f64::consts::PI - 0.15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
        let mut local = 0.0f64;
        for _ in 0..n {
            let mut x: Vec<f64> = bx.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect();
            x.extend((0..dim).map(|_| rng.random_range(-2.0..2.0)));
            x.extend((0..d).map(|_| rng.random_range(-1.0..1.0)));
            let (_, hd) = dual_hessian(|w| a.phase_t(chart, &w[..dim], &w[dim..2 * dim], &w[2 * dim..]), &x)?;
            let f = |w: &[f64]| a.phase_t::<f64>(chart, &w[..dim], &w[dim..2 * dim], &w[2 * dim..]);
            let hf = fd_hessian(&f, &x, 1e-4);
            let scale = hd.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
            let diff = hd.iter().flatten().zip(hf.iter().flatten()).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
            local = local.max(diff / scale);
        }
        let samples = sample_regular_critical(&a, n, SEED + 4)?;
        let mut local_block = 0usize;
        for s in &samples {
            let k = a.field_matrix_t::<f64>(chart, &s.pt.q);
            let h = &s.hess;
            let mut ok = true;
            for i in 0..dim {
                for j in 0..dim {
                    ok &= h[dim + i][dim + j] == 0.0;
                }
                for j in 0..d {
                    ok &= (h[dim + i][2 * dim + j] - k[j][i]).abs() <= 1e-12 * (1.0 + k[j][i].abs());
                }
            }
            for i in 0..d {
                for j in 0..d {
                    ok &= h[2 * dim + i][2 * dim + j] == 0.0;
                }
            }
            if !ok {
                local_block += 1;
            }
        }
        per.push(json!({"action": name, "max_rel_diff": local, "block_failures": local_block, "certified": samples.len()}));
        worst = worst.max(local);
        block_fail += local_block;
    }
    Ok(Outcome {
        pass: worst <= 1e-5 && block_fail == 0,
        value: worst,
        tolerance: "rel_diff<=1e-5, block matrix exact".into(),
        detail: json!(per),
        limit_s: None,
    })
}

/// Runs one criterion; errors become failing records.
pub fn run_criterion(id: u32, budget: Budget) -> Result<CriterionResult> {
    let name = CRITERIA.iter().find(|c| c.0 == id).map(|c| c.1).ok_or_else(|| Error::Invalid(format!("no criterion {id}")))?;
    let t = Instant::now();
    let out = match id {
        1 => c1_free_baseline(budget),
        2 => c2_singular_case(budget),
        3 => c3_higher_kappa(budget),
        4 => c4_factorization(budget),
        5 => c5_first_fundamental(budget),
        6 => c6_second_fundamental(budget),
        7 => c7_resolution_independence(budget),
        8 => c8_cutoff(budget),
        9 => c9_epsilon_split(budget),
        _ => c10_differentiation(budget),
    };
    let seconds = t.elapsed().as_secs_f64();
    Ok(match out {
        Ok(o) => {
            let in_time = o.limit_s.is_none_or(|l| seconds <= l);
            CriterionResult {
                id,
                name,
                pass: o.pass && in_time,
                value: o.value,
                tolerance: match o.limit_s {
                    Some(l) => format!("{}, runtime<={l}s", o.tolerance),
                    None => o.tolerance,
                },
                seconds,
                detail: o.detail,
            }
        }
        Err(e) => CriterionResult {
            id,
            name,
            pass: false,
            value: f64::NAN,
            tolerance: String::new(),
            seconds,
            detail: json!({"error": e.to_string()}),
        },
    })
}

/// Runs every criterion in order, reporting each as it finishes.
pub fn run_all(budget: Budget, mut report: impl FnMut(&CriterionResult)) -> Result<Vec<CriterionResult>> {
    let mut out = Vec::new();
    for (id, _) in CRITERIA {
        let r = run_criterion(id, budget)?;
        report(&r);
        out.push(r);
    }
    Ok(out)
}
