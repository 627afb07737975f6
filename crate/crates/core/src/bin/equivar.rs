use clap::{Args, Parser, Subcommand, ValueEnum};
use equivar::amplitude::{amplitude, amplitude_ids, Amplitude};
use equivar::asymptotics::{
    brute_force_i, cutoff_convergence, fit_asymptotics, geometric_mu, leading_coefficient_l0, QuadratureConfig,
    SignatureConvention,
};
use equivar::catalogue::ACTION_NAMES;
use equivar::critical::sample_regular_critical;
use equivar::resolution::{certify_weak_hessian, project_to_weak_critical, random_blowup_point, weak_transform_phase, ChainCtx};
use equivar::suite::{run_all, Budget};
use equivar::{load_action, reference_l0, Error, GroupActionSpec};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::f64::consts::TAU;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser, Debug, Serialize)]
#[command(name = "equivar", version, about = "Asymptotics of equivariant oscillatory integrals")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug, Serialize)]
enum Cmd {
    /// List the catalogue of group actions.
    ListActions(Common),
    /// Certify sampled points of the regular critical set.
    VerifyCritical(Common),
    /// Check the weak transform on sampled blow-up points.
    ResolveCheck(Common),
    /// Leading coefficient by quadrature over the regular critical set.
    ComputeL0(Common),
    /// Brute-force I(mu) on a geometric mu grid.
    SweepMu(Common),
    /// Sweep and fit the power law.
    Fit(Common),
    /// Leading coefficient with the singular locus cut off.
    Cutoff(Common),
    /// Run the acceptance suite.
    All(Common),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
enum Conv {
    Quarter,
    Unit,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
enum BudgetArg {
    Quick,
    Full,
}

#[derive(Args, Debug, Serialize)]
struct Common {
    #[arg(long, default_value = "circle_on_circle")]
    action: String,
    /// Amplitude id; defaults to the first registered one.
    #[arg(long)]
    amplitude: Option<String>,
    /// Chain label; defaults to every chain of the action.
    #[arg(long)]
    chain: Option<String>,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    mu_min: f64,
    #[arg(long, default_value_t = 0.1)]
    mu_max: f64,
    #[arg(long, default_value_t = 6)]
    mu_points: usize,
    /// Cut-off radii for `cutoff`.
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05,0.025")]
    eps: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Conv::Quarter)]
    signature_convention: Conv,
    /// Emit JSON lines instead of plain text on stdout.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = BudgetArg::Full)]
    budget: BudgetArg,
}

/// Provenance record written to stderr.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    action: String,
    seed: u64,
    config_hash: String,
    tool_version: &'static str,
    wall_time_s: f64,
    output_checksum: String,
}

struct Out {
    json: bool,
    buf: String,
    ok: bool,
}

impl Out {
    fn record(&mut self, v: Value) {
        let line = if self.json {
            v.to_string()
        } else {
            match v {
                Value::Object(m) => m.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" "),
                other => other.to_string(),
            }
        };
        self.buf.push_str(&line);
        self.buf.push('\n');
    }
}

fn c64(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(path: &PathBuf, header: &[&str], rows: &[Vec<String>]) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Invalid(e.to_string()))?;
    w.write_record(header).map_err(|e| Error::Invalid(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::Invalid(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Invalid(e.to_string()))
}

fn setup(c: &Common) -> Result<(GroupActionSpec, Amplitude, QuadratureConfig), Error> {
    let a = load_action(&c.action)?;
    let id = match &c.amplitude {
        Some(id) => id.clone(),
        None => amplitude_ids(&c.action)?[0].to_string(),
    };
    let amp = amplitude(&c.action, &id)?;
    let mut cfg = QuadratureConfig::for_action(&a);
    cfg.convention = match c.signature_convention {
        Conv::Quarter => SignatureConvention::Quarter,
        Conv::Unit => SignatureConvention::Unit,
    };
    Ok((a, amp, cfg))
}

fn mu_grid(c: &Common) -> Result<Vec<f64>, Error> {
    if c.mu_points < 2 || !(c.mu_min > 0.0 && c.mu_min < c.mu_max) {
        return Err(Error::Invalid("need 0 < mu-min < mu-max and at least 2 points".into()));
    }
    Ok(geometric_mu(c.mu_min, c.mu_max, c.mu_points))
}

fn list_actions(out: &mut Out) -> Result<(), Error> {
    for name in ACTION_NAMES {
        let a = load_action(name)?;
        let strata: Vec<Value> = a
            .strata
            .iter()
            .map(|s| json!({"label": s.label, "isotropy": s.isotropy_label, "principal": s.principal, "dims": [s.dims.0, s.dims.1, s.dims.2]}))
            .collect();
        out.record(json!({
            "action": a.name, "manifold_dim": a.manifold_dim, "group_dim": a.group_dim, "kappa": a.kappa,
            "extended": a.extended, "charts": a.charts.iter().map(|c| c.id).collect::<Vec<_>>(),
            "strata": strata, "chains": a.chains.iter().map(|c| c.label).collect::<Vec<_>>(),
            "amplitudes": amplitude_ids(name)?,
        }));
    }
    Ok(())
}

fn verify_critical(c: &Common, out: &mut Out) -> Result<(), Error> {
    let a = load_action(&c.action)?;
    let tol = 1e-10;
    let samples = sample_regular_critical(&a, c.samples, c.seed)?;
    for (i, s) in samples.iter().enumerate() {
        let pass = s.grad_norm <= tol && s.rank == 2 * a.kappa && s.psi.abs() <= tol;
        out.ok &= pass;
        out.record(json!({
            "index": i, "chart": s.pt.chart, "q": s.pt.q, "p": s.pt.p, "s": s.pt.s, "psi": s.psi,
            "grad_norm": s.grad_norm, "rank": s.rank, "signature": s.signature, "kernel_dim": s.kernel_dim,
            "tangent_angle": s.tangent_angle, "tol": tol, "pass": pass,
        }));
    }
    eprintln!("verify-critical: {} samples, all certified: {}", samples.len(), out.ok);
    Ok(())
}

fn resolve_check(c: &Common, out: &mut Out) -> Result<(), Error> {
    let a = load_action(&c.action)?;
    let chains: Vec<&str> = match &c.chain {
        Some(ch) => vec![a.chain(ch)?.label],
        None => a.chains.iter().map(|ch| ch.label).collect(),
    };
    if chains.is_empty() {
        out.record(json!({"action": a.name, "applicable": false}));
        return Ok(());
    }
    let tol = 1e-10;
    for chain in chains {
        let ctx = ChainCtx::new(&a, chain)?;
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let (mut max_res, mut min_rank, mut min_eig) = (0.0f64, usize::MAX, f64::INFINITY);
        for i in 0..c.samples {
            let raw = random_blowup_point(&ctx, chain, &mut rng);
            let rep = weak_transform_phase(&a, &raw)?;
            let crit = project_to_weak_critical(&ctx, &raw);
            let (hrep, rank) = match certify_weak_hessian(&a, &crit) {
                Ok((r, _)) => {
                    let k = r.wk_hess_rank.unwrap_or(0);
                    (Some(r), k)
                }
                Err(Error::RankDeficient { rank, .. }) => (None, rank),
                Err(e) => return Err(e),
            };
            let eig = hrep.as_ref().and_then(|r| r.min_nonzero_eig);
            let pass = rep.factor_residual <= tol && rank == 2 * a.kappa;
            out.ok &= pass;
            max_res = max_res.max(rep.factor_residual);
            min_rank = min_rank.min(rank);
            if let Some(e) = eig {
                min_eig = min_eig.min(e);
            }
            out.record(json!({
                "chain": chain, "index": i, "sigma": raw.sigma, "rho": raw.rho, "psi_tot": rep.psi_tot,
                "psi_wk": rep.psi_wk, "factor": rep.factor, "factor_residual": rep.factor_residual,
                "conds": hrep.as_ref().and_then(|r| r.conds), "wk_hess_rank": rank, "min_nonzero_eig": eig,
                "tol": tol, "pass": pass,
            }));
        }
        out.record(json!({"chain": chain, "summary": true, "max_residual": max_res, "min_rank": min_rank,
            "min_nonzero_eig": min_eig, "expected_rank": 2 * a.kappa}));
        eprintln!("resolve-check {chain}: max residual {max_res:.3e}, min rank {min_rank}, min eig {min_eig:.3e}");
    }
    Ok(())
}

fn compute_l0(c: &Common, out: &mut Out) -> Result<(), Error> {
    let (a, amp, cfg) = setup(c)?;
    let l0 = leading_coefficient_l0(&a, &amp, &cfg)?;
    let reference = reference_l0(&c.action, &amp.id).ok();
    let tol = 1e-3;
    let rel = reference.map(|r| if r == 0.0 { l0.norm() } else { (l0 - Complex64::new(r, 0.0)).norm() / r.abs() });
    let pass = rel.is_none_or(|e| e <= tol);
    out.ok &= pass;
    out.record(json!({"action": a.name, "amplitude": amp.id, "l0": c64(l0), "reference": reference,
        "rel_err": rel, "tol": tol, "pass": pass, "convention": cfg.convention}));
    if let Some(p) = &c.csv {
        write_csv(p, &["action", "amplitude", "re_L0", "im_L0"], &[vec![a.name.into(), amp.id.clone(), sig17(l0.re), sig17(l0.im)]])?;
    }
    eprintln!("L0 = {} + {}i", l0.re, l0.im);
    Ok(())
}

fn sweep(c: &Common, out: &mut Out, fit: bool) -> Result<(), Error> {
    let (a, amp, cfg) = setup(c)?;
    let mus = mu_grid(c)?;
    let l0 = leading_coefficient_l0(&a, &amp, &cfg)?;
    let mut samples = Vec::new();
    for &mu in &mus {
        let t = Instant::now();
        let i = brute_force_i(&a, &amp, mu, &cfg)?;
        samples.push((mu, i));
        eprintln!("mu = {mu:.6}: I = {} + {}i ({:.2}s)", i.re, i.im, t.elapsed().as_secs_f64());
    }
    let kappa = a.kappa as f64;
    let (reference, records): (Complex64, Vec<(f64, Complex64)>) = if fit {
        let f = fit_asymptotics(&samples, None)?;
        let fk = fit_asymptotics(&samples, Some(kappa))?;
        let tol = 0.05 * kappa;
        let pass = (f.kappa_hat - kappa).abs() <= tol;
        out.ok &= pass;
        out.record(json!({"action": a.name, "amplitude": amp.id, "kappa_hat": f.kappa_hat, "kappa": kappa,
            "l0_hat": c64(fk.l0_hat), "l0_mean": c64(fk.l0_mean), "l0_quadrature": c64(l0),
            "residual_slope": fk.residual_slope, "span_decades": fk.span_decades, "tol": tol, "pass": pass}));
        (fk.l0_hat, samples.clone())
    } else {
        (l0, samples.clone())
    };
    let mut rows = Vec::new();
    for (mu, i) in records {
        let res = (i - reference * (TAU * mu).powf(kappa)).norm();
        if !fit {
            out.record(json!({"mu": mu, "re_I": i.re, "im_I": i.im, "abs_residual": res}));
        }
        rows.push(vec![sig17(mu), sig17(i.re), sig17(i.im), sig17(res)]);
    }
    if let Some(p) = &c.csv {
        write_csv(p, &["mu", "re_I", "im_I", "abs_residual"], &rows)?;
    }
    Ok(())
}

fn cutoff(c: &Common, out: &mut Out) -> Result<(), Error> {
    let (a, amp, cfg) = setup(c)?;
    let mut eps = c.eps.clone();
    eps.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let Some(seq) = cutoff_convergence(&a, &amp, &eps, &cfg)? else {
        out.record(json!({"action": a.name, "applicable": false}));
        return Ok(());
    };
    let l0 = leading_coefficient_l0(&a, &amp, &cfg)?;
    let mut rows = Vec::new();
    let mut last = f64::INFINITY;
    for (e, v) in seq {
        let res = (v - l0).norm();
        let pass = res <= last;
        out.ok &= pass;
        last = res;
        out.record(json!({"eps": e, "l0_eps": c64(v), "l0": c64(l0), "abs_residual": res, "pass": pass, "tol": "non-increasing"}));
        rows.push(vec![sig17(e), sig17(v.re), sig17(v.im), sig17(res)]);
    }
    if let Some(p) = &c.csv {
        write_csv(p, &["eps", "re_L0", "im_L0", "abs_residual"], &rows)?;
    }
    Ok(())
}

fn all(c: &Common, out: &mut Out) -> Result<(), Error> {
    let budget = match c.budget {
        BudgetArg::Quick => Budget::Quick,
        BudgetArg::Full => Budget::Full,
    };
    let res = run_all(budget, |r| eprintln!("{}", r.line()))?;
    for r in &res {
        out.ok &= r.pass;
        out.record(serde_json::to_value(r).map_err(|e| Error::Invalid(e.to_string()))?);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("EQUIVAR_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("EQUIVAR_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let start = Instant::now();
    let (name, common) = match &cli.cmd {
        Cmd::ListActions(c) => ("list-actions", c),
        Cmd::VerifyCritical(c) => ("verify-critical", c),
        Cmd::ResolveCheck(c) => ("resolve-check", c),
        Cmd::ComputeL0(c) => ("compute-l0", c),
        Cmd::SweepMu(c) => ("sweep-mu", c),
        Cmd::Fit(c) => ("fit", c),
        Cmd::Cutoff(c) => ("cutoff", c),
        Cmd::All(c) => ("all", c),
    };
    let mut out = Out { json: common.json, buf: String::new(), ok: true };
    let res = match &cli.cmd {
        Cmd::ListActions(_) => list_actions(&mut out),
        Cmd::VerifyCritical(c) => verify_critical(c, &mut out),
        Cmd::ResolveCheck(c) => resolve_check(c, &mut out),
        Cmd::ComputeL0(c) => compute_l0(c, &mut out),
        Cmd::SweepMu(c) => sweep(c, &mut out, false),
        Cmd::Fit(c) => sweep(c, &mut out, true),
        Cmd::Cutoff(c) => cutoff(c, &mut out),
        Cmd::All(c) => all(c, &mut out),
    };
    if let Err(e) = &res {
        out.ok = false;
        out.record(json!({"command": name, "error": e.to_string(), "pass": false}));
        eprintln!("error: {e}");
    }
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let _ = lock.write_all(out.buf.as_bytes());
    let _ = lock.flush();
    let manifest = RunManifest {
        command: name.into(),
        action: common.action.clone(),
        seed: common.seed,
        config_hash: hex(&Sha256::digest(serde_json::to_string(&cli).unwrap_or_default().as_bytes())),
        tool_version: env!("CARGO_PKG_VERSION"),
        wall_time_s: start.elapsed().as_secs_f64(),
        output_checksum: hex(&Sha256::digest(out.buf.as_bytes())),
    };
    eprintln!("manifest: {}", serde_json::to_string(&manifest).unwrap_or_default());
    if out.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
