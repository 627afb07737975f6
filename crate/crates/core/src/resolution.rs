//! Blow-up coordinates along an isotropy chain, total and weak transform of
//! the phase, and the Jacobian of the resolved chart.
//!
//! A depth-one chain over a centre `Z` with Fermi coordinates `(x, v)` uses
//! the `rho`-charts `v = tau * v~(q)`, `v~ = (e_rho + sum_k q_k e_k) /
//! sqrt(1 + |q|^2)`, and `X = tau * sum alpha_i A_i + sum beta_j B_j`. The
//! covector `p` is given in Fermi coordinates and carried to the chain chart
//! by the canonical lift `p_chart = DF^{-T} p`.

use crate::catalogue::StratumData;
use crate::error::{Error, Result};
use crate::geometry::{dual_hessian, inv_t, GroupActionSpec, PhasePoint};
use crate::jet::{dot, lift_slice, push_forward, values, Dual, Jet, Real};
use crate::linalg::{self, RANK_RTOL};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::TAU;

/// Resolved coordinates of a depth-`N` chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupPoint {
    pub chain: String,
    pub sigma: Vec<f64>,
    /// Centre coordinates `x`.
    pub base: Vec<f64>,
    /// Distinguished normal index of the chart.
    pub rho: usize,
    /// Normal-sphere chart parameters.
    pub q: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Covector in Fermi coordinates.
    pub p: Vec<f64>,
}

impl BlowupPoint {
    pub fn tau(&self) -> Vec<f64> {
        delta_substitution(&self.sigma)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct WeakTransformReport {
    pub psi_tot: f64,
    pub psi_wk: f64,
    pub factor: f64,
    pub factor_residual: f64,
    pub conds: Option<[bool; 3]>,
    pub wk_hess_rank: Option<usize>,
    pub min_nonzero_eig: Option<f64>,
}

/// `(I, II, III)` together with the raw magnitudes they were decided on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conditions {
    pub holds: [bool; 3],
    pub alpha_norm: f64,
    pub lambda_norm: f64,
    pub e_pairing: f64,
    pub f_pairing: f64,
}

impl Conditions {
    pub fn all(&self) -> bool {
        self.holds.iter().all(|&b| b)
    }
}

/// Applies the coordinate blow-ups in sequence: step `j` multiplies every
/// coordinate except the `j`-th by the current `j`-th coordinate.
pub fn delta_substitution(sigma: &[f64]) -> Vec<f64> {
    let mut t = sigma.to_vec();
    for j in 0..t.len() {
        let f = t[j];
        for (k, x) in t.iter_mut().enumerate() {
            if k != j {
                *x *= f;
            }
        }
    }
    t
}

/// Chain-level data resolved once.
pub struct ChainCtx<'a> {
    pub action: &'a GroupActionSpec,
    pub st: &'a StratumData,
    pub chart: usize,
    pub n: usize,
    pub d: usize,
    /// Normal rank `c`.
    pub c: usize,
    /// Centre dimension.
    pub cd: usize,
    pub da: usize,
    pub e: usize,
}

pub struct Evaluated<T> {
    pub m: Vec<T>,
    pub p_chart: Vec<T>,
    pub s: Vec<T>,
    pub psi_tot: T,
    pub psi_wk: T,
}

impl<'a> ChainCtx<'a> {
    pub fn new(action: &'a GroupActionSpec, chain: &str) -> Result<Self> {
        let ch = action.chain(chain)?;
        if ch.depth() != 1 {
            return Err(Error::Unsupported(format!("chain depth {}", ch.depth())));
        }
        let st = &action.strata[ch.levels[0]];
        let (c, da, e) = st.dims;
        Ok(ChainCtx {
            action,
            st,
            chart: action.chart_index(st.chart)?,
            n: action.manifold_dim,
            d: action.group_dim,
            c,
            cd: st.center_dim,
            da,
            e,
        })
    }

    /// Number of sphere chart parameters `c - 1`.
    pub fn nq(&self) -> usize {
        self.c - 1
    }

    pub fn unit_normal<T: Real>(&self, rho: usize, q: &[T]) -> Vec<T> {
        let mut v = vec![T::zero(); self.c];
        v[rho] = T::cst(1.0);
        let mut k = 0;
        for (i, vi) in v.iter_mut().enumerate() {
            if i != rho {
                *vi = q[k];
                k += 1;
            }
        }
        let nrm = (dot(&v, &v)).sqrt();
        v.into_iter().map(|x| x / nrm).collect()
    }

    pub fn fermi<T: Real>(&self, xv: &[T]) -> Vec<T> {
        self.action.kind.fermi(self.st.label, &xv[..self.cd], &xv[self.cd..])
    }

    /// Columns of the differential of the Fermi map at `(x, v)`.
    pub fn dfermi<T: Real>(&self, xv: &[T]) -> Vec<Vec<T>> {
        (0..self.n)
            .map(|k| {
                let w: Vec<T> = (0..self.n).map(|i| T::cst(if i == k { 1.0 } else { 0.0 })).collect();
                push_forward(|u: &[Dual<T>]| self.fermi(u), xv, &w)
            })
            .collect()
    }

    /// `(0, lambda(B) v)` for `B = sum beta_j B_j`, in Fermi coordinates.
    pub fn lambda_vector<T: Real>(&self, beta: &[T], v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n];
        for (j, l) in self.st.lambda.iter().enumerate() {
            for a in 0..self.c {
                for b in 0..self.c {
                    out[self.cd + a] = out[self.cd + a] + beta[j] * v[b] * l[a][b];
                }
            }
        }
        out
    }

    pub fn lie<T: Real>(&self, tau: T, alpha: &[T], beta: &[T]) -> Vec<T> {
        let mut s = vec![T::zero(); self.d];
        for (i, a) in self.st.a_basis.iter().enumerate() {
            for k in 0..self.d {
                s[k] = s[k] + tau * alpha[i] * a[k];
            }
        }
        for (j, b) in self.st.b_basis.iter().enumerate() {
            for k in 0..self.d {
                s[k] = s[k] + beta[j] * b[k];
            }
        }
        s
    }

    fn a_lie<T: Real>(&self, alpha: &[T]) -> Vec<T> {
        let zeros = vec![T::zero(); self.e];
        self.lie(T::cst(1.0), alpha, &zeros)
    }

    /// Evaluates the chain map and both transforms of the phase.
    #[allow(clippy::too_many_arguments)]
    pub fn eval<T: Real>(&self, x: &[T], tau: T, rho: usize, q: &[T], alpha: &[T], beta: &[T], pf: &[T]) -> Evaluated<T> {
        let vt = self.unit_normal(rho, q);
        let xv: Vec<T> = x.iter().copied().chain(vt.iter().map(|&c| tau * c)).collect();
        let m = self.fermi(&xv);
        let df = self.dfermi(&xv);
        // df[k][i] is component i of column k; p_chart = DF^{-T} pf
        let dfm: Vec<Vec<T>> = (0..self.n).map(|i| (0..self.n).map(|k| df[k][i]).collect()).collect();
        let inv = inv_t(&dfm);
        let p_chart: Vec<T> = (0..self.n).map(|i| (0..self.n).fold(T::zero(), |acc, k| acc + inv[k][i] * pf[k])).collect();
        let s = self.lie(tau, alpha, beta);
        let psi_tot = dot(&p_chart, &self.action.field_t(self.chart, &m, &s));
        let a_field = self.action.field_t(self.chart, &m, &self.a_lie(alpha));
        let lam = self.lambda_vector(beta, &vt);
        let pushed = push_forward(|u: &[Dual<T>]| self.fermi(u), &xv, &lam);
        let psi_wk = dot(&p_chart, &a_field) + dot(&p_chart, &pushed);
        Evaluated { m, p_chart, s, psi_tot, psi_wk }
    }

    pub fn eval_bp<T: Real>(&self, bp: &BlowupPoint) -> Evaluated<T> {
        let tau = bp.tau()[0];
        self.eval(
            &lift_slice::<T>(&bp.base),
            T::cst(tau),
            bp.rho,
            &lift_slice::<T>(&bp.q),
            &lift_slice::<T>(&bp.alpha),
            &lift_slice::<T>(&bp.beta),
            &lift_slice::<T>(&bp.p),
        )
    }

    fn check(&self, bp: &BlowupPoint) -> Result<()> {
        let ok = bp.sigma.len() == 1
            && bp.base.len() == self.cd
            && bp.rho < self.c
            && bp.q.len() == self.nq()
            && bp.alpha.len() == self.da
            && bp.beta.len() == self.e
            && bp.p.len() == self.n;
        if !ok {
            return Err(Error::Invalid("blow-up point does not match the chain dimensions".into()));
        }
        if bp.sigma[0].abs() >= 1.0 {
            return Err(Error::OutsideDomain(self.st.chart.to_string()));
        }
        Ok(())
    }

    /// Spanning sets of `E` and `F` at the image point, in chart coordinates.
    pub fn spanning_sets(&self, bp: &BlowupPoint) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let tau = bp.tau()[0];
        let vt = self.unit_normal(bp.rho, &bp.q);
        let xv: Vec<f64> = bp.base.iter().copied().chain(vt.iter().map(|&c| tau * c)).collect();
        let m = self.fermi(&xv);
        let e_set = self
            .st
            .a_basis
            .iter()
            .map(|a| self.action.field_t(self.chart, &m, a))
            .collect();
        let f_set = (0..self.e)
            .map(|j| {
                let mut b = vec![0.0; self.e];
                b[j] = 1.0;
                let lam = self.lambda_vector(&b, &vt);
                push_forward(|u: &[Dual<f64>]| self.fermi(u), &xv, &lam)
            })
            .collect();
        (e_set, f_set)
    }

    /// The pairing matrix `M` (columns in Fermi coordinates): the weak
    /// transform is `p^T M (alpha, beta)`.
    pub fn pairing_matrix(&self, bp: &BlowupPoint) -> DMatrix<f64> {
        let tau = bp.tau()[0];
        let vt = self.unit_normal(bp.rho, &bp.q);
        let xv: Vec<f64> = bp.base.iter().copied().chain(vt.iter().map(|&c| tau * c)).collect();
        let m = self.fermi(&xv);
        let df = linalg::from_cols(&self.dfermi(&xv), self.n);
        let dfi = df.try_inverse().expect("Fermi map is a local diffeomorphism");
        let mut cols = Vec::new();
        for a in &self.st.a_basis {
            let f = nalgebra::DVector::from_vec(self.action.field_t(self.chart, &m, a));
            cols.push((&dfi * f).iter().copied().collect::<Vec<f64>>());
        }
        for j in 0..self.e {
            let mut b = vec![0.0; self.e];
            b[j] = 1.0;
            cols.push(self.lambda_vector(&b, &vt));
        }
        linalg::from_cols(&cols, self.n)
    }

    /// Gradient and Hessian of the weak transform in `(alpha, beta, p)`.
    pub fn weak_derivatives(&self, bp: &BlowupPoint) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let tau = bp.tau()[0];
        let u: Vec<f64> = bp.alpha.iter().chain(&bp.beta).chain(&bp.p).copied().collect();
        let (da, e) = (self.da, self.e);
        dual_hessian(
            |v: &[Jet]| {
                self.eval(
                    &lift_slice::<Jet>(&bp.base),
                    Jet::cst(tau),
                    bp.rho,
                    &lift_slice::<Jet>(&bp.q),
                    &v[..da],
                    &v[da..da + e],
                    &v[da + e..],
                )
                .psi_wk
            },
            &u,
        )
    }
}

/// Image `(m, eta, X)` of a blow-up point, in the chain chart.
pub fn blowup_forward(action: &GroupActionSpec, bp: &BlowupPoint) -> Result<PhasePoint> {
    let ctx = ChainCtx::new(action, &bp.chain)?;
    ctx.check(bp)?;
    let ev = ctx.eval_bp::<f64>(bp);
    ctx.action.check_domain(ctx.chart, &ev.m)?;
    Ok(PhasePoint::new(ctx.st.chart, ev.m, ev.p_chart, ev.s))
}

pub fn weak_transform_phase(action: &GroupActionSpec, bp: &BlowupPoint) -> Result<WeakTransformReport> {
    let ctx = ChainCtx::new(action, &bp.chain)?;
    ctx.check(bp)?;
    let ev = ctx.eval_bp::<f64>(bp);
    let factor: f64 = bp.tau().iter().product();
    // the total transform is evaluated as the phase at the forward image
    let pt = PhasePoint::new(ctx.st.chart, ev.m, ev.p_chart, ev.s);
    let psi_tot = crate::geometry::phase(action, &pt)?;
    Ok(WeakTransformReport {
        psi_tot,
        psi_wk: ev.psi_wk,
        factor,
        factor_residual: (psi_tot - factor * ev.psi_wk).abs(),
        ..Default::default()
    })
}

pub fn weak_critical_conditions(action: &GroupActionSpec, bp: &BlowupPoint, tol: f64) -> Result<Conditions> {
    let ctx = ChainCtx::new(action, &bp.chain)?;
    ctx.check(bp)?;
    let ev = ctx.eval_bp::<f64>(bp);
    let vt = ctx.unit_normal(bp.rho, &bp.q);
    let alpha_norm = bp.alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
    let lam = ctx.lambda_vector(&bp.beta, &vt);
    let lambda_norm = lam.iter().map(|a| a * a).sum::<f64>().sqrt();
    let (e_set, f_set) = ctx.spanning_sets(bp);
    let pair = |set: &[Vec<f64>]| set.iter().map(|w| dot(&ev.p_chart, w).abs()).fold(0.0, f64::max);
    let (e_pairing, f_pairing) = (pair(&e_set), pair(&f_set));
    Ok(Conditions {
        holds: [alpha_norm <= tol && lambda_norm <= tol, e_pairing <= tol, f_pairing <= tol],
        alpha_norm,
        lambda_norm,
        e_pairing,
        f_pairing,
    })
}

/// `|grad_{(alpha, beta, p)} psi_wk|`.
pub fn weak_gradient_norm(action: &GroupActionSpec, bp: &BlowupPoint) -> Result<f64> {
    let ctx = ChainCtx::new(action, &bp.chain)?;
    ctx.check(bp)?;
    let (g, _) = ctx.weak_derivatives(bp)?;
    Ok(g.iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// Hessian of the weak transform in `(alpha, beta, p)` at a weak-critical
/// point, with rank and smallest nonzero eigenvalue.
pub fn certify_weak_hessian(action: &GroupActionSpec, bp: &BlowupPoint) -> Result<(WeakTransformReport, Vec<Vec<f64>>)> {
    let ctx = ChainCtx::new(action, &bp.chain)?;
    let conds = weak_critical_conditions(action, bp, 1e-8)?;
    if !conds.all() {
        return Err(Error::NotCritical(weak_gradient_norm(action, bp)?));
    }
    let mut rep = weak_transform_phase(action, bp)?;
    let (_, h) = ctx.weak_derivatives(bp)?;
    let (eigs, _) = linalg::sym_eigen(&linalg::from_rows(&h));
    let m = eigs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let nz: Vec<f64> = eigs.iter().map(|x| x.abs()).filter(|&x| x > RANK_RTOL * m).collect();
    let rank = nz.len();
    rep.conds = Some(conds.holds);
    rep.wk_hess_rank = Some(rank);
    rep.min_nonzero_eig = nz.iter().copied().reduce(f64::min);
    let expected = 2 * action.kappa;
    if rank != expected {
        return Err(Error::RankDeficient { rank, expected });
    }
    Ok((rep, h))
}

/// Minimum of `|grad psi_wk|` over the `alpha`-chart on a sampled box of
/// half-width `scale`; `None` when the centre has `d = 0`.
pub fn alpha_chart_noncritical(
    action: &GroupActionSpec,
    chain: &str,
    samples: usize,
    seed: u64,
    scale: f64,
) -> Result<Option<f64>> {
    use rand::SeedableRng;
    let ctx = ChainCtx::new(action, chain)?;
    if ctx.da == 0 {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let x: Vec<f64> = (0..ctx.cd).map(|_| rng.random_range(0.0..TAU)).collect();
        let tau: f64 = rng.random_range(-0.9..0.9);
        let rho = rng.random_range(0..ctx.da);
        let v: Vec<f64> = (0..ctx.c).map(|_| rng.random_range(-scale..scale)).collect();
        let free: Vec<f64> = (0..ctx.da - 1).map(|_| rng.random_range(-scale..scale)).collect();
        let beta: Vec<f64> = (0..ctx.e).map(|_| rng.random_range(-scale..scale)).collect();
        let p: Vec<f64> = (0..ctx.n).map(|_| rng.random_range(-scale..scale)).collect();
        if (tau * tau * v.iter().map(|a| a * a).sum::<f64>()).sqrt() >= 1.0 {
            continue;
        }
        let g = alpha_chart_gradient(&ctx, &x, tau, rho, &v, &free, &beta, &p)?;
        best = best.min(g);
    }
    Ok(Some(best))
}

/// Weak transform in the `alpha`-chart: `v = tau v`, `A = tau alpha` with
/// `alpha_rho = 1`. Returns `(psi_tot, psi_wk)` with `psi_tot = tau psi_wk`.
#[allow(clippy::too_many_arguments)]
pub fn alpha_chart_phase<T: Real>(
    ctx: &ChainCtx,
    x: &[T],
    tau: T,
    rho: usize,
    v: &[T],
    free: &[T],
    beta: &[T],
    pf: &[T],
) -> (T, T) {
    let mut alpha = Vec::with_capacity(ctx.da);
    let mut k = 0;
    for i in 0..ctx.da {
        if i == rho {
            alpha.push(T::cst(1.0));
        } else {
            alpha.push(free[k]);
            k += 1;
        }
    }
    let xv: Vec<T> = x.iter().copied().chain(v.iter().map(|&c| tau * c)).collect();
    let m = ctx.fermi(&xv);
    let df = ctx.dfermi(&xv);
    let dfm: Vec<Vec<T>> = (0..ctx.n).map(|i| (0..ctx.n).map(|k| df[k][i]).collect()).collect();
    let inv = inv_t(&dfm);
    let p_chart: Vec<T> = (0..ctx.n).map(|i| (0..ctx.n).fold(T::zero(), |acc, k| acc + inv[k][i] * pf[k])).collect();
    let s = ctx.lie(tau, &alpha, beta);
    let psi_tot = dot(&p_chart, &ctx.action.field_t(ctx.chart, &m, &s));
    let zeros = vec![T::zero(); ctx.e];
    let a_field = ctx.action.field_t(ctx.chart, &m, &ctx.lie(T::cst(1.0), &alpha, &zeros));
    let lam = ctx.lambda_vector(beta, v);
    let pushed = push_forward(|u: &[Dual<T>]| ctx.fermi(u), &xv, &lam);
    (psi_tot, dot(&p_chart, &a_field) + dot(&p_chart, &pushed))
}

#[allow(clippy::too_many_arguments)]
fn alpha_chart_gradient(
    ctx: &ChainCtx,
    x: &[f64],
    tau: f64,
    rho: usize,
    v: &[f64],
    free: &[f64],
    beta: &[f64],
    p: &[f64],
) -> Result<f64> {
    let u: Vec<f64> = free.iter().chain(beta).chain(p).copied().collect();
    let (nf, e) = (free.len(), beta.len());
    let (g, _) = dual_hessian(
        |w: &[Jet]| {
            let (_, wk) = alpha_chart_phase(
                ctx,
                &lift_slice::<Jet>(x),
                Jet::cst(tau),
                rho,
                &lift_slice::<Jet>(v),
                &w[..nf],
                &w[nf..nf + e],
                &w[nf + e..],
            );
            wk
        },
        &u,
    )?;
    Ok(g.iter().map(|a| a * a).sum::<f64>().sqrt())
}

/// `|tau|`-power, smooth factor and their product for the resolved chart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JacobianReport {
    pub exponent: usize,
    pub power: f64,
    pub phi: f64,
    pub total: f64,
}

/// Exponent `c + d - 1` of `|tau|` for a depth-one chain.
pub fn jacobian_exponent(st: &StratumData) -> usize {
    st.dims.0 + st.dims.1 - 1
}

/// Absolute Jacobian determinant of
/// `(x, tau, q, alpha, beta, p) -> (m, p_chart, s)`.
pub fn chain_map_jacobian(ctx: &ChainCtx, bp: &BlowupPoint) -> Result<f64> {
    let tau = bp.tau()[0];
    let u: Vec<f64> = bp
        .base
        .iter()
        .chain(std::iter::once(&tau))
        .chain(&bp.q)
        .chain(&bp.alpha)
        .chain(&bp.beta)
        .chain(&bp.p)
        .copied()
        .collect();
    let k = u.len();
    let v = Jet::vars(&u);
    let (cd, nq, da, e) = (ctx.cd, ctx.nq(), ctx.da, ctx.e);
    let mut o = 0;
    let mut take = |len: usize| {
        let r = o..o + len;
        o += len;
        r
    };
    let (rx, rt, rq, ra, rb, rp) = (take(cd), take(1), take(nq), take(da), take(e), take(ctx.n));
    let ev = ctx.eval(&v[rx], v[rt.start], bp.rho, &v[rq], &v[ra], &v[rb], &v[rp]);
    let outs: Vec<Jet> = ev.m.iter().chain(&ev.p_chart).chain(&ev.s).copied().collect();
    if outs.len() != k {
        return Err(Error::Invalid("chain map is not square".into()));
    }
    let jac = DMatrix::from_fn(k, k, |i, j| outs[i].grad(k)[j]);
    Ok(linalg::det(&jac).abs())
}

/// `sqrt(det g_Z)` of the centre at `x`.
fn centre_volume(ctx: &ChainCtx, x: &[f64]) -> f64 {
    if ctx.cd == 0 {
        return 1.0;
    }
    let xv: Vec<f64> = x.iter().copied().chain(std::iter::repeat_n(0.0, ctx.c)).collect();
    let m = ctx.fermi(&xv);
    let g = ctx.action.metric_t::<f64>(ctx.chart, &m);
    let df = ctx.dfermi(&xv);
    let gz: Vec<Vec<f64>> = (0..ctx.cd)
        .map(|a| {
            (0..ctx.cd)
                .map(|b| {
                    let mut acc = 0.0;
                    for i in 0..ctx.n {
                        for j in 0..ctx.n {
                            acc += df[a][i] * g[i][j] * df[b][j];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    crate::geometry::sqrt_det(&gz)
}

pub fn jacobian_power(action: &GroupActionSpec, bp: &BlowupPoint) -> Result<JacobianReport> {
    let ctx = ChainCtx::new(action, &bp.chain)?;
    ctx.check(bp)?;
    let exponent = jacobian_exponent(ctx.st);
    let tau = bp.tau()[0];
    // the smooth factor is read off a slice with tau away from zero
    let slice = if tau.abs() > 1e-3 { bp.clone() } else { BlowupPoint { sigma: vec![0.5], ..bp.clone() } };
    let ts = slice.tau()[0];
    let phi = chain_map_jacobian(&ctx, &slice)? / (ts.abs().powi(exponent as i32) * centre_volume(&ctx, &bp.base));
    let power = tau.abs().powi(exponent as i32);
    Ok(JacobianReport { exponent, power, phi, total: power * phi })
}

/// Closed form of the smooth factor: `J_sphere(q) |det [A | B]|`.
pub fn phi_closed_form(ctx: &ChainCtx, q: &[f64]) -> f64 {
    let q2: f64 = q.iter().map(|a| a * a).sum();
    let sphere = (1.0 + q2).powf(-(ctx.c as f64) / 2.0);
    let cols: Vec<Vec<f64>> = ctx.st.a_basis.iter().chain(&ctx.st.b_basis).cloned().collect();
    sphere * linalg::det(&linalg::from_cols(&cols, ctx.d)).abs()
}

/// The same point in the other `rho`-chart (`c = 2`), with the sign relating
/// the two weak transforms.
pub fn other_rho_chart(ctx: &ChainCtx, bp: &BlowupPoint) -> Option<(BlowupPoint, f64)> {
    if ctx.c != 2 || bp.q[0] == 0.0 {
        return None;
    }
    let q = bp.q[0];
    let sign = q.signum();
    let mut out = bp.clone();
    out.rho = 1 - bp.rho;
    out.q = vec![1.0 / q];
    // |q'| may exceed one; the chart formula is valid for any real q
    out.sigma = vec![bp.sigma[0] * sign];
    out.alpha = bp.alpha.iter().map(|a| a * sign).collect();
    Some((out, sign))
}

/// Uniformly sampled blow-up point with `|sigma| < 1`, `|q| <= 1`,
/// `|alpha|, |beta| <= 1`, `|p| <= 2`.
pub fn random_blowup_point(ctx: &ChainCtx, chain: &str, rng: &mut ChaCha8Rng) -> BlowupPoint {
    BlowupPoint {
        chain: chain.to_string(),
        sigma: vec![rng.random_range(-0.999..0.999)],
        base: (0..ctx.cd).map(|_| rng.random_range(0.0..TAU)).collect(),
        rho: rng.random_range(0..ctx.c),
        q: (0..ctx.nq()).map(|_| rng.random_range(-1.0..1.0)).collect(),
        alpha: (0..ctx.da).map(|_| rng.random_range(-1.0..1.0)).collect(),
        beta: (0..ctx.e).map(|_| rng.random_range(-1.0..1.0)).collect(),
        p: (0..ctx.n).map(|_| rng.random_range(-2.0..2.0)).collect(),
    }
}

/// Projects `bp` onto the weak critical set: `alpha = 0`, `beta = 0` and
/// `p` replaced by its component annihilating the pairing matrix.
pub fn project_to_weak_critical(ctx: &ChainCtx, bp: &BlowupPoint) -> BlowupPoint {
    let mut out = bp.clone();
    out.alpha = vec![0.0; ctx.da];
    out.beta = vec![0.0; ctx.e];
    let m = ctx.pairing_matrix(bp);
    let ann = linalg::nullspace(&m.transpose(), RANK_RTOL);
    let p = nalgebra::DVector::from_column_slice(&bp.p);
    let proj = &ann * (ann.transpose() * p);
    out.p = proj.iter().copied().collect();
    out
}

/// Values of a generic evaluation, for diagnostics.
pub fn image_values(ev: &Evaluated<f64>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    (values(&ev.m), values(&ev.p_chart), values(&ev.s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalogue::load_action;

    #[test]
    fn delta_depth_two_truth_table() {
        let t = delta_substitution(&[0.3, -0.7]);
        assert!((t[0] - 0.3 * 0.3 * -0.7).abs() < 1e-16);
        assert!((t[1] - 0.3 * -0.7).abs() < 1e-16);
        assert_eq!(delta_substitution(&[0.4]), vec![0.4]);
    }

    #[test]
    fn pole_meridian_point() {
        let a = load_action("circle_on_sphere").unwrap();
        let bp = BlowupPoint {
            chain: "north".into(),
            sigma: vec![0.5],
            base: vec![],
            rho: 0,
            q: vec![0.0],
            alpha: vec![],
            beta: vec![0.0],
            p: vec![0.0, 0.0],
        };
        let pt = blowup_forward(&a, &bp).unwrap();
        let x = a.embed(1, &pt.q);
        assert!((x[2].acos() - 0.5).abs() < 1e-14);
        assert!(x[1].abs() < 1e-15 && x[0] > 0.0);
    }
}
