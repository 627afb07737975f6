//! Leading coefficient over the regular critical set, brute-force
//! evaluation of `I(mu)`, power-law fits, the cut-off limit and the
//! `epsilon`-split of the resolved chart.

use crate::amplitude::{smooth_step, Amplitude};
use crate::critical::{pseudo_det, signature};
use crate::error::{Error, Result};
use crate::geometry::{dual_hessian, GroupActionSpec};
use crate::jet::{values, Jet};
use crate::linalg;
use crate::reduce::{pairwise, par_map};
use crate::resolution::{phi_closed_form, ChainCtx};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SignatureConvention {
    /// `exp(i pi sigma / 4)`.
    #[default]
    Quarter,
    /// `exp(i pi sigma)`.
    Unit,
}

impl SignatureConvention {
    pub fn factor(self, sig: i64) -> Complex64 {
        let k = match self {
            SignatureConvention::Quarter => 0.25,
            SignatureConvention::Unit => 1.0,
        };
        Complex64::from_polar(1.0, PI * k * sig as f64)
    }
}

/// Grid sizes for the resolved-chart integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPoints {
    pub x: usize,
    pub tau: usize,
    pub q: usize,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Midpoints per base axis of the global chart.
    pub base_points: Vec<usize>,
    /// Midpoints per axis of the regular-critical-set parametrization.
    pub regc_points: Vec<usize>,
    /// Minimum points on every fiber axis.
    pub fiber_min: usize,
    /// Fixed points per oscillatory fiber axis; `None` follows the rule.
    pub fiber_fixed: Option<usize>,
    pub points_per_period: f64,
    pub resolved: ResolvedPoints,
    /// Relative tolerance between the leading coefficient at full and half
    /// resolution.
    pub l0_tol: f64,
    pub convention: SignatureConvention,
}

impl QuadratureConfig {
    pub fn for_action(action: &GroupActionSpec) -> Self {
        use crate::catalogue::ActionKind::*;
        let (base, regc) = match action.kind {
            CircleOnCircle => (vec![64], vec![256]),
            CircleOnSphere => (vec![400, 16], vec![600, 96, 48]),
            So3OnSphere => (vec![200, 64], vec![200, 48, 48]),
            TorusOnS3 => (vec![48, 8, 8], vec![48, 24, 24, 32]),
        };
        QuadratureConfig {
            base_points: base,
            regc_points: regc,
            fiber_min: 48,
            fiber_fixed: None,
            points_per_period: 8.0,
            resolved: ResolvedPoints { x: 32, tau: 200, q: 64, t: 64 },
            l0_tol: 1e-3,
            convention: SignatureConvention::Quarter,
        }
    }

    /// Scales every grid by `k` (at least 2 points per axis).
    pub fn scaled(&self, k: f64) -> Self {
        let s = |n: usize| ((n as f64 * k).ceil() as usize).max(2);
        let mut c = self.clone();
        c.base_points = self.base_points.iter().map(|&n| s(n)).collect();
        c.regc_points = self.regc_points.iter().map(|&n| s(n)).collect();
        c.resolved = ResolvedPoints {
            x: s(self.resolved.x),
            tau: s(self.resolved.tau),
            q: s(self.resolved.q),
            t: s(self.resolved.t),
        };
        c
    }
}

fn midpoints(lo: f64, hi: f64, n: usize) -> (Vec<f64>, f64) {
    let h = (hi - lo) / n as f64;
    ((0..n).map(|i| lo + (i as f64 + 0.5) * h).collect(), h)
}

/// Points per axis required by the oscillation rule.
pub fn oscillation_points(max_rate: f64, range: f64, mu: f64, per_period: f64) -> usize {
    (per_period * max_rate * range / (TAU * mu)).ceil() as usize
}

// ---------------------------------------------------------------------------
// Regular critical set

/// Tensor midpoint grid on the parametrization `(q, y, z)` of the regular
/// critical set, with the amplitude-independent density
/// `sqrt det(J^T J) / sqrt|prod nonzero eig(Hess)|` and signature cached.
pub struct RegcGrid {
    pub axes: Vec<(Vec<f64>, f64)>,
    pub density: Vec<f64>,
    pub signature: Vec<i8>,
    n: usize,
    d: usize,
    ny: usize,
}

impl RegcGrid {
    pub fn build(action: &GroupActionSpec, p_ext: f64, s_ext: f64, counts: &[usize]) -> Result<Self> {
        let (n, d) = (action.manifold_dim, action.group_dim);
        let (ny, nz) = action.kind.regc_dims();
        let k = n + ny + nz;
        if counts.len() != k {
            return Err(Error::Invalid(format!("expected {k} grid sizes for the critical set")));
        }
        let dom = &action.charts[action.kind.global_chart()].domain;
        let mut axes = Vec::new();
        for i in 0..k {
            let (lo, hi) = if i < n {
                dom[i]
            } else if i < n + ny {
                (-p_ext, p_ext)
            } else {
                (-s_ext, s_ext)
            };
            axes.push(midpoints(lo, hi, counts[i]));
        }
        let total: usize = counts.iter().product();
        let mut g = RegcGrid { axes, density: vec![], signature: vec![], n, d, ny };
        let chart = action.kind.global_chart();
        let two_kappa = 2 * action.kappa;
        let res = par_map(total, |idx| -> Result<(f64, i8)> {
            let u = g.node(idx).0;
            let jv = Jet::vars(&u);
            let (p, s) = action.kind.regc_point(n, d, &jv[..n], &jv[n..n + ny], &jv[n + ny..]);
            let rows: Vec<Jet> = jv[..n].iter().chain(&p).chain(&s).copied().collect();
            let jac = DMatrix::from_fn(rows.len(), k, |i, j| rows[i].grad(k)[j]);
            let gram = jac.transpose() * &jac;
            let vol = linalg::det(&gram).max(0.0).sqrt();
            let x: Vec<f64> = u[..n].iter().copied().chain(values(&p)).chain(values(&s)).collect();
            let (_, h) = dual_hessian(|w| action.phase_t(chart, &w[..n], &w[n..2 * n], &w[2 * n..]), &x)?;
            let pd = pseudo_det(&h, two_kappa).abs();
            let (eigs, _) = linalg::sym_eigen(&linalg::from_rows(&h));
            let (_, sig) = signature(&eigs);
            Ok((vol / pd.sqrt(), sig as i8))
        });
        for r in res {
            let (v, s) = r?;
            g.density.push(v);
            g.signature.push(s);
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    /// Parameters and cell volume of node `idx` (last axis fastest).
    pub fn node(&self, mut idx: usize) -> (Vec<f64>, f64) {
        let k = self.axes.len();
        let mut u = vec![0.0; k];
        let mut w = 1.0;
        for a in (0..k).rev() {
            let (pts, h) = &self.axes[a];
            u[a] = pts[idx % pts.len()];
            idx /= pts.len();
            w *= h;
        }
        (u, w)
    }

    /// `(q, p, s)` of node `idx`.
    pub fn point(&self, action: &GroupActionSpec, idx: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
        let (u, w) = self.node(idx);
        let n = self.n;
        let (p, s) = action.kind.regc_point::<f64>(n, self.d, &u[..n], &u[n..n + self.ny], &u[n + self.ny..]);
        (u[..n].to_vec(), p, s, w)
    }

    /// `int_{Reg C} f * density * phase_factor`.
    pub fn integrate<F>(&self, action: &GroupActionSpec, conv: SignatureConvention, f: F) -> Complex64
    where
        F: Fn(&[f64], &[f64], &[f64]) -> f64 + Sync,
    {
        let terms = par_map(self.len(), |i| {
            let (q, p, s, w) = self.point(action, i);
            let v = f(&q, &p, &s);
            if v == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            conv.factor(self.signature[i] as i64) * (v * w * self.density[i])
        });
        pairwise(&terms)
    }
}

fn regc_grid(action: &GroupActionSpec, amp: &Amplitude, counts: &[usize]) -> Result<RegcGrid> {
    RegcGrid::build(action, amp.p_extent(), amp.s_extent(), counts)
}

/// Leading coefficient `L0 = int_{Reg C} a / |det|^{1/2} e^{i pi sig / 4}`.
pub fn leading_coefficient_l0(action: &GroupActionSpec, amp: &Amplitude, cfg: &QuadratureConfig) -> Result<Complex64> {
    if amp.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let chart = action.kind.global_chart();
    let eval = |counts: &[usize]| -> Result<Complex64> {
        let g = regc_grid(action, amp, counts)?;
        Ok(g.integrate(action, cfg.convention, |q, p, s| amp.eval(action, chart, q, p, s)))
    };
    let full = eval(&cfg.regc_points)?;
    let half: Vec<usize> = cfg.regc_points.iter().map(|&n| n.div_ceil(2).max(2)).collect();
    let coarse = eval(&half)?;
    let diff = (full - coarse).norm();
    if diff > cfg.l0_tol * full.norm().max(1e-12) {
        return Err(Error::NonConvergence(diff));
    }
    Ok(full)
}

/// `L0(eps)` with amplitude `a (1 - u_eps)`; `None` without singular strata.
pub fn cutoff_convergence(
    action: &GroupActionSpec,
    amp: &Amplitude,
    eps_list: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Option<Vec<(f64, Complex64)>>> {
    if action.chains.is_empty() {
        return Ok(None);
    }
    let chart = action.kind.global_chart();
    let g = regc_grid(action, amp, &cfg.regc_points)?;
    let mut out = Vec::new();
    for &eps in eps_list {
        let l = g.integrate(action, cfg.convention, |q, p, s| {
            let a = amp.eval(action, chart, q, p, s);
            if a == 0.0 {
                return 0.0;
            }
            let x = action.embed(chart, q);
            let dist = action.kind.singular_distance(&x).unwrap_or(f64::INFINITY);
            a * (1.0 - cutoff(dist, eps))
        });
        out.push((eps, l));
    }
    Ok(Some(out))
}

/// `u_eps`: 1 within `eps` of the singular locus, 0 beyond `3 eps`.
pub fn cutoff(dist: f64, eps: f64) -> f64 {
    smooth_step((dist - eps) / (2.0 * eps))
}

/// Partition function of a chain: 1 for tube radius `<= 1/2`, 0 from 1 on.
pub fn chain_partition(action: &GroupActionSpec, chain: &str, x: &[f64]) -> f64 {
    let r = action.kind.tube_distance(chain_centre(action, chain), x);
    smooth_step((r - 0.5) / 0.5)
}

fn chain_centre<'a>(action: &'a GroupActionSpec, chain: &str) -> &'a str {
    action
        .chains
        .iter()
        .find(|c| c.label == chain)
        .map(|c| action.strata[c.levels[0]].label)
        .unwrap_or("")
}

/// `L0` restricted by `1 - sum_chains chi_chain` (the part handled without
/// resolution).
pub fn principal_part_l0(action: &GroupActionSpec, amp: &Amplitude, cfg: &QuadratureConfig) -> Result<Complex64> {
    let chart = action.kind.global_chart();
    let g = regc_grid(action, amp, &cfg.regc_points)?;
    Ok(g.integrate(action, cfg.convention, |q, p, s| {
        let a = amp.eval(action, chart, q, p, s);
        if a == 0.0 {
            return 0.0;
        }
        let x = action.embed(chart, q);
        let chi: f64 = action.chains.iter().map(|c| chain_partition(action, c.label, &x)).sum();
        a * (1.0 - chi)
    }))
}

// ---------------------------------------------------------------------------
// Resolved chart

/// Per-node data of the resolved chart at `(x, tau, q)`.
struct ResolvedNode {
    /// Quadrature weight times `|tau|^{c+d-1} Phi`.
    weight: f64,
    /// Base amplitude times the chain partition function.
    w0: f64,
    /// Cholesky factor of the Fermi metric `DF^T g DF`.
    lf: DMatrix<f64>,
    pairing: DMatrix<f64>,
    tau: f64,
}

fn resolved_nodes(
    action: &GroupActionSpec,
    ctx: &ChainCtx,
    chain: &str,
    amp: &Amplitude,
    tau_ranges: &[(f64, f64)],
    cfg: &QuadratureConfig,
    tau_points: usize,
) -> Vec<ResolvedNode> {
    let (xs, hx) = if ctx.cd > 0 { midpoints(0.0, TAU, cfg.resolved.x) } else { (vec![0.0], 1.0) };
    let (qs, hq) = midpoints(-1.0, 1.0, cfg.resolved.q);
    let exp = crate::resolution::jacobian_exponent(ctx.st) as i32;
    let mut taus = Vec::new();
    for &(lo, hi) in tau_ranges {
        let (ts, ht) = midpoints(lo, hi, tau_points);
        taus.extend(ts.into_iter().map(|t| (t, ht)));
    }
    let (nx, nt, nq) = (xs.len(), taus.len(), qs.len());
    let total = ctx.c * nx * nt * nq;
    let n = ctx.n;
    let nodes = par_map(total, |idx| -> Option<ResolvedNode> {
        let (rho, rem) = (idx / (nx * nt * nq), idx % (nx * nt * nq));
        let (ix, rem) = (rem / (nt * nq), rem % (nt * nq));
        let (it, iq) = (rem / nq, rem % nq);
        let x: Vec<f64> = if ctx.cd > 0 { vec![xs[ix]] } else { vec![] };
        let (tau, ht) = taus[it];
        let q = [qs[iq]];
        let vt = ctx.unit_normal(rho, &q);
        let xv: Vec<f64> = x.iter().copied().chain(vt.iter().map(|&c| tau * c)).collect();
        let m = ctx.fermi(&xv);
        if !action.in_domain(ctx.chart, &m) {
            return None;
        }
        let xe = action.embed(ctx.chart, &m);
        let w0 = amp.base(&xe) * chain_partition(action, chain, &xe);
        if w0 == 0.0 {
            return None;
        }
        let df = linalg::from_cols(&ctx.dfermi(&xv), n);
        let g = linalg::from_rows(&action.metric_t::<f64>(ctx.chart, &m));
        let gf = df.transpose() * g * &df;
        let lf = gf.cholesky().expect("Fermi metric is positive definite").l();
        let bp = crate::resolution::BlowupPoint {
            chain: chain.to_string(),
            sigma: vec![tau],
            base: x,
            rho,
            q: q.to_vec(),
            alpha: vec![0.0; ctx.da],
            beta: vec![0.0; ctx.e],
            p: vec![0.0; n],
        };
        let pairing = ctx.pairing_matrix(&bp);
        let weight = phi_closed_form(ctx, &q) * tau.abs().powi(exp) * ht * hq * hx;
        Some(ResolvedNode { weight, w0, lf, pairing, tau })
    });
    nodes.into_iter().flatten().collect()
}

/// Resolved-chart coefficient `L_chain` of a depth-one chain with the
/// chain partition function applied to the amplitude.
pub fn resolved_chart_l0(
    action: &GroupActionSpec,
    chain: &str,
    amp: &Amplitude,
    cfg: &QuadratureConfig,
) -> Result<Complex64> {
    let ctx = ChainCtx::new(action, chain)?;
    if amp.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let kappa = action.kappa;
    let exp = crate::resolution::jacobian_exponent(ctx.st);
    if exp < kappa {
        return Err(Error::Unsupported("tau exponent below kappa".into()));
    }
    let nodes = resolved_nodes(action, &ctx, chain, amp, &[(-1.0, 1.0)], cfg, cfg.resolved.tau);
    let (ts, ht) = midpoints(-amp.p_extent(), amp.p_extent(), cfg.resolved.t);
    let s_factor = amp.fiber_s(&vec![0.0; action.group_dim]);
    let terms = par_map(nodes.len(), |i| -> Complex64 {
        let nd = &nodes[i];
        let m = &nd.pairing;
        // critical set: alpha = beta = 0, p in the annihilator of the pairing
        let ann = linalg::nullspace(&m.transpose(), linalg::RANK_RTOL);
        let dim = ann.ncols();
        let root = linalg::det(&(m.transpose() * m)).abs().sqrt();
        let (mr, mc) = (m.nrows(), m.ncols());
        let mut hess = DMatrix::zeros(mr + mc, mr + mc);
        hess.view_mut((mc, 0), (mr, mc)).copy_from(m);
        hess.view_mut((0, mc), (mc, mr)).copy_from(&m.transpose());
        let (eigs, _) = linalg::sym_eigen(&hess);
        let (_, sig) = signature(&eigs);
        // |eta|_g^2 = |L^{-1} p_f|^2
        let lw = nd.lf.clone().try_inverse().expect("Cholesky factor is invertible") * &ann;
        let mut acc = Vec::new();
        let mut idx = vec![0usize; dim];
        loop {
            let t = DVector::from_iterator(dim, idx.iter().map(|&j| ts[j]));
            acc.push(amp.fiber_p2((&lw * t).norm_squared()));
            let mut k = 0;
            while k < dim {
                idx[k] += 1;
                if idx[k] < ts.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == dim {
                break;
            }
        }
        let inner = pairwise(&acc) * ht.powi(dim as i32);
        let extra = nd.tau.abs().powi(-(kappa as i32));
        cfg.convention.factor(sig) * (nd.weight * nd.w0 * s_factor * extra * inner / root)
    });
    Ok(pairwise(&terms))
}


// ---------------------------------------------------------------------------
// Oscillatory fiber integrals

/// `int A(p^) S(s) exp(i p^T K^ s / mu)` with `K^ = U diag(sig) V^T`, on
/// tensor grids in rotated coordinates `p' = U^T p^`, `s' = V^T s`.
struct FiberProblem<'a> {
    sig: Vec<f64>,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    p_center: Vec<f64>,
    r_p: f64,
    s_center: Vec<f64>,
    r_s: f64,
    a_fn: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    s_fn: &'a (dyn Fn(&[f64]) -> f64 + Sync),
}

fn axis_counts(fp: &FiberProblem, mu: f64, cfg: &QuadratureConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    let (n, k, r) = (fp.u.nrows(), fp.v.nrows(), fp.sig.len());
    let mut np = vec![cfg.fiber_min; n];
    let mut ns = vec![cfg.fiber_min; k];
    for j in 0..r {
        let smax = fp.s_center[j].abs() + fp.r_s;
        let pmax = fp.p_center[j].abs() + fp.r_p;
        let need_p = oscillation_points(fp.sig[j] * smax, 2.0 * fp.r_p, mu, cfg.points_per_period);
        let need_s = oscillation_points(fp.sig[j] * pmax, 2.0 * fp.r_s, mu, cfg.points_per_period);
        match cfg.fiber_fixed {
            Some(fixed) => {
                let need = need_p.max(need_s);
                if fixed < need {
                    return Err(Error::ResolutionInsufficient { have: fixed, need });
                }
                np[j] = fixed.max(cfg.fiber_min);
                ns[j] = fixed.max(cfg.fiber_min);
            }
            None => {
                np[j] = need_p.max(cfg.fiber_min);
                ns[j] = need_s.max(cfg.fiber_min);
            }
        }
    }
    Ok((np, ns))
}

/// Sums `f(R x')` over a tensor grid in rotated coordinates, keeping the
/// first `r` axes: returns a flattened `r`-dimensional table (row-major).
fn marginal(
    rot: &DMatrix<f64>,
    center: &[f64],
    radius: f64,
    counts: &[usize],
    r: usize,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let dim = counts.len();
    let grids: Vec<(Vec<f64>, f64)> = (0..dim).map(|j| midpoints(center[j] - radius, center[j] + radius, counts[j])).collect();
    let cell: f64 = grids.iter().map(|g| g.1).product();
    let kept: usize = counts[..r].iter().product();
    let rest: usize = counts[r..].iter().product();
    let body = |ki: usize| {
        let mut idx = vec![0usize; dim];
        let mut xr = vec![0.0; dim];
        let mut x = vec![0.0; dim];
        let mut rem = ki;
        for j in (0..r).rev() {
            idx[j] = rem % counts[j];
            rem /= counts[j];
        }
        let mut acc = Vec::with_capacity(rest);
        for ri in 0..rest {
            let mut rem = ri;
            for j in (r..dim).rev() {
                idx[j] = rem % counts[j];
                rem /= counts[j];
            }
            for j in 0..dim {
                xr[j] = grids[j].0[idx[j]];
            }
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = (0..dim).map(|j| rot[(i, j)] * xr[j]).sum();
            }
            acc.push(f(&x));
        }
        pairwise(&acc) * cell
    };
    let table = if kept * rest > 1 << 16 { par_map(kept, body) } else { (0..kept).map(body).collect() };
    (table, grids.into_iter().take(r).map(|g| g.0).collect())
}

fn cis_table(sig: f64, a: &[f64], b: &[f64], mu: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push(Complex64::from_polar(1.0, sig * x * y / mu));
        }
    }
    out
}

fn fiber_integral(fp: &FiberProblem, mu: f64, cfg: &QuadratureConfig) -> Result<Complex64> {
    let r = fp.sig.len();
    let (np, ns) = axis_counts(fp, mu, cfg)?;
    let (at, pg) = marginal(&fp.u, &fp.p_center, fp.r_p, &np, r, fp.a_fn);
    let (ht, sg) = marginal(&fp.v, &fp.s_center, fp.r_s, &ns, r, fp.s_fn);
    let zero = Complex64::new(0.0, 0.0);
    match r {
        0 => Ok(Complex64::new(at[0] * ht[0], 0.0)),
        1 => {
            let e = cis_table(fp.sig[0], &pg[0], &sg[0], mu);
            let m = sg[0].len();
            let terms: Vec<Complex64> = (0..pg[0].len())
                .map(|i| {
                    let mut acc = zero;
                    for j in 0..m {
                        acc += e[i * m + j] * ht[j];
                    }
                    acc * at[i]
                })
                .collect();
            Ok(pairwise(&terms))
        }
        2 => {
            let (n1, n2, m1, m2) = (pg[0].len(), pg[1].len(), sg[0].len(), sg[1].len());
            let e1 = cis_table(fp.sig[0], &pg[0], &sg[0], mu);
            let e2 = cis_table(fp.sig[1], &pg[1], &sg[1], mu);
            // mm[i1][j2] = sum_j1 e1[i1][j1] h[j1][j2]
            let rows = par_map(n1, |i1| {
                let mut row = vec![zero; m2];
                for j1 in 0..m1 {
                    let e = e1[i1 * m1 + j1];
                    let h = &ht[j1 * m2..(j1 + 1) * m2];
                    for (o, &hv) in row.iter_mut().zip(h) {
                        *o += e * hv;
                    }
                }
                let mut acc = Vec::with_capacity(n2);
                for i2 in 0..n2 {
                    let a = at[i1 * n2 + i2];
                    if a == 0.0 {
                        continue;
                    }
                    let mut s = zero;
                    for j2 in 0..m2 {
                        s += row[j2] * e2[i2 * m2 + j2];
                    }
                    acc.push(s * a);
                }
                pairwise(&acc)
            });
            Ok(pairwise(&rows))
        }
        _ => Err(Error::Unsupported(format!("fiber rank {r}"))),
    }
}

fn key_of(sig: &[f64], u: &DMatrix<f64>, v: &DMatrix<f64>, radial: bool) -> Vec<i64> {
    let q = |x: f64| (x * 1e10).round() as i64;
    let mut k: Vec<i64> = sig.iter().map(|&s| q(s)).collect();
    if !radial {
        k.extend(u.iter().map(|&x| q(x)));
        k.extend(v.iter().map(|&x| q(x)));
    }
    k
}

struct BaseNode {
    weight: f64,
    key: usize,
}

/// Brute-force `I(mu)` over the chart `chart` restricted to the box
/// `base_box`, with the amplitude multiplied by `extra` (a function of the
/// embedded base point).
#[allow(clippy::too_many_arguments)]
pub fn brute_force_chart(
    action: &GroupActionSpec,
    amp: &Amplitude,
    chart: usize,
    base_box: &[(f64, f64)],
    counts: &[usize],
    extra: &(dyn Fn(&[f64]) -> f64 + Sync),
    mu: f64,
    cfg: &QuadratureConfig,
) -> Result<Complex64> {
    if mu <= 0.0 {
        return Err(Error::Invalid("mu must be positive".into()));
    }
    if amp.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let (n, kappa) = (action.manifold_dim, action.kappa);
    let grids: Vec<(Vec<f64>, f64)> = base_box.iter().zip(counts).map(|(&(a, b), &c)| midpoints(a, b, c)).collect();
    let cell: f64 = grids.iter().map(|g| g.1).product();
    let total: usize = counts.iter().product();
    let radial = amp.is_radial();
    struct Prep {
        weight: f64,
        key: Vec<i64>,
        sig: Vec<f64>,
        u: DMatrix<f64>,
        v: DMatrix<f64>,
        linv: DMatrix<f64>,
    }
    let preps = par_map(total, |idx| -> Option<Prep> {
        let mut rem = idx;
        let mut q = vec![0.0; n];
        for j in (0..n).rev() {
            q[j] = grids[j].0[rem % counts[j]];
            rem /= counts[j];
        }
        if !action.in_domain(chart, &q) {
            return None;
        }
        let x = action.embed(chart, &q);
        let b = amp.base(&x) * extra(&x);
        if b == 0.0 {
            return None;
        }
        let g = linalg::from_rows(&action.metric_t::<f64>(chart, &q));
        let chol = g.cholesky().expect("metric is positive definite");
        let l = chol.l();
        let vol: f64 = (0..n).map(|i| l[(i, i)]).product();
        let k = linalg::from_cols(&action.field_matrix_t::<f64>(chart, &q), n);
        let khat = l.transpose() * k;
        let (sig, u, v) = full_svd(&khat, kappa);
        let linv = l.clone().try_inverse().expect("Cholesky factor is invertible");
        Some(Prep { weight: b * vol * cell, key: key_of(&sig, &u, &v, radial), sig, u, v, linv })
    });
    // unique fiber problems in order of first appearance
    let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut reps: Vec<usize> = Vec::new();
    let mut nodes: Vec<BaseNode> = Vec::new();
    for (i, p) in preps.iter().enumerate() {
        if let Some(p) = p {
            let next = reps.len();
            let key = *index.entry(p.key.clone()).or_insert_with(|| {
                reps.push(i);
                next
            });
            nodes.push(BaseNode { weight: p.weight, key });
        }
    }
    let fibers: Vec<Result<Complex64>> = par_map(reps.len(), |r| {
            let p = preps[reps[r]].as_ref().expect("representative is populated");
            let mut p0 = vec![0.0; n];
            p0[0] = amp.p_offset;
            let p0hat = &p.linv * DVector::from_vec(p0);
            let pc: Vec<f64> = (p.u.transpose() * p0hat.clone()).iter().copied().collect();
            let sc: Vec<f64> = (p.v.transpose() * DVector::from_column_slice(&amp.s0)).iter().copied().collect();
            let a_fn = |ph: &[f64]| {
                let d2: f64 = ph.iter().zip(p0hat.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                amp.fiber_p2(d2)
            };
            let s_fn = |s: &[f64]| amp.fiber_s(s);
            let fp = FiberProblem {
                sig: p.sig.clone(),
                u: p.u.clone(),
                v: p.v.clone(),
                p_center: pc,
                r_p: amp.r_p,
                s_center: sc,
                r_s: amp.r_s,
                a_fn: &a_fn,
                s_fn: &s_fn,
            };
            fiber_integral(&fp, mu, cfg)
        });
    let fibers: Vec<Complex64> = fibers.into_iter().collect::<Result<_>>()?;
    let terms: Vec<Complex64> = nodes.iter().map(|nd| fibers[nd.key] * nd.weight).collect();
    Ok(pairwise(&terms))
}

/// Singular values (first `r`, descending) with full orthogonal `U`, `V`.
fn full_svd(m: &DMatrix<f64>, r: usize) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (nr, nc) = (m.nrows(), m.ncols());
    let size = nr.max(nc);
    let mut sq = DMatrix::zeros(size, size);
    sq.view_mut((0, 0), (nr, nc)).copy_from(m);
    let svd = sq.clone().svd(true, true);
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    let uf = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut u = DMatrix::from_fn(size, size, |i, j| uf[(i, order[j])]);
    let mut v = DMatrix::from_fn(size, size, |i, j| vt[(order[j], i)]);
    // fix signs so that U and V agree on the kept singular pairs
    linalg::canonical_signs(&mut u);
    for j in 0..size {
        let uj = u.column(j).clone_owned();
        let vj = v.column(j).clone_owned();
        let sv = (uj.transpose() * &sq * &vj)[(0, 0)];
        if sv < 0.0 {
            v.column_mut(j).neg_mut();
        }
    }
    let sig: Vec<f64> = (0..r).map(|j| svd.singular_values[order[j]]).collect();
    let u = u.view((0, 0), (nr, nr)).clone_owned();
    let v = v.view((0, 0), (nc, nc)).clone_owned();
    (sig, orthonormal_block(u), orthonormal_block(v))
}

/// Re-orthonormalizes a square block taken from a padded factor.
fn orthonormal_block(m: DMatrix<f64>) -> DMatrix<f64> {
    let q = linalg::gram_schmidt(&linalg::cols(&m), None);
    if q.len() == m.ncols() {
        linalg::from_cols(&q, m.nrows())
    } else {
        let mut cols = q;
        for j in 0..m.nrows() {
            if cols.len() == m.ncols() {
                break;
            }
            let mut e = vec![0.0; m.nrows()];
            e[j] = 1.0;
            cols.push(e);
            cols = linalg::gram_schmidt(&cols, None);
        }
        linalg::from_cols(&cols, m.nrows())
    }
}

/// Brute-force `I(mu)` over the whole manifold in the global chart.
pub fn brute_force_i(action: &GroupActionSpec, amp: &Amplitude, mu: f64, cfg: &QuadratureConfig) -> Result<Complex64> {
    let chart = action.kind.global_chart();
    let dom = action.charts[chart].domain.clone();
    brute_force_chart(action, amp, chart, &dom, &cfg.base_points, &|_| 1.0, mu, cfg)
}

/// Resolved-chart integral `int e^{i tau psi_wk / mu} (a chi) |tau|^{c+d-1}
/// Phi` over `|tau|` in `[t_lo, t_hi)`.
pub fn resolved_chart_integral(
    action: &GroupActionSpec,
    chain: &str,
    amp: &Amplitude,
    mu: f64,
    t_lo: f64,
    t_hi: f64,
    cfg: &QuadratureConfig,
) -> Result<Complex64> {
    let ctx = ChainCtx::new(action, chain)?;
    if amp.is_zero() || t_hi <= t_lo {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let npts = ((cfg.resolved.tau as f64) * (t_hi - t_lo) / 2.0).ceil().max(8.0) as usize;
    let nodes = resolved_nodes(action, &ctx, chain, amp, &[(-t_hi, -t_lo), (t_lo, t_hi)], cfg, npts);
    let n = ctx.n;
    let terms: Vec<Result<Complex64>> = par_map(nodes.len(), |i| {
        let nd = &nodes[i];
        let l = &nd.lf;
        let vol: f64 = (0..n).map(|k| l[(k, k)]).product();
        // tau p^T M (alpha, beta) in the variables (s_A, beta) = (tau alpha, beta)
        let mut k = nd.pairing.clone();
        for j in ctx.da..k.ncols() {
            k.column_mut(j).scale_mut(nd.tau);
        }
        let khat = l.transpose() * k;
        let (sig, u, v) = full_svd(&khat, action.kappa);
        let a_fn = |ph: &[f64]| {
            // p^ = L^{-1}-coordinates already; |eta|_g = |p^|
            amp.fiber_p2(ph.iter().map(|x| x * x).sum())
        };
        let s_fn = |gam: &[f64]| amp.fiber_s(&ctx.lie(1.0, &gam[..ctx.da], &gam[ctx.da..]));
        let jac_a = nd.tau.abs().powi(-(ctx.da as i32));
        let fp = FiberProblem {
            sig,
            u,
            v,
            p_center: vec![0.0; n],
            r_p: amp.r_p,
            s_center: vec![0.0; ctx.da + ctx.e],
            r_s: amp.r_s,
            a_fn: &a_fn,
            s_fn: &s_fn,
        };
        let f = fiber_integral(&fp, mu, cfg)?;
        Ok(f * (nd.w0 * vol * nd.weight * jac_a))
    });
    let terms: Vec<Complex64> = terms.into_iter().collect::<Result<_>>()?;
    Ok(pairwise(&terms))
}

/// The chain's contribution `int e^{i psi / mu} a chi_chain` evaluated by
/// brute force in the chart of the chain centre, without resolution.
pub fn chain_chart_direct(
    action: &GroupActionSpec,
    chain: &str,
    amp: &Amplitude,
    mu: f64,
    cfg: &QuadratureConfig,
) -> Result<Complex64> {
    let ctx = ChainCtx::new(action, chain)?;
    let dom = action.charts[ctx.chart].domain.clone();
    let counts: Vec<usize> = (0..dom.len()).map(|_| 2 * cfg.resolved.q).collect();
    let extra = |x: &[f64]| chain_partition(action, chain, x);
    brute_force_chart(action, amp, ctx.chart, &dom, &counts, &extra, mu, cfg)
}

/// Result of the `epsilon`-split at one `mu`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonSplit {
    pub mu: f64,
    pub eps: f64,
    pub i1: Complex64,
    pub i2: Complex64,
}

/// `I^1` over `|tau| > eps` and `I^2` over `|tau| <= eps` with
/// `eps = mu^{1/N}`.
pub fn epsilon_split_diagnostic(
    action: &GroupActionSpec,
    chain: &str,
    amp: &Amplitude,
    mu: f64,
    cfg: &QuadratureConfig,
) -> Result<EpsilonSplit> {
    let depth = action.chain(chain)?.depth();
    let eps = mu.powf(1.0 / depth as f64);
    let i1 = resolved_chart_integral(action, chain, amp, mu, eps, 1.0, cfg)?;
    let i2 = resolved_chart_integral(action, chain, amp, mu, 0.0, eps, cfg)?;
    Ok(EpsilonSplit { mu, eps, i1, i2 })
}

// ---------------------------------------------------------------------------
// Fitting

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticFit {
    pub mu_values: Vec<f64>,
    pub i_values: Vec<Complex64>,
    pub kappa_hat: f64,
    /// Intercept of the linear fit of `I / (2 pi mu)^kappa` against `mu`.
    pub l0_hat: Complex64,
    /// Plain mean of `I / (2 pi mu)^kappa`.
    pub l0_mean: Complex64,
    pub kappa_used: f64,
    pub residual_slope: f64,
    pub span_decades: f64,
}

fn ls_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Log-log slope of `|I - (2 pi mu)^kappa L0|`.
pub fn residual_slope(mu: &[f64], i: &[Complex64], kappa: f64, l0: Complex64) -> f64 {
    let lx: Vec<f64> = mu.iter().map(|m| m.ln()).collect();
    let ly: Vec<f64> = mu
        .iter()
        .zip(i)
        .map(|(&m, &v)| (v - l0 * (TAU * m).powf(kappa)).norm().max(1e-300).ln())
        .collect();
    ls_slope(&lx, &ly).0
}

pub fn fit_asymptotics(samples: &[(f64, Complex64)], kappa_known: Option<f64>) -> Result<AsymptoticFit> {
    if samples.len() < 4 {
        return Err(Error::DegenerateFit(format!("{} samples, need at least 4", samples.len())));
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    if s.windows(2).any(|w| w[0].0 <= w[1].0) {
        return Err(Error::DegenerateFit("mu values must be distinct".into()));
    }
    if s.iter().all(|(_, v)| v.norm() < 1e-14) {
        return Err(Error::DegenerateFit("all |I| below 1e-14".into()));
    }
    let mu: Vec<f64> = s.iter().map(|x| x.0).collect();
    let iv: Vec<Complex64> = s.iter().map(|x| x.1).collect();
    let lx: Vec<f64> = mu.iter().map(|m| m.ln()).collect();
    let ly: Vec<f64> = iv.iter().map(|v| v.norm().max(1e-300).ln()).collect();
    let (kappa_hat, _) = ls_slope(&lx, &ly);
    let kappa_used = kappa_known.unwrap_or(kappa_hat.round());
    let ratio: Vec<Complex64> = mu.iter().zip(&iv).map(|(&m, &v)| v / (TAU * m).powf(kappa_used)).collect();
    let l0_mean = ratio.iter().sum::<Complex64>() / ratio.len() as f64;
    let (_, ir) = ls_slope(&mu, &ratio.iter().map(|z| z.re).collect::<Vec<_>>());
    let (_, ii) = ls_slope(&mu, &ratio.iter().map(|z| z.im).collect::<Vec<_>>());
    let l0_hat = Complex64::new(ir, ii);
    Ok(AsymptoticFit {
        residual_slope: residual_slope(&mu, &iv, kappa_used, l0_hat),
        span_decades: (mu[0] / mu[mu.len() - 1]).log10(),
        mu_values: mu,
        i_values: iv,
        kappa_hat,
        l0_hat,
        l0_mean,
        kappa_used,
    })
}

/// Geometric grid of `k` points from `hi` down to `lo`.
pub fn geometric_mu(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    let r = (lo / hi).powf(1.0 / (k as f64 - 1.0));
    (0..k).map(|i| hi * r.powi(i as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let s: Vec<(f64, Complex64)> =
            geometric_mu(0.01, 0.1, 6).into_iter().map(|m| (m, Complex64::new(TAU * m * 3.0, 0.0))).collect();
        let f = fit_asymptotics(&s, None).unwrap();
        assert!((f.kappa_hat - 1.0).abs() < 1e-12);
        assert!((f.l0_hat.re - 3.0).abs() < 1e-12);
    }

    #[test]
    fn constructed_residual() {
        let s: Vec<(f64, Complex64)> = geometric_mu(0.01, 0.1, 6)
            .into_iter()
            .map(|m| (m, Complex64::new(TAU * m * (3.0 + 0.5 * m), 0.0)))
            .collect();
        let f = fit_asymptotics(&s, Some(1.0)).unwrap();
        assert!((f.residual_slope - 2.0).abs() < 0.1, "{}", f.residual_slope);
    }

    #[test]
    fn too_few_points() {
        let s = vec![(0.1, Complex64::new(1.0, 0.0)); 3];
        assert!(matches!(fit_asymptotics(&s, None), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.01, 0.05), 1.0);
        assert_eq!(cutoff(0.2, 0.05), 0.0);
        let mid = cutoff(0.1, 0.05);
        assert!((mid - 0.5).abs() < 1e-12);
    }
}
