//! Critical set of the phase on the regular stratum.

use crate::error::{Error, Result};
use crate::geometry::{dual_hessian, GroupActionSpec, PhasePoint};
use crate::jet::{values, Jet, Real};
use crate::linalg::{self, RANK_RTOL};
use crate::reduce::par_map;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::FRAC_PI_2;

/// Threshold for eigenvalue signs relative to the largest magnitude.
pub const SIGN_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseGradient {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
    pub ds: Vec<f64>,
}

impl PhaseGradient {
    pub fn norm(&self) -> f64 {
        self.dq.iter().chain(&self.dp).chain(&self.ds).map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalSample {
    pub pt: PhasePoint,
    pub psi: f64,
    pub grad_norm: f64,
    /// Full Hessian in `(q, p, s)`.
    pub hess: Vec<Vec<f64>>,
    /// Orthonormal columns spanning the normal space (row space of `hess`).
    pub normal_basis: Vec<Vec<f64>>,
    pub trans_hess: Vec<Vec<f64>>,
    pub rank: usize,
    pub signature: i64,
    pub kernel_dim: usize,
    pub stratum: String,
    /// Largest principal angle between `ker hess` and the tangent space of
    /// the analytic parametrization (global chart only).
    pub tangent_angle: Option<f64>,
}

fn point_vars(pt: &PhasePoint) -> Vec<f64> {
    pt.q.iter().chain(&pt.p).chain(&pt.s).copied().collect()
}

fn validate(action: &GroupActionSpec, pt: &PhasePoint) -> Result<usize> {
    let c = action.chart_index(&pt.chart)?;
    action.check_domain(c, &pt.q)?;
    if pt.p.len() != action.manifold_dim || pt.s.len() != action.group_dim {
        return Err(Error::Invalid("phase point has wrong dimensions".into()));
    }
    Ok(c)
}

/// Gradient and Hessian of the phase in `(q, p, s)`.
pub fn phase_derivatives(action: &GroupActionSpec, pt: &PhasePoint) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let c = validate(action, pt)?;
    let (n, d) = (action.manifold_dim, action.group_dim);
    dual_hessian(|u: &[Jet]| action.phase_t(c, &u[..n], &u[n..2 * n], &u[2 * n..2 * n + d]), &point_vars(pt))
}

pub fn phase_gradient(action: &GroupActionSpec, pt: &PhasePoint) -> Result<PhaseGradient> {
    let n = action.manifold_dim;
    let (g, _) = phase_derivatives(action, pt)?;
    Ok(PhaseGradient { dq: g[..n].to_vec(), dp: g[n..2 * n].to_vec(), ds: g[2 * n..].to_vec() })
}

/// `(J_{X_1}(eta), ..., J_{X_d}(eta))`.
pub fn omega_residual(action: &GroupActionSpec, chart: &str, q: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    let c = action.chart_index(chart)?;
    action.check_domain(c, q)?;
    let k = action.field_matrix_t::<f64>(c, q);
    Ok(k.iter().map(|col| col.iter().zip(p).map(|(a, b)| a * b).sum()).collect())
}

/// The matrix `[X~_1 ... X~_d]` at `q`.
pub fn field_matrix(action: &GroupActionSpec, chart: usize, q: &[f64]) -> DMatrix<f64> {
    linalg::from_cols(&action.field_matrix_t::<f64>(chart, q), action.manifold_dim)
}

/// Orthonormal basis of the isotropy algebra at `q`.
pub fn isotropy_algebra(action: &GroupActionSpec, chart: &str, q: &[f64], tol: f64) -> Result<Vec<Vec<f64>>> {
    let c = action.chart_index(chart)?;
    action.check_domain(c, q)?;
    let k = field_matrix(action, c, q);
    let smax = linalg::singular_values(&k).first().copied().unwrap_or(0.0);
    if smax <= tol {
        return Ok(linalg::cols(&DMatrix::identity(action.group_dim, action.group_dim)));
    }
    Ok(linalg::cols(&linalg::nullspace(&k, tol.max(RANK_RTOL))))
}

/// Eigenvalue signature with the module threshold.
pub fn signature(eigs: &[f64]) -> (usize, i64) {
    let m = eigs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let pos = eigs.iter().filter(|&&x| x > SIGN_RTOL * m).count();
    let neg = eigs.iter().filter(|&&x| x < -SIGN_RTOL * m).count();
    (pos + neg, pos as i64 - neg as i64)
}

/// Certifies a point of the regular critical set and computes its
/// transversal Hessian.
pub fn certify_regular_critical(action: &GroupActionSpec, pt: &PhasePoint, tol: f64) -> Result<CriticalSample> {
    let c = validate(action, pt)?;
    let (grad, hess) = phase_derivatives(action, pt)?;
    let grad_norm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
    if grad_norm > tol {
        return Err(Error::NotCritical(grad_norm));
    }
    let two_kappa = 2 * action.kappa;
    let orbit_rank = linalg::rank(&field_matrix(action, c, &pt.q), RANK_RTOL);
    if orbit_rank < action.kappa {
        return Err(Error::DegenerateTransversal { rank: 2 * orbit_rank, expected: two_kappa });
    }
    let h = linalg::from_rows(&hess);
    let (eigs, vecs) = linalg::sym_eigen(&h);
    let (rank, sig) = signature(&eigs);
    if rank < two_kappa {
        return Err(Error::DegenerateTransversal { rank, expected: two_kappa });
    }
    let m = eigs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let nz: Vec<usize> = (0..eigs.len()).filter(|&i| eigs[i].abs() > SIGN_RTOL * m).collect();
    let zs: Vec<usize> = (0..eigs.len()).filter(|&i| eigs[i].abs() <= SIGN_RTOL * m).collect();
    let mut nb = DMatrix::from_fn(h.nrows(), nz.len(), |r, k| vecs[(r, nz[k])]);
    linalg::canonical_signs(&mut nb);
    let th = nb.transpose() * &h * &nb;
    let kernel = DMatrix::from_fn(h.nrows(), zs.len(), |r, k| vecs[(r, zs[k])]);
    let tangent_angle = if c == action.kind.global_chart() {
        Some(linalg::max_principal_angle(&kernel, &analytic_tangent(action, pt)?))
    } else {
        None
    };
    Ok(CriticalSample {
        pt: pt.clone(),
        psi: crate::geometry::phase(action, pt)?,
        grad_norm,
        hess,
        normal_basis: linalg::cols(&nb),
        trans_hess: linalg::to_rows(&th),
        rank,
        signature: sig,
        kernel_dim: h.nrows() - rank,
        stratum: action.principal_stratum().label.to_string(),
        tangent_angle,
    })
}

/// Fiber parameters `(y, z)` of a point of the regular critical set in
/// the global chart.
pub fn regc_coordinates(action: &GroupActionSpec, q: &[f64], p: &[f64], s: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let c = action.kind.global_chart();
    let (a, b) = action.kind.regc_basis::<f64>(q);
    let gi = crate::geometry::inv_t(&action.metric_t::<f64>(c, q));
    let y = a
        .iter()
        .map(|ak| {
            let mut acc = 0.0;
            for i in 0..p.len() {
                for j in 0..p.len() {
                    acc += ak[i] * gi[i][j] * p[j];
                }
            }
            acc
        })
        .collect();
    let z = b.iter().map(|bk| bk.iter().zip(s).map(|(u, v)| u * v).sum()).collect();
    (y, z)
}

/// Tangent space of the regular critical set from its parametrization
/// `(q, y, z) -> (q, p, s)`.
pub fn analytic_tangent(action: &GroupActionSpec, pt: &PhasePoint) -> Result<DMatrix<f64>> {
    let (n, d) = (action.manifold_dim, action.group_dim);
    let (ny, nz) = action.kind.regc_dims();
    let (y, z) = regc_coordinates(action, &pt.q, &pt.p, &pt.s);
    let u: Vec<f64> = pt.q.iter().chain(&y).chain(&z).copied().collect();
    let jv = Jet::vars(&u);
    let (p, s) = action.kind.regc_point(n, d, &jv[..n], &jv[n..n + ny], &jv[n + ny..n + ny + nz]);
    let rows: Vec<Jet> = jv[..n].iter().chain(&p).chain(&s).copied().collect();
    let k = u.len();
    let (pp, ss) = (values(&p), values(&s));
    let off: f64 = pp.iter().zip(&pt.p).chain(ss.iter().zip(&pt.s)).map(|(a, b)| (a - b).abs()).sum();
    if off > 1e-8 {
        return Err(Error::NotCritical(off));
    }
    Ok(DMatrix::from_fn(rows.len(), k, |i, j| rows[i].grad(k)[j]))
}

/// Sampling box for principal base points in the global chart.
pub fn principal_box(action: &GroupActionSpec) -> Vec<(f64, f64)> {
    use crate::catalogue::ActionKind::*;
    let dom = &action.charts[action.kind.global_chart()].domain;
    match action.kind {
        CircleOnSphere => vec![(0.15, std::f64::consts::PI - 0.15), dom[1]],
        TorusOnS3 => vec![(0.1, FRAC_PI_2 - 0.1), dom[1], dom[2]],
        _ => dom.clone(),
    }
}

/// Pseudo-random point of the regular critical set with `|y| <= 2`,
/// `|z| <= 1`.
pub fn random_regular_point(action: &GroupActionSpec, rng: &mut ChaCha8Rng) -> PhasePoint {
    let (n, d) = (action.manifold_dim, action.group_dim);
    let (ny, nz) = action.kind.regc_dims();
    let q: Vec<f64> = principal_box(action).iter().map(|&(a, b)| rng.random_range(a..b)).collect();
    let y: Vec<f64> = (0..ny).map(|_| rng.random_range(-2.0..2.0)).collect();
    let z: Vec<f64> = (0..nz).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (p, s) = action.kind.regc_point::<f64>(n, d, &q, &y, &z);
    let id = action.charts[action.kind.global_chart()].id;
    PhasePoint::new(id, q, p, s)
}

/// `count` certified samples, reproducible from `seed`.
pub fn sample_regular_critical(action: &GroupActionSpec, count: usize, seed: u64) -> Result<Vec<CriticalSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<PhasePoint> = (0..count).map(|_| random_regular_point(action, &mut rng)).collect();
    par_map(pts.len(), |i| certify_regular_critical(action, &pts[i], 1e-10)).into_iter().collect()
}

/// Product of the nonzero eigenvalues of a symmetric matrix of rank `r`,
/// as the elementary symmetric function `e_r` of its eigenvalues (sum of
/// principal `r x r` minors).
pub fn pseudo_det(h: &[Vec<f64>], r: usize) -> f64 {
    let n = h.len();
    let mut idx: Vec<usize> = (0..r).collect();
    let mut total = 0.0;
    if r == 0 {
        return 1.0;
    }
    loop {
        let sub: Vec<Vec<f64>> = idx.iter().map(|&i| idx.iter().map(|&j| h[i][j]).collect()).collect();
        total += det_pivot(sub);
        // next combination
        let mut k = r;
        loop {
            if k == 0 {
                return total;
            }
            k -= 1;
            if idx[k] < n - r + k {
                idx[k] += 1;
                for j in k + 1..r {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[allow(clippy::needless_range_loop)]
fn det_pivot(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap()).unwrap();
        if a[piv][k] == 0.0 {
            return 0.0;
        }
        if piv != k {
            a.swap(piv, k);
            det = -det;
        }
        det *= a[k][k];
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    det
}

/// Generic real helper used by tests: the phase at `u = (q, p, s)`.
pub fn phase_at<T: Real>(action: &GroupActionSpec, chart: usize, u: &[T]) -> T {
    let n = action.manifold_dim;
    let d = action.group_dim;
    action.phase_t(chart, &u[..n], &u[n..2 * n], &u[2 * n..2 * n + d])
}
