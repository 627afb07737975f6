//! Charts, cotangent coordinates, fundamental vector fields and the
//! moment-map phase `psi(eta, X) = eta(X~)`.

use crate::catalogue::{ActionKind, IsotropyChain, StratumData};
use crate::error::{Error, Result};
use crate::jet::{dot, Jet, Real};
use serde::Serialize;

/// A coordinate chart given by closed-form maps.
#[derive(Debug, Clone, Serialize)]
pub struct ManifoldChart {
    pub id: &'static str,
    pub dim: usize,
    /// Open box in parameter space; periodic coordinates wrap.
    pub domain: Vec<(f64, f64)>,
    pub periodic: Vec<bool>,
    pub ambient_dim: usize,
}

/// A compact connected group acting isometrically on a closed manifold.
#[derive(Debug, Clone)]
pub struct GroupActionSpec {
    pub name: &'static str,
    pub kind: ActionKind,
    pub manifold_dim: usize,
    pub group_dim: usize,
    pub lie_basis: Vec<&'static str>,
    /// `c[i][j][k]` with `[X_i, X_j] = sum_k c[i][j][k] X_k`.
    pub structure_constants: Vec<Vec<Vec<f64>>>,
    /// Gram matrix of the basis under the invariant inner product.
    pub gram: Vec<Vec<f64>>,
    pub charts: Vec<ManifoldChart>,
    pub strata: Vec<StratumData>,
    pub chains: Vec<IsotropyChain>,
    pub kappa: usize,
    /// Shipped but outside the acceptance set.
    pub extended: bool,
}

/// A point `(eta, X)` of `T*M x g` in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhasePoint {
    pub chart: String,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub s: Vec<f64>,
}

impl PhasePoint {
    pub fn new(chart: &str, q: Vec<f64>, p: Vec<f64>, s: Vec<f64>) -> Self {
        PhasePoint { chart: chart.to_string(), q, p, s }
    }
}

/// Which density `liouville_density` reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Density {
    /// `dq dp` in canonical cotangent coordinates.
    Canonical,
    /// Riemannian volume of the base, `sqrt(det g) dq`.
    Base,
    /// `dq dp^` with fiber coordinates in a metric-orthonormal coframe.
    OrthonormalFiber,
}

impl GroupActionSpec {
    pub fn chart_index(&self, id: &str) -> Result<usize> {
        self.charts
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| Error::UnknownChart(id.to_string()))
    }

    pub fn chart(&self, id: &str) -> Result<&ManifoldChart> {
        Ok(&self.charts[self.chart_index(id)?])
    }

    pub fn in_domain(&self, chart: usize, q: &[f64]) -> bool {
        let c = &self.charts[chart];
        if q.len() != c.dim {
            return false;
        }
        let boxed = q.iter().zip(&c.domain).zip(&c.periodic).all(|((&x, &(lo, hi)), &per)| {
            x.is_finite() && (per || (x > lo && x < hi))
        });
        boxed && self.kind.extra_domain_ok(chart, q)
    }

    pub fn check_domain(&self, chart: usize, q: &[f64]) -> Result<()> {
        if self.in_domain(chart, q) {
            Ok(())
        } else {
            Err(Error::OutsideDomain(self.charts[chart].id.to_string()))
        }
    }

    /// Fundamental field `X~` at `q` for `X = sum s_i X_i`, generic scalar.
    pub fn field_t<T: Real>(&self, chart: usize, q: &[T], s: &[T]) -> Vec<T> {
        self.kind.field(chart, q, s)
    }

    /// Fundamental fields of the basis as columns `[X~_1 ... X~_d]`.
    pub fn field_matrix_t<T: Real>(&self, chart: usize, q: &[T]) -> Vec<Vec<T>> {
        let d = self.group_dim;
        let mut cols = Vec::with_capacity(d);
        for i in 0..d {
            let e: Vec<T> = (0..d).map(|j| T::cst(if i == j { 1.0 } else { 0.0 })).collect();
            cols.push(self.field_t(chart, q, &e));
        }
        cols
    }

    pub fn metric_t<T: Real>(&self, chart: usize, q: &[T]) -> Vec<Vec<T>> {
        self.kind.metric(chart, q)
    }

    pub fn embed_t<T: Real>(&self, chart: usize, q: &[T]) -> Vec<T> {
        self.kind.embed(chart, q)
    }

    pub fn embed(&self, chart: usize, q: &[f64]) -> Vec<f64> {
        self.kind.embed(chart, q)
    }

    /// Phase `sum_i p_i dq_i(X~)`, generic scalar.
    pub fn phase_t<T: Real>(&self, chart: usize, q: &[T], p: &[T], s: &[T]) -> T {
        dot(p, &self.field_t(chart, q, s))
    }

    /// Chart coordinates of the point with coordinates `q` in chart `from`.
    pub fn transition_t<T: Real>(&self, from: usize, to: usize, q: &[T]) -> Option<Vec<T>> {
        let x = self.embed_t(from, q);
        self.kind.chart_from_embedding(to, &x)
    }

    /// Re-expresses `(q, p)` in another chart; the covector transforms with
    /// the inverse transpose Jacobian of the transition map.
    pub fn change_chart(&self, from: usize, to: usize, q: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = q.len();
        let qj = Jet::vars(q);
        let out = self
            .transition_t(from, to, &qj)
            .ok_or_else(|| Error::OutsideDomain(self.charts[to].id.to_string()))?;
        let q2: Vec<f64> = out.iter().map(|x| x.v).collect();
        self.check_domain(to, &q2)?;
        let jac = nalgebra::DMatrix::from_fn(n, n, |i, j| out[i].grad(n)[j]);
        let inv = jac
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Domain("singular chart transition".into()))?;
        let pv = nalgebra::DVector::from_column_slice(p);
        let p2 = inv.transpose() * pv;
        Ok((q2, p2.iter().copied().collect()))
    }
}

/// `X~_m` for `X = sum s_i X_i`.
pub fn fundamental_field(action: &GroupActionSpec, chart: &str, q: &[f64], s: &[f64]) -> Result<Vec<f64>> {
    let c = action.chart_index(chart)?;
    action.check_domain(c, q)?;
    if s.len() != action.group_dim {
        return Err(Error::Invalid(format!("expected {} Lie algebra coordinates", action.group_dim)));
    }
    Ok(action.field_t(c, q, s))
}

/// The phase `psi(eta, X)` at a point.
pub fn phase(action: &GroupActionSpec, pt: &PhasePoint) -> Result<f64> {
    let x = fundamental_field(action, &pt.chart, &pt.q, &pt.s)?;
    if pt.p.len() != x.len() {
        return Err(Error::Invalid("fiber dimension mismatch".into()));
    }
    Ok(pt.p.iter().zip(&x).map(|(a, b)| a * b).sum())
}

/// Density of the requested measure relative to Lebesgue measure in the
/// chart coordinates.
pub fn liouville_density(action: &GroupActionSpec, chart: &str, q: &[f64], which: Density) -> Result<f64> {
    let c = action.chart_index(chart)?;
    action.check_domain(c, q)?;
    Ok(match which {
        Density::Canonical => 1.0,
        Density::Base | Density::OrthonormalFiber => sqrt_det(&action.metric_t::<f64>(c, q)),
    })
}

/// Gradient and symmetric Hessian of `f` at `u` by second-order jets.
pub fn dual_hessian<F>(f: F, u: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)>
where
    F: Fn(&[Jet]) -> Jet,
{
    let k = u.len();
    let vars = Jet::vars(u);
    let out = f(&vars);
    if !out.is_finite() {
        return Err(Error::Domain(format!("derivatives not finite at {u:?}")));
    }
    Ok((out.grad(k), out.hess_matrix(k)))
}

/// `sqrt(det g)` for a small symmetric positive matrix.
pub fn sqrt_det(g: &[Vec<f64>]) -> f64 {
    det_t(g).sqrt()
}

/// Determinant by elimination without pivoting (symmetric positive input).
#[allow(clippy::needless_range_loop)]
pub fn det_t<T: Real>(g: &[Vec<T>]) -> T {
    let n = g.len();
    let mut a: Vec<Vec<T>> = g.to_vec();
    let mut det = T::cst(1.0);
    for k in 0..n {
        let piv = a[k][k];
        det = det * piv;
        for i in k + 1..n {
            let f = a[i][k] / piv;
            for j in k..n {
                a[i][j] = a[i][j] - f * a[k][j];
            }
        }
    }
    det
}

/// Inverse of a small symmetric positive matrix (Gauss-Jordan).
pub fn inv_t<T: Real>(g: &[Vec<T>]) -> Vec<Vec<T>> {
    let n = g.len();
    let mut a: Vec<Vec<T>> = g.to_vec();
    let mut b: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| T::cst(if i == j { 1.0 } else { 0.0 })).collect())
        .collect();
    for k in 0..n {
        let piv = a[k][k].recip();
        for j in 0..n {
            a[k][j] = a[k][j] * piv;
            b[k][j] = b[k][j] * piv;
        }
        for i in 0..n {
            if i != k {
                let f = a[i][k];
                for j in 0..n {
                    a[i][j] = a[i][j] - f * a[k][j];
                    b[i][j] = b[i][j] - f * b[k][j];
                }
            }
        }
    }
    b
}

/// `p^T g^{-1} p`, the squared metric norm of a covector.
pub fn covector_norm2_t<T: Real>(g: &[Vec<T>], p: &[T]) -> T {
    let gi = inv_t(g);
    let mut acc = T::zero();
    for i in 0..p.len() {
        for j in 0..p.len() {
            acc = acc + p[i] * gi[i][j] * p[j];
        }
    }
    acc
}
