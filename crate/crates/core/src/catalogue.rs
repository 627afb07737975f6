//! The four shipped actions with closed-form charts, metrics, fundamental
//! fields, strata and isotropy chains.

use crate::error::{Error, Result};
use crate::geometry::{GroupActionSpec, ManifoldChart};
use crate::jet::{atan2, Real};
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

pub const ACTION_NAMES: [&str; 4] = ["circle_on_circle", "circle_on_sphere", "so3_on_sphere", "torus_on_s3"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    CircleOnCircle,
    CircleOnSphere,
    So3OnSphere,
    TorusOnS3,
}

/// One orbit-type stratum. For singular strata the tubular data refer to
/// Fermi coordinates `(x, v)` of the chain chart.
#[derive(Debug, Clone, Serialize)]
pub struct StratumData {
    pub label: &'static str,
    pub isotropy_label: &'static str,
    pub principal: bool,
    /// `(c, d, e)`: normal rank, `dim g_x^perp`, `dim g_x`.
    pub dims: (usize, usize, usize),
    /// Chart carrying the Fermi coordinates; empty for the principal stratum.
    pub chart: &'static str,
    pub center_dim: usize,
    /// Orthonormal basis of `g_x^perp` in Lie coordinates.
    pub a_basis: Vec<Vec<f64>>,
    /// Orthonormal basis of `g_x` in Lie coordinates.
    pub b_basis: Vec<Vec<f64>>,
    /// `lambda(B_j)` on the normal fiber, one `c x c` matrix per `B_j`.
    pub lambda: Vec<Vec<Vec<f64>>>,
    pub tube_radius: f64,
}

/// A branch of the isotropy tree ending at the principal type.
#[derive(Debug, Clone, Serialize)]
pub struct IsotropyChain {
    pub label: &'static str,
    pub branch: Vec<&'static str>,
    /// Indices into `GroupActionSpec::strata`, outermost first.
    pub levels: Vec<usize>,
}

impl IsotropyChain {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }
}

fn wrap<T: Real>(t: T, lo: f64) -> T {
    let v = t.value();
    let w = (v - lo).rem_euclid(TAU) + lo;
    t + (w - v)
}

fn c<T: Real>(x: f64) -> T {
    T::cst(x)
}

impl ActionKind {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "circle_on_circle" => ActionKind::CircleOnCircle,
            "circle_on_sphere" => ActionKind::CircleOnSphere,
            "so3_on_sphere" => ActionKind::So3OnSphere,
            "torus_on_s3" => ActionKind::TorusOnS3,
            _ => return Err(Error::UnknownAction(name.to_string())),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::CircleOnCircle => "circle_on_circle",
            ActionKind::CircleOnSphere => "circle_on_sphere",
            ActionKind::So3OnSphere => "so3_on_sphere",
            ActionKind::TorusOnS3 => "torus_on_s3",
        }
    }

    /// Chart used for quadrature over the whole manifold.
    pub fn global_chart(self) -> usize {
        0
    }

    pub fn extra_domain_ok(self, chart: usize, q: &[f64]) -> bool {
        match (self, chart) {
            (ActionKind::CircleOnCircle, _) | (_, 0) => true,
            _ => q[q.len() - 2].powi(2) + q[q.len() - 1].powi(2) < 1.0,
        }
    }

    pub fn embed<T: Real>(self, chart: usize, q: &[T]) -> Vec<T> {
        match self {
            ActionKind::CircleOnCircle => vec![q[0].cos(), q[0].sin()],
            ActionKind::CircleOnSphere | ActionKind::So3OnSphere => match chart {
                0 => {
                    let st = q[0].sin();
                    vec![st * q[1].cos(), st * q[1].sin(), q[0].cos()]
                }
                _ => {
                    let z = (c::<T>(1.0) - q[0] * q[0] - q[1] * q[1]).sqrt();
                    vec![q[0], q[1], if chart == 1 { z } else { -z }]
                }
            },
            ActionKind::TorusOnS3 => match chart {
                0 => {
                    let (a, b) = (q[0].cos(), q[0].sin());
                    vec![a * q[1].cos(), a * q[1].sin(), b * q[2].cos(), b * q[2].sin()]
                }
                _ => {
                    let r = (c::<T>(1.0) - q[1] * q[1] - q[2] * q[2]).sqrt();
                    let circ = [r * q[0].cos(), r * q[0].sin()];
                    if chart == 1 {
                        vec![circ[0], circ[1], q[1], q[2]]
                    } else {
                        vec![q[1], q[2], circ[0], circ[1]]
                    }
                }
            },
        }
    }

    /// Inverse of `embed` on the chart image; `None` off the image.
    pub fn chart_from_embedding<T: Real>(self, chart: usize, x: &[T]) -> Option<Vec<T>> {
        match self {
            ActionKind::CircleOnCircle => {
                let lo = if chart == 0 { 0.0 } else { -PI };
                Some(vec![wrap(atan2(x[1], x[0]), lo)])
            }
            ActionKind::CircleOnSphere | ActionKind::So3OnSphere => match chart {
                0 => {
                    let rho2 = x[0] * x[0] + x[1] * x[1];
                    if rho2.value() <= 0.0 {
                        return None;
                    }
                    Some(vec![atan2(rho2.sqrt(), x[2]), wrap(atan2(x[1], x[0]), 0.0)])
                }
                1 if x[2].value() > 0.0 => Some(vec![x[0], x[1]]),
                2 if x[2].value() < 0.0 => Some(vec![x[0], x[1]]),
                _ => None,
            },
            ActionKind::TorusOnS3 => {
                let r1 = x[0] * x[0] + x[1] * x[1];
                let r2 = x[2] * x[2] + x[3] * x[3];
                match chart {
                    0 if r1.value() > 0.0 && r2.value() > 0.0 => Some(vec![
                        atan2(r2.sqrt(), r1.sqrt()),
                        wrap(atan2(x[1], x[0]), 0.0),
                        wrap(atan2(x[3], x[2]), 0.0),
                    ]),
                    1 if r1.value() > 0.0 => Some(vec![wrap(atan2(x[1], x[0]), 0.0), x[2], x[3]]),
                    2 if r2.value() > 0.0 => Some(vec![wrap(atan2(x[3], x[2]), 0.0), x[0], x[1]]),
                    _ => None,
                }
            }
        }
    }

    pub fn metric<T: Real>(self, chart: usize, q: &[T]) -> Vec<Vec<T>> {
        let one = c::<T>(1.0);
        let zero = T::zero();
        match self {
            ActionKind::CircleOnCircle => vec![vec![one]],
            ActionKind::CircleOnSphere | ActionKind::So3OnSphere => match chart {
                0 => vec![vec![one, zero], vec![zero, q[0].sin().sqr()]],
                _ => {
                    let k = (one - q[0] * q[0] - q[1] * q[1]).recip();
                    vec![
                        vec![one + q[0] * q[0] * k, q[0] * q[1] * k],
                        vec![q[0] * q[1] * k, one + q[1] * q[1] * k],
                    ]
                }
            },
            ActionKind::TorusOnS3 => match chart {
                0 => vec![
                    vec![one, zero, zero],
                    vec![zero, q[0].cos().sqr(), zero],
                    vec![zero, zero, q[0].sin().sqr()],
                ],
                _ => {
                    let c2 = one - q[1] * q[1] - q[2] * q[2];
                    let k = c2.recip();
                    vec![
                        vec![c2, zero, zero],
                        vec![zero, one + q[1] * q[1] * k, q[1] * q[2] * k],
                        vec![zero, q[1] * q[2] * k, one + q[2] * q[2] * k],
                    ]
                }
            },
        }
    }

    /// Fundamental field of `X = sum s_i X_i` in chart coordinates.
    pub fn field<T: Real>(self, chart: usize, q: &[T], s: &[T]) -> Vec<T> {
        match self {
            ActionKind::CircleOnCircle => vec![s[0]],
            ActionKind::CircleOnSphere => match chart {
                0 => vec![T::zero(), s[0]],
                _ => vec![-(s[0] * q[1]), s[0] * q[0]],
            },
            ActionKind::So3OnSphere => match chart {
                0 => {
                    let (sp, cp) = (q[1].sin(), q[1].cos());
                    let cot = q[0].cos() / q[0].sin();
                    vec![s[1] * cp - s[0] * sp, s[2] - cot * (s[0] * cp + s[1] * sp)]
                }
                _ => {
                    let r = (c::<T>(1.0) - q[0] * q[0] - q[1] * q[1]).sqrt();
                    let z = if chart == 1 { r } else { -r };
                    vec![s[1] * z - s[2] * q[1], s[2] * q[0] - s[0] * z]
                }
            },
            ActionKind::TorusOnS3 => match chart {
                0 => vec![T::zero(), s[0], s[1]],
                1 => vec![s[0], -(s[1] * q[2]), s[1] * q[1]],
                _ => vec![s[1], -(s[0] * q[2]), s[0] * q[1]],
            },
        }
    }

    /// Number of parameters of a group element.
    pub fn group_param_dim(self) -> usize {
        match self {
            ActionKind::CircleOnCircle | ActionKind::CircleOnSphere => 1,
            ActionKind::So3OnSphere => 3,
            ActionKind::TorusOnS3 => 2,
        }
    }

    /// Action of the group element with parameters `g` on an embedded point.
    pub fn act_embedded<T: Real>(self, g: &[f64], x: &[T]) -> Vec<T> {
        let rot2 = |t: f64, a: T, b: T| {
            let (s, co) = t.sin_cos();
            (a * co - b * s, a * s + b * co)
        };
        match self {
            ActionKind::CircleOnCircle => {
                let (a, b) = rot2(g[0], x[0], x[1]);
                vec![a, b]
            }
            ActionKind::CircleOnSphere => {
                let (a, b) = rot2(g[0], x[0], x[1]);
                vec![a, b, x[2]]
            }
            ActionKind::So3OnSphere => {
                let r = rotation_matrix(g);
                (0..3).map(|i| x[0] * r[i][0] + x[1] * r[i][1] + x[2] * r[i][2]).collect()
            }
            ActionKind::TorusOnS3 => {
                let (a, b) = rot2(g[0], x[0], x[1]);
                let (e, f) = rot2(g[1], x[2], x[3]);
                vec![a, b, e, f]
            }
        }
    }

    /// `Ad(g) X` in Lie coordinates.
    pub fn adjoint(self, g: &[f64], s: &[f64]) -> Vec<f64> {
        match self {
            ActionKind::So3OnSphere => {
                let r = rotation_matrix(g);
                (0..3).map(|i| (0..3).map(|j| r[i][j] * s[j]).sum()).collect()
            }
            _ => s.to_vec(),
        }
    }

    /// Chart in which an embedded point sits comfortably inside the domain.
    pub fn best_chart(self, x: &[f64]) -> usize {
        match self {
            ActionKind::CircleOnCircle => {
                if x[0] < 0.0 {
                    1
                } else {
                    0
                }
            }
            ActionKind::CircleOnSphere | ActionKind::So3OnSphere => {
                if x[2] > 0.8 {
                    1
                } else if x[2] < -0.8 {
                    2
                } else {
                    0
                }
            }
            ActionKind::TorusOnS3 => {
                let r1 = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if r1 > 0.95 {
                    1
                } else if r1 < 0.3 {
                    2
                } else {
                    0
                }
            }
        }
    }

    /// Ambient distance from an embedded point to the singular base locus.
    pub fn singular_distance(self, x: &[f64]) -> Option<f64> {
        match self {
            ActionKind::CircleOnCircle | ActionKind::So3OnSphere => None,
            ActionKind::CircleOnSphere => {
                let rho2 = x[0] * x[0] + x[1] * x[1];
                Some((rho2 + (1.0 - x[2].abs()).powi(2)).sqrt())
            }
            ActionKind::TorusOnS3 => {
                let r1 = (x[0] * x[0] + x[1] * x[1]).sqrt();
                let r2 = (x[2] * x[2] + x[3] * x[3]).sqrt();
                Some(((r1 - 1.0).powi(2) + r2 * r2).min((r2 - 1.0).powi(2) + r1 * r1).sqrt())
            }
        }
    }

    /// Fermi map `(x, v) -> chart coordinates` of a singular stratum.
    pub fn fermi<T: Real>(self, label: &str, x: &[T], v: &[T]) -> Vec<T> {
        let sc = (v[0] * v[0] + v[1] * v[1]).sinc_sqrt();
        match label {
            "north_pole" | "south_pole" => vec![sc * v[0], sc * v[1]],
            _ => vec![x[0], sc * v[0], sc * v[1]],
        }
    }

    /// Geodesic distance from an embedded point to the centre of a chain.
    pub fn tube_distance(self, label: &str, x: &[f64]) -> f64 {
        match label {
            "north_pole" => x[2].clamp(-1.0, 1.0).acos(),
            "south_pole" => (-x[2]).clamp(-1.0, 1.0).acos(),
            "circle_a" => (x[0] * x[0] + x[1] * x[1]).sqrt().min(1.0).acos(),
            "circle_b" => (x[2] * x[2] + x[3] * x[3]).sqrt().min(1.0).acos(),
            _ => f64::INFINITY,
        }
    }

    /// Dimensions `(n_y, n_z)` of the fiber parameters of the regular
    /// critical set over a principal base point.
    pub fn regc_dims(self) -> (usize, usize) {
        match self {
            ActionKind::CircleOnCircle => (0, 0),
            ActionKind::CircleOnSphere | ActionKind::TorusOnS3 => (1, 0),
            ActionKind::So3OnSphere => (0, 1),
        }
    }

    /// Bases over a principal base point (global chart): covectors `a_k`
    /// spanning the annihilator of the orbit, orthonormal for the dual
    /// metric, and Lie vectors `b_k` spanning the isotropy algebra.
    pub fn regc_basis<T: Real>(self, q: &[T]) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
        let one = c::<T>(1.0);
        let zero = T::zero();
        match self {
            ActionKind::CircleOnCircle => (vec![], vec![]),
            ActionKind::CircleOnSphere => (vec![vec![one, zero]], vec![]),
            ActionKind::So3OnSphere => (vec![], vec![self.embed(0, q)]),
            ActionKind::TorusOnS3 => (vec![vec![one, zero, zero]], vec![]),
        }
    }

    /// Point `(p, s)` of the regular critical set over `q` with fiber
    /// parameters `y`, `z`.
    pub fn regc_point<T: Real>(self, n: usize, d: usize, q: &[T], y: &[T], z: &[T]) -> (Vec<T>, Vec<T>) {
        let (a, b) = self.regc_basis(q);
        let mut p = vec![T::zero(); n];
        let mut s = vec![T::zero(); d];
        for (k, ak) in a.iter().enumerate() {
            for i in 0..n {
                p[i] = p[i] + y[k] * ak[i];
            }
        }
        for (k, bk) in b.iter().enumerate() {
            for i in 0..d {
                s[i] = s[i] + z[k] * bk[i];
            }
        }
        (p, s)
    }
}

/// Rodrigues formula for the rotation with rotation vector `w`.
pub fn rotation_matrix(w: &[f64]) -> [[f64; 3]; 3] {
    let th = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    let mut r = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    if th == 0.0 {
        return r;
    }
    let k = [w[0] / th, w[1] / th, w[2] / th];
    let kx = [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]];
    let (s, co) = th.sin_cos();
    for i in 0..3 {
        for j in 0..3 {
            let kk: f64 = (0..3).map(|l| kx[i][l] * kx[l][j]).sum();
            r[i][j] += s * kx[i][j] + (1.0 - co) * kk;
        }
    }
    r
}

fn chart(id: &'static str, domain: Vec<(f64, f64)>, periodic: Vec<bool>, ambient_dim: usize) -> ManifoldChart {
    ManifoldChart { id, dim: domain.len(), domain, periodic, ambient_dim }
}

fn principal(isotropy_label: &'static str, kappa: usize, e: usize) -> StratumData {
    StratumData {
        label: "principal",
        isotropy_label,
        principal: true,
        dims: (0, kappa, e),
        chart: "",
        center_dim: 0,
        a_basis: vec![],
        b_basis: vec![],
        lambda: vec![],
        tube_radius: 0.0,
    }
}

fn rot90() -> Vec<Vec<f64>> {
    vec![vec![0.0, -1.0], vec![1.0, 0.0]]
}

fn singular(label: &'static str, chart: &'static str, center_dim: usize, a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> StratumData {
    let d = a.len();
    let e = b.len();
    StratumData {
        label,
        isotropy_label: "S1",
        principal: false,
        dims: (2, d, e),
        chart,
        center_dim,
        a_basis: a,
        b_basis: b,
        lambda: vec![rot90()],
        tube_radius: 1.0,
    }
}

fn commuting(d: usize) -> Vec<Vec<Vec<f64>>> {
    vec![vec![vec![0.0; d]; d]; d]
}

fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// Loads a catalogue action by name.
pub fn load_action(name: &str) -> Result<GroupActionSpec> {
    let kind = ActionKind::from_name(name)?;
    let sphere_charts = || {
        vec![
            chart("spherical", vec![(0.0, PI), (0.0, TAU)], vec![false, true], 3),
            chart("north", vec![(-1.0, 1.0), (-1.0, 1.0)], vec![false, false], 3),
            chart("south", vec![(-1.0, 1.0), (-1.0, 1.0)], vec![false, false], 3),
        ]
    };
    let spec = match kind {
        ActionKind::CircleOnCircle => GroupActionSpec {
            name: kind.name(),
            kind,
            manifold_dim: 1,
            group_dim: 1,
            lie_basis: vec!["X"],
            structure_constants: commuting(1),
            gram: identity(1),
            charts: vec![
                chart("angle", vec![(0.0, TAU)], vec![true], 2),
                chart("angle_b", vec![(-PI, PI)], vec![true], 2),
            ],
            strata: vec![principal("trivial", 1, 0)],
            chains: vec![],
            kappa: 1,
            extended: false,
        },
        ActionKind::CircleOnSphere => GroupActionSpec {
            name: kind.name(),
            kind,
            manifold_dim: 2,
            group_dim: 1,
            lie_basis: vec!["Z"],
            structure_constants: commuting(1),
            gram: identity(1),
            charts: sphere_charts(),
            strata: vec![
                singular("north_pole", "north", 0, vec![], vec![vec![1.0]]),
                singular("south_pole", "south", 0, vec![], vec![vec![1.0]]),
                principal("trivial", 1, 0),
            ],
            chains: vec![
                IsotropyChain { label: "north", branch: vec!["S1", "trivial"], levels: vec![0] },
                IsotropyChain { label: "south", branch: vec!["S1", "trivial"], levels: vec![1] },
            ],
            kappa: 1,
            extended: false,
        },
        ActionKind::So3OnSphere => {
            let mut cst = commuting(3);
            for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
                cst[i][j][k] = 1.0;
                cst[j][i][k] = -1.0;
            }
            GroupActionSpec {
                name: kind.name(),
                kind,
                manifold_dim: 2,
                group_dim: 3,
                lie_basis: vec!["L_x", "L_y", "L_z"],
                structure_constants: cst,
                gram: (0..3).map(|i| (0..3).map(|j| if i == j { 2.0 } else { 0.0 }).collect()).collect(),
                charts: sphere_charts(),
                strata: vec![principal("SO2", 2, 1)],
                chains: vec![],
                kappa: 2,
                extended: false,
            }
        }
        ActionKind::TorusOnS3 => GroupActionSpec {
            name: kind.name(),
            kind,
            manifold_dim: 3,
            group_dim: 2,
            lie_basis: vec!["X1", "X2"],
            structure_constants: commuting(2),
            gram: identity(2),
            charts: vec![
                chart("hopf", vec![(0.0, FRAC_PI_2), (0.0, TAU), (0.0, TAU)], vec![false, true, true], 4),
                chart("circle_a", vec![(0.0, TAU), (-1.0, 1.0), (-1.0, 1.0)], vec![true, false, false], 4),
                chart("circle_b", vec![(0.0, TAU), (-1.0, 1.0), (-1.0, 1.0)], vec![true, false, false], 4),
            ],
            strata: vec![
                singular("circle_a", "circle_a", 1, vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]),
                singular("circle_b", "circle_b", 1, vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]),
                principal("trivial", 2, 0),
            ],
            chains: vec![
                IsotropyChain { label: "circle_a", branch: vec!["S1", "trivial"], levels: vec![0] },
                IsotropyChain { label: "circle_b", branch: vec!["S1", "trivial"], levels: vec![1] },
            ],
            kappa: 2,
            extended: true,
        },
    };
    Ok(spec)
}

impl GroupActionSpec {
    pub fn chain(&self, label: &str) -> Result<&IsotropyChain> {
        self.chains
            .iter()
            .find(|c| c.label == label)
            .ok_or_else(|| Error::Invalid(format!("action `{}` has no chain `{label}`", self.name)))
    }

    pub fn stratum(&self, label: &str) -> Option<&StratumData> {
        self.strata.iter().find(|s| s.label == label)
    }

    pub fn principal_stratum(&self) -> &StratumData {
        self.strata.iter().find(|s| s.principal).expect("every action has a principal stratum")
    }
}

/// Regression value of the leading coefficient, frozen from the quadrature
/// and oracle runs recorded in the tests.
pub fn reference_l0(name: &str, amplitude_id: &str) -> Result<f64> {
    ActionKind::from_name(name)?;
    let v = match (name, amplitude_id) {
        (_, "zero") => 0.0,
        ("circle_on_circle", "bump_A") => REF_CIRCLE_BUMP_A,
        ("circle_on_sphere", "bump_B") => REF_SPHERE_BUMP_B,
        ("so3_on_sphere", "bump_C") => REF_SO3_BUMP_C,
        ("circle_on_sphere", "bump_B_equator") => REF_SPHERE_BUMP_B_EQUATOR,
        ("torus_on_s3", "bump_D") => REF_TORUS_BUMP_D,
        _ => return Err(Error::UnregisteredAmplitude(name.into(), amplitude_id.into())),
    };
    Ok(v)
}

// Frozen values; see the reference tests in tests/reference_values.rs.
const REF_CIRCLE_BUMP_A: f64 = 4.057583208902;
const REF_SPHERE_BUMP_B: f64 = 8.055084344;
const REF_SPHERE_BUMP_B_EQUATOR: f64 = 3.290449693;
const REF_SO3_BUMP_C: f64 = 3.443591196;
const REF_TORUS_BUMP_D: f64 = 14.47044672;
