//! Numerical asymptotics of equivariant oscillatory integrals
//! `I(mu) = int e^{i psi / mu} a` with moment-map phase over concrete compact
//! group actions, together with a chart-level partial resolution of the
//! singular critical set and a brute-force quadrature oracle.

pub mod amplitude;
pub mod asymptotics;
pub mod catalogue;
pub mod critical;
pub mod error;
pub mod geometry;
pub mod jet;
pub mod linalg;
pub mod reduce;
pub mod resolution;
pub mod suite;

pub use catalogue::{load_action, reference_l0, ActionKind, IsotropyChain, StratumData};
pub use error::{Error, Result};
pub use geometry::{GroupActionSpec, ManifoldChart, PhasePoint};
