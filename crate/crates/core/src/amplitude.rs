//! Compactly supported smooth amplitudes on `T*M x g`.

use crate::catalogue::ActionKind;
use crate::error::{Error, Result};
use crate::geometry::{covector_norm2_t, GroupActionSpec};
use serde::Serialize;

/// `chi(t) = exp(1 - 1/(1 - t^2))` for `|t| < 1`, else 0, as a function of `t^2`.
pub fn chi2(t2: f64) -> f64 {
    if t2 < 1.0 {
        (1.0 - 1.0 / (1.0 - t2)).exp()
    } else {
        0.0
    }
}

/// Smooth step: 1 for `t <= 0`, 0 for `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let (a, b) = (f(1.0 - t), f(t));
        a / (a + b)
    }
}

/// Bump `a(eta, X) = scale * chi(|m - q0|/r_q) * chi(|eta - eta0|_g / r_p)
/// * chi(|s - s0| / r_s)`, with `m` in the ambient embedding.
///
/// `eta0 = p_offset * d(theta)` is only defined on the circle, where
/// `d(theta)` is a global invariant 1-form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Amplitude {
    pub id: String,
    pub action: &'static str,
    pub scale: f64,
    pub q0: Vec<f64>,
    pub r_q: f64,
    pub p_offset: f64,
    pub r_p: f64,
    pub s0: Vec<f64>,
    pub r_s: f64,
}

impl Amplitude {
    pub fn is_zero(&self) -> bool {
        self.scale == 0.0
    }

    /// Fiber factors depend only on `|eta|_g` and `|s|`.
    pub fn is_radial(&self) -> bool {
        self.p_offset == 0.0 && self.s0.iter().all(|&x| x == 0.0)
    }

    pub fn scaled(&self, k: f64) -> Amplitude {
        Amplitude { scale: self.scale * k, ..self.clone() }
    }

    /// Bound on `|eta|_g` over the support.
    pub fn p_extent(&self) -> f64 {
        self.r_p + self.p_offset.abs()
    }

    /// Bound on `|s|` over the support.
    pub fn s_extent(&self) -> f64 {
        self.r_s + self.s0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Base factor including `scale`, at an embedded point.
    pub fn base(&self, x: &[f64]) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        let d2: f64 = x.iter().zip(&self.q0).map(|(a, b)| (a - b) * (a - b)).sum();
        self.scale * chi2(d2 / (self.r_q * self.r_q))
    }

    /// Fiber factor from `|eta - eta0|_g^2`.
    pub fn fiber_p2(&self, norm2: f64) -> f64 {
        chi2(norm2 / (self.r_p * self.r_p))
    }

    pub fn fiber_s(&self, s: &[f64]) -> f64 {
        let d2: f64 = s.iter().zip(&self.s0).map(|(a, b)| (a - b) * (a - b)).sum();
        chi2(d2 / (self.r_s * self.r_s))
    }

    /// `p - eta0` in the coordinates of `chart`.
    pub fn shifted_p(&self, p: &[f64]) -> Vec<f64> {
        let mut out = p.to_vec();
        if self.p_offset != 0.0 {
            out[0] -= self.p_offset;
        }
        out
    }

    pub fn eval(&self, action: &GroupActionSpec, chart: usize, q: &[f64], p: &[f64], s: &[f64]) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        let b = self.base(&action.embed(chart, q));
        if b == 0.0 {
            return 0.0;
        }
        let g = action.metric_t::<f64>(chart, q);
        let n2 = covector_norm2_t(&g, &self.shifted_p(p));
        b * self.fiber_p2(n2) * self.fiber_s(s)
    }
}

/// Amplitude ids registered for an action.
pub fn amplitude_ids(action: &str) -> Result<Vec<&'static str>> {
    Ok(match ActionKind::from_name(action)? {
        ActionKind::CircleOnCircle => vec!["bump_A", "zero"],
        ActionKind::CircleOnSphere => vec!["bump_B", "bump_B_equator", "zero"],
        ActionKind::So3OnSphere => vec!["bump_C", "zero"],
        ActionKind::TorusOnS3 => vec!["bump_D", "zero"],
    })
}

/// Looks up a registered amplitude.
pub fn amplitude(action: &str, id: &str) -> Result<Amplitude> {
    let kind = ActionKind::from_name(action)?;
    let name = kind.name();
    let unreg = || Error::UnregisteredAmplitude(action.to_string(), id.to_string());
    let (q0, r_q, p_offset, s0, r_s): (Vec<f64>, f64, f64, Vec<f64>, f64) = match (kind, id) {
        (ActionKind::CircleOnCircle, "bump_A" | "zero") => (vec![1.0, 0.0], 3.0, 0.5, vec![0.25], 1.0),
        (ActionKind::CircleOnSphere, "bump_B" | "zero") => {
            (vec![1.2f64.sin(), 0.0, 1.2f64.cos()], 1.4, 0.0, vec![0.0], 1.0)
        }
        (ActionKind::CircleOnSphere, "bump_B_equator") => (vec![1.0, 0.0, 0.0], 1.0, 0.0, vec![0.0], 1.0),
        (ActionKind::So3OnSphere, "bump_C" | "zero") => (vec![0.0, 0.0, 1.0], 1.5, 0.0, vec![0.0; 3], 1.0),
        (ActionKind::TorusOnS3, "bump_D" | "zero") => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            (vec![h, 0.0, h, 0.0], 1.2, 0.0, vec![0.0; 2], 1.0)
        }
        _ => return Err(unreg()),
    };
    Ok(Amplitude {
        id: id.to_string(),
        action: name,
        scale: if id == "zero" { 0.0 } else { 1.0 },
        q0,
        r_q,
        p_offset,
        r_p: 2.0,
        s0,
        r_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalogue::load_action;

    #[test]
    fn chi_values() {
        assert_eq!(chi2(0.0), 1.0);
        assert_eq!(chi2(1.0), 0.0);
        assert!((chi2(0.25) - (1.0f64 - 1.0 / 0.75).exp()).abs() < 1e-16);
    }

    #[test]
    fn step_is_monotone_and_complementary() {
        let mut last = 1.0;
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            let v = smooth_step(t);
            assert!(v <= last);
            assert!((v + smooth_step(1.0 - t) - 1.0).abs() < 1e-15);
            last = v;
        }
    }

    #[test]
    fn amplitude_is_chart_independent() {
        let a = load_action("circle_on_sphere").unwrap();
        let amp = amplitude("circle_on_sphere", "bump_B").unwrap();
        let (q, p, s) = ([0.6, 0.4], [0.3, -0.2], [0.1]);
        let v0 = amp.eval(&a, 0, &q, &p, &s);
        let (q2, p2) = a.change_chart(0, 1, &q, &p).unwrap();
        let v1 = amp.eval(&a, 1, &q2, &p2, &s);
        assert!(v0 > 0.0);
        assert!((v0 - v1).abs() < 1e-13);
    }

    #[test]
    fn unregistered() {
        assert!(matches!(amplitude("so3_on_sphere", "bump_A"), Err(Error::UnregisteredAmplitude(..))));
    }
}
