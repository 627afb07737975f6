//! Forward-mode differentiation.
//!
//! [`Jet`] carries a value, a gradient and a packed upper-triangular Hessian
//! with respect to up to [`MAX_VARS`] independent variables. [`Dual`] is a
//! first-order directional dual over any [`Real`], so `Dual<Jet>` yields the
//! second derivatives of a directional derivative (used for push-forwards).

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub const MAX_VARS: usize = 8;
const HESS_LEN: usize = MAX_VARS * (MAX_VARS + 1) / 2;

#[inline]
fn tri(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    b * (b + 1) / 2 + a
}

/// Scalar types the geometry code is generic over.
pub trait Real:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(x: f64) -> Self;
    fn value(&self) -> f64;
    /// Applies a scalar function whose derivatives of order 0..=4 at
    /// `self.value()` are `d`.
    fn compose(&self, d: [f64; 5]) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }
    fn sqr(self) -> Self {
        self * self
    }
    fn sin(self) -> Self {
        let v = self.value();
        let (s, c) = v.sin_cos();
        self.compose([s, c, -s, -c, s])
    }
    fn cos(self) -> Self {
        let v = self.value();
        let (s, c) = v.sin_cos();
        self.compose([c, -s, -c, s, c])
    }
    fn exp(self) -> Self {
        let e = self.value().exp();
        self.compose([e; 5])
    }
    fn ln(self) -> Self {
        let v = self.value();
        self.compose([
            v.ln(),
            1.0 / v,
            -1.0 / (v * v),
            2.0 / (v * v * v),
            -6.0 / (v * v * v * v),
        ])
    }
    /// Square root. At zero the derivatives are infinite, which surfaces as
    /// non-finite jet entries.
    fn sqrt(self) -> Self {
        let v = self.value();
        let r = v.sqrt();
        self.compose([
            r,
            0.5 / r,
            -0.25 / (r * v),
            0.375 / (r * v * v),
            -0.9375 / (r * v * v * v),
        ])
    }
    fn recip(self) -> Self {
        let v = self.value();
        let w = 1.0 / v;
        self.compose([w, -w * w, 2.0 * w * w * w, -6.0 * w.powi(4), 24.0 * w.powi(5)])
    }
    fn atan(self) -> Self {
        let v = self.value();
        let w = 1.0 / (1.0 + v * v);
        self.compose([
            v.atan(),
            w,
            -2.0 * v * w * w,
            (6.0 * v * v - 2.0) * w * w * w,
            24.0 * v * (1.0 - v * v) * w.powi(4),
        ])
    }
    /// `sin(sqrt(t)) / sqrt(t)`, analytic in `t` (including `t <= 0`).
    fn sinc_sqrt(self) -> Self {
        self.compose(sinc_sqrt_derivs(self.value()))
    }
    /// `cos(sqrt(t))`, analytic in `t`.
    fn cos_sqrt(self) -> Self {
        let v = self.value();
        let s = sinc_sqrt_derivs(v);
        let c = if v.abs() < 1.0 {
            cos_sqrt_series(v)
        } else if v > 0.0 {
            v.sqrt().cos()
        } else {
            (-v).sqrt().cosh()
        };
        self.compose([c, -0.5 * s[0], -0.5 * s[1], -0.5 * s[2], -0.5 * s[3]])
    }
}

/// `atan2(y, x)` with derivatives, branch chosen from the values.
pub fn atan2<T: Real>(y: T, x: T) -> T {
    let (yv, xv) = (y.value(), x.value());
    let base = yv.atan2(xv);
    if xv.abs() >= yv.abs() {
        let r = (y / x).atan();
        r + (base - r.value())
    } else {
        let r = -(x / y).atan();
        r + (base - r.value())
    }
}

fn cos_sqrt_series(t: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..30 {
        term *= -t / ((2 * k - 1) as f64 * (2 * k) as f64);
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

/// Derivatives 0..=4 of `S(t) = sin(sqrt t)/sqrt t`.
pub fn sinc_sqrt_derivs(t: f64) -> [f64; 5] {
    if t.abs() < 1.0 {
        // S^(m)(t) = sum_{k>=m} (-1)^k k!/(k-m)! t^(k-m) / (2k+1)!
        let mut out = [0.0; 5];
        for (m, slot) in out.iter_mut().enumerate() {
            let mut sum = 0.0;
            for k in m..m + 25 {
                let mut c = if k % 2 == 0 { 1.0 } else { -1.0 };
                for f in (k - m + 1)..=k {
                    c *= f as f64;
                }
                let mut fact = 1.0;
                for f in 2..=(2 * k + 1) {
                    fact *= f as f64;
                }
                sum += c * t.powi((k - m) as i32) / fact;
            }
            *slot = sum;
        }
        out
    } else {
        let (s, c) = if t > 0.0 {
            let r = t.sqrt();
            (r.sin() / r, r.cos())
        } else {
            let r = (-t).sqrt();
            (r.sinh() / r, r.cosh())
        };
        // 2t S' = C - S and (2t) S^(m+1) = -S^(m-1)/2 - (2m+1) S^(m)
        let s1 = (c - s) / (2.0 * t);
        let s2 = (-0.5 * s - 3.0 * s1) / (2.0 * t);
        let s3 = (-0.5 * s1 - 5.0 * s2) / (2.0 * t);
        let s4 = (-0.5 * s2 - 7.0 * s3) / (2.0 * t);
        [s, s1, s2, s3, s4]
    }
}

impl Real for f64 {
    #[inline]
    fn cst(x: f64) -> Self {
        x
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn compose(&self, d: [f64; 5]) -> Self {
        d[0]
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn recip(self) -> Self {
        1.0 / self
    }
    #[inline]
    fn atan(self) -> Self {
        f64::atan(self)
    }
}

/// Second-order jet in `n` variables.
#[derive(Clone, Copy)]
pub struct Jet {
    pub n: usize,
    pub v: f64,
    pub g: [f64; MAX_VARS],
    h: [f64; HESS_LEN],
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("v", &self.v)
            .field("g", &&self.g[..self.n])
            .finish()
    }
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Jet { n: 0, v, g: [0.0; MAX_VARS], h: [0.0; HESS_LEN] }
    }

    /// The `i`-th of `n` independent variables, at value `v`.
    pub fn var(n: usize, i: usize, v: f64) -> Self {
        assert!(n <= MAX_VARS, "jet dimension {n} exceeds {MAX_VARS}");
        assert!(i < n);
        let mut j = Jet::constant(v);
        j.n = n;
        j.g[i] = 1.0;
        j
    }

    /// All `u.len()` variables at once.
    pub fn vars(u: &[f64]) -> Vec<Jet> {
        let n = u.len();
        u.iter().enumerate().map(|(i, &x)| Jet::var(n, i, x)).collect()
    }

    pub fn grad(&self, k: usize) -> Vec<f64> {
        (0..k).map(|i| if i < self.n { self.g[i] } else { 0.0 }).collect()
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        if i < self.n && j < self.n {
            self.h[tri(i, j)]
        } else {
            0.0
        }
    }

    /// Dense symmetric Hessian of size `k`.
    pub fn hess_matrix(&self, k: usize) -> Vec<Vec<f64>> {
        (0..k).map(|i| (0..k).map(|j| self.hess(i, j)).collect()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite()
            && self.g[..self.n].iter().all(|x| x.is_finite())
            && self.h[..self.n * (self.n + 1) / 2].iter().all(|x| x.is_finite())
    }

    fn is_const(&self) -> bool {
        self.g[..self.n].iter().all(|&x| x == 0.0)
            && self.h[..self.n * (self.n + 1) / 2].iter().all(|&x| x == 0.0)
    }
}

impl Real for Jet {
    fn cst(x: f64) -> Self {
        Jet::constant(x)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn compose(&self, d: [f64; 5]) -> Self {
        if self.is_const() {
            return Jet::constant(d[0]);
        }
        let n = self.n;
        let mut out = *self;
        out.v = d[0];
        for i in 0..n {
            out.g[i] = d[1] * self.g[i];
        }
        for j in 0..n {
            for i in 0..=j {
                let k = tri(i, j);
                out.h[k] = d[1] * self.h[k] + d[2] * self.g[i] * self.g[j];
            }
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let n = self.n.max(o.n);
        let mut out = if self.n >= o.n { self } else { o };
        let other = if self.n >= o.n { &o } else { &self };
        out.v = self.v + o.v;
        for i in 0..other.n {
            out.g[i] += other.g[i];
        }
        for k in 0..other.n * (other.n + 1) / 2 {
            out.h[k] += other.h[k];
        }
        out.n = n;
        out
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        let mut out = self;
        out.v = -self.v;
        for i in 0..self.n {
            out.g[i] = -self.g[i];
        }
        for k in 0..self.n * (self.n + 1) / 2 {
            out.h[k] = -self.h[k];
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let n = self.n.max(o.n);
        let mut out = Jet::constant(self.v * o.v);
        out.n = n;
        let ga = |i: usize| if i < self.n { self.g[i] } else { 0.0 };
        let gb = |i: usize| if i < o.n { o.g[i] } else { 0.0 };
        for i in 0..n {
            out.g[i] = self.v * gb(i) + o.v * ga(i);
        }
        for j in 0..n {
            for i in 0..=j {
                let k = tri(i, j);
                let ha = if j < self.n { self.h[k] } else { 0.0 };
                let hb = if j < o.n { o.h[k] } else { 0.0 };
                out.h[k] = self.v * hb + o.v * ha + ga(i) * gb(j) + ga(j) * gb(i);
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        if o.is_const() {
            return self * (1.0 / o.v);
        }
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, o: f64) -> Jet {
        let mut out = self;
        out.v += o;
        out
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, o: f64) -> Jet {
        self + (-o)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, o: f64) -> Jet {
        let mut out = self;
        out.v *= o;
        for i in 0..self.n {
            out.g[i] *= o;
        }
        for k in 0..self.n * (self.n + 1) / 2 {
            out.h[k] *= o;
        }
        out
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, o: f64) -> Jet {
        self * (1.0 / o)
    }
}

/// First-order dual number `re + eps·ε` over a [`Real`].
#[derive(Clone, Copy, Debug)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Real> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Dual { re, eps }
    }
    pub fn lift(re: T) -> Self {
        Dual { re, eps: T::cst(0.0) }
    }
}

impl<T: Real> Real for Dual<T> {
    fn cst(x: f64) -> Self {
        Dual { re: T::cst(x), eps: T::cst(0.0) }
    }
    fn value(&self) -> f64 {
        self.re.value()
    }
    fn compose(&self, d: [f64; 5]) -> Self {
        Dual {
            re: self.re.compose(d),
            eps: self.eps * self.re.compose([d[1], d[2], d[3], d[4], 0.0]),
        }
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual { re: self.re + o.re, eps: self.eps + o.eps }
    }
}
impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual { re: self.re - o.re, eps: self.eps - o.eps }
    }
}
impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual { re: self.re * o.re, eps: self.re * o.eps + self.eps * o.re }
    }
}
impl<T: Real> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = o.re.recip();
        let re = self.re * inv;
        Dual { re, eps: (self.eps - re * o.eps) * inv }
    }
}
impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual { re: -self.re, eps: -self.eps }
    }
}
impl<T: Real> Add<f64> for Dual<T> {
    type Output = Self;
    fn add(self, o: f64) -> Self {
        Dual { re: self.re + o, eps: self.eps }
    }
}
impl<T: Real> Sub<f64> for Dual<T> {
    type Output = Self;
    fn sub(self, o: f64) -> Self {
        Dual { re: self.re - o, eps: self.eps }
    }
}
impl<T: Real> Mul<f64> for Dual<T> {
    type Output = Self;
    fn mul(self, o: f64) -> Self {
        Dual { re: self.re * o, eps: self.eps * o }
    }
}
impl<T: Real> Div<f64> for Dual<T> {
    type Output = Self;
    fn div(self, o: f64) -> Self {
        Dual { re: self.re / o, eps: self.eps / o }
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, o: Jet) {
        *self = *self + o;
    }
}
impl SubAssign for Jet {
    fn sub_assign(&mut self, o: Jet) {
        *self = *self - o;
    }
}
impl MulAssign<f64> for Jet {
    fn mul_assign(&mut self, o: f64) {
        *self = *self * o;
    }
}

/// Directional derivative of `f` at `x` along `w`, with `f` evaluated over
/// `Dual<T>` so the result keeps full `T` derivative information.
pub fn push_forward<T, F>(f: F, x: &[T], w: &[T]) -> Vec<T>
where
    T: Real,
    F: Fn(&[Dual<T>]) -> Vec<Dual<T>>,
{
    let xs: Vec<Dual<T>> = x.iter().zip(w).map(|(&a, &b)| Dual::new(a, b)).collect();
    f(&xs).into_iter().map(|d| d.eps).collect()
}

/// Dot product over a [`Real`].
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc = acc + *x * *y;
    }
    acc
}

pub fn lift_slice<T: Real>(x: &[f64]) -> Vec<T> {
    x.iter().map(|&v| T::cst(v)).collect()
}

pub fn values<T: Real>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.value()).collect()
}
