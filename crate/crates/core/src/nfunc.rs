//! Pointwise kernels of the variable-exponent power-law model.
//!
//! Everything in here is a pure function of its value arguments: the
//! exponent field `p(t, x)`, the extra stress `S`, the natural-distance maps
//! `F` and `F*`, the N-function `phi` with its shifted variants, and the
//! Jacobian of `S` used by the Newton linearization.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this norm the dyadic part of the stress Jacobian is dropped.
pub const JACOBIAN_GUARD: f64 = 1e-14;

/// Below this radius the exponent gradient is treated as singular.
pub const ORIGIN_GUARD: f64 = 1e-12;

/// A point of the plane.
pub type Point = [f64; 2];

/// Euclidean norm of a point.
#[inline]
pub fn norm2(x: Point) -> f64 {
    x[0].hypot(x[1])
}

/// A 2x2 real matrix stored row-major as `[a11, a12, a21, a22]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tensor2(pub [f64; 4]);

impl Tensor2 {
    pub const ZERO: Tensor2 = Tensor2([0.0; 4]);
    pub const IDENTITY: Tensor2 = Tensor2([1.0, 0.0, 0.0, 1.0]);

    pub fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Tensor2([a11, a12, a21, a22])
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Tensor2([a, 0.0, 0.0, b])
    }

    /// `(A + A^T) / 2`.
    #[inline]
    pub fn sym(&self) -> Tensor2 {
        let [a, b, c, d] = self.0;
        let off = 0.5 * (b + c);
        Tensor2([a, off, off, d])
    }

    /// Frobenius inner product `A : B`.
    #[inline]
    pub fn ddot(&self, other: &Tensor2) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Frobenius norm.
    #[inline]
    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[3]
    }

    #[inline]
    pub fn transpose(&self) -> Tensor2 {
        let [a, b, c, d] = self.0;
        Tensor2([a, c, b, d])
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Tensor2 {
        let [a, b, c, d] = self.0;
        Tensor2([s * a, s * b, s * c, s * d])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Add for Tensor2 {
    type Output = Tensor2;
    fn add(self, rhs: Tensor2) -> Tensor2 {
        let mut out = self.0;
        out.iter_mut().zip(rhs.0).for_each(|(a, b)| *a += b);
        Tensor2(out)
    }
}

impl Sub for Tensor2 {
    type Output = Tensor2;
    fn sub(self, rhs: Tensor2) -> Tensor2 {
        let mut out = self.0;
        out.iter_mut().zip(rhs.0).for_each(|(a, b)| *a -= b);
        Tensor2(out)
    }
}

impl Neg for Tensor2 {
    type Output = Tensor2;
    fn neg(self) -> Tensor2 {
        self.scale(-1.0)
    }
}

impl Mul<Tensor2> for f64 {
    type Output = Tensor2;
    fn mul(self, rhs: Tensor2) -> Tensor2 {
        rhs.scale(self)
    }
}

/// Linear operator on 2x2 matrices, acting on the row-major vectorization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tensor4(pub [[f64; 4]; 4]);

impl Tensor4 {
    /// `J[B]`.
    #[inline]
    pub fn apply(&self, b: &Tensor2) -> Tensor2 {
        let mut out = [0.0; 4];
        for (row, o) in self.0.iter().zip(out.iter_mut()) {
            *o = row.iter().zip(b.0.iter()).map(|(j, v)| j * v).sum();
        }
        Tensor2(out)
    }

    /// `B1 : J[B2]`.
    #[inline]
    pub fn bilinear(&self, b1: &Tensor2, b2: &Tensor2) -> f64 {
        b1.ddot(&self.apply(b2))
    }
}

/// Viscosity scale and regularization of the stress law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StressParams {
    pub nu0: f64,
    pub delta: f64,
}

impl Default for StressParams {
    fn default() -> Self {
        StressParams {
            nu0: 1.0,
            delta: 1e-4,
        }
    }
}

impl StressParams {
    pub fn new(nu0: f64, delta: f64) -> Result<Self> {
        if !(nu0 > 0.0 && nu0.is_finite()) {
            return Err(Error::Config(format!("nu0 must be positive, got {nu0}")));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!(
                "delta must be non-negative, got {delta}"
            )));
        }
        Ok(StressParams { nu0, delta })
    }
}

/// The Hölder-continuous exponent field
/// `p(t,x) = (1 - s(x)) p_plus + s(x) (p_minus + t)`, `s(x) = |x|^alpha / 2^(alpha/2)`.
///
/// With `time_dependent == false` the `+ t` drift is dropped, so that
/// `p_minus == p_plus` gives a truly constant exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentField {
    pub p_minus: f64,
    pub p_plus: f64,
    pub alpha: f64,
    pub final_time: f64,
    #[serde(default = "default_time_dependent")]
    pub time_dependent: bool,
}

fn default_time_dependent() -> bool {
    true
}

impl ExponentField {
    pub fn new(p_minus: f64, p_plus: f64, alpha: f64, final_time: f64) -> Result<Self> {
        if !(p_minus > 1.0 && p_plus >= p_minus && p_plus.is_finite()) {
            return Err(Error::Config(format!(
                "exponent bounds must satisfy 1 < p_minus <= p_plus < inf, got ({p_minus}, {p_plus})"
            )));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err(Error::Config(format!(
                "final time must be positive, got {final_time}"
            )));
        }
        Ok(ExponentField {
            p_minus,
            p_plus,
            alpha,
            final_time,
            time_dependent: true,
        })
    }

    /// Constant exponent `p` everywhere and at all times.
    pub fn constant(p: f64, final_time: f64) -> Result<Self> {
        Ok(ExponentField {
            time_dependent: false,
            ..Self::new(p, p, 1.0, final_time)?
        })
    }

    #[inline]
    fn drift(&self, t: f64) -> f64 {
        if self.time_dependent {
            t
        } else {
            0.0
        }
    }

    /// Blending weight `|x|^alpha / 2^(alpha/2)`, in `[0, 1]` on the unit square.
    #[inline]
    fn weight(&self, x: Point) -> f64 {
        let r = norm2(x);
        if r == 0.0 {
            0.0
        } else {
            r.powf(self.alpha) / 2f64.powf(0.5 * self.alpha)
        }
    }

    /// `p(t, x)`.
    #[inline]
    pub fn eval(&self, t: f64, x: Point) -> f64 {
        let s = self.weight(x);
        (1.0 - s) * self.p_plus + s * (self.p_minus + self.drift(t))
    }

    /// `d p / d t = s(x)`.
    #[inline]
    pub fn dt(&self, x: Point) -> f64 {
        if self.time_dependent {
            self.weight(x)
        } else {
            0.0
        }
    }

    /// Spatial gradient `alpha |x|^(alpha-2) x / 2^(alpha/2) * (p_minus + t - p_plus)`.
    pub fn grad(&self, t: f64, x: Point) -> Result<Point> {
        let r = norm2(x);
        let jump = self.p_minus + self.drift(t) - self.p_plus;
        if r < ORIGIN_GUARD {
            if self.alpha >= 2.0 || jump == 0.0 {
                return Ok([0.0, 0.0]);
            }
            return Err(Error::SingularPoint { x: x[0], y: x[1] });
        }
        let c = self.alpha * r.powf(self.alpha - 2.0) / 2f64.powf(0.5 * self.alpha) * jump;
        Ok([c * x[0], c * x[1]])
    }
}

/// `(base)^expo * scale`, returning 0 when `scale == 0` even if the power blows up.
#[inline]
fn guarded_pow_times(base: f64, expo: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        0.0
    } else {
        base.powf(expo) * scale
    }
}

/// Extra stress `nu0 (delta + |A^sym|)^(p-2) A^sym`.
#[inline]
pub fn stress(params: &StressParams, p: f64, a: &Tensor2) -> Tensor2 {
    let s = a.sym();
    let n = s.norm();
    if n == 0.0 {
        return Tensor2::ZERO;
    }
    s.scale(params.nu0 * (params.delta + n).powf(p - 2.0))
}

/// `F(A) = (delta + |A^sym|)^((p-2)/2) A^sym`.
#[inline]
pub fn tensor_f(params: &StressParams, p: f64, a: &Tensor2) -> Tensor2 {
    let s = a.sym();
    let n = s.norm();
    if n == 0.0 {
        return Tensor2::ZERO;
    }
    s.scale((params.delta + n).powf(0.5 * (p - 2.0)))
}

/// Hölder conjugate `p / (p - 1)`.
#[inline]
pub fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

/// `F*(A) = (delta^(p-1) + |A^sym|)^((p'-2)/2) A^sym`.
#[inline]
pub fn tensor_fstar(params: &StressParams, p: f64, a: &Tensor2) -> Tensor2 {
    let s = a.sym();
    let n = s.norm();
    if n == 0.0 {
        return Tensor2::ZERO;
    }
    let pc = conjugate_exponent(p);
    s.scale((params.delta.powf(p - 1.0) + n).powf(0.5 * (pc - 2.0)))
}

/// N-function `phi(r) = int_0^r (delta + s)^(p-2) s ds`, in closed form.
pub fn phi(params: &StressParams, p: f64, r: f64) -> f64 {
    let d = params.delta;
    if r == 0.0 {
        return 0.0;
    }
    if d > 0.0 && r < 1e-6 * d {
        // closed form cancels catastrophically here; second-order Taylor instead
        return d.powf(p - 2.0) * r * r * (0.5 + (p - 2.0) * r / (3.0 * d));
    }
    let upper = d + r;
    let head = (upper.powf(p) - d.powf(p)) / p;
    let tail = if d == 0.0 {
        0.0
    } else {
        d * (upper.powf(p - 1.0) - d.powf(p - 1.0)) / (p - 1.0)
    };
    head - tail
}

/// Derivative `phi'(r) = (delta + r)^(p-2) r`.
#[inline]
pub fn phi_prime(params: &StressParams, p: f64, r: f64) -> f64 {
    guarded_pow_times(params.delta + r, p - 2.0, r)
}

/// Shifted N-function surrogate `(delta + a + r)^(p-2) r^2`.
#[inline]
pub fn phi_shift(params: &StressParams, p: f64, a: f64, r: f64) -> f64 {
    guarded_pow_times(params.delta + a + r, p - 2.0, r * r)
}

/// Conjugate of the shifted N-function, surrogate
/// `((delta + a)^(p-1) + r)^(p'-2) r^2`.
#[inline]
pub fn phi_shift_conj(params: &StressParams, p: f64, a: f64, r: f64) -> f64 {
    let pc = conjugate_exponent(p);
    guarded_pow_times((params.delta + a).powf(p - 1.0) + r, pc - 2.0, r * r)
}

/// Derivative of [`stress`] with respect to `A`:
/// `nu0 [ (delta+|A^s|)^(p-2) P_sym + (p-2)(delta+|A^s|)^(p-3) A^s (x) A^s / |A^s| ]`.
pub fn stress_jacobian(params: &StressParams, p: f64, a: &Tensor2) -> Tensor4 {
    let s = a.sym();
    let n = s.norm();
    let base = params.delta + n;
    // P_sym on the row-major vectorization
    let sym_part = |j: &mut [[f64; 4]; 4], c: f64| {
        j[0][0] += c;
        j[3][3] += c;
        j[1][1] += 0.5 * c;
        j[1][2] += 0.5 * c;
        j[2][1] += 0.5 * c;
        j[2][2] += 0.5 * c;
    };
    let mut j = [[0.0; 4]; 4];
    if base == 0.0 {
        // delta = 0 and A^sym = 0: only finite for p >= 2
        let c = if p == 2.0 { params.nu0 } else { 0.0 };
        sym_part(&mut j, c);
        return Tensor4(j);
    }
    let lead = params.nu0 * base.powf(p - 2.0);
    sym_part(&mut j, lead);
    if n >= JACOBIAN_GUARD && p != 2.0 {
        let c = params.nu0 * (p - 2.0) * base.powf(p - 3.0) / n;
        for (r, row) in j.iter_mut().enumerate() {
            for (col, v) in row.iter_mut().enumerate() {
                *v += c * s.0[r] * s.0[col];
            }
        }
    }
    Tensor4(j)
}
