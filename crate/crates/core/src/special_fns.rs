//! Airy function, the Airy and sine kernels, and determinantal correlation
//! functions built from them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::determinant;
use crate::stats::integrate;

/// Documented accuracy range of [`airy`].
pub const AIRY_RANGE: (f64, f64) = (-40.0, 15.0);
/// Series on `[SERIES_LO, SERIES_HI]`, a damped integral up to
/// `INTEGRAL_HI`, asymptotics outside.
pub const SERIES_LO: f64 = -7.0;
pub const SERIES_HI: f64 = 2.0;
pub const INTEGRAL_HI: f64 = 8.0;
/// Below this separation the kernel quotient is replaced by its Taylor
/// expansion around the diagonal.
pub const KERNEL_DIAG_EPS: f64 = 1e-6;
/// Largest matrix accepted by [`det_correlation`].
pub const MAX_CORRELATION_ORDER: usize = 16;

// Ai(0) and -Ai'(0).
const C1: f64 = 0.355_028_053_887_817_2;
const C2: f64 = 0.258_819_403_792_806_8;
const SQRT_PI: f64 = 1.772_453_850_905_516;
const N_ASYM: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Airy,
    Sine,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "airy" => Ok(KernelKind::Airy),
            "sine" => Ok(KernelKind::Sine),
            other => Err(invalid(format!("unknown kernel `{other}`"))),
        }
    }
}

/// `(Ai(x), Ai'(x))`. Absolute error below `1e-10` on `[-20, 10]`.
pub fn airy(x: f64) -> Result<(f64, f64)> {
    let (lo, hi) = AIRY_RANGE;
    if !(lo..=hi).contains(&x) {
        return Err(Error::OutOfRange { x, lo, hi });
    }
    Ok(if x < SERIES_LO {
        airy_asymptotic_neg(x)
    } else if x > INTEGRAL_HI {
        airy_asymptotic_pos(x)
    } else if x > SERIES_HI {
        airy_integral_pos(x)
    } else {
        airy_series(x)
    })
}

/// Maclaurin series `Ai = C1 f - C2 g` with the two fundamental power
/// series of the Airy equation.
pub fn airy_series(x: f64) -> (f64, f64) {
    let x3 = x * x * x;
    let (mut f, mut tf) = (1.0, 1.0);
    let (mut g, mut tg) = (x, x);
    let (mut fp, mut tfp) = (0.5 * x * x, 0.5 * x * x);
    let (mut gp, mut tgp) = (1.0, 1.0);
    for k in 1..200 {
        let k3 = 3.0 * k as f64;
        if k > 1 {
            tfp *= x3 / ((k3 - 3.0) * (k3 - 1.0));
            fp += tfp;
        }
        tf *= x3 / ((k3 - 1.0) * k3);
        f += tf;
        tg *= x3 / (k3 * (k3 + 1.0));
        g += tg;
        tgp *= x3 / (k3 * (k3 - 2.0));
        gp += tgp;
        let biggest = tf.abs().max(tg.abs()).max(tfp.abs()).max(tgp.abs());
        if biggest < 1e-18 * (1.0 + f.abs()) {
            break;
        }
    }
    (C1 * f - C2 * g, C1 * fp - C2 * gp)
}

/// `Ai(x) = (e^{-zeta}/pi) int_0^inf exp(-sqrt(x) t^2) cos(t^3/3) dt` for
/// `x > 0`, and its derivative in `x`. Keeps full relative accuracy where
/// the series cancels and the asymptotic expansion is still too short.
pub fn airy_integral_pos(x: f64) -> (f64, f64) {
    let sx = x.sqrt();
    let zeta = 2.0 / 3.0 * x * sx;
    // exp(-sqrt(x) t^2) < e^{-40} beyond this cut.
    let cut = (40.0 / sx).sqrt();
    let i0 = integrate(|t| (-sx * t * t).exp() * (t * t * t / 3.0).cos(), 0.0, cut, 20, 16);
    let i2 = integrate(
        |t| t * t * (-sx * t * t).exp() * (t * t * t / 3.0).cos(),
        0.0,
        cut,
        20,
        16,
    );
    let e = (-zeta).exp() / std::f64::consts::PI;
    let ai = e * i0;
    (ai, -sx * ai - e * i2 / (2.0 * sx))
}

/// Coefficients `u_k`, `v_k` of the large-argument expansions.
fn asymptotic_coefficients() -> ([f64; N_ASYM], [f64; N_ASYM]) {
    let mut u = [0.0; N_ASYM];
    let mut v = [0.0; N_ASYM];
    u[0] = 1.0;
    v[0] = 1.0;
    for k in 1..N_ASYM {
        let kf = k as f64;
        u[k] = u[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        v[k] = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u[k];
    }
    (u, v)
}

/// Exponentially decaying expansion for `x > 0`, truncated at the
/// smallest term.
pub fn airy_asymptotic_pos(x: f64) -> (f64, f64) {
    let (u, v) = asymptotic_coefficients();
    let zeta = 2.0 / 3.0 * x * x.sqrt();
    let (mut sa, mut sb) = (0.0, 0.0);
    let mut prev = f64::INFINITY;
    let mut zk = 1.0;
    let mut sign = 1.0;
    for k in 0..N_ASYM {
        let ta = u[k] / zk;
        if ta.abs() > prev {
            break;
        }
        prev = ta.abs();
        sa += sign * ta;
        sb += sign * v[k] / zk;
        zk *= zeta;
        sign = -sign;
    }
    let e = (-zeta).exp() / (2.0 * SQRT_PI);
    let q = x.sqrt().sqrt();
    (e / q * sa, -e * q * sb)
}

/// Oscillatory expansion for `x < 0`, truncated at the smallest term.
pub fn airy_asymptotic_neg(x: f64) -> (f64, f64) {
    let (u, v) = asymptotic_coefficients();
    let t = -x;
    let zeta = 2.0 / 3.0 * t * t.sqrt();
    let (mut p, mut q, mut r, mut s) = (0.0, 0.0, 0.0, 0.0);
    let mut prev = f64::INFINITY;
    let mut zk = 1.0;
    for k in 0..N_ASYM {
        let term = u[k] / zk;
        if term > prev {
            break;
        }
        prev = term;
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
            r += sign * v[k] / zk;
        } else {
            q += sign * term;
            s += sign * v[k] / zk;
        }
        zk *= zeta;
    }
    let phase = zeta - std::f64::consts::FRAC_PI_4;
    let (sn, c) = phase.sin_cos();
    let q4 = t.sqrt().sqrt();
    ((c * p + sn * q) / (SQRT_PI * q4), q4 / SQRT_PI * (sn * r - c * s))
}

/// Airy kernel `(Ai(x)Ai'(y) - Ai'(x)Ai(y)) / (x - y)`.
pub fn airy_kernel(x: f64, y: f64) -> Result<f64> {
    let (ax, dx) = airy(x)?;
    if (x - y).abs() < KERNEL_DIAG_EPS {
        // K(x, x + h) = K(x,x) + h K_y(x,x) + O(h^2), with
        // K(x,x) = Ai'^2 - x Ai^2 and K_y(x,x) = -Ai(x)^2 / 2.
        let h = y - x;
        return Ok(dx * dx - x * ax * ax - 0.5 * h * ax * ax);
    }
    let (ay, dy) = airy(y)?;
    Ok((ax * dy - dx * ay) / (x - y))
}

/// Sine kernel `sin(pi (x - y)) / (pi (x - y))`.
pub fn sine_kernel(x: f64, y: f64) -> f64 {
    let d = std::f64::consts::PI * (x - y);
    if d.abs() < 1e-8 {
        return 1.0 - d * d / 6.0;
    }
    d.sin() / d
}

pub fn kernel(kind: KernelKind, x: f64, y: f64) -> Result<f64> {
    match kind {
        KernelKind::Airy => airy_kernel(x, y),
        KernelKind::Sine => Ok(sine_kernel(x, y)),
    }
}

/// `det [K(x_i, x_j)]`, the k-point correlation of the determinantal
/// process with kernel `K`.
pub fn det_correlation(kind: KernelKind, points: &[f64]) -> Result<f64> {
    let n = points.len();
    if n == 0 {
        return Err(invalid("det_correlation needs at least one point"));
    }
    if n > MAX_CORRELATION_ORDER {
        return Err(invalid(format!(
            "det_correlation supports at most {MAX_CORRELATION_ORDER} points, got {n}"
        )));
    }
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let k = kernel(kind, points[i], points[j])?;
            m[i * n + j] = k;
            m[j * n + i] = k;
        }
    }
    Ok(determinant(n, m))
}
