//! Small explicit ODE integrators for the label oracles.

use crate::error::{Error, Result};

/// One accepted step `(t0, y0, y0') → (t1, y1, y1')`.
#[derive(Debug, Clone, Copy)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    pub dy0: [f64; N],
    pub dy1: [f64; N],
}

impl<const N: usize> Step<N> {
    /// Cubic Hermite interpolant of component `c` at `θ ∈ [0, 1]`.
    pub fn hermite(&self, c: usize, theta: f64) -> f64 {
        let h = self.t1 - self.t0;
        let (t2, t3) = (theta * theta, theta * theta * theta);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.y0[c]
            + (t3 - 2.0 * t2 + theta) * h * self.dy0[c]
            + (-2.0 * t3 + 3.0 * t2) * self.y1[c]
            + (t3 - t2) * h * self.dy1[c]
    }

    /// Time derivative of [`Step::hermite`].
    pub fn hermite_slope(&self, c: usize, theta: f64) -> f64 {
        let h = self.t1 - self.t0;
        let t2 = theta * theta;
        ((6.0 * t2 - 6.0 * theta) * self.y0[c] + (-6.0 * t2 + 6.0 * theta) * self.y1[c]) / h
            + (3.0 * t2 - 4.0 * theta + 1.0) * self.dy0[c]
            + (3.0 * t2 - 2.0 * theta) * self.dy1[c]
    }
}

const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn combine<const N: usize>(y: &[f64; N], h: f64, coef: &[f64], k: &[[f64; N]]) -> [f64; N] {
    let mut out = *y;
    for (c, ki) in coef.iter().zip(k) {
        for (o, v) in out.iter_mut().zip(ki) {
            *o += h * c * v;
        }
    }
    out
}

/// Adaptive Dormand–Prince 5(4) from `t0` to `t1`, calling `on_step` for
/// every accepted step.
pub fn dopri45<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    t1: f64,
    rtol: f64,
    atol: f64,
    mut on_step: impl FnMut(&Step<N>),
) -> Result<[f64; N]> {
    let mut t = t0;
    let mut y = y0;
    let mut k0 = f(t, &y);
    let span = t1 - t0;
    let mut h = (span * 1e-3).max(1e-6).min(span);
    while t < t1 {
        if t + h > t1 {
            h = t1 - t;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::SolverDiverged(t));
        }
        let mut k = [[0.0; N]; 7];
        k[0] = k0;
        k[1] = f(t + C[0] * h, &combine(&y, h, &A2, &k[..1]));
        k[2] = f(t + C[1] * h, &combine(&y, h, &A3, &k[..2]));
        k[3] = f(t + C[2] * h, &combine(&y, h, &A4, &k[..3]));
        k[4] = f(t + C[3] * h, &combine(&y, h, &A5, &k[..4]));
        k[5] = f(t + C[4] * h, &combine(&y, h, &A6, &k[..5]));
        let y_new = combine(&y, h, &B, &k[..6]);
        k[6] = f(t + h, &y_new);
        if y_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverDiverged(t));
        }

        let mut err = 0.0;
        for c in 0..N {
            let e: f64 = h * E.iter().zip(&k).map(|(w, ki)| w * ki[c]).sum::<f64>();
            let sc = atol + rtol * y[c].abs().max(y_new[c].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / N as f64).sqrt();
        if err <= 1.0 {
            let step = Step {
                t0: t,
                t1: t + h,
                y0: y,
                y1: y_new,
                dy0: k0,
                dy1: k[6],
            };
            on_step(&step);
            t = if t + h >= t1 { t1 } else { t + h };
            y = y_new;
            k0 = k[6];
        }
        let factor = if err == 0.0 { 10.0 } else { 0.9 * err.powf(-0.2) };
        h *= factor.clamp(0.2, 10.0);
    }
    Ok(y)
}

/// Classical fourth-order Runge–Kutta with `steps` equal steps.
pub fn rk4<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    t1: f64,
    steps: usize,
) -> Result<[f64; N]> {
    let h = (t1 - t0) / steps as f64;
    let mut y = y0;
    for s in 0..steps {
        let t = t0 + h * s as f64;
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &combine(&y, 0.5 * h, &[1.0], &[k1]));
        let k3 = f(t + 0.5 * h, &combine(&y, 0.5 * h, &[1.0], &[k2]));
        let k4 = f(t + h, &combine(&y, h, &[1.0], &[k3]));
        y = combine(&y, h / 6.0, &[1.0, 2.0, 2.0, 1.0], &[k1, k2, k3, k4]);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverDiverged(t + h));
        }
    }
    Ok(y)
}
