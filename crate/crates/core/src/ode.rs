//! Explicit Runge–Kutta steppers for autonomous systems `y' = f(y)` of fixed
//! dimension.

use crate::error::Result;

// Dormand–Prince 5(4) tableau.
// Stage abscissae are not needed for autonomous systems.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// Result of one Dormand–Prince step.
pub struct EmbeddedStep<const N: usize> {
    /// Fifth-order solution.
    pub y: [f64; N],
    /// Derivative at the new point (first stage of the next step).
    pub dy: [f64; N],
    /// Local error estimate, component-wise.
    pub err: [f64; N],
}

/// One Dormand–Prince 5(4) step from `y` with derivative `dy` already known.
pub fn dopri5_step<const N: usize, F>(
    f: &mut F,
    y: &[f64; N],
    dy: &[f64; N],
    h: f64,
) -> Result<EmbeddedStep<N>>
where
    F: FnMut(&[f64; N]) -> Result<[f64; N]>,
{
    let k1 = dy;
    let k2 = f(&axpy(y, h, &[(A21, k1)]))?;
    let k3 = f(&axpy(y, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = f(&axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = f(&axpy(
        y,
        h,
        &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)],
    ))?;
    let k6 = f(&axpy(
        y,
        h,
        &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
    ))?;
    let y_new = axpy(
        y,
        h,
        &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
    );
    let k7 = f(&y_new)?;
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Ok(EmbeddedStep {
        y: y_new,
        dy: k7,
        err,
    })
}

/// Mixed absolute/relative error norm (sup over components). A value `<= 1`
/// means the step meets the tolerances.
pub fn error_norm<const N: usize>(
    err: &[f64; N],
    y_old: &[f64; N],
    y_new: &[f64; N],
    rel_tol: f64,
    abs_tol: f64,
) -> f64 {
    (0..N)
        .map(|i| {
            let scale = abs_tol + rel_tol * y_old[i].abs().max(y_new[i].abs());
            (err[i] / scale).abs()
        })
        .fold(0.0, f64::max)
}

/// Classical fourth-order Runge–Kutta step.
pub fn rk4_step<const N: usize, F>(f: &mut F, y: &[f64; N], h: f64) -> Result<[f64; N]>
where
    F: FnMut(&[f64; N]) -> Result<[f64; N]>,
{
    let k1 = f(y)?;
    let k2 = f(&axpy(y, 0.5 * h, &[(1.0, &k1)]))?;
    let k3 = f(&axpy(y, 0.5 * h, &[(1.0, &k2)]))?;
    let k4 = f(&axpy(y, h, &[(1.0, &k3)]))?;
    Ok(axpy(
        y,
        h / 6.0,
        &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)],
    ))
}

/// Integrates `y' = f(y)` over `[0, t_end]` with `steps` equal RK4 steps.
pub fn rk4_fixed<const N: usize, F>(
    f: &mut F,
    y0: [f64; N],
    t_end: f64,
    steps: usize,
) -> Result<[f64; N]>
where
    F: FnMut(&[f64; N]) -> Result<[f64; N]>,
{
    let h = t_end / steps as f64;
    let mut y = y0;
    for _ in 0..steps {
        y = rk4_step(f, &y, h)?;
    }
    Ok(y)
}

/// Empirical convergence order of fixed-step RK4 against a reference
/// solution: `log2(e(h) / e(h/2))` for each consecutive halving starting from
/// `coarse_steps`. Errors are measured in the sup-norm.
pub fn measured_orders<const N: usize, F>(
    f: &mut F,
    y0: [f64; N],
    t_end: f64,
    reference: &[f64; N],
    coarse_steps: usize,
    halvings: usize,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64; N]) -> Result<[f64; N]>,
{
    let mut errors = Vec::with_capacity(halvings + 1);
    for k in 0..=halvings {
        let y = rk4_fixed(f, y0, t_end, coarse_steps << k)?;
        let e = y
            .iter()
            .zip(reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        errors.push(e);
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}
