//! Embedded adaptive Runge-Kutta 5(4) (Dormand-Prince) over flat complex
//! state vectors. The right-hand side is fallible so domain guards
//! (separatrix escape, slit crossing) abort the integration cleanly.

use crate::error::{Error, Result};
use crate::C64;

/// Integration statistics accumulated over one solve.
#[derive(Clone, Copy, Debug, Default, serde::Serialize, serde::Deserialize)]
pub struct OdeStats {
    /// Accepted steps.
    pub steps: usize,
    /// Rejected trial steps.
    pub rejected: usize,
    /// Worst accepted per-step error estimate, in the units of the
    /// requested tolerance scale.
    pub max_error: f64,
}

const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// Fifth-order weights (identical to the last A row: FSAL).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

/// Embedded fourth-order weights.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const MAX_STEPS: usize = 1_000_000;

/// Integrates y' = rhs(t, y) from t0 to t1 (either direction) with mixed
/// absolute/relative error control per component.
pub fn integrate<F>(
    mut rhs: F,
    y0: Vec<C64>,
    t0: f64,
    t1: f64,
    rtol: f64,
    atol: f64,
) -> Result<(Vec<C64>, OdeStats)>
where
    F: FnMut(f64, &[C64]) -> Result<Vec<C64>>,
{
    let dim = y0.len();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((y0, OdeStats::default()));
    }
    let mut t = t0;
    let mut y = y0;
    let mut h = 0.01 * span;
    let mut k1 = rhs(t, &y)?;
    let mut stats = OdeStats::default();
    let mut ks: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); dim]; 7];
    let mut ytmp = vec![C64::new(0.0, 0.0); dim];

    loop {
        let remaining = t1 - t;
        if remaining == 0.0 || remaining.abs() <= 1e-14 * span.abs() {
            return Ok((y, stats));
        }
        if stats.steps + stats.rejected > MAX_STEPS {
            return Err(Error::IllConditioned(format!(
                "integrator exceeded {MAX_STEPS} steps at t = {t:.6}"
            )));
        }
        if h.abs() < 1e-14 * span.abs() {
            return Err(Error::StepUnderflow { t });
        }
        if (h > 0.0) == (remaining > 0.0) && h.abs() > remaining.abs() {
            h = remaining;
        }

        ks[0].copy_from_slice(&k1);
        for s in 0..6 {
            for (i, slot) in ytmp.iter_mut().enumerate() {
                let mut acc = y[i];
                for (j, &aij) in A[s].iter().enumerate() {
                    acc += ks[j][i] * (aij * h);
                }
                *slot = acc;
            }
            ks[s + 1] = rhs(t + C[s] * h, &ytmp)?;
        }

        let mut err_acc = 0.0f64;
        let mut ynew = vec![C64::new(0.0, 0.0); dim];
        for i in 0..dim {
            let mut y5 = y[i];
            let mut diff = C64::new(0.0, 0.0);
            for s in 0..7 {
                y5 += ks[s][i] * (B5[s] * h);
                diff += ks[s][i] * ((B5[s] - B4[s]) * h);
            }
            if !y5.re.is_finite() || !y5.im.is_finite() {
                return Err(Error::NonFiniteCoefficient { t });
            }
            let sc = atol + rtol * y[i].norm().max(y5.norm());
            let e = diff.norm() / sc;
            err_acc += e * e;
            ynew[i] = y5;
        }
        let err = (err_acc / dim as f64).sqrt();

        if err <= 1.0 {
            stats.steps += 1;
            stats.max_error = stats.max_error.max(err);
            t += h;
            y = ynew;
            // FSAL: stage 7 was evaluated at (t + h, y5).
            k1 = ks[6].clone();
            let factor = (0.9 * err.max(1e-30).powf(-0.2)).clamp(0.2, 5.0);
            h *= factor;
        } else {
            stats.rejected += 1;
            let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h *= factor;
        }
    }
}
