//! Adaptive Dormand–Prince 5(4) integration for autonomous linear systems
//! such as Kolmogorov forward equations.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Largest `|sum(y) - sum(y0)|` seen at an accepted step.
    pub max_mass_drift: f64,
    /// Smallest component seen at an accepted step.
    pub min_component: f64,
}

// Dormand–Prince 5(4) tableau; the system is autonomous so the nodes are unused.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(y)` from `y0` over `[0, t_end]` with mixed
/// absolute/relative local error tolerance `tol`.
pub fn integrate<F>(f: F, y0: &[f64], t_end: f64, tol: f64, initial_step: f64) -> Result<(Vec<f64>, IntegrationStats)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mass0: f64 = y0.iter().sum();
    let mut stats = IntegrationStats {
        min_component: y0.iter().copied().fold(f64::INFINITY, f64::min),
        ..Default::default()
    };
    if t_end <= 0.0 || n == 0 {
        return Ok((y, stats));
    }

    let mut k = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    f(&y, &mut k[0]);

    let mut t = 0.0;
    let mut h = initial_step.min(t_end);
    let max_steps = 10_000_000;
    while t < t_end {
        if stats.accepted + stats.rejected > max_steps {
            return Err(Error::Integration("step budget exhausted".into()));
        }
        if t + h > t_end {
            h = t_end - t;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += h * A[s][j] * kj[i];
                }
                stage[i] = acc;
            }
            f(&stage, &mut k[s]);
        }
        // stage 7 was evaluated at the 5th-order solution (FSAL)
        let mut err = 0.0f64;
        for i in 0..n {
            let mut hi5 = y[i];
            let mut e = 0.0;
            for s in 0..7 {
                hi5 += h * B5[s] * k[s][i];
                e += h * (B5[s] - B4[s]) * k[s][i];
            }
            y_new[i] = hi5;
            let scale = tol + tol * y[i].abs().max(hi5.abs());
            err = err.max(e.abs() / scale);
        }
        if !err.is_finite() {
            return Err(Error::Integration("non-finite error estimate".into()));
        }
        if err <= 1.0 {
            t += h;
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            stats.accepted += 1;
            let mass: f64 = y.iter().sum();
            stats.max_mass_drift = stats.max_mass_drift.max((mass - mass0).abs());
            stats.min_component = stats.min_component.min(y.iter().copied().fold(f64::INFINITY, f64::min));
        } else {
            stats.rejected += 1;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < 1e-300 {
            return Err(Error::Integration("step size underflow".into()));
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let (y, st) = integrate(|y, dy| dy[0] = -2.0 * y[0], &[1.0], 1.5, 1e-12, 0.01).unwrap();
        assert!((y[0] - (-3.0f64).exp()).abs() < 1e-11);
        assert!(st.accepted > 0);
    }

    #[test]
    fn two_state_chain_conserves_mass() {
        // 0 -> 1 at rate 3
        let f = |y: &[f64], dy: &mut [f64]| {
            dy[0] = -3.0 * y[0];
            dy[1] = 3.0 * y[0];
        };
        let (y, st) = integrate(f, &[1.0, 0.0], 0.7, 1e-10, 0.001).unwrap();
        assert!((y[0] - (-2.1f64).exp()).abs() < 1e-9);
        assert!(st.max_mass_drift < 1e-12);
    }

    #[test]
    fn zero_horizon_is_identity() {
        let (y, _) = integrate(|_, dy| dy[0] = 1.0, &[0.25], 0.0, 1e-10, 0.1).unwrap();
        assert_eq!(y, vec![0.25]);
    }
}
