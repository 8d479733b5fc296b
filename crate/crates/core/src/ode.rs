//! Dormand-Prince 5(4) with the standard fourth-order continuous extension.
//!
//! Specialized to matrix-valued states: the right-hand side maps
//! `(t, &Matrix<N>) -> Matrix<N>`.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::Matrix;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// dense output
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum OdeError {
    #[error("step size {h:e} fell below the minimum at t = {t}")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("exceeded {steps} steps before reaching the end point")]
    TooManySteps { steps: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1` and returns `y` sampled at
/// every point of `grid` (which must be sorted and lie in `[t0, t1]`).
pub fn integrate_dense<const N: usize, F>(
    mut f: F,
    y0: Matrix<N>,
    t0: f64,
    t1: f64,
    grid: &[f64],
    ctl: &StepControl,
) -> Result<(Vec<Matrix<N>>, OdeStats), OdeError>
where
    F: FnMut(f64, &Matrix<N>) -> Matrix<N>,
{
    let mut out = Vec::with_capacity(grid.len());
    let mut next_sample = 0;
    let mut stats = OdeStats::default();

    while next_sample < grid.len() && grid[next_sample] <= t0 {
        out.push(y0);
        next_sample += 1;
    }
    if t1 <= t0 {
        while out.len() < grid.len() {
            out.push(y0);
        }
        return Ok((out, stats));
    }

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    stats.rhs_evals += 1;
    let mut h = initial_step(&mut f, t, &y, &k1, t1 - t0, ctl, &mut stats);
    let mut last_rejected = false;

    loop {
        if stats.accepted + stats.rejected >= ctl.max_steps {
            return Err(OdeError::TooManySteps { steps: ctl.max_steps });
        }
        if h < ctl.min_step {
            return Err(OdeError::StepSizeUnderflow { t, h });
        }
        let last = t + h >= t1 - 1e-14 * t1.abs().max(1.0);
        if last {
            h = t1 - t;
        }

        let k2 = f(t + C2 * h, &(y + k1.scale_real(h * A21)));
        let k3 = f(t + C3 * h, &(y + lin2(&k1, A31, &k2, A32, h)));
        let k4 = f(
            t + C4 * h,
            &(y + lin2(&k1, A41, &k2, A42, h) + k3.scale_real(h * A43)),
        );
        let k5 = f(
            t + C5 * h,
            &(y + lin2(&k1, A51, &k2, A52, h) + lin2(&k3, A53, &k4, A54, h)),
        );
        let k6 = f(
            t + h,
            &(y + lin2(&k1, A61, &k2, A62, h)
                + lin2(&k3, A63, &k4, A64, h)
                + k5.scale_real(h * A65)),
        );
        let y_new = y
            + lin2(&k1, A71, &k3, A73, h)
            + lin2(&k4, A74, &k5, A75, h)
            + k6.scale_real(h * A76);
        let k7 = f(t + h, &y_new);
        stats.rhs_evals += 6;

        let err_vec = lin2(&k1, E1, &k3, E3, h)
            + lin2(&k4, E4, &k5, E5, h)
            + lin2(&k6, E6, &k7, E7, h);
        let err = error_norm(&err_vec, &y, &y_new, ctl);
        if !err.is_finite() {
            return Err(OdeError::NonFinite { t });
        }

        if err <= 1.0 {
            stats.accepted += 1;
            let t_new = if last { t1 } else { t + h };
            if next_sample < grid.len() && grid[next_sample] <= t_new {
                let ydiff = y_new - y;
                let bspl = k1.scale_real(h) - ydiff;
                let r4 = ydiff - k7.scale_real(h) - bspl;
                let r5 = lin2(&k1, D1, &k3, D3, h)
                    + lin2(&k4, D4, &k5, D5, h)
                    + lin2(&k6, D6, &k7, D7, h);
                while next_sample < grid.len() && grid[next_sample] <= t_new {
                    let theta = ((grid[next_sample] - t) / h).clamp(0.0, 1.0);
                    let theta1 = 1.0 - theta;
                    let inner = r4 + r5.scale_real(theta1);
                    let inner = bspl + inner.scale_real(theta);
                    let inner = ydiff + inner.scale_real(theta1);
                    out.push(y + inner.scale_real(theta));
                    next_sample += 1;
                }
            }
            t = t_new;
            y = y_new;
            k1 = k7;
            if last {
                break;
            }
            let mut fac = SAFETY * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = (h * fac).min(ctl.max_step);
            last_rejected = false;
        } else {
            stats.rejected += 1;
            let fac = (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0);
            h *= fac;
            last_rejected = true;
        }
    }

    while out.len() < grid.len() {
        out.push(y);
    }
    Ok((out, stats))
}

#[inline]
fn lin2<const N: usize>(a: &Matrix<N>, ca: f64, b: &Matrix<N>, cb: f64, h: f64) -> Matrix<N> {
    let mut m = Matrix::<N>::zeros();
    let (ca, cb) = (ca * h, cb * h);
    for i in 0..N {
        for j in 0..N {
            m.0[i][j] = a.0[i][j] * ca + b.0[i][j] * cb;
        }
    }
    m
}

fn error_norm<const N: usize>(
    err: &Matrix<N>,
    y: &Matrix<N>,
    y_new: &Matrix<N>,
    ctl: &StepControl,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        for j in 0..N {
            let scale_re = ctl.atol + ctl.rtol * y.0[i][j].re.abs().max(y_new.0[i][j].re.abs());
            let scale_im = ctl.atol + ctl.rtol * y.0[i][j].im.abs().max(y_new.0[i][j].im.abs());
            let er = err.0[i][j].re / scale_re;
            let ei = err.0[i][j].im / scale_im;
            acc += er * er + ei * ei;
        }
    }
    (acc / (2 * N * N) as f64).sqrt()
}

/// Starting step heuristic (Hairer, Norsett & Wanner, II.4).
fn initial_step<const N: usize, F>(
    f: &mut F,
    t: f64,
    y: &Matrix<N>,
    f0: &Matrix<N>,
    span: f64,
    ctl: &StepControl,
    stats: &mut OdeStats,
) -> f64
where
    F: FnMut(f64, &Matrix<N>) -> Matrix<N>,
{
    let scaled = |m: &Matrix<N>| {
        let mut acc = 0.0;
        for i in 0..N {
            for j in 0..N {
                let sk_re = ctl.atol + ctl.rtol * y.0[i][j].re.abs();
                let sk_im = ctl.atol + ctl.rtol * y.0[i][j].im.abs();
                acc += (m.0[i][j].re / sk_re).powi(2) + (m.0[i][j].im / sk_im).powi(2);
            }
        }
        (acc / (2 * N * N) as f64).sqrt()
    };
    let d0 = scaled(y);
    let d1 = scaled(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(ctl.max_step).min(span);
    let y1 = *y + f0.scale_real(h0);
    let f1 = f(t + h0, &y1);
    stats.rhs_evals += 1;
    let d2 = scaled(&(f1 - *f0)) / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dmax).powf(0.2)
    };
    (100.0 * h0).min(h1).min(ctl.max_step).min(span).max(ctl.min_step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Mat2, C64};

    fn ctl() -> StepControl {
        StepControl { rtol: 1e-10, atol: 1e-12, min_step: 1e-12, max_step: 0.1, max_steps: 1_000_000 }
    }

    #[test]
    fn exponential_decay_on_grid() {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let y0 = Mat2::identity();
        let (ys, stats) =
            integrate_dense(|_, y: &Mat2| y.scale_real(-1.5), y0, 0.0, 2.0, &grid, &ctl()).unwrap();
        assert_eq!(ys.len(), grid.len());
        for (t, y) in grid.iter().zip(&ys) {
            let exact = (-1.5 * t).exp();
            assert!((y.0[0][0].re - exact).abs() < 1e-9, "t={t}");
        }
        assert!(stats.accepted > 0);
    }

    #[test]
    fn harmonic_rotation_dense_output() {
        // y' = -i w y
        let w = 40.0;
        let grid: Vec<f64> = (0..=137).map(|i| i as f64 / 137.0).collect();
        let (ys, _) = integrate_dense(
            |_, y: &Mat2| y.scale(C64::new(0.0, -w)),
            Mat2::identity(),
            0.0,
            1.0,
            &grid,
            &ctl(),
        )
        .unwrap();
        for (t, y) in grid.iter().zip(&ys) {
            let exact = C64::new(0.0, -w * t).exp();
            assert!((y.0[1][1] - exact).norm() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn underflow_reported() {
        let mut c = ctl();
        c.min_step = 1e-3;
        c.rtol = 1e-14;
        c.atol = 1e-16;
        let r = integrate_dense(
            |t, y: &Mat2| y.scale_real(1.0 / (1.0 - t).max(1e-12)),
            Mat2::identity(),
            0.0,
            1.0,
            &[1.0],
            &c,
        );
        assert!(matches!(r, Err(OdeError::StepSizeUnderflow { .. })));
    }
}
