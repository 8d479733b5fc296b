//! Optical pulse envelopes and their synthesis.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

mod crab;
mod satd;

pub use crab::{crab_pulse, CrabChannel, CrabParams, CRAB_FREQUENCY_SPREAD, DEFAULT_HARMONICS};
pub use satd::{
    counter_diabatic, counter_diabatic_jet, effective_two_level, invert_effective, satd_modify,
    satd_from_pulses, satd_pipeline, BaseStirapShape, CounterDiabatic, EffectivePoint, EffectiveTwoLevel, SatdShape,
};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum PulseError {
    #[error("dipole detuning must be non-zero")]
    ZeroDetuning,
    #[error("negative radicand {value:e} while inverting the effective two-level parameters")]
    NegativeRadicand { value: f64 },
    #[error("both envelopes vanish at t = {t} us")]
    DegenerateEnvelope { t: f64 },
    #[error("envelope peak {peak} rad/us at t = {time} us exceeds the cap {cap} rad/us")]
    CapExceeded { peak: f64, time: f64, cap: f64 },
    #[error("invalid pulse table: {0}")]
    InvalidTable(&'static str),
}

/// Value and first two time derivatives of an envelope.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub const fn constant(value: f64) -> Self {
        Jet { value, d1: 0.0, d2: 0.0 }
    }

    pub fn scaled(self, k: f64) -> Self {
        Jet { value: k * self.value, d1: k * self.d1, d2: k * self.d2 }
    }
}

/// Five-point central differences.
pub fn stencil_jet(f: impl Fn(f64) -> f64, t: f64, h: f64) -> Jet {
    let (fm2, fm1, f0, fp1, fp2) = (f(t - 2.0 * h), f(t - h), f(t), f(t + h), f(t + 2.0 * h));
    Jet {
        value: f0,
        d1: (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h),
        d2: (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h),
    }
}

/// Real Rabi-frequency envelope `t -> rad/µs`.
#[derive(Clone)]
pub enum Envelope {
    Zero,
    Constant(f64),
    Gaussian { amplitude: f64, center: f64, width: f64 },
    Table(Arc<TabulatedEnvelope>),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    Satd(Arc<SatdShape>, Channel),
    Crab(Arc<CrabChannel>),
    Scaled(f64, Arc<Envelope>),
}

/// Which optical field an envelope drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Stokes,
    Pump,
}

impl fmt::Debug for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Envelope::Zero => write!(f, "Zero"),
            Envelope::Constant(v) => write!(f, "Constant({v})"),
            Envelope::Gaussian { amplitude, center, width } => {
                write!(f, "Gaussian {{ amplitude: {amplitude}, center: {center}, width: {width} }}")
            }
            Envelope::Table(t) => write!(f, "Table({} samples)", t.values.len()),
            Envelope::Function(_) => write!(f, "Function"),
            Envelope::Satd(_, c) => write!(f, "Satd({c:?})"),
            Envelope::Crab(c) => write!(f, "Crab({} harmonics)", c.freqs.len()),
            Envelope::Scaled(k, e) => write!(f, "Scaled({k}, {e:?})"),
        }
    }
}

impl Envelope {
    pub fn function(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Envelope::Function(Arc::new(f))
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Envelope::Zero => 0.0,
            Envelope::Constant(v) => *v,
            Envelope::Gaussian { amplitude, center, width } => {
                let x = (t - center) / width;
                amplitude * (-0.5 * x * x).exp()
            }
            Envelope::Table(table) => table.value(t),
            Envelope::Function(f) => f(t),
            Envelope::Satd(shape, channel) => {
                let (s, p) = shape.amplitudes(t);
                match channel {
                    Channel::Stokes => s,
                    Channel::Pump => p,
                }
            }
            Envelope::Crab(c) => c.value(t),
            Envelope::Scaled(k, e) => k * e.value(t),
        }
    }

    /// Value and derivatives; analytic where a closed form exists, otherwise
    /// a five-point stencil with step `h`.
    pub fn jet(&self, t: f64, h: f64) -> Jet {
        match self {
            Envelope::Zero => Jet::constant(0.0),
            Envelope::Constant(v) => Jet::constant(*v),
            Envelope::Gaussian { amplitude, center, width } => {
                let u = t - center;
                let w2 = width * width;
                let g = amplitude * (-0.5 * u * u / w2).exp();
                Jet { value: g, d1: -u / w2 * g, d2: (u * u / (w2 * w2) - 1.0 / w2) * g }
            }
            Envelope::Crab(c) => c.jet(t, h),
            Envelope::Scaled(k, e) => e.jet(t, h).scaled(*k),
            _ => stencil_jet(|x| self.value(x), t, h),
        }
    }

    pub fn scaled(self, k: f64) -> Self {
        match self {
            Envelope::Zero => Envelope::Zero,
            Envelope::Constant(v) => Envelope::Constant(k * v),
            Envelope::Gaussian { amplitude, center, width } => {
                Envelope::Gaussian { amplitude: k * amplitude, center, width }
            }
            Envelope::Scaled(k0, e) => Envelope::Scaled(k * k0, e),
            other => Envelope::Scaled(k, Arc::new(other)),
        }
    }
}

/// Uniformly sampled envelope on `[0, duration]` with cubic (Catmull-Rom)
/// interpolation between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedEnvelope {
    pub duration: f64,
    pub values: Vec<f64>,
}

impl TabulatedEnvelope {
    pub fn new(duration: f64, values: Vec<f64>) -> Result<Self, PulseError> {
        if values.len() < 2 {
            return Err(PulseError::InvalidTable("need at least two samples"));
        }
        if !(duration > 0.0) || values.iter().any(|v| !v.is_finite()) {
            return Err(PulseError::InvalidTable("non-finite or non-positive entries"));
        }
        Ok(TabulatedEnvelope { duration, values })
    }

    pub fn step(&self) -> f64 {
        self.duration / (self.values.len() - 1) as f64
    }

    pub fn value(&self, t: f64) -> f64 {
        let n = self.values.len();
        let x = (t / self.step()).clamp(0.0, (n - 1) as f64);
        let i = (x.floor() as usize).min(n - 2);
        let u = x - i as f64;
        let y = |k: isize| {
            let idx = (i as isize + k).clamp(0, n as isize - 1) as usize;
            self.values[idx]
        };
        let (y0, y1) = (y(0), y(1));
        // one-sided tangents at the table ends
        let m0 = if i == 0 { y1 - y0 } else { 0.5 * (y1 - y(-1)) };
        let m1 = if i + 2 >= n { y1 - y0 } else { 0.5 * (y(2) - y0) };
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * m1
    }
}

/// Stokes and pump envelopes over a fixed transfer window.
#[derive(Debug, Clone)]
pub struct PulsePair {
    pub duration: f64,
    pub cap: f64,
    pub stokes: Envelope,
    pub pump: Envelope,
}

impl PulsePair {
    pub fn new(duration: f64, cap: f64, stokes: Envelope, pump: Envelope) -> Self {
        PulsePair { duration, cap, stokes, pump }
    }

    pub fn zero(duration: f64, cap: f64) -> Self {
        Self::new(duration, cap, Envelope::Zero, Envelope::Zero)
    }

    pub fn constant(duration: f64, stokes: f64, pump: f64, cap: f64) -> Self {
        Self::new(duration, cap, Envelope::Constant(stokes), Envelope::Constant(pump))
    }

    /// Builds a pulse pair from uniformly spaced samples. Interpolated values
    /// are clamped to the cap.
    pub fn tabulated(
        duration: f64,
        cap: f64,
        stokes: Vec<f64>,
        pump: Vec<f64>,
    ) -> Result<Self, PulseError> {
        if stokes.len() != pump.len() {
            return Err(PulseError::InvalidTable("channel lengths differ"));
        }
        for (i, v) in stokes.iter().chain(pump.iter()).enumerate() {
            if v.abs() > cap {
                let time = duration * (i % stokes.len()) as f64 / (stokes.len() - 1).max(1) as f64;
                return Err(PulseError::CapExceeded { peak: v.abs(), time, cap });
            }
        }
        let wrap = |values| -> Result<Envelope, PulseError> {
            let table = Arc::new(TabulatedEnvelope::new(duration, values)?);
            Ok(Envelope::function(move |t| table.value(t).clamp(-cap, cap)))
        };
        Ok(Self::new(duration, cap, wrap(stokes)?, wrap(pump)?))
    }

    /// `(Omega_s(t), Omega_p(t))`
    #[inline]
    pub fn amplitudes(&self, t: f64) -> (f64, f64) {
        match (&self.stokes, &self.pump) {
            (Envelope::Satd(shape, Channel::Stokes), Envelope::Satd(other, Channel::Pump))
                if Arc::ptr_eq(shape, other) =>
            {
                shape.amplitudes(t)
            }
            _ => (self.stokes.value(t), self.pump.value(t)),
        }
    }

    /// Differentiation step for envelopes without a closed-form derivative.
    pub fn stencil_step(&self) -> f64 {
        self.duration * 1e-5
    }

    pub fn jets(&self, t: f64) -> (Jet, Jet) {
        let h = self.stencil_step();
        (self.stokes.jet(t, h), self.pump.jet(t, h))
    }

    /// Same lineshapes with amplitudes and cap multiplied by `k > 0`.
    pub fn scaled(&self, k: f64) -> Self {
        PulsePair {
            duration: self.duration,
            cap: k * self.cap,
            stokes: self.stokes.clone().scaled(k),
            pump: self.pump.clone().scaled(k),
        }
    }

    /// Mirror image in time, `t -> T - t`.
    pub fn time_reversed(&self) -> Self {
        let t_end = self.duration;
        let s = self.stokes.clone();
        let p = self.pump.clone();
        PulsePair {
            duration: self.duration,
            cap: self.cap,
            stokes: Envelope::function(move |t| s.value(t_end - t)),
            pump: Envelope::function(move |t| p.value(t_end - t)),
        }
    }

    /// Samples both channels on `n` uniform points over `[0, T]`.
    pub fn sample(&self, n: usize) -> PulseSamples {
        let n = n.max(2);
        let mut out = PulseSamples {
            times: Vec::with_capacity(n),
            stokes: Vec::with_capacity(n),
            pump: Vec::with_capacity(n),
        };
        for i in 0..n {
            let t = self.duration * i as f64 / (n - 1) as f64;
            let (s, p) = self.amplitudes(t);
            out.times.push(t);
            out.stokes.push(s);
            out.pump.push(p);
        }
        out
    }

    /// Largest envelope magnitude over `n` samples, with its time.
    pub fn peak(&self, n: usize) -> (f64, f64) {
        let s = self.sample(n);
        s.times
            .iter()
            .zip(s.stokes.iter().zip(s.pump.iter()))
            .map(|(&t, (a, b))| (a.abs().max(b.abs()), t))
            .fold((0.0, 0.0), |acc, x| if x.0 > acc.0 { x } else { acc })
    }

    pub fn check_cap(&self, n: usize) -> Result<(), PulseError> {
        let (peak, time) = self.peak(n);
        if peak > self.cap {
            Err(PulseError::CapExceeded { peak, time, cap: self.cap })
        } else {
            Ok(())
        }
    }

    /// `integral of Omega dt` per channel by the trapezoid rule.
    pub fn areas(&self, n: usize) -> (f64, f64) {
        let s = self.sample(n);
        let dt = self.duration / (s.times.len() - 1) as f64;
        let trap = |v: &[f64]| dt * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]));
        (trap(&s.stokes), trap(&s.pump))
    }

    /// Time of the maximum of `|Omega|` per channel.
    pub fn peak_times(&self, n: usize) -> (f64, f64) {
        let s = self.sample(n);
        let argmax = |v: &[f64]| {
            v.iter()
                .enumerate()
                .fold((0usize, f64::NEG_INFINITY), |acc, (i, x)| {
                    if x.abs() > acc.1 { (i, x.abs()) } else { acc }
                })
                .0
        };
        (s.times[argmax(&s.stokes)], s.times[argmax(&s.pump)])
    }
}

/// Uniform samples of a pulse pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSamples {
    pub times: Vec<f64>,
    pub stokes: Vec<f64>,
    pub pump: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mhz;

    #[test]
    fn gaussian_jet_matches_stencil() {
        let g = Envelope::Gaussian { amplitude: mhz(100.0), center: 0.3, width: 0.12 };
        for &t in &[0.05, 0.2, 0.3, 0.47] {
            let exact = g.jet(t, 1e-5);
            let num = stencil_jet(|x| g.value(x), t, 1e-4);
            assert!((exact.d1 - num.d1).abs() < 1e-6 * exact.d1.abs().max(1.0));
            assert!((exact.d2 - num.d2).abs() < 1e-4 * exact.d2.abs().max(1.0));
        }
    }

    #[test]
    fn table_interpolates_exactly_at_nodes_and_clamps_ends() {
        let vals: Vec<f64> = (0..11).map(|i| (i as f64 * 0.3).sin()).collect();
        let table = TabulatedEnvelope::new(1.0, vals.clone()).unwrap();
        for (i, v) in vals.iter().enumerate() {
            assert!((table.value(i as f64 / 10.0) - v).abs() < 1e-15);
        }
        assert_eq!(table.value(-1.0), vals[0]);
        assert_eq!(table.value(2.0), vals[10]);
        // cubic reproduces a straight line
        let line = TabulatedEnvelope::new(1.0, (0..5).map(|i| 2.0 * i as f64).collect()).unwrap();
        assert!((line.value(0.375) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn tabulated_pair_rejects_cap_violation() {
        let r = PulsePair::tabulated(1.0, 1.0, alloc::vec![0.0, 2.0], alloc::vec![0.0, 0.0]);
        assert!(matches!(r, Err(PulseError::CapExceeded { .. })));
        assert!(PulsePair::tabulated(1.0, 1.0, alloc::vec![0.0], alloc::vec![0.0]).is_err());
    }

    #[test]
    fn scaling_preserves_shape() {
        let p = PulsePair::new(
            1.0,
            10.0,
            Envelope::function(|t| 3.0 * t),
            Envelope::Gaussian { amplitude: 2.0, center: 0.5, width: 0.2 },
        );
        let q = p.scaled(2.0);
        assert_eq!(q.cap, 20.0);
        let (a, b) = p.amplitudes(0.4);
        let (c, d) = q.amplitudes(0.4);
        assert!((c - 2.0 * a).abs() < 1e-15 && (d - 2.0 * b).abs() < 1e-15);
    }
}
