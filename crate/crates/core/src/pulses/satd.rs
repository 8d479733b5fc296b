//! Far-detuned superadiabatic pulse synthesis.

use alloc::sync::Arc;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{Channel, Envelope, Jet, PulseError, PulsePair};

/// Pointwise parameters of the adiabatically eliminated two-level problem.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EffectivePoint {
    pub omega_eff: f64,
    pub delta_eff: f64,
}

/// Effective two-level coupling and detuning of a pulse pair at a fixed
/// one-photon detuning.
#[derive(Debug, Clone)]
pub struct EffectiveTwoLevel {
    pub pulses: PulsePair,
    pub detuning: f64,
}

impl EffectiveTwoLevel {
    pub fn new(pulses: PulsePair, detuning: f64) -> Result<Self, PulseError> {
        if detuning == 0.0 {
            return Err(PulseError::ZeroDetuning);
        }
        Ok(EffectiveTwoLevel { pulses, detuning })
    }

    pub fn at(&self, t: f64) -> EffectivePoint {
        let (s, p) = self.pulses.amplitudes(t);
        effective_point(s, p, self.detuning)
    }
}

#[inline]
fn effective_point(s: f64, p: f64, detuning: f64) -> EffectivePoint {
    EffectivePoint {
        omega_eff: s * p / (2.0 * detuning),
        delta_eff: (p * p - s * s) / (4.0 * detuning),
    }
}

/// `Omega_eff = Omega_s Omega_p / 2Delta`, `Delta_eff = (Omega_p^2 - Omega_s^2) / 4Delta`.
pub fn effective_two_level(
    stokes: f64,
    pump: f64,
    detuning: f64,
) -> Result<EffectivePoint, PulseError> {
    if detuning == 0.0 {
        return Err(PulseError::ZeroDetuning);
    }
    Ok(effective_point(stokes, pump, detuning))
}

/// Inverse of [`effective_two_level`]: returns `(Omega_s, Omega_p)`. The sign
/// of `Omega_eff / Delta` is carried by the Stokes amplitude.
pub fn invert_effective(eff: EffectivePoint, detuning: f64) -> Result<(f64, f64), PulseError> {
    if detuning == 0.0 {
        return Err(PulseError::ZeroDetuning);
    }
    let r = eff.omega_eff.hypot(eff.delta_eff);
    // avoid cancellation in r - |Delta_eff|
    let (sum, diff) = if eff.delta_eff >= 0.0 {
        let sum = r + eff.delta_eff;
        let diff = if sum > 0.0 { eff.omega_eff * eff.omega_eff / sum } else { 0.0 };
        (sum, diff)
    } else {
        let diff = r - eff.delta_eff;
        (eff.omega_eff * eff.omega_eff / diff, diff)
    };
    let plus = 2.0 * detuning * sum;
    let minus = 2.0 * detuning * diff;
    let slack = 1e-12 * (2.0 * detuning * r).abs();
    let root = |x: f64| {
        if x >= 0.0 {
            Ok(x.sqrt())
        } else if x >= -slack {
            Ok(0.0)
        } else {
            Err(PulseError::NegativeRadicand { value: x })
        }
    };
    let pump = root(plus)?;
    let stokes = root(minus)?;
    let sign = if eff.omega_eff * detuning < 0.0 { -1.0 } else { 1.0 };
    Ok((sign * stokes, pump))
}

/// Counter-diabatic coupling and its time derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterDiabatic {
    pub value: f64,
    pub d1: f64,
}

/// `Omega_a = 2 (dOmega_p Omega_s - Omega_p dOmega_s) / (Omega_p^2 + Omega_s^2)`.
pub fn counter_diabatic(stokes: Jet, pump: Jet, t: f64) -> Result<f64, PulseError> {
    counter_diabatic_jet(stokes, pump, t).map(|c| c.value)
}

pub fn counter_diabatic_jet(stokes: Jet, pump: Jet, t: f64) -> Result<CounterDiabatic, PulseError> {
    let (s, p) = (stokes, pump);
    let den = p.value * p.value + s.value * s.value;
    if !(den > 0.0) {
        return Err(PulseError::DegenerateEnvelope { t });
    }
    let num = p.d1 * s.value - p.value * s.d1;
    let num_d = p.d2 * s.value - p.value * s.d2;
    let den_d = 2.0 * (p.value * p.d1 + s.value * s.d1);
    Ok(CounterDiabatic {
        value: 2.0 * num / den,
        d1: 2.0 * (num_d * den - num * den_d) / (den * den),
    })
}

/// `Omega~ = sqrt(Omega_eff^2 + Omega_a^2)` and
/// `Delta~ = Delta_eff + d/dt atan(Omega_a / Omega_eff)`.
pub fn satd_modify(
    eff: EffectivePoint,
    omega_eff_dot: f64,
    omega_a: CounterDiabatic,
) -> EffectivePoint {
    let norm2 = eff.omega_eff * eff.omega_eff + omega_a.value * omega_a.value;
    let chi_dot = if norm2 > 0.0 {
        (omega_a.d1 * eff.omega_eff - omega_a.value * omega_eff_dot) / norm2
    } else {
        0.0
    };
    EffectivePoint {
        omega_eff: eff.omega_eff.hypot(omega_a.value),
        delta_eff: eff.delta_eff + chi_dot,
    }
}

/// Gaussian Stokes-first pair used as the reference protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseStirapShape {
    /// Peak Rabi frequency of each Gaussian, rad/µs.
    pub amplitude: f64,
    /// Gaussian width as a fraction of the duration.
    pub width_fraction: f64,
    /// Half the Stokes-pump separation as a fraction of the duration.
    pub delay_fraction: f64,
}

impl Default for BaseStirapShape {
    fn default() -> Self {
        BaseStirapShape {
            amplitude: 2.0 * core::f64::consts::PI * 50.0,
            width_fraction: 1.0 / 6.0,
            delay_fraction: 1.0 / 10.0,
        }
    }
}

impl BaseStirapShape {
    pub fn pulses(&self, duration: f64, cap: f64) -> PulsePair {
        let center = 0.5 * duration;
        let tau = self.delay_fraction * duration;
        let width = self.width_fraction * duration;
        PulsePair::new(
            duration,
            cap,
            Envelope::Gaussian { amplitude: self.amplitude, center: center - tau, width },
            Envelope::Gaussian { amplitude: self.amplitude, center: center + tau, width },
        )
    }
}

/// Superadiabatic modification of a base pulse pair, evaluated on demand.
#[derive(Debug, Clone)]
pub struct SatdShape {
    pub base: PulsePair,
    pub detuning: f64,
}

impl SatdShape {
    pub fn try_amplitudes(&self, t: f64) -> Result<(f64, f64), PulseError> {
        let (s, p) = self.base.jets(t);
        let omega_a = counter_diabatic_jet(s, p, t)?;
        let eff = effective_two_level(s.value, p.value, self.detuning)?;
        let omega_eff_dot = (s.d1 * p.value + s.value * p.d1) / (2.0 * self.detuning);
        invert_effective(satd_modify(eff, omega_eff_dot, omega_a), self.detuning)
    }

    pub fn modified_effective(&self, t: f64) -> Result<EffectivePoint, PulseError> {
        let (s, p) = self.base.jets(t);
        let omega_a = counter_diabatic_jet(s, p, t)?;
        let eff = effective_two_level(s.value, p.value, self.detuning)?;
        let omega_eff_dot = (s.d1 * p.value + s.value * p.d1) / (2.0 * self.detuning);
        Ok(satd_modify(eff, omega_eff_dot, omega_a))
    }

    /// Evaluates the modified pair; the pipeline validates the window up
    /// front, so a failure here yields zero drive.
    #[inline]
    pub fn amplitudes(&self, t: f64) -> (f64, f64) {
        self.try_amplitudes(t).unwrap_or((0.0, 0.0))
    }
}

/// Number of points used to validate a synthesized pulse against the cap.
const VALIDATION_SAMPLES: usize = 4001;

/// Base pair -> effective two-level -> counter-diabatic term -> modified
/// effective parameters -> modified optical pair.
pub fn satd_pipeline(
    base: &BaseStirapShape,
    duration: f64,
    detuning: f64,
    cap: f64,
) -> Result<PulsePair, PulseError> {
    satd_from_pulses(base.pulses(duration, cap), detuning)
}

pub fn satd_from_pulses(base: PulsePair, detuning: f64) -> Result<PulsePair, PulseError> {
    if detuning == 0.0 {
        return Err(PulseError::ZeroDetuning);
    }
    let (duration, cap) = (base.duration, base.cap);
    let shape = Arc::new(SatdShape { base, detuning });
    let mut peak = (0.0f64, 0.0f64);
    for i in 0..VALIDATION_SAMPLES {
        let t = duration * i as f64 / (VALIDATION_SAMPLES - 1) as f64;
        let (s, p) = shape.try_amplitudes(t)?;
        let m = s.abs().max(p.abs());
        if m > peak.0 {
            peak = (m, t);
        }
    }
    if peak.0 > cap {
        return Err(PulseError::CapExceeded { peak: peak.0, time: peak.1, cap });
    }
    Ok(PulsePair::new(
        duration,
        cap,
        Envelope::Satd(shape.clone(), Channel::Stokes),
        Envelope::Satd(shape, Channel::Pump),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mhz;
    use crate::pulses::stencil_jet;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn effective_parameters_by_hand() {
        let d = mhz(3000.0);
        let e = effective_two_level(mhz(50.0), mhz(100.0), d).unwrap();
        assert!(rel(e.omega_eff, mhz(100.0 * 50.0 / 6000.0)) < 1e-12);
        assert!(rel(e.delta_eff, mhz((1e4 - 2500.0) / 12000.0)) < 1e-12);
        assert!(rel(e.omega_eff / (2.0 * PI), 0.833_333_333_333) < 1e-9);
        assert!(rel(e.delta_eff / (2.0 * PI), 0.625) < 1e-12);

        let sym = effective_two_level(7.0, 7.0, d).unwrap();
        assert_eq!(sym.delta_eff, 0.0);
        assert!(rel(sym.omega_eff, 49.0 / (2.0 * d)) < 1e-15);

        let only_pump = effective_two_level(0.0, 7.0, d).unwrap();
        assert_eq!(only_pump.omega_eff, 0.0);
        assert!(rel(only_pump.delta_eff, 49.0 / (4.0 * d)) < 1e-15);

        assert_eq!(effective_two_level(1.0, 1.0, 0.0), Err(PulseError::ZeroDetuning));
    }

    #[test]
    fn inversion_examples() {
        let d = mhz(3000.0);
        assert_eq!(invert_effective(EffectivePoint::default(), d).unwrap(), (0.0, 0.0));
        let e = effective_two_level(mhz(50.0), mhz(100.0), d).unwrap();
        let (s, p) = invert_effective(e, d).unwrap();
        assert!(rel(s, mhz(50.0)) < 1e-10 && rel(p, mhz(100.0)) < 1e-10);
        let (s, p) = invert_effective(EffectivePoint { omega_eff: 3.0, delta_eff: 0.0 }, d).unwrap();
        let expect = (2.0 * d * 3.0).sqrt();
        assert!(rel(s, expect) < 1e-14 && rel(p, expect) < 1e-14);
        let bad = invert_effective(EffectivePoint { omega_eff: 1.0, delta_eff: 0.5 }, -d);
        assert!(matches!(bad, Err(PulseError::NegativeRadicand { .. })));
    }

    #[test]
    fn counter_diabatic_examples() {
        let c = counter_diabatic(Jet::constant(2.0), Jet::constant(3.0), 0.0).unwrap();
        assert_eq!(c, 0.0);
        assert!(matches!(
            counter_diabatic(Jet::constant(0.0), Jet::constant(0.0), 0.25),
            Err(PulseError::DegenerateEnvelope { .. })
        ));
        // Omega_p = A sin(theta), Omega_s = A cos(theta), theta = a t^2 + b t
        let (amp, a, b) = (40.0, 3.0, 0.7);
        for &t in &[0.0, 0.1, 0.33, 0.5] {
            let th = a * t * t + b * t;
            let thd = 2.0 * a * t + b;
            let thdd = 2.0 * a;
            let pump = Jet {
                value: amp * th.sin(),
                d1: amp * th.cos() * thd,
                d2: amp * (th.cos() * thdd - th.sin() * thd * thd),
            };
            let stokes = Jet {
                value: amp * th.cos(),
                d1: -amp * th.sin() * thd,
                d2: -amp * (th.sin() * thdd + th.cos() * thd * thd),
            };
            let cd = counter_diabatic_jet(stokes, pump, t).unwrap();
            assert!((cd.value - 2.0 * thd).abs() < 1e-12);
            assert!((cd.d1 - 2.0 * thdd).abs() < 1e-10);
        }
    }

    #[test]
    fn time_reversal_flips_counter_diabatic_sign() {
        let base = BaseStirapShape::default().pulses(0.72, 1e4);
        let rev = base.time_reversed();
        for &t in &[0.1, 0.3, 0.36, 0.5] {
            let (s, p) = base.jets(t);
            let (rs, rp) = rev.jets(0.72 - t);
            let a = counter_diabatic(s, p, t).unwrap();
            let b = counter_diabatic(rs, rp, 0.72 - t).unwrap();
            assert!((a + b).abs() < 1e-6 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn modify_identities() {
        let e = EffectivePoint { omega_eff: 1.3, delta_eff: -0.4 };
        let zero = CounterDiabatic { value: 0.0, d1: 0.0 };
        assert_eq!(satd_modify(e, 0.8, zero), e);
        let flat = EffectivePoint { omega_eff: 0.0, delta_eff: 0.9 };
        let m = satd_modify(flat, 0.0, CounterDiabatic { value: -2.5, d1: 0.0 });
        assert_eq!(m.omega_eff, 2.5);
        assert_eq!(m.delta_eff, 0.9);
    }

    /// Independent evaluation of the modified curves. For the Gaussian pair
    /// the mixing angle is `atan(exp(k (t - T/2)))` with `k = 2 tau / w^2`,
    /// so `Omega_a = k / cosh(k (t - T/2))`; the arctan term is differentiated
    /// numerically.
    #[test]
    fn modified_curves_match_finite_difference_oracle() {
        let (duration, detuning) = (0.72, mhz(3000.0));
        let shape = BaseStirapShape::default();
        let (w, tau, amp) = (duration / 6.0, duration / 10.0, shape.amplitude);
        let gauss = move |c: f64| move |t: f64| amp * (-(t - c) * (t - c) / (2.0 * w * w)).exp();
        let s = gauss(0.5 * duration - tau);
        let p = gauss(0.5 * duration + tau);
        let k = 2.0 * tau / (w * w);
        let omega_eff = |t: f64| s(t) * p(t) / (2.0 * detuning);
        let omega_a = |t: f64| k / (k * (t - 0.5 * duration)).cosh();
        let chi = |t: f64| (omega_a(t) / omega_eff(t)).atan();
        let sat = SatdShape { base: shape.pulses(duration, 1e6), detuning };
        for i in 1..20 {
            let t = duration * i as f64 / 20.0;
            let got = sat.modified_effective(t).unwrap();
            let want_omega = omega_eff(t).hypot(omega_a(t));
            let chi_dot = stencil_jet(chi, t, 1e-4).d1;
            let want_delta = (p(t).powi(2) - s(t).powi(2)) / (4.0 * detuning) + chi_dot;
            assert!(rel(got.omega_eff, want_omega) < 1e-8, "t={t}");
            assert!(
                (got.delta_eff - want_delta).abs() < 1e-8 * want_omega.max(want_delta.abs()),
                "t={t} {} {}",
                got.delta_eff,
                want_delta
            );
        }
    }

    #[test]
    fn counter_diabatic_integrates_to_twice_the_mixing_angle_change() {
        let duration = 0.72;
        let base = BaseStirapShape::default().pulses(duration, 1e6);
        let theta = |t: f64| {
            let (s, p) = base.amplitudes(t);
            p.atan2(s)
        };
        // composite Simpson
        let n = 20_000;
        let h = duration / n as f64;
        let f = |t: f64| {
            let (s, p) = base.jets(t);
            counter_diabatic(s, p, t).unwrap()
        };
        let mut acc = f(0.0) + f(duration);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        let integral = acc * h / 3.0;
        let expect = 2.0 * (theta(duration) - theta(0.0));
        assert!(rel(integral, expect) < 1e-6, "{integral} vs {expect}");
    }

    #[test]
    fn stokes_peaks_before_pump() {
        let pulses = satd_pipeline(&BaseStirapShape::default(), 0.72, mhz(3000.0), mhz(100.0) * 2f64.sqrt())
            .unwrap();
        let (ts, tp) = pulses.peak_times(2001);
        assert!(ts < tp, "{ts} {tp}");
        pulses.check_cap(2001).unwrap();
    }

    #[test]
    fn adiabatic_limit_recovers_base() {
        let shape = BaseStirapShape { amplitude: mhz(400.0), ..BaseStirapShape::default() };
        let duration = 7.2;
        let detuning = mhz(3000.0);
        let base = shape.pulses(duration, 1e6);
        let sat = SatdShape { base: base.clone(), detuning };
        let (peak, _) = base.peak(1001);
        let mut worst = 0.0f64;
        for i in 0..=200 {
            let t = duration * (0.25 + 0.5 * i as f64 / 200.0);
            let (s, p) = sat.amplitudes(t);
            let (bs, bp) = base.amplitudes(t);
            worst = worst.max((s - bs).abs().max((p - bp).abs()) / peak);
        }
        assert!(worst < 1e-2, "{worst}");
    }

    #[test]
    fn pipeline_reports_cap_and_degenerate_base() {
        let big = BaseStirapShape { amplitude: mhz(500.0), ..BaseStirapShape::default() };
        let r = satd_pipeline(&big, 0.72, mhz(3000.0), mhz(100.0));
        assert!(matches!(r, Err(PulseError::CapExceeded { peak, .. }) if peak > mhz(100.0)));
        let zero = BaseStirapShape { amplitude: 0.0, ..BaseStirapShape::default() };
        let r = satd_pipeline(&zero, 0.72, mhz(3000.0), mhz(100.0));
        assert!(matches!(r, Err(PulseError::DegenerateEnvelope { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn inversion_round_trip(
            s in 1e-3f64..1e3,
            p in 1e-3f64..1e3,
            d in 1e2f64..1e5,
        ) {
            let e = effective_two_level(s, p, d).unwrap();
            let (s2, p2) = invert_effective(e, d).unwrap();
            let e2 = effective_two_level(s2, p2, d).unwrap();
            let scale = e.omega_eff.abs().max(e.delta_eff.abs());
            prop_assert!(rel(e2.omega_eff, e.omega_eff) < 1e-10);
            prop_assert!((e2.delta_eff - e.delta_eff).abs() < 1e-10 * scale);
            prop_assert!(rel(s2, s) < 1e-10 && rel(p2, p) < 1e-10);
        }

        #[test]
        fn zero_counter_diabatic_is_identity(o in -1e3f64..1e3, dl in -1e3f64..1e3, od in -1e3f64..1e3) {
            let e = EffectivePoint { omega_eff: o, delta_eff: dl };
            let m = satd_modify(e, od, CounterDiabatic { value: 0.0, d1: 0.0 });
            prop_assert_eq!(m.delta_eff, dl);
            prop_assert_eq!(m.omega_eff, o.abs());
        }
    }
}
