//! Chopped randomized Fourier basis for pulse shaping.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Envelope, Jet, PulsePair};

pub const DEFAULT_HARMONICS: usize = 5;
/// Half-width of the uniform relative frequency jitter `r_k`.
pub const CRAB_FREQUENCY_SPREAD: f64 = 0.5;

/// Randomized basis frequencies and their coefficients. The coefficient
/// vector is laid out as `[stokes sin, stokes cos, pump sin, pump cos]`,
/// each block `n_harmonics` long, in rad/µs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrabParams {
    pub n_harmonics: usize,
    pub freqs_s: Vec<f64>,
    pub freqs_p: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub seed: u64,
}

impl CrabParams {
    /// Draws `nu_k = (2 pi k / T)(1 + r_k)`, Stokes first, with zero
    /// coefficients.
    pub fn randomized(n_harmonics: usize, duration: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> Vec<f64> {
            (1..=n_harmonics)
                .map(|k| {
                    let r = rng.random_range(-CRAB_FREQUENCY_SPREAD..=CRAB_FREQUENCY_SPREAD);
                    2.0 * PI * k as f64 / duration * (1.0 + r)
                })
                .collect()
        };
        let freqs_s = draw();
        let freqs_p = draw();
        CrabParams { n_harmonics, freqs_s, freqs_p, coeffs: alloc::vec![0.0; 4 * n_harmonics], seed }
    }

    pub fn n_coeffs(&self) -> usize {
        4 * self.n_harmonics
    }

    pub fn with_coeffs(mut self, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), self.n_coeffs(), "coefficient count");
        self.coeffs = coeffs;
        self
    }

    fn block(&self, i: usize) -> &[f64] {
        let n = self.n_harmonics;
        &self.coeffs[i * n..(i + 1) * n]
    }
}

/// One channel of a CRAB pulse: `clamp(base + sin^2(pi t/T) sum_k ..., +-cap)`.
#[derive(Debug, Clone)]
pub struct CrabChannel {
    pub duration: f64,
    pub cap: f64,
    pub base: Envelope,
    pub freqs: Vec<f64>,
    pub sin_coeffs: Vec<f64>,
    pub cos_coeffs: Vec<f64>,
}

impl CrabChannel {
    #[inline]
    fn series(&self, t: f64) -> (f64, f64, f64) {
        let (mut f, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for ((&nu, &a), &b) in self.freqs.iter().zip(&self.sin_coeffs).zip(&self.cos_coeffs) {
            let (sn, cs) = (nu * t).sin_cos();
            f += a * sn + b * cs;
            d1 += nu * (a * cs - b * sn);
            d2 -= nu * nu * (a * sn + b * cs);
        }
        (f, d1, d2)
    }

    #[inline]
    fn window(&self, t: f64) -> (f64, f64, f64) {
        let w = PI / self.duration;
        let s = (w * t).sin();
        let (s2, c2) = (2.0 * w * t).sin_cos();
        (s * s, w * s2, 2.0 * w * w * c2)
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        let s = (PI / self.duration * t).sin();
        let f: f64 = self
            .freqs
            .iter()
            .zip(&self.sin_coeffs)
            .zip(&self.cos_coeffs)
            .map(|((&nu, &a), &b)| {
                let (sn, cs) = (nu * t).sin_cos();
                a * sn + b * cs
            })
            .sum();
        let raw = self.base.value(t) + s * s * f;
        raw.clamp(-self.cap, self.cap)
    }

    pub fn jet(&self, t: f64, h: f64) -> Jet {
        let base = self.base.jet(t, h);
        let (b, b1, b2) = self.window(t);
        let (f, f1, f2) = self.series(t);
        let value = base.value + b * f;
        if value.abs() > self.cap {
            return Jet::constant(value.clamp(-self.cap, self.cap));
        }
        Jet {
            value,
            d1: base.d1 + b1 * f + b * f1,
            d2: base.d2 + b2 * f + 2.0 * b1 * f1 + b * f2,
        }
    }
}

/// Applies the CRAB correction to `base`, clamping each channel to the cap.
pub fn crab_pulse(params: &CrabParams, base: &PulsePair) -> PulsePair {
    let channel = |env: &Envelope, freqs: &[f64], sin: &[f64], cos: &[f64]| {
        Envelope::Crab(Arc::new(CrabChannel {
            duration: base.duration,
            cap: base.cap,
            base: env.clone(),
            freqs: freqs.to_vec(),
            sin_coeffs: sin.to_vec(),
            cos_coeffs: cos.to_vec(),
        }))
    };
    PulsePair::new(
        base.duration,
        base.cap,
        channel(&base.stokes, &params.freqs_s, params.block(0), params.block(1)),
        channel(&base.pump, &params.freqs_p, params.block(2), params.block(3)),
    )
}
