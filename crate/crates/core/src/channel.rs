//! Sampled echo synthesis and noise calibration.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RsfError};
use crate::theory;
use crate::waveform::WaveformSpec;

/// Propagation speed used by the velocity conversions (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// `γ = (c − v)/(c + v)`; positive `v` is a receding target.
pub fn gamma_from_velocity(v: f64, c: f64) -> f64 {
    (c - v) / (c + v)
}

/// Inverse of [`gamma_from_velocity`].
pub fn velocity_from_gamma(gamma: f64, c: f64) -> f64 {
    c * (1.0 - gamma) / (1.0 + gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetParams {
    /// Complex scattering coefficient, serialized as `[re, im]`.
    pub x: Complex64,
    pub tau0_s: f64,
    pub gamma0: f64,
}

impl TargetParams {
    pub fn new(x: Complex64, tau0_s: f64, gamma0: f64) -> Result<Self> {
        let t = TargetParams { x, tau0_s, gamma0 };
        t.validate()?;
        Ok(t)
    }

    pub fn from_velocity(x: Complex64, tau0_s: f64, v: f64, c: f64) -> Result<Self> {
        if !(c > 0.0 && v.abs() < c) {
            return Err(RsfError::validation("velocity", format!("|v| = {} must be below c = {c}", v.abs())));
        }
        Self::new(x, tau0_s, gamma_from_velocity(v, c))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0.is_finite() && self.gamma0 > 0.0) {
            return Err(RsfError::validation("gamma0", format!("must be > 0, got {}", self.gamma0)));
        }
        if !(self.x.norm_sqr() > 0.0 && self.x.norm_sqr().is_finite()) {
            return Err(RsfError::validation("x", "scattering coefficient must be nonzero and finite"));
        }
        if !self.tau0_s.is_finite() {
            return Err(RsfError::validation("tau0_s", "must be finite"));
        }
        Ok(())
    }
}

/// Uniform sampling grid `t_n = t0 + nΔ`, `n = 0..N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    pub delta_s: f64,
    pub n_samples: usize,
    #[serde(default)]
    pub t0_s: f64,
}

impl SamplingSpec {
    pub fn new(delta_s: f64, n_samples: usize) -> Result<Self> {
        let s = SamplingSpec {
            delta_s,
            n_samples,
            t0_s: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    /// Grid from 0 long enough to hold the echo for any `τ ≤ tau_max` and
    /// `γ ≥ gamma_min`.
    pub fn covering(spec: &WaveformSpec, tau_max: f64, gamma_min: f64, delta_s: f64) -> Result<Self> {
        if !(gamma_min > 0.0) {
            return Err(RsfError::validation("gamma_min", "must be > 0"));
        }
        let end = tau_max.max(0.0) + spec.span() / gamma_min;
        Self::new(delta_s, (end / delta_s).ceil() as usize + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_s.is_finite() && self.delta_s > 0.0) {
            return Err(RsfError::validation("delta_s", format!("must be > 0, got {}", self.delta_s)));
        }
        if self.n_samples == 0 {
            return Err(RsfError::validation("n_samples", "need at least one sample"));
        }
        if !self.t0_s.is_finite() {
            return Err(RsfError::validation("t0_s", "must be finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn time(&self, n: usize) -> f64 {
        self.t0_s + n as f64 * self.delta_s
    }

    pub fn end(&self) -> f64 {
        self.time(self.n_samples - 1)
    }

    /// Checks the rate against the highest carrier plus a few envelope
    /// bandwidths. Returns a message when aliasing is likely.
    pub fn rate_warning(&self, spec: &WaveformSpec, gamma: f64) -> Option<String> {
        let fmax = spec.carrier_freqs().into_iter().fold(0.0, f64::max);
        let bw = (fmax + 4.0 / spec.pulse_duration()) / gamma;
        (1.0 / self.delta_s <= bw)
            .then(|| format!("sampling rate {:.3e} Hz is below the echo bandwidth {:.3e} Hz", 1.0 / self.delta_s, bw))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    N0,
    SnrDb,
}

/// Noise level of one realization. `sigma2 · delta = n0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub mode: NoiseMode,
    /// PSD for [`NoiseMode::N0`], dB for [`NoiseMode::SnrDb`].
    pub value: f64,
    pub n0: f64,
    pub sigma2: f64,
}

impl NoiseSpec {
    pub fn from_n0(n0: f64, delta_s: f64) -> Result<Self> {
        if !(n0 >= 0.0 && n0.is_finite()) {
            return Err(RsfError::validation("n0", format!("must be finite and >= 0, got {n0}")));
        }
        Ok(NoiseSpec {
            mode: NoiseMode::N0,
            value: n0,
            n0,
            sigma2: n0 / delta_s,
        })
    }

    pub fn noiseless() -> Self {
        NoiseSpec {
            mode: NoiseMode::N0,
            value: 0.0,
            n0: 0.0,
            sigma2: 0.0,
        }
    }
}

/// `N0 = energy / 10^(snr/10)`, `σ² = N0/Δ`.
pub fn calibrate_noise(snr_db: f64, energy: f64, delta_s: f64) -> Result<NoiseSpec> {
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(RsfError::validation("energy", format!("must be > 0, got {energy}")));
    }
    if !snr_db.is_finite() {
        return Err(RsfError::validation("snr_db", "must be finite"));
    }
    let n0 = energy / 10f64.powf(snr_db / 10.0);
    Ok(NoiseSpec {
        mode: NoiseMode::SnrDb,
        value: snr_db,
        n0,
        sigma2: n0 / delta_s,
    })
}

/// SNR in dB of an echo with `energy` in noise of PSD `n0`.
pub fn snr_of(n0: f64, energy: f64) -> f64 {
    10.0 * (energy / n0).log10()
}

/// Noiseless echo `x·s(γ0(t_n − τ0))` on the grid.
pub fn echo_samples(spec: &WaveformSpec, target: &TargetParams, samp: &SamplingSpec) -> Result<Vec<Complex64>> {
    spec.validate()?;
    target.validate()?;
    samp.validate()?;
    let layout = spec.layout();
    let y: Vec<Complex64> = (0..samp.n_samples)
        .map(|n| target.x * layout.value(target.gamma0 * (samp.time(n) - target.tau0_s)))
        .collect();
    if y.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
        return Err(RsfError::NoEcho(format!(
            "window [{:e}, {:e}] s misses the echo at τ0 = {:e} s",
            samp.t0_s,
            samp.end(),
            target.tau0_s
        )));
    }
    Ok(y)
}

/// Message if the window cuts off part of the echo support.
pub fn coverage_warning(spec: &WaveformSpec, target: &TargetParams, samp: &SamplingSpec) -> Option<String> {
    let start = target.tau0_s;
    let stop = target.tau0_s + spec.span() / target.gamma0;
    (start < samp.t0_s || stop > samp.end()).then(|| {
        format!(
            "echo support [{start:e}, {stop:e}] s is not inside the window [{:e}, {:e}] s",
            samp.t0_s,
            samp.end()
        )
    })
}

/// Continuous echo energy `|x|²E/γ0`.
pub fn echo_energy(spec: &WaveformSpec, target: &TargetParams) -> Result<f64> {
    target.validate()?;
    Ok(target.x.norm_sqr() * theory::signal_energy(spec)? / target.gamma0)
}

/// Adds i.i.d. `CN(0, σ²)` noise. With `σ² = 0` the input is returned as is.
pub fn add_noise<R: Rng + ?Sized>(samples: &[Complex64], noise: &NoiseSpec, rng: &mut R) -> Vec<Complex64> {
    if noise.sigma2 == 0.0 {
        return samples.to_vec();
    }
    let s = (0.5 * noise.sigma2).sqrt();
    samples
        .iter()
        .map(|y| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            y + Complex64::new(s * re, s * im)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::trapezoid;
    use crate::rng::{Purpose, StreamKey};
    use crate::waveform::{half_integer_alphabet, make_codeword, Envelope, Generator};
    use approx::assert_relative_eq;

    fn spec() -> WaveformSpec {
        let cw = make_codeword(Generator::Costas, 6, &half_integer_alphabet(6), 11).unwrap();
        WaveformSpec::rsf(20e6, 2e6, 4e-6, Envelope::poly_smooth(1e-6), cw).unwrap()
    }

    fn reference_target() -> TargetParams {
        TargetParams::new(Complex64::new(1.0, 0.0), 1.48e-6, 0.91).unwrap()
    }

    fn grid() -> SamplingSpec {
        SamplingSpec::covering(&spec(), 1.98e-6, 0.85, 1e-8).unwrap()
    }

    #[test]
    fn identity_channel() {
        let s = spec();
        let t = TargetParams::new(Complex64::new(1.0, 0.0), 0.0, 1.0).unwrap();
        let g = grid();
        let y = echo_samples(&s, &t, &g).unwrap();
        for (n, v) in y.iter().enumerate() {
            assert_eq!(*v, s.signal_value(g.time(n)));
        }
    }

    #[test]
    fn on_grid_delay_is_a_shift() {
        let s = spec();
        let g = grid();
        let base = echo_samples(&s, &TargetParams::new(Complex64::new(1.0, 0.0), 0.0, 1.0).unwrap(), &g).unwrap();
        let m = 37;
        let t = TargetParams::new(Complex64::new(1.0, 0.0), m as f64 * 1e-8, 1.0).unwrap();
        let y = echo_samples(&s, &t, &g).unwrap();
        for n in m..g.n_samples {
            assert_relative_eq!(y[n].re, base[n - m].re, epsilon = 1e-50, max_relative = 1e-9);
            assert_relative_eq!(y[n].im, base[n - m].im, epsilon = 1e-50, max_relative = 1e-9);
        }
    }

    #[test]
    fn reference_support_starts_at_148() {
        let g = grid();
        let y = echo_samples(&spec(), &reference_target(), &g).unwrap();
        let tau0 = reference_target().tau0_s;
        let start = (0..g.n_samples).find(|&n| g.time(n) >= tau0).unwrap();
        assert_eq!(start, 148);
        assert!(y[..start].iter().all(|v| v.norm_sqr() == 0.0));
        // β vanishes on the boundary sample itself.
        assert!(y[start + 1].norm_sqr() > 0.0);
    }

    #[test]
    fn default_window_size() {
        let g = grid();
        assert!((2600..=2900).contains(&g.n_samples), "{}", g.n_samples);
        assert!(coverage_warning(&spec(), &reference_target(), &g).is_none());
        assert!(g.rate_warning(&spec(), 0.91).is_none());
    }

    #[test]
    fn missed_echo_is_an_error() {
        let g = SamplingSpec::new(1e-8, 100).unwrap();
        let far = TargetParams::new(Complex64::new(1.0, 0.0), 1e-3, 0.91).unwrap();
        assert!(matches!(echo_samples(&spec(), &far, &g), Err(RsfError::NoEcho(_))));
    }

    #[test]
    fn linearity_in_x() {
        let g = grid();
        let a = echo_samples(&spec(), &reference_target(), &g).unwrap();
        let t2 = TargetParams::new(Complex64::new(2.0, 0.0), 1.48e-6, 0.91).unwrap();
        let b = echo_samples(&spec(), &t2, &g).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert_eq!(*v, u * 2.0);
        }
    }

    #[test]
    fn energy_change_of_variables() {
        let s = spec();
        let e = theory::signal_energy(&s).unwrap();
        let unit = TargetParams::new(Complex64::new(1.0, 0.0), 0.0, 1.0).unwrap();
        assert_eq!(echo_energy(&s, &unit).unwrap(), e);
        assert_relative_eq!(echo_energy(&s, &reference_target()).unwrap(), e / 0.91, max_relative = 1e-15);

        let g = grid();
        let y = echo_samples(&s, &reference_target(), &g).unwrap();
        let p: Vec<f64> = y.iter().map(|v| v.norm_sqr()).collect();
        assert_relative_eq!(trapezoid(&p, g.delta_s), e / 0.91, max_relative = 1e-3);
    }

    #[test]
    fn noise_calibration() {
        let n = calibrate_noise(0.0, 2.0, 1e-8).unwrap();
        assert_eq!(n.n0, 2.0);
        let n = calibrate_noise(30.0, 1.0, 1e-8).unwrap();
        assert_relative_eq!(n.n0, 1e-3, max_relative = 1e-14);
        assert_relative_eq!(n.sigma2 * 1e-8, n.n0, max_relative = 1e-15);
        for snr in [-5.0, 0.0, 12.5, 40.0] {
            let n = calibrate_noise(snr, 3.7e-80, 1e-8).unwrap();
            assert_relative_eq!(snr_of(n.n0, 3.7e-80), snr, epsilon = 1e-12, max_relative = 1e-12);
        }
        assert!(calibrate_noise(10.0, 0.0, 1e-8).is_err());
    }

    #[test]
    fn velocity_round_trip() {
        assert_eq!(gamma_from_velocity(0.0, SPEED_OF_LIGHT), 1.0);
        let v = velocity_from_gamma(0.91, SPEED_OF_LIGHT);
        assert_relative_eq!(v / SPEED_OF_LIGHT, 0.09 / 1.91, max_relative = 1e-12);
        assert_relative_eq!(v / SPEED_OF_LIGHT, 0.047_120_4, max_relative = 1e-6);
        assert_relative_eq!(gamma_from_velocity(v, SPEED_OF_LIGHT), 0.91, max_relative = 1e-12);
    }

    #[test]
    fn zero_noise_is_bitwise_identity() {
        let y = echo_samples(&spec(), &reference_target(), &grid()).unwrap();
        let mut rng = StreamKey::new(1, Purpose::Noise, 0, 0).rng();
        assert_eq!(add_noise(&y, &NoiseSpec::noiseless(), &mut rng), y);
    }

    #[test]
    fn noise_statistics() {
        let n = 100_000;
        let sigma2 = 2.5;
        let zeros = vec![Complex64::new(0.0, 0.0); n];
        let noise = NoiseSpec::from_n0(sigma2 * 1e-8, 1e-8).unwrap();
        let mut rng = StreamKey::new(3, Purpose::Noise, 0, 0).rng();
        let w = add_noise(&zeros, &noise, &mut rng);
        let nf = n as f64;
        let var = w.iter().map(|v| v.norm_sqr()).sum::<f64>() / nf;
        assert!((var / sigma2 - 1.0).abs() < 0.03);
        // Circularity: E{w²} ≈ 0.
        let pseudo: Complex64 = w.iter().map(|v| v * v).sum::<Complex64>() / nf;
        assert!(pseudo.norm() / sigma2 < 0.02);
        // Whiteness across adjacent samples.
        let m = n - 1;
        let c1: Complex64 = (0..m).map(|i| w[i] * w[i + 1]).sum::<Complex64>() / m as f64;
        let c2: Complex64 = (0..m).map(|i| w[i] * w[i + 1].conj()).sum::<Complex64>() / m as f64;
        assert!(c1.norm() / sigma2 < 0.02);
        assert!(c2.norm() / sigma2 < 0.02);
    }

    #[test]
    fn noise_is_deterministic_per_stream() {
        let y = vec![Complex64::new(0.0, 0.0); 64];
        let noise = NoiseSpec::from_n0(1e-8, 1e-8).unwrap();
        let k = StreamKey::new(9, Purpose::Noise, 1, 2);
        assert_eq!(add_noise(&y, &noise, &mut k.rng()), add_noise(&y, &noise, &mut k.rng()));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn snr_calibration_round_trips(snr in -20.0..60.0f64, e_exp in -80.0..10.0f64, d_exp in -10.0..-6.0f64) {
                let energy = 10f64.powf(e_exp);
                let delta = 10f64.powf(d_exp);
                let noise = calibrate_noise(snr, energy, delta).unwrap();
                prop_assert!((snr_of(noise.n0, energy) - snr).abs() < 1e-9);
                prop_assert!((noise.sigma2 * delta / noise.n0 - 1.0).abs() < 1e-12);
            }

            #[test]
            fn velocity_gamma_round_trips(v in -3e4..3e4f64) {
                let c = 3e8;
                let g = gamma_from_velocity(v, c);
                prop_assert!((velocity_from_gamma(g, c) - v).abs() < 1e-6);
            }
        }
    }
}
