//! Signal moments, theoretical MSEs and Cramér–Rao bounds.
//!
//! All MSEs are returned per unit noise PSD `N0`: multiply by the `N0` from
//! [`crate::channel::calibrate_noise`] to get absolute mean-square errors.
//!
//! The envelope used in the figures integrates to very small numbers
//! (`∫β² ≈ 8.3e-5·T¹³ ≈ 1e-82` for `T = 1 µs`), so the determinant
//! `Π = (EB − F²)(ED − G²) − (EC − FG)²` sits near the bottom of the f64
//! range.  Internally every formula is evaluated on moments normalized by
//! `E`, where the products are well scaled; `Π` and `Π₀` are exposed as
//! `Π/E⁴` and `Π₀/E⁴`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RsfError};
use crate::quad::adaptive_simpson;
use crate::stats;
use crate::waveform::{Envelope, WaveformKind, WaveformSpec};

/// Relative tolerance for every theory-side quadrature.
pub const QUAD_REL_TOL: f64 = 1e-9;

const TWO_PI: f64 = 2.0 * PI;
const FOUR_PI2: f64 = 4.0 * PI * PI;

// ── Moments ─────────────────────────────────────────────────────────

/// The six integrals of one waveform plus the normalized determinants.
///
/// `b = ∫|ṡ|²`, `c = ∫t|ṡ|²`, `d = ∫t²|ṡ|²`, `e = ∫|s|²`,
/// `f = Im∫s ṡ*`, `g = Im∫t s ṡ*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalMoments {
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    pub g: f64,
    /// `Π / E⁴`.
    pub pi_norm: f64,
    /// `Π₀ / E⁴`, with `Π₀ = Π − (5/4)E²(EB − F²)`.
    pub pi0_norm: f64,
}

/// Moments divided by `E`, with the three Schur complements that every
/// formula is built from.
#[derive(Debug, Clone, Copy)]
struct Reduced {
    e: f64,
    /// `B/E − (F/E)²`
    p: f64,
    /// `C/E − (F/E)(G/E)`
    r: f64,
    /// `D/E − (G/E)²`
    w: f64,
}

impl SignalMoments {
    pub fn from_integrals(b: f64, c: f64, d: f64, e: f64, f: f64, g: f64) -> Self {
        let mut m = SignalMoments {
            b,
            c,
            d,
            e,
            f,
            g,
            pi_norm: 0.0,
            pi0_norm: 0.0,
        };
        let red = m.reduced();
        m.pi_norm = red.p * red.w - red.r * red.r;
        m.pi0_norm = m.pi_norm - 1.25 * red.p;
        m
    }

    fn reduced(&self) -> Reduced {
        let (fe, ge) = (self.f / self.e, self.g / self.e);
        Reduced {
            e: self.e,
            p: self.b / self.e - fe * fe,
            r: self.c / self.e - fe * ge,
            w: self.d / self.e - ge * ge,
        }
    }

    /// `D/E`, the quantity that must be large for the approximate MSEs.
    pub fn de_ratio(&self) -> f64 {
        self.d / self.e
    }

    /// Moments of the same signal delayed by `ts`.
    pub fn shifted(&self, ts: f64) -> Self {
        SignalMoments::from_integrals(
            self.b,
            self.c + ts * self.b,
            self.d + 2.0 * ts * self.c + ts * ts * self.b,
            self.e,
            self.f,
            self.g + ts * self.f,
        )
    }
}

/// Per-pulse integrals on local time `u ∈ [0, T]`.
#[derive(Debug, Clone, Copy, Default)]
struct PulseIntegrals {
    /// `∫ u^i |ṡ|²`, i = 0..2
    ds: [f64; 3],
    /// `∫ |s|²`
    e: f64,
    /// `Im ∫ u^i s ṡ*`, i = 0..1
    im: [f64; 2],
}

impl PulseIntegrals {
    /// Accumulates this pulse placed at time offset `o` into `acc`.
    fn place(&self, o: f64, acc: &mut [f64; 6]) {
        let [d0, d1, d2] = self.ds;
        acc[0] += d0;
        acc[1] += o * d0 + d1;
        acc[2] += o * o * d0 + 2.0 * o * d1 + d2;
        acc[3] += self.e;
        acc[4] += self.im[0];
        acc[5] += o * self.im[0] + self.im[1];
    }
}

/// `∫₀ᵀ u^i β²` and `∫₀ᵀ u^i β̇²` for i = 0..2.
fn envelope_moments(env: &Envelope) -> Result<([f64; 3], [f64; 3])> {
    let t = env.duration();
    let mut a = [0.0; 3];
    let mut b = [0.0; 3];
    for i in 0..3 {
        a[i] = adaptive_simpson(|u| u.powi(i as i32) * env.value(u).powi(2), 0.0, t, QUAD_REL_TOL)?;
        b[i] = adaptive_simpson(|u| u.powi(i as i32) * env.deriv(u).powi(2), 0.0, t, QUAD_REL_TOL)?;
    }
    Ok((a, b))
}

/// Signal moments of a waveform.
///
/// Single-carrier trains use the per-pulse closed forms
/// `|ṡ|² = β̇² + 4π²f_k²β²` and `Im{s ṡ*} = −2πf_k β²`, leaving only envelope
/// integrals to quadrature.  OFDM pulses carry cross-subcarrier beats, so their
/// integrands are evaluated in full.
pub fn signal_moments(spec: &WaveformSpec) -> Result<SignalMoments> {
    spec.validate()?;
    match spec.kind {
        WaveformKind::Rsf | WaveformKind::Monotone => {
            let (a, b) = envelope_moments(&spec.envelope)?;
            let mut acc = [0.0; 6];
            for (k, f) in spec.carrier_freqs().into_iter().enumerate() {
                let w = FOUR_PI2 * f * f;
                let pulse = PulseIntegrals {
                    ds: [b[0] + w * a[0], b[1] + w * a[1], b[2] + w * a[2]],
                    e: a[0],
                    im: [-TWO_PI * f * a[0], -TWO_PI * f * a[1]],
                };
                pulse.place(k as f64 * spec.tr_s, &mut acc);
            }
            Ok(SignalMoments::from_integrals(acc[0], acc[1], acc[2], acc[3], acc[4], acc[5]))
        }
        WaveformKind::Ofdm => signal_moments_quadrature(spec),
    }
}

/// Moments by direct quadrature of `|s|²`, `|ṡ|²` and `Im{s ṡ*}` on every
/// pulse, with no closed-form help.
pub fn signal_moments_quadrature(spec: &WaveformSpec) -> Result<SignalMoments> {
    spec.validate()?;
    let layout = spec.layout();
    let t = spec.pulse_duration();
    let mut acc = [0.0; 6];
    for k in 0..spec.k_pulses {
        let s = |u: f64| layout.pulse_value(k, u);
        let ds = |u: f64| layout.pulse_deriv(k, u);
        let cross = |u: f64| -> f64 { (s(u) * ds(u).conj()).im };
        let mut pulse = PulseIntegrals::default();
        for i in 0..3 {
            pulse.ds[i] = adaptive_simpson(|u| u.powi(i as i32) * ds(u).norm_sqr(), 0.0, t, QUAD_REL_TOL)?;
        }
        pulse.e = adaptive_simpson(|u| s(u).norm_sqr(), 0.0, t, QUAD_REL_TOL)?;
        pulse.im[0] = adaptive_simpson(cross, 0.0, t, QUAD_REL_TOL)?;
        pulse.im[1] = adaptive_simpson(|u| u * cross(u), 0.0, t, QUAD_REL_TOL)?;
        pulse.place(k as f64 * spec.tr_s, &mut acc);
    }
    Ok(SignalMoments::from_integrals(acc[0], acc[1], acc[2], acc[3], acc[4], acc[5]))
}

/// `E = ∫|s|²`.
pub fn signal_energy(spec: &WaveformSpec) -> Result<f64> {
    Ok(signal_moments(spec)?.e)
}

// ── General-signal MSEs and bounds ──────────────────────────────────

fn check_scene(x: Complex64, gamma0: f64) -> Result<f64> {
    let x2 = x.norm_sqr();
    if !(x2 > 0.0 && x2.is_finite()) {
        return Err(RsfError::validation("x", "scattering coefficient must be nonzero"));
    }
    if !(gamma0 > 0.0 && gamma0.is_finite()) {
        return Err(RsfError::validation("gamma0", "Doppler stretch must be positive"));
    }
    Ok(x2)
}

/// High-SNR MSEs of the AF peak estimator without the symmetric-envelope
/// simplification, per unit `N0`.
///
/// The prefactor is `E / (2|x|²Π₀²)`: the bracketed polynomials are the
/// linearized-estimator variance numerators and `Π₀` is (up to `4/γ₀⁴`) the
/// determinant of the Hessian of `|A|²` at the true parameters.
pub fn mse_exact(m: &SignalMoments, x: Complex64, gamma0: f64) -> Result<(f64, f64)> {
    let x2 = check_scene(x, gamma0)?;
    let Reduced { e, p, r, w } = m.reduced();
    let pi0 = m.pi0_norm;
    if pi0 == 0.0 || !pi0.is_finite() {
        return Err(RsfError::Singular("Π₀ = 0".into()));
    }
    let r2 = r * r;
    let wm = w - 1.25;
    let wp = w + 0.75;
    let tau = (wm * wm * p + r2 * wp - 2.0 * r2 * wm) / gamma0;
    let gam = gamma0.powi(3) * (p * p * wp + r2 * p - 2.0 * p * r2);
    let scale = 1.0 / (2.0 * x2 * e * pi0 * pi0);
    Ok((scale * tau, scale * gam))
}

/// Symmetric-envelope MSEs, per unit `N0`:
/// `E/(2|x|²Π) · ((ED − G²)/γ₀, γ₀³(EB − F²))`.
pub fn mse_approx(m: &SignalMoments, x: Complex64, gamma0: f64) -> Result<(f64, f64)> {
    let x2 = check_scene(x, gamma0)?;
    let Reduced { e, p, w, .. } = m.reduced();
    let pi = m.pi_norm;
    if pi <= 0.0 || !pi.is_finite() {
        return Err(RsfError::Singular("Π = 0".into()));
    }
    let scale = 1.0 / (2.0 * x2 * e * pi);
    Ok((scale * w / gamma0, scale * gamma0.powi(3) * p))
}

/// Cramér–Rao bounds on `(τ, γ)` with the complex scattering coefficient
/// treated as a nuisance parameter.
///
/// Computed by inverting the 2×2 Fisher information after projecting out `x`
/// rather than through the closed form, so that comparing it to
/// [`mse_approx`] checks the algebra.
pub fn crlb(m: &SignalMoments, x: Complex64, gamma0: f64, n0: f64) -> Result<(f64, f64)> {
    let x2 = check_scene(x, gamma0)?;
    if !(n0 >= 0.0 && n0.is_finite()) {
        return Err(RsfError::validation("n0", "noise PSD must be finite and non-negative"));
    }
    let Reduced { e, p, r, w } = m.reduced();
    // Fisher information per unit N0:
    //   J = 2|x|² E [[γ P, −R/γ], [−R/γ, W/γ³]]
    let s = 2.0 * x2 * e;
    let j11 = s * gamma0 * p;
    let j12 = -s * r / gamma0;
    let j22 = s * w / gamma0.powi(3);
    let det = j11 * j22 - j12 * j12;
    if det <= 0.0 || !det.is_finite() {
        return Err(RsfError::Singular("Fisher information is singular".into()));
    }
    Ok((n0 * j22 / det, n0 * j11 / det))
}

// ── Compact RSF / OFDM / monotone forms ─────────────────────────────

/// Shifted envelope moments and pulse-train statistics.
///
/// `S_i^(0) = ∫(t − T/2 − Std{T_k})^i β²` and likewise `S_i^(1)` with `β̇²`,
/// where `T_k = kT_r + T/2`.  For a symmetric envelope the Std shift turns
/// `S_2` into `∫(t−T/2)²β² + Var{T_k}∫β²`, which is what the compact MSEs
/// need.  The `*_centered` fields drop the shift and are kept for
/// diagnostics only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SIntegrals {
    pub s0_0: f64,
    pub s2_0: f64,
    pub s0_1: f64,
    pub s2_1: f64,
    pub s2_0_centered: f64,
    pub s2_1_centered: f64,
    pub std_tk: f64,
    pub mean_tk: f64,
    pub mean_fk2: f64,
    pub var_fk: f64,
    /// Number of carriers the frequency statistics were taken over.
    pub n_freqs: usize,
}

pub fn s_integrals(env: &Envelope, k: usize, tr: f64, freqs: &[f64]) -> Result<SIntegrals> {
    if !env.is_symmetric() {
        return Err(RsfError::validation(
            "envelope",
            "compact MSEs need a symmetric envelope β(t) = β(T − t)",
        ));
    }
    if k == 0 || freqs.is_empty() {
        return Err(RsfError::validation("k_pulses", "need at least one pulse and one carrier"));
    }
    let t = env.duration();
    let tk: Vec<f64> = (0..k).map(|i| i as f64 * tr + 0.5 * t).collect();
    let std_tk = stats::std(&tk);
    let shift = 0.5 * t + std_tk;
    let integ = |pow: i32, centre: f64, deriv: bool| {
        adaptive_simpson(
            |u| {
                let b = if deriv { env.deriv(u) } else { env.value(u) };
                (u - centre).powi(pow) * b * b
            },
            0.0,
            t,
            QUAD_REL_TOL,
        )
    };
    Ok(SIntegrals {
        s0_0: integ(0, shift, false)?,
        s2_0: integ(2, shift, false)?,
        s0_1: integ(0, shift, true)?,
        s2_1: integ(2, shift, true)?,
        s2_0_centered: integ(2, 0.5 * t, false)?,
        s2_1_centered: integ(2, 0.5 * t, true)?,
        std_tk,
        mean_tk: stats::mean(&tk),
        mean_fk2: stats::mean_sq(freqs),
        var_fk: stats::var(freqs),
        n_freqs: freqs.len(),
    })
}

/// S-integrals for a waveform (carriers for RSF/monotone, subcarriers for OFDM).
pub fn s_integrals_for(spec: &WaveformSpec) -> Result<SIntegrals> {
    s_integrals(&spec.envelope, spec.k_pulses, spec.tr_s, &spec.carrier_freqs())
}

fn compact(s00: f64, s01: f64, s20: f64, s21: f64, var_f: f64, mean_f2: f64, mean_tk: f64, k: usize, x2: f64, gamma0: f64) -> (f64, f64) {
    let kf = k as f64;
    let delay_spread = s01 + FOUR_PI2 * var_f * s00;
    let doppler = s21 + FOUR_PI2 * mean_f2 * s20;
    let tau = (1.0 / delay_spread + mean_tk * mean_tk / doppler) / (2.0 * gamma0 * x2 * kf);
    let gam = gamma0.powi(3) / (2.0 * x2 * kf * doppler);
    (tau, gam)
}

/// Compact RSF MSEs per unit `N0`.
pub fn compact_mse_rsf(si: &SIntegrals, k: usize, x: Complex64, gamma0: f64) -> Result<(f64, f64)> {
    let x2 = check_scene(x, gamma0)?;
    Ok(compact(si.s0_0, si.s0_1, si.s2_0, si.s2_1, si.var_fk, si.mean_fk2, si.mean_tk, k, x2, gamma0))
}

/// Compact MSEs for a constant-carrier train: `Var{f} = 0`, `mean{f²} = f0²`.
pub fn compact_mse_monotone(si: &SIntegrals, k: usize, x: Complex64, gamma0: f64, f0: f64) -> Result<(f64, f64)> {
    let x2 = check_scene(x, gamma0)?;
    let kf = k as f64;
    let doppler = si.s2_1 + FOUR_PI2 * f0 * f0 * si.s2_0;
    let tau = (1.0 / si.s0_1 + si.mean_tk * si.mean_tk / doppler) / (2.0 * gamma0 * x2 * kf);
    let gam = gamma0.powi(3) / (2.0 * x2 * kf * doppler);
    Ok((tau, gam))
}

/// Compact OFDM MSEs per unit `N0`; `si` must be built over the `L`
/// subcarriers.
pub fn compact_mse_ofdm(si: &SIntegrals, k: usize, l: usize, x: Complex64, gamma0: f64) -> Result<(f64, f64)> {
    let x2 = check_scene(x, gamma0)?;
    if si.n_freqs != l {
        return Err(RsfError::validation(
            "subcarriers",
            format!("S-integrals were built over {} carriers, expected L = {l}", si.n_freqs),
        ));
    }
    Ok(compact(si.s0_0, si.s0_1, si.s2_0, si.s2_1, si.var_fk, si.mean_fk2, si.mean_tk, k, x2, gamma0))
}

/// Compact MSEs with the S₂ integrals centred at `T/2` instead of shifted by
/// `Std{T_k}`. Diagnostic only.
pub fn compact_mse_centered(si: &SIntegrals, k: usize, x: Complex64, gamma0: f64) -> Result<(f64, f64)> {
    let x2 = check_scene(x, gamma0)?;
    Ok(compact(
        si.s0_0,
        si.s0_1,
        si.s2_0_centered,
        si.s2_1_centered,
        si.var_fk,
        si.mean_fk2,
        si.mean_tk,
        k,
        x2,
        gamma0,
    ))
}

/// Relative residual of `B − F²/E = K[S₀⁽¹⁾ + 4π²Var{f_k}S₀⁽⁰⁾]`.
pub fn identity_b_minus_f2e(m: &SignalMoments, si: &SIntegrals, k: usize) -> f64 {
    let lhs = m.b - m.f * m.f / m.e;
    let rhs = k as f64 * (si.s0_1 + FOUR_PI2 * si.var_fk * si.s0_0);
    ((lhs - rhs) / lhs).abs()
}

/// Empirical `Cov{k^i, d_k^j}` for i, j ∈ {1, 2}, in the order
/// `(1,1), (1,2), (2,1), (2,2)`.
pub fn index_code_covariances(d: &[f64]) -> [f64; 4] {
    let k1: Vec<f64> = (0..d.len()).map(|i| i as f64).collect();
    let k2: Vec<f64> = k1.iter().map(|k| k * k).collect();
    let d2: Vec<f64> = d.iter().map(|v| v * v).collect();
    [
        stats::cov(&k1, d),
        stats::cov(&k1, &d2),
        stats::cov(&k2, d),
        stats::cov(&k2, &d2),
    ]
}

// ── Report ──────────────────────────────────────────────────────────

/// Everything the theory side says about one waveform and scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub kind: WaveformKind,
    pub n0: f64,
    pub mse_tau_exact: f64,
    pub mse_gamma_exact: f64,
    pub mse_tau_approx: f64,
    pub mse_gamma_approx: f64,
    pub crlb_tau: f64,
    pub crlb_gamma: f64,
    /// Compact form for the waveform kind (absent for asymmetric envelopes).
    pub compact_tau: Option<f64>,
    pub compact_gamma: Option<f64>,
    pub de_ratio: f64,
    pub identity_residual: Option<f64>,
    /// Relative deviation of the compact delay MSE from `mse_approx`,
    /// verbatim Std shift and T/2-centred variant.
    pub shift_dev_verbatim: Option<f64>,
    pub shift_dev_centered: Option<f64>,
}

/// Computes every theoretical quantity. MSE fields are per unit `N0`; CRLB
/// fields are absolute for the given `n0`.
pub fn theory_report(spec: &WaveformSpec, x: Complex64, gamma0: f64, n0: f64) -> Result<TheoryReport> {
    let m = signal_moments(spec)?;
    let (mse_tau_exact, mse_gamma_exact) = mse_exact(&m, x, gamma0)?;
    let (mse_tau_approx, mse_gamma_approx) = mse_approx(&m, x, gamma0)?;
    let (crlb_tau, crlb_gamma) = crlb(&m, x, gamma0, n0)?;
    let mut report = TheoryReport {
        kind: spec.kind,
        n0,
        mse_tau_exact,
        mse_gamma_exact,
        mse_tau_approx,
        mse_gamma_approx,
        crlb_tau,
        crlb_gamma,
        compact_tau: None,
        compact_gamma: None,
        de_ratio: m.de_ratio(),
        identity_residual: None,
        shift_dev_verbatim: None,
        shift_dev_centered: None,
    };
    if spec.envelope.is_symmetric() {
        let si = s_integrals_for(spec)?;
        let (ct, cg) = compact_for(spec, &si, x, gamma0)?;
        report.compact_tau = Some(ct);
        report.compact_gamma = Some(cg);
        if spec.kind != WaveformKind::Ofdm {
            report.identity_residual = Some(identity_b_minus_f2e(&m, &si, spec.k_pulses));
        }
        let (centred, _) = compact_mse_centered(&si, spec.k_pulses, x, gamma0)?;
        report.shift_dev_verbatim = Some(ct / mse_tau_approx - 1.0);
        report.shift_dev_centered = Some(centred / mse_tau_approx - 1.0);
    }
    Ok(report)
}

/// The compact formula matching the waveform kind.
pub fn compact_for(spec: &WaveformSpec, si: &SIntegrals, x: Complex64, gamma0: f64) -> Result<(f64, f64)> {
    match spec.kind {
        WaveformKind::Rsf => compact_mse_rsf(si, spec.k_pulses, x, gamma0),
        WaveformKind::Monotone => compact_mse_monotone(si, spec.k_pulses, x, gamma0, spec.f0_hz),
        WaveformKind::Ofdm => compact_mse_ofdm(si, spec.k_pulses, si.n_freqs, x, gamma0),
    }
}

/// Compact MSEs of a waveform, per unit `N0`.
pub fn compact_mse(spec: &WaveformSpec, x: Complex64, gamma0: f64) -> Result<(f64, f64)> {
    let si = s_integrals_for(spec)?;
    compact_for(spec, &si, x, gamma0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{half_integer_alphabet, make_codeword, Codeword, Generator};
    use approx::assert_relative_eq;

    const T: f64 = 1e-6;
    const TR: f64 = 4e-6;
    const G0: f64 = 0.91;

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    fn env() -> Envelope {
        Envelope::poly_smooth(T)
    }

    fn costas(seed: u64) -> WaveformSpec {
        let cw = make_codeword(Generator::Costas, 6, &half_integer_alphabet(6), seed).unwrap();
        WaveformSpec::rsf(20e6, 2e6, TR, env(), cw).unwrap()
    }

    // Beta-function oracle: ∫β² = T¹³·6!6!/13!
    fn beta_sq_integral() -> f64 {
        518_400.0 / 6_227_020_800.0 * T.powi(13)
    }

    #[test]
    fn energy_matches_beta_function() {
        let m = signal_moments(&costas(1)).unwrap();
        assert_relative_eq!(m.e, 6.0 * beta_sq_integral(), max_relative = 1e-9);
        assert_relative_eq!(m.e / 6.0 / T.powi(13), 8.32496e-5, max_relative = 1e-5);
    }

    #[test]
    fn f_integral_closed_form() {
        let spec = costas(2);
        let m = signal_moments(&spec).unwrap();
        let sum_f: f64 = spec.carrier_freqs().iter().sum();
        assert_relative_eq!(m.f, -2.0 * PI * sum_f * beta_sq_integral(), max_relative = 1e-9);
    }

    #[test]
    fn closed_form_moments_match_full_quadrature() {
        let spec = costas(3);
        let a = signal_moments(&spec).unwrap();
        let b = signal_moments_quadrature(&spec).unwrap();
        for (x, y) in [(a.b, b.b), (a.c, b.c), (a.d, b.d), (a.e, b.e), (a.f, b.f), (a.g, b.g)] {
            assert_relative_eq!(x, y, max_relative = 1e-8);
        }
    }

    #[test]
    fn time_shift_substitution() {
        let m = signal_moments(&costas(4)).unwrap();
        let ts = 3.3e-6;
        let s = m.shifted(ts);
        assert_eq!(s.b, m.b);
        assert_eq!(s.e, m.e);
        assert_eq!(s.f, m.f);
        assert_relative_eq!(s.c, m.c + ts * m.b, max_relative = 1e-14);
        assert_relative_eq!(s.g, m.g + ts * m.f, max_relative = 1e-14);
        assert_relative_eq!(s.d, m.d + 2.0 * ts * m.c + ts * ts * m.b, max_relative = 1e-14);
    }

    #[test]
    fn cauchy_schwarz_positivity() {
        for seed in 0..10 {
            let m = signal_moments(&costas(seed)).unwrap();
            assert!(m.e * m.b - m.f * m.f > 0.0);
            assert!(m.e * m.d - m.g * m.g > 0.0);
            assert!(m.pi_norm > 0.0);
        }
    }

    #[test]
    fn s_integrals_reference_scene() {
        let spec = costas(5);
        let si = s_integrals_for(&spec).unwrap();
        assert_relative_eq!(si.std_tk, 6.831_30e-6, max_relative = 1e-5);
        assert_relative_eq!(si.mean_tk, 1.05e-5, max_relative = 1e-12);
        assert_relative_eq!(si.s0_0, beta_sq_integral(), max_relative = 1e-9);
        assert_relative_eq!(si.var_fk, 4e12 * 17.5 / 6.0, max_relative = 1e-12);
        assert_relative_eq!(si.var_fk, 1.166_67e13, max_relative = 1e-5);
        // Std shift adds Var{T_k}·∫β² to the centred second moment.
        let var_tk = si.std_tk * si.std_tk;
        assert_relative_eq!(si.s2_0, si.s2_0_centered + var_tk * si.s0_0, max_relative = 1e-9);
    }

    #[test]
    fn asymmetric_envelope_rejected_for_compact() {
        let skew = Envelope::Custom(crate::waveform::CustomEnvelope::new(
            T,
            false,
            |t| t * t * (T - t),
            |t| 2.0 * t * (T - t) - t * t,
        ));
        assert!(s_integrals(&skew, 6, TR, &[20e6; 6]).is_err());
    }

    #[test]
    fn approx_zero_cross_terms() {
        let m = SignalMoments::from_integrals(3.0, 0.0, 7.0, 2.0, 0.0, 0.0);
        let (t, g) = mse_approx(&m, one(), G0).unwrap();
        assert_relative_eq!(t, 1.0 / (2.0 * G0 * 3.0), max_relative = 1e-14);
        assert_relative_eq!(g, G0.powi(3) / (2.0 * 7.0), max_relative = 1e-14);
    }

    #[test]
    fn exact_zero_cross_terms() {
        // C = F = G = 0 leaves p = B/E, w = D/E, r = 0 and Π₀/E⁴ = p(w − 5/4).
        let m = SignalMoments::from_integrals(3.0, 0.0, 7.0, 2.0, 0.0, 0.0);
        let (p, w, e): (f64, f64, f64) = (1.5, 3.5, 2.0);
        let (t, g) = mse_exact(&m, one(), G0).unwrap();
        let pi0 = p * (w - 1.25);
        assert_relative_eq!(t, (w - 1.25).powi(2) * p / G0 / (2.0 * e * pi0 * pi0), max_relative = 1e-14);
        assert_relative_eq!(t, 1.0 / (2.0 * G0 * e * p), max_relative = 1e-14);
        assert_relative_eq!(
            g,
            G0.powi(3) * (w + 0.75) / (2.0 * e * (w - 1.25).powi(2)),
            max_relative = 1e-14
        );
    }

    #[test]
    fn product_identity() {
        let m = signal_moments(&costas(6)).unwrap();
        let (t, g) = mse_approx(&m, one(), 1.0).unwrap();
        let (eb, ed, ec) = (m.e * m.b - m.f * m.f, m.e * m.d - m.g * m.g, m.e * m.c - m.f * m.g);
        // Everything divided by E² per factor to stay inside the f64 range.
        let e2 = m.e * m.e;
        let pi = (eb / e2) * (ed / e2) - (ec / e2).powi(2);
        let want = (eb / e2) * (ed / e2) / (4.0 * pi * pi * e2);
        assert_relative_eq!(t * g, want, max_relative = 1e-9);
    }

    #[test]
    fn exact_close_to_approx_at_reference_scene() {
        let m = signal_moments(&costas(7)).unwrap();
        assert!(m.de_ratio() > 1e3);
        let (ta, ga) = mse_approx(&m, one(), G0).unwrap();
        let (te, ge) = mse_exact(&m, one(), G0).unwrap();
        assert_relative_eq!(te, ta, max_relative = 1e-3);
        assert_relative_eq!(ge, ga, max_relative = 1e-3);
    }

    #[test]
    fn amplitude_law() {
        let m = signal_moments(&costas(8)).unwrap();
        let x2 = Complex64::new(2.0, 0.0);
        let a = mse_exact(&m, one(), G0).unwrap();
        let b = mse_exact(&m, x2, G0).unwrap();
        assert_relative_eq!(b.0, a.0 / 4.0, max_relative = 1e-14);
        assert_relative_eq!(b.1, a.1 / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn crlb_linear_in_n0_and_equal_to_approx() {
        let m = signal_moments(&costas(9)).unwrap();
        let a = crlb(&m, one(), G0, 1e-80).unwrap();
        let b = crlb(&m, one(), G0, 2e-80).unwrap();
        assert_relative_eq!(b.0, 2.0 * a.0, max_relative = 1e-14);
        assert_relative_eq!(b.1, 2.0 * a.1, max_relative = 1e-14);
        let ap = mse_approx(&m, one(), G0).unwrap();
        assert_relative_eq!(a.0, ap.0 * 1e-80, max_relative = 1e-12);
        assert_relative_eq!(a.1, ap.1 * 1e-80, max_relative = 1e-12);
    }

    #[test]
    fn monotone_is_zero_step_limit() {
        let cw = make_codeword(Generator::Costas, 6, &half_integer_alphabet(6), 1).unwrap();
        let flat = WaveformSpec::rsf(20e6, 0.0, TR, env(), cw).unwrap();
        let mono = WaveformSpec::monotone(20e6, 6, TR, env()).unwrap();
        let si_flat = s_integrals_for(&flat).unwrap();
        let si_mono = s_integrals_for(&mono).unwrap();
        let a = compact_mse_rsf(&si_flat, 6, one(), G0).unwrap();
        let b = compact_mse_monotone(&si_mono, 6, one(), G0, 20e6).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn monotone_identity_is_exact() {
        let mono = WaveformSpec::monotone(20e6, 6, TR, env()).unwrap();
        let m = signal_moments(&mono).unwrap();
        let si = s_integrals_for(&mono).unwrap();
        assert!(identity_b_minus_f2e(&m, &si, 6) < 1e-9);
    }

    #[test]
    fn identity_holds_for_random_codewords() {
        let c = half_integer_alphabet(6);
        for seed in 0..20 {
            let cw = make_codeword(Generator::UniformRandom, 6, &c, seed).unwrap();
            let spec = WaveformSpec::rsf(20e6, 2e6, TR, env(), cw).unwrap();
            let m = signal_moments(&spec).unwrap();
            let si = s_integrals_for(&spec).unwrap();
            assert!(identity_b_minus_f2e(&m, &si, 6) < 1e-6);
        }
    }

    #[test]
    fn dumbbell_beats_costas_on_delay() {
        let c = half_integer_alphabet(6);
        let dumb = WaveformSpec::rsf(20e6, 2e6, TR, env(), make_codeword(Generator::Dumbbell, 6, &c, 0).unwrap()).unwrap();
        let (dt, dg) = compact_mse(&dumb, one(), G0).unwrap();
        let (ct, cg) = compact_mse(&costas(0), one(), G0).unwrap();
        assert!(dt < ct);
        // Doppler MSEs follow mean{f_k²}: 4.25e14 vs 4.1167e14 Hz².
        let ratio = dg / cg;
        assert_relative_eq!(ratio, 0.968_7, max_relative = 2e-3);
    }

    #[test]
    fn vanishing_index_code_covariances_make_compact_exact() {
        // Thue–Morse signs kill Cov{k^i, d^j} for i, j ≤ 2 at K = 8.
        let tm = [1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0].map(|s: f64| 2.5 * s);
        for c in index_code_covariances(&tm) {
            assert!(c.abs() < 1e-12);
        }
        let cw = Codeword::explicit(tm.to_vec(), vec![-2.5, 2.5]).unwrap();
        let spec = WaveformSpec::rsf(20e6, 2e6, TR, env(), cw).unwrap();
        let m = signal_moments(&spec).unwrap();
        let (at, ag) = mse_approx(&m, one(), G0).unwrap();
        let (ct, cg) = compact_mse(&spec, one(), G0).unwrap();
        assert_relative_eq!(ct, at, max_relative = 1e-6);
        assert_relative_eq!(cg, ag, max_relative = 1e-6);
    }

    #[test]
    fn ofdm_compact_equals_rsf_on_same_carriers() {
        let c = half_integer_alphabet(6);
        let sub = Codeword::explicit(c.clone(), c.clone()).unwrap();
        let ofdm = WaveformSpec::ofdm(20e6, 2e6, 6, TR, env(), sub).unwrap();
        let a = compact_mse(&ofdm, one(), G0).unwrap();
        let b = compact_mse(&costas(3), one(), G0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn f0_scaling_of_doppler_mse() {
        let c = half_integer_alphabet(6);
        let cw = make_codeword(Generator::Costas, 6, &c, 0).unwrap();
        let lo = WaveformSpec::rsf(20e6, 2e6, TR, env(), cw.clone()).unwrap();
        let hi = WaveformSpec::rsf(40e6, 2e6, TR, env(), cw).unwrap();
        let r = compact_mse(&hi, one(), G0).unwrap().1 / compact_mse(&lo, one(), G0).unwrap().1;
        assert!((0.24..=0.30).contains(&r), "ratio {r}");
    }

    #[test]
    fn monotone_delay_worse_than_rsf() {
        let mono = WaveformSpec::monotone(20e6, 6, TR, env()).unwrap();
        let (mt, _) = compact_mse(&mono, one(), G0).unwrap();
        for seed in 0..10 {
            let cw = make_codeword(Generator::UniformRandom, 6, &half_integer_alphabet(6), seed).unwrap();
            if cw.variance() == 0.0 {
                continue;
            }
            let spec = WaveformSpec::rsf(20e6, 2e6, TR, env(), cw).unwrap();
            assert!(compact_mse(&spec, one(), G0).unwrap().0 < mt);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn crlb_is_approx_times_n0(
                f0 in 16e6..40e6f64,
                df in 0.5e6..6e6f64,
                seed in any::<u64>(),
                amp in 0.1..3.0f64,
                g0 in 0.85..0.97f64,
                n0_exp in -12.0..-3.0f64,
            ) {
                let cw = make_codeword(Generator::Costas, 6, &half_integer_alphabet(6), seed).unwrap();
                let spec = WaveformSpec::rsf(f0, df, TR, env(), cw).unwrap();
                let m = signal_moments(&spec).unwrap();
                let x = Complex64::from_polar(amp, 0.7);
                let n0 = 10f64.powf(n0_exp);
                let (at, ag) = mse_approx(&m, x, g0).unwrap();
                let (ct, cg) = crlb(&m, x, g0, n0).unwrap();
                prop_assert!((ct / (at * n0) - 1.0).abs() < 1e-9);
                prop_assert!((cg / (ag * n0) - 1.0).abs() < 1e-9);
            }

            #[test]
            fn monotone_delay_mse_exceeds_costas(seed in any::<u64>(), df in 0.5e6..6e6f64) {
                let cw = make_codeword(Generator::Costas, 6, &half_integer_alphabet(6), seed).unwrap();
                let rsf = WaveformSpec::rsf(20e6, df, TR, env(), cw).unwrap();
                let mono = WaveformSpec::monotone(20e6, 6, TR, env()).unwrap();
                let (rt, _) = compact_mse(&rsf, one(), G0).unwrap();
                let (mt, _) = compact_mse(&mono, one(), G0).unwrap();
                prop_assert!(mt > rt);
            }

            #[test]
            fn mse_scales_inversely_with_power(amp in 0.1..5.0f64, phase in -3.0..3.0f64, seed in any::<u64>()) {
                let m = signal_moments(&costas(seed)).unwrap();
                let (t1, g1) = mse_approx(&m, one(), G0).unwrap();
                let (t, g) = mse_approx(&m, Complex64::from_polar(amp, phase), G0).unwrap();
                prop_assert!((t * amp * amp / t1 - 1.0).abs() < 1e-12);
                prop_assert!((g * amp * amp / g1 - 1.0).abs() < 1e-12);
            }
        }
    }
}
