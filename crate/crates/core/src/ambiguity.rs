//! Discrete wideband ambiguity function and the two-stage peak estimator.
//!
//! `A(τ, γ) = Σ_n y_n · s*(γ(t_n − τ))`.  Only samples whose stretched time
//! lands inside a pulse contribute, so every evaluation walks the `K` pulse
//! windows instead of the full record.
//!
//! The estimator maximizes `γ|A|²` by default rather than `|A|²`.  For a
//! stretched replica `‖s(γ·)‖² = E/γ`, so `γ|A|²` is the matched-filter
//! statistic normalized by replica energy: it peaks exactly at `(τ0, γ0)` on a
//! noiseless echo, whereas `|A|²` has a slope of `−|A|²/γ0` in `γ` there and
//! its peak sits slightly below `γ0`.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::SamplingSpec;
use crate::error::{Result, RsfError};
use crate::waveform::{PulseLayout, WaveformSpec};

/// Relative stationarity residual below which a refined peak counts as
/// converged.
pub const STATIONARITY_TOL: f64 = 1e-6;

const INV_PHI: f64 = 0.618_033_988_749_894_8;
const MAX_PHASES: usize = 16;

/// Function maximized by [`estimate_peak`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `γ|A|²`, unbiased on a noiseless echo.
    #[default]
    ScaleCompensated,
    /// `|A|²`.
    Raw,
}

impl Objective {
    #[inline]
    fn eval(self, a: Complex64, gamma: f64) -> f64 {
        match self {
            Objective::ScaleCompensated => gamma * a.norm_sqr(),
            Objective::Raw => a.norm_sqr(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRegion {
    pub tau_min: f64,
    pub tau_max: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Coarse grid steps.
    pub d_tau: f64,
    pub d_gamma: f64,
    /// Refinement tolerances.
    pub eps_tau: f64,
    pub eps_gamma: f64,
    pub max_iter: usize,
    #[serde(default)]
    pub objective: Objective,
}

impl SearchRegion {
    /// `τ0 ± 0.5 µs`, `γ ∈ [0.85, 0.97]`, `dτ = Δ/2` and a Doppler step that
    /// keeps the carrier phase drift across the stretched train under π/4.
    pub fn default_for(spec: &WaveformSpec, tau0: f64, delta_s: f64) -> Result<Self> {
        let (gamma_min, gamma_max) = (0.85, 0.97);
        let region = SearchRegion {
            tau_min: tau0 - 0.5e-6,
            tau_max: tau0 + 0.5e-6,
            gamma_min,
            gamma_max,
            d_tau: 0.5 * delta_s,
            d_gamma: default_d_gamma(spec, gamma_min),
            eps_tau: 1e-11,
            eps_gamma: 1e-7,
            max_iter: 60,
            objective: Objective::ScaleCompensated,
        };
        region.validate()?;
        Ok(region)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.tau_min,
            self.tau_max,
            self.gamma_min,
            self.gamma_max,
            self.d_tau,
            self.d_gamma,
            self.eps_tau,
            self.eps_gamma,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(RsfError::validation("region", "all bounds and steps must be finite"));
        }
        if self.tau_min >= self.tau_max {
            return Err(RsfError::validation("region.tau_min", "must be below tau_max"));
        }
        if !(self.gamma_min > 0.0 && self.gamma_min < self.gamma_max) {
            return Err(RsfError::validation("region.gamma_min", "need 0 < gamma_min < gamma_max"));
        }
        if !(self.d_tau > 0.0 && self.d_gamma > 0.0) {
            return Err(RsfError::validation("region.d_tau", "coarse steps must be > 0"));
        }
        if !(self.eps_tau > 0.0 && self.eps_gamma > 0.0) {
            return Err(RsfError::validation("region.eps_tau", "tolerances must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(RsfError::validation("region.max_iter", "must be >= 1"));
        }
        Ok(())
    }

    pub fn contains(&self, tau: f64, gamma: f64) -> bool {
        (self.tau_min..=self.tau_max).contains(&tau) && (self.gamma_min..=self.gamma_max).contains(&gamma)
    }

    pub fn n_tau(&self) -> usize {
        grid_len(self.tau_max - self.tau_min, self.d_tau)
    }

    pub fn n_gamma(&self) -> usize {
        grid_len(self.gamma_max - self.gamma_min, self.d_gamma)
    }

    #[inline]
    pub fn tau_at(&self, i: usize) -> f64 {
        self.tau_min + i as f64 * self.d_tau
    }

    #[inline]
    pub fn gamma_at(&self, i: usize) -> f64 {
        self.gamma_min + i as f64 * self.d_gamma
    }

    /// Same region with both coarse steps divided by `factor`.
    pub fn refined_grid(&self, factor: f64) -> Self {
        SearchRegion {
            d_tau: self.d_tau / factor,
            d_gamma: self.d_gamma / factor,
            ..*self
        }
    }
}

/// `1/(8·f0·T_span)` with `T_span` the train length stretched by `1/γ_min`.
pub fn default_d_gamma(spec: &WaveformSpec, gamma_min: f64) -> f64 {
    1.0 / (8.0 * spec.f0_hz * spec.span() / gamma_min)
}

fn grid_len(width: f64, step: f64) -> usize {
    (width / step + 1e-9).floor() as usize + 1
}

/// Result of [`estimate_peak`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub tau_hat: f64,
    pub gamma_hat: f64,
    pub peak_abs_a: f64,
    /// `∂|A|²/∂τ`, `∂|A|²/∂γ` at the estimate.
    pub grad_af: [f64; 2],
    /// Gradient of the maximized objective at the estimate.
    pub grad_objective: [f64; 2],
    /// `max(|∂τJ|·ε_τ, |∂γJ|·ε_γ) / J`.
    pub stationarity: f64,
    pub converged: bool,
    /// `(τ index, γ index)` of the winning coarse cell.
    pub coarse_cell: (usize, usize),
    pub iterations: usize,
}

/// AF evaluator bound to one received record.
pub struct Ambiguity<'a> {
    y: &'a [Complex64],
    layout: PulseLayout,
    samp: SamplingSpec,
}

impl<'a> Ambiguity<'a> {
    pub fn new(y: &'a [Complex64], spec: &WaveformSpec, samp: &SamplingSpec) -> Result<Self> {
        spec.validate()?;
        samp.validate()?;
        if y.len() != samp.n_samples {
            return Err(RsfError::validation(
                "samples",
                format!("record has {} samples, grid expects {}", y.len(), samp.n_samples),
            ));
        }
        Ok(Ambiguity {
            y,
            layout: spec.layout(),
            samp: *samp,
        })
    }

    /// Sample indices whose stretched time falls inside pulse `k`.
    #[inline]
    fn window(&self, k: usize, tau: f64, gamma: f64) -> Option<(usize, usize)> {
        let start = k as f64 * self.layout.tr;
        let lo = tau + start / gamma - self.samp.t0_s;
        let hi = tau + (start + self.layout.t) / gamma - self.samp.t0_s;
        let n_lo = (lo / self.samp.delta_s).ceil().max(0.0);
        let n_hi = (hi / self.samp.delta_s).floor().min(self.samp.n_samples as f64 - 1.0);
        (n_lo <= n_hi).then_some((n_lo as usize, n_hi as usize))
    }

    pub fn value(&self, tau: f64, gamma: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..self.layout.k {
            let Some((a, b)) = self.window(k, tau, gamma) else { continue };
            let off = k as f64 * self.layout.tr;
            for n in a..=b {
                let u = gamma * (self.samp.time(n) - tau) - off;
                acc += self.y[n] * self.layout.pulse_value(k, u).conj();
            }
        }
        acc
    }

    /// `A`, `∂A/∂τ`, `∂A/∂γ`.
    pub fn value_and_partials(&self, tau: f64, gamma: f64) -> (Complex64, Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let (mut a, mut sum_d, mut sum_td) = (zero, zero, zero);
        for k in 0..self.layout.k {
            let Some((lo, hi)) = self.window(k, tau, gamma) else { continue };
            let off = k as f64 * self.layout.tr;
            for n in lo..=hi {
                let dt = self.samp.time(n) - tau;
                let u = gamma * dt - off;
                let yn = self.y[n];
                a += yn * self.layout.pulse_value(k, u).conj();
                let d = yn * self.layout.pulse_deriv(k, u).conj();
                sum_d += d;
                sum_td += d * dt;
            }
        }
        (a, sum_d * (-gamma), sum_td)
    }

    /// Partials of `|A|²`.
    pub fn sq_grad(&self, tau: f64, gamma: f64) -> [f64; 2] {
        let (a, da_t, da_g) = self.value_and_partials(tau, gamma);
        [2.0 * (a.conj() * da_t).re, 2.0 * (a.conj() * da_g).re]
    }

    /// Objective value and its gradient.
    pub fn objective_grad(&self, objective: Objective, tau: f64, gamma: f64) -> (f64, [f64; 2]) {
        let (a, da_t, da_g) = self.value_and_partials(tau, gamma);
        let a2 = a.norm_sqr();
        let g = [2.0 * (a.conj() * da_t).re, 2.0 * (a.conj() * da_g).re];
        match objective {
            Objective::Raw => (a2, g),
            Objective::ScaleCompensated => (gamma * a2, [gamma * g[0], a2 + gamma * g[1]]),
        }
    }

    #[inline]
    fn objective(&self, objective: Objective, tau: f64, gamma: f64) -> f64 {
        objective.eval(self.value(tau, gamma), gamma)
    }

    /// `|A|` over the coarse grid, indexed `[γ index][τ index]`.
    pub fn coarse_surface(&self, region: &SearchRegion) -> Vec<Vec<Complex64>> {
        let n_tau = region.n_tau();
        let q = self.samp.delta_s / region.d_tau;
        let qi = q.round();
        let fast = (q - qi).abs() < 1e-9 * q && qi >= 1.0 && qi as usize <= MAX_PHASES;
        (0..region.n_gamma())
            .map(|ig| {
                let gamma = region.gamma_at(ig);
                if fast {
                    self.coarse_row_templates(region, gamma, qi as usize, n_tau)
                } else {
                    (0..n_tau).map(|it| self.value(region.tau_at(it), gamma)).collect()
                }
            })
            .collect()
    }

    /// One γ row through shifted templates.
    ///
    /// With `dτ = Δ/q`, lag `m = a·q + r` gives `A(τ_m) = Σ_j y[j + a]·h_r[j]`
    /// where `h_r[j] = s*(γ(t0 + jΔ − τ_min − rΔ/q))`, so each of the `q`
    /// templates is synthesized once per row and reused for every lag.
    fn coarse_row_templates(&self, region: &SearchRegion, gamma: f64, q: usize, n_tau: usize) -> Vec<Complex64> {
        let delta = self.samp.delta_s;
        let n = self.samp.n_samples as i64;
        let (yr, yi): (Vec<f64>, Vec<f64>) = self.y.iter().map(|v| (v.re, v.im)).unzip();

        // templates[r] = segments (first j, re, im)
        let templates: Vec<Vec<(i64, Vec<f64>, Vec<f64>)>> = (0..q)
            .map(|r| {
                let shift = region.tau_min + r as f64 * delta / q as f64 - self.samp.t0_s;
                (0..self.layout.k)
                    .map(|k| {
                        let off = k as f64 * self.layout.tr;
                        let lo = ((shift + off / gamma) / delta).ceil() as i64;
                        let hi = ((shift + (off + self.layout.t) / gamma) / delta).floor() as i64;
                        let (mut re, mut im) = (Vec::new(), Vec::new());
                        for j in lo..=hi {
                            let u = gamma * (j as f64 * delta - shift) - off;
                            let h = self.layout.pulse_value(k, u).conj();
                            re.push(h.re);
                            im.push(h.im);
                        }
                        (lo, re, im)
                    })
                    .collect()
            })
            .collect();

        (0..n_tau)
            .map(|m| {
                let (a, r) = ((m / q) as i64, m % q);
                let mut acc = Complex64::new(0.0, 0.0);
                for (j0, hr, hi) in &templates[r] {
                    // Clip j + a to [0, n).
                    let first = (-(j0 + a)).max(0) as usize;
                    let last = ((n - (j0 + a)).min(hr.len() as i64)).max(0) as usize;
                    if first >= last {
                        continue;
                    }
                    let base = (j0 + a) as usize;
                    acc += dot_split(
                        &yr[base + first..base + last],
                        &yi[base + first..base + last],
                        &hr[first..last],
                        &hi[first..last],
                    );
                }
                acc
            })
            .collect()
    }

    /// Two-stage peak search: coarse argmax, then alternating golden-section
    /// refinement inside the 3×3 neighbourhood of the winning cell.
    pub fn estimate_peak(&self, region: &SearchRegion) -> Result<Estimate> {
        region.validate()?;
        let obj = region.objective;
        let surface = self.coarse_surface(region);

        let mut best: Option<(f64, usize, usize)> = None;
        for it in 0..region.n_tau() {
            for (ig, row) in surface.iter().enumerate() {
                let j = obj.eval(row[it], region.gamma_at(ig));
                if best.is_none_or(|(b, _, _)| j > b) {
                    best = Some((j, it, ig));
                }
            }
        }
        let (j0, it, ig) = best.expect("grid has at least one point");
        if j0 == 0.0 {
            return Err(RsfError::NoEcho("ambiguity surface is zero over the whole search region".into()));
        }

        let t_lo = (region.tau_at(it) - region.d_tau).max(region.tau_min);
        let t_hi = (region.tau_at(it) + region.d_tau).min(region.tau_max);
        let g_lo = (region.gamma_at(ig) - region.d_gamma).max(region.gamma_min);
        let g_hi = (region.gamma_at(ig) + region.d_gamma).min(region.gamma_max);

        let (mut tau, mut gamma, mut jcur) = (region.tau_at(it), region.gamma_at(ig), j0);
        let mut iterations = 0;
        while iterations < region.max_iter {
            iterations += 1;
            let (tau_start, gamma_start) = (tau, gamma);

            let (t, jt) = golden_max(|t| self.objective(obj, t, gamma), t_lo, t_hi, 0.25 * region.eps_tau);
            if jt > jcur {
                tau = t;
                jcur = jt;
            }
            let (g, jg) = golden_max(|g| self.objective(obj, tau, g), g_lo, g_hi, 0.25 * region.eps_gamma);
            if jg > jcur {
                gamma = g;
                jcur = jg;
            }

            // Line search along this cycle's displacement to follow the ridge.
            let (dt, dg) = (tau - tau_start, gamma - gamma_start);
            if dt != 0.0 || dg != 0.0 {
                let (s_lo, s_hi) = ridge_span(tau, gamma, dt, dg, (t_lo, t_hi), (g_lo, g_hi));
                let tol = 0.25 * ratio_min(region.eps_tau, dt, region.eps_gamma, dg);
                let (s, js) = golden_max(|s| self.objective(obj, tau + s * dt, gamma + s * dg), s_lo, s_hi, tol);
                if js > jcur {
                    tau += s * dt;
                    gamma += s * dg;
                    jcur = js;
                }
            }

            if (tau - tau_start).abs() < region.eps_tau && (gamma - gamma_start).abs() < region.eps_gamma {
                break;
            }
        }

        let (jval, grad) = self.objective_grad(obj, tau, gamma);
        let stationarity = if jval > 0.0 {
            (grad[0].abs() * region.eps_tau).max(grad[1].abs() * region.eps_gamma) / jval
        } else {
            f64::INFINITY
        };
        Ok(Estimate {
            tau_hat: tau,
            gamma_hat: gamma,
            peak_abs_a: self.value(tau, gamma).norm(),
            grad_af: self.sq_grad(tau, gamma),
            grad_objective: grad,
            stationarity,
            converged: stationarity < STATIONARITY_TOL,
            coarse_cell: (it, ig),
            iterations,
        })
    }
}

/// `Σ (yr + j·yi)(hr + j·hi)` over split real/imaginary slices, with
/// independent lanes so the loop vectorizes.
#[inline]
fn dot_split(yr: &[f64], yi: &[f64], hr: &[f64], hi: &[f64]) -> Complex64 {
    const L: usize = 4;
    let (mut rr, mut ii, mut ri, mut ir) = ([0.0; L], [0.0; L], [0.0; L], [0.0; L]);
    let n = yr.len().min(yi.len()).min(hr.len()).min(hi.len());
    let (yr, yi, hr, hi) = (&yr[..n], &yi[..n], &hr[..n], &hi[..n]);
    let chunks = yr
        .chunks_exact(L)
        .zip(yi.chunks_exact(L))
        .zip(hr.chunks_exact(L).zip(hi.chunks_exact(L)));
    for ((a, b), (h, g)) in chunks {
        for l in 0..L {
            rr[l] += a[l] * h[l];
            ii[l] += b[l] * g[l];
            ri[l] += a[l] * g[l];
            ir[l] += b[l] * h[l];
        }
    }
    for c in n / L * L..n {
        rr[0] += yr[c] * hr[c];
        ii[0] += yi[c] * hi[c];
        ri[0] += yr[c] * hi[c];
        ir[0] += yi[c] * hr[c];
    }
    let sum = |v: [f64; L]| (v[0] + v[1]) + (v[2] + v[3]);
    Complex64::new(sum(rr) - sum(ii), sum(ri) + sum(ir))
}

/// Range of `s` keeping `(τ + s·dt, γ + s·dg)` inside the box, capped at
/// `[−1, 3]`.
fn ridge_span(tau: f64, gamma: f64, dt: f64, dg: f64, tb: (f64, f64), gb: (f64, f64)) -> (f64, f64) {
    let (mut lo, mut hi) = (-1.0f64, 3.0f64);
    for (x, d, (a, b)) in [(tau, dt, tb), (gamma, dg, gb)] {
        if d > 0.0 {
            lo = lo.max((a - x) / d);
            hi = hi.min((b - x) / d);
        } else if d < 0.0 {
            lo = lo.max((b - x) / d);
            hi = hi.min((a - x) / d);
        }
    }
    (lo.min(0.0), hi.max(0.0))
}

fn ratio_min(eps_t: f64, dt: f64, eps_g: f64, dg: f64) -> f64 {
    let a = if dt != 0.0 { eps_t / dt.abs() } else { f64::INFINITY };
    let b = if dg != 0.0 { eps_g / dg.abs() } else { f64::INFINITY };
    a.min(b)
}

/// Golden-section maximization of `f` on `[a, b]` down to bracket width `tol`.
/// Returns the best point seen and its value.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `Σ_n y_n s*(γ(t_n − τ))`.
pub fn af_value(y: &[Complex64], spec: &WaveformSpec, samp: &SamplingSpec, tau: f64, gamma: f64) -> Result<Complex64> {
    check_gamma(gamma)?;
    Ok(Ambiguity::new(y, spec, samp)?.value(tau, gamma))
}

/// `(∂|A|²/∂τ, ∂|A|²/∂γ)` from the analytic signal derivative.
pub fn af_sq_grad(y: &[Complex64], spec: &WaveformSpec, samp: &SamplingSpec, tau: f64, gamma: f64) -> Result<[f64; 2]> {
    check_gamma(gamma)?;
    Ok(Ambiguity::new(y, spec, samp)?.sq_grad(tau, gamma))
}

pub fn estimate_peak(y: &[Complex64], spec: &WaveformSpec, samp: &SamplingSpec, region: &SearchRegion) -> Result<Estimate> {
    Ambiguity::new(y, spec, samp)?.estimate_peak(region)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(RsfError::validation("gamma", format!("must be > 0, got {gamma}")))
    }
}

/// Writes the coarse `|A|` surface as `tau,gamma,abs_A` rows.
pub fn write_surface_csv<W: Write>(mut w: W, region: &SearchRegion, surface: &[Vec<Complex64>]) -> Result<()> {
    writeln!(w, "tau,gamma,abs_A")?;
    for (ig, row) in surface.iter().enumerate() {
        for (it, a) in row.iter().enumerate() {
            writeln!(w, "{:.9e},{:.9e},{:.9e}", region.tau_at(it), region.gamma_at(ig), a.norm())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{add_noise, calibrate_noise, echo_energy, echo_samples, TargetParams};
    use crate::rng::{Purpose, StreamKey};
    use crate::waveform::{half_integer_alphabet, make_codeword, Envelope, Generator};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const TAU0: f64 = 1.48e-6;
    const G0: f64 = 0.91;
    const DELTA: f64 = 1e-8;

    struct Scene {
        spec: WaveformSpec,
        target: TargetParams,
        samp: SamplingSpec,
        region: SearchRegion,
    }

    fn scene(seed: u64) -> Scene {
        let cw = make_codeword(Generator::Costas, 6, &half_integer_alphabet(6), seed).unwrap();
        let spec = WaveformSpec::rsf(20e6, 2e6, 4e-6, Envelope::poly_smooth(1e-6), cw).unwrap();
        let target = TargetParams::new(Complex64::new(1.0, 0.0), TAU0, G0).unwrap();
        let region = SearchRegion::default_for(&spec, TAU0, DELTA).unwrap();
        let samp = SamplingSpec::covering(&spec, region.tau_max, region.gamma_min, DELTA).unwrap();
        Scene {
            spec,
            target,
            samp,
            region,
        }
    }

    fn noisy(s: &Scene, snr_db: f64, trial: u32) -> Vec<Complex64> {
        let y = echo_samples(&s.spec, &s.target, &s.samp).unwrap();
        let noise = calibrate_noise(snr_db, echo_energy(&s.spec, &s.target).unwrap(), DELTA).unwrap();
        add_noise(&y, &noise, &mut StreamKey::new(5, Purpose::Noise, 0, trial).rng())
    }

    #[test]
    fn matched_point_gives_energy() {
        let s = scene(1);
        let y = echo_samples(&s.spec, &s.target, &s.samp).unwrap();
        let es: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        let a = af_value(&y, &s.spec, &s.samp, TAU0, G0).unwrap();
        assert_relative_eq!(a.re, es, max_relative = 1e-12);
        assert!(a.im.abs() < 1e-12 * es);
    }

    #[test]
    fn zero_record_and_disjoint_support() {
        let s = scene(2);
        let zeros = vec![Complex64::new(0.0, 0.0); s.samp.n_samples];
        assert_eq!(af_value(&zeros, &s.spec, &s.samp, TAU0, G0).unwrap(), Complex64::new(0.0, 0.0));
        let y = echo_samples(&s.spec, &s.target, &s.samp).unwrap();
        assert_eq!(af_value(&y, &s.spec, &s.samp, 1.0, G0).unwrap(), Complex64::new(0.0, 0.0));
        assert!(matches!(estimate_peak(&zeros, &s.spec, &s.samp, &s.region), Err(RsfError::NoEcho(_))));
    }

    #[test]
    fn gradient_at_truth() {
        let s = scene(3);
        let y = echo_samples(&s.spec, &s.target, &s.samp).unwrap();
        let amb = Ambiguity::new(&y, &s.spec, &s.samp).unwrap();
        let a2 = amb.value(TAU0, G0).norm_sqr();
        let g = amb.sq_grad(TAU0, G0);
        // Scale of a delay partial: |A|² times the rms bandwidth, ~2e7 /s.
        assert!(g[0].abs() < 1e-6 * a2 * 2e7 * 2.0 * std::f64::consts::PI);
        // |A|² itself is not stationary in γ: its slope there is −|A|²/γ0.
        assert_relative_eq!(g[1], -a2 / G0, max_relative = 1e-3);
        let (j, gj) = amb.objective_grad(Objective::ScaleCompensated, TAU0, G0);
        assert!(gj[1].abs() * G0 < 1e-3 * j);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = scene(4);
        let y = noisy(&s, 20.0, 0);
        let amb = Ambiguity::new(&y, &s.spec, &s.samp).unwrap();
        let (ht, hg) = (1e-12, 1e-8);
        for i in 0..50 {
            let tau = TAU0 + (i as f64 / 49.0 - 0.5) * 2e-8;
            let gamma = G0 + ((i * 7 % 50) as f64 / 49.0 - 0.5) * 1e-4;
            let g = amb.sq_grad(tau, gamma);
            let f = |t, gm| amb.value(t, gm).norm_sqr();
            let ft = (f(tau + ht, gamma) - f(tau - ht, gamma)) / (2.0 * ht);
            let fg = (f(tau, gamma + hg) - f(tau, gamma - hg)) / (2.0 * hg);
            let scale_t = g[0].abs().max(ft.abs()).max(f(tau, gamma) * 1e5);
            let scale_g = g[1].abs().max(fg.abs()).max(f(tau, gamma) * 1e-2);
            assert!((g[0] - ft).abs() < 1e-4 * scale_t, "τ partial {} vs {}", g[0], ft);
            assert!((g[1] - fg).abs() < 1e-4 * scale_g, "γ partial {} vs {}", g[1], fg);
        }
    }

    #[test]
    fn fast_coarse_rows_match_direct_evaluation() {
        let s = scene(5);
        let y = noisy(&s, 10.0, 1);
        let amb = Ambiguity::new(&y, &s.spec, &s.samp).unwrap();
        let region = SearchRegion {
            gamma_min: 0.905,
            gamma_max: 0.915,
            ..s.region
        };
        let surf = amb.coarse_surface(&region);
        for (ig, row) in surf.iter().enumerate() {
            for it in (0..row.len()).step_by(17) {
                let direct = amb.value(region.tau_at(it), region.gamma_at(ig));
                let err = (row[it] - direct).norm();
                assert!(err <= 1e-9 * direct.norm().max(1e-3 * row.iter().map(|v| v.norm()).fold(0.0, f64::max)));
            }
        }
    }

    #[test]
    fn noiseless_estimate_hits_truth() {
        let s = scene(6);
        let y = echo_samples(&s.spec, &s.target, &s.samp).unwrap();
        let est = estimate_peak(&y, &s.spec, &s.samp, &s.region).unwrap();
        assert!((est.tau_hat - TAU0).abs() < 1e-11, "τ error {:e}", est.tau_hat - TAU0);
        assert!((est.gamma_hat - G0).abs() < 1e-7, "γ error {:e}", est.gamma_hat - G0);
        assert!(est.converged);
        assert!(s.region.contains(est.tau_hat, est.gamma_hat));
    }

    #[test]
    fn peak_dominates_coarse_grid() {
        let s = scene(7);
        let y = echo_samples(&s.spec, &s.target, &s.samp).unwrap();
        let amb = Ambiguity::new(&y, &s.spec, &s.samp).unwrap();
        let peak = Objective::ScaleCompensated.eval(amb.value(TAU0, G0), G0);
        let surf = amb.coarse_surface(&s.region);
        for (ig, row) in surf.iter().enumerate() {
            for a in row {
                assert!(Objective::ScaleCompensated.eval(*a, s.region.gamma_at(ig)) <= peak * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn grid_refinement_consistency() {
        let s = scene(8);
        let y = noisy(&s, 20.0, 2);
        let a = estimate_peak(&y, &s.spec, &s.samp, &s.region).unwrap();
        let fine = SearchRegion {
            gamma_min: 0.88,
            gamma_max: 0.94,
            ..s.region.refined_grid(2.0)
        };
        let b = estimate_peak(&y, &s.spec, &s.samp, &fine).unwrap();
        assert!((a.tau_hat - b.tau_hat).abs() < 1e-11);
        assert!((a.gamma_hat - b.gamma_hat).abs() < 1e-7);
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, fx) = golden_max(|x| -(x - 0.3).powi(2), -1.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-10);
        assert!(fx <= 0.0);
    }

    #[test]
    fn surface_csv_has_header_and_rows() {
        let s = scene(9);
        let y = echo_samples(&s.spec, &s.target, &s.samp).unwrap();
        let region = SearchRegion {
            gamma_min: 0.90,
            gamma_max: 0.9005,
            ..s.region
        };
        let surf = Ambiguity::new(&y, &s.spec, &s.samp).unwrap().coarse_surface(&region);
        let mut buf = Vec::new();
        write_surface_csv(&mut buf, &region, &surf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("tau,gamma,abs_A\n"));
        assert_eq!(text.lines().count(), 1 + region.n_tau() * region.n_gamma());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]

        #[test]
        fn phase_invariance(theta in 0.0f64..std::f64::consts::TAU, trial in 0u32..1000) {
            let s = scene(10);
            let y = noisy(&s, 25.0, trial);
            let rot = Complex64::from_polar(1.0, theta);
            let yr: Vec<Complex64> = y.iter().map(|v| v * rot).collect();
            let a = estimate_peak(&y, &s.spec, &s.samp, &s.region).unwrap();
            let b = estimate_peak(&yr, &s.spec, &s.samp, &s.region).unwrap();
            prop_assert!((a.tau_hat - b.tau_hat).abs() < 1e-11);
            prop_assert!((a.gamma_hat - b.gamma_hat).abs() < 1e-7);
            prop_assert!((a.peak_abs_a / b.peak_abs_a - 1.0).abs() < 1e-6);
        }

        #[test]
        fn gradient_scales_quadratically(alpha in 0.1f64..10.0, dt in -5e-9f64..5e-9, dg in -1e-4f64..1e-4) {
            let s = scene(11);
            let y = noisy(&s, 15.0, 3);
            let ya: Vec<Complex64> = y.iter().map(|v| v * alpha).collect();
            let g = af_sq_grad(&y, &s.spec, &s.samp, TAU0 + dt, G0 + dg).unwrap();
            let ga = af_sq_grad(&ya, &s.spec, &s.samp, TAU0 + dt, G0 + dg).unwrap();
            for i in 0..2 {
                prop_assert!((ga[i] - alpha * alpha * g[i]).abs() <= 1e-9 * (alpha * alpha * g[i]).abs());
            }
        }
    }
}
