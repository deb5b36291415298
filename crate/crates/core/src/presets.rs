//! Built-in scenarios for the ten figures.
//!
//! Every preset starts from the reference scene (`τ0 = 1.48 µs`, `γ0 = 0.91`,
//! `x = 1`, `K = 6`, `T = 1 µs`, `Tr = 4 µs`, `Δ = 10 ns`) and changes only
//! the parameter the figure is about.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::TargetParams;
use crate::error::{Result, RsfError};
use crate::montecarlo::{CodewordPolicy, Scenario};
use crate::waveform::{half_integer_alphabet, make_codeword, Codeword, Envelope, Generator, WaveformSpec};

pub const TAU0_S: f64 = 1.48e-6;
pub const GAMMA0: f64 = 0.91;
pub const PULSE_S: f64 = 1e-6;
pub const PRI_S: f64 = 4e-6;
pub const K_PULSES: usize = 6;
pub const DELTA_S: f64 = 1e-8;
pub const F0_HZ: f64 = 20e6;
pub const DELTA_F_HZ: f64 = 2e6;
pub const TRIALS: usize = 200;

pub const PRESET_NAMES: [&str; 10] = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10"];

/// SNR grid of the figures: 5 to 40 dB in 5 dB steps.
pub fn figure_snr_grid() -> Vec<f64> {
    (1..=8).map(|i| 5.0 * i as f64).collect()
}

pub fn reference_target() -> TargetParams {
    TargetParams {
        x: Complex64::new(1.0, 0.0),
        tau0_s: TAU0_S,
        gamma0: GAMMA0,
    }
}

/// Costas or Dumbbell RSF train on the reference scene.
pub fn reference_rsf(generator: Generator, f0_hz: f64, delta_f_hz: f64, seed: u64) -> Result<WaveformSpec> {
    let cw = make_codeword(generator, K_PULSES, &half_integer_alphabet(K_PULSES), seed)?;
    WaveformSpec::rsf(f0_hz, delta_f_hz, PRI_S, Envelope::poly_smooth(PULSE_S), cw)
}

pub fn reference_scenario(
    generator: Generator,
    f0_hz: f64,
    delta_f_hz: f64,
    snr_grid_db: Vec<f64>,
    trials: usize,
    seed: u64,
) -> Result<Scenario> {
    let spec = reference_rsf(generator, f0_hz, delta_f_hz, seed)?;
    Scenario::with_defaults(spec, reference_target(), DELTA_S, snr_grid_db, trials, seed)
}

/// OFDM train whose subcarrier offsets are the whole alphabet.
pub fn reference_ofdm(f0_hz: f64, delta_f_hz: f64) -> Result<WaveformSpec> {
    let c = half_integer_alphabet(K_PULSES);
    let sub = Codeword::explicit(c.clone(), c)?;
    WaveformSpec::ofdm(f0_hz, delta_f_hz, K_PULSES, PRI_S, Envelope::poly_smooth(PULSE_S), sub)
}

pub fn reference_monotone(f0_hz: f64) -> Result<WaveformSpec> {
    WaveformSpec::monotone(f0_hz, K_PULSES, PRI_S, Envelope::poly_smooth(PULSE_S))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Tau,
    Gamma,
}

/// One figure: a metric and the labelled scenarios whose curves it overlays.
#[derive(Debug, Clone)]
pub struct FigurePreset {
    pub name: String,
    pub title: String,
    pub metric: Metric,
    pub curves: Vec<(String, Scenario)>,
}

/// Builds preset `name` with `trials` per SNR and the given master seed.
pub fn preset(name: &str, seed: u64, trials: usize) -> Result<FigurePreset> {
    let grid = figure_snr_grid();
    let rsf = |f0: f64, df: f64, g: Generator| reference_scenario(g, f0, df, grid.clone(), trials, seed);
    let fixed = |spec: WaveformSpec| -> Result<Scenario> {
        let mut scn = Scenario::with_defaults(spec, reference_target(), DELTA_S, grid.clone(), trials, seed)?;
        scn.codeword_policy = CodewordPolicy::FixedAcrossTrials;
        Ok(scn)
    };
    let mhz = |v: f64| format!("{} MHz", v / 1e6);

    let (title, metric, curves): (&str, Metric, Vec<(String, Scenario)>) = match name {
        "fig1" | "fig2" => (
            "Costas RSF: simulated vs theoretical",
            metric_of(name),
            vec![("Costas RSF".into(), rsf(F0_HZ, DELTA_F_HZ, Generator::Costas)?)],
        ),
        "fig3" | "fig4" => (
            "Shifting step δf",
            metric_of(name),
            [2e6, 4e6, 6e6]
                .into_iter()
                .map(|df| Ok((format!("δf = {}", mhz(df)), rsf(F0_HZ, df, Generator::Costas)?)))
                .collect::<Result<_>>()?,
        ),
        "fig5" | "fig6" => (
            "Codeword",
            metric_of(name),
            vec![
                ("Costas".into(), rsf(F0_HZ, DELTA_F_HZ, Generator::Costas)?),
                ("Dumbbell".into(), rsf(F0_HZ, DELTA_F_HZ, Generator::Dumbbell)?),
            ],
        ),
        "fig7" | "fig8" => (
            "Central carrier f0",
            metric_of(name),
            [10e6, 20e6, 30e6]
                .into_iter()
                .map(|f0| Ok((format!("f0 = {}", mhz(f0)), rsf(f0, DELTA_F_HZ, Generator::Costas)?)))
                .collect::<Result<_>>()?,
        ),
        "fig9" | "fig10" => (
            "Waveform",
            metric_of(name),
            vec![
                ("RSF".into(), rsf(F0_HZ, DELTA_F_HZ, Generator::Costas)?),
                ("OFDM".into(), fixed(reference_ofdm(F0_HZ, DELTA_F_HZ)?)?),
                ("Monotone".into(), fixed(reference_monotone(F0_HZ)?)?),
            ],
        ),
        other => return Err(RsfError::UnknownPreset(other.to_string())),
    };
    let what = match metric {
        Metric::Tau => "MSE of time delay",
        Metric::Gamma => "MSE of Doppler-stretch",
    };
    Ok(FigurePreset {
        name: name.to_string(),
        title: format!("{what}: {title}"),
        metric,
        curves,
    })
}

/// Odd figures plot delay, even figures plot Doppler stretch.
fn metric_of(name: &str) -> Metric {
    let n: u32 = name.trim_start_matches("fig").parse().unwrap_or(1);
    if n % 2 == 1 {
        Metric::Tau
    } else {
        Metric::Gamma
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::WaveformKind;

    #[test]
    fn all_presets_build() {
        for name in PRESET_NAMES {
            let p = preset(name, 1, 3).unwrap();
            assert!(!p.curves.is_empty());
            for (_, scn) in &p.curves {
                scn.validate().unwrap();
                assert_eq!(scn.snr_grid_db, figure_snr_grid());
            }
        }
        assert!(matches!(preset("fig11", 1, 1), Err(RsfError::UnknownPreset(_))));
    }

    #[test]
    fn curve_groups() {
        assert_eq!(preset("fig3", 0, 1).unwrap().curves.len(), 3);
        assert_eq!(preset("fig8", 0, 1).unwrap().curves.len(), 3);
        let f9 = preset("fig9", 0, 1).unwrap();
        let kinds: Vec<WaveformKind> = f9.curves.iter().map(|(_, s)| s.waveform.kind).collect();
        assert_eq!(kinds, [WaveformKind::Rsf, WaveformKind::Ofdm, WaveformKind::Monotone]);
        assert_eq!(preset("fig10", 0, 1).unwrap().metric, Metric::Gamma);
        assert_eq!(preset("fig1", 0, 1).unwrap().metric, Metric::Tau);
    }

    #[test]
    fn presets_are_pure_functions_of_seed() {
        let a = preset("fig5", 9, 2).unwrap();
        let b = preset("fig5", 9, 2).unwrap();
        for ((_, x), (_, y)) in a.curves.iter().zip(&b.curves) {
            assert_eq!(x.hash(), y.hash());
        }
    }
}
