//! Seeded, parallel Monte Carlo sweeps of the AF estimator over SNR.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ambiguity::{Ambiguity, SearchRegion};
use crate::channel::{add_noise, calibrate_noise, echo_samples, NoiseSpec, SamplingSpec, TargetParams};
use crate::error::{Result, RsfError};
use crate::rng::{Purpose, StreamKey};
use crate::stats;
use crate::theory;
use crate::waveform::{make_codeword, Generator, WaveformKind, WaveformSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodewordPolicy {
    FixedAcrossTrials,
    /// Draw a fresh RSF codeword for every trial from the waveform's
    /// generator and alphabet. Has no effect on deterministic generators,
    /// OFDM or monotone trains.
    #[default]
    ResamplePerTrial,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub waveform: WaveformSpec,
    pub target: TargetParams,
    pub sampling: SamplingSpec,
    pub region: SearchRegion,
    pub snr_grid_db: Vec<f64>,
    pub trials_per_snr: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub codeword_policy: CodewordPolicy,
}

impl Scenario {
    /// Scenario with the default search region and a window covering it.
    pub fn with_defaults(
        waveform: WaveformSpec,
        target: TargetParams,
        delta_s: f64,
        snr_grid_db: Vec<f64>,
        trials_per_snr: usize,
        master_seed: u64,
    ) -> Result<Self> {
        let region = SearchRegion::default_for(&waveform, target.tau0_s, delta_s)?;
        let sampling = SamplingSpec::covering(&waveform, region.tau_max, region.gamma_min, delta_s)?;
        let scn = Scenario {
            waveform,
            target,
            sampling,
            region,
            snr_grid_db,
            trials_per_snr,
            master_seed,
            codeword_policy: CodewordPolicy::default(),
        };
        scn.validate()?;
        Ok(scn)
    }

    pub fn validate(&self) -> Result<()> {
        self.waveform.validate()?;
        self.target.validate()?;
        self.sampling.validate()?;
        self.region.validate()?;
        if self.trials_per_snr == 0 {
            return Err(RsfError::validation("trials_per_snr", "must be >= 1"));
        }
        if self.snr_grid_db.is_empty() {
            return Err(RsfError::validation("snr_grid_db", "must not be empty"));
        }
        if self.snr_grid_db.iter().any(|v| !v.is_finite()) {
            return Err(RsfError::validation("snr_grid_db", "entries must be finite"));
        }
        if self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RsfError::validation("snr_grid_db", "must be strictly increasing"));
        }
        if !self.region.contains(self.target.tau0_s, self.target.gamma0) {
            return Err(RsfError::validation("region", "true (tau0, gamma0) lies outside the search region"));
        }
        if self.trials_per_snr > u32::MAX as usize || self.snr_grid_db.len() > 0x00ff_ffff {
            return Err(RsfError::validation("trials_per_snr", "too many trials for the RNG stream layout"));
        }
        Ok(())
    }

    fn resamples(&self) -> bool {
        self.codeword_policy == CodewordPolicy::ResamplePerTrial
            && self.waveform.kind == WaveformKind::Rsf
            && self
                .waveform
                .codeword
                .as_ref()
                .is_some_and(|c| matches!(c.generator, Generator::Costas | Generator::UniformRandom))
    }

    /// Waveform used by one trial.
    pub fn trial_waveform(&self, snr_index: usize, trial: usize) -> Result<WaveformSpec> {
        if !self.resamples() {
            return Ok(self.waveform.clone());
        }
        let cw = self.waveform.codeword.as_ref().expect("checked by resamples()");
        let seed = StreamKey::new(self.master_seed, Purpose::Codeword, snr_index as u32, trial as u32).sub_seed();
        let mut spec = self.waveform.clone();
        spec.codeword = Some(make_codeword(cw.generator, cw.len(), &cw.alphabet, seed)?);
        Ok(spec)
    }

    /// SHA-256 of the scenario's JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Theory for one waveform, per unit `N0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryPerN0 {
    /// Transmit energy `E`.
    pub energy: f64,
    pub mse_tau: f64,
    pub mse_gamma: f64,
    pub crlb_tau: f64,
    pub crlb_gamma: f64,
}

/// Compact-form MSE (the closed form for the waveform kind) and the CRLB,
/// both per unit `N0`.
pub fn theory_per_n0(spec: &WaveformSpec, target: &TargetParams) -> Result<TheoryPerN0> {
    let m = theory::signal_moments(spec)?;
    let (crlb_tau, crlb_gamma) = theory::crlb(&m, target.x, target.gamma0, 1.0)?;
    let (mse_tau, mse_gamma) = if spec.envelope.is_symmetric() {
        theory::compact_mse(spec, target.x, target.gamma0)?
    } else {
        theory::mse_exact(&m, target.x, target.gamma0)?
    };
    Ok(TheoryPerN0 {
        energy: m.e,
        mse_tau,
        mse_gamma,
        crlb_tau,
        crlb_gamma,
    })
}

/// Result of one estimation trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub tau_err: f64,
    pub gamma_err: f64,
    pub converged: bool,
    pub n0: f64,
    /// Absolute theoretical MSEs and CRLBs for this trial's waveform.
    pub mse_tau_theory: f64,
    pub mse_gamma_theory: f64,
    pub crlb_tau: f64,
    pub crlb_gamma: f64,
}

impl TrialOutcome {
    pub fn tau_err2(&self) -> f64 {
        self.tau_err * self.tau_err
    }

    pub fn gamma_err2(&self) -> f64 {
        self.gamma_err * self.gamma_err
    }
}

/// Runs trial `trial` at SNR grid point `snr_index`.
pub fn run_trial(scn: &Scenario, snr_index: usize, trial: usize) -> Result<TrialOutcome> {
    scn.validate()?;
    run_trial_inner(scn, snr_index, trial, None)
}

fn run_trial_inner(scn: &Scenario, snr_index: usize, trial: usize, fixed: Option<&TheoryPerN0>) -> Result<TrialOutcome> {
    let snr_db = *scn
        .snr_grid_db
        .get(snr_index)
        .ok_or_else(|| RsfError::validation("snr_index", format!("{snr_index} is outside the SNR grid")))?;
    let wrap = |e: RsfError| RsfError::Trial {
        snr_db,
        trial,
        source: Box::new(e),
    };
    let spec = scn.trial_waveform(snr_index, trial).map_err(wrap)?;
    let th = match fixed {
        Some(t) => *t,
        None => theory_per_n0(&spec, &scn.target).map_err(wrap)?,
    };
    let rec = record_with_energy(scn, snr_index, trial, spec, th.energy).map_err(wrap)?;
    let (spec, noise) = (&rec.spec, rec.noise);
    let est = Ambiguity::new(&rec.received, spec, &scn.sampling)
        .and_then(|a| a.estimate_peak(&scn.region))
        .map_err(wrap)?;
    Ok(TrialOutcome {
        tau_err: est.tau_hat - scn.target.tau0_s,
        gamma_err: est.gamma_hat - scn.target.gamma0,
        converged: est.converged,
        n0: noise.n0,
        mse_tau_theory: th.mse_tau * noise.n0,
        mse_gamma_theory: th.mse_gamma * noise.n0,
        crlb_tau: th.crlb_tau * noise.n0,
        crlb_gamma: th.crlb_gamma * noise.n0,
    })
}

/// Received record of one trial, noiseless and noisy.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub snr_db: f64,
    pub spec: WaveformSpec,
    pub noise: NoiseSpec,
    pub clean: Vec<Complex64>,
    pub received: Vec<Complex64>,
}

/// Rebuilds exactly the samples [`run_trial`] estimates from.
pub fn trial_record(scn: &Scenario, snr_index: usize, trial: usize) -> Result<TrialRecord> {
    scn.validate()?;
    let spec = scn.trial_waveform(snr_index, trial)?;
    let energy = crate::theory::signal_energy(&spec)?;
    record_with_energy(scn, snr_index, trial, spec, energy)
}

fn record_with_energy(
    scn: &Scenario,
    snr_index: usize,
    trial: usize,
    spec: WaveformSpec,
    signal_energy: f64,
) -> Result<TrialRecord> {
    let snr_db = *scn
        .snr_grid_db
        .get(snr_index)
        .ok_or_else(|| RsfError::validation("snr_index", format!("{snr_index} is outside the SNR grid")))?;
    let energy = scn.target.x.norm_sqr() * signal_energy / scn.target.gamma0;
    let noise = calibrate_noise(snr_db, energy, scn.sampling.delta_s)?;
    let clean = echo_samples(&spec, &scn.target, &scn.sampling)?;
    let mut rng = StreamKey::new(scn.master_seed, Purpose::Noise, snr_index as u32, trial as u32).rng();
    let received = add_noise(&clean, &noise, &mut rng);
    Ok(TrialRecord {
        snr_db,
        spec,
        noise,
        clean,
        received,
    })
}

/// One SNR point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub n_trials: usize,
    pub mse_tau_sim: f64,
    pub mse_gamma_sim: f64,
    pub mse_tau_theory: f64,
    pub mse_gamma_theory: f64,
    pub crlb_tau: f64,
    pub crlb_gamma: f64,
    pub n_nonconverged: usize,
    // Diagnostics.
    pub n_failed: usize,
    pub median_sq_tau: f64,
    pub median_sq_gamma: f64,
    pub trimmed_sq_tau: f64,
    pub trimmed_sq_gamma: f64,
    pub bias_tau: f64,
    pub bias_gamma: f64,
    pub stderr_tau: f64,
    pub stderr_gamma: f64,
}

/// Fraction cut from each tail for the trimmed-mean diagnostic.
pub const TRIM_FRACTION: f64 = 0.05;

impl SweepRow {
    fn aggregate(snr_db: f64, outcomes: &[TrialOutcome], n_failed: usize) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(RsfError::EmptyAggregate(snr_db));
        }
        let col = |f: fn(&TrialOutcome) -> f64| outcomes.iter().map(f).collect::<Vec<f64>>();
        let (e_tau, e_gamma) = (col(|o| o.tau_err), col(|o| o.gamma_err));
        let (sq_tau, sq_gamma) = (col(TrialOutcome::tau_err2), col(TrialOutcome::gamma_err2));
        let n = outcomes.len() as f64;
        Ok(SweepRow {
            snr_db,
            n_trials: outcomes.len(),
            mse_tau_sim: stats::mean(&sq_tau),
            mse_gamma_sim: stats::mean(&sq_gamma),
            mse_tau_theory: stats::mean(&col(|o| o.mse_tau_theory)),
            mse_gamma_theory: stats::mean(&col(|o| o.mse_gamma_theory)),
            crlb_tau: stats::mean(&col(|o| o.crlb_tau)),
            crlb_gamma: stats::mean(&col(|o| o.crlb_gamma)),
            n_nonconverged: outcomes.iter().filter(|o| !o.converged).count(),
            n_failed,
            median_sq_tau: stats::median(&sq_tau),
            median_sq_gamma: stats::median(&sq_gamma),
            trimmed_sq_tau: stats::trimmed_mean(&sq_tau, TRIM_FRACTION),
            trimmed_sq_gamma: stats::trimmed_mean(&sq_gamma, TRIM_FRACTION),
            bias_tau: stats::mean(&e_tau),
            bias_gamma: stats::mean(&e_gamma),
            stderr_tau: (stats::var(&e_tau) / n).sqrt(),
            stderr_gamma: (stats::var(&e_gamma) / n).sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub scenario_hash: String,
    pub master_seed: u64,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub provenance: Provenance,
}

/// Runs every `(SNR, trial)` pair on `workers` threads.
pub fn run_sweep(scn: &Scenario, workers: usize) -> Result<SweepResult> {
    run_sweep_with_progress(scn, workers, &|_, _| {})
}

/// [`run_sweep`] with a callback receiving `(done, total)` as trials finish.
/// The callback may be invoked from any worker thread.
pub fn run_sweep_with_progress(
    scn: &Scenario,
    workers: usize,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<SweepResult> {
    scn.validate()?;
    if workers == 0 {
        return Err(RsfError::validation("workers", "must be >= 1"));
    }
    let fixed = if scn.resamples() {
        None
    } else {
        Some(theory_per_n0(&scn.waveform, &scn.target)?)
    };

    let n_snr = scn.snr_grid_db.len();
    let n_trials = scn.trials_per_snr;
    let total = n_snr * n_trials;
    let done = std::sync::atomic::AtomicUsize::new(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RsfError::validation("workers", e.to_string()))?;
    let outcomes: Vec<Result<TrialOutcome>> = pool.install(|| {
        (0..total)
            .into_par_iter()
            .map(|job| {
                let out = run_trial_inner(scn, job / n_trials, job % n_trials, fixed.as_ref());
                progress(done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1, total);
                out
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(n_snr);
    for (i, chunk) in outcomes.chunks(n_trials).enumerate() {
        let ok: Vec<TrialOutcome> = chunk.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        let failed = chunk.len() - ok.len();
        rows.push(SweepRow::aggregate(scn.snr_grid_db[i], &ok, failed)?);
    }
    Ok(SweepResult {
        rows,
        provenance: Provenance {
            scenario_hash: scn.hash(),
            master_seed: scn.master_seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

/// Column order of the sweep CSV. The first nine are the stable schema;
/// the rest are diagnostics.
pub const CSV_COLUMNS: [&str; 18] = [
    "snr_db",
    "n_trials",
    "mse_tau_sim",
    "mse_gamma_sim",
    "mse_tau_theory",
    "mse_gamma_theory",
    "crlb_tau",
    "crlb_gamma",
    "n_nonconverged",
    "n_failed",
    "median_sq_tau",
    "median_sq_gamma",
    "trimmed_sq_tau",
    "trimmed_sq_gamma",
    "bias_tau",
    "bias_gamma",
    "stderr_tau",
    "stderr_gamma",
];

pub fn write_sweep_csv<W: Write>(mut w: W, result: &SweepResult) -> Result<()> {
    writeln!(w, "{}", CSV_COLUMNS.join(","))?;
    for r in &result.rows {
        writeln!(
            w,
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.snr_db,
            r.n_trials,
            r.mse_tau_sim,
            r.mse_gamma_sim,
            r.mse_tau_theory,
            r.mse_gamma_theory,
            r.crlb_tau,
            r.crlb_gamma,
            r.n_nonconverged,
            r.n_failed,
            r.median_sq_tau,
            r.median_sq_gamma,
            r.trimmed_sq_tau,
            r.trimmed_sq_gamma,
            r.bias_tau,
            r.bias_gamma,
            r.stderr_tau,
            r.stderr_gamma,
        )?;
    }
    Ok(())
}

/// JSON sidecar: provenance plus the full scenario.
pub fn write_sweep_sidecar<W: Write>(w: W, scn: &Scenario, result: &SweepResult) -> Result<()> {
    #[derive(Serialize)]
    struct Sidecar<'a> {
        provenance: &'a Provenance,
        scenario: &'a Scenario,
        columns: &'a [&'a str],
    }
    serde_json::to_writer_pretty(
        w,
        &Sidecar {
            provenance: &result.provenance,
            scenario: scn,
            columns: &CSV_COLUMNS,
        },
    )?;
    Ok(())
}
