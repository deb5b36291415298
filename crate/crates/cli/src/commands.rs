use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rsf_core::ambiguity::{write_surface_csv, Ambiguity};
use rsf_core::channel::{calibrate_noise, echo_energy};
use rsf_core::io::{read_samples_csv, read_table, write_samples_csv};
use rsf_core::montecarlo::{
    run_sweep_with_progress, theory_per_n0, trial_record, write_sweep_csv, write_sweep_sidecar, Provenance, Scenario,
    SweepResult,
};
use rsf_core::plot::{sweep_series, Plot};
use rsf_core::presets::{self, Metric};
use rsf_core::scenario::{ScenarioFile, SCHEMA_VERSION};
use rsf_core::theory::{theory_report, TheoryReport};
use rsf_core::waveform::Generator;
use rsf_core::{Result, RsfError};
use serde::Serialize;

use crate::args::{Cli, EstimateArgs, Format, SynthArgs, TheoryArgs, TrialSelect};
use crate::progress::Counter;

/// Resolved scenario source: one or more labelled curves.
struct Source {
    stem: String,
    title: String,
    metric: Option<Metric>,
    curves: Vec<(String, Scenario)>,
}

fn load(cli: &Cli, figure: Option<&str>) -> Result<Source> {
    let seed = cli.seed.unwrap_or(0);
    let trials = cli.trials.unwrap_or(presets::TRIALS);
    if figure.is_some() && cli.scenario.is_some() {
        return Err(RsfError::validation("scenario", "figure takes a preset name, not a scenario file"));
    }
    if let Some(name) = figure.or(cli.preset.as_deref()) {
        let p = presets::preset(name, seed, trials)?;
        return Ok(Source {
            stem: p.name,
            title: p.title,
            metric: Some(p.metric),
            curves: p.curves,
        });
    }
    if let Some(path) = &cli.scenario {
        let file = ScenarioFile::load(path)?;
        let label = file.name.clone().unwrap_or_else(|| file_stem(path));
        let mut scn = file.into_scenario()?;
        if let Some(s) = cli.seed {
            scn.master_seed = s;
        }
        if let Some(t) = cli.trials {
            scn.trials_per_snr = t;
        }
        scn.validate()?;
        return Ok(Source {
            stem: file_stem(path),
            title: label.clone(),
            metric: None,
            curves: vec![(label, scn)],
        });
    }
    let scn = presets::reference_scenario(
        Generator::Costas,
        presets::F0_HZ,
        presets::DELTA_F_HZ,
        presets::figure_snr_grid(),
        trials,
        seed,
    )?;
    Ok(Source {
        stem: "sweep".into(),
        title: "Costas RSF".into(),
        metric: None,
        curves: vec![("Costas RSF".into(), scn)],
    })
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into())
}

fn pick(src: &Source, sel: &TrialSelect) -> Result<(String, Scenario)> {
    src.curves
        .get(sel.curve)
        .cloned()
        .ok_or_else(|| RsfError::validation("curve", format!("{} is out of range (0..{})", sel.curve, src.curves.len())))
}

fn create(cli: &Cli, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(&cli.out)?;
    let path = cli.out.join(name);
    let f = File::create(&path)?;
    Ok((path, BufWriter::new(f)))
}

fn wrote(cli: &Cli, path: &Path) {
    if !cli.quiet {
        eprintln!("wrote {}", path.display());
    }
}

// synth

#[derive(Serialize)]
struct SampleColumn<'a> {
    name: &'a str,
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Serialize)]
struct SampleFile<'a> {
    t0_s: f64,
    delta_s: f64,
    n_samples: usize,
    columns: Vec<SampleColumn<'a>>,
}

pub fn synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let src = load(cli, None)?;
    let (_, scn) = pick(&src, &a.select)?;
    let rec = trial_record(&scn, a.select.snr_index, a.select.trial)?;
    let samp = scn.sampling;
    let tx: Vec<_> = (0..samp.n_samples).map(|i| rec.spec.signal_value(samp.time(i))).collect();
    let mut cols = vec![("tx", tx.as_slice()), ("echo", rec.clean.as_slice())];
    if a.noisy {
        cols.push(("rx", rec.received.as_slice()));
    }
    let (path, mut w) = match cli.format {
        Format::Csv => {
            let (path, mut w) = create(cli, "synth.csv")?;
            write_samples_csv(&mut w, samp.t0_s, samp.delta_s, &cols)?;
            (path, w)
        }
        Format::Json => {
            let (path, mut w) = create(cli, "synth.json")?;
            let doc = SampleFile {
                t0_s: samp.t0_s,
                delta_s: samp.delta_s,
                n_samples: samp.n_samples,
                columns: cols
                    .iter()
                    .map(|(name, c)| SampleColumn {
                        name,
                        re: c.iter().map(|v| v.re).collect(),
                        im: c.iter().map(|v| v.im).collect(),
                    })
                    .collect(),
            };
            serde_json::to_writer(&mut w, &doc)?;
            (path, w)
        }
    };
    w.flush()?;
    wrote(cli, &path);
    println!(
        "{} samples at {:e} s ({} dB, N0 = {:e})",
        samp.n_samples, samp.delta_s, rec.snr_db, rec.noise.n0
    );
    Ok(())
}

// theory

#[derive(Serialize)]
struct TheoryCurve {
    label: String,
    /// Absolute noise density at `--snr`, when given.
    n0: Option<f64>,
    report: TheoryReport,
}

#[derive(Serialize)]
struct TheoryOut {
    schema_version: u32,
    snr_db: Option<f64>,
    curves: Vec<TheoryCurve>,
}

fn forms(r: &TheoryReport) -> Vec<(&'static str, f64, f64)> {
    let mut v = vec![
        ("exact", r.mse_tau_exact, r.mse_gamma_exact),
        ("approx", r.mse_tau_approx, r.mse_gamma_approx),
    ];
    if let (Some(t), Some(g)) = (r.compact_tau, r.compact_gamma) {
        v.push(("compact", t, g));
    }
    v.push(("crlb", r.crlb_tau, r.crlb_gamma));
    v
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.3e}"))
}

pub fn theory(cli: &Cli, a: &TheoryArgs) -> Result<()> {
    let src = load(cli, None)?;
    let mut curves = Vec::new();
    for (label, scn) in &src.curves {
        let report = theory_report(&scn.waveform, scn.target.x, scn.target.gamma0, 1.0)?;
        let n0 = match a.snr {
            Some(snr) => {
                let energy = echo_energy(&scn.waveform, &scn.target)?;
                Some(calibrate_noise(snr, energy, scn.sampling.delta_s)?.n0)
            }
            None => None,
        };
        curves.push(TheoryCurve {
            label: label.clone(),
            n0,
            report,
        });
    }

    for c in &curves {
        let r = &c.report;
        println!("{} ({:?})", c.label, r.kind);
        println!("  {:<10}{:>16}{:>16}", "per N0", "tau", "gamma");
        for (name, t, g) in forms(r) {
            println!("  {name:<10}{t:>16.4e}{g:>16.4e}");
        }
        if let Some(n0) = c.n0 {
            println!("  at {} dB (N0 = {n0:.3e}):", a.snr.unwrap_or_default());
            for (name, t, g) in forms(r) {
                println!("  {name:<10}{:>16.4e}{:>16.4e}", t * n0, g * n0);
            }
        }
        println!(
            "  D/E = {:.3e}   identity residual = {}   shift dev (Std / centred) = {} / {}",
            r.de_ratio,
            opt(r.identity_residual),
            opt(r.shift_dev_verbatim),
            opt(r.shift_dev_centered)
        );
    }

    let path = match cli.format {
        Format::Json => {
            let (path, mut w) = create(cli, "theory.json")?;
            let doc = TheoryOut {
                schema_version: SCHEMA_VERSION,
                snr_db: a.snr,
                curves,
            };
            serde_json::to_writer_pretty(&mut w, &doc)?;
            w.flush()?;
            path
        }
        Format::Csv => {
            let (path, mut w) = create(cli, "theory.csv")?;
            writeln!(w, "curve,label,form,mse_tau,mse_gamma,n0")?;
            for (i, c) in curves.iter().enumerate() {
                let n0 = c.n0.unwrap_or(1.0);
                for (name, t, g) in forms(&c.report) {
                    writeln!(w, "{i},{},{name},{:e},{:e},{n0:e}", c.label.replace(',', ";"), t * n0, g * n0)?;
                }
            }
            w.flush()?;
            path
        }
    };
    wrote(cli, &path);
    Ok(())
}

// estimate

#[derive(Serialize)]
struct EstimateOut {
    label: String,
    snr_db: f64,
    n0: f64,
    tau0_s: f64,
    gamma0: f64,
    tau_hat: f64,
    gamma_hat: f64,
    tau_err: f64,
    gamma_err: f64,
    converged: bool,
    iterations: usize,
    stationarity: f64,
    peak_abs_a: f64,
    mse_tau_theory: f64,
    mse_gamma_theory: f64,
    crlb_tau: f64,
    crlb_gamma: f64,
}

pub fn estimate(cli: &Cli, a: &EstimateArgs) -> Result<()> {
    let src = load(cli, None)?;
    let (label, scn) = pick(&src, &a.select)?;
    let (snr_index, trial) = (a.select.snr_index, a.select.trial);
    let rec = trial_record(&scn, snr_index, trial)?;
    let y = match &a.input {
        Some(path) => {
            let cols = read_samples_csv(BufReader::new(File::open(path)?))?;
            cols.into_iter()
                .find(|(name, _)| *name == a.column)
                .map(|(_, c)| c)
                .ok_or_else(|| RsfError::validation("column", format!("{} has no column {}", path.display(), a.column)))?
        }
        None => rec.received.clone(),
    };
    let amb = Ambiguity::new(&y, &rec.spec, &scn.sampling)?;
    let est = amb.estimate_peak(&scn.region)?;
    if a.surface {
        let (path, mut w) = create(cli, "surface.csv")?;
        write_surface_csv(&mut w, &scn.region, &amb.coarse_surface(&scn.region))?;
        w.flush()?;
        wrote(cli, &path);
    }
    let th = theory_per_n0(&rec.spec, &scn.target)?;
    let n0 = rec.noise.n0;
    let out = EstimateOut {
        label,
        snr_db: rec.snr_db,
        n0,
        tau0_s: scn.target.tau0_s,
        gamma0: scn.target.gamma0,
        tau_hat: est.tau_hat,
        gamma_hat: est.gamma_hat,
        tau_err: est.tau_hat - scn.target.tau0_s,
        gamma_err: est.gamma_hat - scn.target.gamma0,
        converged: est.converged,
        iterations: est.iterations,
        stationarity: est.stationarity,
        peak_abs_a: est.peak_abs_a,
        mse_tau_theory: th.mse_tau * n0,
        mse_gamma_theory: th.mse_gamma * n0,
        crlb_tau: th.crlb_tau * n0,
        crlb_gamma: th.crlb_gamma * n0,
    };
    let path = match cli.format {
        Format::Json => {
            let (path, mut w) = create(cli, "estimate.json")?;
            serde_json::to_writer_pretty(&mut w, &out)?;
            w.flush()?;
            path
        }
        Format::Csv => {
            let (path, mut w) = create(cli, "estimate.csv")?;
            writeln!(
                w,
                "snr_db,n0,tau0_s,gamma0,tau_hat,gamma_hat,tau_err,gamma_err,converged,iterations,stationarity,\
                 peak_abs_a,mse_tau_theory,mse_gamma_theory,crlb_tau,crlb_gamma"
            )?;
            writeln!(
                w,
                "{},{:e},{:e},{},{:e},{:e},{:e},{:e},{},{},{:e},{:e},{:e},{:e},{:e},{:e}",
                out.snr_db,
                out.n0,
                out.tau0_s,
                out.gamma0,
                out.tau_hat,
                out.gamma_hat,
                out.tau_err,
                out.gamma_err,
                u8::from(out.converged),
                out.iterations,
                out.stationarity,
                out.peak_abs_a,
                out.mse_tau_theory,
                out.mse_gamma_theory,
                out.crlb_tau,
                out.crlb_gamma
            )?;
            w.flush()?;
            path
        }
    };
    wrote(cli, &path);
    println!(
        "tau_hat = {:.6e} s (err {:+.3e})   gamma_hat = {:.9} (err {:+.3e})   converged = {}",
        out.tau_hat, out.tau_err, out.gamma_hat, out.gamma_err, out.converged
    );
    Ok(())
}

// sweep / figure

#[derive(Serialize)]
struct CurveSidecar<'a> {
    label: &'a str,
    csv: String,
    provenance: &'a Provenance,
    scenario: &'a Scenario,
}

#[derive(Serialize)]
struct FigureSidecar<'a> {
    name: &'a str,
    title: &'a str,
    metric: Option<Metric>,
    curves: Vec<CurveSidecar<'a>>,
}

#[derive(Serialize)]
struct LabelledResult<'a> {
    label: &'a str,
    result: &'a SweepResult,
}

pub fn sweep(cli: &Cli, figure: Option<&str>) -> Result<()> {
    let src = load(cli, figure)?;
    let workers = match cli.workers {
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let n = src.curves.len();
    let mut results = Vec::with_capacity(n);
    for (i, (label, scn)) in src.curves.iter().enumerate() {
        let counter = Counter::new(format!("[{}/{n}] {label}", i + 1), cli.quiet);
        results.push(run_sweep_with_progress(scn, workers, &|d, t| counter.tick(d, t))?);
    }

    let curve_files: Vec<String> = if n == 1 {
        vec![format!("{}.csv", src.stem)]
    } else {
        (0..n).map(|i| format!("{}_c{i}.csv", src.stem)).collect()
    };
    for (name, res) in curve_files.iter().zip(&results) {
        let (path, mut w) = create(cli, name)?;
        write_sweep_csv(&mut w, res)?;
        w.flush()?;
        wrote(cli, &path);
    }
    if n > 1 {
        let (path, mut w) = create(cli, &format!("{}.csv", src.stem))?;
        for (i, res) in results.iter().enumerate() {
            let mut buf = Vec::new();
            write_sweep_csv(&mut buf, res)?;
            let text = String::from_utf8(buf).expect("csv is ascii");
            let mut lines = text.lines();
            let header = lines.next().unwrap_or_default();
            if i == 0 {
                writeln!(w, "curve,{header}")?;
            }
            for line in lines {
                writeln!(w, "{i},{line}")?;
            }
        }
        w.flush()?;
        wrote(cli, &path);
    }

    let sidecar = format!("{}.json", src.stem);
    let (path, mut w) = create(cli, &sidecar)?;
    if n == 1 && figure.is_none() && cli.preset.is_none() {
        write_sweep_sidecar(&mut w, &src.curves[0].1, &results[0])?;
    } else {
        let doc = FigureSidecar {
            name: &src.stem,
            title: &src.title,
            metric: src.metric,
            curves: src
                .curves
                .iter()
                .zip(&results)
                .zip(&curve_files)
                .map(|(((label, scn), res), csv)| CurveSidecar {
                    label,
                    csv: csv.clone(),
                    provenance: &res.provenance,
                    scenario: scn,
                })
                .collect(),
        };
        serde_json::to_writer_pretty(&mut w, &doc)?;
    }
    w.flush()?;
    wrote(cli, &path);

    // Plots are drawn from the CSVs just written, not from memory.
    let metrics = match src.metric {
        Some(m) => vec![(m, format!("{}.svg", src.stem))],
        None => vec![
            (Metric::Tau, format!("{}_tau.svg", src.stem)),
            (Metric::Gamma, format!("{}_gamma.svg", src.stem)),
        ],
    };
    for (metric, name) in metrics {
        let mut plot = Plot {
            title: match (src.metric, metric) {
                (Some(_), _) => src.title.clone(),
                (None, Metric::Tau) => format!("MSE of time delay: {}", src.title),
                (None, Metric::Gamma) => format!("MSE of Doppler-stretch: {}", src.title),
            },
            x_label: "SNR (dB)".into(),
            y_label: match metric {
                Metric::Tau => "MSE of τ (s²)".into(),
                Metric::Gamma => "MSE of γ".into(),
            },
            series: Vec::new(),
        };
        for (i, ((label, _), file)) in src.curves.iter().zip(&curve_files).enumerate() {
            let table = read_table(BufReader::new(File::open(cli.out.join(file))?))?;
            plot.series.extend(sweep_series(&table, metric, label, i)?);
        }
        let (path, mut w) = create(cli, &name)?;
        w.write_all(plot.to_svg()?.as_bytes())?;
        w.flush()?;
        wrote(cli, &path);
    }

    match cli.format {
        Format::Csv => {
            for (i, file) in curve_files.iter().enumerate() {
                if n > 1 {
                    println!("# {}", src.curves[i].0);
                }
                print!("{}", fs::read_to_string(cli.out.join(file))?);
            }
        }
        Format::Json => {
            let doc: Vec<LabelledResult> = src
                .curves
                .iter()
                .zip(&results)
                .map(|((label, _), result)| LabelledResult { label, result })
                .collect();
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
    }
    Ok(())
}
