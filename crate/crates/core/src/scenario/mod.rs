//! Scenario files, the built-in figure scenarios and their outputs.
//!
//! A run writes into one directory: `<name>.csv` (plus extra tables for some
//! experiments), `<name>.json` with the summary, `<name>.svg` unless plots
//! are disabled, and `manifest.json`. Everything except the wall-clock time
//! in the manifest is a pure function of the spec.

pub mod config;
pub mod output;

pub use config::{parse_config, print, ParseError};
pub use output::{emit_plot, sha256_hex, Plot, Series, Table};

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::analysis::{
    self, BodePeak, FitResult, GradientResponse, SensitivityResult, SweepResult,
};
use crate::defaults;
use crate::dynamics::{DriveMode, Event, GradientSignal, SimConfig, TimeSeries};
use crate::error::{Result, SimError};
use crate::physics::{self, CODATA_2018};

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    /// Closed-loop runs, one per pump delay; the base delay when empty.
    TimeDomain { delays: Vec<f64> },
    /// Open-loop response over [f_lo, f_hi] Hz at each rest separation; the
    /// base separation when empty.
    Bode {
        f_lo: f64,
        f_hi: f64,
        points: usize,
        separations: Vec<f64>,
    },
    DelaySweep {
        start: f64,
        stop: f64,
        points: usize,
    },
    SeparationSweep {
        start: f64,
        stop: f64,
        points: usize,
    },
    /// The configured gradient and a null run side by side.
    GradientResponse,
    /// Separation sweep followed by the inverse power-law fit of Δf₀C.
    Fit {
        start: f64,
        stop: f64,
        points: usize,
    },
    Resolution {
        s_freq: f64,
        counter_ppm: f64,
        ref_freq: f64,
    },
    PotentialCurve {
        cavities: Vec<f64>,
        start: f64,
        stop: f64,
        points: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub base: SimConfig,
    pub experiment: Experiment,
    pub output_dir: Option<PathBuf>,
}

pub const BUILTINS: [&str; 6] = ["fig3", "fig5a", "fig5b", "fig5c", "fig6", "fig7"];

/// The named figure scenarios.
pub fn builtin(name: &str) -> Option<ScenarioSpec> {
    let mut base = defaults::sim_config();
    let experiment = match name {
        "fig3" => Experiment::PotentialCurve {
            cavities: (0..6).map(|i| 100e-9 - 1e-9 * i as f64).collect(),
            start: -60e-9,
            stop: 20e-9,
            points: 801,
        },
        "fig5a" => {
            base.drive_mode = DriveMode::ConstantGain;
            base.magnet.pump_amplitude = 0.0;
            base.agc.initial_gain = 1e-4;
            Experiment::Bode {
                f_lo: 800.0,
                f_hi: 1050.0,
                points: 251,
                separations: vec![10e-6, 100e-9],
            }
        }
        "fig5b" => {
            base.record_decimation = 100;
            Experiment::TimeDomain {
                delays: vec![0.0, 150e-6, 750e-6],
            }
        }
        "fig5c" => {
            base.duration = 0.4;
            Experiment::DelaySweep {
                start: 0.0,
                stop: 1.3e-3,
                points: 53,
            }
        }
        "fig6" => {
            base.gradient = GradientSignal::sine(4.0 * defaults::PT_PER_CM, 1.0);
            Experiment::GradientResponse
        }
        "fig7" => {
            base.magnet.pump_amplitude = 1e-9;
            Experiment::Fit {
                start: 98.5e-9,
                stop: 101.5e-9,
                points: 13,
            }
        }
        _ => return None,
    };
    Some(ScenarioSpec {
        name: name.to_string(),
        base,
        experiment,
        output_dir: None,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    /// Overrides the spec's `output_dir`; `out/<name>` when neither is set.
    pub out_dir: Option<PathBuf>,
    pub plots: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constants {
    pub hbar: f64,
    pub c_light: f64,
    /// π³ħcR/360 for the configured sphere (N·m²).
    pub force_coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub scenario: String,
    /// Resolved config in the scenario file format.
    pub config: String,
    pub constants: Constants,
    pub wall_seconds: f64,
    pub pulled_in: bool,
    pub outputs: Vec<OutputFile>,
}

fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
        .collect()
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| SimError::Config(format!("summary serialization: {e}")))
}

fn sweep_table(sweep: &SweepResult) -> Table {
    let mut header = vec![
        (sweep.swept_name.as_str(), sweep.swept_unit.as_str()),
        (sweep.summary_name.as_str(), sweep.summary_unit.as_str()),
    ];
    for c in &sweep.extra {
        header.push((c.name.as_str(), c.unit.as_str()));
    }
    header.push(("pulled_in", "1"));
    let mut t = Table::new(&header);
    for i in 0..sweep.len() {
        let mut row = vec![Some(sweep.swept_values[i]), sweep.summaries[i]];
        row.extend(sweep.extra.iter().map(|c| c.values[i]));
        row.push(Some(if sweep.pulled_in(i) { 1.0 } else { 0.0 }));
        t.push(row);
    }
    t
}

fn sweep_series(name: &str, sweep: &SweepResult, scale_x: f64, scale_y: f64) -> Series {
    let mut s = Series::new(
        name,
        sweep.swept_values.iter().map(|v| v * scale_x).collect(),
        sweep
            .summaries
            .iter()
            .map(|v| v.map(|y| y * scale_y))
            .collect(),
    );
    s.pull_in = (0..sweep.len())
        .filter(|&i| sweep.pulled_in(i))
        .map(|i| sweep.swept_values[i] * scale_x)
        .collect();
    s
}

/// Everything a run produces before it touches the file system.
struct Artifacts {
    /// (file stem suffix, table); the main table has an empty suffix.
    tables: Vec<(String, Table)>,
    summary: String,
    plot: Plot,
    pulled_in: bool,
}

#[derive(Serialize)]
struct RunSummary {
    tau2f: f64,
    pull_in_time: Option<f64>,
    steady_state_time: Option<f64>,
    final_envelope: Option<f64>,
    final_f0c: Option<f64>,
    events: Vec<Event>,
}

fn time_domain(base: &SimConfig, delays: &[f64]) -> Result<Artifacts> {
    let delays = if delays.is_empty() {
        vec![base.magnet.time_delay]
    } else {
        delays.to_vec()
    };
    let configs = delays
        .iter()
        .map(|&tau| {
            let mut c = *base;
            c.magnet.time_delay = tau;
            c
        })
        .collect();
    let runs: Vec<TimeSeries> = analysis::run_all(configs)?;

    let mut samples = Table::new(&[
        ("tau2f", "s"),
        ("t", "s"),
        ("x_s", "m"),
        ("x_m", "m"),
        ("x_sm", "m"),
        ("f_hat", "Hz"),
    ]);
    let mut envelope = Table::new(&[("tau2f", "s"), ("t", "s"), ("envelope", "m"), ("f0c", "Hz")]);
    let mut summaries = Vec::new();
    let mut series = Vec::new();
    for (ts, &tau) in runs.iter().zip(&delays) {
        for i in 0..ts.len() {
            samples.push(vec![
                Some(tau),
                Some(ts.t[i]),
                Some(ts.x_s[i]),
                Some(ts.x_m[i]),
                Some(ts.x_sm[i]),
                Some(ts.f_hat[i]),
            ]);
        }
        let cycles = analysis::cycles_of(ts);
        for c in &cycles {
            envelope.push(vec![
                Some(tau),
                Some(c.peak_time),
                Some(c.envelope),
                Some(1.0 / c.period()),
            ]);
        }
        let mut s = Series::new(
            &format!("tau2f = {:.0} us", tau * 1e6),
            cycles.iter().map(|c| c.peak_time).collect(),
            cycles.iter().map(|c| Some(c.envelope * 1e9)).collect(),
        );
        s.pull_in = ts.pull_in_time().into_iter().collect();
        series.push(s);
        summaries.push(RunSummary {
            tau2f: tau,
            pull_in_time: ts.pull_in_time(),
            steady_state_time: ts.steady_state_time(),
            final_envelope: cycles.last().map(|c| c.envelope),
            final_f0c: cycles.last().map(|c| 1.0 / c.period()),
            events: ts.events.clone(),
        });
    }
    Ok(Artifacts {
        pulled_in: runs.iter().any(|ts| ts.pull_in_time().is_some()),
        tables: vec![(String::new(), samples), ("_envelope".into(), envelope)],
        summary: json(&summaries)?,
        plot: Plot {
            title: "Sphere envelope".into(),
            x_label: "t (s)".into(),
            y_label: "envelope (nm)".into(),
            log_y: true,
            series,
        },
    })
}

#[derive(Serialize)]
struct BodeSummary {
    rest_separation: f64,
    peak: Option<BodePeak>,
    peak_error: Option<String>,
}

fn bode(
    base: &SimConfig,
    f_lo: f64,
    f_hi: f64,
    points: usize,
    separations: &[f64],
) -> Result<Artifacts> {
    let separations = if separations.is_empty() {
        vec![base.coupling.rest_separation]
    } else {
        separations.to_vec()
    };
    let mut table = Table::new(&[
        ("rest_separation", "m"),
        ("frequency", "Hz"),
        ("amplitude", "dB"),
        ("amplitude_m", "m"),
        ("phase", "rad"),
    ]);
    let mut summaries = Vec::new();
    let mut series = Vec::new();
    let mut pulled_in = false;
    for &s0 in &separations {
        let mut cfg = *base;
        cfg.coupling.rest_separation = s0;
        let sweep = analysis::bode_sweep(&cfg, f_lo, f_hi, points)?;
        let amp = sweep
            .column("amplitude_m")
            .expect("bode sweep has amplitudes");
        let phase = sweep.column("phase").expect("bode sweep has phases");
        for i in 0..sweep.len() {
            table.push(vec![
                Some(s0),
                Some(sweep.swept_values[i]),
                sweep.summaries[i],
                amp.values[i],
                phase.values[i],
            ]);
        }
        pulled_in |= (0..sweep.len()).any(|i| sweep.pulled_in(i));
        let peak = analysis::bode_peak(&sweep);
        summaries.push(BodeSummary {
            rest_separation: s0,
            peak: peak.as_ref().ok().copied(),
            peak_error: peak.err().map(|e| e.to_string()),
        });
        series.push(sweep_series(
            &format!("s0 = {:.0} nm", s0 * 1e9),
            &sweep,
            1.0,
            1.0,
        ));
    }
    Ok(Artifacts {
        tables: vec![(String::new(), table)],
        summary: json(&summaries)?,
        plot: Plot {
            title: "Open-loop response".into(),
            x_label: "frequency (Hz)".into(),
            y_label: "amplitude (dB)".into(),
            log_y: false,
            series,
        },
        pulled_in,
    })
}

fn delay(base: &SimConfig, start: f64, stop: f64, points: usize) -> Result<Artifacts> {
    let sweep = analysis::delay_sweep(base, &linspace(start, stop, points))?;
    let pulled_in = (0..sweep.len()).any(|i| sweep.pulled_in(i));
    Ok(Artifacts {
        tables: vec![(String::new(), sweep_table(&sweep))],
        summary: json(&sweep)?,
        plot: Plot {
            title: "Envelope at 0.35 s".into(),
            x_label: "tau2f (us)".into(),
            y_label: "amplitude (nm)".into(),
            log_y: true,
            series: vec![sweep_series("amplitude", &sweep, 1e6, 1e9)],
        },
        pulled_in,
    })
}

#[derive(Serialize)]
struct SeparationSummary<'a> {
    sweep: &'a SweepResult,
    sensitivity: Vec<SensitivityResult>,
    max_s_freq: Option<f64>,
    fit: Option<FitResult>,
    fit_error: Option<String>,
}

fn max_s(sens: &[SensitivityResult]) -> Option<f64> {
    sens.iter().map(|s| s.s_freq).fold(None, |m, v| match m {
        Some(m) if m >= v => Some(m),
        _ => Some(v),
    })
}

/// Fits Δf₀C = f₀C − f_S against the mean gap x_SM of each readable point.
pub fn fit_frequency_shift(sweep: &SweepResult, f_s: f64) -> Result<FitResult> {
    let gap = sweep.column("mean_gap").ok_or(SimError::Precondition {
        operation: "fit_frequency_shift",
        reason: "sweep has no mean_gap column".into(),
    })?;
    let (x, y): (Vec<f64>, Vec<f64>) = gap
        .values
        .iter()
        .zip(&sweep.summaries)
        .filter_map(|(g, f)| Some(((*g)?, (*f)? - f_s)))
        .unzip();
    analysis::fit_inverse_power(&x, &y)
}

fn separation(
    base: &SimConfig,
    start: f64,
    stop: f64,
    points: usize,
    fit: bool,
) -> Result<Artifacts> {
    let sweep = analysis::separation_sweep(base, &linspace(start, stop, points))?;
    let f_s = base.sphere.natural_hz();
    let sens = analysis::sensitivity(
        &sweep,
        base.magnet.spring_k,
        base.magnet.moment,
        base.magnet.field_angle,
    )
    .unwrap_or_default();
    let (fit_result, fit_error) = if fit {
        match fit_frequency_shift(&sweep, f_s) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };

    // s_freq[i] belongs to the pair starting at the i-th readable point
    let readable: Vec<usize> = (0..sweep.len())
        .filter(|&i| {
            sweep.summaries[i].is_some()
                && sweep
                    .column("mean_gap")
                    .is_none_or(|c| c.values[i].is_some())
        })
        .collect();
    let mut s_col = vec![None; sweep.len()];
    for (k, r) in sens.iter().enumerate() {
        s_col[readable[k]] = Some(r.s_freq);
    }
    let gap = sweep
        .column("mean_gap")
        .expect("separation sweep has mean_gap");
    let mut table = Table::new(&[
        ("rest_separation", "m"),
        ("mean_gap", "m"),
        ("f0c", "Hz"),
        ("delta_f0c", "Hz"),
        ("s_freq", "Hz/(pT/cm)"),
        ("pulled_in", "1"),
    ]);
    for i in 0..sweep.len() {
        table.push(vec![
            Some(sweep.swept_values[i]),
            gap.values[i],
            sweep.summaries[i],
            sweep.summaries[i].map(|f| f - f_s),
            s_col[i],
            Some(if sweep.pulled_in(i) { 1.0 } else { 0.0 }),
        ]);
    }

    let gap_nm: Vec<Option<f64>> = gap.values.iter().map(|g| g.map(|g| g * 1e9)).collect();
    let (xs, ys): (Vec<f64>, Vec<Option<f64>>) = gap_nm
        .iter()
        .zip(&sweep.summaries)
        .filter_map(|(g, f)| Some(((*g)?, Some((*f)? - f_s))))
        .unzip();
    let mut series = vec![Series::new("delta f0c", xs.clone(), ys)];
    if let Some(r) = fit_result.filter(|r| r.converged && xs.len() >= 2) {
        let (lo, hi) = (xs[0].min(xs[xs.len() - 1]), xs[0].max(xs[xs.len() - 1]));
        let grid = linspace(lo, hi, 61);
        series.push(Series::new(
            &format!("fit, c = {:.2}", r.c),
            grid.clone(),
            grid.iter().map(|&g| Some(r.eval(g * 1e-9))).collect(),
        ));
    }
    let pulled_in = (0..sweep.len()).any(|i| sweep.pulled_in(i));
    Ok(Artifacts {
        tables: vec![(String::new(), table)],
        summary: json(&SeparationSummary {
            sweep: &sweep,
            max_s_freq: max_s(&sens),
            sensitivity: sens,
            fit: fit_result,
            fit_error,
        })?,
        plot: Plot {
            title: "Coupled frequency shift".into(),
            x_label: "mean gap x_SM (nm)".into(),
            y_label: "delta f0c (Hz)".into(),
            log_y: false,
            series,
        },
        pulled_in,
    })
}

#[derive(Serialize)]
struct GradientSummary {
    signal: GradientResponse,
    null: GradientResponse,
}

fn gradient(base: &SimConfig) -> Result<Artifacts> {
    let null_cfg = SimConfig {
        gradient: GradientSignal::NONE,
        ..*base
    };
    let (signal, null) = rayon::join(
        || analysis::gradient_response(base),
        || analysis::gradient_response(&null_cfg),
    );
    let (signal, null) = (signal?, null?);
    let mut table = Table::new(&[("signal", "1"), ("t", "s"), ("f0c", "Hz")]);
    let mut series = Vec::new();
    for (flag, name, r) in [(0.0, "null", &null), (1.0, "signal", &signal)] {
        for (t, f) in r.track.times.iter().zip(&r.track.f0c) {
            table.push(vec![Some(flag), Some(*t), Some(*f)]);
        }
        series.push(Series::new(
            name,
            r.track.times.clone(),
            r.track.f0c.iter().map(|&f| Some(f)).collect(),
        ));
    }
    Ok(Artifacts {
        tables: vec![(String::new(), table)],
        summary: json(&GradientSummary { signal, null })?,
        plot: Plot {
            title: "Coupled frequency under a gradient".into(),
            x_label: "t (s)".into(),
            y_label: "f0c (Hz)".into(),
            log_y: false,
            series,
        },
        pulled_in: false,
    })
}

#[derive(Serialize)]
struct ResolutionSummary {
    s_freq: f64,
    counter_ppm: f64,
    ref_freq: f64,
    /// aT/cm.
    resolution: f64,
}

fn resolution(s_freq: f64, counter_ppm: f64, ref_freq: f64) -> Result<Artifacts> {
    let r = analysis::best_case_resolution(s_freq, counter_ppm, ref_freq)?;
    let ppm = linspace(0.0, 2.0 * counter_ppm.max(1.0), 21);
    let curve = ppm
        .iter()
        .map(|&p| analysis::best_case_resolution(s_freq, p, ref_freq).map(Some))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(&[
        ("s_freq", "Hz/(pT/cm)"),
        ("counter_ppm", "ppm"),
        ("ref_freq", "Hz"),
        ("resolution", "aT/cm"),
    ]);
    table.push(vec![
        Some(s_freq),
        Some(counter_ppm),
        Some(ref_freq),
        Some(r),
    ]);
    Ok(Artifacts {
        tables: vec![(String::new(), table)],
        summary: json(&ResolutionSummary {
            s_freq,
            counter_ppm,
            ref_freq,
            resolution: r,
        })?,
        plot: Plot {
            title: "Best-case gradient resolution".into(),
            x_label: "counter resolution (ppm)".into(),
            y_label: "resolution (aT/cm)".into(),
            log_y: false,
            series: vec![Series::new("resolution", ppm, curve)],
        },
        pulled_in: false,
    })
}

fn potential(
    base: &SimConfig,
    cavities: &[f64],
    start: f64,
    stop: f64,
    points: usize,
) -> Result<Artifacts> {
    let grid = linspace(start, stop, points);
    let mut table = Table::new(&[("cavity", "m"), ("x_s", "m"), ("energy", "J")]);
    let mut series = Vec::new();
    for &cavity in cavities {
        let u = physics::total_potential_curve(&grid, cavity, &base.sphere)?;
        for (x, e) in grid.iter().zip(&u) {
            table.push(vec![Some(cavity), Some(*x), Some(*e)]);
        }
        series.push(Series::new(
            &format!("cavity {:.0} nm", cavity * 1e9),
            grid.iter().map(|x| x * 1e9).collect(),
            u.iter().map(|e| Some(e * 1e18)).collect(),
        ));
    }
    Ok(Artifacts {
        tables: vec![(String::new(), table)],
        summary: json(&physics::critical_separation(&base.sphere))?,
        plot: Plot {
            title: "Spring plus Casimir potential".into(),
            x_label: "x_S (nm)".into(),
            y_label: "energy (aJ)".into(),
            log_y: false,
            series,
        },
        pulled_in: false,
    })
}

fn artifacts(spec: &ScenarioSpec) -> Result<Artifacts> {
    let base = &spec.base;
    match &spec.experiment {
        Experiment::TimeDomain { delays } => time_domain(base, delays),
        Experiment::Bode {
            f_lo,
            f_hi,
            points,
            separations,
        } => bode(base, *f_lo, *f_hi, *points, separations),
        Experiment::DelaySweep {
            start,
            stop,
            points,
        } => delay(base, *start, *stop, *points),
        Experiment::SeparationSweep {
            start,
            stop,
            points,
        } => separation(base, *start, *stop, *points, false),
        Experiment::Fit {
            start,
            stop,
            points,
        } => separation(base, *start, *stop, *points, true),
        Experiment::GradientResponse => gradient(base),
        Experiment::Resolution {
            s_freq,
            counter_ppm,
            ref_freq,
        } => resolution(*s_freq, *counter_ppm, *ref_freq),
        Experiment::PotentialCurve {
            cavities,
            start,
            stop,
            points,
        } => potential(base, cavities, *start, *stop, *points),
    }
}

fn write(dir: &Path, file: &str, contents: &str, outputs: &mut Vec<OutputFile>) -> Result<()> {
    let path = dir.join(file);
    fs::write(&path, contents)
        .map_err(|e| SimError::Config(format!("cannot write {}: {e}", path.display())))?;
    outputs.push(OutputFile {
        path: file.to_string(),
        bytes: contents.len() as u64,
        sha256: sha256_hex(contents.as_bytes()),
    });
    Ok(())
}

/// Runs the experiment and writes its outputs and `manifest.json`.
pub fn run_scenario(spec: &ScenarioSpec, opts: &RunOptions) -> Result<RunManifest> {
    spec.base.validate()?;
    let started = Instant::now();
    let art = artifacts(spec)?;

    let dir = opts
        .out_dir
        .clone()
        .or_else(|| spec.output_dir.clone())
        .unwrap_or_else(|| Path::new("out").join(&spec.name));
    fs::create_dir_all(&dir)
        .map_err(|e| SimError::Config(format!("cannot create {}: {e}", dir.display())))?;

    let mut outputs = Vec::new();
    for (suffix, table) in &art.tables {
        write(
            &dir,
            &format!("{}{suffix}.csv", spec.name),
            &table.to_csv(),
            &mut outputs,
        )?;
    }
    write(
        &dir,
        &format!("{}.json", spec.name),
        &art.summary,
        &mut outputs,
    )?;
    if opts.plots {
        write(
            &dir,
            &format!("{}.svg", spec.name),
            &emit_plot(&art.plot)?,
            &mut outputs,
        )?;
    }

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: spec.name.clone(),
        config: print(spec),
        constants: Constants {
            hbar: CODATA_2018.hbar,
            c_light: CODATA_2018.c_light,
            force_coefficient: physics::force_coefficient(spec.base.sphere.radius),
        },
        wall_seconds: started.elapsed().as_secs_f64(),
        pulled_in: art.pulled_in,
        outputs,
    };
    let text = json(&manifest)?;
    fs::write(dir.join("manifest.json"), text)
        .map_err(|e| SimError::Config(format!("cannot write manifest: {e}")))?;
    Ok(manifest)
}

/// Command-line overrides of the integration step and duration.
pub fn apply_overrides(
    spec: &mut ScenarioSpec,
    dt: Option<f64>,
    duration: Option<f64>,
) -> Result<()> {
    if let Some(dt) = dt {
        spec.base.dt = dt;
    }
    if let Some(d) = duration {
        spec.base.duration = d;
    }
    spec.base.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid_and_round_trip() {
        for name in BUILTINS {
            let spec = builtin(name).unwrap();
            spec.base.validate().unwrap();
            assert_eq!(parse_config(&print(&spec)).unwrap(), spec, "{name}");
        }
        assert!(builtin("fig4").is_none());
    }

    #[test]
    fn resolution_scenario_writes_everything() {
        let dir = tempfile::tempdir().unwrap();
        let spec = parse_config("name = res\nexperiment = resolution\n").unwrap();
        let m = run_scenario(
            &spec,
            &RunOptions {
                out_dir: Some(dir.path().into()),
                plots: true,
            },
        )
        .unwrap();
        let files: Vec<&str> = m.outputs.iter().map(|o| o.path.as_str()).collect();
        assert_eq!(files, ["res.csv", "res.json", "res.svg"]);
        let csv = fs::read_to_string(dir.path().join("res.csv")).unwrap();
        assert!(csv
            .starts_with("# s_freq(Hz/(pT/cm)),counter_ppm(ppm),ref_freq(Hz),resolution(aT/cm)\n"));
        assert!(dir.path().join("manifest.json").exists());
        assert!(!m.pulled_in);
    }
}
