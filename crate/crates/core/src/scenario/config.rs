//! Plain-text scenario files.
//!
//! One `key = value` per line, `#` starts a comment. Dimensional values need
//! a unit suffix (`tau2f = 150 us`); list values are comma separated, each
//! with its own unit. Unspecified keys fall back to the nominal device.
//! [`print`] writes every key in SI units with round-trip precision, so
//! `parse(&print(spec)) == spec`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use super::{Experiment, ScenarioSpec};
use crate::defaults;
use crate::dynamics::{
    AgcSettings, DriveMode, FrequencyLock, GradientSignal, MagnetMode, SignalKind, SimConfig,
};
use crate::error::PhysicsError;
use crate::physics::{CouplingConfig, MagnetParams, SphereParams};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: `{key}`: {message}")]
pub struct ParseError {
    /// 1-based; 0 when the problem is not tied to one line.
    pub line: usize,
    pub key: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dim {
    Length,
    Time,
    Frequency,
    AngularFrequency,
    Stiffness,
    Mass,
    Gradient,
    Moment,
    Angle,
    Sensitivity,
    Ppm,
    Number,
}

impl Dim {
    /// SI factor for a unit suffix, or `None` if the unit does not belong
    /// to this dimension.
    fn factor(self, unit: &str) -> Option<f64> {
        let f = match (self, unit) {
            (Dim::Length, "m") => 1.0,
            (Dim::Length, "mm") => 1e-3,
            (Dim::Length, "um" | "μm" | "µm") => 1e-6,
            (Dim::Length, "nm") => 1e-9,
            (Dim::Time, "s") => 1.0,
            (Dim::Time, "ms") => 1e-3,
            (Dim::Time, "us" | "μs" | "µs") => 1e-6,
            (Dim::Time, "ns") => 1e-9,
            (Dim::Frequency, "Hz") => 1.0,
            (Dim::Frequency, "kHz") => 1e3,
            (Dim::AngularFrequency, "rad/s") => 1.0,
            (Dim::AngularFrequency, "Hz") => 2.0 * PI,
            (Dim::AngularFrequency, "kHz") => 2.0 * PI * 1e3,
            (Dim::Stiffness, "N/m") => 1.0,
            (Dim::Stiffness, "mN/m") => 1e-3,
            (Dim::Mass, "kg") => 1.0,
            (Dim::Mass, "g") => 1e-3,
            (Dim::Mass, "mg") => 1e-6,
            (Dim::Mass, "ug" | "μg" | "µg") => 1e-9,
            (Dim::Gradient, "T/m") => 1.0,
            (Dim::Gradient, "pT/cm") => 1e-10,
            (Dim::Gradient, "fT/cm") => 1e-13,
            (Dim::Moment, "A*m^2" | "A*m2" | "A·m²" | "Am^2") => 1.0,
            (Dim::Angle, "rad") => 1.0,
            (Dim::Angle, "deg") => PI / 180.0,
            (Dim::Sensitivity, "Hz/(pT/cm)") => 1.0,
            (Dim::Ppm, "ppm") => 1.0,
            (Dim::Number, "") => 1.0,
            _ => return None,
        };
        Some(f)
    }

    fn si_unit(self) -> &'static str {
        match self {
            Dim::Length => "m",
            Dim::Time => "s",
            Dim::Frequency => "Hz",
            Dim::AngularFrequency => "rad/s",
            Dim::Stiffness => "N/m",
            Dim::Mass => "kg",
            Dim::Gradient => "T/m",
            Dim::Moment => "A*m^2",
            Dim::Angle => "rad",
            Dim::Sensitivity => "Hz/(pT/cm)",
            Dim::Ppm => "ppm",
            Dim::Number => "",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Range {
    Positive,
    NonNegative,
    Any,
}

struct Entry {
    line: usize,
    value: String,
}

struct Doc {
    entries: BTreeMap<String, Entry>,
}

const KEYS: &[&str] = &[
    "name",
    "experiment",
    "output_dir",
    "mass_s",
    "natural_freq_s",
    "spring_k_s",
    "quality_s",
    "radius",
    "amplitude_s",
    "tau1f",
    "mass_m",
    "natural_freq_m",
    "spring_k_m",
    "quality_m",
    "amplitude_m",
    "tau2f",
    "moment",
    "field_angle",
    "s0",
    "min_gap",
    "quality_c",
    "dt",
    "duration",
    "magnet_mode",
    "drive_mode",
    "lock",
    "lock_frequency",
    "agc_initial_gain",
    "agc_max_gain",
    "record_decimation",
    "ac_coupled",
    "pump_phase",
    "gradient",
    "gradient_amplitude",
    "gradient_frequency",
    "sweep_start",
    "sweep_stop",
    "sweep_points",
    "delays",
    "separations",
    "cavities",
    "s_freq",
    "counter_ppm",
    "ref_freq",
];

fn err(line: usize, key: &str, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        key: key.into(),
        message: message.into(),
    }
}

impl Doc {
    fn read(text: &str) -> Result<Self, ParseError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(err(line, content, "expected `key = value`"));
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(err(line, key, "unknown key"));
            }
            let entry = Entry {
                line,
                value: value.trim().to_string(),
            };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(err(line, key, format!("already set on line {}", prev.line)));
            }
        }
        Ok(Self { entries })
    }

    fn text(&self, key: &str) -> Option<(&str, usize)> {
        self.entries.get(key).map(|e| (e.value.as_str(), e.line))
    }

    fn quantity(&self, key: &str, dim: Dim, range: Range, default: f64) -> Result<f64, ParseError> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(e) => parse_quantity(&e.value, dim, range).map_err(|m| err(e.line, key, m)),
        }
    }

    fn optional(&self, key: &str, dim: Dim, range: Range) -> Result<Option<f64>, ParseError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => parse_quantity(&e.value, dim, range)
                .map(Some)
                .map_err(|m| err(e.line, key, m)),
        }
    }

    fn list(&self, key: &str, dim: Dim, range: Range) -> Result<Vec<f64>, ParseError> {
        match self.entries.get(key) {
            None => Ok(Vec::new()),
            Some(e) if e.value.is_empty() => Ok(Vec::new()),
            Some(e) => e
                .value
                .split(',')
                .map(|item| parse_quantity(item.trim(), dim, range))
                .collect::<Result<_, _>>()
                .map_err(|m| err(e.line, key, m)),
        }
    }

    fn count(&self, key: &str, default: usize) -> Result<usize, ParseError> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(e) => e.value.parse::<usize>().map_err(|_| {
                err(
                    e.line,
                    key,
                    format!("expected a whole number, got `{}`", e.value),
                )
            }),
        }
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool, ParseError> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(e) => match e.value.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(err(
                    e.line,
                    key,
                    format!("expected true/false, got `{other}`"),
                )),
            },
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }
}

fn parse_quantity(text: &str, dim: Dim, range: Range) -> Result<f64, String> {
    let text = text.trim();
    let split = text.find(char::is_whitespace).unwrap_or(text.len());
    let (number, unit) = text.split_at(split);
    let unit: String = unit.chars().filter(|c| !c.is_whitespace()).collect();
    let value: f64 = number
        .parse()
        .map_err(|_| format!("`{number}` is not a number"))?;
    if !value.is_finite() {
        return Err(format!("`{number}` is not finite"));
    }
    let factor = match dim.factor(&unit) {
        Some(f) => f,
        None if unit.is_empty() => {
            return Err(format!("missing unit (expected e.g. {})", dim.si_unit()))
        }
        None if dim == Dim::Number => return Err(format!("takes no unit, got `{unit}`")),
        None => {
            return Err(format!(
                "unit `{unit}` does not fit (expected e.g. {})",
                dim.si_unit()
            ))
        }
    };
    let si = value * factor;
    let ok = match range {
        Range::Positive => si > 0.0,
        Range::NonNegative => si >= 0.0,
        Range::Any => true,
    };
    if !ok {
        let want = if range == Range::Positive {
            "> 0"
        } else {
            ">= 0"
        };
        return Err(format!("value {text} out of range (must be {want})"));
    }
    Ok(si)
}

/// Config key behind a physics validation failure.
fn physics_err(doc: &Doc, e: PhysicsError) -> ParseError {
    let key = match &e {
        PhysicsError::InvalidParameter { name, .. } => match *name {
            "mass" => "mass_s",
            "spring_k" => "spring_k_s",
            "quality" => "quality_s",
            "target_amplitude" => "amplitude_s",
            "time_delay" => "tau1f",
            "natural_freq" => "natural_freq_s",
            "magnet_spring_k" => "spring_k_m",
            "magnet_quality" => "quality_m",
            "pump_amplitude" => "amplitude_m",
            "magnet_time_delay" => "tau2f",
            "magnet_mass" => "mass_m",
            "magnet_natural_freq" => "natural_freq_m",
            "coupled_quality" => "quality_c",
            "rest_separation" => "s0",
            other => other,
        },
        _ => "natural_freq_s",
    };
    err(doc.line_of(key), key, e.to_string())
}

fn choice<T: Copy>(
    doc: &Doc,
    key: &str,
    options: &[(&str, T)],
    default: T,
) -> Result<T, ParseError> {
    let Some((value, line)) = doc.text(key) else {
        return Ok(default);
    };
    options
        .iter()
        .find(|(name, _)| *name == value)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            err(
                line,
                key,
                format!("`{value}` is not one of {}", names.join(", ")),
            )
        })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    TimeDomain,
    Bode,
    DelaySweep,
    SeparationSweep,
    GradientResponse,
    Fit,
    Resolution,
    PotentialCurve,
}

const KINDS: &[(&str, Kind)] = &[
    ("timedomain", Kind::TimeDomain),
    ("bode", Kind::Bode),
    ("delay_sweep", Kind::DelaySweep),
    ("separation_sweep", Kind::SeparationSweep),
    ("gradient_response", Kind::GradientResponse),
    ("fit", Kind::Fit),
    ("resolution", Kind::Resolution),
    ("potential_curve", Kind::PotentialCurve),
];

fn sphere(doc: &Doc) -> Result<SphereParams, ParseError> {
    let k = doc.quantity(
        "spring_k_s",
        Dim::Stiffness,
        Range::Positive,
        defaults::SPRING_K,
    )?;
    let q = doc.quantity("quality_s", Dim::Number, Range::Positive, defaults::QUALITY)?;
    let r = doc.quantity("radius", Dim::Length, Range::NonNegative, defaults::RADIUS)?;
    let a = doc.quantity(
        "amplitude_s",
        Dim::Length,
        Range::NonNegative,
        defaults::SPHERE_AMPLITUDE,
    )?;
    let tau = doc.quantity(
        "tau1f",
        Dim::Time,
        Range::NonNegative,
        defaults::SPHERE_DELAY,
    )?;
    let mass = doc.optional("mass_s", Dim::Mass, Range::Positive)?;
    let w = doc.optional("natural_freq_s", Dim::AngularFrequency, Range::Positive)?;
    let p = match (mass, w) {
        (Some(m), Some(w)) => SphereParams {
            mass: m,
            radius: r,
            spring_k: k,
            quality: q,
            natural_freq: w,
            target_amplitude: a,
            time_delay: tau,
        },
        (Some(m), None) => {
            SphereParams::new(m, r, k, q, a, tau).map_err(|e| physics_err(doc, e))?
        }
        (None, w) => {
            SphereParams::from_frequency(w.unwrap_or(2.0 * PI * defaults::F0_HZ), r, k, q, a, tau)
                .map_err(|e| physics_err(doc, e))?
        }
    };
    p.validate().map_err(|e| physics_err(doc, e))?;
    Ok(p)
}

fn magnet(doc: &Doc) -> Result<MagnetParams, ParseError> {
    let nominal = defaults::magnet();
    let k = doc.quantity(
        "spring_k_m",
        Dim::Stiffness,
        Range::Positive,
        nominal.spring_k,
    )?;
    let mass = doc.optional("mass_m", Dim::Mass, Range::Positive)?;
    let w = doc.optional("natural_freq_m", Dim::AngularFrequency, Range::Positive)?;
    let (mass, w) = match (mass, w) {
        (Some(m), Some(w)) => (m, w),
        (Some(m), None) => (m, (k / m).sqrt()),
        (None, w) => {
            let w = w.unwrap_or(2.0 * PI * defaults::F0_HZ);
            (k / (w * w), w)
        }
    };
    let p = MagnetParams {
        spring_k: k,
        quality: doc.quantity("quality_m", Dim::Number, Range::Positive, nominal.quality)?,
        mass: Some(mass),
        natural_freq: Some(w),
        pump_amplitude: doc.quantity(
            "amplitude_m",
            Dim::Length,
            Range::NonNegative,
            nominal.pump_amplitude,
        )?,
        time_delay: doc.quantity("tau2f", Dim::Time, Range::NonNegative, nominal.time_delay)?,
        moment: doc.quantity("moment", Dim::Moment, Range::Any, nominal.moment)?,
        field_angle: doc.quantity("field_angle", Dim::Angle, Range::Any, nominal.field_angle)?,
    };
    p.validate().map_err(|e| physics_err(doc, e))?;
    Ok(p)
}

fn sim_config(doc: &Doc) -> Result<SimConfig, ParseError> {
    let nominal = defaults::sim_config();
    let coupling = CouplingConfig {
        rest_separation: doc.quantity(
            "s0",
            Dim::Length,
            Range::Positive,
            nominal.coupling.rest_separation,
        )?,
        min_gap: doc.quantity(
            "min_gap",
            Dim::Length,
            Range::Positive,
            nominal.coupling.min_gap,
        )?,
        coupled_quality: doc.quantity(
            "quality_c",
            Dim::Number,
            Range::Positive,
            nominal.coupling.coupled_quality,
        )?,
    };
    let lock = match choice(doc, "lock", &[("tracking", false), ("fixed", true)], false)? {
        false => {
            if let Some((_, line)) = doc.text("lock_frequency") {
                return Err(err(line, "lock_frequency", "only used with `lock = fixed`"));
            }
            FrequencyLock::Tracking
        }
        true => {
            let f = doc.optional("lock_frequency", Dim::Frequency, Range::Positive)?;
            let frequency = f.ok_or_else(|| {
                err(
                    doc.line_of("lock"),
                    "lock_frequency",
                    "required with `lock = fixed`",
                )
            })?;
            FrequencyLock::Fixed { frequency }
        }
    };
    let kind = choice(
        doc,
        "gradient",
        &[
            ("none", SignalKind::None),
            ("constant", SignalKind::Constant),
            ("sine", SignalKind::Sine),
        ],
        nominal.gradient.kind,
    )?;
    let amplitude_range = if kind == SignalKind::Constant {
        Range::Any
    } else {
        Range::NonNegative
    };
    let gradient = GradientSignal {
        kind,
        amplitude_pp: doc.quantity("gradient_amplitude", Dim::Gradient, amplitude_range, 0.0)?,
        frequency: doc.quantity(
            "gradient_frequency",
            Dim::Frequency,
            Range::NonNegative,
            0.0,
        )?,
    };
    let cfg = SimConfig {
        sphere: sphere(doc)?,
        magnet: magnet(doc)?,
        coupling,
        dt: doc.quantity("dt", Dim::Time, Range::Positive, nominal.dt)?,
        duration: doc.quantity("duration", Dim::Time, Range::Positive, nominal.duration)?,
        magnet_mode: choice(
            doc,
            "magnet_mode",
            &[
                ("prescribed", MagnetMode::Prescribed),
                ("full_ode", MagnetMode::FullOde),
            ],
            nominal.magnet_mode,
        )?,
        drive_mode: choice(
            doc,
            "drive_mode",
            &[
                ("agc", DriveMode::Agc),
                ("constant_gain", DriveMode::ConstantGain),
            ],
            nominal.drive_mode,
        )?,
        lock,
        agc: AgcSettings {
            initial_gain: doc.quantity(
                "agc_initial_gain",
                Dim::Number,
                Range::NonNegative,
                nominal.agc.initial_gain,
            )?,
            max_gain: doc.quantity(
                "agc_max_gain",
                Dim::Number,
                Range::NonNegative,
                nominal.agc.max_gain,
            )?,
        },
        gradient,
        record_decimation: doc.count("record_decimation", nominal.record_decimation)?,
        ac_coupled: doc.flag("ac_coupled", nominal.ac_coupled)?,
        pump_phase: doc.quantity("pump_phase", Dim::Angle, Range::Any, nominal.pump_phase)?,
    };
    cfg.coupling.validate().map_err(|e| physics_err(doc, e))?;
    cfg.validate()
        .map_err(|e| err(0, "config", e.to_string()))?;
    Ok(cfg)
}

/// Keys that only make sense for some experiments.
const EXPERIMENT_KEYS: &[(&str, &[Kind])] = &[
    (
        "sweep_start",
        &[
            Kind::Bode,
            Kind::DelaySweep,
            Kind::SeparationSweep,
            Kind::Fit,
            Kind::PotentialCurve,
        ],
    ),
    (
        "sweep_stop",
        &[
            Kind::Bode,
            Kind::DelaySweep,
            Kind::SeparationSweep,
            Kind::Fit,
            Kind::PotentialCurve,
        ],
    ),
    (
        "sweep_points",
        &[
            Kind::Bode,
            Kind::DelaySweep,
            Kind::SeparationSweep,
            Kind::Fit,
            Kind::PotentialCurve,
        ],
    ),
    ("delays", &[Kind::TimeDomain]),
    ("separations", &[Kind::Bode]),
    ("cavities", &[Kind::PotentialCurve]),
    ("s_freq", &[Kind::Resolution]),
    ("counter_ppm", &[Kind::Resolution]),
    ("ref_freq", &[Kind::Resolution]),
];

fn experiment(doc: &Doc, kind: Kind) -> Result<Experiment, ParseError> {
    for (key, kinds) in EXPERIMENT_KEYS {
        if let Some((_, line)) = doc.text(key) {
            if !kinds.contains(&kind) {
                return Err(err(line, key, "not used by this experiment"));
            }
        }
    }
    let range =
        |dim: Dim, lo: f64, hi: f64, n: usize, r: Range| -> Result<(f64, f64, usize), ParseError> {
            let start = doc.quantity("sweep_start", dim, r, lo)?;
            let stop = doc.quantity("sweep_stop", dim, r, hi)?;
            let points = doc.count("sweep_points", n)?;
            if points < 2 {
                return Err(err(
                    doc.line_of("sweep_points"),
                    "sweep_points",
                    "need at least 2",
                ));
            }
            if !(stop > start) {
                return Err(err(
                    doc.line_of("sweep_stop"),
                    "sweep_stop",
                    "must exceed sweep_start",
                ));
            }
            Ok((start, stop, points))
        };
    Ok(match kind {
        Kind::TimeDomain => Experiment::TimeDomain {
            delays: doc.list("delays", Dim::Time, Range::NonNegative)?,
        },
        Kind::Bode => {
            let (f_lo, f_hi, points) = range(Dim::Frequency, 800.0, 1050.0, 101, Range::Positive)?;
            Experiment::Bode {
                f_lo,
                f_hi,
                points,
                separations: doc.list("separations", Dim::Length, Range::Positive)?,
            }
        }
        Kind::DelaySweep => {
            let (start, stop, points) = range(Dim::Time, 0.0, 1.3e-3, 53, Range::NonNegative)?;
            Experiment::DelaySweep {
                start,
                stop,
                points,
            }
        }
        Kind::SeparationSweep | Kind::Fit => {
            let (start, stop, points) = range(Dim::Length, 98.5e-9, 101.5e-9, 13, Range::Positive)?;
            if kind == Kind::Fit && points < 7 {
                return Err(err(
                    doc.line_of("sweep_points"),
                    "sweep_points",
                    "a fit needs at least 7 separations",
                ));
            }
            if kind == Kind::Fit {
                Experiment::Fit {
                    start,
                    stop,
                    points,
                }
            } else {
                Experiment::SeparationSweep {
                    start,
                    stop,
                    points,
                }
            }
        }
        Kind::GradientResponse => Experiment::GradientResponse,
        Kind::Resolution => Experiment::Resolution {
            s_freq: doc.quantity("s_freq", Dim::Sensitivity, Range::Positive, 6.0)?,
            counter_ppm: doc.quantity("counter_ppm", Dim::Ppm, Range::NonNegative, 10.0)?,
            ref_freq: doc.quantity("ref_freq", Dim::Frequency, Range::Positive, 1.0)?,
        },
        Kind::PotentialCurve => {
            let (start, stop, points) = range(Dim::Length, -60e-9, 20e-9, 801, Range::Any)?;
            let mut cavities = doc.list("cavities", Dim::Length, Range::Positive)?;
            if cavities.is_empty() {
                cavities.push(defaults::REST_SEPARATION);
            }
            for &c in &cavities {
                if c + start <= 0.0 {
                    return Err(err(
                        doc.line_of("sweep_start"),
                        "sweep_start",
                        format!("grid reaches contact for cavity {c:e} m"),
                    ));
                }
            }
            Experiment::PotentialCurve {
                cavities,
                start,
                stop,
                points,
            }
        }
    })
}

/// Parses a scenario document.
pub fn parse_config(text: &str) -> Result<ScenarioSpec, ParseError> {
    let doc = Doc::read(text)?;
    let name = match doc.text("name") {
        None => "scenario".to_string(),
        Some(("", line)) => return Err(err(line, "name", "must not be empty")),
        Some((v, line)) => {
            if !v
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(err(line, "name", "use letters, digits, `_` or `-`"));
            }
            v.to_string()
        }
    };
    let kind = choice(&doc, "experiment", KINDS, Kind::TimeDomain)?;
    let base = sim_config(&doc)?;
    let experiment = experiment(&doc, kind)?;
    let output_dir = doc.text("output_dir").map(|(v, _)| PathBuf::from(v));
    Ok(ScenarioSpec {
        name,
        base,
        experiment,
        output_dir,
    })
}

fn q(out: &mut String, key: &str, value: f64, dim: Dim) {
    let unit = dim.si_unit();
    if unit.is_empty() {
        let _ = writeln!(out, "{key} = {value:e}");
    } else {
        let _ = writeln!(out, "{key} = {value:e} {unit}");
    }
}

fn list(out: &mut String, key: &str, values: &[f64], dim: Dim) {
    let items: Vec<String> = values
        .iter()
        .map(|v| format!("{v:e} {}", dim.si_unit()))
        .collect();
    let _ = writeln!(out, "{key} = {}", items.join(", "));
}

/// Writes a document that parses back to `spec`.
pub fn print(spec: &ScenarioSpec) -> String {
    let c = &spec.base;
    let mut out = String::new();
    let _ = writeln!(out, "name = {}", spec.name);
    let kind = match spec.experiment {
        Experiment::TimeDomain { .. } => "timedomain",
        Experiment::Bode { .. } => "bode",
        Experiment::DelaySweep { .. } => "delay_sweep",
        Experiment::SeparationSweep { .. } => "separation_sweep",
        Experiment::GradientResponse => "gradient_response",
        Experiment::Fit { .. } => "fit",
        Experiment::Resolution { .. } => "resolution",
        Experiment::PotentialCurve { .. } => "potential_curve",
    };
    let _ = writeln!(out, "experiment = {kind}");
    if let Some(dir) = &spec.output_dir {
        let _ = writeln!(out, "output_dir = {}", dir.display());
    }

    out.push_str("\n# sphere\n");
    q(&mut out, "mass_s", c.sphere.mass, Dim::Mass);
    q(
        &mut out,
        "natural_freq_s",
        c.sphere.natural_freq,
        Dim::AngularFrequency,
    );
    q(&mut out, "spring_k_s", c.sphere.spring_k, Dim::Stiffness);
    q(&mut out, "quality_s", c.sphere.quality, Dim::Number);
    q(&mut out, "radius", c.sphere.radius, Dim::Length);
    q(
        &mut out,
        "amplitude_s",
        c.sphere.target_amplitude,
        Dim::Length,
    );
    q(&mut out, "tau1f", c.sphere.time_delay, Dim::Time);

    out.push_str("\n# magnet\n");
    if let Some(m) = c.magnet.mass {
        q(&mut out, "mass_m", m, Dim::Mass);
    }
    if let Some(w) = c.magnet.natural_freq {
        q(&mut out, "natural_freq_m", w, Dim::AngularFrequency);
    }
    q(&mut out, "spring_k_m", c.magnet.spring_k, Dim::Stiffness);
    q(&mut out, "quality_m", c.magnet.quality, Dim::Number);
    q(
        &mut out,
        "amplitude_m",
        c.magnet.pump_amplitude,
        Dim::Length,
    );
    q(&mut out, "tau2f", c.magnet.time_delay, Dim::Time);
    q(&mut out, "moment", c.magnet.moment, Dim::Moment);
    q(&mut out, "field_angle", c.magnet.field_angle, Dim::Angle);

    out.push_str("\n# coupling\n");
    q(&mut out, "s0", c.coupling.rest_separation, Dim::Length);
    q(&mut out, "min_gap", c.coupling.min_gap, Dim::Length);
    q(
        &mut out,
        "quality_c",
        c.coupling.coupled_quality,
        Dim::Number,
    );

    out.push_str("\n# integration and control\n");
    q(&mut out, "dt", c.dt, Dim::Time);
    q(&mut out, "duration", c.duration, Dim::Time);
    let mode = match c.magnet_mode {
        MagnetMode::Prescribed => "prescribed",
        MagnetMode::FullOde => "full_ode",
    };
    let _ = writeln!(out, "magnet_mode = {mode}");
    let drive = match c.drive_mode {
        DriveMode::Agc => "agc",
        DriveMode::ConstantGain => "constant_gain",
    };
    let _ = writeln!(out, "drive_mode = {drive}");
    match c.lock {
        FrequencyLock::Tracking => {
            let _ = writeln!(out, "lock = tracking");
        }
        FrequencyLock::Fixed { frequency } => {
            let _ = writeln!(out, "lock = fixed");
            q(&mut out, "lock_frequency", frequency, Dim::Frequency);
        }
    }
    q(
        &mut out,
        "agc_initial_gain",
        c.agc.initial_gain,
        Dim::Number,
    );
    q(&mut out, "agc_max_gain", c.agc.max_gain, Dim::Number);
    let _ = writeln!(out, "record_decimation = {}", c.record_decimation);
    let _ = writeln!(out, "ac_coupled = {}", c.ac_coupled);
    q(&mut out, "pump_phase", c.pump_phase, Dim::Angle);

    out.push_str("\n# gradient input\n");
    let g = match c.gradient.kind {
        SignalKind::None => "none",
        SignalKind::Constant => "constant",
        SignalKind::Sine => "sine",
    };
    let _ = writeln!(out, "gradient = {g}");
    q(
        &mut out,
        "gradient_amplitude",
        c.gradient.amplitude_pp,
        Dim::Gradient,
    );
    q(
        &mut out,
        "gradient_frequency",
        c.gradient.frequency,
        Dim::Frequency,
    );

    out.push_str("\n# experiment\n");
    let sweep = |out: &mut String, start: f64, stop: f64, points: usize, dim: Dim| {
        q(out, "sweep_start", start, dim);
        q(out, "sweep_stop", stop, dim);
        let _ = writeln!(out, "sweep_points = {points}");
    };
    match &spec.experiment {
        Experiment::TimeDomain { delays } => list(&mut out, "delays", delays, Dim::Time),
        Experiment::Bode {
            f_lo,
            f_hi,
            points,
            separations,
        } => {
            sweep(&mut out, *f_lo, *f_hi, *points, Dim::Frequency);
            list(&mut out, "separations", separations, Dim::Length);
        }
        Experiment::DelaySweep {
            start,
            stop,
            points,
        } => sweep(&mut out, *start, *stop, *points, Dim::Time),
        Experiment::SeparationSweep {
            start,
            stop,
            points,
        }
        | Experiment::Fit {
            start,
            stop,
            points,
        } => sweep(&mut out, *start, *stop, *points, Dim::Length),
        Experiment::GradientResponse => {}
        Experiment::Resolution {
            s_freq,
            counter_ppm,
            ref_freq,
        } => {
            q(&mut out, "s_freq", *s_freq, Dim::Sensitivity);
            q(&mut out, "counter_ppm", *counter_ppm, Dim::Ppm);
            q(&mut out, "ref_freq", *ref_freq, Dim::Frequency);
        }
        Experiment::PotentialCurve {
            cavities,
            start,
            stop,
            points,
        } => {
            sweep(&mut out, *start, *stop, *points, Dim::Length);
            list(&mut out, "cavities", cavities, Dim::Length);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_nominal() {
        let spec = parse_config("").unwrap();
        assert_eq!(spec.base, defaults::sim_config());
        assert_eq!(spec.experiment, Experiment::TimeDomain { delays: vec![] });
    }

    #[test]
    fn single_override() {
        let spec = parse_config("tau2f = 150 us\n").unwrap();
        assert!((spec.base.magnet.time_delay - 1.5e-4).abs() < 1e-18);
        let mut expect = defaults::sim_config();
        expect.magnet.time_delay = spec.base.magnet.time_delay;
        assert_eq!(spec.base, expect);
    }

    #[test]
    fn missing_unit_names_the_key() {
        let e = parse_config("# comment\ntau2f = 150\n").unwrap_err();
        assert_eq!(e.key, "tau2f");
        assert_eq!(e.line, 2);
        assert!(e.to_string().contains("tau2f"));
    }

    #[test]
    fn rejects_unknown_wrong_and_duplicate_keys() {
        assert_eq!(parse_config("colour = red").unwrap_err().key, "colour");
        assert_eq!(parse_config("s0 = 100 us").unwrap_err().key, "s0");
        assert_eq!(parse_config("s0 = -5 nm").unwrap_err().key, "s0");
        let e = parse_config("s0 = 100 nm\ns0 = 90 nm").unwrap_err();
        assert_eq!((e.key.as_str(), e.line), ("s0", 2));
        assert_eq!(
            parse_config("quality_s = 10 Hz").unwrap_err().key,
            "quality_s"
        );
        assert_eq!(
            parse_config("experiment = bode\ndelays = 1 us")
                .unwrap_err()
                .key,
            "delays"
        );
    }

    #[test]
    fn unit_suffixes() {
        let spec = parse_config(
            "spring_k_s = 30 mN/m\ngradient = sine\ngradient_amplitude = 4 pT/cm\n\
             gradient_frequency = 1 Hz\nmass_s = 1 ug\nfield_angle = 90 deg",
        )
        .unwrap();
        assert_eq!(spec.base.sphere.spring_k, 30e-3);
        assert!((spec.base.gradient.amplitude_pp - 4e-10).abs() < 1e-24);
        assert_eq!(spec.base.sphere.mass, 1e-9);
        assert!((spec.base.sphere.natural_freq - (30e-3f64 / 1e-9).sqrt()).abs() < 1e-9);
        assert!((spec.base.magnet.field_angle - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn inconsistent_sphere_frequency_is_rejected() {
        let e = parse_config("mass_s = 1 ug\nnatural_freq_s = 1 kHz").unwrap_err();
        assert_eq!(e.key, "natural_freq_s");
    }

    #[test]
    fn print_round_trips() {
        let texts = [
            "",
            "experiment = delay_sweep\ntau1f = 1.02 ms\nsweep_points = 7",
            "experiment = bode\nlock = fixed\nlock_frequency = 990 Hz\ndrive_mode = constant_gain\nseparations = 10 um, 100 nm",
            "experiment = potential_curve\ncavities = 100 nm, 95 nm\nsweep_start = -40 nm",
            "experiment = resolution\ns_freq = 2.5 Hz/(pT/cm)\nref_freq = 850 Hz\nname = res",
            "experiment = fit\namplitude_m = 1 nm\ngradient = constant\ngradient_amplitude = -3 pT/cm",
        ];
        for text in texts {
            let spec = parse_config(text).unwrap();
            let again = parse_config(&print(&spec)).unwrap();
            assert_eq!(spec, again, "{text}");
        }
    }
}
