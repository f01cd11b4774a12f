//! Frequency and envelope extraction, the sweep experiments, sensitivity,
//! curve fitting and resolution arithmetic.

mod fit;

pub use fit::{fit_inverse_power, nelder_mead, FitResult, Minimum, MAX_EXPONENT};

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::defaults::PT_PER_CM;
use crate::dynamics::{
    self, Crossing, CrossingDetector, Cycle, DriveMode, Event, EventKind, FrequencyLock, SimConfig,
    TimeSeries,
};
use crate::error::{Result, SimError};

/// Delay-sweep readout time.
pub const READOUT_TIME: f64 = 0.35;
/// Cycles averaged for a steady-state frequency in the separation sweep.
pub const SEPARATION_CYCLES: usize = 50;
/// Window of the f₀C tracker in the gradient-response experiment.
pub const GRADIENT_WINDOW: f64 = 0.1;

/// Windowed coupled-resonance estimate.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrequencyTrack {
    pub window: f64,
    /// Window centres (s).
    pub times: Vec<f64>,
    /// Hz.
    pub f0c: Vec<f64>,
}

/// Complete cycles of a series: the controller's own when the run recorded
/// them, otherwise detected from the samples about zero.
pub fn cycles_of(ts: &TimeSeries) -> Vec<Cycle> {
    if !ts.cycles.is_empty() {
        return ts.cycles.clone();
    }
    let mut det = CrossingDetector::new(0.0, false);
    ts.t.iter()
        .zip(&ts.x_s)
        .filter_map(|(&t, &x)| match det.push(t, x) {
            Crossing::Complete(c) => Some(c),
            _ => None,
        })
        .collect()
}

/// Falling-crossing times of a series.
pub fn crossing_times(ts: &TimeSeries) -> Vec<f64> {
    let cycles = cycles_of(ts);
    let mut out = Vec::with_capacity(cycles.len() + 1);
    if let Some(first) = cycles.first() {
        out.push(first.start);
    }
    out.extend(cycles.iter().map(|c| c.end));
    out
}

/// Windows of width `window` advancing by half a window; each reports
/// (N − 1)/(t_N − t₁) over its N crossings. Windows with fewer than three
/// crossings are dropped.
pub fn estimate_frequency(ts: &TimeSeries, window: f64) -> Result<FrequencyTrack> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(SimError::Precondition {
            operation: "estimate_frequency",
            reason: format!("window {window} must be > 0"),
        });
    }
    let mut track = FrequencyTrack {
        window,
        ..Default::default()
    };
    let (Some(&t0), Some(&t_end)) = (ts.t.first(), ts.t.last()) else {
        return Ok(track);
    };
    let crossings = crossing_times(ts);
    let hop = 0.5 * window;
    let mut k = 0u64;
    let mut lo = 0usize;
    loop {
        let start = t0 + k as f64 * hop;
        let end = start + window;
        if end > t_end + 1e-12 * window {
            break;
        }
        while lo < crossings.len() && crossings[lo] < start {
            lo += 1;
        }
        let inside: Vec<f64> = crossings[lo..]
            .iter()
            .copied()
            .take_while(|&c| c < end)
            .collect();
        if inside.len() >= 3 {
            let span = inside[inside.len() - 1] - inside[0];
            track.times.push(start + hop);
            track.f0c.push((inside.len() - 1) as f64 / span);
        }
        k += 1;
    }
    Ok(track)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    /// Time of the cycle maximum (s).
    pub time: f64,
    /// Half the peak-to-peak excursion of the cycle (m).
    pub amplitude: f64,
}

/// One amplitude per complete cycle.
pub fn amplitude_envelope(ts: &TimeSeries) -> Vec<EnvelopePoint> {
    cycles_of(ts)
        .iter()
        .map(|c| EnvelopePoint {
            time: c.peak_time,
            amplitude: c.envelope,
        })
        .collect()
}

/// A named column with physical unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
    pub values: Vec<Option<f64>>,
}

impl Column {
    pub fn new(name: &str, unit: &str, values: Vec<Option<f64>>) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            values,
        }
    }
}

/// Outcome of a parameter sweep. `summaries[i]` is `None` when the point
/// has no reading, which for the time-domain sweeps means it pulled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub swept_name: String,
    pub swept_unit: String,
    pub swept_values: Vec<f64>,
    pub summary_name: String,
    pub summary_unit: String,
    pub summaries: Vec<Option<f64>>,
    /// Events of each run, without the crossing summary.
    pub per_point_events: Vec<Vec<Event>>,
    pub extra: Vec<Column>,
}

impl SweepResult {
    pub fn len(&self) -> usize {
        self.swept_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.swept_values.is_empty()
    }

    pub fn pulled_in(&self, i: usize) -> bool {
        self.per_point_events[i]
            .iter()
            .any(|e| e.kind == EventKind::PullIn)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.extra.iter().find(|c| c.name == name)
    }
}

fn notable_events(ts: &TimeSeries) -> Vec<Event> {
    ts.events
        .iter()
        .filter(|e| !matches!(e.kind, EventKind::CrossingSummary { .. }))
        .copied()
        .collect()
}

fn check_monotone(operation: &'static str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(SimError::Precondition {
            operation,
            reason: "no sweep values".into(),
        });
    }
    let up = values.windows(2).all(|w| w[1] > w[0]);
    let down = values.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) || values.iter().any(|v| !v.is_finite()) {
        return Err(SimError::Precondition {
            operation,
            reason: "sweep values must be finite and strictly monotone".into(),
        });
    }
    Ok(())
}

/// Runs one simulation per configuration, in parallel, results in input order.
pub fn run_all(configs: Vec<SimConfig>) -> Result<Vec<TimeSeries>> {
    configs.par_iter().map(dynamics::run).collect()
}

/// Steady amplitude (m) and phase (rad) of x_S against the drive
/// sin(ω(t + τ₁)), by quadrature demodulation over whole periods at the
/// end of the record.
fn demodulate(ts: &TimeSeries, frequency: f64, time_delay: f64) -> Option<(f64, f64)> {
    let t_end = *ts.t.last()?;
    let period = 1.0 / frequency;
    let span = (0.25f64).min(0.25 * t_end);
    let periods = (span / period).floor().max(1.0);
    let t_start = t_end - periods * period;
    if t_start < 0.0 {
        return None;
    }
    let first = ts.t.partition_point(|&t| t < t_start);
    let idx = first..ts.t.len();
    let n = idx.len();
    if n < 8 {
        return None;
    }
    let mean = ts.x_s[idx.clone()].iter().sum::<f64>() / n as f64;
    let w = 2.0 * PI * frequency;
    let (mut i_sum, mut q_sum) = (0.0, 0.0);
    for k in idx {
        let th = w * (ts.t[k] + time_delay);
        let x = ts.x_s[k] - mean;
        i_sum += x * th.sin();
        q_sum += x * th.cos();
    }
    let (i, q) = (2.0 * i_sum / n as f64, 2.0 * q_sum / n as f64);
    Some((i.hypot(q), q.atan2(i)))
}

/// Open-loop frequency response of the sphere. Each point drives at a fixed
/// frequency with constant gain for `cfg.duration` and reads amplitude and
/// phase at the end. Amplitude is in dB relative to the static deflection
/// gain·A_S.
pub fn bode_sweep(cfg: &SimConfig, f_lo: f64, f_hi: f64, n_points: usize) -> Result<SweepResult> {
    const OP: &str = "bode_sweep";
    if !(f_lo > 0.0 && f_lo < f_hi && f_hi.is_finite()) || n_points < 2 {
        return Err(SimError::Precondition {
            operation: OP,
            reason: format!("need 0 < f_lo < f_hi and n >= 2, got {f_lo}, {f_hi}, {n_points}"),
        });
    }
    if cfg.drive_mode != DriveMode::ConstantGain {
        return Err(SimError::Precondition {
            operation: OP,
            reason: "drive mode must be constant_gain".into(),
        });
    }
    let freqs: Vec<f64> = (0..n_points)
        .map(|i| f_lo + (f_hi - f_lo) * i as f64 / (n_points - 1) as f64)
        .collect();
    let configs = freqs
        .iter()
        .map(|&f| SimConfig {
            lock: FrequencyLock::Fixed { frequency: f },
            ..*cfg
        })
        .collect();
    let runs = run_all(configs)?;
    let static_defl = cfg.agc.initial_gain * cfg.sphere.target_amplitude;
    let mut db = Vec::new();
    let mut amp = Vec::new();
    let mut phase = Vec::new();
    for (ts, &f) in runs.iter().zip(&freqs) {
        let r = if ts.pull_in_time().is_some() {
            None
        } else {
            demodulate(ts, f, cfg.sphere.time_delay)
        };
        db.push(r.map(|(a, _)| 20.0 * (a / static_defl).log10()));
        amp.push(r.map(|(a, _)| a));
        phase.push(r.map(|(_, p)| p));
    }
    Ok(SweepResult {
        swept_name: "frequency".into(),
        swept_unit: "Hz".into(),
        swept_values: freqs,
        summary_name: "amplitude".into(),
        summary_unit: "dB".into(),
        summaries: db,
        per_point_events: runs.iter().map(notable_events).collect(),
        extra: vec![
            Column::new("amplitude_m", "m", amp),
            Column::new("phase", "rad", phase),
        ],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodePeak {
    /// Hz.
    pub frequency: f64,
    /// Peak amplitude (m).
    pub amplitude: f64,
    /// Half-power width (Hz).
    pub width: f64,
    pub quality: f64,
}

/// Resonance peak of a Bode sweep: parabolic refinement of the maximum and
/// linear interpolation of the half-power crossings on either side.
pub fn bode_peak(sweep: &SweepResult) -> Result<BodePeak> {
    const OP: &str = "bode_peak";
    let amp = sweep.column("amplitude_m").ok_or(SimError::Precondition {
        operation: OP,
        reason: "sweep has no amplitude column".into(),
    })?;
    let f = &sweep.swept_values;
    let a: Vec<f64> = amp.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    let (imax, _) = a
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|x, y| x.1.total_cmp(y.1))
        .ok_or(SimError::Precondition {
            operation: OP,
            reason: "no finite amplitudes".into(),
        })?;
    if imax == 0 || imax + 1 == a.len() {
        return Err(SimError::Precondition {
            operation: OP,
            reason: "maximum at the edge of the sweep".into(),
        });
    }
    let (y0, y1, y2) = (a[imax - 1], a[imax], a[imax + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let h = f[imax + 1] - f[imax];
    let (f_peak, a_peak) = if denom < 0.0 {
        let s = 0.5 * (y0 - y2) / denom;
        (f[imax] + s * h, y1 - 0.25 * (y0 - y2) * s)
    } else {
        (f[imax], y1)
    };
    let half = a_peak / 2f64.sqrt();
    let cross = |range: Box<dyn Iterator<Item = usize>>, step: isize| -> Option<f64> {
        for i in range {
            let j = (i as isize + step) as usize;
            if a[i] >= half && a[j] < half {
                let frac = (a[i] - half) / (a[i] - a[j]);
                return Some(f[i] + frac * (f[j] - f[i]));
            }
        }
        None
    };
    let lo = cross(Box::new((1..=imax).rev()), -1);
    let hi = cross(Box::new(imax..a.len() - 1), 1);
    let (Some(lo), Some(hi)) = (lo, hi) else {
        return Err(SimError::Precondition {
            operation: OP,
            reason: "half-power points not inside the sweep".into(),
        });
    };
    let width = hi - lo;
    Ok(BodePeak {
        frequency: f_peak,
        amplitude: a_peak,
        width,
        quality: f_peak / width,
    })
}

/// Closed-loop runs over pump delays; records the envelope at 0.35 s.
pub fn delay_sweep(cfg: &SimConfig, delays: &[f64]) -> Result<SweepResult> {
    const OP: &str = "delay_sweep";
    if cfg.duration < 0.4 {
        return Err(SimError::Precondition {
            operation: OP,
            reason: format!("duration {} s is shorter than 0.4 s", cfg.duration),
        });
    }
    check_monotone(OP, delays)?;
    let configs = delays
        .iter()
        .map(|&tau| {
            let mut c = *cfg;
            c.magnet.time_delay = tau;
            c
        })
        .collect();
    let runs = run_all(configs)?;
    let summaries = runs
        .iter()
        .map(|ts| match ts.pull_in_time() {
            Some(tp) if tp <= READOUT_TIME => None,
            _ => ts.envelope_at(READOUT_TIME),
        })
        .collect();
    Ok(SweepResult {
        swept_name: "tau2f".into(),
        swept_unit: "s".into(),
        swept_values: delays.to_vec(),
        summary_name: "amplitude".into(),
        summary_unit: "m".into(),
        summaries,
        per_point_events: runs.iter().map(notable_events).collect(),
        extra: Vec::new(),
    })
}

/// Steady frequency and mean gap over the last `n` cycles of a run.
pub fn steady_readout(ts: &TimeSeries, n: usize) -> Option<(f64, f64)> {
    if ts.cycles.len() < n || n == 0 {
        return None;
    }
    let tail = &ts.cycles[ts.cycles.len() - n..];
    let (t1, t2) = (tail[0].start, tail[n - 1].end);
    let f = n as f64 / (t2 - t1);
    let lo = ts.t.partition_point(|&t| t < t1);
    let hi = ts.t.partition_point(|&t| t <= t2);
    if hi <= lo {
        return None;
    }
    let gap = ts.x_sm[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
    Some((f, gap))
}

/// Closed-loop runs over rest separations. Summary is the steady f₀C; the
/// `mean_gap` column holds the mean x_SM over the same cycles.
pub fn separation_sweep(cfg: &SimConfig, separations: &[f64]) -> Result<SweepResult> {
    const OP: &str = "separation_sweep";
    check_monotone(OP, separations)?;
    let configs = separations
        .iter()
        .map(|&s| {
            let mut c = *cfg;
            c.coupling.rest_separation = s;
            c
        })
        .collect();
    let runs = run_all(configs)?;
    let readouts: Vec<Option<(f64, f64)>> = runs
        .iter()
        .map(|ts| {
            if ts.pull_in_time().is_some() {
                None
            } else {
                steady_readout(ts, SEPARATION_CYCLES)
            }
        })
        .collect();
    Ok(SweepResult {
        swept_name: "rest_separation".into(),
        swept_unit: "m".into(),
        swept_values: separations.to_vec(),
        summary_name: "f0c".into(),
        summary_unit: "Hz".into(),
        summaries: readouts.iter().map(|r| r.map(|(f, _)| f)).collect(),
        per_point_events: runs.iter().map(notable_events).collect(),
        extra: vec![Column::new(
            "mean_gap",
            "m",
            readouts.iter().map(|r| r.map(|(_, g)| g)).collect(),
        )],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    /// Hz per pT/cm.
    pub s_freq: f64,
    /// Midpoint of the pair (m).
    pub at_separation: f64,
    /// pT/cm.
    pub equivalent_gradient_step: f64,
}

/// Gradient (T/m) whose force deflects a magnet on spring `k` by `dx`.
pub fn equivalent_gradient(dx: f64, magnet_k: f64, moment: f64, theta: f64) -> Result<f64> {
    let transduction = moment * theta.cos();
    if transduction.abs() < 1e-12 * moment.abs() || moment == 0.0 {
        return Err(SimError::Precondition {
            operation: "sensitivity",
            reason: format!("no transduction at field angle {theta} rad"),
        });
    }
    Ok(magnet_k * dx / transduction)
}

/// Forward-difference sensitivity between adjacent readable points of a
/// separation sweep. Uses the `mean_gap` column as abscissa when present.
pub fn sensitivity(
    sweep: &SweepResult,
    magnet_k: f64,
    moment: f64,
    theta: f64,
) -> Result<Vec<SensitivityResult>> {
    equivalent_gradient(1.0, magnet_k, moment, theta)?;
    let x: Vec<Option<f64>> = match sweep.column("mean_gap") {
        Some(c) => c.values.clone(),
        None => sweep.swept_values.iter().map(|&v| Some(v)).collect(),
    };
    let points: Vec<(f64, f64)> = x
        .iter()
        .zip(&sweep.summaries)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .collect();
    if points.len() < 2 {
        return Err(SimError::Precondition {
            operation: "sensitivity",
            reason: "need at least 2 readable sweep points".into(),
        });
    }
    points
        .windows(2)
        .map(|w| {
            let (dx, df) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            let grad = equivalent_gradient(dx, magnet_k, moment, theta)? / PT_PER_CM;
            Ok(SensitivityResult {
                s_freq: df / grad,
                at_separation: 0.5 * (w[0].0 + w[1].0),
                equivalent_gradient_step: grad.abs(),
            })
        })
        .collect()
}

/// Smallest resolvable gradient (aT/cm) for a counter of the given
/// fractional resolution (ppm) at reference frequency `ref_freq` (Hz).
pub fn best_case_resolution(s_freq: f64, counter_ppm: f64, ref_freq: f64) -> Result<f64> {
    if !(s_freq > 0.0 && counter_ppm >= 0.0 && ref_freq > 0.0) {
        return Err(SimError::Precondition {
            operation: "best_case_resolution",
            reason: format!(
                "need S > 0, ppm >= 0, ref_freq > 0; got {s_freq}, {counter_ppm}, {ref_freq}"
            ),
        });
    }
    let delta_f = counter_ppm * 1e-6 * ref_freq;
    // pT/cm → aT/cm
    Ok(delta_f / s_freq * 1e6)
}

/// Frequency (Hz) of the sinusoid that best explains `y(t)` in the least
/// squares sense, searched on a grid over [f_lo, f_hi] and refined by
/// golden section.
pub fn dominant_frequency(t: &[f64], y: &[f64], f_lo: f64, f_hi: f64) -> Option<f64> {
    if t.len() < 4 || t.len() != y.len() || !(f_lo > 0.0 && f_hi > f_lo) {
        return None;
    }
    let n = t.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let yc: Vec<f64> = y.iter().map(|v| v - mean).collect();
    // explained power of a + b sin + c cos, solved by 3x3 normal equations
    let power = |f: f64| -> f64 {
        let w = 2.0 * PI * f;
        let mut m = [[0.0f64; 3]; 3];
        let mut r = [0.0f64; 3];
        for (&ti, &yi) in t.iter().zip(&yc) {
            let b = [1.0, (w * ti).sin(), (w * ti).cos()];
            for i in 0..3 {
                r[i] += b[i] * yi;
                for j in 0..3 {
                    m[i][j] += b[i] * b[j];
                }
            }
        }
        match solve3(m, r) {
            Some(c) => c[0] * r[0] + c[1] * r[1] + c[2] * r[2],
            None => 0.0,
        }
    };
    let span = t[t.len() - 1] - t[0];
    let step = (0.02 / span).min((f_hi - f_lo) / 100.0);
    let n_grid = ((f_hi - f_lo) / step).ceil() as usize + 1;
    let (best_i, _) = (0..n_grid)
        .map(|i| power((f_lo + i as f64 * step).min(f_hi)))
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    let f0 = f_lo + best_i as f64 * step;
    let (mut a, mut b) = ((f0 - step).max(f_lo), (f0 + step).min(f_hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if power(c) > power(d) {
            b = d;
        } else {
            a = c;
        }
    }
    Some(0.5 * (a + b))
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in 0..3 {
            if row != col {
                let k = m[row][col] / m[col][col];
                for j in col..3 {
                    m[row][j] -= k * m[col][j];
                }
                r[row] -= k * r[col];
            }
        }
    }
    Some([r[0] / m[0][0], r[1] / m[1][1], r[2] / m[2][2]])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientResponse {
    pub track: FrequencyTrack,
    pub steady_state_time: Option<f64>,
    /// Dominant frequency of the track after settling (Hz); `None` when the
    /// track is flat.
    pub dominant_frequency: Option<f64>,
    /// Peak-to-peak excursion of the track after settling (Hz).
    pub peak_to_peak: f64,
}

/// Closed-loop run under the configured gradient, tracked with 100 ms
/// windows. Windows starting before the steady-state event (or before half
/// the run, if it never settles) are excluded.
pub fn gradient_response(cfg: &SimConfig) -> Result<GradientResponse> {
    const OP: &str = "gradient_response";
    if cfg.duration < 2.0 {
        return Err(SimError::Precondition {
            operation: OP,
            reason: format!("duration {} s is shorter than 2 s", cfg.duration),
        });
    }
    let ts = dynamics::run(cfg)?;
    if let Some(time) = ts.pull_in_time() {
        return Err(SimError::PulledIn {
            operation: OP,
            time,
        });
    }
    let track = estimate_frequency(&ts, GRADIENT_WINDOW)?;
    let steady = ts.steady_state_time();
    let settle = steady.unwrap_or(0.5 * cfg.duration);
    let (t, f): (Vec<f64>, Vec<f64>) = track
        .times
        .iter()
        .zip(&track.f0c)
        .filter(|(&t, _)| t - 0.5 * GRADIENT_WINDOW >= settle)
        .map(|(&t, &f)| (t, f))
        .unzip();
    let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
    let peak_to_peak = if f.is_empty() { 0.0 } else { hi - lo };
    let nyquist = 0.5 / (0.5 * GRADIENT_WINDOW);
    let dominant = if peak_to_peak > 0.0 {
        dominant_frequency(&t, &f, 0.2, nyquist)
    } else {
        None
    };
    Ok(GradientResponse {
        track,
        steady_state_time: steady,
        dominant_frequency: dominant,
        peak_to_peak,
    })
}
