//! Time-domain integration of the coupled sphere/magnet system with the
//! crossing-locked drive controller.
//!
//! The sphere obeys
//!   m ẍ_S + (m ω₀/Q) ẋ_S + k x_S = F_drive(t) + F_cas(x_SM)
//! and the gap is x_SM = s₀ + x_S − x_M. The magnet is either a prescribed
//! pump waveform or a second damped oscillator. The controller watches the
//! sphere for negative-slope zero crossings, holds the latest frequency
//! estimate between crossings and regenerates the f and 2f waveforms from
//! the last crossing time.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::physics::{self, CouplingConfig, MagnetParams, SphereParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnetMode {
    /// Magnet position is the pump waveform plus the gradient deflection.
    Prescribed,
    /// Magnet integrated as a forced oscillator including Casimir back-action.
    FullOde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveMode {
    /// Drive gain regulated once per cycle toward the target amplitude.
    Agc,
    /// Drive gain held at its initial value.
    ConstantGain,
}

/// How the controller obtains the drive frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FrequencyLock {
    /// Re-estimate ω̂ and re-anchor the waveforms at each crossing.
    Tracking,
    /// Open loop: fixed drive frequency (Hz), waveforms anchored at t = 0.
    Fixed { frequency: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgcSettings {
    /// Drive gain at t = 0 (also the constant gain in `ConstantGain` mode).
    pub initial_gain: f64,
    /// Upper limit of the regulated gain.
    pub max_gain: f64,
}

impl Default for AgcSettings {
    fn default() -> Self {
        Self {
            initial_gain: 1e-3,
            max_gain: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    None,
    Constant,
    Sine,
}

/// Field gradient seen by the magnet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientSignal {
    pub kind: SignalKind,
    /// Peak-to-peak gradient for `Sine`, level for `Constant` (T/m).
    pub amplitude_pp: f64,
    /// Hz; only used by `Sine`.
    pub frequency: f64,
}

impl GradientSignal {
    pub const NONE: Self = Self {
        kind: SignalKind::None,
        amplitude_pp: 0.0,
        frequency: 0.0,
    };

    pub fn constant(level: f64) -> Self {
        Self {
            kind: SignalKind::Constant,
            amplitude_pp: level,
            frequency: 0.0,
        }
    }

    pub fn sine(amplitude_pp: f64, frequency: f64) -> Self {
        Self {
            kind: SignalKind::Sine,
            amplitude_pp,
            frequency,
        }
    }

    /// Gradient (T/m) at time t.
    pub fn value(&self, t: f64) -> f64 {
        match self.kind {
            SignalKind::None => 0.0,
            SignalKind::Constant => self.amplitude_pp,
            SignalKind::Sine => 0.5 * self.amplitude_pp * (2.0 * PI * self.frequency * t).sin(),
        }
    }

    fn validate(&self) -> Result<()> {
        let amplitude_ok = match self.kind {
            SignalKind::Constant => self.amplitude_pp.is_finite(),
            _ => self.amplitude_pp.is_finite() && self.amplitude_pp >= 0.0,
        };
        if !amplitude_ok {
            return Err(SimError::Config(format!(
                "gradient amplitude {} must be >= 0",
                self.amplitude_pp
            )));
        }
        if !(self.frequency.is_finite() && self.frequency >= 0.0) {
            return Err(SimError::Config(format!(
                "gradient frequency {} must be >= 0",
                self.frequency
            )));
        }
        if self.kind == SignalKind::None && self.amplitude_pp != 0.0 {
            return Err(SimError::Config(
                "gradient kind `none` requires zero amplitude".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub sphere: SphereParams,
    pub magnet: MagnetParams,
    pub coupling: CouplingConfig,
    /// Integration step (s).
    pub dt: f64,
    /// Simulated time (s).
    pub duration: f64,
    pub magnet_mode: MagnetMode,
    pub drive_mode: DriveMode,
    pub lock: FrequencyLock,
    pub agc: AgcSettings,
    pub gradient: GradientSignal,
    /// Record every n-th integration step.
    pub record_decimation: usize,
    /// Detect crossings of x_S about its running per-cycle mean instead of
    /// about the spring rest position.
    pub ac_coupled: bool,
    /// Extra pump phase (rad) added to 2ω̂(t − t_c + τ₂). With π/2 the pump
    /// displacement peaks at the delayed crossing, which is the maximum-gain
    /// phase of the linearized parametric pump when τ₂ = 0.
    #[serde(default)]
    pub pump_phase: f64,
}

impl SimConfig {
    pub const DEFAULT_DT: f64 = 0.5e-6;
    pub const DEFAULT_DECIMATION: usize = 10;

    pub fn validate(&self) -> Result<()> {
        self.sphere.validate()?;
        self.magnet.validate()?;
        self.coupling.validate()?;
        self.gradient.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::Config(format!("dt = {} must be > 0", self.dt)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(SimError::Config(format!(
                "duration = {} must be > 0",
                self.duration
            )));
        }
        if !self.pump_phase.is_finite() {
            return Err(SimError::Config("pump_phase must be finite".into()));
        }
        if self.record_decimation == 0 {
            return Err(SimError::Config("record_decimation must be >= 1".into()));
        }
        let pump_hz = 2.0 * self.max_drive_hz();
        if self.dt > 1.0 / (200.0 * pump_hz) {
            return Err(SimError::Config(format!(
                "dt = {:e} s gives fewer than 200 samples per pump period at {pump_hz:.1} Hz",
                self.dt
            )));
        }
        if !(self.agc.initial_gain >= 0.0 && self.agc.max_gain >= self.agc.initial_gain) {
            return Err(SimError::Config(format!(
                "agc gains must satisfy 0 <= initial ({}) <= max ({})",
                self.agc.initial_gain, self.agc.max_gain
            )));
        }
        if let FrequencyLock::Fixed { frequency } = self.lock {
            if !(frequency > 0.0 && frequency.is_finite()) {
                return Err(SimError::Config(format!(
                    "fixed drive frequency {frequency} must be > 0"
                )));
            }
        }
        if self.magnet_mode == MagnetMode::FullOde
            && (self.magnet.mass.is_none() || self.magnet.natural_freq.is_none())
        {
            return Err(SimError::Config(
                "full_ode magnet mode needs magnet mass and natural frequency".into(),
            ));
        }
        Ok(())
    }

    fn max_drive_hz(&self) -> f64 {
        match self.lock {
            FrequencyLock::Tracking => self.sphere.natural_hz(),
            FrequencyLock::Fixed { frequency } => frequency.max(self.sphere.natural_hz()),
        }
    }

    fn initial_omega(&self) -> f64 {
        match self.lock {
            FrequencyLock::Tracking => self.sphere.natural_freq,
            FrequencyLock::Fixed { frequency } => 2.0 * PI * frequency,
        }
    }

    fn initial_anchor(&self) -> f64 {
        match self.lock {
            // x_S(0) = +A is a quarter period before a falling crossing
            FrequencyLock::Tracking => -0.75 * 2.0 * PI / self.sphere.natural_freq,
            FrequencyLock::Fixed { .. } => 0.0,
        }
    }

    /// Static magnet deflection (m) at time t.
    pub fn gradient_deflection(&self, t: f64) -> f64 {
        self.magnet.deflection(self.gradient.value(t))
    }
}

/// One completed sphere cycle, delimited by two falling crossings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    /// Interpolated crossing time closing the cycle (s).
    pub end: f64,
    /// Crossing time opening the cycle (s).
    pub start: f64,
    /// Half of the peak-to-peak excursion (m).
    pub envelope: f64,
    /// Time-averaged displacement over the cycle (m).
    pub mean: f64,
    /// Time of the cycle's maximum (s).
    pub peak_time: f64,
}

impl Cycle {
    pub fn period(&self) -> f64 {
        self.end - self.start
    }
}

/// Falling zero-crossing detector with linear interpolation and per-cycle
/// statistics. With `ac_coupled`, the reference level is the mean of the
/// previous complete cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingDetector {
    pub baseline: f64,
    pub ac_coupled: bool,
    prev: Option<(f64, f64)>,
    /// Set once the signal has been below the reference since the last crossing.
    armed: bool,
    last_crossing: Option<f64>,
    integral: f64,
    max: f64,
    min: f64,
    peak_time: f64,
}

/// Result of feeding one sample to the detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Crossing {
    None,
    /// First crossing seen; no complete cycle yet.
    First(f64),
    Complete(Cycle),
}

impl CrossingDetector {
    pub fn new(baseline: f64, ac_coupled: bool) -> Self {
        Self {
            baseline,
            ac_coupled,
            prev: None,
            armed: true,
            last_crossing: None,
            integral: 0.0,
            max: f64::NEG_INFINITY,
            min: f64::INFINITY,
            peak_time: 0.0,
        }
    }

    pub fn last_crossing(&self) -> Option<f64> {
        self.last_crossing
    }

    pub fn push(&mut self, t: f64, x: f64) -> Crossing {
        let Some((tp, xp)) = self.prev.replace((t, x)) else {
            self.track_extrema(t, x);
            return Crossing::None;
        };
        let (up, u) = (xp - self.baseline, x - self.baseline);
        if !(self.armed && up > 0.0 && u <= 0.0) {
            if u <= 0.0 {
                self.armed = true;
            }
            // trapezoid of the deviation over the segment
            self.integral += 0.5 * (up + u) * (t - tp);
            self.track_extrema(t, x);
            return Crossing::None;
        }
        let frac = up / (up - u);
        let tc = tp + frac * (t - tp);
        // the part of the segment before the crossing closes the cycle
        self.integral += 0.5 * up * (tc - tp);
        let result = match self.last_crossing {
            None => Crossing::First(tc),
            Some(start) => {
                let span = tc - start;
                let mean = self.baseline + self.integral / span;
                Crossing::Complete(Cycle {
                    end: tc,
                    start,
                    envelope: 0.5 * (self.max - self.min),
                    mean,
                    peak_time: self.peak_time,
                })
            }
        };
        let old_baseline = self.baseline;
        if let Crossing::Complete(c) = result {
            if self.ac_coupled {
                self.baseline = c.mean;
            }
        }
        self.last_crossing = Some(tc);
        self.armed = x <= self.baseline;
        self.max = f64::NEG_INFINITY;
        self.min = f64::INFINITY;
        // remainder of the segment opens the next cycle, relative to the new baseline
        self.integral = 0.5 * ((old_baseline - self.baseline) + (x - self.baseline)) * (t - tc);
        self.track_extrema(t, x);
        result
    }

    fn track_extrema(&mut self, t: f64, x: f64) {
        if x > self.max {
            self.max = x;
            self.peak_time = t;
        }
        if x < self.min {
            self.min = x;
        }
    }
}

/// Accepted range of a new period estimate relative to the held one.
pub const PERIOD_GUARD: (f64, f64) = (0.5, 1.5);

/// State of the drive controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    /// Current coupled-frequency estimate ω̂ (rad/s).
    pub omega: f64,
    /// Time the drive waveforms are referenced to (s).
    pub anchor: f64,
    /// Most recent crossing (s), if any.
    pub last_crossing: Option<f64>,
    /// Spacing of the two most recent crossings (s); zero until known.
    pub period_estimate: f64,
    pub agc_gain: f64,
    pub crossing_count: u64,
    pub detector: CrossingDetector,
}

impl ControllerState {
    pub fn new(cfg: &SimConfig) -> Self {
        let baseline = if cfg.ac_coupled {
            equilibrium_offset(cfg)
        } else {
            0.0
        };
        Self {
            omega: cfg.initial_omega(),
            anchor: cfg.initial_anchor(),
            last_crossing: None,
            period_estimate: 0.0,
            agc_gain: cfg.agc.initial_gain,
            crossing_count: 0,
            detector: CrossingDetector::new(baseline, cfg.ac_coupled),
        }
    }

    /// Feeds the latest sample. On a falling crossing the frequency
    /// estimate, waveform anchor and drive gain are refreshed. Returns the
    /// completed cycle, if any.
    pub fn update(&mut self, t: f64, x_s: f64, cfg: &SimConfig) -> Option<Cycle> {
        let crossing = self.detector.push(t, x_s);
        let tc = match crossing {
            Crossing::None => return None,
            Crossing::First(tc) => tc,
            Crossing::Complete(c) => c.end,
        };
        self.crossing_count += 1;
        if let Some(prev) = self.last_crossing {
            self.period_estimate = tc - prev;
        }
        self.last_crossing = Some(tc);
        if cfg.lock == FrequencyLock::Tracking {
            if self.period_estimate > 0.0 {
                // a spacing far from the held period means missed or spurious crossings
                let ratio = self.period_estimate * self.omega / (2.0 * PI);
                if (PERIOD_GUARD.0..=PERIOD_GUARD.1).contains(&ratio) {
                    self.omega = 2.0 * PI / self.period_estimate;
                }
            }
            self.anchor = tc;
        }
        match crossing {
            Crossing::Complete(c) => {
                if cfg.drive_mode == DriveMode::Agc {
                    let step = if c.envelope > 0.0 {
                        (cfg.sphere.target_amplitude / c.envelope).clamp(0.5, 2.0)
                    } else {
                        2.0
                    };
                    self.agc_gain = (self.agc_gain * step).min(cfg.agc.max_gain);
                }
                Some(c)
            }
            _ => None,
        }
    }

    /// Sphere drive force at time t under the held waveform.
    #[inline]
    pub fn drive(&self, t: f64, cfg: &SimConfig) -> f64 {
        physics::sphere_drive_force(t - self.anchor, self.omega, self.agc_gain, &cfg.sphere)
    }

    /// Pump phase 2ω̂(t − anchor + τ₂) + φ_p.
    #[inline]
    pub fn pump_phase(&self, t: f64, cfg: &SimConfig) -> f64 {
        2.0 * self.omega * (t - self.anchor + cfg.magnet.time_delay) + cfg.pump_phase
    }

    /// Unit pump waveform at time t.
    #[inline]
    pub fn pump_wave(&self, t: f64, cfg: &SimConfig) -> f64 {
        self.pump_phase(t, cfg).sin()
    }
}

/// Instantaneous mechanical state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: f64,
    pub x_s: f64,
    pub v_s: f64,
    pub x_m: f64,
    /// Magnet velocity; only integrated in full-ODE mode.
    pub v_m: f64,
    pub x_sm: f64,
    pub controller: ControllerState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EventKind {
    PullIn,
    SteadyState,
    CrossingSummary { count: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Decimated record of a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeSeries {
    pub sample_period: f64,
    pub t: Vec<f64>,
    pub x_s: Vec<f64>,
    pub x_m: Vec<f64>,
    pub x_sm: Vec<f64>,
    pub drive_s: Vec<f64>,
    /// Controller frequency estimate ω̂/2π (Hz).
    pub f_hat: Vec<f64>,
    pub events: Vec<Event>,
    /// Every completed cycle seen by the controller.
    pub cycles: Vec<Cycle>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn pull_in_time(&self) -> Option<f64> {
        self.events
            .iter()
            .find(|e| e.kind == EventKind::PullIn)
            .map(|e| e.time)
    }

    pub fn steady_state_time(&self) -> Option<f64> {
        self.events
            .iter()
            .find(|e| e.kind == EventKind::SteadyState)
            .map(|e| e.time)
    }

    /// Envelope of the last cycle completed at or before `t`.
    pub fn envelope_at(&self, t: f64) -> Option<f64> {
        self.cycles
            .iter()
            .take_while(|c| c.end <= t)
            .last()
            .map(|c| c.envelope)
    }

    /// Build a series from externally generated samples; used for analysis
    /// of synthetic signals.
    pub fn from_samples(t: Vec<f64>, x_s: Vec<f64>) -> Self {
        let n = t.len();
        let sample_period = if n > 1 { t[1] - t[0] } else { 0.0 };
        Self {
            sample_period,
            t,
            x_s,
            x_m: vec![0.0; n],
            x_sm: vec![0.0; n],
            drive_s: vec![0.0; n],
            f_hat: vec![0.0; n],
            events: Vec::new(),
            cycles: Vec::new(),
        }
    }
}

/// Signals a gap at or below the pull-in floor during a derivative evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullInSignal {
    pub gap: f64,
}

/// Constant coefficients of the equations of motion.
#[derive(Debug, Clone, Copy)]
struct Coefficients {
    s0: f64,
    g_min: f64,
    cas: f64,
    m_s: f64,
    c_s: f64,
    k_s: f64,
    m_m: f64,
    c_m: f64,
    k_m: f64,
}

impl Coefficients {
    fn new(cfg: &SimConfig) -> Self {
        let s = &cfg.sphere;
        let m = &cfg.magnet;
        let m_m = m.mass.unwrap_or(f64::NAN);
        let w_m = m.natural_freq.unwrap_or(f64::NAN);
        Self {
            s0: cfg.coupling.rest_separation,
            g_min: cfg.coupling.min_gap,
            cas: physics::force_coefficient(s.radius),
            m_s: s.mass,
            c_s: s.mass * s.natural_freq / s.quality,
            k_s: s.spring_k,
            m_m,
            c_m: m_m * w_m / m.quality,
            k_m: m.spring_k,
        }
    }
}

/// Magnet position under prescribed kinematics.
#[inline]
fn prescribed_magnet(t: f64, ctl: &ControllerState, cfg: &SimConfig) -> f64 {
    cfg.magnet.pump_amplitude * ctl.pump_wave(t, cfg) + cfg.gradient_deflection(t)
}

/// Sphere acceleration from Eq. of motion, given gap and drive force.
#[inline]
fn sphere_accel(co: &Coefficients, x_s: f64, v_s: f64, gap: f64, drive: f64) -> f64 {
    let f_cas = -co.cas / (gap * gap * gap);
    (drive + f_cas - co.c_s * v_s - co.k_s * x_s) / co.m_s
}

/// Sphere acceleration for the given state (m/s²).
pub fn acceleration_sphere(state: &SimState, cfg: &SimConfig) -> Result<f64, PullInSignal> {
    if state.x_sm <= 0.0 {
        return Err(PullInSignal { gap: state.x_sm });
    }
    let co = Coefficients::new(cfg);
    let drive = state.controller.drive(state.t, cfg);
    Ok(sphere_accel(&co, state.x_s, state.v_s, state.x_sm, drive))
}

/// Derivatives of [x_S, v_S, x_M, v_M].
#[inline]
fn derivatives(
    t: f64,
    y: &[f64; 4],
    ctl: &ControllerState,
    cfg: &SimConfig,
    co: &Coefficients,
) -> Result<[f64; 4], PullInSignal> {
    let x_m = match cfg.magnet_mode {
        MagnetMode::Prescribed => prescribed_magnet(t, ctl, cfg),
        MagnetMode::FullOde => y[2],
    };
    let gap = co.s0 + y[0] - x_m;
    if gap <= co.g_min {
        return Err(PullInSignal { gap });
    }
    let a_s = sphere_accel(co, y[0], y[1], gap, ctl.drive(t, cfg));
    let (dx_m, dv_m) = match cfg.magnet_mode {
        MagnetMode::Prescribed => (0.0, 0.0),
        MagnetMode::FullOde => {
            let f_cas_on_magnet = co.cas / (gap * gap * gap);
            let pump = co.k_m * cfg.magnet.pump_amplitude * ctl.pump_wave(t, cfg);
            let f_mag = physics::magnetic_force(
                cfg.magnet.moment,
                cfg.gradient.value(t),
                cfg.magnet.field_angle,
            );
            let a = (pump + f_cas_on_magnet + f_mag - co.c_m * y[3] - co.k_m * y[2]) / co.m_m;
            (y[3], a)
        }
    };
    Ok([y[1], a_s, dx_m, dv_m])
}

/// Advances the mechanical state by one RK4 step with the controller held.
/// Returns the pull-in signal if any stage reaches the gap floor.
pub fn step(state: &SimState, cfg: &SimConfig) -> Result<SimState, PullInSignal> {
    let co = Coefficients::new(cfg);
    step_with(state, cfg, &co, state.t + cfg.dt)
}

fn step_with(
    state: &SimState,
    cfg: &SimConfig,
    co: &Coefficients,
    t_next: f64,
) -> Result<SimState, PullInSignal> {
    let t = state.t;
    let h = t_next - t;
    let ctl = &state.controller;
    let y = [state.x_s, state.v_s, state.x_m, state.v_m];
    let add = |a: &[f64; 4], b: &[f64; 4], s: f64| {
        [
            a[0] + s * b[0],
            a[1] + s * b[1],
            a[2] + s * b[2],
            a[3] + s * b[3],
        ]
    };
    let k1 = derivatives(t, &y, ctl, cfg, co)?;
    let k2 = derivatives(t + 0.5 * h, &add(&y, &k1, 0.5 * h), ctl, cfg, co)?;
    let k3 = derivatives(t + 0.5 * h, &add(&y, &k2, 0.5 * h), ctl, cfg, co)?;
    let k4 = derivatives(t + h, &add(&y, &k3, h), ctl, cfg, co)?;
    let mut next = [0.0; 4];
    for i in 0..4 {
        next[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let x_m = match cfg.magnet_mode {
        MagnetMode::Prescribed => prescribed_magnet(t_next, ctl, cfg),
        MagnetMode::FullOde => next[2],
    };
    let x_sm = co.s0 + next[0] - x_m;
    if x_sm <= co.g_min {
        return Err(PullInSignal { gap: x_sm });
    }
    Ok(SimState {
        t: t_next,
        x_s: next[0],
        v_s: next[1],
        x_m,
        v_m: next[3],
        x_sm,
        controller: ctl.clone(),
    })
}

/// Number of cycles and relative spread used by the steady-state detector.
pub const STEADY_WINDOW: usize = 20;
pub const STEADY_SPREAD: f64 = 0.01;

/// Quasistatic sphere displacement at the rest separation, or zero when
/// no stable equilibrium exists.
pub fn equilibrium_offset(cfg: &SimConfig) -> f64 {
    let s0 = cfg.coupling.rest_separation;
    physics::static_equilibrium(s0, &cfg.sphere)
        .map(|g| g - s0)
        .unwrap_or(0.0)
}

/// Initial state: sphere at rest on the quasistatic equilibrium, displaced by
/// its target amplitude when the controller is tracking; magnet on its pump
/// waveform.
pub fn initial_state(cfg: &SimConfig) -> SimState {
    let controller = ControllerState::new(cfg);
    let lift = match cfg.lock {
        FrequencyLock::Tracking => cfg.sphere.target_amplitude,
        FrequencyLock::Fixed { .. } => 0.0,
    };
    let x_s = equilibrium_offset(cfg) + lift;
    let (x_m, v_m) = match cfg.magnet_mode {
        MagnetMode::Prescribed => (prescribed_magnet(0.0, &controller, cfg), 0.0),
        MagnetMode::FullOde => {
            let w = 2.0 * controller.omega;
            let phase = controller.pump_phase(0.0, cfg);
            (
                cfg.magnet.pump_amplitude * phase.sin() + cfg.gradient_deflection(0.0),
                cfg.magnet.pump_amplitude * w * phase.cos(),
            )
        }
    };
    SimState {
        t: 0.0,
        x_s,
        v_s: 0.0,
        x_m,
        v_m,
        x_sm: cfg.coupling.rest_separation + x_s - x_m,
        controller,
    }
}

/// Integrates the configured scenario to `duration` or pull-in.
pub fn run(cfg: &SimConfig) -> Result<TimeSeries> {
    cfg.validate()?;
    let mut state = initial_state(cfg);
    if state.x_sm <= cfg.coupling.min_gap {
        return Err(SimError::Config(format!(
            "initial gap {:e} m is below the pull-in floor",
            state.x_sm
        )));
    }
    Ok(integrate(cfg, &mut state))
}

fn integrate(cfg: &SimConfig, state: &mut SimState) -> TimeSeries {
    let co = Coefficients::new(cfg);
    let n_steps = (cfg.duration / cfg.dt).round() as u64;
    let decim = cfg.record_decimation as u64;
    let capacity = (n_steps / decim + 2) as usize;
    let mut ts = TimeSeries {
        sample_period: cfg.dt * decim as f64,
        t: Vec::with_capacity(capacity),
        x_s: Vec::with_capacity(capacity),
        x_m: Vec::with_capacity(capacity),
        x_sm: Vec::with_capacity(capacity),
        drive_s: Vec::with_capacity(capacity),
        f_hat: Vec::with_capacity(capacity),
        ..Default::default()
    };
    let record = |ts: &mut TimeSeries, s: &SimState| {
        ts.t.push(s.t);
        ts.x_s.push(s.x_s);
        ts.x_m.push(s.x_m);
        ts.x_sm.push(cfg.coupling.rest_separation + s.x_s - s.x_m);
        ts.drive_s.push(s.controller.drive(s.t, cfg));
        ts.f_hat.push(s.controller.omega / (2.0 * PI));
    };
    record(&mut ts, state);
    state.controller.update(state.t, state.x_s, cfg);

    let mut envelopes: VecDeque<f64> = VecDeque::with_capacity(STEADY_WINDOW);
    let mut steady = false;
    for n in 1..=n_steps {
        let t_next = n as f64 * cfg.dt;
        match step_with(state, cfg, &co, t_next) {
            Ok(next) => *state = next,
            Err(_) => {
                ts.events.push(Event {
                    time: state.t,
                    kind: EventKind::PullIn,
                });
                break;
            }
        }
        if let Some(cycle) = state.controller.update(state.t, state.x_s, cfg) {
            ts.cycles.push(cycle);
            if !steady {
                if envelopes.len() == STEADY_WINDOW {
                    envelopes.pop_front();
                }
                envelopes.push_back(cycle.envelope);
                if envelopes.len() == STEADY_WINDOW {
                    let (lo, hi) = envelopes
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
                            (lo.min(e), hi.max(e))
                        });
                    let mean = envelopes.iter().sum::<f64>() / STEADY_WINDOW as f64;
                    if mean > 0.0 && (hi - lo) / mean < STEADY_SPREAD {
                        steady = true;
                        ts.events.push(Event {
                            time: cycle.end,
                            kind: EventKind::SteadyState,
                        });
                    }
                }
            }
        }
        if n % decim == 0 {
            record(&mut ts, state);
        }
    }
    ts.events.push(Event {
        time: state.t,
        kind: EventKind::CrossingSummary {
            count: state.controller.crossing_count,
        },
    });
    ts
}
