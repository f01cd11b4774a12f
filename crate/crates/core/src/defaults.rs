//! Nominal device parameters.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::dynamics::{
    AgcSettings, DriveMode, FrequencyLock, GradientSignal, MagnetMode, SimConfig,
};
use crate::physics::{CouplingConfig, MagnetParams, SphereParams};

pub const F0_HZ: f64 = 1000.0;
pub const QUALITY: f64 = 1000.0;
pub const SPRING_K: f64 = 25e-3;
pub const RADIUS: f64 = 60e-6;
pub const SPHERE_AMPLITUDE: f64 = 20e-9;
pub const SPHERE_DELAY: f64 = 1.02e-3;
pub const PUMP_AMPLITUDE: f64 = 10e-9;
pub const PUMP_DELAY: f64 = 750e-6;
/// Pump reference: displacement maximum at the delayed crossing.
pub const PUMP_PHASE: f64 = FRAC_PI_2;
pub const REST_SEPARATION: f64 = 100e-9;
/// Moment that turns 4 pT/cm into 1 nm of deflection on a 25 mN/m spring.
pub const MOMENT: f64 = 0.0625;
/// 1 pT/cm in T/m.
pub const PT_PER_CM: f64 = 1e-10;

pub fn sphere() -> SphereParams {
    SphereParams::from_frequency(
        2.0 * PI * F0_HZ,
        RADIUS,
        SPRING_K,
        QUALITY,
        SPHERE_AMPLITUDE,
        SPHERE_DELAY,
    )
    .expect("nominal sphere parameters are valid")
}

pub fn magnet() -> MagnetParams {
    let w = 2.0 * PI * F0_HZ;
    MagnetParams {
        spring_k: SPRING_K,
        quality: QUALITY,
        mass: Some(SPRING_K / (w * w)),
        natural_freq: Some(w),
        pump_amplitude: PUMP_AMPLITUDE,
        time_delay: PUMP_DELAY,
        moment: MOMENT,
        field_angle: 0.0,
    }
}

/// Closed-loop nominal configuration: 2 s at 0.5 μs with the AGC drive.
pub fn sim_config() -> SimConfig {
    SimConfig {
        sphere: sphere(),
        magnet: magnet(),
        coupling: CouplingConfig::new(REST_SEPARATION, QUALITY),
        dt: SimConfig::DEFAULT_DT,
        duration: 2.0,
        magnet_mode: MagnetMode::Prescribed,
        drive_mode: DriveMode::Agc,
        lock: FrequencyLock::Tracking,
        agc: AgcSettings::default(),
        gradient: GradientSignal::NONE,
        record_decimation: SimConfig::DEFAULT_DECIMATION,
        ac_coupled: true,
        pump_phase: PUMP_PHASE,
    }
}
