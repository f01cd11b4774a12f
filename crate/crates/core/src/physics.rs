//! Closed-form force laws, potentials and quasistatic stability of the
//! sphere/magnet pair.
//!
//! Sign conventions: gaps are positive distances between the sphere and the
//! gold plate on the magnet. The Casimir force is reported as the force on
//! the sphere along +x_S, so it is negative (it pulls the sphere toward the
//! plate and closes the gap).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::PhysicsError;

/// CODATA 2018 constants used by the Casimir expressions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant (J·s).
    pub hbar: f64,
    /// Speed of light (m/s).
    pub c_light: f64,
}

pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
    hbar: 1.054_571_817e-34,
    c_light: 299_792_458.0,
};

/// π³ħc, the common prefactor of every sphere-plate expression (J·m).
#[inline]
pub fn casimir_prefactor() -> f64 {
    PI * PI * PI * CODATA_2018.hbar * CODATA_2018.c_light
}

/// Coefficient `C` in `F = -C/g³` for a sphere of the given radius (J·m²... N·m³).
#[inline]
pub fn force_coefficient(radius: f64) -> f64 {
    casimir_prefactor() / 360.0 * radius
}

/// Mechanical constants and drive settings of the sphere resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereParams {
    /// Effective mass (kg).
    pub mass: f64,
    /// Sphere radius (m).
    pub radius: f64,
    /// Unperturbed spring constant (N/m).
    pub spring_k: f64,
    /// Quality factor.
    pub quality: f64,
    /// Natural angular frequency sqrt(k/m) (rad/s).
    pub natural_freq: f64,
    /// Target oscillation amplitude of the drive (m).
    pub target_amplitude: f64,
    /// Time offset of the sphere drive waveform (s).
    pub time_delay: f64,
}

fn require_positive(name: &'static str, value: f64) -> Result<(), PhysicsError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(PhysicsError::InvalidParameter { name, value })
    }
}

fn require_non_negative(name: &'static str, value: f64) -> Result<(), PhysicsError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(PhysicsError::InvalidParameter { name, value })
    }
}

impl SphereParams {
    /// Builds sphere parameters from mass and stiffness; the natural
    /// frequency is derived.
    pub fn new(
        mass: f64,
        radius: f64,
        spring_k: f64,
        quality: f64,
        target_amplitude: f64,
        time_delay: f64,
    ) -> Result<Self, PhysicsError> {
        require_positive("mass", mass)?;
        require_non_negative("radius", radius)?;
        require_positive("spring_k", spring_k)?;
        require_positive("quality", quality)?;
        require_non_negative("target_amplitude", target_amplitude)?;
        require_non_negative("time_delay", time_delay)?;
        Ok(Self {
            mass,
            radius,
            spring_k,
            quality,
            natural_freq: (spring_k / mass).sqrt(),
            target_amplitude,
            time_delay,
        })
    }

    /// Builds sphere parameters from stiffness and natural frequency (rad/s);
    /// the mass is derived as k/ω².
    pub fn from_frequency(
        natural_freq: f64,
        radius: f64,
        spring_k: f64,
        quality: f64,
        target_amplitude: f64,
        time_delay: f64,
    ) -> Result<Self, PhysicsError> {
        require_positive("natural_freq", natural_freq)?;
        let mut p = Self::new(
            spring_k / (natural_freq * natural_freq),
            radius,
            spring_k,
            quality,
            target_amplitude,
            time_delay,
        )?;
        p.natural_freq = natural_freq;
        Ok(p)
    }

    /// Re-checks the invariants, including ω₀ = sqrt(k/m) to 1e-9 relative.
    pub fn validate(&self) -> Result<(), PhysicsError> {
        require_positive("mass", self.mass)?;
        require_non_negative("radius", self.radius)?;
        require_positive("spring_k", self.spring_k)?;
        require_positive("quality", self.quality)?;
        require_positive("natural_freq", self.natural_freq)?;
        require_non_negative("target_amplitude", self.target_amplitude)?;
        require_non_negative("time_delay", self.time_delay)?;
        let derived = (self.spring_k / self.mass).sqrt();
        if ((derived - self.natural_freq) / derived).abs() > 1e-9 {
            return Err(PhysicsError::InconsistentFrequency {
                given: self.natural_freq,
                derived,
            });
        }
        Ok(())
    }

    /// Natural frequency in Hz.
    pub fn natural_hz(&self) -> f64 {
        self.natural_freq / (2.0 * PI)
    }
}

/// Mechanical constants of the magnet resonator and its pump settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnetParams {
    /// Spring constant (N/m).
    pub spring_k: f64,
    /// Quality factor.
    pub quality: f64,
    /// Mass (kg); only used when the magnet is integrated as an ODE.
    pub mass: Option<f64>,
    /// Natural angular frequency (rad/s); only used in ODE mode.
    pub natural_freq: Option<f64>,
    /// Pump displacement amplitude (m). Zero switches the pump off.
    pub pump_amplitude: f64,
    /// Time offset of the pump waveform (s).
    pub time_delay: f64,
    /// Magnetic moment (A·m²).
    pub moment: f64,
    /// Angle between moment and field gradient axis (rad).
    pub field_angle: f64,
}

impl MagnetParams {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        require_positive("magnet_spring_k", self.spring_k)?;
        require_positive("magnet_quality", self.quality)?;
        require_positive("moment", self.moment)?;
        if !(self.pump_amplitude.is_finite() && self.pump_amplitude >= 0.0) {
            return Err(PhysicsError::InvalidParameter {
                name: "pump_amplitude",
                value: self.pump_amplitude,
            });
        }
        if !(self.time_delay.is_finite() && self.time_delay >= 0.0) {
            return Err(PhysicsError::InvalidParameter {
                name: "magnet_time_delay",
                value: self.time_delay,
            });
        }
        if !(0.0..=PI).contains(&self.field_angle) {
            return Err(PhysicsError::InvalidParameter {
                name: "field_angle",
                value: self.field_angle,
            });
        }
        if let Some(m) = self.mass {
            require_positive("magnet_mass", m)?;
        }
        if let Some(w) = self.natural_freq {
            require_positive("magnet_natural_freq", w)?;
        }
        Ok(())
    }

    /// Static deflection (m) produced by a field gradient (T/m).
    pub fn deflection(&self, grad_b: f64) -> f64 {
        magnetic_force(self.moment, grad_b, self.field_angle) / self.spring_k
    }
}

/// Geometry of the gap between the two resonators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    /// Separation with both springs at rest and no Casimir force (m).
    pub rest_separation: f64,
    /// Gap at which the run is declared pulled in (m).
    pub min_gap: f64,
    /// Quality factor of the coupled mode.
    pub coupled_quality: f64,
}

impl CouplingConfig {
    pub const DEFAULT_MIN_GAP: f64 = 10e-9;

    pub fn new(rest_separation: f64, coupled_quality: f64) -> Self {
        Self {
            rest_separation,
            min_gap: Self::DEFAULT_MIN_GAP,
            coupled_quality,
        }
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        require_positive("min_gap", self.min_gap)?;
        require_positive("coupled_quality", self.coupled_quality)?;
        if !(self.rest_separation > self.min_gap) {
            return Err(PhysicsError::InvalidParameter {
                name: "rest_separation",
                value: self.rest_separation,
            });
        }
        Ok(())
    }
}

fn check_gap(gap: f64) -> Result<(), PhysicsError> {
    if gap > 0.0 && gap.is_finite() {
        Ok(())
    } else {
        Err(PhysicsError::Contact { gap })
    }
}

/// Ideal zero-temperature sphere-plate Casimir force (N), -π³ħcR/(360 g³).
pub fn casimir_force(gap: f64, radius: f64) -> Result<f64, PhysicsError> {
    check_gap(gap)?;
    Ok(-force_coefficient(radius) / (gap * gap * gap))
}

/// Casimir potential energy (J) referenced to zero at infinite gap.
pub fn casimir_potential(gap: f64, radius: f64) -> Result<f64, PhysicsError> {
    check_gap(gap)?;
    Ok(-casimir_prefactor() / 720.0 * radius / (gap * gap))
}

/// Force gradient dF/dg of the Casimir force (N/m), π³ħcR/(120 g⁴).
pub fn parametric_stiffness(gap: f64, radius: f64) -> Result<f64, PhysicsError> {
    check_gap(gap)?;
    let g2 = gap * gap;
    Ok(casimir_prefactor() / 120.0 * radius / (g2 * g2))
}

/// Force on a magnetic moment in a field gradient (N).
pub fn magnetic_force(moment: f64, grad_b: f64, angle: f64) -> f64 {
    moment * grad_b * angle.cos()
}

/// Sphere drive force gain·k·A·sin(ω(t + τ₁)).
pub fn sphere_drive_force(t: f64, omega: f64, gain: f64, p: &SphereParams) -> f64 {
    gain * p.spring_k * p.target_amplitude * (omega * (t + p.time_delay)).sin()
}

/// Prescribed magnet position A_M·sin(2ω(t + τ₂)) + static deflection.
pub fn magnet_pump_displacement(
    t: f64,
    omega: f64,
    static_deflection: f64,
    p: &MagnetParams,
) -> f64 {
    p.pump_amplitude * (2.0 * omega * (t + p.time_delay)).sin() + static_deflection
}

/// Spring plus Casimir energy of the sphere at each displacement for a
/// fixed cavity size `cavity` (gap = cavity + x_S, as in the dynamics).
pub fn total_potential_curve(
    grid: &[f64],
    cavity: f64,
    p: &SphereParams,
) -> Result<Vec<f64>, PhysicsError> {
    grid.iter()
        .map(|&x| {
            let u = casimir_potential(cavity + x, p.radius)?;
            Ok(0.5 * p.spring_k * x * x + u)
        })
        .collect()
}

/// Pull-in thresholds of the quasistatic system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalSeparation {
    /// Gap at which the Casimir gradient equals the spring constant (m).
    pub gap: f64,
    /// Smallest rest separation with a stable equilibrium (m).
    pub separation: f64,
}

pub fn critical_separation(p: &SphereParams) -> CriticalSeparation {
    let gap = (3.0 * force_coefficient(p.radius) / p.spring_k).powf(0.25);
    CriticalSeparation {
        gap,
        separation: 4.0 / 3.0 * gap,
    }
}

/// Stable equilibrium gap for a rest separation `s0`, solving
/// k(s0 − g) = C/g³ on the stable branch g ∈ (g_crit, s0].
pub fn static_equilibrium(s0: f64, p: &SphereParams) -> Result<f64, PhysicsError> {
    check_gap(s0)?;
    let crit = critical_separation(p);
    if s0 <= crit.separation {
        return Err(PhysicsError::PullIn {
            separation: s0,
            critical: crit.separation,
        });
    }
    let coef = force_coefficient(p.radius);
    let balance = |g: f64| p.spring_k * (s0 - g) - coef / (g * g * g);
    // balance > 0 at g_crit, < 0 at s0
    let (mut lo, mut hi) = (crit.gap, s0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if balance(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let g = if balance(lo).abs() < balance(hi).abs() {
        lo
    } else {
        hi
    };
    Ok(g)
}

/// Small-amplitude resonance (Hz) at a fixed gap, with the Casimir gradient
/// subtracted from the spring constant.
pub fn softened_frequency(gap: f64, p: &SphereParams) -> Result<f64, PhysicsError> {
    let kp = parametric_stiffness(gap, p.radius)?;
    let k_eff = p.spring_k - kp;
    if k_eff <= 0.0 {
        return Err(PhysicsError::Unstable {
            gap,
            stiffness: kp,
            spring_k: p.spring_k,
        });
    }
    Ok((k_eff / p.mass).sqrt() / (2.0 * PI))
}
