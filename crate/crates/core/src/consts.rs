//! Physical constants (SI units).

use std::f64::consts::PI;

/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Speed of light in vacuum, m/s.
pub const C: f64 = 299_792_458.0;

/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;

/// Mass of a ⁸⁷Rb atom, kg.
pub const RB87_MASS: f64 = 86.909_180_527 * AMU;

/// Natural linewidth of the Rb D1 line, rad/s (2π × 5.75 MHz).
pub const RB_D1_GAMMA: f64 = 2.0 * PI * 5.75e6;
