//! Physical constants (SI units unless noted).

/// Boltzmann constant, J/K (exact, 2019 SI).
pub const K_B: f64 = 1.380649e-23;

/// Reduced Planck constant, J·s (derived from the exact h).
pub const HBAR: f64 = 1.054571817e-34;

/// Cesium-133 atomic mass, kg.
pub const M_CS: f64 = 2.20694650e-25;

/// Cesium clock transition frequency, Hz (exact by definition of the second).
pub const F_CLOCK: f64 = 9_192_631_770.0;

/// Micrometers to meters.
pub const UM: f64 = 1e-6;
