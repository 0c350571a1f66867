//! Physical constants (CODATA 2018, exact SI definitions).

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Photon energy at a vacuum wavelength, J.
pub fn photon_energy(vac_wavelength: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / vac_wavelength
}
