//! Physical constants and fixed reference values.

/// Planck constant, J*s.
pub const H_PLANCK: f64 = 6.626_070_15e-34;

/// Speed of light in vacuum, m/s.
pub const C_LIGHT: f64 = 299_792_458.0;

/// OSNR reference bandwidth (0.1 nm at 1550 nm), Hz.
pub const OSNR_REF_BANDWIDTH: f64 = 12.5e9;

/// Convert dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Convert watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

/// Optical carrier frequency for a wavelength in meters.
pub fn optical_frequency(wavelength_m: f64) -> f64 {
    C_LIGHT / wavelength_m
}
