//! Unit conventions and conversion constants shared across markets.
//!
//! Power is carried in MW, gas mass flow in kg/s, pressures in Pa
//! (scenario files accept MPa), prices in $/MWh, $/MMBtu or $/kg as labeled.

/// Gas consumed per unit of electricity produced, MMBtu per MWh.
pub const HEAT_RATE_MMBTU_PER_MWH: f64 = 7.5;

/// Energy content of pipeline gas, MMBtu per kg.
pub const ENERGY_DENSITY_MMBTU_PER_KG: f64 = 0.0556;

pub const SECONDS_PER_HOUR: f64 = 3600.0;

pub const PASCALS_PER_MPA: f64 = 1e6;

/// MMBtu/h quantity to mass rate.
pub fn mmbtu_per_hour_to_kg_per_s(q: f64) -> f64 {
    q / ENERGY_DENSITY_MMBTU_PER_KG / SECONDS_PER_HOUR
}

pub fn kg_per_s_to_mmbtu_per_hour(q: f64) -> f64 {
    q * ENERGY_DENSITY_MMBTU_PER_KG * SECONDS_PER_HOUR
}

/// $/MMBtu price to $/kg.
pub fn usd_per_mmbtu_to_usd_per_kg(p: f64) -> f64 {
    p * ENERGY_DENSITY_MMBTU_PER_KG
}

pub fn usd_per_kg_to_usd_per_mmbtu(p: f64) -> f64 {
    p / ENERGY_DENSITY_MMBTU_PER_KG
}
