//! Display-unit conversions. Everything inside the library is SI.

/// 1 GPa in Pa.
pub const GPA: f64 = 1e9;
/// 1 g/cm³ in kg/m³.
pub const G_PER_CM3: f64 = 1e3;
/// 1 mm/µs in m/s.
pub const MM_PER_US: f64 = 1e3;

pub fn gpa(x: f64) -> f64 {
    x * GPA
}

pub fn g_per_cm3(x: f64) -> f64 {
    x * G_PER_CM3
}

pub fn to_mm_per_us(speed: f64) -> f64 {
    speed / MM_PER_US
}
