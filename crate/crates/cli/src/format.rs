//! Fixed numeric output format: 12 significant digits, plain decimal.

/// Formats with 12 significant digits (`0.287682072452`); zero prints as
/// `0.000000000000` and infinities as `inf`/`-inf`.
pub fn sig12(value: f64) -> String {
    if value == 0.0 {
        return "0.000000000000".to_string();
    }
    if value.is_infinite() {
        return if value > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if value.is_nan() {
        return "nan".to_string();
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    format!("{value:.decimals$}")
}
