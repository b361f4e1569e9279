//! Locale-independent number formatting for text outputs.

/// Shortest representation that parses back to the same `f64`.
///
/// Plain decimal for magnitudes in `[1e-4, 1e15)` and zero, exponent form
/// otherwise, so tiny tail values do not expand into long runs of zeros.
pub fn fmt_real(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// `v` with 12 significant digits, in exponent form.
pub fn fmt_sig12(v: f64) -> String {
    format!("{v:.11e}")
}
