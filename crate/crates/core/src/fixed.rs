//! Fixed-point weight arithmetic.
//!
//! Edge weights and path distances are `i64` milli-units: the value 1.5 is
//! stored as 1500. Weight updates, bound distances and query answers all live
//! on this grid, so equality checks against reference computations are exact
//! and never depend on float rounding.

/// A weight or distance in milli-units.
pub type Milli = i64;

/// One whole weight unit on the milli grid.
pub const MILLI_ONE: Milli = 1000;

/// Sentinel for "no path". Never added to; use [`add`] to keep it absorbing.
pub const INF: Milli = i64::MAX;

/// Converts a whole-unit integer weight to milli-units.
pub fn from_int(w: i64) -> Milli {
    w * MILLI_ONE
}

/// Infinity-absorbing addition for path-length accumulation.
pub fn add(a: Milli, b: Milli) -> Milli {
    if a == INF || b == INF {
        INF
    } else {
        a + b
    }
}

/// Formats a milli-unit value without trailing zeros: 5000 -> "5",
/// 5250 -> "5.25", 5001 -> "5.001".
pub fn fmt_milli(v: Milli) -> String {
    if v == INF {
        return "inf".to_string();
    }
    let sign = if v < 0 { "-" } else { "" };
    let v = v.unsigned_abs();
    let whole = v / 1000;
    let frac = v % 1000;
    if frac == 0 {
        format!("{sign}{whole}")
    } else if frac % 100 == 0 {
        format!("{sign}{whole}.{}", frac / 100)
    } else if frac % 10 == 0 {
        format!("{sign}{whole}.{:02}", frac / 10)
    } else {
        format!("{sign}{whole}.{frac:03}")
    }
}

/// Parses a decimal weight string onto the milli grid.
///
/// Accepts an optional sign, up to three fractional digits, and rejects
/// anything that does not land exactly on the grid.
pub fn parse_milli(s: &str) -> Option<Milli> {
    let s = s.trim();
    let (sign, rest) = match s.strip_prefix('-') {
        Some(r) => (-1i64, r),
        None => (1i64, s.strip_prefix('+').unwrap_or(s)),
    };
    if rest.is_empty() {
        return None;
    }
    let (whole, frac) = match rest.split_once('.') {
        Some((w, f)) => (w, f),
        None => (rest, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if frac.len() > 3 || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let whole: i64 = if whole.is_empty() {
        0
    } else {
        whole.parse().ok()?
    };
    let mut frac_val: i64 = 0;
    for (i, c) in frac.chars().enumerate() {
        frac_val += (c.to_digit(10).unwrap() as i64) * 10i64.pow(2 - i as u32);
    }
    Some(sign * (whole.checked_mul(1000)? + frac_val))
}
