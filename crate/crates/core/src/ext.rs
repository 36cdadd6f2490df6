//! Extended reals. `+inf` is the finite sentinel [`INF`]; arithmetic that
//! touches it saturates so that a sentinel never turns into a finite winner.

/// Sentinel standing in for `+inf`. Serialized as the literal `inf`.
pub const INF: f64 = 1.0e300;

#[inline]
pub fn is_inf(x: f64) -> bool {
    x >= INF
}

#[inline]
pub fn sat_add(a: f64, b: f64) -> f64 {
    if is_inf(a) || is_inf(b) {
        INF
    } else {
        (a + b).min(INF)
    }
}

/// `s * a` for `s >= 0`, saturating.
#[inline]
pub fn sat_scale(s: f64, a: f64) -> f64 {
    if is_inf(a) {
        if s == 0.0 {
            0.0
        } else {
            INF
        }
    } else {
        (s * a).min(INF)
    }
}

pub fn fmt_ext(x: f64) -> String {
    if is_inf(x) {
        "inf".to_string()
    } else if x <= -INF {
        "-inf".to_string()
    } else {
        format!("{x}")
    }
}

pub fn parse_ext(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" | "+inf" => Some(INF),
        "-inf" => Some(-INF),
        t => t.parse::<f64>().ok().map(|v| v.clamp(-INF, INF)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturation() {
        assert_eq!(sat_add(INF, -5.0), INF);
        assert_eq!(sat_add(1.0, 2.0), 3.0);
        assert_eq!(sat_scale(0.0, INF), 0.0);
        assert_eq!(sat_scale(2.0, INF), INF);
        assert_eq!(sat_scale(1e10, 1e295), INF);
    }

    #[test]
    fn text_round_trip() {
        assert_eq!(fmt_ext(INF), "inf");
        assert_eq!(parse_ext("inf"), Some(INF));
        assert_eq!(parse_ext("0.25"), Some(0.25));
        assert_eq!(parse_ext("x"), None);
    }
}
