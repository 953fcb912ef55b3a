/// Bisection on a sign change of `f` over `[lo, hi]`, stopping once the
/// bracket is no wider than `tol`. Returns the bracket midpoint.
///
/// `f(lo)` and `f(hi)` must have opposite signs (or one of them be zero).
/// Evaluation failures inside the bracket are treated as `hi`-side values so
/// the search shrinks toward the last good point.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64
where
    F: FnMut(f64) -> Option<f64>,
{
    let flo = match f(lo) {
        Some(v) => v,
        None => return lo,
    };
    if flo == 0.0 {
        return lo;
    }
    let lo_neg = flo < 0.0;
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match f(mid) {
            Some(0.0) => return mid,
            Some(v) if (v < 0.0) == lo_neg => lo = mid,
            _ => hi = mid,
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_ln2() {
        let r = bisect(|t| Some(2.0 * (-t).exp() - 1.0), 0.0, 3.0, 1e-13);
        assert!((r - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn exact_zero_at_endpoint() {
        assert_eq!(bisect(|t| Some(t - 1.0), 1.0, 2.0, 1e-12), 1.0);
    }

    #[test]
    fn decreasing_function() {
        let r = bisect(|t| Some(1.0 - t * t), 0.0, 3.0, 1e-13);
        assert!((r - 1.0).abs() < 1e-12);
    }
}
