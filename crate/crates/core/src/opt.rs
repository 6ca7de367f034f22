//! Scalar optimization helpers: golden-section search for concave objectives.

/// Invariant ratio of golden-section search, (√5 − 1)/2.
const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Maximizes a unimodal (e.g. concave) function on `[lo, hi]` by
/// golden-section search.
///
/// Runs at most `max_iters` interval reductions, stopping early once the
/// bracket width falls below `tol`. Returns `(argmax, max)`. The bracket
/// endpoints themselves are candidate maximizers, so a monotone objective
/// returns the better endpoint.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, max_iters: usize, tol: f64) -> (f64, f64) {
    debug_assert!(lo.is_finite() && hi.is_finite() && lo <= hi);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iters {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    // Pick the best point actually evaluated, including the endpoints; this
    // keeps the result correct when the maximum sits on the bracket boundary.
    let flo = f(lo);
    let fhi = f(hi);
    let mid = 0.5 * (a + b);
    let fmid = f(mid);
    let mut best = (mid, fmid);
    for cand in [(c, fc), (d, fd), (lo, flo), (hi, fhi)] {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    best
}

/// Expands `hi` geometrically until `f` is decreasing past the maximum, then
/// runs [`golden_max`] on the final bracket.
///
/// Useful when only a lower bound of the maximizer is known. `f(hi)` must
/// eventually decrease (e.g. any coercive concave function).
pub fn golden_max_expanding<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi0: f64,
    max_expansions: usize,
    max_iters: usize,
    tol: f64,
) -> (f64, f64) {
    let mut hi = hi0.max(lo + tol.max(1e-12));
    let mut fhi = f(hi);
    for _ in 0..max_expansions {
        let next = lo + 2.0 * (hi - lo);
        let fnext = f(next);
        if fnext < fhi {
            hi = next; // one step past the turn, so the bracket contains it
            break;
        }
        hi = next;
        fhi = fnext;
    }
    golden_max(f, lo, hi, max_iters, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_maximum() {
        let (x, fx) = golden_max(|x| -(x - 1.3).powi(2) + 2.0, -10.0, 10.0, 200, 1e-12);
        // Any x within ~√ε of the peak evaluates to exactly 2.0 in floats, so
        // the argmax is only determined to that resolution.
        assert!((x - 1.3).abs() < 5e-8, "x = {x}");
        assert!((fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_function_returns_endpoint() {
        let (x, fx) = golden_max(|x| x, 0.0, 5.0, 200, 1e-12);
        assert!((x - 5.0).abs() < 1e-9);
        assert!((fx - 5.0).abs() < 1e-9);
    }

    #[test]
    fn expansion_reaches_far_maximum() {
        let (x, _) = golden_max_expanding(|x| -(x - 300.0).powi(2), 0.0, 1.0, 60, 300, 1e-10);
        assert!((x - 300.0).abs() < 1e-6, "x = {x}");
    }

    #[test]
    fn kinked_concave_function() {
        // |x - 2| kink, still unimodal.
        let (x, _) = golden_max(|x| -(x - 2.0f64).abs(), 0.0, 7.0, 300, 1e-12);
        assert!((x - 2.0).abs() < 1e-9);
    }
}
