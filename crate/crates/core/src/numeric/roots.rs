//! Bracketed scalar root finders.

/// Safeguarded Newton iteration for `g(x) = 0` on a bracket `[lo, hi]`.
///
/// `g` returns the value and derivative. The bracket must satisfy
/// `g(lo) * g(hi) <= 0`; this is the caller's responsibility, and the result
/// is simply the final bracket midpoint if it does not hold. Newton steps
/// that leave the bracket, or that fail to halve it within two iterations,
/// are replaced by bisection.
pub fn newton_bracketed<G>(g: G, mut lo: f64, mut hi: f64, guess: Option<f64>, xtol: f64) -> f64
where
    G: Fn(f64) -> (f64, f64),
{
    let (glo, _) = g(lo);
    if glo == 0.0 {
        return lo;
    }
    let (ghi, _) = g(hi);
    if ghi == 0.0 {
        return hi;
    }
    let lo_negative = glo < 0.0;
    let mut x = guess.filter(|x| *x > lo && *x < hi).unwrap_or(0.5 * (lo + hi));
    let mut width_before = hi - lo;
    for iter in 0..300 {
        let (gx, dgx) = g(x);
        if gx == 0.0 {
            return x;
        }
        if (gx < 0.0) == lo_negative {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= xtol {
            return 0.5 * (lo + hi);
        }
        let newton = x - gx / dgx;
        let step_ok = dgx != 0.0 && dgx.is_finite() && newton.is_finite() && newton > lo && newton < hi;
        let shrinking = iter % 2 == 0 || hi - lo < 0.5 * width_before;
        if iter % 2 == 1 {
            width_before = hi - lo;
        }
        if step_ok && shrinking {
            if (newton - x).abs() <= 0.25 * xtol {
                return newton;
            }
            x = newton;
        } else {
            x = 0.5 * (lo + hi);
        }
    }
    0.5 * (lo + hi)
}

/// Plain bisection on a sign change. Returns the midpoint of the final bracket.
pub fn bisect<G>(g: G, mut lo: f64, mut hi: f64, xtol: f64, max_iter: usize) -> f64
where
    G: Fn(f64) -> f64,
{
    let lo_negative = g(lo) < 0.0;
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= xtol {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bisection/secant hybrid (Illinois variant of regula falsi) for polishing
/// a bracketed root of a continuous function to `xtol`, with at most
/// `max_iter` function evaluations. Returns `(root, evaluations_used)`.
pub fn polish_root<G>(g: G, mut a: f64, mut b: f64, xtol: f64, max_iter: usize) -> (f64, usize)
where
    G: Fn(f64) -> f64,
{
    let mut fa = g(a);
    let mut fb = g(b);
    let mut evals = 2;
    if fa == 0.0 {
        return (a, evals);
    }
    if fb == 0.0 {
        return (b, evals);
    }
    // side: which endpoint was retained last time (for the Illinois trick).
    let mut side = 0i8;
    let mut use_bisection = false;
    while evals < max_iter && (b - a).abs() > xtol {
        let width = (b - a).abs();
        let c = if use_bisection {
            0.5 * (a + b)
        } else {
            let s = (a * fb - b * fa) / (fb - fa);
            if s.is_finite() && s > a.min(b) && s < a.max(b) {
                s
            } else {
                0.5 * (a + b)
            }
        };
        let fc = g(c);
        evals += 1;
        if fc == 0.0 {
            return (c, evals);
        }
        if (fc < 0.0) == (fb < 0.0) {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        use_bisection = (b - a).abs() > 0.5 * width;
    }
    (0.5 * (a + b), evals)
}
