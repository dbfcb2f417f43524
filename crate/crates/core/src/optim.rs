//! One-dimensional minimization helpers.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Result of a bracketed scalar minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMin {
    pub arg: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`, stopping once the
/// bracket is narrower than `tol` (absolute, on the argument).
///
/// Assumes `f` is unimodal on the bracket. The endpoints are compared with the
/// interior estimate at the end so that a monotone objective returns the
/// boundary value rather than a point `tol` away from it.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> ScalarMin {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let tol = tol.max(f64::EPSILON * (a.abs() + b.abs()));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evaluations = 2;
    while (b - a) > tol {
        if fc <= fd {
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
        evaluations += 1;
    }
    let (mut arg, mut value) = if fc <= fd { (c, fc) } else { (d, fd) };
    for edge in [lo, hi] {
        let fe = f(edge);
        evaluations += 1;
        if fe < value {
            arg = edge;
            value = fe;
        }
    }
    ScalarMin {
        arg,
        value,
        evaluations,
    }
}

/// Minimize `f` on `[lo, hi]` without assuming unimodality: scan `scan`
/// equispaced points, then refine by golden section around the best one.
pub fn scan_then_golden<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    scan: usize,
    tol: f64,
) -> ScalarMin {
    let scan = scan.max(3);
    let h = (hi - lo) / (scan - 1) as f64;
    let mut best_i = 0;
    let mut best = f64::INFINITY;
    for i in 0..scan {
        let v = f(lo + h * i as f64);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let a = lo + h * best_i.saturating_sub(1) as f64;
    let b = (lo + h * (best_i + 1) as f64).min(hi);
    let mut refined = golden_section(&mut f, a, b, tol);
    refined.evaluations += scan;
    if best < refined.value {
        refined.value = best;
        refined.arg = lo + h * best_i as f64;
    }
    refined
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_vertex() {
        let m = golden_section(|x| (x - 1.3).powi(2) + 2.0, -5.0, 5.0, 1e-10);
        // The value is flat to rounding within ~1e-8 of the vertex.
        assert!((m.arg - 1.3).abs() < 1e-7);
        assert!((m.value - 2.0).abs() < 1e-15);
    }

    #[test]
    fn monotone_objective_returns_edge() {
        let m = golden_section(|x| x, 2.0, 3.0, 1e-8);
        assert_eq!(m.arg, 2.0);
        assert_eq!(m.value, 2.0);
    }

    #[test]
    fn scan_escapes_local_minimum() {
        // Local min near 0.5, global min near 3.
        let f = |x: f64| (x - 0.5).powi(2) * (x - 3.0).powi(2) - 0.3 * x;
        let m = scan_then_golden(f, 0.0, 4.0, 400, 1e-10);
        assert!(m.arg > 2.5, "arg={}", m.arg);
    }
}
