//! Golden-section search for scalar maximization.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Maximizes a unimodal `f` on `[a, b]` until the bracket is narrower than
/// `x_tol`. The best point seen is returned, endpoints included, so a
/// monotone objective converges to the right end of the bracket.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, x_tol: f64) -> Maximum {
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let mut best = Maximum { x: lo, value: f(lo), evaluations: 1 };
    let consider = |x: f64, v: f64, best: &mut Maximum| {
        best.evaluations += 1;
        // prefer the smaller abscissa on exact ties
        if v > best.value || (v == best.value && x < best.x) {
            best.x = x;
            best.value = v;
        }
    };
    let fhi = f(hi);
    consider(hi, fhi, &mut best);

    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    consider(x1, f1, &mut best);
    let mut f2 = f(x2);
    consider(x2, f2, &mut best);

    while hi - lo > x_tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
            consider(x1, f1, &mut best);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
            consider(x2, f2, &mut best);
        }
    }
    best
}
