//! Composite Simpson quadrature on a uniform grid.

/// Integrates `f` over `[a, b]` with composite Simpson's rule on `points`
/// nodes (rounded up to the next odd count, minimum 3). Reversed limits give
/// the negated integral.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, points: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut n = points.max(3);
    if n % 2 == 0 {
        n += 1;
    }
    let intervals = n - 1;
    let h = (b - a) / intervals as f64;
    let mut sum = f(a) + f(b);
    for i in 1..intervals {
        let x = a + h * i as f64;
        sum += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    sum * h / 3.0
}
