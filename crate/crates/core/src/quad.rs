//! Fixed-grid quadrature helpers.

/// Composite Simpson rule on `[a, b]` with `points` nodes.
///
/// `points` is rounded up to the next odd number and is at least 3.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, points: usize) -> f64 {
    let mut n = points.max(3);
    if n % 2 == 0 {
        n += 1;
    }
    let intervals = n - 1;
    let h = (b - a) / intervals as f64;
    let mut acc = f(a) + f(b);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// `points` uniformly spaced nodes covering `[a, b]` inclusive.
pub fn linspace(a: f64, b: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let h = (b - a) / (points - 1) as f64;
            (0..points).map(|i| a + h * i as f64).collect()
        }
    }
}

/// `points` logarithmically spaced nodes covering `[a, b]` inclusive.
pub fn logspace(a: f64, b: f64, points: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), points)
        .into_iter()
        .map(f64::exp)
        .collect()
}
