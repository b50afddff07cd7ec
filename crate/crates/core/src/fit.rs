//! Least-squares helpers for exponent fits.

/// Least-squares slope of `ys` against `xs` (NaN-free input assumed).
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    line(xs, ys).0
}

/// `(slope, intercept)` of the least-squares line.
pub fn line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let s = sxy / sxx;
    (s, my - s * mx)
}

/// Slope over the middle half of the samples (first and last quarter
/// dropped), keeping at least two points.
pub fn middle_half_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let (lo, hi) = middle_half_range(xs.len());
    slope(&xs[lo..hi], &ys[lo..hi])
}

/// Index range `[lo, hi)` of the middle half.
pub fn middle_half_range(n: usize) -> (usize, usize) {
    if n <= 3 {
        return (0, n);
    }
    let lo = n / 4;
    let hi = n - n / 4;
    if hi - lo < 2 {
        (0, n)
    } else {
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        assert_eq!(line(&xs, &ys), (2.0, 1.0));
        assert_eq!(middle_half_range(8), (2, 6));
    }
}
