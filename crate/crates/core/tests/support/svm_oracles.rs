//! Brute-force solve of the C-SVM dual on tiny instances.

/// Projected gradient on the C-SVM dual. Projection onto
/// `{y'a = 0, 0 <= a <= C}` by bisection on the multiplier.
pub fn pg_dual(k: &[Vec<f64>], y: &[f64], c: f64) -> (Vec<f64>, f64) {
    let n = y.len();
    let project = |v: &[f64]| {
        let at = |mu: f64| -> Vec<f64> { (0..n).map(|i| (v[i] - mu * y[i]).clamp(0.0, c)).collect() };
        let g = |mu: f64| -> f64 { at(mu).iter().zip(y).map(|(a, y)| a * y).sum() };
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(0.5 * (lo + hi))
    };
    let lip: f64 = (0..n).map(|i| k[i][i]).sum::<f64>();
    let mut a = vec![0.0; n];
    for _ in 0..200_000 {
        let grad: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j] * a[j]).sum::<f64>() - 1.0)
            .collect();
        let step: Vec<f64> = (0..n).map(|i| a[i] - grad[i] / lip).collect();
        a = project(&step);
    }
    // bias from the free multipliers
    let mut bs = Vec::new();
    for i in 0..n {
        if a[i] > 1e-6 && a[i] < c - 1e-6 {
            let f: f64 = (0..n).map(|j| a[j] * y[j] * k[i][j]).sum();
            bs.push(y[i] - f);
        }
    }
    let b = bs.iter().sum::<f64>() / bs.len() as f64;
    (a, b)
}
