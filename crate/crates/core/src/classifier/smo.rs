//! Sequential minimal optimisation for
//! `min 1/2 a'Qa + p'a  s.t.  y'a = const, 0 <= a_i <= c`
//! with second-order working-set selection.

const TAU: f64 = 1e-12;

pub(crate) struct Solution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
}

/// `q` is the dense `n x n` matrix `Q_ij = y_i y_j K_ij` in row-major order.
/// `alpha` must be feasible. Stops when the maximal violating pair gap is
/// below `tol` or after `max_iter` updates.
pub(crate) fn solve(
    q: &[f64],
    p: &[f64],
    y: &[f64],
    c: f64,
    mut alpha: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Solution {
    let n = p.len();
    let qr = |i: usize| &q[i * n..(i + 1) * n];
    let mut g = p.to_vec();
    for i in 0..n {
        if alpha[i] != 0.0 {
            for (gt, qit) in g.iter_mut().zip(qr(i)) {
                *gt += alpha[i] * qit;
            }
        }
    }
    let up = |a: f64, y: f64| if y > 0.0 { a < c } else { a > 0.0 };
    let low = |a: f64, y: f64| if y > 0.0 { a > 0.0 } else { a < c };

    let mut iterations = 0;
    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if up(alpha[t], y[t]) && -y[t] * g[t] >= gmax {
                gmax = -y[t] * g[t];
                i = t;
            }
        }
        if i == usize::MAX {
            break;
        }
        let qi = qr(i);
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            gmax2 = gmax2.max(y[t] * g[t]);
            let b = gmax + y[t] * g[t];
            if b > 0.0 {
                let mut a = qi[i] + q[t * n + t] - 2.0 * y[i] * y[t] * qi[t];
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -b * b / a;
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < tol || j == usize::MAX {
            break;
        }
        iterations += 1;

        let qj = qr(j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = qi[i] + qj[j] + 2.0 * qi[j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = qi[i] + qj[j] - 2.0 * qi[j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            g[t] += qi[t] * di + qj[t] * dj;
        }
    }

    Solution {
        rho: rho(&alpha, &g, y, c),
        alpha,
        iterations,
    }
}

fn rho(alpha: &[f64], g: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut free = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * g[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}
