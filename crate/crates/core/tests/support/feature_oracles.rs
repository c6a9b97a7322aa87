//! Brute-force recomputation of the engineered and k-space feature
//! definitions on plain nested vectors, shared by unit and acceptance tests.

#![allow(dead_code)]

use ndarray::Array2;

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}

// ---------- independent oracles on plain nested vectors ----------

pub type Grid = Vec<Vec<f64>>;

pub fn grid(a: &Array2<f64>) -> Grid {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

pub fn o_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub fn o_var(xs: &[f64]) -> f64 {
    let m = o_mean(xs);
    o_mean(&xs.iter().map(|x| (x - m).powi(2)).collect::<Vec<_>>())
}

pub fn o_div(a: f64, b: f64) -> f64 {
    if b.abs() < 1e-12 {
        0.0
    } else {
        a / b
    }
}

pub fn o_entropy(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let lo = xs.iter().cloned().fold(f64::MAX, f64::min);
    let hi = xs.iter().cloned().fold(f64::MIN, f64::max);
    if hi <= lo {
        return 0.0;
    }
    let mut h = 0.0;
    for b in 0..64 {
        let a = lo + (hi - lo) * b as f64 / 64.0;
        let z = lo + (hi - lo) * (b + 1) as f64 / 64.0;
        let c = xs
            .iter()
            .filter(|&&x| x >= a && (x < z || (b == 63 && x <= hi)))
            .count() as f64;
        if c > 0.0 {
            let p = c / xs.len() as f64;
            h -= p * p.log2();
        }
    }
    h
}

/// Exhaustive Otsu: every bin edge, class means from bin centres.
pub fn o_otsu(xs: &[f64]) -> f64 {
    let lo = xs.iter().cloned().fold(f64::MAX, f64::min);
    let hi = xs.iter().cloned().fold(f64::MIN, f64::max);
    let w = (hi - lo) / 256.0;
    let bin = |x: f64| (((x - lo) / w) as usize).min(255);
    let centre = |b: usize| lo + (b as f64 + 0.5) * w;
    let mut best = (f64::NEG_INFINITY, 0);
    for t in 0..255 {
        let a: Vec<f64> = xs.iter().filter(|&&x| bin(x) <= t).map(|&x| centre(bin(x))).collect();
        let b: Vec<f64> = xs.iter().filter(|&&x| bin(x) > t).map(|&x| centre(bin(x))).collect();
        if a.is_empty() || b.is_empty() {
            continue;
        }
        let n = xs.len() as f64;
        let v = a.len() as f64 / n * b.len() as f64 / n * (o_mean(&a) - o_mean(&b)).powi(2);
        if v > best.0 {
            best = (v, t);
        }
    }
    lo + (best.1 as f64 + 1.0) * w
}

pub fn at(g: &Grid, i: isize, j: isize) -> f64 {
    let h = g.len() as isize;
    let w = g[0].len() as isize;
    g[i.clamp(0, h - 1) as usize][j.clamp(0, w - 1) as usize]
}

pub fn o_gcf(u: &Grid, m: &[Vec<bool>]) -> f64 {
    let mut img = u.to_vec();
    let mut mask = m.to_vec();
    let mut total = 0.0;
    let mut level = 1;
    loop {
        let h = img.len();
        let w = img[0].len();
        let lum = |i: usize, j: usize| 100.0 * img[i][j].powf(1.1);
        let mut contrasts = Vec::new();
        for i in 0..h {
            for j in 0..w {
                if !mask[i][j] {
                    continue;
                }
                let mut diffs = Vec::new();
                for (di, dj) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                    let (a, b) = (i as isize + di, j as isize + dj);
                    if a >= 0 && b >= 0 && (a as usize) < h && (b as usize) < w && mask[a as usize][b as usize] {
                        diffs.push((lum(i, j) - lum(a as usize, b as usize)).abs());
                    }
                }
                if !diffs.is_empty() {
                    contrasts.push(o_mean(&diffs));
                }
            }
        }
        let x = level as f64 / 9.0;
        total += ((-0.406385 * x + 0.334573) * x + 0.0877526) * o_mean(&contrasts);
        if h / 2 < 2 || w / 2 < 2 || level == 9 {
            break;
        }
        let mut next = vec![vec![0.0; w / 2]; h / 2];
        let mut next_mask = vec![vec![false; w / 2]; h / 2];
        for i in 0..h / 2 {
            for j in 0..w / 2 {
                let cells = [(2 * i, 2 * j), (2 * i + 1, 2 * j), (2 * i, 2 * j + 1), (2 * i + 1, 2 * j + 1)];
                next[i][j] = cells.iter().map(|&(a, b)| img[a][b]).sum::<f64>() / 4.0;
                next_mask[i][j] = cells.iter().filter(|&&(a, b)| mask[a][b]).count() >= 2;
            }
        }
        img = next;
        mask = next_mask;
        level += 1;
    }
    total
}

/// Every engineered feature recomputed from its dictionary definition.
pub fn o_engineered(x: &Array2<f64>) -> Vec<f64> {
    let u: Grid = grid(&x.mapv(|v| (v + 1.0) / 2.0));
    let xs: Vec<f64> = x.iter().copied().collect();
    let (h, w) = x.dim();
    let t = o_otsu(&xs);
    let mut fgm: Vec<Vec<bool>> = grid(x).iter().map(|r| r.iter().map(|&v| v > t).collect()).collect();
    if !fgm.iter().flatten().any(|&b| b) {
        fgm = vec![vec![true; w]; h];
    }
    let bgm: Vec<Vec<bool>> = fgm.iter().map(|r| r.iter().map(|b| !b).collect()).collect();
    let pick = |g: &Grid, m: &[Vec<bool>]| -> Vec<f64> {
        let mut v = Vec::new();
        for i in 0..h {
            for j in 0..w {
                if m[i][j] {
                    v.push(g[i][j]);
                }
            }
        }
        v
    };
    let f = pick(&u, &fgm);
    let b = pick(&u, &bgm);
    let p = h.min(w) / 2;
    let p = p.min(20);
    let patch = |r: usize, c: usize| -> Vec<f64> {
        let mut v = Vec::new();
        for i in r..r + p {
            for j in c..c + p {
                v.push(u[i][j]);
            }
        }
        v
    };
    let (mut cr, mut cc, mut n) = (0.0, 0.0, 0.0);
    for i in 0..h {
        for j in 0..w {
            if fgm[i][j] {
                cr += i as f64;
                cc += j as f64;
                n += 1.0;
            }
        }
    }
    let anchor = |c: f64, e: usize| ((c / n).round() as isize - (p / 2) as isize).clamp(0, (e - p) as isize) as usize;
    let fp = patch(anchor(cr, h), anchor(cc, w));
    let mut bp = patch(0, 0);
    for (r, c) in [(0, w - p), (h - p, 0), (h - p, w - p)] {
        let cand = patch(r, c);
        if o_mean(&cand) < o_mean(&bp) {
            bp = cand;
        }
    }
    let centred = patch((h - p) / 2, (w - p) / 2);
    let sd = |v: &[f64]| o_var(v).sqrt();
    let maxf = f.iter().cloned().fold(f64::MIN, f64::max);
    let minf = f.iter().cloned().fold(f64::MAX, f64::min);

    let mut cpp = Vec::new();
    let mut lap = vec![vec![0.0; w]; h];
    for i in 0..h {
        for j in 0..w {
            let (a, c) = (i as isize, j as isize);
            let mut s8 = 0.0;
            for di in -1..=1 {
                for dj in -1..=1 {
                    if (di, dj) != (0, 0) {
                        s8 += at(&u, a + di, c + dj);
                    }
                }
            }
            if fgm[i][j] {
                cpp.push((8.0 * u[i][j] - s8).abs() / 8.0);
            }
            lap[i][j] = (at(&u, a - 1, c) + at(&u, a + 1, c) + at(&u, a, c - 1) + at(&u, a, c + 1) - 4.0 * u[i][j]).abs();
        }
    }
    let lf = pick(&lap, &fgm);
    let lb = pick(&lap, &bgm);

    let total_n = (h * w) as f64;
    let bmax = u.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let efc = u
        .iter()
        .flatten()
        .filter(|&&v| v > 0.0)
        .map(|&v| -(v / bmax) * (v / bmax).ln())
        .sum::<f64>()
        / (total_n.sqrt() * total_n.sqrt().ln());
    let msq = |v: &[f64]| o_mean(&v.iter().map(|a| a * a).collect::<Vec<_>>());

    let mut rows = Vec::new();
    for (i, row) in u.iter().enumerate() {
        if fgm[i].iter().any(|&b| b) {
            rows.push((0..w).filter(|&j| fgm[i][j]).map(|j| row[j]).sum::<f64>() / w as f64);
        }
    }
    let mut cols = Vec::new();
    for j in 0..w {
        if (0..h).any(|i| fgm[i][j]) {
            cols.push((0..h).filter(|&i| fgm[i][j]).map(|i| u[i][j]).sum::<f64>() / h as f64);
        }
    }
    let lo = |v: &[f64]| v.iter().cloned().fold(f64::MAX, f64::min);
    let hi = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max);
    let psnr = if sd(&f) > 1e-12 && maxf > minf { 20.0 * ((maxf - minf) / sd(&f)).log10() } else { 0.0 };

    vec![
        o_mean(&f),
        maxf - minf,
        o_var(&f),
        o_div(sd(&f), o_mean(&f)),
        o_mean(&cpp),
        psnr,
        o_div(sd(&f), sd(&b)),
        o_div(o_mean(&fp), sd(&b)),
        o_div(sd(&fp), sd(&centred)),
        o_div(o_mean(&fp), o_mean(&bp)),
        o_div(o_mean(&f) - o_mean(&b), sd(&b)),
        o_div(sd(&fp), o_mean(&fp)),
        o_div(sd(&f) + sd(&b), (o_mean(&f) - o_mean(&b)).abs()),
        efc,
        if b.is_empty() { 0.0 } else { o_div(msq(&f), msq(&b)) },
        o_gcf(&u, &bgm),
        o_gcf(&u, &fgm),
        if lf.is_empty() { 0.0 } else { hi(&lf) },
        o_var(&lf),
        o_mean(&lb),
        o_var(&lb),
        o_entropy(&lb),
        lo(&rows),
        hi(&rows),
        lo(&cols),
        hi(&cols),
    ]
}

/// Summary statistics from power sums (k-statistics in closed form).
pub fn o_summary(xs: &[f64]) -> [f64; 9] {
    let n = xs.len() as f64;
    let s1: f64 = xs.iter().sum();
    let s2: f64 = xs.iter().map(|x| x * x).sum();
    let s3: f64 = xs.iter().map(|x| x.powi(3)).sum();
    let s4: f64 = xs.iter().map(|x| x.powi(4)).sum();
    let m = s1 / n;
    let c2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let c3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    let c4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (n - 1.0);
        let i = pos.floor() as usize;
        let j = (i + 1).min(s.len() - 1);
        s[i] + (s[j] - s[i]) * (pos - i as f64)
    };
    // sentinels: vanishing denominators and too-small samples give 0
    let k2 = if n > 1.0 { (n * s2 - s1 * s1) / (n * (n - 1.0)) } else { 0.0 };
    let k4 = if n > 3.0 {
        (-6.0 * s1.powi(4) + 12.0 * n * s1 * s1 * s2 - 3.0 * n * (n - 1.0) * s2 * s2 - 4.0 * n * (n + 1.0) * s1 * s3
            + n * n * (n + 1.0) * s4)
            / (n * (n - 1.0) * (n - 2.0) * (n - 3.0))
    } else {
        0.0
    };
    let kurt = if c2 * c2 < 1e-12 { 0.0 } else { c4 / (c2 * c2) - 3.0 };
    [
        m,
        c2.sqrt(),
        o_div(c3, c2.powf(1.5)),
        kurt,
        q(0.75) - q(0.25),
        o_entropy(xs),
        o_div(c2.sqrt(), m.abs()),
        k2,
        if n > 3.0 { (2.0 * n * k2 * k2 + (n - 1.0) * k4) / (n * (n + 1.0)) } else { 0.0 },
    ]
}

/// Naive centred unitary DFT magnitudes and region samples.
pub fn o_regions(x: &Array2<f64>) -> [Vec<f64>; 4] {
    let (h, w) = x.dim();
    let (ch, cw) = (h / 2, w / 2);
    let mut low = Vec::new();
    let mut high = Vec::new();
    let mut total = Vec::new();
    let half = (h.min(w) / 2) as f64;
    let mut annuli = vec![0.0; h.min(w) / 2];
    for a in 0..h {
        for b in 0..w {
            let (fy, fx) = (a as f64 - ch as f64, b as f64 - cw as f64);
            let (mut re, mut im) = (0.0, 0.0);
            for i in 0..h {
                for j in 0..w {
                    let ph = -2.0 * std::f64::consts::PI * (fy * i as f64 / h as f64 + fx * j as f64 / w as f64);
                    re += x[[i, j]] * ph.cos();
                    im += x[[i, j]] * ph.sin();
                }
            }
            let mag = (re * re + im * im).sqrt() / ((h * w) as f64).sqrt();
            let r = (fy * fy + fx * fx).sqrt();
            total.push(mag);
            if r <= 0.1 * half {
                low.push(mag);
            }
            if r > 0.9 * half {
                high.push(mag);
            }
            if (r.floor() as usize) < annuli.len() {
                annuli[r.floor() as usize] += mag;
            }
        }
    }
    [low, high, total, annuli]
}

// ---------- tests ----------
