//! Shared quadrature primitives: Gauss–Legendre rules, pairwise summation,
//! and radial panel layout.

use std::collections::HashMap;
use std::sync::{LazyLock, RwLock};

/// Cache of Gauss–Legendre rules on [-1, 1], keyed by node count.
static GL_CACHE: LazyLock<RwLock<HashMap<usize, (Vec<f64>, Vec<f64>)>>> =
    LazyLock::new(|| RwLock::new(HashMap::new()));

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
///
/// Newton iteration on the Legendre recurrence; results are cached.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    if let Some(rule) = GL_CACHE.read().unwrap().get(&n) {
        return rule.clone();
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Chebyshev-based initial guess for the i-th positive root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = x;
                p0 = 1.0;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GL_CACHE
        .write()
        .unwrap()
        .insert(n, (nodes.clone(), weights.clone()));
    (nodes, weights)
}

/// Pairwise (cascade) summation in a fixed order, for reproducible reductions.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Integrate `f` over `[a, b]` with the n-point Gauss–Legendre rule.
pub fn gl_integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, n: usize, mut f: F) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let vals: Vec<f64> = nodes
        .iter()
        .zip(&weights)
        .map(|(&x, &w)| w * f(mid + hw * x))
        .collect();
    hw * pairwise_sum(&vals)
}

/// Panel layout for a radial integral on `[lo, hi]`.
///
/// `graded_at_lo` inserts a geometric ladder toward `lo`, needed when the
/// integrand is singular there (fractional kernels with alpha < 1, log
/// symbols). `breaks` are extra cut points (support radii, indicator edges);
/// out-of-range entries are dropped. Wide smooth spans are split so no panel
/// exceeds a 2:1 ratio of endpoints (or a linear width cap near zero).
pub fn radial_panels(lo: f64, hi: f64, graded_at_lo: bool, breaks: &[f64]) -> Vec<(f64, f64)> {
    assert!(hi > lo && lo >= 0.0, "bad radial range [{lo}, {hi}]");
    let mut cuts: Vec<f64> = vec![lo, hi];
    for &b in breaks {
        if b > lo * (1.0 + 1e-13) && b < hi * (1.0 - 1e-13) {
            cuts.push(b);
        }
    }
    if graded_at_lo {
        // Geometric ladder, ratio 4, between lo (or hi*1e-8 when lo == 0) and hi.
        let floor = if lo > 0.0 { lo } else { hi * 1e-8 };
        let mut t = hi / 4.0;
        while t > floor {
            cuts.push(t);
            t /= 4.0;
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * hi);

    // Split remaining wide spans: keep endpoint ratio <= 2 where possible.
    let mut panels = Vec::new();
    for win in cuts.windows(2) {
        let (a, b) = (win[0], win[1]);
        if b - a <= 1e-300 {
            continue;
        }
        if a > 0.0 && b / a > 2.0 {
            let k = (b / a).log2().ceil() as usize;
            let ratio = (b / a).powf(1.0 / k as f64);
            let mut left = a;
            for _ in 0..k - 1 {
                let right = left * ratio;
                panels.push((left, right));
                left = right;
            }
            panels.push((left, b));
        } else if a == 0.0 && b > 0.0 {
            // Leading panel from zero: halve once so the rule sees the origin
            // at higher density.
            panels.push((0.0, b / 2.0));
            panels.push((b / 2.0, b));
        } else {
            panels.push((a, b));
        }
    }
    panels
}
