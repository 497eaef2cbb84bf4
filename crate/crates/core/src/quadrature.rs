//! One-dimensional quadrature helpers shared by the grid builders and the
//! asymptotic integral checks.

use gauss_quad::GaussLegendre;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    match n {
        0 => Vec::new(),
        1 => vec![(0.0, 2.0)],
        _ => {
            let mut pairs = GaussLegendre::new(n)
                .expect("degree >= 2")
                .into_node_weight_pairs();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            pairs
        }
    }
}

/// Gauss–Legendre rule mapped onto `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Adaptive Gauss–Legendre integration of `f` over `[a, b]`.
///
/// Each panel is compared against its two halves; panels are split until the
/// local discrepancy falls below `max(abs_tol, rel_tol * |estimate|)`, with the
/// absolute budget shared between the halves.
pub fn integrate_adaptive<F>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let rule = gauss_legendre(15);
    let panel = |lo: f64, hi: f64| -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        half * rule.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>()
    };
    let whole = panel(a, b);
    refine(&panel, a, b, whole, rel_tol, abs_tol, 0)
}

fn refine<P>(panel: &P, a: f64, b: f64, whole: f64, rel_tol: f64, abs_tol: f64, depth: u32) -> f64
where
    P: Fn(f64, f64) -> f64,
{
    let mid = 0.5 * (a + b);
    let left = panel(a, mid);
    let right = panel(mid, b);
    let split = left + right;
    let err = (split - whole).abs();
    // below this the panels only differ by rounding
    let floor = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    if depth >= 40 || err <= abs_tol.max(rel_tol * split.abs()).max(floor) {
        return split;
    }
    refine(panel, a, mid, left, rel_tol, 0.5 * abs_tol, depth + 1)
        + refine(panel, mid, b, right, rel_tol, 0.5 * abs_tol, depth + 1)
}

/// Trapezoid weights for a strictly increasing abscissa list. A single point
/// gets unit weight.
pub fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n)
            .map(|i| {
                let lo = if i == 0 { x[0] } else { x[i - 1] };
                let hi = if i + 1 == n { x[n - 1] } else { x[i + 1] };
                0.5 * (hi - lo)
            })
            .collect(),
    }
}
