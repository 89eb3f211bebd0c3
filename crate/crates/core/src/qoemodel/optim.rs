//! Deterministic gradient ascent with Barzilai-Borwein steps and Armijo
//! backtracking.

pub(crate) struct Optimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Maximizes `f`, which returns the objective and its gradient. Stops when the
/// gradient's largest component drops below `tol`, when no step improves the
/// objective, or after `max_iter` iterations.
pub(crate) fn maximize<F>(f: F, x0: Vec<f64>, max_iter: usize, tol: f64) -> Optimum
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut alpha = 1.0 / inf_norm(&g).max(1.0);
    for it in 0..max_iter {
        if inf_norm(&g) < tol {
            return Optimum { x, value: fx, iterations: it, converged: true };
        }
        let gg = dot(&g, &g);
        let mut step = alpha;
        let accepted = loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + step * gi).collect();
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft >= fx + 1e-4 * step * gg {
                break Some((trial, ft, gt));
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        let Some((x_new, f_new, g_new)) = accepted else {
            // no ascent direction left at machine precision
            return Optimum { x, value: fx, iterations: it, converged: true };
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let curvature = -dot(&s, &y);
        alpha = if curvature > 0.0 { (dot(&s, &s) / curvature).clamp(1e-10, 1e10) } else { step * 2.0 };
        x = x_new;
        fx = f_new;
        g = g_new;
    }
    let converged = inf_norm(&g) < tol;
    Optimum { x, value: fx, iterations: max_iter, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concave_quadratic() {
        // f = -(x-3)^2 - 10 (y+1)^2
        let f = |v: &[f64]| {
            let (a, b) = (v[0] - 3.0, v[1] + 1.0);
            (-(a * a) - 10.0 * b * b, vec![-2.0 * a, -20.0 * b])
        };
        let opt = maximize(f, vec![0.0, 0.0], 500, 1e-10);
        assert!(opt.converged);
        assert!((opt.x[0] - 3.0).abs() < 1e-9 && (opt.x[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let f = |v: &[f64]| (-(v[0] - 1e6).powi(2), vec![-2.0 * (v[0] - 1e6)]);
        let opt = maximize(f, vec![0.0], 1, 1e-12);
        assert!(!opt.converged);
        assert_eq!(opt.iterations, 1);
    }
}
