use serde::{Deserialize, Serialize};

use super::optim::maximize;
use super::{check_fit_input, group_rows, DesignMatrix, Grouped, ModelError};
use crate::rating::Rating;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrdinalHyper {
    /// L2 penalty on the weights, on the summed log-likelihood scale.
    pub l2: f64,
    pub max_iter: usize,
    /// Stop when every component of the mean-log-likelihood gradient is
    /// below this.
    pub tol: f64,
}

impl Default for OrdinalHyper {
    fn default() -> Self {
        Self { l2: 1.0, max_iter: 20_000, tol: 1e-7 }
    }
}

/// Proportional-odds model `P(y <= k) = logistic(theta_k - w . x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub thresholds: [f64; 4],
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
}

pub(crate) fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln logistic(z)` without overflow.
fn ln_logistic(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

impl OrdinalModel {
    pub fn latent(&self, row: &[f64]) -> f64 {
        row.iter().zip(&self.weights).map(|(x, w)| x * w).sum()
    }

    /// `P(y <= k)` for k = 1..=4.
    pub fn cumulative(&self, row: &[f64]) -> [f64; 4] {
        let s = self.latent(row);
        self.thresholds.map(|t| logistic(t - s))
    }

    /// Class probabilities for 1..=5.
    pub fn probabilities(&self, row: &[f64]) -> [f64; 5] {
        let c = self.cumulative(row);
        std::array::from_fn(|k| match k {
            0 => c[0],
            4 => 1.0 - c[3],
            _ => c[k] - c[k - 1],
        })
    }

    /// Median category: the smallest k with `P(y <= k) >= 0.5`.
    pub fn predict(&self, row: &[f64]) -> Rating {
        let s = self.latent(row);
        Rating::saturating(1 + self.thresholds.iter().filter(|&&t| t < s).count() as i64)
    }

    /// Weights divided by their L1 norm, thresholds rescaled by the same
    /// factor so predictions are unchanged.
    pub fn normalized(&self) -> Self {
        let norm: f64 = self.weights.iter().map(|w| w.abs()).sum();
        if norm == 0.0 {
            return self.clone();
        }
        Self {
            weights: self.weights.iter().map(|w| w / norm).collect(),
            thresholds: self.thresholds.map(|t| t / norm),
            ..self.clone()
        }
    }
}

/// Unpacks `[w.., theta_1, ln gap_2, ln gap_3, ln gap_4]`.
fn thresholds_of(params: &[f64], p: usize) -> [f64; 4] {
    let mut t = [params[p]; 4];
    for k in 1..4 {
        t[k] = t[k - 1] + params[p + k].exp();
    }
    t
}

/// Mean penalized log-likelihood and its gradient.
fn objective(data: &Grouped, l2: f64, params: &[f64]) -> (f64, Vec<f64>) {
    let p = params.len() - 4;
    let n = data.total;
    let theta = thresholds_of(params, p);
    let w = &params[..p];
    let mut ll = 0.0;
    let mut grad_w = vec![0.0; p];
    let mut grad_t = [0.0; 4];
    for ((row, &k), &count) in data.rows.iter().zip(&data.classes).zip(&data.counts) {
        let s: f64 = row.iter().zip(w).map(|(x, w)| x * w).sum();
        let (lp, da, db) = match k {
            0 => {
                let a = theta[0] - s;
                (ln_logistic(a), logistic(-a), 0.0)
            }
            4 => {
                let b = theta[3] - s;
                (ln_logistic(-b), 0.0, -logistic(b))
            }
            _ => {
                let (a, b) = (theta[k] - s, theta[k - 1] - s);
                let gap = (a - b).exp_m1();
                (
                    ln_logistic(a) + ln_logistic(-b) + (-(b - a).exp_m1()).ln(),
                    logistic(-a) + 1.0 / gap,
                    -logistic(b) - 1.0 / gap,
                )
            }
        };
        let (da, db) = (count * da, count * db);
        ll += count * lp;
        let ds = -(da + db);
        for (g, x) in grad_w.iter_mut().zip(row) {
            *g += ds * x;
        }
        if k < 4 {
            grad_t[k] += da;
        }
        if k > 0 {
            grad_t[k - 1] += db;
        }
    }
    let penalty = 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    let mut grad = Vec::with_capacity(p + 4);
    grad.extend(grad_w.iter().zip(w).map(|(g, v)| (g - l2 * v) / n));
    // theta_j = theta_1 + sum_{m <= j} exp(eta_m)
    grad.push(grad_t.iter().sum::<f64>() / n);
    for m in 1..4 {
        let tail: f64 = grad_t[m..].iter().sum();
        grad.push(tail * params[p + m].exp() / n);
    }
    ((ll - penalty) / n, grad)
}

fn initial_params(design: &DesignMatrix) -> Vec<f64> {
    let mut counts = [0.5f64; 5];
    for y in &design.labels {
        counts[usize::from(y.get()) - 1] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    let mut cum = 0.0;
    let mut theta = [0.0; 4];
    for k in 0..4 {
        cum += counts[k] / total;
        theta[k] = (cum / (1.0 - cum)).ln();
    }
    let mut params = vec![0.0; design.width()];
    params.push(theta[0]);
    for k in 1..4 {
        params.push((theta[k] - theta[k - 1]).max(1e-3).ln());
    }
    params
}

pub fn fit_ordinal(design: &DesignMatrix, hyper: &OrdinalHyper) -> Result<OrdinalModel, ModelError> {
    check_fit_input(design)?;
    if !(hyper.l2 >= 0.0) || hyper.max_iter == 0 {
        return Err(ModelError::InvalidParameter("ordinal l2 must be >= 0 and max_iter > 0".into()));
    }
    let data = group_rows(design);
    let opt = maximize(|x| objective(&data, hyper.l2, x), initial_params(design), hyper.max_iter, hyper.tol);
    if !opt.converged {
        log::warn!("ordinal fit stopped after {} iterations without converging", opt.iterations);
    }
    let p = design.width();
    Ok(OrdinalModel {
        feature_names: design.feature_names.clone(),
        weights: opt.x[..p].to_vec(),
        thresholds: thresholds_of(&opt.x, p),
        converged: opt.converged,
        iterations: opt.iterations,
        log_likelihood: opt.value * design.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(weights: Vec<f64>, thresholds: [f64; 4]) -> OrdinalModel {
        OrdinalModel {
            feature_names: (0..weights.len()).map(|i| format!("x{i}")).collect(),
            weights,
            thresholds,
            converged: true,
            iterations: 0,
            log_likelihood: 0.0,
        }
    }

    #[test]
    fn median_prediction_example() {
        let m = model(vec![0.0, 0.0, 1.0], [1.5, 2.5, 3.5, 4.5]);
        assert_eq!(m.predict(&[3.0, 5.0, 3.0]).get(), 3);
        // P(y <= 2) = logistic(-0.5) < 0.5 <= P(y <= 3) = logistic(0.5)
        let c = m.cumulative(&[3.0, 5.0, 3.0]);
        assert!(c[1] < 0.5 && c[2] >= 0.5);
        let probs = m.probabilities(&[3.0, 5.0, 3.0]);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalization_keeps_predictions() {
        let m = model(vec![0.5, -1.0, 2.5], [1.0, 3.0, 6.0, 9.0]);
        let n = m.normalized();
        assert!((n.weights.iter().map(|w| w.abs()).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(n.weights[1] < 0.0);
        for a in 1..=5 {
            for b in 1..=5 {
                let row = [f64::from(a), f64::from(b), f64::from(a.min(b))];
                assert_eq!(m.predict(&row), n.predict(&row));
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(i % 5 + 1), f64::from((i * 3) % 5 + 1)]).collect();
        let labels = (0..40).map(|i| Rating::saturating(i64::from((i * 7) % 5 + 1))).collect();
        let d = DesignMatrix { rows, labels, feature_names: vec!["a".into(), "b".into()] };
        let params = vec![0.3, -0.2, -0.5, 0.1, -0.3, 0.2];
        let d = group_rows(&d);
        let (_, g) = objective(&d, 0.7, &params);
        for i in 0..params.len() {
            let h = 1e-6;
            let mut up = params.clone();
            up[i] += h;
            let mut down = params.clone();
            down[i] -= h;
            let num = (objective(&d, 0.7, &up).0 - objective(&d, 0.7, &down).0) / (2.0 * h);
            assert!((num - g[i]).abs() < 1e-7, "param {i}: {num} vs {}", g[i]);
        }
    }
}
