//! Linear (ridge least squares) and multinomial logistic regression.

use serde::{Deserialize, Serialize};

use super::optim::maximize;
use super::{check_fit_input, group_rows, round_clamped, DesignMatrix, Grouped, ModelError};
use crate::rating::Rating;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearHyper {
    /// Ridge penalty on the weights; the intercept is not penalized.
    pub ridge: f64,
}

impl Default for LinearHyper {
    fn default() -> Self {
        Self { ridge: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn output(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>()
    }

    pub fn predict(&self, row: &[f64]) -> Rating {
        round_clamped(self.output(row))
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let tail: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - tail) / a[i][i];
    }
    Some(x)
}

pub fn fit_linear(design: &DesignMatrix, hyper: &LinearHyper) -> Result<LinearModel, ModelError> {
    check_fit_input(design)?;
    let p = design.width();
    // last column is the intercept
    let mut xtx = vec![vec![0.0; p + 1]; p + 1];
    let mut xty = vec![0.0; p + 1];
    for (row, y) in design.rows.iter().zip(&design.labels) {
        let x: Vec<f64> = row.iter().copied().chain([1.0]).collect();
        for i in 0..=p {
            xty[i] += x[i] * y.as_f64();
            for j in 0..=p {
                xtx[i][j] += x[i] * x[j];
            }
        }
    }
    for (i, r) in xtx.iter_mut().enumerate().take(p) {
        r[i] += hyper.ridge;
    }
    let beta = solve(xtx, xty)
        .ok_or_else(|| ModelError::InvalidParameter("singular least-squares system; raise the ridge penalty".into()))?;
    Ok(LinearModel { feature_names: design.feature_names.clone(), weights: beta[..p].to_vec(), intercept: beta[p] })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticHyper {
    /// L2 penalty on all coefficients, on the summed log-likelihood scale.
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticHyper {
    fn default() -> Self {
        Self { l2: 1.0, max_iter: 20_000, tol: 1e-7 }
    }
}

/// Multinomial logistic regression over the five classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub feature_names: Vec<String>,
    /// One weight vector per class 1..=5.
    pub weights: Vec<Vec<f64>>,
    pub intercepts: [f64; 5],
    pub converged: bool,
}

fn softmax(z: [f64; 5]) -> [f64; 5] {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|v| (v - m).exp());
    let sum: f64 = e.iter().sum();
    e.map(|v| v / sum)
}

impl LogisticModel {
    pub fn probabilities(&self, row: &[f64]) -> [f64; 5] {
        softmax(std::array::from_fn(|c| {
            self.intercepts[c] + row.iter().zip(&self.weights[c]).map(|(x, w)| x * w).sum::<f64>()
        }))
    }

    /// Most probable class; ties go to the lower class.
    pub fn predict(&self, row: &[f64]) -> Rating {
        let p = self.probabilities(row);
        let best = (0..5).fold(0, |b, c| if p[c] > p[b] { c } else { b });
        Rating::saturating(best as i64 + 1)
    }
}

/// Parameter layout: class `c` owns `[w_c (p), b_c]`.
fn unpack(params: &[f64], p: usize) -> (Vec<Vec<f64>>, [f64; 5]) {
    let weights = (0..5).map(|c| params[c * (p + 1)..c * (p + 1) + p].to_vec()).collect();
    let intercepts = std::array::from_fn(|c| params[c * (p + 1) + p]);
    (weights, intercepts)
}

fn objective(data: &Grouped, l2: f64, params: &[f64]) -> (f64, Vec<f64>) {
    let p = params.len() / 5 - 1;
    let n = data.total;
    let (weights, intercepts) = unpack(params, p);
    let model = LogisticModel { feature_names: Vec::new(), weights, intercepts, converged: false };
    let mut ll = 0.0;
    let mut grad = vec![0.0; params.len()];
    for ((row, &k), &count) in data.rows.iter().zip(&data.classes).zip(&data.counts) {
        let probs = model.probabilities(row);
        ll += count * probs[k].max(f64::MIN_POSITIVE).ln();
        for c in 0..5 {
            let r = count * (f64::from(u8::from(c == k)) - probs[c]);
            let base = c * (p + 1);
            for (j, x) in row.iter().enumerate() {
                grad[base + j] += r * x;
            }
            grad[base + p] += r;
        }
    }
    let penalty = 0.5 * l2 * params.iter().map(|v| v * v).sum::<f64>();
    for (g, v) in grad.iter_mut().zip(params) {
        *g = (*g - l2 * v) / n;
    }
    ((ll - penalty) / n, grad)
}

pub fn fit_logistic(design: &DesignMatrix, hyper: &LogisticHyper) -> Result<LogisticModel, ModelError> {
    check_fit_input(design)?;
    if !(hyper.l2 > 0.0) || hyper.max_iter == 0 {
        return Err(ModelError::InvalidParameter("logistic l2 must be > 0 and max_iter > 0".into()));
    }
    let p = design.width();
    let data = group_rows(design);
    let opt = maximize(|x| objective(&data, hyper.l2, x), vec![0.0; 5 * (p + 1)], hyper.max_iter, hyper.tol);
    if !opt.converged {
        log::warn!("logistic fit stopped after {} iterations without converging", opt.iterations);
    }
    let (weights, intercepts) = unpack(&opt.x, p);
    Ok(LogisticModel { feature_names: design.feature_names.clone(), weights, intercepts, converged: opt.converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> DesignMatrix {
        let width = rows[0].len();
        DesignMatrix {
            rows,
            labels: labels.into_iter().map(|l| Rating::new(l).unwrap()).collect(),
            feature_names: (0..width).map(|i| format!("x{i}")).collect(),
        }
    }

    #[test]
    fn solver() {
        let x = solve(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
        assert!(solve(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]).is_none());
    }

    #[test]
    fn linear_recovers_exact_relation() {
        // y = x, for x cycling 1..5
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![f64::from(i % 5 + 1)]).collect();
        let labels: Vec<u8> = (0..100).map(|i| (i % 5 + 1) as u8).collect();
        let m = fit_linear(&design(rows, labels), &LinearHyper { ridge: 0.0 }).unwrap();
        assert!((m.weights[0] - 1.0).abs() < 1e-9 && m.intercept.abs() < 1e-9);
        assert_eq!(m.predict(&[4.0]).get(), 4);
        assert_eq!(m.predict(&[9.0]).get(), 5);
    }

    #[test]
    fn logistic_probabilities_sum_to_one() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![f64::from(i % 5 + 1)]).collect();
        let labels: Vec<u8> = (0..100).map(|i| (i % 5 + 1) as u8).collect();
        let m = fit_logistic(&design(rows, labels), &LogisticHyper { l2: 0.01, ..LogisticHyper::default() }).unwrap();
        for x in 1..=5 {
            let p = m.probabilities(&[f64::from(x)]);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(m.predict(&[f64::from(x)]).get(), x as u8);
        }
    }
}
