//! Two-hidden-layer ReLU regressor trained on squared error with Adam.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_fit_input, round_clamped, DesignMatrix, ModelError};
use crate::rating::Rating;
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpHyper {
    /// Units in each of the two hidden layers.
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MlpHyper {
    fn default() -> Self {
        Self { hidden: 16, epochs: 150, batch_size: 32, learning_rate: 0.005, seed: 0 }
    }
}

/// Parameters are stored flat: `W1 (h x n_in), b1 (h), W2 (h x h), b2 (h),
/// w3 (h), b3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub feature_names: Vec<String>,
    pub n_in: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
}

struct Offsets {
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    len: usize,
}

fn offsets(n_in: usize, h: usize) -> Offsets {
    let b1 = h * n_in;
    let w2 = b1 + h;
    let b2 = w2 + h * h;
    let w3 = b2 + h;
    let b3 = w3 + h;
    Offsets { b1, w2, b2, w3, b3, len: b3 + 1 }
}

struct Activations {
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    out: f64,
}

impl MlpModel {
    fn forward(&self, row: &[f64]) -> Activations {
        let (h, n) = (self.hidden, self.n_in);
        let o = offsets(n, h);
        let p = &self.params;
        let z1: Vec<f64> =
            (0..h).map(|i| p[o.b1 + i] + (0..n).map(|j| p[i * n + j] * row[j]).sum::<f64>()).collect();
        let a1: Vec<f64> = z1.iter().map(|v| v.max(0.0)).collect();
        let z2: Vec<f64> =
            (0..h).map(|i| p[o.b2 + i] + (0..h).map(|j| p[o.w2 + i * h + j] * a1[j]).sum::<f64>()).collect();
        let a2: Vec<f64> = z2.iter().map(|v| v.max(0.0)).collect();
        let out = p[o.b3] + (0..h).map(|i| p[o.w3 + i] * a2[i]).sum::<f64>();
        Activations { z1, a1, z2, a2, out }
    }

    pub fn output(&self, row: &[f64]) -> f64 {
        self.forward(row).out
    }

    pub fn predict(&self, row: &[f64]) -> Rating {
        round_clamped(self.output(row))
    }

    /// Mean squared error over the batch and its gradient with respect to
    /// `params`.
    pub fn loss_and_grad(&self, rows: &[Vec<f64>], targets: &[f64]) -> (f64, Vec<f64>) {
        let (h, n) = (self.hidden, self.n_in);
        let o = offsets(n, h);
        let p = &self.params;
        let m = rows.len() as f64;
        let mut grad = vec![0.0; o.len];
        let mut loss = 0.0;
        for (row, &y) in rows.iter().zip(targets) {
            let act = self.forward(row);
            let err = act.out - y;
            loss += err * err;
            let d_out = 2.0 * err / m;
            grad[o.b3] += d_out;
            let mut d_z2 = vec![0.0; h];
            for i in 0..h {
                grad[o.w3 + i] += d_out * act.a2[i];
                if act.z2[i] > 0.0 {
                    d_z2[i] = d_out * p[o.w3 + i];
                }
            }
            let mut d_a1 = vec![0.0; h];
            for i in 0..h {
                grad[o.b2 + i] += d_z2[i];
                for j in 0..h {
                    grad[o.w2 + i * h + j] += d_z2[i] * act.a1[j];
                    d_a1[j] += d_z2[i] * p[o.w2 + i * h + j];
                }
            }
            for i in 0..h {
                if act.z1[i] > 0.0 {
                    grad[o.b1 + i] += d_a1[i];
                    for j in 0..n {
                        grad[i * n + j] += d_a1[i] * row[j];
                    }
                }
            }
        }
        (loss / m, grad)
    }
}

fn he_uniform<R: Rng>(fan_in: usize, count: usize, rng: &mut R) -> impl Iterator<Item = f64> + '_ {
    let bound = (6.0 / fan_in as f64).sqrt();
    (0..count).map(move |_| rng.gen_range(-bound..bound))
}

/// Seeded initial network; the output bias starts at `target_mean`.
pub fn init_mlp(feature_names: Vec<String>, hidden: usize, target_mean: f64, seed: u64) -> MlpModel {
    let n_in = feature_names.len();
    let o = offsets(n_in, hidden);
    let mut rng = rng_from_seed(seed);
    let mut params = Vec::with_capacity(o.len);
    params.extend(he_uniform(n_in, hidden * n_in, &mut rng));
    params.extend(std::iter::repeat_n(0.0, hidden));
    params.extend(he_uniform(hidden, hidden * hidden, &mut rng));
    params.extend(std::iter::repeat_n(0.0, hidden));
    params.extend(he_uniform(hidden, hidden, &mut rng));
    params.push(target_mean);
    MlpModel { feature_names, n_in, hidden, params }
}

pub fn fit_mlp(design: &DesignMatrix, hyper: &MlpHyper) -> Result<MlpModel, ModelError> {
    check_fit_input(design)?;
    if hyper.hidden == 0 || hyper.epochs == 0 || hyper.batch_size == 0 || !(hyper.learning_rate > 0.0) {
        return Err(ModelError::InvalidParameter("mlp hidden, epochs, batch_size and learning_rate must be positive".into()));
    }
    let targets: Vec<f64> = design.labels.iter().map(|r| r.as_f64()).collect();
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let mut model = init_mlp(design.feature_names.clone(), hyper.hidden, mean, hyper.seed);
    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut m = vec![0.0; model.params.len()];
    let mut v = vec![0.0; model.params.len()];
    let mut t = 0i32;
    let mut order: Vec<usize> = (0..design.len()).collect();
    let mut rng = rng_from_seed(hyper.seed ^ 0x5EED);
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(hyper.batch_size) {
            let rows: Vec<Vec<f64>> = batch.iter().map(|&i| design.rows[i].clone()).collect();
            let ys: Vec<f64> = batch.iter().map(|&i| targets[i]).collect();
            let (_, grad) = model.loss_and_grad(&rows, &ys);
            t += 1;
            let (c1, c2) = (1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
            for (k, g) in grad.iter().enumerate() {
                m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                model.params[k] -= hyper.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
            }
        }
    }
    Ok(model)
}
