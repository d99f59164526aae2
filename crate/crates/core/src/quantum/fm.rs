//! Second-order factorization machine fitted by plain SGD on squared error.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use super::QuantumError;
use crate::schema::BitVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmParams {
    pub rank: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Standard deviation of the factor initialization.
    pub init_std: f64,
}

impl Default for FmParams {
    fn default() -> Self {
        Self { rank: 8, epochs: 30, lr: 0.01, init_std: 0.01 }
    }
}

/// `y(x) = w0 + sum_i w_i x_i + sum_{i<j} <V_i, V_j> x_i x_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FmModel {
    pub w0: f64,
    pub w: Vec<f64>,
    /// Row `i` is the factor vector `V_i`.
    pub v: Vec<Vec<f64>>,
}

impl FmModel {
    pub fn zeros(n: usize, rank: usize) -> Self {
        Self { w0: 0.0, w: vec![0.0; n], v: vec![vec![0.0; rank]; n] }
    }

    pub fn n_bits(&self) -> usize {
        self.w.len()
    }

    pub fn rank(&self) -> usize {
        self.v.first().map_or(0, Vec::len)
    }

    pub fn pairwise(&self, i: usize, j: usize) -> f64 {
        self.v[i].iter().zip(&self.v[j]).map(|(a, b)| a * b).sum()
    }

    fn active(x: &BitVector) -> Vec<usize> {
        x.iter().enumerate().filter(|(_, b)| *b).map(|(i, _)| i).collect()
    }

    /// Prediction plus the per-factor sums `s_f = sum_i V_if x_i`.
    fn forward(&self, on: &[usize]) -> (f64, Vec<f64>) {
        let mut s = vec![0.0; self.rank()];
        let mut sq = 0.0;
        let mut y = self.w0;
        for &i in on {
            y += self.w[i];
            for (f, v) in self.v[i].iter().enumerate() {
                s[f] += v;
                sq += v * v;
            }
        }
        y += 0.5 * (s.iter().map(|s| s * s).sum::<f64>() - sq);
        (y, s)
    }

    pub fn predict(&self, x: &BitVector) -> f64 {
        self.forward(&Self::active(x)).0
    }

    /// Influence score `|w_i| + sum_{j != i} |<V_i, V_j>|`.
    pub fn influence(&self, i: usize) -> f64 {
        self.w[i].abs() + (0..self.n_bits()).filter(|&j| j != i).map(|j| self.pairwise(i, j).abs()).sum::<f64>()
    }
}

/// Fits an FM; also returns the training RMSE after each epoch.
pub fn fit_fm_traced<R: rand::Rng + ?Sized>(
    history: &[(BitVector, f64)],
    params: &FmParams,
    rng: &mut R,
) -> Result<(FmModel, Vec<f64>), QuantumError> {
    let Some(n) = history.first().map(|(z, _)| z.len()) else {
        return Err(QuantumError::EmptyHistory);
    };
    let init = Normal::new(0.0, params.init_std).map_err(|e| QuantumError::BadSpec(e.to_string()))?;
    let mut fm = FmModel {
        w0: history.iter().map(|(_, y)| y).sum::<f64>() / history.len() as f64,
        w: vec![0.0; n],
        v: (0..n).map(|_| (0..params.rank).map(|_| init.sample(rng)).collect()).collect(),
    };
    let rows: Vec<(Vec<usize>, f64)> = history.iter().map(|(z, y)| (FmModel::active(z), *y)).collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut trace = Vec::with_capacity(params.epochs);
    for _ in 0..params.epochs {
        order.shuffle(rng);
        for &r in &order {
            let (on, y) = &rows[r];
            let (pred, s) = fm.forward(on);
            let g = params.lr * (pred - y);
            fm.w0 -= g;
            for &i in on {
                fm.w[i] -= g;
                for (f, v) in fm.v[i].iter_mut().enumerate() {
                    *v -= g * (s[f] - *v);
                }
            }
        }
        let sse: f64 = rows.iter().map(|(on, y)| (fm.forward(on).0 - y).powi(2)).sum();
        trace.push((sse / rows.len() as f64).sqrt());
    }
    Ok((fm, trace))
}

pub fn fit_fm<R: rand::Rng + ?Sized>(
    history: &[(BitVector, f64)],
    params: &FmParams,
    rng: &mut R,
) -> Result<FmModel, QuantumError> {
    fit_fm_traced(history, params, rng).map(|(fm, _)| fm)
}
