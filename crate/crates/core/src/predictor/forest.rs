//! CART regression forests over bit-vector inputs.
//!
//! Every input is binary, so a split is a single bit: rows with the bit clear
//! go left, rows with it set go right. Splits minimize the summed squared
//! error of the children over a random subset of bits; when no bit in the
//! subset gives two non-empty children of at least `min_leaf` rows the
//! remaining bits are tried in the same random order.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dataset, PredictorError};
use crate::schema::BitVector;
use crate::seeding::{self, purpose, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Bits considered per split; `None` means `ceil(sqrt(N))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 200, max_depth: None, min_leaf: 2, features_per_split: None, bootstrap: true, seed: 0 }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), PredictorError> {
        if self.n_trees == 0 {
            return Err(PredictorError::BadParams("n_trees must be >= 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(PredictorError::BadParams("min_leaf must be >= 1".into()));
        }
        if self.features_per_split == Some(0) {
            return Err(PredictorError::BadParams("features_per_split must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(f64),
    Split { bit: usize, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, z: &BitVector) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split { bit, left, right } => i = if z.get(bit) { right } else { left },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub params: ForestParams,
    pub n_bits: usize,
    trees: Vec<Tree>,
}

impl Forest {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn predict_one(&self, z: &BitVector) -> f64 {
        let p0 = self.trees[0].predict(z);
        p0 + self.trees[1..].iter().map(|t| t.predict(z) - p0).sum::<f64>() / self.trees.len() as f64
    }

    /// Mean over trees, parallel over rows.
    pub fn predict(&self, x: &[BitVector]) -> Vec<f64> {
        x.par_iter().map(|z| self.predict_one(z)).collect()
    }
}

struct Builder<'a> {
    x: &'a [BitVector],
    y: &'a [f64],
    n_bits: usize,
    mtry: usize,
    min_leaf: usize,
    max_depth: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    /// Grows the subtree over `rows` and returns its node index.
    fn grow(&mut self, rows: &mut [usize], depth: usize, rng: &mut Rng) -> usize {
        let n = rows.len() as f64;
        let sum: f64 = rows.iter().map(|&i| self.y[i]).sum();
        let y0 = self.y[rows[0]];
        let mean = y0 + rows.iter().map(|&i| self.y[i] - y0).sum::<f64>() / n;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(mean));

        let pure = rows.iter().all(|&i| self.y[i] == self.y[rows[0]]);
        if pure || depth >= self.max_depth || rows.len() < 2 * self.min_leaf {
            return id;
        }

        let mut order: Vec<usize> = (0..self.n_bits).collect();
        order.shuffle(rng);
        let mut best: Option<(f64, usize)> = None;
        for (tried, &bit) in order.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            let (mut n1, mut s1) = (0usize, 0.0);
            for &i in rows.iter() {
                if self.x[i].get(bit) {
                    n1 += 1;
                    s1 += self.y[i];
                }
            }
            let n0 = rows.len() - n1;
            if n0 < self.min_leaf || n1 < self.min_leaf {
                continue;
            }
            // SSE = sum y^2 - sum^2 / n per child; the y^2 term is shared.
            let s0 = sum - s1;
            let score = s0 * s0 / n0 as f64 + s1 * s1 / n1 as f64;
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, bit));
            }
        }
        let Some((_, bit)) = best else { return id };

        let mut split = 0;
        for k in 0..rows.len() {
            if !self.x[rows[k]].get(bit) {
                rows.swap(k, split);
                split += 1;
            }
        }
        let (lo, hi) = rows.split_at_mut(split);
        let left = self.grow(lo, depth + 1, rng);
        let right = self.grow(hi, depth + 1, rng);
        self.nodes[id] = Node::Split { bit, left, right };
        id
    }
}

fn fit_tree(train: &Dataset, params: &ForestParams, mtry: usize, index: usize) -> Tree {
    let mut rng = seeding::stream(&[params.seed, purpose::FOREST, index as u64]);
    let n = train.len();
    let mut rows: Vec<usize> =
        if params.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
    let mut b = Builder {
        x: &train.x,
        y: &train.y,
        n_bits: train.n_bits(),
        mtry,
        min_leaf: params.min_leaf,
        max_depth: params.max_depth.unwrap_or(usize::MAX),
        nodes: Vec::new(),
    };
    b.grow(&mut rows, 0, &mut rng);
    Tree { nodes: b.nodes }
}

/// Fits `n_trees` trees in parallel; tree `i` draws from its own stream, so
/// the forest depends only on the data and the parameters.
pub fn fit_forest(train: &Dataset, params: &ForestParams) -> Result<Forest, PredictorError> {
    params.validate()?;
    if train.len() < 2 {
        return Err(PredictorError::InsufficientData(format!("{} training rows", train.len())));
    }
    let n_bits = train.n_bits();
    let mtry =
        params.features_per_split.unwrap_or_else(|| (n_bits as f64).sqrt().ceil() as usize).clamp(1, n_bits.max(1));
    let trees = (0..params.n_trees).into_par_iter().map(|i| fit_tree(train, params, mtry, i)).collect();
    Ok(Forest { params: params.clone(), n_bits, trees })
}
