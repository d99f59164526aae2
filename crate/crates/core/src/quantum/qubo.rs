//! QUBO and Ising forms of the quadratic surrogate.

use std::collections::BTreeMap;

use super::fm::FmModel;
use crate::schema::BitVector;

/// Upper-triangular QUBO; `E(x) = sum_{i<=j} Q_ij x_i x_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboMatrix {
    n: usize,
    q: Vec<f64>,
    /// Constant carried alongside the quadratic form.
    pub offset: f64,
}

impl QuboMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, q: vec![0.0; n * n], offset: 0.0 }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry `(i, j)` of the upper triangle; `(j, i)` reads the same entry.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.q[a * self.n + b]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.q[a * self.n + b] = value;
    }

    pub fn energy(&self, x: &[bool]) -> f64 {
        let mut e = 0.0;
        for i in (0..self.n).filter(|&i| x[i]) {
            for j in (i..self.n).filter(|&j| x[j]) {
                e += self.q[i * self.n + j];
            }
        }
        e
    }

    /// Sub-QUBO over `active`, with every other variable frozen to `frozen`.
    /// Couplings to frozen ones fold into the diagonal, constants into `offset`.
    pub fn restrict(&self, active: &[usize], frozen: &BitVector) -> QuboMatrix {
        let is_active: Vec<bool> = (0..self.n).map(|i| active.contains(&i)).collect();
        let fixed_on: Vec<usize> = (0..self.n).filter(|&i| !is_active[i] && frozen.get(i)).collect();
        let mut sub = QuboMatrix::zeros(active.len());
        for (a, &i) in active.iter().enumerate() {
            let folded: f64 = fixed_on.iter().map(|&j| self.get(i, j)).sum();
            sub.set(a, a, self.get(i, i) + folded);
            for (b, &j) in active.iter().enumerate().skip(a + 1) {
                sub.set(a, b, self.get(i, j));
            }
        }
        let mut constant = self.offset;
        for (k, &i) in fixed_on.iter().enumerate() {
            for &j in &fixed_on[k..] {
                constant += self.get(i, j);
            }
        }
        sub.offset = constant;
        sub
    }
}

/// Minimization form of an FM: `Q = -(diag w, <V_i, V_j>)`, `offset = -w0`,
/// so `E(x) + offset = -y(x)`.
pub fn fm_to_qubo(fm: &FmModel) -> QuboMatrix {
    let n = fm.n_bits();
    let mut q = QuboMatrix::zeros(n);
    for i in 0..n {
        q.set(i, i, -fm.w[i]);
        for j in i + 1..n {
            q.set(i, j, -fm.pairwise(i, j));
        }
    }
    q.offset = -fm.w0;
    q
}

/// `E(z) = sum_i h_i z_i + sum_{i<j} J_ij z_i z_j`, spins in `{+1, -1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    pub h: Vec<f64>,
    pub j: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
}

impl IsingModel {
    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn energy(&self, spins: &[i8]) -> f64 {
        let lin: f64 = self.h.iter().zip(spins).map(|(h, &s)| h * s as f64).sum();
        let quad: f64 = self.j.iter().map(|(&(a, b), &j)| j * (spins[a] * spins[b]) as f64).sum();
        lin + quad
    }

    /// Largest absolute field or coupling (1 for an all-zero model).
    pub fn scale(&self) -> f64 {
        let m = self.h.iter().chain(self.j.values()).fold(0.0f64, |m, v| m.max(v.abs()));
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }

    /// Same model divided by `scale()`; the ground states are unchanged.
    pub fn normalized(&self) -> IsingModel {
        let s = self.scale();
        IsingModel {
            h: self.h.iter().map(|h| h / s).collect(),
            j: self.j.iter().map(|(&k, &v)| (k, v / s)).collect(),
            offset: self.offset / s,
        }
    }

    /// The `k` strongest couplings by `|J|`, ties by index order.
    pub fn strongest_pairs(&self, k: usize) -> Vec<(usize, usize)> {
        let mut pairs: Vec<((usize, usize), f64)> = self.j.iter().map(|(&p, &v)| (p, v.abs())).collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        pairs.into_iter().take(k).map(|(p, _)| p).collect()
    }
}

/// Spin of a binary variable under `x = (1 - z) / 2`.
pub fn spin(x: bool) -> i8 {
    if x {
        -1
    } else {
        1
    }
}

/// Exact change of variables `x = (1 - z) / 2`.
pub fn qubo_to_ising(q: &QuboMatrix) -> IsingModel {
    let n = q.n();
    let mut h = vec![0.0; n];
    let mut j = BTreeMap::new();
    let mut offset = 0.0;
    for i in 0..n {
        let d = q.get(i, i);
        h[i] -= d / 2.0;
        offset += d / 2.0;
        for k in i + 1..n {
            let c = q.get(i, k);
            if c != 0.0 {
                h[i] -= c / 4.0;
                h[k] -= c / 4.0;
                offset += c / 4.0;
                j.insert((i, k), c / 4.0);
            }
        }
    }
    IsingModel { h, j, offset }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;
    use rand::Rng as _;

    fn random_qubo(n: usize, seed: u64) -> QuboMatrix {
        let mut rng = seeding::stream(&[seed]);
        let mut q = QuboMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                q.set(i, j, rng.random_range(-1.0..1.0));
            }
        }
        q
    }

    #[test]
    fn zero_qubo() {
        let ising = qubo_to_ising(&QuboMatrix::zeros(5));
        assert!(ising.h.iter().all(|&h| h == 0.0));
        assert!(ising.j.is_empty());
        assert_eq!(ising.offset, 0.0);
    }

    #[test]
    fn single_diagonal() {
        let mut q = QuboMatrix::zeros(1);
        q.set(0, 0, 1.0);
        let ising = qubo_to_ising(&q);
        assert_eq!(ising.h, vec![-0.5]);
        assert_eq!(ising.offset, 0.5);
    }

    #[test]
    fn exhaustive_energy_equivalence() {
        for seed in 0..5 {
            let q = random_qubo(8, seed);
            let ising = qubo_to_ising(&q);
            for s in 0..256u64 {
                let x = BitVector::from_index(s, 8);
                let spins: Vec<i8> = x.iter().map(spin).collect();
                let diff = (ising.energy(&spins) + ising.offset - q.energy(x.as_slice())).abs();
                assert!(diff < 1e-12, "{diff}");
            }
        }
    }

    #[test]
    fn fm_compilation() {
        let mut fm = FmModel::zeros(4, 1);
        fm.w = vec![0.5, -1.0, 0.0, 2.0];
        let q = fm_to_qubo(&fm);
        for i in 0..4 {
            for j in i + 1..4 {
                assert_eq!(q.get(i, j), 0.0);
            }
        }
        fm.v = vec![vec![1.0]; 4];
        let q = fm_to_qubo(&fm);
        // minimization form: unit factor products become -1 couplings
        assert!((0..4).all(|i| (i + 1..4).all(|j| q.get(i, j) == -1.0)));
    }

    #[test]
    fn fm_energy_is_negated_prediction() {
        let mut rng = seeding::stream(&[9]);
        let n = 12;
        let fm = FmModel {
            w0: 0.7,
            w: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            v: (0..n).map(|_| (0..4).map(|_| rng.random_range(-0.5..0.5)).collect()).collect(),
        };
        let q = fm_to_qubo(&fm);
        for _ in 0..1000 {
            let x = BitVector::random(n, &mut rng);
            assert!((q.energy(x.as_slice()) + q.offset + fm.predict(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn restriction_preserves_energy() {
        let q = random_qubo(10, 3);
        let mut rng = seeding::stream(&[4]);
        let frozen = BitVector::random(10, &mut rng);
        let active = vec![1, 4, 5, 8];
        let sub = q.restrict(&active, &frozen);
        for s in 0..16u64 {
            let xa = BitVector::from_index(s, 4);
            let mut full = frozen.clone();
            for (a, &i) in active.iter().enumerate() {
                full.set(i, xa.get(a));
            }
            let diff = sub.energy(xa.as_slice()) + sub.offset - q.energy(full.as_slice()) - q.offset;
            assert!(diff.abs() < 1e-12);
        }
    }

    #[test]
    fn strongest_pairs_are_deterministic() {
        let ising = qubo_to_ising(&random_qubo(6, 7));
        let a = ising.strongest_pairs(3);
        assert_eq!(a, ising.strongest_pairs(3));
        assert_eq!(a.len(), 3);
        let top = ising.j.values().fold(0.0f64, |m, v| m.max(v.abs()));
        assert_eq!(ising.j[&a[0]].abs(), top);
    }
}
