use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default Gauss-Hermite order for Gaussian priors.
pub const DEFAULT_NODES: usize = 80;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PriorKind {
    /// Zero-mean Gaussian with standard deviation `delta_phi`.
    Gaussian { delta_phi: f64 },
    Tabulated,
}

/// Discrete phase distribution: quadrature nodes and normalized weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    kind: PriorKind,
}

/// Zero-mean Gaussian prior on Gauss-Hermite nodes scaled by sqrt(2) delta_phi.
pub fn gaussian_prior(delta_phi: f64, nodes: usize) -> Result<Prior> {
    if !(delta_phi > 0.0 && delta_phi.is_finite()) {
        return Err(Error::InvalidPrior(format!("delta_phi must be positive, got {delta_phi}")));
    }
    if nodes == 0 {
        return Err(Error::InvalidPrior("need at least one node".into()));
    }
    let (x, w) = gauss_hermite(nodes);
    let scale = std::f64::consts::SQRT_2 * delta_phi;
    let total: f64 = w.iter().sum();
    Ok(Prior {
        nodes: x.iter().map(|xi| xi * scale).collect(),
        weights: w.iter().map(|wi| wi / total).collect(),
        kind: PriorKind::Gaussian { delta_phi },
    })
}

/// Nodes and weights for the weight function exp(-x^2), nodes ascending.
/// Nodes ascending and normalized weights for exp(-x^2), from the Jacobi
/// matrix eigendecomposition.
fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Restore exact symmetry.
    for i in 0..n / 2 {
        let x = 0.5 * (pairs[n - 1 - i].0 - pairs[i].0);
        let w = 0.5 * (pairs[n - 1 - i].1 + pairs[i].1);
        pairs[i] = (-x, w);
        pairs[n - 1 - i] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    pairs.into_iter().unzip()
}

impl Prior {
    /// Arbitrary discrete prior; weights are renormalized.
    pub fn tabulated(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Prior> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::InvalidPrior(format!(
                "{} nodes vs {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidPrior("non-finite node".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidPrior("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidPrior("weights sum to zero".into()));
        }
        Ok(Prior {
            nodes,
            weights: weights.into_iter().map(|w| w / total).collect(),
            kind: PriorKind::Tabulated,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> PriorKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// sum_j w_j phi_j^k
    pub fn moment(&self, k: i32) -> f64 {
        self.iter().map(|(x, w)| w * x.powi(k)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn second_moment(&self) -> f64 {
        match self.kind {
            PriorKind::Gaussian { delta_phi } => delta_phi * delta_phi,
            PriorKind::Tabulated => self.moment(2),
        }
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.iter().map(|(x, w)| w * (x - m).powi(2)).sum()
    }

    /// Width used to set the prior scale of derived quantities.
    pub fn rms(&self) -> f64 {
        self.second_moment().sqrt()
    }

    /// (E[exp(-i d phi)], E[phi exp(-i d phi)]).
    ///
    /// Gaussian priors use the closed forms: finite quadrature aliases once
    /// d * delta_phi is large.
    pub fn characteristic(&self, d: f64) -> (Complex64, Complex64) {
        match self.kind {
            PriorKind::Gaussian { delta_phi } => {
                let v = delta_phi * delta_phi;
                let g = (-0.5 * v * d * d).exp();
                (Complex64::new(g, 0.0), Complex64::new(0.0, -d * v * g))
            }
            PriorKind::Tabulated => {
                let mut m0 = Complex64::new(0.0, 0.0);
                let mut m1 = Complex64::new(0.0, 0.0);
                for (x, w) in self.iter() {
                    let e = Complex64::from_polar(w, -d * x);
                    m0 += e;
                    m1 += e * x;
                }
                (m0, m1)
            }
        }
    }

    /// Drops nodes with weight below `threshold` times the largest weight.
    pub fn pruned(&self, threshold: f64) -> Prior {
        let wmax = self.weights.iter().cloned().fold(0.0, f64::max);
        let (nodes, weights): (Vec<f64>, Vec<f64>) =
            self.iter().filter(|&(_, w)| w >= threshold * wmax).unzip();
        let total: f64 = weights.iter().sum();
        Prior {
            nodes,
            weights: weights.into_iter().map(|w| w / total).collect(),
            kind: PriorKind::Tabulated,
        }
    }

    /// Gauss quadrature with at most `order` nodes for this distribution:
    /// matches its moments up to degree 2 order - 1. Built by Lanczos on the
    /// node positions with full reorthogonalization.
    pub fn reduced(&self, order: usize) -> Result<Prior> {
        if order == 0 {
            return Err(Error::InvalidPrior("reduced order must be at least 1".into()));
        }
        if order >= self.len() {
            return Ok(self.clone());
        }
        let n = self.len();
        let mut basis: Vec<Vec<f64>> = vec![self.weights.iter().map(|w| w.sqrt()).collect()];
        let (mut alpha, mut beta) = (Vec::with_capacity(order), Vec::with_capacity(order));
        for j in 0..order {
            let q = &basis[j];
            let mut v: Vec<f64> = (0..n).map(|i| self.nodes[i] * q[i]).collect();
            let a: f64 = v.iter().zip(q).map(|(x, y)| x * y).sum();
            alpha.push(a);
            for _ in 0..2 {
                for b in &basis {
                    let c: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if j + 1 == order || norm < 1e-13 * (1.0 + a.abs()) {
                break;
            }
            beta.push(norm);
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
        let k = alpha.len();
        let jacobi = DMatrix::from_fn(k, k, |i, j| match i.abs_diff(j) {
            0 => alpha[i],
            1 => beta[i.min(j)],
            _ => 0.0,
        });
        let eig = jacobi.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..k)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        Prior::tabulated(nodes, weights)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "phi,weight")?;
        for (x, w) in self.iter() {
            writeln!(out, "{x:.16e},{w:.16e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Prior> {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',').map(|s| s.trim().parse::<f64>());
            match (parts.next(), parts.next()) {
                (Some(Ok(x)), Some(Ok(w))) => {
                    nodes.push(x);
                    weights.push(w);
                }
                _ => return Err(Error::InvalidPrior(format!("bad prior row {}: {line}", i + 1))),
            }
        }
        Prior::tabulated(nodes, weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_moments() {
        for k in [20, 40, 80, 120] {
            let p = gaussian_prior(0.7, k).unwrap();
            assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(p.moment(1).abs() < 1e-10);
            assert!((p.moment(2) - 0.49).abs() < 1e-10, "K={k}");
        }
        let p = gaussian_prior(0.5, 80).unwrap();
        assert!((p.moment(4) - 3.0 * 0.5f64.powi(4)).abs() < 1e-9);
        assert!((p.moment(6) - 15.0 * 0.5f64.powi(6)).abs() < 1e-9);
    }

    #[test]
    fn single_node() {
        let p = gaussian_prior(0.3, 1).unwrap();
        assert_eq!(p.nodes(), &[0.0]);
        assert_eq!(p.weights(), &[1.0]);
    }

    #[test]
    fn nodes_ascending_and_symmetric() {
        let p = gaussian_prior(1.0, 33).unwrap();
        assert!(p.nodes().windows(2).all(|w| w[0] < w[1]));
        for (a, b) in p.nodes().iter().zip(p.nodes().iter().rev()) {
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(gaussian_prior(0.0, 10).is_err());
        assert!(gaussian_prior(-1.0, 10).is_err());
        assert!(gaussian_prior(1.0, 0).is_err());
        assert!(Prior::tabulated(vec![0.0], vec![-1.0]).is_err());
        assert!(Prior::tabulated(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn gaussian_characteristic_matches_dense_tabulation() {
        let p = gaussian_prior(0.4, 80).unwrap();
        let grid: Vec<f64> = (-4000..=4000).map(|i| i as f64 * 1e-3).collect();
        let w: Vec<f64> = grid.iter().map(|x| (-x * x / 0.32).exp()).collect();
        let t = Prior::tabulated(grid, w).unwrap();
        for d in [0.0, 1.0, 3.0, 10.0] {
            let (a0, a1) = p.characteristic(d);
            let (b0, b1) = t.characteristic(d);
            assert!((a0 - b0).norm() < 1e-10 && (a1 - b1).norm() < 1e-10, "d={d}");
        }
    }

    #[test]
    fn csv_roundtrip() {
        let p = gaussian_prior(0.2, 9).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let q = Prior::read_csv(buf.as_slice()).unwrap();
        for ((a, wa), (b, wb)) in p.iter().zip(q.iter()) {
            assert_eq!(a, b);
            assert!((wa - wb).abs() <= 1e-15 * wa);
        }
    }

    #[test]
    fn pruning_renormalizes() {
        let p = gaussian_prior(1.0, 80).unwrap().pruned(1e-12);
        assert!(p.len() < 80);
        assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!((p.moment(2) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reduced_rule_matches_low_moments() {
        let nodes: Vec<f64> = (0..2001).map(|i| -3.0 + 6.0 * i as f64 / 2000.0).collect();
        let weights: Vec<f64> = nodes.iter().map(|x| (-x * x).exp() * (1.0 + (7.0 * x).cos().powi(2))).collect();
        let full = Prior::tabulated(nodes, weights).unwrap();
        let red = full.reduced(20).unwrap();
        assert_eq!(red.len(), 20);
        for k in 0..40 {
            let (a, b) = (full.moment(k), red.moment(k));
            let scale = 1.0 + full.moment(k + k % 2);
            assert!((a - b).abs() <= 1e-10 * scale, "k={k}: {a} vs {b}");
        }
        assert_eq!(red.reduced(50).unwrap(), red);
    }
}
