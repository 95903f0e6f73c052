use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Gaussian blur over outcome index, balanced to be doubly stochastic on the
/// finite grid: T_ij = x_i g(i - j) x_j with every row and column summing to 1.
struct BalancedKernel {
    taps: Vec<f64>,
    scale: Vec<f64>,
}

impl BalancedKernel {
    fn new(dim: usize, sigma: f64) -> Self {
        let reach = ((9.0 * sigma).ceil() as usize).min(dim.saturating_sub(1));
        let taps: Vec<f64> = (0..=reach)
            .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let mut kernel = BalancedKernel {
            taps,
            scale: vec![1.0; dim],
        };
        // Symmetric Sinkhorn: x <- sqrt(x / (G x)) converges to x (G x) = 1.
        for _ in 0..10_000 {
            let gx = kernel.raw(&kernel.scale);
            let mut change = 0.0f64;
            for (x, g) in kernel.scale.iter_mut().zip(&gx) {
                let next = (*x / g).sqrt();
                change = change.max((next - *x).abs());
                *x = next;
            }
            if change < 1e-15 {
                break;
            }
        }
        kernel
    }

    /// Banded G v with G_ij = g(|i - j|).
    fn raw(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let reach = self.taps.len() - 1;
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(reach);
                let hi = (i + reach).min(n - 1);
                (lo..=hi).map(|j| self.taps[i.abs_diff(j)] * v[j]).sum()
            })
            .collect()
    }

    fn apply(&self, p: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = p.iter().zip(&self.scale).map(|(a, x)| a * x).collect();
        self.raw(&scaled)
            .into_iter()
            .zip(&self.scale)
            .map(|(a, x)| a * x)
            .collect()
    }
}

fn kernel(dim: usize, sigma: f64) -> Arc<BalancedKernel> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), Arc<BalancedKernel>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (dim, sigma.to_bits());
    if let Some(k) = cache.lock().unwrap().get(&key) {
        return k.clone();
    }
    let k = Arc::new(BalancedKernel::new(dim, sigma));
    cache.lock().unwrap().entry(key).or_insert(k).clone()
}

/// Blurs an outcome distribution with a discrete Gaussian of width `sigma_det`
/// (in units of m). Zero width is the identity.
pub fn detection_noise_convolve(p: &[f64], sigma_det: f64) -> Vec<f64> {
    if sigma_det <= 0.0 || p.len() < 2 {
        return p.to_vec();
    }
    let mut out = kernel(p.len(), sigma_det).apply(p);
    let total: f64 = out.iter().sum();
    let target: f64 = p.iter().sum();
    if total > 0.0 {
        out.iter_mut().for_each(|v| *v *= target / total);
    }
    out
}
