use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::MAX_PARTICLES;
use crate::error::{Error, Result};

/// The fully symmetric sector S = N/2 of N two-level atoms.
///
/// Cheap to clone: the handle shares one immutable block holding the
/// log-factorial table and the lazily built S_y measurement basis.
#[derive(Clone)]
pub struct SpinSpace {
    inner: Arc<Inner>,
}

struct Inner {
    particles: usize,
    ln_factorial: Vec<f64>,
    sy_basis: OnceLock<DMatrix<Complex64>>,
}

impl SpinSpace {
    pub fn new(particles: usize) -> Result<Self> {
        if particles == 0 || particles > MAX_PARTICLES {
            return Err(Error::Size(particles));
        }
        let mut ln_factorial = Vec::with_capacity(particles + 1);
        let mut acc = 0.0;
        ln_factorial.push(0.0);
        for i in 1..=particles {
            acc += (i as f64).ln();
            ln_factorial.push(acc);
        }
        Ok(Self {
            inner: Arc::new(Inner {
                particles,
                ln_factorial,
                sy_basis: OnceLock::new(),
            }),
        })
    }

    pub fn particles(&self) -> usize {
        self.inner.particles
    }

    /// Total spin S = N/2.
    pub fn spin(&self) -> f64 {
        self.inner.particles as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.inner.particles + 1
    }

    /// Eigenvalue of S_z at basis index `k`; index 0 is m = S.
    #[inline]
    pub fn m(&self, k: usize) -> f64 {
        self.spin() - k as f64
    }

    /// S, S-1, ..., -S.
    pub fn m_grid(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.m(k)).collect()
    }

    /// ln C(N, k).
    pub fn ln_binomial(&self, k: usize) -> f64 {
        let f = &self.inner.ln_factorial;
        let n = self.inner.particles;
        f[n] - f[k] - f[n - k]
    }

    /// <m+1|S+|m> for the basis vector at index `k` (m = S - k). Zero at the top.
    #[inline]
    pub fn raising_coefficient(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let s = self.spin();
        let m = self.m(k);
        (s * (s + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
    }

    /// Unitary whose column k is the S_y eigenvector with eigenvalue m(k).
    pub fn sy_basis(&self) -> &DMatrix<Complex64> {
        self.inner.sy_basis.get_or_init(|| build_sy_basis(self))
    }

    pub fn same_as(&self, other: &SpinSpace) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.particles() == other.particles()
    }

    pub(crate) fn check_same(&self, other: &SpinSpace) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::SpaceMismatch {
                left: self.particles(),
                right: other.particles(),
            })
        }
    }
}

impl PartialEq for SpinSpace {
    fn eq(&self, other: &Self) -> bool {
        self.particles() == other.particles()
    }
}

impl fmt::Debug for SpinSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpinSpace")
            .field("particles", &self.particles())
            .field("dim", &self.dim())
            .finish()
    }
}

fn build_sy_basis(space: &SpinSpace) -> DMatrix<Complex64> {
    let sy = super::operator::collective_matrix(space, super::Axis::Y);
    let eig = SymmetricEigen::new(sy);
    let dim = space.dim();
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    // Eigenvalues are exactly the m grid; slot each eigenvector by its rounded value.
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let k = (space.spin() - lambda).round();
        let k = k.clamp(0.0, (dim - 1) as f64) as usize;
        out.set_column(k, &eig.eigenvectors.column(j));
    }
    out
}
