use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use super::{Axis, SpinSpace};
use crate::error::{Error, Result};

/// Hermitian residual tolerated before a matrix is rejected (relative to its scale).
const HERMITIAN_TOL: f64 = 1e-10;

/// Spectral decomposition M = V diag(values) V†.
#[derive(Clone, Debug)]
pub struct Spectral {
    pub values: DVector<f64>,
    pub vectors: DMatrix<Complex64>,
}

impl Spectral {
    /// V exp(-i values t) V† applied to `amplitudes`.
    pub fn propagate(&self, amplitudes: &DVector<Complex64>, t: f64) -> DVector<Complex64> {
        let mut coeffs = self.vectors.ad_mul(amplitudes);
        self.apply_phases(&mut coeffs, t);
        &self.vectors * coeffs
    }

    /// Multiplies eigenbasis coefficients by exp(-i values t) in place.
    pub fn apply_phases(&self, coeffs: &mut DVector<Complex64>, t: f64) {
        if t == 0.0 {
            return;
        }
        for (c, &lambda) in coeffs.iter_mut().zip(self.values.iter()) {
            *c *= Complex64::from_polar(1.0, -lambda * t);
        }
    }
}

/// Dense Hermitian operator on the Dicke space with a lazily cached eigensystem.
#[derive(Clone, Debug)]
pub struct HermitianOperator {
    space: SpinSpace,
    matrix: DMatrix<Complex64>,
    spectral: OnceLock<Spectral>,
}

impl HermitianOperator {
    /// Wraps `matrix`, symmetrizing away round-off. Rejects clearly non-Hermitian input.
    pub fn new(space: &SpinSpace, matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = space.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Numeric(format!(
                "operator is {}x{}, space dimension is {dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let scale = max_abs(&matrix).max(1.0);
        let adjoint = matrix.adjoint();
        let residual = max_abs(&(&matrix - &adjoint));
        if residual > HERMITIAN_TOL * scale {
            return Err(Error::Numeric(format!(
                "matrix is not Hermitian (residual {residual:e})"
            )));
        }
        let matrix = (matrix + adjoint) * Complex64::new(0.5, 0.0);
        Ok(Self {
            space: space.clone(),
            matrix,
            spectral: OnceLock::new(),
        })
    }

    pub fn space(&self) -> &SpinSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Eigensystem, computed on first use and shared afterwards.
    pub fn spectral(&self) -> &Spectral {
        self.spectral.get_or_init(|| {
            let eig = SymmetricEigen::new(self.matrix.clone());
            Spectral {
                values: eig.eigenvalues,
                vectors: eig.eigenvectors,
            }
        })
    }

    pub fn hermiticity_residual(&self) -> f64 {
        max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            space: self.space.clone(),
            matrix: &self.matrix * Complex64::new(factor, 0.0),
            spectral: OnceLock::new(),
        }
    }
}

/// Collective spin component S_x, S_y or S_z built from the ladder coefficients.
pub fn collective_operator(space: &SpinSpace, axis: Axis) -> HermitianOperator {
    HermitianOperator {
        space: space.clone(),
        matrix: collective_matrix(space, axis),
        spectral: OnceLock::new(),
    }
}

/// Operator along an arbitrary (not necessarily normalized) direction, n·S.
pub fn directional_operator(space: &SpinSpace, direction: [f64; 3]) -> HermitianOperator {
    let sx = collective_matrix(space, Axis::X);
    let sy = collective_matrix(space, Axis::Y);
    let sz = collective_matrix(space, Axis::Z);
    let c = |x: f64| Complex64::new(x, 0.0);
    let matrix = sx * c(direction[0]) + sy * c(direction[1]) + sz * c(direction[2]);
    HermitianOperator {
        space: space.clone(),
        matrix,
        spectral: OnceLock::new(),
    }
}

pub(crate) fn collective_matrix(space: &SpinSpace, axis: Axis) -> DMatrix<Complex64> {
    let dim = space.dim();
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    match axis {
        Axis::Z => {
            for k in 0..dim {
                m[(k, k)] = Complex64::new(space.m(k), 0.0);
            }
        }
        Axis::X | Axis::Y => {
            // Row k-1 holds m+1 for column k, so S+ sits on the superdiagonal.
            for k in 1..dim {
                let c = space.raising_coefficient(k);
                let (up, down) = match axis {
                    Axis::X => (Complex64::new(c / 2.0, 0.0), Complex64::new(c / 2.0, 0.0)),
                    _ => (Complex64::new(0.0, -c / 2.0), Complex64::new(0.0, c / 2.0)),
                };
                m[(k - 1, k)] = up;
                m[(k, k - 1)] = down;
            }
        }
    }
    m
}

/// Two-axis counter-twisting Hamiltonian chi (S_y S_z + S_z S_y).
///
/// Tridiagonal: the m -> m+1 coupling is chi (2m+1) <m+1|S_y|m>.
pub fn tact_hamiltonian(space: &SpinSpace, chi: f64) -> HermitianOperator {
    let dim = space.dim();
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    if chi != 0.0 {
        for k in 1..dim {
            let mk = space.m(k);
            let sy_up = Complex64::new(0.0, -space.raising_coefficient(k) / 2.0);
            let coupling = sy_up * (chi * (2.0 * mk + 1.0));
            m[(k - 1, k)] = coupling;
            m[(k, k - 1)] = coupling.conj();
        }
    }
    HermitianOperator {
        space: space.clone(),
        matrix: m,
        spectral: OnceLock::new(),
    }
}

pub(crate) fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
