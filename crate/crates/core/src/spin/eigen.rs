use std::cmp::Ordering;

use nalgebra::SymmetricEigen;

use super::hamiltonian::hermitian_defect;
use super::system::{CMatrix, Complex};
use crate::error::{Error, Result};

/// Relative asymmetry above which a matrix is rejected as non-Hermitian.
pub const HERMITIAN_TOLERANCE: f64 = 1e-9;

/// Ascending energies with their eigenvectors as columns of `states`.
#[derive(Debug, Clone)]
pub struct EnergyLevels {
    pub energies: Vec<f64>,
    pub states: CMatrix,
}

impl EnergyLevels {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// `V Λ V†`
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.len();
        let mut lambda = CMatrix::zeros(n, n);
        for (k, e) in self.energies.iter().enumerate() {
            lambda[(k, k)] = Complex::new(*e, 0.0);
        }
        &self.states * lambda * self.states.adjoint()
    }
}

fn dominant_index(col: &[Complex]) -> usize {
    col.iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Diagonalizes a Hermitian matrix.
///
/// Eigenvalues come back ascending. Ties (within a relative 1e-12 of the
/// spectral scale) are ordered by the basis index on which each eigenvector
/// has its largest weight, and each eigenvector's largest component is made
/// real and positive, so the output is deterministic.
pub fn eigensolve(h: &CMatrix) -> Result<EnergyLevels> {
    if !h.is_square() {
        return Err(Error::input("matrix must be square"));
    }
    if h.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::input("matrix entries must be finite"));
    }
    let defect = hermitian_defect(h);
    if defect > HERMITIAN_TOLERANCE {
        return Err(Error::input(format!(
            "matrix is not Hermitian (relative asymmetry {defect:e})"
        )));
    }
    let n = h.nrows();
    if n == 0 {
        return Ok(EnergyLevels {
            energies: vec![],
            states: CMatrix::zeros(0, 0),
        });
    }
    let sym = (h + h.adjoint()).map(|z| z * 0.5);
    let eig = SymmetricEigen::new(sym);

    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tie = 1e-12 * scale.max(f64::MIN_POSITIVE);

    let mut cols: Vec<(f64, Vec<Complex>)> = (0..n)
        .map(|k| {
            let mut v: Vec<Complex> = eig.eigenvectors.column(k).iter().copied().collect();
            let d = dominant_index(&v);
            let phase = v[d].conj() / v[d].norm();
            for z in v.iter_mut() {
                *z *= phase;
            }
            (eig.eigenvalues[k], v)
        })
        .collect();
    cols.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= tie {
            dominant_index(&a.1).cmp(&dominant_index(&b.1))
        } else {
            a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal)
        }
    });

    let energies = cols.iter().map(|c| c.0).collect();
    let states = CMatrix::from_fn(n, n, |r, c| cols[c].1[r]);
    Ok(EnergyLevels { energies, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn real(rows: &[&[f64]]) -> CMatrix {
        CMatrix::from_fn(rows.len(), rows.len(), |r, c| Complex::new(rows[r][c], 0.0))
    }

    #[test]
    fn diagonal_matrix() {
        let h = real(&[&[3.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 2.0]]);
        let lv = eigensolve(&h).unwrap();
        assert_eq!(lv.energies, vec![1.0, 2.0, 3.0]);
        // permutation eigenvectors: e1, e2, e0
        for (col, row) in [(0, 1), (1, 2), (2, 0)] {
            assert!((lv.states[(row, col)] - Complex::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn pauli_x() {
        let h = real(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let lv = eigensolve(&h).unwrap();
        assert!((lv.energies[0] + 1.0).abs() < 1e-14);
        assert!((lv.energies[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_hermitian_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let n = 16;
        let a = CMatrix::from_fn(n, n, |_, _| {
            Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let h = (&a + a.adjoint()).map(|z| z * 0.5);
        let lv = eigensolve(&h).unwrap();
        let resid = (lv.reconstruct() - &h).norm() / h.norm();
        assert!(resid <= 1e-10, "residual {resid}");
        let unitarity = (lv.states.adjoint() * &lv.states - CMatrix::identity(n, n)).norm();
        assert!(unitarity < 1e-10);
        assert!(lv.energies.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_non_hermitian() {
        let h = real(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(eigensolve(&h).is_err());
    }

    #[test]
    fn degenerate_ties_are_deterministic() {
        let h = real(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 0.0]]);
        let lv = eigensolve(&h).unwrap();
        assert_eq!(lv.energies, vec![0.0, 1.0, 1.0]);
        assert!((lv.states[(0, 1)].norm() - 1.0).abs() < 1e-14);
        assert!((lv.states[(1, 2)].norm() - 1.0).abs() < 1e-14);
    }
}
