use super::system::{product_operators, CMatrix, Complex, SpinSystem};
use super::tensor::FieldPoint;
use crate::constants::{BOHR_MAGNETON, PLANCK};
use crate::error::Result;

/// Builds `H = μ_B B·g·S + h S·A·I + h I·Q·I` (joules) on the product basis
/// |m_S⟩⊗|m_I⟩ with both projections ascending.
pub fn build_hamiltonian(sys: &SpinSystem, field: &FieldPoint) -> Result<CMatrix> {
    sys.validate()?;
    let (s_ops, i_ops) = product_operators(sys.electron_spin, sys.nuclear_spin);
    let dim = sys.dimension();
    let mut h = CMatrix::zeros(dim, dim);

    let g = sys.g.crystal_matrix();
    let b = field.vector();
    // Zeeman: μ_B Σ_ij B_i g_ij S_j
    let bg = b.transpose() * g;
    for (j, op) in s_ops.iter().enumerate() {
        let c = BOHR_MAGNETON * bg[j];
        if c != 0.0 {
            h += op.map(|z| z * c);
        }
    }

    if sys.nuclear_spin.0 > 0 {
        // validate() guarantees both tensors are present here
        let a = sys
            .a
            .as_ref()
            .map(|t| t.crystal_matrix())
            .unwrap_or_default();
        let q = sys
            .q
            .as_ref()
            .map(|t| t.crystal_matrix())
            .unwrap_or_default();
        for i in 0..3 {
            for j in 0..3 {
                if a[(i, j)] != 0.0 {
                    let c = Complex::new(PLANCK * a[(i, j)], 0.0);
                    h += (&s_ops[i] * &i_ops[j]) * c;
                }
                if q[(i, j)] != 0.0 {
                    let c = Complex::new(PLANCK * q[(i, j)], 0.0);
                    h += (&i_ops[i] * &i_ops[j]) * c;
                }
            }
        }
        // I·Q·I with an asymmetric Q is not Hermitian term by term; symmetrize.
        h = (&h + h.adjoint()).map(|z| z * 0.5);
    }
    Ok(h)
}

/// Largest absolute deviation from Hermiticity relative to the largest entry.
pub fn hermitian_defect(h: &CMatrix) -> f64 {
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let diff = h - h.adjoint();
    diff.iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::BOHR_MAGNETON_HZ_PER_T;
    use crate::spin::eigen::eigensolve;
    use crate::spin::system::HalfInteger;
    use crate::spin::tensor::{unit, InteractionTensor};
    use nalgebra::Vector3;

    #[test]
    fn zeeman_splitting_matches_analytic_value() {
        let sys = SpinSystem::effective_g(2.0, "test", 1.0);
        let field = FieldPoint::new(0.1, Vector3::z()).unwrap();
        let h = build_hamiltonian(&sys, &field).unwrap();
        let levels = eigensolve(&h).unwrap();
        let split = (levels.energies[1] - levels.energies[0]) / PLANCK;
        assert!((split - 2.799249e9).abs() < 1e3);
        assert!((split - 2.0 * BOHR_MAGNETON_HZ_PER_T * 0.1).abs() < 1e-3);
    }

    #[test]
    fn zero_field_without_nucleus_is_zero() {
        let sys = SpinSystem::effective_g(2.0, "test", 1.0);
        let field = FieldPoint::new(0.0, Vector3::x()).unwrap();
        let h = build_hamiltonian(&sys, &field).unwrap();
        assert!(h.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn missing_hyperfine_is_a_configuration_error() {
        let mut sys = SpinSystem::effective_g(2.0, "test", 1.0);
        sys.nuclear_spin = HalfInteger(7);
        let field = FieldPoint::new(0.1, Vector3::z()).unwrap();
        let err = build_hamiltonian(&sys, &field).unwrap_err();
        assert!(matches!(err, crate::Error::Config { .. }));
    }

    #[test]
    fn anisotropic_hamiltonian_is_hermitian() {
        let sys = SpinSystem {
            electron_spin: HalfInteger::HALF,
            nuclear_spin: HalfInteger(7),
            g: InteractionTensor::from_principal([3.07, 8.16, 5.79], [10.0, 40.0, -20.0]).unwrap(),
            a: Some(
                InteractionTensor::from_principal([-200e6, 600e6, 400e6], [5.0, 30.0, 0.0])
                    .unwrap(),
            ),
            q: Some(
                InteractionTensor::from_principal([10e6, -4e6, -6e6], [0.0, 12.0, 70.0]).unwrap(),
            ),
            site_label: "S1".into(),
            isotope_label: "167Er".into(),
            abundance: 1.0,
        };
        let field = FieldPoint::new(0.185, unit([0.0, 1.0, 1.0]).unwrap()).unwrap();
        let h = build_hamiltonian(&sys, &field).unwrap();
        assert!(hermitian_defect(&h) < 1e-12);
    }
}
