use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::eigen::{eigensolve, EnergyLevels};
use super::hamiltonian::build_hamiltonian;
use super::system::{product_operators, CMatrix, Complex, SpinSystem};
use super::tensor::{check_unit, FieldPoint};
use crate::constants::{BOLTZMANN, PLANCK};
use crate::error::{Error, Result};

/// Default relative intensity below which a transition is discarded.
pub const DEFAULT_LINE_CUTOFF: f64 = 1e-6;

/// One allowed microwave transition between two eigenlevels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionLine {
    /// Hz, `(E_upper - E_lower)/h`.
    pub frequency: f64,
    /// `|⟨upper| d·g·S |lower⟩|²`, dimensionless.
    pub matrix_element_sq: f64,
    /// `p_lower - p_upper`.
    pub population_weight: f64,
    pub lower_index: usize,
    pub upper_index: usize,
    pub site_label: String,
    pub isotope_label: String,
    /// Fractional abundance of the emitting species.
    pub abundance: f64,
}

impl TransitionLine {
    /// Integrated absorption strength used for lineshape synthesis.
    pub fn strength(&self) -> f64 {
        self.matrix_element_sq * self.population_weight * self.abundance
    }
}

/// Boltzmann level populations at spin temperature `ts` (kelvin).
pub fn boltzmann_populations(levels: &EnergyLevels, ts: f64) -> Result<Vec<f64>> {
    if !(ts > 0.0 && ts.is_finite()) {
        return Err(Error::input(format!(
            "spin temperature must be positive, got {ts}"
        )));
    }
    populations_from_energies(&levels.energies, ts)
}

pub(crate) fn populations_from_energies(energies: &[f64], ts: f64) -> Result<Vec<f64>> {
    if energies.is_empty() {
        return Ok(vec![]);
    }
    let beta = 1.0 / (BOLTZMANN * ts);
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = energies
        .iter()
        .map(|e| (-(e - e_min) * beta).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / z).collect())
}

/// Options for [`allowed_transitions`].
#[derive(Debug, Clone, Copy)]
pub struct TransitionOptions {
    /// Relative cutoff on `matrix_element_sq`, as a fraction of the strongest line.
    pub cutoff: f64,
}

impl Default for TransitionOptions {
    fn default() -> Self {
        Self {
            cutoff: DEFAULT_LINE_CUTOFF,
        }
    }
}

/// The operator `d·g·S` coupling the microwave drive to the electron spin.
pub fn drive_operator(sys: &SpinSystem, drive_direction: &Vector3<f64>) -> CMatrix {
    let (s_ops, _) = product_operators(sys.electron_spin, sys.nuclear_spin);
    let dg = drive_direction.transpose() * sys.g.crystal_matrix();
    let dim = sys.dimension();
    let mut op = CMatrix::zeros(dim, dim);
    for (j, s) in s_ops.iter().enumerate() {
        if dg[j] != 0.0 {
            op += s.map(|z| z * dg[j]);
        }
    }
    op
}

/// Enumerates transitions between all level pairs with their intensities
/// and thermal population weights.
pub fn allowed_transitions(
    sys: &SpinSystem,
    field: &FieldPoint,
    ts: f64,
    drive_direction: &Vector3<f64>,
    opts: TransitionOptions,
) -> Result<Vec<TransitionLine>> {
    check_unit(drive_direction, "drive direction")?;
    let h = build_hamiltonian(sys, field)?;
    let levels = eigensolve(&h)?;
    let pops = boltzmann_populations(&levels, ts)?;
    let op = drive_operator(sys, drive_direction);
    // ⟨j| op |i⟩ for all pairs at once
    let coupling = levels.states.adjoint() * op * &levels.states;

    let n = levels.len();
    let mut raw = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let frequency = (levels.energies[j] - levels.energies[i]) / PLANCK;
            if frequency <= 0.0 {
                continue;
            }
            let m: Complex = coupling[(j, i)];
            raw.push((i, j, frequency, m.norm_sqr()));
        }
    }
    let max = raw.iter().map(|r| r.3).fold(0.0, f64::max);
    let threshold = opts.cutoff * max;
    Ok(raw
        .into_iter()
        .filter(|r| max > 0.0 && r.3 >= threshold)
        .map(|(i, j, frequency, msq)| TransitionLine {
            frequency,
            matrix_element_sq: msq,
            population_weight: pops[i] - pops[j],
            lower_index: i,
            upper_index: j,
            site_label: sys.site_label.clone(),
            isotope_label: sys.isotope_label.clone(),
            abundance: sys.abundance,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::BOHR_MAGNETON_HZ_PER_T;
    use crate::spin::tensor::unit;

    fn two_levels(split_j: f64) -> EnergyLevels {
        EnergyLevels {
            energies: vec![0.0, split_j],
            states: CMatrix::identity(2, 2),
        }
    }

    #[test]
    fn infinite_temperature_is_uniform() {
        let lv = EnergyLevels {
            // MHz-scale splittings; GHz-scale ones deviate from 1/N by ~1e-8 at 1e6 K
            energies: vec![0.0, PLANCK * 1e6, PLANCK * 2e6, PLANCK * 3e6],
            states: CMatrix::identity(4, 4),
        };
        let p = boltzmann_populations(&lv, 1e6).unwrap();
        for v in p {
            assert!((v - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn unit_reduced_splitting() {
        let ts = 0.05;
        let p = boltzmann_populations(&two_levels(BOLTZMANN * ts), ts).unwrap();
        assert!((p[0] - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert!((p[0] - 0.731059).abs() < 1e-6);
    }

    #[test]
    fn s1b_line_at_spectroscopy_temperature() {
        let p = boltzmann_populations(&two_levels(PLANCK * 3.651e9), 0.0819).unwrap();
        // x = h f / k T = 2.13944...
        let x: f64 = PLANCK * 3.651e9 / (BOLTZMANN * 0.0819);
        assert!((p[0] - 1.0 / (1.0 + (-x).exp())).abs() < 1e-15);
        assert!((p[0] - 0.8946).abs() < 1e-4);
    }

    #[test]
    fn non_positive_temperature_is_rejected() {
        assert!(boltzmann_populations(&two_levels(1e-24), 0.0).is_err());
        assert!(boltzmann_populations(&two_levels(1e-24), -1.0).is_err());
    }

    #[test]
    fn huge_splittings_do_not_overflow() {
        let p = boltzmann_populations(&two_levels(1e-18), 1e-3).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn single_line_for_zero_nuclear_spin() {
        let sys = SpinSystem::effective_g(1.41, "S1b", 1.0);
        let field = FieldPoint::new(0.185, unit([0.0, 1.0, 1.0]).unwrap()).unwrap();
        let drive = Vector3::x();
        let lines =
            allowed_transitions(&sys, &field, 0.07, &drive, TransitionOptions::default()).unwrap();
        assert_eq!(lines.len(), 1);
        let expect = 1.41 * BOHR_MAGNETON_HZ_PER_T * 0.185;
        assert!((lines[0].frequency - expect).abs() / expect < 1e-12);
        assert!((lines[0].frequency - 3.651e9).abs() < 1e6);
        assert!(lines[0].population_weight > 0.0);
    }

    #[test]
    fn drive_parallel_to_isotropic_field_has_no_lines() {
        let sys = SpinSystem::effective_g(2.0, "iso", 1.0);
        let field = FieldPoint::new(0.1, Vector3::z()).unwrap();
        let lines = allowed_transitions(
            &sys,
            &field,
            0.07,
            &Vector3::z(),
            TransitionOptions::default(),
        )
        .unwrap();
        assert!(lines.is_empty());
    }
}
