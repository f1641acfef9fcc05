use nalgebra::{DMatrix, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lineshape::{linewidth_at, lorentzian, LinewidthModel};
use crate::error::{Error, Result};
use crate::spin::{
    allowed_transitions, unit, Ensemble, FieldPoint, TransitionLine, TransitionOptions,
};

/// Absorption over a field × frequency grid. A single sweep has one field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    pub frequency_axis: Vec<f64>,
    pub field_axis: Vec<f64>,
    /// `field_axis.len()` rows × `frequency_axis.len()` columns.
    pub amplitude: DMatrix<f64>,
}

impl SpectrumGrid {
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.amplitude.row(i).iter().copied().collect()
    }

    /// Multiplies all amplitudes so that the global maximum equals `peak`.
    pub fn scale_to_peak(&mut self, peak: f64) {
        let max = self.amplitude.max();
        if max > 0.0 {
            self.amplitude *= peak / max;
        }
    }

    /// Frequencies of local maxima in row `i` that rise above `threshold`
    /// times the row maximum.
    pub fn local_maxima(&self, i: usize, threshold: f64) -> Vec<f64> {
        let row = self.row(i);
        let max = row.iter().copied().fold(0.0, f64::max);
        (1..row.len().saturating_sub(1))
            .filter(|&k| row[k] > row[k - 1] && row[k] >= row[k + 1] && row[k] > threshold * max)
            .map(|k| self.frequency_axis[k])
            .collect()
    }
}

fn check_ascending(axis: &[f64], what: &str) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::input(format!("{what} axis is empty")));
    }
    if axis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::input(format!(
            "{what} axis must be strictly ascending"
        )));
    }
    Ok(())
}

fn absorption_row(lines: &[TransitionLine], width: f64, grid: &[f64]) -> Vec<f64> {
    let mut row = vec![0.0; grid.len()];
    for line in lines {
        let s = line.strength();
        if s == 0.0 {
            continue;
        }
        for (v, &f) in row.iter_mut().zip(grid) {
            *v += lorentzian(f - line.frequency, width, s);
        }
    }
    row
}

/// Sums one Lorentzian per line, each of width `linewidth_at(b)` and
/// amplitude `matrix_element_sq × population_weight × abundance`.
pub fn synthesize_absorption(
    lines: &[TransitionLine],
    model: &LinewidthModel,
    b: f64,
    grid: &[f64],
) -> Result<SpectrumGrid> {
    check_ascending(grid, "frequency")?;
    let width = linewidth_at(model, b)?;
    let row = absorption_row(lines, width, grid);
    Ok(SpectrumGrid {
        frequency_axis: grid.to_vec(),
        field_axis: vec![b],
        amplitude: DMatrix::from_row_slice(1, grid.len(), &row),
    })
}

/// Geometry and thermal state of a spectroscopy run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrometerSetup {
    pub field_direction: Vector3<f64>,
    pub drive_direction: Vector3<f64>,
    /// K
    pub spin_temperature: f64,
    pub line_cutoff: f64,
}

impl Default for SpectrometerSetup {
    /// Field in the D2-b plane at 45° to b; drive along D1, normal to the
    /// chip and perpendicular to the propagation axis.
    fn default() -> Self {
        Self {
            field_direction: unit([0.0, 1.0, 1.0]).expect("non-zero"),
            drive_direction: Vector3::x(),
            spin_temperature: 0.0819,
            line_cutoff: crate::spin::DEFAULT_LINE_CUTOFF,
        }
    }
}

/// All transitions of every (corrected) ensemble member at field `b`.
pub fn ensemble_lines(
    ensemble: &Ensemble,
    setup: &SpectrometerSetup,
    b: f64,
) -> Result<Vec<TransitionLine>> {
    let field = FieldPoint::new(b, setup.field_direction)?;
    let opts = TransitionOptions {
        cutoff: setup.line_cutoff,
    };
    let mut out = vec![];
    for sys in ensemble.corrected_members() {
        out.extend(allowed_transitions(
            &sys,
            &field,
            setup.spin_temperature,
            &setup.drive_direction,
            opts,
        )?);
    }
    Ok(out)
}

/// Absorption map: one independent [`synthesize_absorption`] row per field.
pub fn synthesize_field_map(
    ensemble: &Ensemble,
    model: &LinewidthModel,
    setup: &SpectrometerSetup,
    fields: &[f64],
    grid: &[f64],
) -> Result<SpectrumGrid> {
    check_ascending(fields, "field")?;
    check_ascending(grid, "frequency")?;
    let rows: Vec<Vec<f64>> = fields
        .par_iter()
        .map(|&b| {
            let lines = ensemble_lines(ensemble, setup, b)?;
            Ok(absorption_row(&lines, linewidth_at(model, b)?, grid))
        })
        .collect::<Result<_>>()?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(SpectrumGrid {
        frequency_axis: grid.to_vec(),
        field_axis: fields.to_vec(),
        amplitude: DMatrix::from_row_slice(fields.len(), grid.len(), &flat),
    })
}
