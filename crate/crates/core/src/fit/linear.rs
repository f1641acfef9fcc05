//! Small weighted linear least-squares helpers used for initial guesses.

use nalgebra::{Matrix2, Vector2};

/// Solves the 2-column weighted normal equations; `None` if singular.
pub fn solve_normal(basis: &[[f64; 2]], y: &[f64], w: Option<&[f64]>) -> Option<[f64; 2]> {
    let mut a = Matrix2::<f64>::zeros();
    let mut b = Vector2::<f64>::zeros();
    for (i, (row, yi)) in basis.iter().zip(y).enumerate() {
        let wi = w.map_or(1.0, |w| w[i]);
        for r in 0..2 {
            b[r] += wi * row[r] * yi;
            for c in 0..2 {
                a[(r, c)] += wi * row[r] * row[c];
            }
        }
    }
    let scale = a[(0, 0)].max(a[(1, 1)]);
    if !(a.determinant().abs() > 1e-14 * scale * scale) {
        return None;
    }
    a.lu().solve(&b).map(|v| [v[0], v[1]])
}

/// Like [`solve_normal`] but both coefficients constrained non-negative.
pub fn solve_nonnegative(basis: &[[f64; 2]], y: &[f64], w: Option<&[f64]>) -> [f64; 2] {
    let sse = |c: [f64; 2]| -> f64 {
        basis
            .iter()
            .zip(y)
            .enumerate()
            .map(|(i, (row, yi))| {
                w.map_or(1.0, |w| w[i]) * (yi - c[0] * row[0] - c[1] * row[1]).powi(2)
            })
            .sum()
    };
    let single = |k: usize| -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (i, (row, yi)) in basis.iter().zip(y).enumerate() {
            let wi = w.map_or(1.0, |w| w[i]);
            num += wi * row[k] * yi;
            den += wi * row[k] * row[k];
        }
        if den > 0.0 {
            (num / den).max(0.0)
        } else {
            0.0
        }
    };
    let mut candidates = vec![[single(0), 0.0], [0.0, single(1)]];
    if let Some(c) = solve_normal(basis, y, w) {
        if c[0] >= 0.0 && c[1] >= 0.0 {
            candidates.push(c);
        }
    }
    candidates
        .into_iter()
        .min_by(|a, b| sse(*a).total_cmp(&sse(*b)))
        .expect("non-empty")
}
