use std::fmt;

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use super::tensor::{rotate_tensor_by, InteractionTensor, OrientationCorrection};
use crate::error::{Error, Result};

pub type Complex = nalgebra::Complex<f64>;
pub type CMatrix = DMatrix<Complex>;

/// A spin quantum number stored as twice its value, so 7/2 is `HalfInteger(7)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HalfInteger(pub u32);

impl HalfInteger {
    pub const ZERO: Self = HalfInteger(0);
    pub const HALF: Self = HalfInteger(1);

    pub fn from_f64(v: f64) -> Result<Self> {
        let doubled = 2.0 * v;
        if !(v >= 0.0 && (doubled - doubled.round()).abs() < 1e-12) {
            return Err(Error::input(format!(
                "spin quantum number must be a non-negative multiple of 1/2, got {v}"
            )));
        }
        Ok(HalfInteger(doubled.round() as u32))
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    /// Multiplicity 2s+1.
    pub fn multiplicity(self) -> usize {
        self.0 as usize + 1
    }

    /// Projections m in ascending order, -s..=s.
    pub fn projections(self) -> impl Iterator<Item = f64> {
        let s = self.value();
        (0..self.multiplicity()).map(move |k| -s + k as f64)
    }
}

impl fmt::Display for HalfInteger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_multiple_of(2) {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Cartesian spin operators (Sx, Sy, Sz) for spin `s` in the |m⟩ basis,
/// m ascending.
pub fn spin_operators(s: HalfInteger) -> [CMatrix; 3] {
    let n = s.multiplicity();
    let sv = s.value();
    let mut plus = CMatrix::zeros(n, n);
    let mut sz = CMatrix::zeros(n, n);
    for (k, m) in s.projections().enumerate() {
        sz[(k, k)] = Complex::new(m, 0.0);
        if k + 1 < n {
            // S+|m> = sqrt(s(s+1) - m(m+1)) |m+1>
            plus[(k + 1, k)] = Complex::new((sv * (sv + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
    }
    let minus = plus.adjoint();
    let sx = (&plus + &minus).map(|z| z * 0.5);
    let sy = (&plus - &minus).map(|z| z * Complex::new(0.0, -0.5));
    [sx, sy, sz]
}

/// Kronecker product.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Electron spin operators lifted to the |m_S⟩⊗|m_I⟩ product space, followed
/// by nuclear spin operators lifted the same way.
pub fn product_operators(s: HalfInteger, i: HalfInteger) -> ([CMatrix; 3], [CMatrix; 3]) {
    let id_s = CMatrix::identity(s.multiplicity(), s.multiplicity());
    let id_i = CMatrix::identity(i.multiplicity(), i.multiplicity());
    let e = spin_operators(s).map(|op| kron(&op, &id_i));
    let n = spin_operators(i).map(|op| kron(&id_s, &op));
    (e, n)
}

/// One magnetically distinct species in the ensemble: a site/isotope pair
/// with its coupling tensors and fractional abundance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSystem {
    pub electron_spin: HalfInteger,
    pub nuclear_spin: HalfInteger,
    pub g: InteractionTensor,
    /// Hyperfine tensor in Hz; required when the nuclear spin is non-zero.
    pub a: Option<InteractionTensor>,
    /// Quadrupole tensor in Hz; required when the nuclear spin is non-zero.
    pub q: Option<InteractionTensor>,
    pub site_label: String,
    pub isotope_label: String,
    pub abundance: f64,
}

impl SpinSystem {
    /// Zero-nuclear-spin, S=1/2 system with an isotropic g-factor.
    pub fn effective_g(g: f64, site_label: impl Into<String>, abundance: f64) -> Self {
        SpinSystem {
            electron_spin: HalfInteger::HALF,
            nuclear_spin: HalfInteger::ZERO,
            g: InteractionTensor::isotropic(g),
            a: None,
            q: None,
            site_label: site_label.into(),
            isotope_label: "I=0".into(),
            abundance,
        }
    }

    pub fn dimension(&self) -> usize {
        self.electron_spin.multiplicity() * self.nuclear_spin.multiplicity()
    }

    pub fn validate(&self) -> Result<()> {
        if self.electron_spin != HalfInteger::HALF {
            return Err(Error::config(
                format!("{}.electron_spin", self.site_label),
                format!(
                    "only the S=1/2 ground doublet is modelled, got S={}",
                    self.electron_spin
                ),
            ));
        }
        if self.nuclear_spin.0 > 0 && (self.a.is_none() || self.q.is_none()) {
            return Err(Error::config(
                format!("{}.hyperfine", self.site_label),
                format!(
                    "nuclear spin I={} requires both A and Q tensors",
                    self.nuclear_spin
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.abundance) {
            return Err(Error::config(
                format!("{}.abundance", self.site_label),
                format!("abundance must lie in [0, 1], got {}", self.abundance),
            ));
        }
        Ok(())
    }

    /// Applies a misalignment correction to all tensors of this system.
    pub fn corrected(&self, correction: &OrientationCorrection) -> SpinSystem {
        let r: Matrix3<f64> = correction.rotation();
        SpinSystem {
            g: rotate_tensor_by(&self.g, &r),
            a: self.a.as_ref().map(|t| rotate_tensor_by(t, &r)),
            q: self.q.as_ref().map(|t| rotate_tensor_by(t, &r)),
            ..self.clone()
        }
    }
}

/// A set of spin systems whose abundances sum to one, plus per-site
/// orientation corrections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub members: Vec<SpinSystem>,
    pub corrections: Vec<OrientationCorrection>,
}

pub const ABUNDANCE_TOLERANCE: f64 = 1e-9;

impl Ensemble {
    pub fn new(members: Vec<SpinSystem>, corrections: Vec<OrientationCorrection>) -> Result<Self> {
        let ens = Ensemble {
            members,
            corrections,
        };
        ens.validate()?;
        Ok(ens)
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::config("site", "ensemble has no members"));
        }
        for m in &self.members {
            m.validate()?;
        }
        let total: f64 = self.members.iter().map(|m| m.abundance).sum();
        if (total - 1.0).abs() > ABUNDANCE_TOLERANCE {
            return Err(Error::config(
                "site.abundance",
                format!("abundances must sum to 1, got {total}"),
            ));
        }
        for c in &self.corrections {
            if !self.members.iter().any(|m| m.site_label == c.applies_to) {
                return Err(Error::config(
                    "correction.applies_to",
                    format!("no site labelled `{}`", c.applies_to),
                ));
            }
        }
        Ok(())
    }

    /// Members with their site's orientation corrections applied.
    pub fn corrected_members(&self) -> Vec<SpinSystem> {
        self.members
            .iter()
            .map(|m| {
                self.corrections
                    .iter()
                    .filter(|c| c.applies_to == m.site_label)
                    .fold(m.clone(), |sys, c| sys.corrected(c))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a * b - b * a
    }

    #[test]
    fn spin_algebra_holds() {
        for twice in [1u32, 2, 7] {
            let s = HalfInteger(twice);
            let [sx, sy, sz] = spin_operators(s);
            let i = Complex::new(0.0, 1.0);
            let lhs = commutator(&sx, &sy);
            let rhs = sz.map(|z| z * i);
            assert!((lhs - rhs).norm() < 1e-12);
            let casimir = &sx * &sx + &sy * &sy + &sz * &sz;
            let sv = s.value();
            let expect =
                CMatrix::identity(s.multiplicity(), s.multiplicity()).map(|z| z * sv * (sv + 1.0));
            assert!((casimir - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn half_integer_parsing() {
        assert_eq!(HalfInteger::from_f64(3.5).unwrap(), HalfInteger(7));
        assert!(HalfInteger::from_f64(0.3).is_err());
        assert_eq!(HalfInteger(7).to_string(), "7/2");
        assert_eq!(HalfInteger(2).to_string(), "1");
    }

    #[test]
    fn dimensions() {
        let sys = SpinSystem::effective_g(1.41, "S1b", 1.0);
        assert_eq!(sys.dimension(), 2);
        let mut hf = sys.clone();
        hf.nuclear_spin = HalfInteger(7);
        assert_eq!(hf.dimension(), 16);
        assert!(hf.validate().is_err());
    }

    #[test]
    fn abundances_must_sum_to_one() {
        let a = SpinSystem::effective_g(1.41, "S1b", 0.5);
        let b = SpinSystem::effective_g(1.87, "S2a", 0.4);
        assert!(Ensemble::new(vec![a.clone(), b.clone()], vec![]).is_err());
        let b = SpinSystem {
            abundance: 0.5,
            ..b
        };
        assert!(Ensemble::new(vec![a, b], vec![]).is_ok());
    }

    #[test]
    fn correction_must_reference_known_site() {
        let a = SpinSystem::effective_g(1.41, "S1b", 1.0);
        let c = OrientationCorrection::new(3.0, 0.5, "S9").unwrap();
        assert!(Ensemble::new(vec![a], vec![c]).is_err());
    }
}
