//! Spin Hamiltonian construction, diagonalization and transition enumeration.

mod eigen;
mod hamiltonian;
mod system;
mod tensor;
mod transitions;

pub use eigen::{eigensolve, EnergyLevels, HERMITIAN_TOLERANCE};
pub use hamiltonian::{build_hamiltonian, hermitian_defect};
pub use system::{
    kron, product_operators, spin_operators, CMatrix, Complex, Ensemble, HalfInteger, SpinSystem,
    ABUNDANCE_TOLERANCE,
};
pub use tensor::{
    effective_g, euler_rotation, rot_x, rot_y, rot_z, rotate_tensor, rotate_tensor_by, unit,
    FieldPoint, InteractionTensor, OrientationCorrection, UNIT_TOLERANCE,
};
pub use transitions::{
    allowed_transitions, boltzmann_populations, drive_operator, TransitionLine, TransitionOptions,
    DEFAULT_LINE_CUTOFF,
};
