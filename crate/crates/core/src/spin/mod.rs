//! Collective-spin algebra in the Dicke basis |S = N/2, m>.
//!
//! States are stored in the S_z eigenbasis ordered m = S, S-1, ..., -S.
//! Readout in the S_y basis goes through one cached unitary per space.

mod husimi;
mod operator;
mod space;
mod state;

pub use husimi::{husimi_q, HusimiGrid};
pub use operator::{
    collective_operator, directional_operator, tact_hamiltonian, HermitianOperator, Spectral,
};
pub use space::SpinSpace;
pub use state::{coherent_state, DickeState};
pub(crate) use state::encode_in_place;

/// Largest supported particle number.
pub const MAX_PARTICLES: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}
