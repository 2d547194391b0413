//! Simulation and exact analysis of the three-stage quantum key distribution exchange.
//!
//! Alice applies a secret unitary to a qubit register and sends it to Bob, Bob applies
//! his own secret unitary and returns it, Alice undoes hers and forwards it, and Bob
//! undoes his to recover the original state. The exchange only works when the two
//! operators commute up to a global phase, so the crate ships five operator families
//! that satisfy this and checks every algebraic claim they rely on.
//!
//! - [`qcore`]: dense complex linear algebra and measurement for one and two qubits.
//! - [`opsets`]: the operator families and their verification.
//! - [`protocol`]: the four-step exchange and multi-block key sessions.
//! - [`adversary`]: intercept-resend eavesdropping, bit-flip noise, exact enumeration
//!   and Monte Carlo estimates of disturbance and leakage.
//! - [`sift`]: parity checks over random key subsets.

pub mod adversary;
pub mod error;
pub mod opsets;
pub mod protocol;
pub mod qcore;
pub mod rng;
pub mod sift;

pub use error::{Error, Result};
