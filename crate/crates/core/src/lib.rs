//! Simulation of procrustean entanglement concentration of a two-mode squeezed
//! vacuum with Quantum Non-Demolition (QND) couplings.
//!
//! The pipeline stays in phase space for as long as possible:
//!
//! 1. [`phase_space`]: Gaussian states as covariance matrices, symplectic maps
//!    (QND, phase shift, squeezer, beamsplitter) and the pure-loss channel.
//! 2. [`branch`]: conditional non-Gaussian states written as signed mixtures of
//!    Gaussian branches (on/off detection, photon-subtracted ancillas,
//!    homodyne reduction).
//! 3. [`hermite`]: four-variable Hermite polynomials at the origin, by
//!    recursion, plus a slow jet-based reference implementation.
//! 4. [`fock`]: truncated two-mode density matrices generated from the Q
//!    function of each branch.
//! 5. [`entanglement`]: partial transpose, negativity and log-negativity.
//! 6. [`protocols`]: the end-to-end protocols and parameter sweeps.
//!
//! Conventions: quadratures are ordered `(x1, p1, ..., xN, pN)` with
//! `[x, p] = i`, and the vacuum covariance matrix is the identity.

pub mod branch;
pub mod entanglement;
pub mod error;
pub mod fock;
pub mod hermite;
pub mod phase_space;
pub mod protocols;

pub use error::{Error, Result};
