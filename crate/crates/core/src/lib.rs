//! Conformal Killing fields on R³, magnetic fields parallel to them, and
//! numerical probes of zero modes of the Weyl–Dirac operator
//! `D = σ·(−i∇ − A)`.

pub mod autodiff;
pub mod ckf;
pub mod error;
pub mod fields;
pub mod flows;
pub mod grid;
pub mod holonomy;
pub mod identities;
pub mod pauli;
pub mod quadrature;
pub mod spin;
pub mod vec3;

pub use ckf::{classify, CanonicalForm, CanonicalKind, CkfParams, FieldFrame};
pub use error::{Error, Result};
