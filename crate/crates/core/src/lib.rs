//! Geodesic flows, return maps and marked length spectra of rotationally
//! symmetric metrics dσ² + r(σ)²dθ² on the two-sphere.
//!
//! The return data of such a metric is computed twice: by integrating the
//! geodesic flow ([`flow`]) and by Abel-transform closed forms ([`abel`]).
//! [`spectral`] turns it into a generating function and length spectrum,
//! [`rearrange`] builds isospectral families, and [`tangent`] contains the
//! tangent-line/Legendre machinery used to recover a function from its
//! tangents.

pub mod abel;
pub mod error;
pub mod flow;
pub mod numeric;
pub mod profile;
pub mod rearrange;
pub mod scenarios;
pub mod spectral;
pub mod tangent;

pub use error::{Result, RevspecError};
pub use numeric::par::Execution;
pub use profile::{builtins, Branch, ProfileFunction, ProfileKind, ProfileValue};
