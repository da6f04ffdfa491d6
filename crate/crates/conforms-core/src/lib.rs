//! Exact symbolic core for conformally invariant operators on differential forms.
//!
//! The crate is organized as a stack:
//!
//! * [`scalar`]: exact multivariate rational functions over the rationals, with an
//!   optional formal conformal factor `t = exp(omega)` and reduction modulo the
//!   null-quadric ideal.
//! * [`ambient`]: exterior calculus of homogeneous forms on the flat metric cone,
//!   the operator algebra of `d`, `delta`, `eps(X)`, `iota(X)` and their brackets,
//!   and the extension/restriction maps between base forms and cone forms.
//! * [`algebra`]: an abstract rewriting engine for words in the eight graded
//!   generators acting on a weighted platform, with coefficients in `Q[n, w, k]`.
//! * [`tractor`]: intrinsic conformal-scale calculus on flat space with a chosen
//!   rescaling, Schouten/Weyl curvature, tractor bundles and their connection,
//!   splitting operators, and differential-operator matrices with formal adjoints
//!   and principal symbols.
//! * [`factory`]: the operator constructions (`K`, `L`, `M`, `Q`, `G` families)
//!   built by descending ambient compositions to the base, their normalization
//!   constants, and the dimensional-continuation route.
//! * [`suites`]: named end-to-end verification suites producing deterministic
//!   reports, shared by the CLI and the acceptance tests.
//!
//! Everything is exact: no floating point anywhere. All randomized checks draw
//! from seeded generators so reports are reproducible byte for byte.

pub mod algebra;
pub mod ambient;
pub mod base;
pub mod factory;
pub mod forms;
pub mod scalar;
pub mod tractor;
