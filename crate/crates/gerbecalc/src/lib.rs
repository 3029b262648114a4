//! gerbecalc: cocycle-level verification of twisted Chern-Weil theory and
//! even twisted differential K-theory data on flat tori.
//!
//! The crate builds good grid covers of T^1..T^3, U(1)-gerbes with connection
//! (Deligne 2-cocycles), twisted vector bundles with compatible connections,
//! twisted Chern character and Chern-Simons forms, the K-theory maps I/R/a
//! with certificate-based equivalence checking, and integer Cech cohomology
//! of nerves via Smith normal form. Every identity is checked pointwise at
//! seeded sample points and reported with a maximal residual.

pub mod bundle;
pub mod calculus;
pub mod chern;
pub mod cli;
pub mod cover;
pub mod deligne;
pub mod ktheory;
pub mod nerve;
pub mod residual;
pub mod seeding;
