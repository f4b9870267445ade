//! Simulation and verification toolkit for additive functionals of
//! size-conditioned Bienaymé–Galton–Watson trees.
//!
//! The crate is organised bottom-up:
//!
//! * [`offspring`]: critical offspring laws in a stable domain of attraction,
//!   with their normalising sequence `b_n`, stable constant `κ` and span.
//! * [`sampler`]: exact samplers for trees conditioned on their size, and the
//!   `O(n)` annotation of subtree sizes, subtree heights and depths.
//! * [`functionals`]: discrete additive functionals and the rescaled
//!   mass/height measures evaluated on annotated trees.
//! * [`theory`]: closed-form limit values (special functions, moments of the
//!   continuum functionals, phase predicates).
//! * [`continuum`]: Brownian excursions and the level-sweep evaluation of the
//!   continuum mass/height functional.
//! * [`harness`]: reproducible, parallel Monte Carlo experiments and reports.

pub mod continuum;
pub mod functionals;
pub mod harness;
pub mod offspring;
pub mod rng;
pub mod sampler;
pub mod selftest;
pub mod stats;
pub mod theory;

pub use continuum::{Excursion, LevelComponent};
pub use functionals::{FunctionalValue, TollFunction};
pub use harness::{ExperimentConfig, McReport, McRow, Mode};
pub use offspring::{Family, OffspringModel};
pub use sampler::AnnotatedTree;
pub use theory::{Finiteness, MomentSpec, PhaseVerdict, Regime};
