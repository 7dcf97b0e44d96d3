//! Caching with per-agent reserves and public-private caching.
//!
//! The crate covers both cache models, an offline 2-approximation with a
//! potential-function auditor, exact small-instance optima, the online
//! primal-dual fractional algorithm, its rounding to integral caches, the
//! strategy transformations between the two models, and a 3-SAT reduction
//! instance generator.

pub mod equivalence;
pub mod fractional;
pub mod gen;
pub mod hardness;
pub mod model;
pub mod offline;
pub mod oracle;
pub mod policies;
pub mod rounding;
pub mod state;
pub mod trace_io;
pub mod verify;

pub use model::{
    AgentId, Instance, Page, RequestTrace, ReserveConfig, ValidationReport, Violation,
};
pub use state::{
    CostLedger, Eviction, ModelError, PpStep, PublicPrivateCacheState, ReservesCacheState, Slot,
};
