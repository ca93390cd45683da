//! Finite graph covers, inverse sequences of twinned graph homomorphisms,
//! and exact encodings of compact dynamical systems at finite depth.
//!
//! The library is split along the pipeline:
//!
//! * [`graph_core`] — finite graphs, homomorphisms, relations and the
//!   cover axioms (+directionality, edge surjectivity).
//! * [`limit_engine`] — inverse sequences of graphs, threads (finite
//!   cylinder representatives) and the levelwise edge relation.
//! * [`twinned_engine`] — the DS0–DS3b axioms, the quotient classes, the
//!   induced map `T` and the neighbourhood machinery used in the
//!   continuity argument.
//! * [`systems`] — exact rational backends (finite metric systems,
//!   piecewise linear interval maps, subshifts) with open-set algebra.
//! * [`encoder`] — builds cover sequences satisfying C1–C5, the twinned
//!   graphs on top of them, and the decoding map back into the space.

pub mod encoder;
pub mod graph_core;
pub mod limit_engine;
pub mod systems;
pub mod twinned_engine;

pub use graph_core::{Graph, GraphHom, GraphKind, Relation};
pub use limit_engine::{GraphSequence, SequenceKind, Thread};
pub use twinned_engine::{ClassAtDepth, TwinnedSequence};
