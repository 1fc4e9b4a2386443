//! Toolkit for Wizard-of-Oz dialogue state tracking data.
//!
//! * [`state`] and [`ontology`]: belief states, their text encoding, deltas
//!   and range values.
//! * [`ingest`]: the canonical corpus format, foreign-schema import and
//!   statistics.
//! * [`align`]: entity spans, sentence splitting, quote stripping and
//!   attention-based span projection.
//! * [`pipeline`]: translation of whole dialogues through an external
//!   translator process, keeping annotations and utterances in agreement.
//! * [`eval`]: running a parser backend turn by turn and scoring it with
//!   joint goal accuracy (JGA) and gold-state JGA (GJGA).
//! * [`lint`]: annotation-error detectors.
//! * [`synth`]: deterministic synthetic corpora and planted-error fixtures.
//!
//! The `wozloc` binary exposes all of it on the command line.

pub mod align;
pub mod cli;
pub mod eval;
pub mod pipeline;
pub mod wire;
pub mod ingest;
pub mod lint;
pub mod ontology;
pub mod state;
pub mod synth;

pub use ontology::Ontology;
pub use state::{BeliefState, SlotId, SlotValue};
