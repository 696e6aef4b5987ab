//! Compiles monophonic MIDI melodies into enriched guitar tablature.
//!
//! The pipeline: parse a Standard MIDI File into a validated note sequence
//! ([`midi`]), compute the globally optimal fingering over a layered state
//! graph ([`solver`]), decorate the result with articulations and
//! expressive techniques driven by per-string statistical targets
//! ([`annotate`]), and serialize everything as MusicXML with a tablature
//! staff ([`musicxml`]). [`stats`] extracts per-string technique ratios
//! from existing scores to feed the annotator, and [`pipeline`] ties the
//! stages together behind a single configuration.

pub mod annotate;
pub mod config;
pub mod fretboard;
pub mod midi;
pub mod musicxml;
pub mod pipeline;
pub mod solver;
pub mod stats;

#[doc(hidden)]
pub mod testing;

pub use config::RunConfig;
pub use fretboard::{InstrumentSpec, Placement};
pub use midi::{NoteEvent, ParsedMelody, QuantizedMelody};
pub use solver::{FingeringConfig, FingeringSolution, FingeringState};
