//! Real-world driving data to scenario-based safety testing.
//!
//! The pipeline: ingest object-list [`recording`]s, tag traffic events and ODD
//! attributes against a [`map`] ([`tagger`]), index the resulting metadata and
//! search it with a small query language ([`index`]), export matched segments
//! as OpenSCENARIO digital twins ([`real2sim`]), fit parameter distributions
//! and generate logical scenarios and variations with coverage accounting
//! ([`scevar`]), and score interactions by time-to-collision ([`sceann`]).

pub mod geom;
pub mod index;
pub mod map;
pub mod par;
pub mod real2sim;
pub mod recording;
pub mod sceann;
pub mod scevar;
pub mod synth;
pub mod tagger;
pub mod units;
pub mod xml;

pub use map::{load_map, MapModel};
pub use par::Execution;
pub use recording::{ingest_batch, parse_recording, ActorClass, ActorState, Frame, Recording};
