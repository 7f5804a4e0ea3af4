//! Circuit obfuscation with decoy pulses and a simulated trusted backend.
//!
//! The client compiles a circuit into a slotted form sprinkled with decoy
//! gates, records which gates are decoys in an input bitmap, and seals the
//! bitmap for the backend controller. The controller attenuates decoy pulses
//! through RF switches so the hardware runs the original circuit while the
//! provider sees only the obfuscated one. With randomize-output, a masked
//! final layer hides measurement results until the client undoes the mask.

pub mod analysis;
pub mod backend_sim;
pub mod bitmap;
pub mod circuit;
pub mod envelope;
pub mod error;
pub mod obfuscator;
pub mod pipeline;
pub mod recover;

pub use error::{Error, ValidationError};
