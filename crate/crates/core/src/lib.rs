//! Location-privacy toolkit for mmWave MISO-OFDM links: a transmitter applies
//! a delay and angle shift through its precoder so that an eavesdropper
//! localizes a fake position while a receiver holding the shift does not.

pub mod error;
pub mod fisher;
pub mod harness;
pub mod design;
pub mod mcrb;
pub mod model;
pub mod robustness;
pub mod scene;
pub mod waveform;

pub use error::{DaisError, Result};
pub use model::LinkModel;
pub use scene::{Complex64, LocationVector, PathParams, Position2D, Scene, ShiftPair};
