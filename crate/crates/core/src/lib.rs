//! Private streaming over GRS-coded storage.
//!
//! Star-product PIR with block-convolutional queries: the user downloads one
//! convolutionally mixed block per iteration and recovers the desired file
//! stripe by stripe, through block-erasure bursts (windowed decoding) or
//! symbol errors from Byzantine servers (unit-memory trellis decoding).

pub mod channel;
pub mod config;
pub mod decoder;
pub mod field;
pub mod grs;
pub mod linalg;
pub mod par;
pub mod pir;
pub mod rates;
pub mod recovering;
pub mod rng;
pub mod runner;

pub use field::{Fe, Field, FieldError, FieldSpec};
pub use grs::{GrsCode, GrsError};
pub use linalg::Matrix;
pub use par::Exec;
