//! Contraction certificates for the fixed-point maps.

pub mod block;
pub mod certify;
pub mod engine;
pub mod kernel;
pub mod norms;

pub use block::{verify_block_invertible, Block, BlockOperator, BallMatrix, Coord, Invertibility};
pub use certify::{contr_fix, dquasi_newton_mode, periodic_sweep, quasi_newton, Certificate, ContrOptions, Lemma, Verdict};
pub use engine::{BlockReport, FreqSetReport};
pub use kernel::FatBase;
pub use norms::{op_norm_bound, ModeImage, TailSpec, DEFAULT_Q};
