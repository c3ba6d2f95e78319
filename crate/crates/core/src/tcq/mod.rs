//! Trellis coded quantization at the relay.

pub mod bcjr;
pub mod cells;
pub mod codebook;
pub mod model;
pub mod optimize;
pub mod trellis;
pub mod viterbi;

pub use bcjr::{bcjr_soft, BcjrOutput};
pub use codebook::{assign_labels, build_codebook, CodebookParams};
pub use model::{CellSpec, PointTable, QuantizerFamily, QuantizerModel};
pub use optimize::{optimize_boundaries, optimize_distortion, OptimizeSettings, SearchGrid};
pub use trellis::{GeneratorMatrix, Polynomial, Trellis};
pub use viterbi::{viterbi_quantize, viterbi_quantize_with, ViterbiOutput};
