//! Image acquisition and capture-quality feedback.

mod decode;
mod framing;
mod source;

use thiserror::Error;

pub use decode::{encode_pnm, load_image, load_image_path};
pub use framing::{
    center_offset, framing_check, judge, laplacian_variance, size_ratio, FramingFailure,
    FramingPolicy, FramingReport,
};
pub use source::{Frame, FrameSource};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("empty image payload")]
    Empty,
    #[error("unrecognised image format (expected binary PGM/PPM or PNG)")]
    UnknownFormat,
    #[error("unsupported image: {0}")]
    Unsupported(String),
    #[error("malformed image: {0}")]
    Malformed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
