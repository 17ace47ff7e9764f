//! File formats: `NLOSH1` datasets, PNG/raw/CSV image exports.

mod dataset;
mod image_out;

pub use dataset::{decode_nlosh1, encode_nlosh1, read_nlosh1, write_nlosh1, MAGIC};
pub use image_out::{read_raw, write_csv, write_png, write_raw, RawImage, ToneMap};
