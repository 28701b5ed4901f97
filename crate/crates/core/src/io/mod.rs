//! File formats: IDX datasets, PGM images, model and field files.

mod bytes;
pub mod field;
pub mod idx;
pub mod model;
pub mod pgm;

pub use field::{read_field, write_field};
pub use idx::{read_idx, read_idx_images, write_idx, IdxValueType};
pub use model::{load_model, model_to_bytes, model_from_bytes, save_model};
pub use pgm::{read_pgm, write_pgm};
