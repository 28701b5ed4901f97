//! CDT, Radon and R-CDT transforms and the transport distances they embed.

pub mod cdt;
pub mod radon;
pub mod rcdt;

pub use cdt::{cdt_forward, cdt_inverse, w2_distance, CdtFunction};
pub use radon::{radon_forward, radon_inverse, radon_project, Sinogram};
pub use rcdt::{
    rcdt_forward, rcdt_inverse, rcdt_inverse_sinogram, sw2_distance, sw2_squared_from_fields,
    translation_spanning_vectors, RcdtField, Transformer,
};
