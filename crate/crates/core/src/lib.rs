//! Radon cumulative distribution transform (R-CDT) and nearest-subspace
//! classification of images in R-CDT space.
//!
//! ```
//! use rcdt::transforms::Transformer;
//! use rcdt::{default_projection_grid, make_uniform_reference1d, RawImage, DEFAULT_EPSILON};
//!
//! let blob = |dx: f64| {
//!     RawImage::from_fn(28, 28, move |i, j| {
//!         let (y, x) = (i as f64 - 13.5, j as f64 - 13.5 - dx);
//!         (-(x * x + y * y) / 18.0).exp()
//!     })
//! };
//! let proj = default_projection_grid(28, 28, 64)?;
//! let reference = make_uniform_reference1d(*proj.t_grid());
//! let tf = Transformer::new(proj, &reference, DEFAULT_EPSILON)?;
//! let a = tf.forward_raw(&blob(0.0))?;
//! let b = tf.forward_raw(&blob(2.0))?;
//! assert_eq!(a.values().len(), 64 * tf.proj().n_t());
//! # let _ = b;
//! # Ok::<(), rcdt::Error>(())
//! ```

pub mod bench;
pub mod data;
pub mod error;
pub mod io;
pub mod subspace;
pub mod transforms;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
