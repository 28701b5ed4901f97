//! Binary model files.
//!
//! Layout (little-endian): magic `RCDTNS01`; u32 class count K, offset count
//! m, angle count n, flags (bit 0 translation enrichment, bit 1 uniform
//! reference); f64 variance fraction; n f64 angles; f64 offset grid
//! endpoints; u32 image height and width; f64 pixel spacing; f64 epsilon.
//! Then per class: u32 class id, u32 rank d, m·n·d f64 basis entries
//! (column-major), u32 count and f64 singular values. A CRC32 of all
//! preceding bytes closes the file.

use std::fs;
use std::path::Path;

use super::bytes::{check_magic, verified_body, Reader, Writer};
use crate::error::{Error, Result};
use crate::subspace::{ClassBasis, Model};
use crate::types::{Grid1D, ProjectionGrid};

pub const MODEL_MAGIC: &[u8; 8] = b"RCDTNS01";

const FLAG_ENRICH: u32 = 1;
const FLAG_UNIFORM_REFERENCE: u32 = 2;

pub fn model_to_bytes(model: &Model) -> Result<Vec<u8>> {
    let proj = model.proj();
    let mut w = Writer::default();
    w.bytes(MODEL_MAGIC);
    w.usize(model.num_classes())?;
    w.usize(proj.n_t())?;
    w.usize(proj.n_angles())?;
    let flags = FLAG_UNIFORM_REFERENCE | if model.enrich_translation() { FLAG_ENRICH } else { 0 };
    w.u32(flags);
    w.f64(model.variance_fraction());
    w.f64s(proj.thetas());
    w.f64(proj.t_grid().x_min());
    w.f64(proj.t_grid().x_max());
    w.usize(proj.image_height())?;
    w.usize(proj.image_width())?;
    w.f64(proj.pixel_spacing());
    w.f64(model.epsilon());
    for c in model.classes() {
        w.usize(c.class_id())?;
        w.usize(c.rank())?;
        w.f64s(c.basis());
        w.usize(c.singular_values().len())?;
        w.f64s(c.singular_values());
    }
    Ok(w.finish())
}

pub fn model_from_bytes(data: &[u8]) -> Result<Model> {
    if data.len() >= 8 {
        check_magic(&data[..8], MODEL_MAGIC)?;
    }
    let body = verified_body(data)?;
    let mut r = Reader::new(body);
    check_magic(r.take(8)?, MODEL_MAGIC)?;
    let k = r.usize()?;
    let m = r.usize()?;
    let n = r.usize()?;
    let flags = r.u32()?;
    if flags & !(FLAG_ENRICH | FLAG_UNIFORM_REFERENCE) != 0 || flags & FLAG_UNIFORM_REFERENCE == 0 {
        return Err(Error::CorruptFile(format!("unsupported flags {flags:#x}")));
    }
    let variance_fraction = r.f64()?;
    let thetas = r.f64s(n)?;
    let t_min = r.f64()?;
    let t_max = r.f64()?;
    let height = r.usize()?;
    let width = r.usize()?;
    let spacing = r.f64()?;
    let epsilon = r.f64()?;
    let corrupt = |e: Error| Error::CorruptFile(e.to_string());
    let t_grid = Grid1D::new(m, t_min, t_max).map_err(corrupt)?;
    let proj = ProjectionGrid::with_angles(t_grid, thetas, height, width, spacing).map_err(corrupt)?;
    let dim = proj.field_len();
    let mut classes = Vec::with_capacity(k.min(1 << 16));
    for _ in 0..k {
        let class_id = r.usize()?;
        let d = r.usize()?;
        let basis = r.f64s(dim.checked_mul(d).ok_or_else(|| Error::CorruptFile("rank overflow".into()))?)?;
        let count = r.usize()?;
        let sv = r.f64s(count)?;
        classes.push(ClassBasis::from_parts(class_id, dim, basis, sv).map_err(corrupt)?);
    }
    r.finish()?;
    Model::new(classes, proj, epsilon, variance_fraction, flags & FLAG_ENRICH != 0).map_err(corrupt)
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_bytes(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    model_from_bytes(&fs::read(path)?)
}
