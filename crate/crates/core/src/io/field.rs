//! Binary R-CDT field files.
//!
//! Layout (little-endian): magic `RCDTFLD1`; u32 offset count m and angle
//! count n; u32 image height and width; n f64 angles; f64 offset grid
//! endpoints; f64 pixel spacing; m·n f64 values, angle-major; CRC32. Field
//! samples sit at the cell centres of the recorded offset grid.

use std::fs;
use std::path::Path;

use super::bytes::{check_magic, verified_body, Reader, Writer};
use crate::error::{Error, Result};
use crate::transforms::RcdtField;
use crate::types::{Grid1D, ProjectionGrid};

pub const FIELD_MAGIC: &[u8; 8] = b"RCDTFLD1";

pub fn field_to_bytes(field: &RcdtField) -> Result<Vec<u8>> {
    let proj = field.proj();
    let mut w = Writer::default();
    w.bytes(FIELD_MAGIC);
    w.usize(proj.n_t())?;
    w.usize(proj.n_angles())?;
    w.usize(proj.image_height())?;
    w.usize(proj.image_width())?;
    w.f64s(proj.thetas());
    w.f64(proj.t_grid().x_min());
    w.f64(proj.t_grid().x_max());
    w.f64(proj.pixel_spacing());
    w.f64s(field.values());
    Ok(w.finish())
}

pub fn field_from_bytes(data: &[u8]) -> Result<RcdtField> {
    if data.len() >= 8 {
        check_magic(&data[..8], FIELD_MAGIC)?;
    }
    let body = verified_body(data)?;
    let mut r = Reader::new(body);
    check_magic(r.take(8)?, FIELD_MAGIC)?;
    let m = r.usize()?;
    let n = r.usize()?;
    let height = r.usize()?;
    let width = r.usize()?;
    let thetas = r.f64s(n)?;
    let t_min = r.f64()?;
    let t_max = r.f64()?;
    let spacing = r.f64()?;
    let corrupt = |e: Error| Error::CorruptFile(e.to_string());
    let t_grid = Grid1D::new(m, t_min, t_max).map_err(corrupt)?;
    let proj = ProjectionGrid::with_angles(t_grid, thetas, height, width, spacing).map_err(corrupt)?;
    let values = r.f64s(proj.field_len())?;
    r.finish()?;
    RcdtField::new(proj, values)
}

pub fn write_field(field: &RcdtField, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, field_to_bytes(field)?)?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<RcdtField> {
    field_from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::rcdt_forward;
    use crate::types::{default_projection_grid, make_uniform_reference1d, normalize_to_density2d, RawImage};

    #[test]
    fn round_trip_and_header() {
        let proj = default_projection_grid(6, 5, 8).unwrap();
        let r = make_uniform_reference1d(*proj.t_grid());
        let img = RawImage::from_fn(6, 5, |i, j| (i + 2 * j) as f64);
        let field = rcdt_forward(&normalize_to_density2d(&img, 1e-8).unwrap(), &r, &proj).unwrap();
        let bytes = field_to_bytes(&field).unwrap();
        assert_eq!(&bytes[..8], FIELD_MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize, proj.n_t());
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), 0.0);
        assert_eq!(field_from_bytes(&bytes).unwrap(), field);
        assert!(matches!(field_from_bytes(&bytes[..bytes.len() - 3]), Err(Error::CorruptFile(_))));
    }
}
