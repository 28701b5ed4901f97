//! Little-endian encoding helpers for the checksummed binary formats.

use crate::error::{Error, Result};

#[derive(Default)]
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn usize(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::InvalidConfig(format!("{v} does not fit in 32 bits")))?;
        self.u32(v);
        Ok(())
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        self.buf.reserve(8 * vs.len());
        for &v in vs {
            self.f64(v);
        }
    }

    /// Appends the CRC32 of everything written so far and returns the buffer.
    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.u32(crc);
        self.buf
    }
}

/// Splits off and verifies the trailing CRC32.
pub(crate) fn verified_body(data: &[u8]) -> Result<&[u8]> {
    if data.len() < 4 {
        return Err(Error::CorruptFile("file too short for a checksum".into()));
    }
    let (body, tail) = data.split_at(data.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(Error::CorruptFile("checksum mismatch".into()));
    }
    Ok(body)
}

pub(crate) struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::CorruptFile(format!("unexpected end of data at byte {}", self.pos)));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let n8 = n.checked_mul(8).ok_or_else(|| Error::CorruptFile("length overflow".into()))?;
        Ok(self.take(n8)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::CorruptFile(format!("{} trailing bytes", self.data.len() - self.pos)));
        }
        Ok(())
    }
}

/// Checks an 8-byte magic of the form `<6-byte tag><2-byte version>`.
pub(crate) fn check_magic(found: &[u8], expected: &[u8; 8]) -> Result<()> {
    if found == expected {
        return Ok(());
    }
    if found.len() == 8 && found[..6] == expected[..6] {
        return Err(Error::FormatVersionMismatch {
            found: String::from_utf8_lossy(&found[6..]).into_owned(),
            supported: String::from_utf8_lossy(&expected[6..]).into_owned(),
        });
    }
    Err(Error::CorruptFile("unrecognized file signature".into()))
}
