use byteorder::{ByteOrder, LittleEndian};

use crate::error::{Error, Result};

/// Bounds-checked little-endian cursor over an untrusted buffer. Every
/// length read from the buffer is checked against the remaining bytes
/// before anything is allocated.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> ByteReader<'a> {
    pub fn new(bytes: &'a [u8], format: &'static str) -> Self {
        Self {
            bytes,
            pos: 0,
            format,
        }
    }

    pub fn error(&self, detail: impl Into<String>) -> Error {
        Error::malformed(self.format, detail)
    }

    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let remaining = self.bytes.len() - self.pos;
        if len > remaining {
            return Err(self.error(format!(
                "truncated {what} at byte {}: need {len}, have {remaining}",
                self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn sized(&self, count: usize, width: usize, what: &str) -> Result<usize> {
        count
            .checked_mul(width)
            .ok_or_else(|| self.error(format!("{what} size overflows")))
    }

    pub fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got != magic {
            return Err(self.error(format!("bad magic {got:?}")));
        }
        Ok(())
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(LittleEndian::read_u32(self.take(4, what)?))
    }

    pub fn usize(&mut self, what: &str) -> Result<usize> {
        self.u32(what).map(|v| v as usize)
    }

    pub fn bytes(&mut self, count: usize, what: &str) -> Result<Vec<u8>> {
        Ok(self.take(count, what)?.to_vec())
    }

    pub fn u32s(&mut self, count: usize, what: &str) -> Result<Vec<u32>> {
        let len = self.sized(count, 4, what)?;
        Ok(self.take(len, what)?.chunks_exact(4).map(LittleEndian::read_u32).collect())
    }

    pub fn f32s(&mut self, count: usize, what: &str) -> Result<Vec<f32>> {
        let len = self.sized(count, 4, what)?;
        Ok(self.take(len, what)?.chunks_exact(4).map(LittleEndian::read_f32).collect())
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.error(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f32s(out: &mut Vec<u8>, vs: &[f32]) {
    out.reserve(vs.len() * 4);
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn put_u32s(out: &mut Vec<u8>, vs: &[u32]) {
    out.reserve(vs.len() * 4);
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::param(format!("{what} = {v} exceeds u32")))
}
