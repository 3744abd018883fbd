//! On-disk formats: media (`.stm`), datasets (`.sds`), mappings (`.slm`),
//! PGM images and report directories.
//!
//! Binary headers are little-endian. Every decoder checks the full payload
//! length before allocating, so a corrupted size field yields a typed error.

pub mod pgm;
pub mod report;
pub mod sds;
pub mod slm;
pub mod stm;

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Cursor over a byte buffer; failed reads report the offset they began at.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize, context: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Truncated {
                offset: self.pos,
                context: format!("{context} needs {n} bytes, {} left", self.remaining()),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got != expected {
            return Err(Error::Format {
                expected: format!("magic {:?}", String::from_utf8_lossy(expected)),
                found: format!("{:?}", String::from_utf8_lossy(got)),
            });
        }
        Ok(())
    }

    pub fn u8(&mut self, context: &str) -> Result<u8> {
        Ok(self.take(1, context)?[0])
    }

    pub fn u32(&mut self, context: &str) -> Result<u32> {
        let b = self.take(4, context)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self, context: &str) -> Result<u64> {
        let b = self.take(8, context)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    /// Errors unless exactly `n` bytes remain.
    pub fn expect_exact(&self, n: usize, context: &str) -> Result<()> {
        let left = self.remaining();
        if left < n {
            return Err(Error::Truncated {
                offset: self.buf.len(),
                context: format!("{context} needs {n} bytes after offset {}, {left} left", self.pos),
            });
        }
        if left > n {
            return Err(Error::Consistency(format!(
                "{} trailing bytes after {context}",
                left - n
            )));
        }
        Ok(())
    }

    pub fn f64s(&mut self, n: usize, context: &str) -> Result<Vec<f64>> {
        let b = self.take(n * 8, context)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    pub fn f32s(&mut self, n: usize, context: &str) -> Result<Vec<f64>> {
        let b = self.take(n * 4, context)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect())
    }
}

pub(crate) fn checked_len(parts: &[usize], context: &str) -> Result<usize> {
    parts
        .iter()
        .try_fold(1usize, |acc, &p| acc.checked_mul(p))
        .ok_or_else(|| Error::Consistency(format!("{context} size overflows")))
}

pub(crate) fn put_f64s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// `data.stm` → `data.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}
