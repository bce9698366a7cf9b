//! Versioned binary container for fitted models.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic  b"OFDM"
//! 4       2     format version (currently 1)
//! 6       1     kind tag (see ModelKind)
//! 7       8     payload length in bytes
//! 15      n     payload
//! ```
//!
//! Payload primitives: `u8`, `u32`, `u64`, `f64` as fixed-width LE values;
//! strings as `u32` byte length + UTF-8; `f64` arrays as `u64` count + values.

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"OFDM";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ModelKind {
    Gbdt = 1,
    Transformer = 2,
    TfIdf = 3,
    BaselinePipeline = 4,
    TransformerPipeline = 5,
}

impl ModelKind {
    fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            1 => ModelKind::Gbdt,
            2 => ModelKind::Transformer,
            3 => ModelKind::TfIdf,
            4 => ModelKind::BaselinePipeline,
            5 => ModelKind::TransformerPipeline,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gbdt => "gbdt",
            ModelKind::Transformer => "transformer",
            ModelKind::TfIdf => "tfidf",
            ModelKind::BaselinePipeline => "baseline pipeline",
            ModelKind::TransformerPipeline => "transformer pipeline",
        }
    }
}

/// Reads the kind tag without decoding the payload.
pub fn peek_kind(bytes: &[u8]) -> Result<ModelKind> {
    let (kind, _) = split_header(bytes)?;
    Ok(kind)
}

fn split_header(bytes: &[u8]) -> Result<(ModelKind, &[u8])> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format("truncated header".into()));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic, not a model file".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let kind = ModelKind::from_u8(bytes[6])
        .ok_or_else(|| Error::Format(format!("unknown model kind tag {}", bytes[6])))?;
    let len = u64::from_le_bytes(bytes[7..15].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != len {
        return Err(Error::Format(format!(
            "payload length {} does not match header ({len})",
            payload.len()
        )));
    }
    Ok((kind, payload))
}

/// Checks the header and returns the payload of the expected kind.
pub fn open(bytes: &[u8], expected: ModelKind) -> Result<Reader<'_>> {
    let (kind, payload) = split_header(bytes)?;
    if kind != expected {
        return Err(Error::Format(format!(
            "expected a {} model, found {}",
            expected.name(),
            kind.name()
        )));
    }
    Ok(Reader {
        buf: payload,
        pos: 0,
    })
}

#[derive(Debug, Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn bool(&mut self, v: bool) {
        self.u8(u8::from(v));
    }

    pub fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.f64(x);
        }
    }

    pub fn strs<S: AsRef<str>>(&mut self, v: &[S]) {
        self.u64(v.len() as u64);
        for s in v {
            self.str(s.as_ref());
        }
    }

    pub fn usizes(&mut self, v: &[usize]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.u64(x as u64);
        }
    }

    /// Wraps the payload in the container header.
    pub fn finish(self, kind: ModelKind) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.buf.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(kind as u8);
        out.extend_from_slice(&(self.buf.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.buf);
        out
    }

    /// Raw payload, for nesting one encoded object inside another.
    pub fn into_payload(self) -> Vec<u8> {
        self.buf
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.buf.extend_from_slice(b);
    }
}

#[derive(Debug)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format("truncated payload".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::Format(format!("invalid bool byte {v}"))),
        }
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| Error::Format("string is not UTF-8".into()))
    }

    pub(crate) fn count(&mut self, elem_size: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n.checked_mul(elem_size)
            .is_none_or(|b| b > self.buf.len() - self.pos)
        {
            return Err(Error::Format("truncated payload".into()));
        }
        Ok(n)
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.count(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn strs(&mut self) -> Result<Vec<String>> {
        let n = self.count(4)?;
        (0..n).map(|_| self.str()).collect()
    }

    pub fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.count(8)?;
        (0..n).map(|_| Ok(self.u64()? as usize)).collect()
    }

    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.count(1)?;
        self.take(n)
    }

    /// Fails unless every payload byte has been consumed.
    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_checks() {
        let mut w = Writer::new();
        w.f64(1.5);
        w.str("hi");
        let bytes = w.finish(ModelKind::Gbdt);
        let mut r = open(&bytes, ModelKind::Gbdt).unwrap();
        assert_eq!(r.f64().unwrap(), 1.5);
        assert_eq!(r.str().unwrap(), "hi");
        r.finish().unwrap();

        assert!(open(&bytes, ModelKind::Transformer).is_err());
        let mut bad = bytes.clone();
        bad[0] ^= 0xFF;
        assert!(open(&bad, ModelKind::Gbdt).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(open(&bad, ModelKind::Gbdt)
            .unwrap_err()
            .to_string()
            .contains("version"));
        assert!(open(&bytes[..bytes.len() - 1], ModelKind::Gbdt).is_err());
        assert!(open(&bytes[..5], ModelKind::Gbdt).is_err());
    }

    #[test]
    fn huge_counts_do_not_allocate() {
        let mut w = Writer::new();
        w.u64(u64::MAX / 2);
        let bytes = w.finish(ModelKind::TfIdf);
        assert!(open(&bytes, ModelKind::TfIdf).unwrap().f64s().is_err());
    }
}
