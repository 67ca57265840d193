//! Versioned binary file: 8-byte magic, u32 version, u64 header length,
//! JSON header, little-endian payload. Used by the dataset cache and by
//! checkpoints.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const VERSION: u32 = 1;

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

pub fn write_container<H: Serialize>(path: &Path, magic: &[u8; 8], header: &H, payload: &[u8]) -> Result<()> {
    let header = serde_json::to_vec(header)?;
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(magic).map_err(io)?;
    w.write_u32::<LittleEndian>(VERSION).map_err(io)?;
    w.write_u64::<LittleEndian>(header.len() as u64).map_err(io)?;
    w.write_all(&header).map_err(io)?;
    w.write_all(payload).map_err(io)?;
    w.flush().map_err(io)
}

pub fn read_container<H: DeserializeOwned>(path: &Path, magic: &[u8; 8]) -> Result<(H, Vec<u8>)> {
    let io = |e| Error::io(path, e);
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut got = [0u8; 8];
    r.read_exact(&mut got).map_err(|_| format_err(path, "truncated magic"))?;
    if &got != magic {
        return Err(format_err(
            path,
            format!("expected {:?} file", String::from_utf8_lossy(magic).trim_end_matches('\0')),
        ));
    }
    let version = r.read_u32::<LittleEndian>().map_err(|_| format_err(path, "truncated version"))?;
    if version != VERSION {
        return Err(format_err(path, format!("unsupported version {version}")));
    }
    let len = r.read_u64::<LittleEndian>().map_err(|_| format_err(path, "truncated header length"))?;
    let mut header = vec![0u8; usize::try_from(len).map_err(|_| format_err(path, "header too large"))?];
    r.read_exact(&mut header).map_err(|_| format_err(path, "truncated header"))?;
    let header = serde_json::from_slice(&header).map_err(|e| format_err(path, format!("bad header: {e}")))?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload).map_err(io)?;
    Ok((header, payload))
}

/// Cursor over a little-endian payload with bounds-checked reads.
pub(crate) struct PayloadReader<'a> {
    pub(crate) bytes: &'a [u8],
    pub(crate) path: &'a Path,
}

impl<'a> PayloadReader<'a> {
    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(format_err(self.path, "truncated payload"));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(format_err(self.path, "trailing bytes after payload"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_rejections() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        write_container(&p, b"TESTFILE", &vec![1u32, 2], &[9, 8, 7]).unwrap();
        let (h, payload): (Vec<u32>, _) = read_container(&p, b"TESTFILE").unwrap();
        assert_eq!((h, payload), (vec![1, 2], vec![9, 8, 7]));
        assert!(matches!(read_container::<Vec<u32>>(&p, b"OTHERFIL"), Err(Error::Format { .. })));
        std::fs::write(&p, b"TESTFILE\x01\x00").unwrap();
        assert!(matches!(read_container::<Vec<u32>>(&p, b"TESTFILE"), Err(Error::Format { .. })));
    }
}
