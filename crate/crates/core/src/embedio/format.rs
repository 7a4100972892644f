//! `CLSB` embedding files.
//!
//! Layout, all little-endian:
//!
//! | bytes | field                              |
//! |-------|------------------------------------|
//! | 4     | magic `CLSB`                       |
//! | 2     | format version (u16, currently 1)  |
//! | 8     | n_rows (u64)                       |
//! | 4     | dim (u32)                          |
//! | 4·n·d | row-major f32 values               |

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};

use super::{EmbedError, EmbeddingMatrix};

pub const CLSB_MAGIC: [u8; 4] = *b"CLSB";
pub const CLSB_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 8 + 4;

pub fn encode_embeddings(m: &EmbeddingMatrix) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * m.values().len());
    buf.extend_from_slice(&CLSB_MAGIC);
    buf.write_u16::<LittleEndian>(CLSB_VERSION).unwrap();
    buf.write_u64::<LittleEndian>(m.n_rows() as u64).unwrap();
    buf.write_u32::<LittleEndian>(m.dim() as u32).unwrap();
    for &v in m.values() {
        buf.write_f32::<LittleEndian>(v).unwrap();
    }
    buf
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingMatrix, EmbedError> {
    if bytes.len() < 4 {
        return Err(EmbedError::Truncated {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != CLSB_MAGIC {
        return Err(EmbedError::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(EmbedError::Truncated {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let version = LittleEndian::read_u16(&bytes[4..6]);
    if version != CLSB_VERSION {
        return Err(EmbedError::UnsupportedVersion(version));
    }
    let rows = LittleEndian::read_u64(&bytes[6..14]);
    let dim = LittleEndian::read_u32(&bytes[14..18]);
    if dim == 0 {
        return Err(EmbedError::ZeroDim);
    }
    let payload_len = rows
        .checked_mul(dim as u64)
        .and_then(|n| n.checked_mul(4))
        .filter(|&n| usize::try_from(n).is_ok())
        .ok_or(EmbedError::Oversized { rows, dim })?;
    let payload = &bytes[HEADER_LEN..];
    let found = payload.len() as u64;
    if found < payload_len {
        return Err(EmbedError::Truncated {
            expected: payload_len,
            found,
        });
    }
    if found > payload_len {
        return Err(EmbedError::TrailingBytes(found - payload_len));
    }
    let mut values = vec![0f32; payload.len() / 4];
    LittleEndian::read_f32_into(payload, &mut values);
    EmbeddingMatrix::new(rows as usize, dim as usize, values)
}

pub fn write_embeddings(m: &EmbeddingMatrix, path: &Path) -> Result<(), EmbedError> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode_embeddings(m))?;
    file.flush()?;
    Ok(())
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingMatrix, EmbedError> {
    decode_embeddings(&fs::read(path)?)
}
