//! Head model files: magic `MLPH`, u16 version, u32 `d_in`, u32 `d_h`, then
//! little-endian f32 `w1` (row-major), `b1`, `w2`, `b2`.

use std::fs;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};

use super::{MlpError, MlpParams};

pub const MLP_MAGIC: [u8; 4] = *b"MLPH";
pub const MLP_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4;

pub fn encode_head(p: &MlpParams) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * p.n_params());
    buf.extend_from_slice(&MLP_MAGIC);
    buf.write_u16::<LittleEndian>(MLP_VERSION).unwrap();
    buf.write_u32::<LittleEndian>(p.d_in() as u32).unwrap();
    buf.write_u32::<LittleEndian>(p.d_h() as u32).unwrap();
    for s in p.slices() {
        for &v in s {
            buf.write_f32::<LittleEndian>(v as f32).unwrap();
        }
    }
    buf
}

pub fn decode_head(bytes: &[u8]) -> Result<MlpParams, MlpError> {
    if bytes.len() < 4 {
        return Err(MlpError::Truncated);
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MLP_MAGIC {
        return Err(MlpError::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(MlpError::Truncated);
    }
    let version = LittleEndian::read_u16(&bytes[4..6]);
    if version != MLP_VERSION {
        return Err(MlpError::UnsupportedVersion(version));
    }
    let d_in = LittleEndian::read_u32(&bytes[6..10]) as usize;
    let d_h = LittleEndian::read_u32(&bytes[10..14]) as usize;
    if d_in == 0 || d_h == 0 {
        return Err(MlpError::ParamShape("zero-sized layer"));
    }
    let n = d_in
        .checked_mul(d_h)
        .and_then(|w| w.checked_add(2 * d_h + 1))
        .ok_or(MlpError::Truncated)?;
    let payload = &bytes[HEADER_LEN..];
    let needed = n.checked_mul(4).ok_or(MlpError::Truncated)?;
    if payload.len() < needed {
        return Err(MlpError::Truncated);
    }
    if payload.len() > needed {
        return Err(MlpError::TrailingBytes(payload.len() - needed));
    }
    let mut flat = vec![0f32; n];
    LittleEndian::read_f32_into(payload, &mut flat);
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(MlpError::NonFinite);
    }
    let flat: Vec<f64> = flat.into_iter().map(f64::from).collect();
    let (w1, rest) = flat.split_at(d_in * d_h);
    let (b1, rest) = rest.split_at(d_h);
    let (w2, b2) = rest.split_at(d_h);
    MlpParams::from_parts(d_in, d_h, w1.to_vec(), b1.to_vec(), w2.to_vec(), b2[0])
}

pub fn write_head(p: &MlpParams, path: &Path) -> Result<(), MlpError> {
    fs::write(path, encode_head(p))?;
    Ok(())
}

pub fn read_head(path: &Path) -> Result<MlpParams, MlpError> {
    decode_head(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_is_exact_after_f32_rounding() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = MlpParams::init_he(5, 3, &mut rng).rounded_to_f32();
        let back = decode_head(&encode_head(&p)).unwrap();
        assert_eq!(back, p);
        assert_eq!(encode_head(&back), encode_head(&p));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.mlp");
        let p = MlpParams::zeros(2, 2);
        write_head(&p, &path).unwrap();
        assert_eq!(read_head(&path).unwrap(), p);
    }

    #[test]
    fn load_errors() {
        let p = MlpParams::zeros(2, 2);
        let bytes = encode_head(&p);
        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"GBDT");
        assert!(matches!(decode_head(&bad), Err(MlpError::BadMagic(_))));
        assert!(matches!(decode_head(&bytes[..bytes.len() - 2]), Err(MlpError::Truncated)));
        let mut long = bytes.clone();
        long.extend_from_slice(&[0; 4]);
        assert!(matches!(decode_head(&long), Err(MlpError::TrailingBytes(4))));
        let mut nan = bytes.clone();
        let n = nan.len();
        nan[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_head(&nan), Err(MlpError::NonFinite)));
    }
}
