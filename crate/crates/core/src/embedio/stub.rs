//! Signed feature hashing over unigrams and adjacent bigrams.
//!
//! Every feature hashes with 64-bit FNV-1a over `seed (8 bytes LE) || bytes`,
//! where `bytes` is the token for unigrams and `tok1 || 0x1F || tok2` for
//! bigrams. The low 32 bits modulo `dim` pick the slot and bit 32 picks the
//! sign (set = +1). Slot counts are L2-normalized.

use crate::textprep::TokenList;

use super::{pool_layers, EmbedError, EmbeddingMatrix, LayerStack, Pooling};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const BIGRAM_SEP: u8 = 0x1f;

pub fn fnv1a64(parts: &[&[u8]]) -> u64 {
    let mut hash = FNV_OFFSET;
    for part in parts {
        for &b in *part {
            hash ^= b as u64;
            hash = hash.wrapping_mul(FNV_PRIME);
        }
    }
    hash
}

fn accumulate(acc: &mut [f64], hash: u64) {
    let slot = (hash & 0xffff_ffff) as usize % acc.len();
    let sign = if (hash >> 32) & 1 == 1 { 1.0 } else { -1.0 };
    acc[slot] += sign;
}

/// # Panics
///
/// Panics if `dim` is zero.
pub fn stub_encode(tokens: &TokenList, dim: usize, seed: u64) -> Vec<f32> {
    assert!(dim >= 1, "stub_encode needs dim >= 1");
    let seed_bytes = seed.to_le_bytes();
    let toks = tokens.as_slice();
    let mut acc = vec![0.0f64; dim];
    for t in toks {
        accumulate(&mut acc, fnv1a64(&[&seed_bytes, t.as_bytes()]));
    }
    for pair in toks.windows(2) {
        accumulate(
            &mut acc,
            fnv1a64(&[&seed_bytes, pair[0].as_bytes(), &[BIGRAM_SEP], pair[1].as_bytes()]),
        );
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        acc.iter().map(|v| (v / norm) as f32).collect()
    } else {
        vec![0.0; dim]
    }
}

/// Corpus-level stub encoder. With `layers > 1` it emits one pseudo-layer per
/// seed `seed, seed + 1, ...` and pools them, mimicking multi-layer [CLS]
/// extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StubEncoder {
    pub dim: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub layers: usize,
    #[serde(default)]
    pub pooling: Pooling,
}

fn one() -> usize {
    1
}

impl StubEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            dim,
            seed,
            layers: 1,
            pooling: Pooling::Concat,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self.pooling {
            Pooling::Concat => self.dim * self.layers,
            Pooling::Mean => self.dim,
        }
    }

    pub fn encode_corpus(&self, docs: &[TokenList]) -> Result<EmbeddingMatrix, EmbedError> {
        if self.dim == 0 {
            return Err(EmbedError::ZeroDim);
        }
        let layers = (0..self.layers.max(1) as u64)
            .map(|k| {
                let seed = self.seed.wrapping_add(k);
                let mut values = Vec::with_capacity(docs.len() * self.dim);
                for doc in docs {
                    values.extend(stub_encode(doc, self.dim, seed));
                }
                EmbeddingMatrix::new(docs.len(), self.dim, values)
            })
            .collect::<Result<Vec<_>, _>>()?;
        pool_layers(&LayerStack::new(layers)?, self.pooling)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::tokenize;

    fn norm(v: &[f32]) -> f64 {
        v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn fnv_reference_vectors() {
        // published FNV-1a 64 test vectors
        assert_eq!(fnv1a64(&[b""]), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(&[b"a"]), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(&[b"foobar"]), 0x85944171f73967e8);
        assert_eq!(fnv1a64(&[b"foo", b"bar"]), fnv1a64(&[b"foobar"]));
    }

    #[test]
    fn empty_tokens_give_zero_vector() {
        let v = stub_encode(&TokenList::default(), 16, 3);
        assert_eq!(v, vec![0.0; 16]);
    }

    #[test]
    fn deterministic() {
        let toks = tokenize("i tested positive today");
        assert_eq!(stub_encode(&toks, 32, 11), stub_encode(&toks, 32, 11));
        assert_ne!(stub_encode(&toks, 32, 11), stub_encode(&toks, 32, 12));
    }

    #[test]
    fn order_matters_through_bigrams() {
        let ab = stub_encode(&tokenize("a b"), 64, 7);
        let ba = stub_encode(&tokenize("b a"), 64, 7);
        assert_ne!(ab, ba);

        // Oracle: rebuild both accumulations by hand from the hash definition.
        let slot_sign = |parts: &[&[u8]]| {
            let h = fnv1a64(parts);
            ((h & 0xffff_ffff) as usize % 64, if (h >> 32) & 1 == 1 { 1.0 } else { -1.0 })
        };
        let s = 7u64.to_le_bytes();
        let mut expect_ab = vec![0.0f64; 64];
        let mut expect_ba = vec![0.0f64; 64];
        for (acc, first, second) in [(&mut expect_ab, b"a", b"b"), (&mut expect_ba, b"b", b"a")] {
            for parts in [
                vec![&s[..], &first[..]],
                vec![&s[..], &second[..]],
                vec![&s[..], &first[..], &[0x1f], &second[..]],
            ] {
                let (i, sign) = slot_sign(&parts);
                acc[i] += sign;
            }
        }
        let normalize = |v: Vec<f64>| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| (x / n) as f32).collect::<Vec<f32>>()
        };
        assert_eq!(ab, normalize(expect_ab));
        assert_eq!(ba, normalize(expect_ba));
    }

    #[test]
    fn unit_norm_when_features_present() {
        for text in ["a", "covid positive test", "x y z w v u"] {
            let v = stub_encode(&tokenize(text), 8, 1);
            assert!((norm(&v) - 1.0).abs() < 1e-6, "{text}");
        }
    }

    #[test]
    fn dim_one() {
        let v = stub_encode(&tokenize("a"), 1, 0);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].abs(), 1.0);
    }

    #[test]
    fn multi_layer_corpus() {
        let docs = vec![tokenize("a b c"), tokenize("")];
        let mut enc = StubEncoder::new(8, 5);
        enc.layers = 3;
        let m = enc.encode_corpus(&docs).unwrap();
        assert_eq!((m.n_rows(), m.dim()), (2, 24));
        assert_eq!(&m.row(0)[..8], stub_encode(&docs[0], 8, 5).as_slice());
        assert_eq!(&m.row(0)[16..], stub_encode(&docs[0], 8, 7).as_slice());
        assert!(m.row(1).iter().all(|v| *v == 0.0));
        enc.pooling = Pooling::Mean;
        assert_eq!(enc.encode_corpus(&docs).unwrap().dim(), 8);
        assert_eq!(enc.output_dim(), 8);
    }
}
