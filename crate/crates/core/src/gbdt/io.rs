//! Booster model files (little-endian):
//!
//! ```text
//! magic "GBDT" | u16 version
//! config echo: u32 n_trees, u32 num_leaves, u32 min_data_in_leaf, u32 max_bins,
//!              f64 learning_rate, f64 lambda_l2, f64 feature_fraction,
//!              f64 bagging_fraction, f64 scale_pos_weight, u64 seed,
//!              u32 early_stopping_rounds (0 = off)
//! f64 base_score
//! u32 n_features, then per feature: u32 count + count f32 thresholds
//! u32 tree count, then per tree: u32 node count + nodes in pre-order
//!   leaf:  u8 0, f64 value
//!   split: u8 1, u32 feature, u16 bin, u8 default_left
//! ```
//!
//! Child links are implicit: a split's left subtree follows it directly and
//! its right subtree follows the left one.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::bins::BinMapper;
use super::booster::GbdtModel;
use super::config::GbdtConfig;
use super::tree::{Tree, TreeNode};
use super::GbdtError;

pub const GBDT_MAGIC: [u8; 4] = *b"GBDT";
pub const GBDT_VERSION: u16 = 1;

const TAG_LEAF: u8 = 0;
const TAG_SPLIT: u8 = 1;

fn write_tree(buf: &mut Vec<u8>, nodes: &[TreeNode], i: usize) {
    match nodes[i] {
        TreeNode::Leaf { value } => {
            buf.push(TAG_LEAF);
            buf.write_f64::<LE>(value).unwrap();
        }
        TreeNode::Split {
            feature,
            bin,
            default_left,
            left,
            right,
        } => {
            buf.push(TAG_SPLIT);
            buf.write_u32::<LE>(feature as u32).unwrap();
            buf.write_u16::<LE>(bin).unwrap();
            buf.push(u8::from(default_left));
            write_tree(buf, nodes, left);
            write_tree(buf, nodes, right);
        }
    }
}

pub fn encode_model(model: &GbdtModel) -> Vec<u8> {
    let c = &model.config;
    let mut buf = Vec::new();
    buf.extend_from_slice(&GBDT_MAGIC);
    buf.write_u16::<LE>(GBDT_VERSION).unwrap();
    for v in [c.n_trees, c.num_leaves, c.min_data_in_leaf, c.max_bins] {
        buf.write_u32::<LE>(v as u32).unwrap();
    }
    for v in [
        c.learning_rate,
        c.lambda_l2,
        c.feature_fraction,
        c.bagging_fraction,
        c.scale_pos_weight,
    ] {
        buf.write_f64::<LE>(v).unwrap();
    }
    buf.write_u64::<LE>(c.seed).unwrap();
    buf.write_u32::<LE>(c.early_stopping_rounds.unwrap_or(0) as u32).unwrap();
    buf.write_f64::<LE>(model.base_score).unwrap();

    buf.write_u32::<LE>(model.mapper.n_features() as u32).unwrap();
    for f in 0..model.mapper.n_features() {
        let t = model.mapper.thresholds(f);
        buf.write_u32::<LE>(t.len() as u32).unwrap();
        for &v in t {
            buf.write_f32::<LE>(v).unwrap();
        }
    }

    buf.write_u32::<LE>(model.trees.len() as u32).unwrap();
    for tree in &model.trees {
        buf.write_u32::<LE>(tree.nodes().len() as u32).unwrap();
        write_tree(&mut buf, tree.nodes(), 0);
    }
    buf
}

fn eof(e: std::io::Error) -> GbdtError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        GbdtError::Truncated
    } else {
        GbdtError::Io(e)
    }
}

struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
}

impl Reader<'_> {
    fn u8(&mut self) -> Result<u8, GbdtError> {
        self.cur.read_u8().map_err(eof)
    }
    fn u16(&mut self) -> Result<u16, GbdtError> {
        self.cur.read_u16::<LE>().map_err(eof)
    }
    fn u32(&mut self) -> Result<u32, GbdtError> {
        self.cur.read_u32::<LE>().map_err(eof)
    }
    fn u64(&mut self) -> Result<u64, GbdtError> {
        self.cur.read_u64::<LE>().map_err(eof)
    }
    fn f32(&mut self) -> Result<f32, GbdtError> {
        self.cur.read_f32::<LE>().map_err(eof)
    }
    fn f64(&mut self) -> Result<f64, GbdtError> {
        self.cur.read_f64::<LE>().map_err(eof)
    }
    fn remaining(&self) -> usize {
        self.cur.get_ref().len() - self.cur.position() as usize
    }

    /// Reads one subtree in pre-order, appending to `out`; returns its index.
    fn tree(&mut self, out: &mut Vec<TreeNode>, budget: usize, depth: usize) -> Result<usize, GbdtError> {
        if out.len() >= budget || depth > budget {
            return Err(GbdtError::Corrupt("tree has more nodes than declared".into()));
        }
        let at = out.len();
        match self.u8()? {
            TAG_LEAF => out.push(TreeNode::Leaf { value: self.f64()? }),
            TAG_SPLIT => {
                let feature = self.u32()? as usize;
                let bin = self.u16()?;
                let default_left = self.u8()? != 0;
                out.push(TreeNode::Leaf { value: 0.0 });
                let left = self.tree(out, budget, depth + 1)?;
                let right = self.tree(out, budget, depth + 1)?;
                out[at] = TreeNode::Split {
                    feature,
                    bin,
                    default_left,
                    left,
                    right,
                };
            }
            tag => return Err(GbdtError::Corrupt(format!("unknown node tag {tag}"))),
        }
        Ok(at)
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<GbdtModel, GbdtError> {
    let mut r = Reader {
        cur: Cursor::new(bytes),
    };
    let mut magic = [0u8; 4];
    r.cur.read_exact(&mut magic).map_err(eof)?;
    if magic != GBDT_MAGIC {
        return Err(GbdtError::BadMagic(magic));
    }
    let version = r.u16()?;
    if version != GBDT_VERSION {
        return Err(GbdtError::UnsupportedVersion(version));
    }
    let n_trees = r.u32()? as usize;
    let num_leaves = r.u32()? as usize;
    let min_data_in_leaf = r.u32()? as usize;
    let max_bins = r.u32()? as usize;
    let config = GbdtConfig {
        n_trees,
        num_leaves,
        min_data_in_leaf,
        max_bins,
        learning_rate: r.f64()?,
        lambda_l2: r.f64()?,
        feature_fraction: r.f64()?,
        bagging_fraction: r.f64()?,
        scale_pos_weight: r.f64()?,
        seed: r.u64()?,
        early_stopping_rounds: match r.u32()? {
            0 => None,
            k => Some(k as usize),
        },
    };
    config.validate()?;
    let base_score = r.f64()?;
    if !base_score.is_finite() {
        return Err(GbdtError::Corrupt("non-finite base score".into()));
    }

    let n_features = r.u32()? as usize;
    if n_features > r.remaining() / 4 {
        return Err(GbdtError::Truncated);
    }
    let mut thresholds = Vec::with_capacity(n_features);
    for _ in 0..n_features {
        let k = r.u32()? as usize;
        if k > r.remaining() / 4 {
            return Err(GbdtError::Truncated);
        }
        thresholds.push((0..k).map(|_| r.f32()).collect::<Result<Vec<_>, _>>()?);
    }
    let mapper = BinMapper::from_thresholds(thresholds)?;

    let tree_count = r.u32()? as usize;
    let mut trees = Vec::with_capacity(tree_count.min(r.remaining() / 13 + 1));
    for t in 0..tree_count {
        let n_nodes = r.u32()? as usize;
        let mut nodes = Vec::with_capacity(n_nodes.min(r.remaining() / 9 + 1));
        r.tree(&mut nodes, n_nodes, 0)?;
        if nodes.len() != n_nodes {
            return Err(GbdtError::Corrupt(format!("tree {t} node count mismatch")));
        }
        for n in &nodes {
            if let TreeNode::Split { feature, bin, .. } = *n {
                if feature >= n_features || bin as usize + 1 >= mapper.n_bins(feature) {
                    return Err(GbdtError::Corrupt(format!("tree {t} splits on an unknown bin")));
                }
            }
        }
        trees.push(Tree::from_nodes(nodes).ok_or_else(|| GbdtError::Corrupt(format!("tree {t} is malformed")))?);
    }
    if r.remaining() != 0 {
        return Err(GbdtError::TrailingBytes(r.remaining()));
    }
    Ok(GbdtModel {
        config,
        base_score,
        trees,
        mapper,
    })
}

pub fn write_model(model: &GbdtModel, path: &Path) -> Result<(), GbdtError> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<GbdtModel, GbdtError> {
    decode_model(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedio::EmbeddingMatrix;
    use crate::gbdt::train;

    fn model() -> GbdtModel {
        let n = 80;
        let values: Vec<f32> = (0..n * 3).map(|i| ((i * 31 % 97) as f32) / 97.0).collect();
        let x = EmbeddingMatrix::new(n, 3, values).unwrap();
        let y: Vec<u8> = (0..n).map(|i| u8::from(x.row(i)[0] + x.row(i)[2] > 1.0)).collect();
        let cfg = GbdtConfig {
            n_trees: 6,
            num_leaves: 5,
            min_data_in_leaf: 3,
            early_stopping_rounds: Some(4),
            ..Default::default()
        };
        train(&x, &y, &cfg, None).unwrap().0
    }

    #[test]
    fn roundtrip_preserves_model() {
        let m = model();
        let bytes = encode_model(&m);
        let back = decode_model(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(encode_model(&back), bytes);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.gbdt");
        let m = model();
        write_model(&m, &path).unwrap();
        assert_eq!(read_model(&path).unwrap(), m);
    }

    #[test]
    fn load_errors() {
        let bytes = encode_model(&model());
        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"CLSB");
        assert!(matches!(decode_model(&bad), Err(GbdtError::BadMagic(_))));
        for cut in [3, 10, 60, bytes.len() - 1] {
            assert!(matches!(decode_model(&bytes[..cut]), Err(GbdtError::Truncated)), "cut {cut}");
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_model(&long), Err(GbdtError::TrailingBytes(1))));
        let mut ver = bytes.clone();
        ver[4] = 2;
        assert!(matches!(decode_model(&ver), Err(GbdtError::UnsupportedVersion(2))));
    }
}
