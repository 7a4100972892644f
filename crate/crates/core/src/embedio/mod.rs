//! Dense embedding matrices, multi-layer [CLS] pooling, the `CLSB` file
//! format and a hashed n-gram stand-in encoder.

mod format;
mod stub;

pub use format::{decode_embeddings, encode_embeddings, read_embeddings, write_embeddings, CLSB_MAGIC, CLSB_VERSION};
pub use stub::{fnv1a64, stub_encode, StubEncoder};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding dimension must be at least 1")]
    ZeroDim,
    #[error("value buffer has length {len}, expected {rows} x {dim}")]
    ShapeMismatch { rows: usize, dim: usize, len: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("layer stack is empty")]
    EmptyStack,
    #[error("layer {layer} has {got} rows, expected {expected}")]
    LayerRows {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("layer {layer} has dim {got}, mean pooling needs {expected}")]
    LayerDim {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("bad magic: expected CLSB, found {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported CLSB version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(u64),
    #[error("header declares {rows} x {dim}, which overflows")]
    Oversized { rows: u64, dim: u32 },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Row-major `n_rows x dim` matrix of finite `f32` values.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    n_rows: usize,
    dim: usize,
    values: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(n_rows: usize, dim: usize, values: Vec<f32>) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::ZeroDim);
        }
        if n_rows.checked_mul(dim) != Some(values.len()) {
            return Err(EmbedError::ShapeMismatch {
                rows: n_rows,
                dim,
                len: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self {
            n_rows,
            dim,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f32>], dim: usize) -> Result<Self, EmbedError> {
        let mut values = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(EmbedError::ShapeMismatch {
                    rows: rows.len(),
                    dim,
                    len: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, values)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.values.chunks_exact(self.dim)
    }

    /// Applies `f` to every value of column `col`, revalidating finiteness.
    pub fn map_column(&self, col: usize, f: impl Fn(f32) -> f32) -> Result<Self, EmbedError> {
        let mut values = self.values.clone();
        for row in values.chunks_exact_mut(self.dim) {
            row[col] = f(row[col]);
        }
        Self::new(self.n_rows, self.dim, values)
    }

    /// Selects rows by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self {
            n_rows: idx.len(),
            dim: self.dim,
            values,
        }
    }
}

/// Per-layer embeddings of the same samples, e.g. the [CLS] vectors of the
/// last few encoder layers.
#[derive(Debug, Clone)]
pub struct LayerStack {
    layers: Vec<EmbeddingMatrix>,
}

impl LayerStack {
    pub fn new(layers: Vec<EmbeddingMatrix>) -> Result<Self, EmbedError> {
        let first = layers.first().ok_or(EmbedError::EmptyStack)?;
        let expected = first.n_rows();
        for (layer, m) in layers.iter().enumerate().skip(1) {
            if m.n_rows() != expected {
                return Err(EmbedError::LayerRows {
                    layer,
                    expected,
                    got: m.n_rows(),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[EmbeddingMatrix] {
        &self.layers
    }

    pub fn n_rows(&self) -> usize {
        self.layers[0].n_rows()
    }
}

/// How a [`LayerStack`] collapses into one matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    #[default]
    Concat,
    Mean,
}

/// Row `i` of the result is row `i` of every layer, in layer order.
pub fn concat_layers(stack: &LayerStack) -> EmbeddingMatrix {
    let n_rows = stack.n_rows();
    let dim: usize = stack.layers.iter().map(EmbeddingMatrix::dim).sum();
    let mut values = Vec::with_capacity(n_rows * dim);
    for i in 0..n_rows {
        for layer in &stack.layers {
            values.extend_from_slice(layer.row(i));
        }
    }
    EmbeddingMatrix {
        n_rows,
        dim,
        values,
    }
}

/// Element-wise mean across layers; all layers must share a dimension.
pub fn mean_layers(stack: &LayerStack) -> Result<EmbeddingMatrix, EmbedError> {
    let dim = stack.layers[0].dim();
    for (layer, m) in stack.layers.iter().enumerate() {
        if m.dim() != dim {
            return Err(EmbedError::LayerDim {
                layer,
                expected: dim,
                got: m.dim(),
            });
        }
    }
    let k = stack.layers.len() as f64;
    let mut values = vec![0.0f32; stack.n_rows() * dim];
    for (j, out) in values.iter_mut().enumerate() {
        let sum: f64 = stack.layers.iter().map(|m| m.values[j] as f64).sum();
        *out = (sum / k) as f32;
    }
    EmbeddingMatrix::new(stack.n_rows(), dim, values)
}

pub fn pool_layers(stack: &LayerStack, pooling: Pooling) -> Result<EmbeddingMatrix, EmbedError> {
    match pooling {
        Pooling::Concat => Ok(concat_layers(stack)),
        Pooling::Mean => mean_layers(stack),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f32]]) -> EmbeddingMatrix {
        let dim = rows[0].len();
        EmbeddingMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), dim).unwrap()
    }

    #[test]
    fn matrix_invariants() {
        assert!(matches!(EmbeddingMatrix::new(0, 0, vec![]), Err(EmbedError::ZeroDim)));
        assert!(EmbeddingMatrix::new(0, 4, vec![]).is_ok());
        assert!(matches!(
            EmbeddingMatrix::new(2, 2, vec![1.0; 3]),
            Err(EmbedError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            EmbeddingMatrix::new(2, 2, vec![1.0, 2.0, f32::NAN, 0.0]),
            Err(EmbedError::NonFinite { row: 1, col: 0 })
        ));
    }

    #[test]
    fn concat_single_layer_is_identity() {
        let m = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let stack = LayerStack::new(vec![m.clone()]).unwrap();
        assert_eq!(concat_layers(&stack), m);
    }

    #[test]
    fn concat_two_layers() {
        let a = mat(&[&[1.0, 2.0]]);
        let b = mat(&[&[3.0, 4.0, 5.0]]);
        let out = concat_layers(&LayerStack::new(vec![a, b]).unwrap());
        assert_eq!(out.dim(), 5);
        assert_eq!(out.row(0), &[1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn concat_three_wide_layers() {
        let layer = |s: f32| EmbeddingMatrix::new(2, 1024, (0..2048).map(|i| i as f32 * s).collect()).unwrap();
        let stack = LayerStack::new(vec![layer(1.0), layer(-1.0), layer(0.5)]).unwrap();
        let out = concat_layers(&stack);
        assert_eq!(out.dim(), 3072);
        assert_eq!(out.n_rows(), 2);
        // values are copied, never rounded
        assert_eq!(out.row(1)[0], 1024.0);
        assert_eq!(out.row(1)[1024], -1024.0);
        assert_eq!(out.row(1)[2048], 512.0);
    }

    #[test]
    fn mismatched_rows_names_layer() {
        let a = mat(&[&[1.0], &[2.0]]);
        let b = mat(&[&[1.0], &[2.0]]);
        let c = mat(&[&[1.0]]);
        match LayerStack::new(vec![a, b, c]) {
            Err(EmbedError::LayerRows { layer, expected, got }) => {
                assert_eq!((layer, expected, got), (2, 2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(LayerStack::new(vec![]), Err(EmbedError::EmptyStack)));
    }

    #[test]
    fn mean_pooling() {
        let a = mat(&[&[1.0, 2.0]]);
        let b = mat(&[&[3.0, 6.0]]);
        let out = mean_layers(&LayerStack::new(vec![a.clone(), b]).unwrap()).unwrap();
        assert_eq!(out.row(0), &[2.0, 4.0]);
        let c = mat(&[&[1.0]]);
        assert!(matches!(
            mean_layers(&LayerStack::new(vec![a, c]).unwrap()),
            Err(EmbedError::LayerDim { layer: 1, .. })
        ));
    }
}
