//! Quantile feature binning.
//!
//! Each feature gets a strictly increasing list of upper-edge thresholds; a
//! value `v` falls in bin `#{t : t < v}`, so bin `b` holds the values in
//! `(t[b-1], t[b]]`. Thresholds are always observed training values, which
//! makes the binning depend only on the rank order of the data.

use crate::embedio::EmbeddingMatrix;

use super::GbdtError;

#[derive(Debug, Clone, PartialEq)]
pub struct BinMapper {
    thresholds: Vec<Vec<f32>>,
}

/// Upper edges for one feature.
fn feature_thresholds(values: &mut [f32], max_bins: usize) -> Vec<f32> {
    values.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mut distinct: Vec<(f32, usize)> = Vec::new();
    for &v in values.iter() {
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => distinct.push((v, 1)),
        }
    }
    if distinct.len() <= max_bins {
        return distinct[..distinct.len().saturating_sub(1)]
            .iter()
            .map(|(v, _)| *v)
            .collect();
    }

    // Greedy equal-count bins. A bin closes once it reaches the mean size of
    // the bins still to fill, or just before a value that fills one alone.
    let mut thresholds = Vec::with_capacity(max_bins - 1);
    let mut rest_n = values.len();
    let mut rest_bins = max_bins;
    let mut acc = 0usize;
    for j in 0..distinct.len() - 1 {
        acc += distinct[j].1;
        let target = rest_n as f64 / rest_bins as f64;
        let next_alone = distinct[j + 1].1 as f64 >= target;
        if acc as f64 >= target || next_alone {
            thresholds.push(distinct[j].0);
            rest_n -= acc;
            rest_bins -= 1;
            acc = 0;
            if rest_bins == 1 {
                break;
            }
        }
    }
    thresholds
}

impl BinMapper {
    /// # Errors
    ///
    /// [`GbdtError::EmptyData`] when `x` has no rows.
    pub fn fit(x: &EmbeddingMatrix, max_bins: usize) -> Result<Self, GbdtError> {
        if x.is_empty() {
            return Err(GbdtError::EmptyData);
        }
        let max_bins = max_bins.max(2);
        let n = x.n_rows();
        let mut column = vec![0f32; n];
        let thresholds = (0..x.dim())
            .map(|f| {
                for (i, c) in column.iter_mut().enumerate() {
                    *c = x.values()[i * x.dim() + f];
                }
                feature_thresholds(&mut column, max_bins)
            })
            .collect();
        Ok(Self { thresholds })
    }

    pub fn from_thresholds(thresholds: Vec<Vec<f32>>) -> Result<Self, GbdtError> {
        for (f, t) in thresholds.iter().enumerate() {
            let ok = t.iter().all(|v| v.is_finite()) && t.windows(2).all(|w| w[0] < w[1]);
            if !ok || t.len() >= u16::MAX as usize {
                return Err(GbdtError::Corrupt(format!("thresholds of feature {f} are not strictly increasing")));
            }
        }
        Ok(Self { thresholds })
    }

    pub fn n_features(&self) -> usize {
        self.thresholds.len()
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.thresholds[feature].len() + 1
    }

    pub fn thresholds(&self, feature: usize) -> &[f32] {
        &self.thresholds[feature]
    }

    /// Bin of `value` for `feature`. NaN maps to bin 0.
    #[inline]
    pub fn bin(&self, feature: usize, value: f32) -> u16 {
        self.thresholds[feature].partition_point(|&t| t < value) as u16
    }

    pub fn transform(&self, x: &EmbeddingMatrix) -> Result<BinnedMatrix, GbdtError> {
        if x.dim() != self.n_features() {
            return Err(GbdtError::DimMismatch {
                expected: self.n_features(),
                got: x.dim(),
            });
        }
        let n = x.n_rows();
        let mut bins = vec![0u16; n * x.dim()];
        for (i, row) in x.rows().enumerate() {
            for (f, &v) in row.iter().enumerate() {
                bins[f * n + i] = self.bin(f, v);
            }
        }
        Ok(BinnedMatrix {
            n_rows: n,
            n_bins: (0..self.n_features()).map(|f| self.n_bins(f)).collect(),
            bins,
        })
    }
}

/// Column-major bin indices.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedMatrix {
    n_rows: usize,
    n_bins: Vec<usize>,
    bins: Vec<u16>,
}

impl BinnedMatrix {
    /// Builds directly from per-feature bin columns (each of length `n_rows`).
    pub fn from_columns(columns: Vec<Vec<u16>>, n_bins: Vec<usize>) -> Self {
        let n_rows = columns.first().map_or(0, Vec::len);
        assert_eq!(columns.len(), n_bins.len());
        for (c, &nb) in columns.iter().zip(&n_bins) {
            assert_eq!(c.len(), n_rows);
            assert!(c.iter().all(|&b| (b as usize) < nb));
        }
        Self {
            n_rows,
            n_bins,
            bins: columns.concat(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_bins.len()
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.n_bins[feature]
    }

    #[inline]
    pub fn column(&self, feature: usize) -> &[u16] {
        &self.bins[feature * self.n_rows..(feature + 1) * self.n_rows]
    }

    #[inline]
    pub fn get(&self, row: usize, feature: usize) -> u16 {
        self.bins[feature * self.n_rows + row]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f32]) -> EmbeddingMatrix {
        EmbeddingMatrix::new(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn constant_feature_has_one_bin() {
        let m = BinMapper::fit(&column(&[3.0; 10]), 16).unwrap();
        assert!(m.thresholds(0).is_empty());
        assert_eq!(m.bin(0, 3.0), 0);
        assert_eq!(m.bin(0, -100.0), 0);
        assert_eq!(m.bin(0, 100.0), 0);
    }

    #[test]
    fn eight_values_four_bins() {
        let vals: Vec<f32> = (1..=8).map(|v| v as f32).collect();
        let m = BinMapper::fit(&column(&vals), 4).unwrap();
        assert_eq!(m.thresholds(0), &[2.0, 4.0, 6.0]);
        let mut counts = [0; 4];
        for v in &vals {
            counts[m.bin(0, *v) as usize] += 1;
        }
        assert_eq!(counts, [2, 2, 2, 2]);
    }

    #[test]
    fn few_distinct_values_get_own_bins() {
        let vals = [0.0, 2.0, 1.0, 2.0, 0.0, 5.0, 1.0];
        let m = BinMapper::fit(&column(&vals), 4).unwrap();
        assert_eq!(m.thresholds(0), &[0.0, 1.0, 2.0]);
        assert_eq!(
            vals.iter().map(|v| m.bin(0, *v)).collect::<Vec<_>>(),
            vec![0, 2, 1, 2, 0, 3, 1]
        );
    }

    #[test]
    fn heavy_tie_gets_its_own_bin() {
        let mut vals = vec![0.0f32; 90];
        vals.extend((1..=10).map(|v| v as f32));
        let m = BinMapper::fit(&column(&vals), 4).unwrap();
        let t = m.thresholds(0);
        assert_eq!(t[0], 0.0);
        assert!(t.len() <= 3 && t.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn respects_max_bins_and_order() {
        let vals: Vec<f32> = (0..1000).map(|i| ((i * 7919) % 1000) as f32 * 0.37).collect();
        for max_bins in [2, 3, 16, 255] {
            let m = BinMapper::fit(&column(&vals), max_bins).unwrap();
            let t = m.thresholds(0);
            assert!(t.len() < max_bins);
            assert!(t.windows(2).all(|w| w[0] < w[1]));
            assert!(t.iter().all(|v| vals.contains(v)));
        }
    }

    #[test]
    fn routing_bounds() {
        let m = BinMapper::from_thresholds(vec![vec![1.0, 2.0]]).unwrap();
        assert_eq!(m.bin(0, 1.0), 0);
        assert_eq!(m.bin(0, 1.5), 1);
        assert_eq!(m.bin(0, 2.0), 1);
        assert_eq!(m.bin(0, 2.5), 2);
        assert_eq!(m.bin(0, f32::NAN), 0);
        assert!(BinMapper::from_thresholds(vec![vec![2.0, 1.0]]).is_err());
    }

    #[test]
    fn transform_layout() {
        let x = EmbeddingMatrix::new(3, 2, vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0]).unwrap();
        let m = BinMapper::fit(&x, 8).unwrap();
        let b = m.transform(&x).unwrap();
        assert_eq!(b.column(0), &[0, 1, 2]);
        assert_eq!(b.get(2, 1), 2);
        let wrong = EmbeddingMatrix::new(1, 3, vec![0.0; 3]).unwrap();
        assert!(matches!(m.transform(&wrong), Err(GbdtError::DimMismatch { .. })));
    }

    #[test]
    fn empty_data_is_an_error() {
        let x = EmbeddingMatrix::new(0, 2, vec![]).unwrap();
        assert!(matches!(BinMapper::fit(&x, 8), Err(GbdtError::EmptyData)));
    }
}
