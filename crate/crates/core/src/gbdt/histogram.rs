use rayon::prelude::*;

use super::bins::BinnedMatrix;

/// Gradient statistics of one bin, or of a whole node.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BinStat {
    pub grad: f64,
    pub hess: f64,
    pub count: u32,
}

impl BinStat {
    pub fn add(&mut self, g: f64, h: f64) {
        self.grad += g;
        self.hess += h;
        self.count += 1;
    }

    pub fn minus(self, other: BinStat) -> BinStat {
        BinStat {
            grad: self.grad - other.grad,
            hess: self.hess - other.hess,
            count: self.count - other.count,
        }
    }

    pub fn plus(self, other: BinStat) -> BinStat {
        BinStat {
            grad: self.grad + other.grad,
            hess: self.hess + other.hess,
            count: self.count + other.count,
        }
    }

    /// Sums over `rows`, in order.
    pub fn of_rows(rows: &[u32], grad: &[f64], hess: &[f64]) -> BinStat {
        let mut s = BinStat::default();
        for &r in rows {
            s.add(grad[r as usize], hess[r as usize]);
        }
        s
    }
}

/// Per-feature bin statistics for one tree node. Features outside the node's
/// active set have empty histograms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Histogram {
    features: Vec<Vec<BinStat>>,
}

/// Node sizes below this many (rows x features) cells are built serially.
const PARALLEL_CELLS: usize = 1 << 15;

fn build_feature(column: &[u16], n_bins: usize, rows: &[u32], grad: &[f64], hess: &[f64]) -> Vec<BinStat> {
    let mut bins = vec![BinStat::default(); n_bins];
    for &r in rows {
        let r = r as usize;
        bins[column[r] as usize].add(grad[r], hess[r]);
    }
    bins
}

impl Histogram {
    /// Accumulates `rows` for every feature in `active`. Each feature is
    /// summed serially in row order, so the result does not depend on how
    /// many threads share the work.
    pub fn build(data: &BinnedMatrix, rows: &[u32], active: &[usize], grad: &[f64], hess: &[f64]) -> Self {
        let one = |&f: &usize| build_feature(data.column(f), data.n_bins(f), rows, grad, hess);
        let built: Vec<Vec<BinStat>> = if rows.len() * active.len() >= PARALLEL_CELLS {
            active.par_iter().map(one).collect()
        } else {
            active.iter().map(one).collect()
        };
        let mut features = vec![Vec::new(); data.n_features()];
        for (&f, h) in active.iter().zip(built) {
            features[f] = h;
        }
        Self { features }
    }

    /// Sibling histogram `self - child`.
    pub fn subtract(&self, child: &Histogram) -> Self {
        let features = self
            .features
            .iter()
            .zip(&child.features)
            .map(|(p, c)| p.iter().zip(c).map(|(a, b)| a.minus(*b)).collect())
            .collect();
        Self { features }
    }

    pub fn feature(&self, f: usize) -> &[BinStat] {
        &self.features[f]
    }

    pub fn from_features(features: Vec<Vec<BinStat>>) -> Self {
        Self { features }
    }

    /// Totals of each non-empty feature histogram.
    pub fn feature_totals(&self) -> impl Iterator<Item = (usize, BinStat)> + '_ {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, h)| !h.is_empty())
            .map(|(f, h)| (f, h.iter().fold(BinStat::default(), |a, b| a.plus(*b))))
    }
}
