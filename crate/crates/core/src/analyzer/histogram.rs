use crate::error::{Error, Result};
use crate::tensorio::FloatTensor;

pub const DEFAULT_BINS: usize = 101;

/// Uniform-width histogram. Samples outside the range land in the end bins;
/// non-finite samples are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
    total: u64,
}

impl Histogram {
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::ShapeMismatch(format!("histogram needs at least 2 bins, got {bins}")));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::ShapeMismatch(format!("invalid histogram range [{lo}, {hi}]")));
        }
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * width).collect();
        edges.push(hi);
        if edges.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::ShapeMismatch(format!("range [{lo}, {hi}] too narrow for {bins} bins")));
        }
        Ok(Histogram { edges, counts: vec![0; bins], total: 0 })
    }

    pub fn add(&mut self, v: f64) {
        if !v.is_finite() {
            return;
        }
        let bins = self.counts.len();
        // number of inner edges <= v
        let bin = self.edges[1..bins].partition_point(|&e| e <= v);
        self.counts[bin] += 1;
        self.total += 1;
    }

    pub fn extend(&mut self, values: impl IntoIterator<Item = f64>) {
        for v in values {
            self.add(v);
        }
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect()
    }

    /// Two columns: bin center, count.
    pub fn to_text(&self) -> String {
        self.centers()
            .iter()
            .zip(&self.counts)
            .map(|(c, n)| format!("{c:.6} {n}\n"))
            .collect()
    }
}

/// Histogram of `w / max|w|`, over `[-1, 1]` unless `range` is given. An
/// all-zero tensor maps every sample to zero.
pub fn weight_histogram(w: &FloatTensor, bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    if w.is_empty() {
        return Err(Error::EmptyTensor);
    }
    let (lo, hi) = range.unwrap_or((-1.0, 1.0));
    let mut hist = Histogram::uniform(lo, hi, bins)?;
    let scale = w.max_abs();
    if scale == 0.0 {
        hist.extend(w.data().iter().map(|_| 0.0));
    } else {
        hist.extend(w.data().iter().map(|v| v / scale));
    }
    Ok(hist)
}
