use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rectangular binning of two state coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub bins: [usize; 2],
    /// State coordinates that are binned.
    #[serde(default = "default_axes")]
    pub axes: [usize; 2],
}

fn default_axes() -> [usize; 2] {
    [0, 1]
}

impl HistogramSpec {
    pub fn square(half_width: f64, bins: usize) -> Self {
        Self {
            lo: [-half_width; 2],
            hi: [half_width; 2],
            bins: [bins; 2],
            axes: default_axes(),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.bins.contains(&0) || self.axes.iter().any(|&a| a >= dim) || (0..2).any(|i| !(self.hi[i] > self.lo[i]))
        {
            return Err(Error::InvalidArgument("empty histogram range or bad axes".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.bins[0] * self.bins[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Bin of `x`, or `None` outside the range.
    pub fn bin(&self, x: &[f64]) -> Option<usize> {
        let mut idx = [0usize; 2];
        for i in 0..2 {
            let v = x[self.axes[i]];
            if !(v >= self.lo[i] && v < self.hi[i]) {
                return None;
            }
            let s = (v - self.lo[i]) / (self.hi[i] - self.lo[i]);
            idx[i] = ((s * self.bins[i] as f64) as usize).min(self.bins[i] - 1);
        }
        Some(idx[0] * self.bins[1] + idx[1])
    }

    /// Center of bin `b`.
    pub fn center(&self, b: usize) -> [f64; 2] {
        let (i, j) = (b / self.bins[1], b % self.bins[1]);
        [
            self.lo[0] + (i as f64 + 0.5) * (self.hi[0] - self.lo[0]) / self.bins[0] as f64,
            self.lo[1] + (j as f64 + 0.5) * (self.hi[1] - self.lo[1]) / self.bins[1] as f64,
        ]
    }
}

/// Weighted occupation of the bins plus an overflow bin for mass outside
/// the range. After [`normalize`](Self::normalize), `mass` and `overflow`
/// sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationHistogram {
    pub spec: HistogramSpec,
    pub mass: Vec<f64>,
    pub overflow: f64,
    /// Number of recorded samples.
    pub samples: usize,
}

impl OccupationHistogram {
    pub fn new(spec: HistogramSpec) -> Self {
        Self {
            mass: vec![0.0; spec.len()],
            spec,
            overflow: 0.0,
            samples: 0,
        }
    }

    #[inline]
    pub fn add(&mut self, x: &[f64], weight: f64) {
        match self.spec.bin(x) {
            Some(b) => self.mass[b] += weight,
            None => self.overflow += weight,
        }
        self.samples += 1;
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum::<f64>() + self.overflow
    }

    pub fn normalize(&mut self) {
        let t = self.total();
        if t > 0.0 {
            self.mass.iter_mut().for_each(|m| *m /= t);
            self.overflow /= t;
        }
    }

    /// Total-variation distance, counting the overflow bin.
    pub fn total_variation(&self, other: &Self) -> f64 {
        0.5 * (self.mass.iter().zip(&other.mass).map(|(a, b)| (a - b).abs()).sum::<f64>()
            + (self.overflow - other.overflow).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binning_and_normalization() {
        let spec = HistogramSpec::square(1.0, 4);
        assert_eq!(spec.bin(&[-1.0, -1.0]), Some(0));
        assert_eq!(spec.bin(&[0.99, 0.99]), Some(15));
        assert_eq!(spec.bin(&[1.0, 0.0]), None);
        let mut h = OccupationHistogram::new(spec);
        h.add(&[0.1, 0.1], 1.0);
        h.add(&[5.0, 0.0], 3.0);
        h.normalize();
        assert!((h.total() - 1.0).abs() < 1e-15);
        assert_eq!(h.overflow, 0.75);
        let c = h.spec.center(10);
        assert_eq!(c, [0.25, 0.25]);
    }
}
