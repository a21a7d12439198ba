//! Equal-width segmentation and the interpolation-based replacement signal
//! used when LIME/SHAP mask segments out.

use crate::error::{Error, Result};

/// Contiguous, disjoint, covering half-open ranges over `[0, length)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    ranges: Vec<(usize, usize)>,
}

impl Segmentation {
    /// `count` near-equal segments; the first `length % count` segments are
    /// one element longer, so every segment is nonempty.
    pub fn equal(length: usize, count: usize) -> Result<Segmentation> {
        if count < 2 {
            return Err(Error::Parameter(format!(
                "segment count must be at least 2, got {count}"
            )));
        }
        if count > length {
            return Err(Error::Parameter(format!(
                "segment count {count} exceeds series length {length}"
            )));
        }
        let base = length / count;
        let extra = length % count;
        let mut ranges = Vec::with_capacity(count);
        let mut start = 0;
        for i in 0..count {
            let len = base + usize::from(i < extra);
            ranges.push((start, start + len));
            start += len;
        }
        Ok(Segmentation { ranges })
    }

    pub fn count(&self) -> usize {
        self.ranges.len()
    }

    pub fn ranges(&self) -> &[(usize, usize)] {
        &self.ranges
    }

    pub fn length(&self) -> usize {
        self.ranges.last().map(|r| r.1).unwrap_or(0)
    }

    /// Expands one value per segment to one value per time step.
    pub fn broadcast(&self, per_segment: &[f64]) -> Result<Vec<f64>> {
        if per_segment.len() != self.count() {
            return Err(Error::Dimension(format!(
                "{} values for {} segments",
                per_segment.len(),
                self.count()
            )));
        }
        let mut out = vec![0.0; self.length()];
        for (v, &(a, b)) in per_segment.iter().zip(&self.ranges) {
            out[a..b].fill(*v);
        }
        Ok(out)
    }
}

/// Replaces masked-out segments (mask false) by a straight line between the
/// segment's boundary anchors in the *original* series: the value just
/// before the segment and the value just after it (clamped at the ends).
/// Kept segments pass through untouched.
pub fn masked_replacement(values: &[f64], seg: &Segmentation, mask: &[bool]) -> Result<Vec<f64>> {
    if seg.length() != values.len() {
        return Err(Error::Dimension(format!(
            "segmentation covers {} points, series has {}",
            seg.length(),
            values.len()
        )));
    }
    if mask.len() != seg.count() {
        return Err(Error::Dimension(format!(
            "mask has {} entries for {} segments",
            mask.len(),
            seg.count()
        )));
    }
    let n = values.len();
    let mut out = values.to_vec();
    for (&keep, &(a, b)) in mask.iter().zip(seg.ranges()) {
        if keep {
            continue;
        }
        let left = if a == 0 { values[0] } else { values[a - 1] };
        let right = if b == n { values[n - 1] } else { values[b] };
        // Anchors conceptually sit at indices a-1 and b, so interior points
        // interpolate strictly between them.
        let span = (b - a + 1) as f64;
        for (k, slot) in out[a..b].iter_mut().enumerate() {
            let alpha = (k + 1) as f64 / span;
            *slot = left + alpha * (right - left);
        }
    }
    Ok(out)
}
