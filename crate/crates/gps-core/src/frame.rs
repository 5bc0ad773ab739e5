use autodiff::{Elem, Tensor};
use thiserror::Error;

use crate::NUM_CLASSES;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame dimensions must be positive, got {height}x{width}")]
    EmptyDimensions { height: usize, width: usize },
    #[error("label buffer has {got} entries, expected {expected}")]
    BufferSize { expected: usize, got: usize },
    #[error("label {label} out of range (must be < {k})")]
    LabelOutOfRange { label: u8, k: usize },
    #[error("sequence must contain at least one frame")]
    EmptySequence,
    #[error("frame {index} is {got_h}x{got_w}, sequence is {h}x{w}")]
    FrameSizeMismatch {
        index: usize,
        h: usize,
        w: usize,
        got_h: usize,
        got_w: usize,
    },
    #[error("resize target must be positive, got {0}x{1}")]
    BadResizeTarget(usize, usize),
    #[error("histogram is empty")]
    EmptyHistogram,
}

/// One parsing frame: an H x W grid of part-label codes (0 = background,
/// 1..=11 = body parts).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsingFrame {
    height: usize,
    width: usize,
    labels: Vec<u8>,
}

impl ParsingFrame {
    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self, FrameError> {
        if height == 0 || width == 0 {
            return Err(FrameError::EmptyDimensions { height, width });
        }
        if labels.len() != height * width {
            return Err(FrameError::BufferSize { expected: height * width, got: labels.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&l| (l as usize) >= NUM_CLASSES) {
            return Err(FrameError::LabelOutOfRange { label: bad, k: NUM_CLASSES });
        }
        Ok(ParsingFrame { height, width, labels })
    }

    pub fn background(height: usize, width: usize) -> Result<Self, FrameError> {
        Self::new(height, width, vec![0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.labels[row * self.width + col]
    }

    /// Collapses all part labels onto label 1, producing a silhouette.
    pub fn binarize(&self) -> ParsingFrame {
        ParsingFrame {
            height: self.height,
            width: self.width,
            labels: self.labels.iter().map(|&l| u8::from(l > 0)).collect(),
        }
    }

    /// Nearest-neighbor resampling: output pixel (r, c) takes the label at
    /// the input pixel whose center is nearest to the mapped position
    /// (pixel-center convention, `src = floor((dst + 0.5) * in / out)`).
    /// Never introduces labels absent from the input; resizing to the same
    /// size is the identity.
    pub fn resize(&self, out_h: usize, out_w: usize) -> Result<ParsingFrame, FrameError> {
        if out_h == 0 || out_w == 0 {
            return Err(FrameError::BadResizeTarget(out_h, out_w));
        }
        let map = |dst: usize, input: usize, output: usize| -> usize {
            let src = ((dst as f64 + 0.5) * input as f64 / output as f64) as usize;
            src.min(input - 1)
        };
        let mut labels = Vec::with_capacity(out_h * out_w);
        for r in 0..out_h {
            let sr = map(r, self.height, out_h);
            for c in 0..out_w {
                let sc = map(c, self.width, out_w);
                labels.push(self.labels[sr * self.width + sc]);
            }
        }
        Ok(ParsingFrame { height: out_h, width: out_w, labels })
    }

    pub fn histogram(&self) -> LabelHistogram {
        let mut counts = vec![0u64; NUM_CLASSES];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        LabelHistogram::new(counts)
    }
}

/// An ordered sequence of parsing frames plus identity metadata. All frames
/// share one spatial size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaitParsingSequence {
    pub subject_id: String,
    pub sequence_id: String,
    pub camera_id: String,
    frames: Vec<ParsingFrame>,
}

impl GaitParsingSequence {
    pub fn new(
        subject_id: impl Into<String>,
        sequence_id: impl Into<String>,
        camera_id: impl Into<String>,
        frames: Vec<ParsingFrame>,
    ) -> Result<Self, FrameError> {
        if frames.is_empty() {
            return Err(FrameError::EmptySequence);
        }
        let (h, w) = (frames[0].height, frames[0].width);
        for (i, f) in frames.iter().enumerate() {
            if f.height != h || f.width != w {
                return Err(FrameError::FrameSizeMismatch {
                    index: i,
                    h,
                    w,
                    got_h: f.height,
                    got_w: f.width,
                });
            }
        }
        Ok(GaitParsingSequence {
            subject_id: subject_id.into(),
            sequence_id: sequence_id.into(),
            camera_id: camera_id.into(),
            frames,
        })
    }

    pub fn frames(&self) -> &[ParsingFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn histogram(&self) -> LabelHistogram {
        let mut counts = vec![0u64; NUM_CLASSES];
        for f in &self.frames {
            for &l in &f.labels {
                counts[l as usize] += 1;
            }
        }
        LabelHistogram::new(counts)
    }
}

/// Per-label pixel counts over a frame, a sequence, or a whole dataset.
/// The class count is the vector length, so histograms over taxonomies
/// other than the built-in 12 classes are representable as well.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelHistogram {
    counts: Vec<u64>,
    total: u64,
}

impl LabelHistogram {
    pub fn new(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        LabelHistogram { counts, total }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn merge(&mut self, other: &LabelHistogram) {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, &b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.total as f64).collect()
    }
}

/// Counts label occurrences. See [`ParsingFrame::histogram`] and
/// [`GaitParsingSequence::histogram`] for the method forms.
pub fn label_histogram(frame: &ParsingFrame) -> LabelHistogram {
    frame.histogram()
}

/// Shannon entropy in bits of the label distribution:
/// `-sum_k p_k * log2(p_k)` over labels with nonzero count.
pub fn entropy_bits(hist: &LabelHistogram) -> Result<f64, FrameError> {
    if hist.total == 0 {
        return Err(FrameError::EmptyHistogram);
    }
    let total = hist.total as f64;
    let mut h = 0.0;
    for &c in &hist.counts {
        if c == 0 {
            continue;
        }
        let p = c as f64 / total;
        h -= p * p.log2();
    }
    Ok(h)
}

/// One-hot encoding of a frame: channel `k` is 1 where the label equals `k`,
/// so per-pixel channel sums are exactly 1. Output shape is (k x H x W).
pub fn one_hot<T: Elem>(frame: &ParsingFrame, k: usize) -> Result<Tensor<T>, FrameError> {
    if let Some(&bad) = frame.labels.iter().find(|&&l| (l as usize) >= k) {
        return Err(FrameError::LabelOutOfRange { label: bad, k });
    }
    let plane = frame.height * frame.width;
    let mut data = vec![T::zero(); k * plane];
    for (i, &l) in frame.labels.iter().enumerate() {
        data[l as usize * plane + i] = T::one();
    }
    Tensor::from_vec(vec![k, frame.height, frame.width], data)
        .map_err(|_| FrameError::BufferSize { expected: k * plane, got: 0 })
}

/// Scalar-intensity encoding: one channel with value `label / (k - 1)`.
pub fn scalar_encode<T: Elem>(frame: &ParsingFrame, k: usize) -> Result<Tensor<T>, FrameError> {
    if k < 2 {
        return Err(FrameError::LabelOutOfRange { label: 0, k });
    }
    if let Some(&bad) = frame.labels.iter().find(|&&l| (l as usize) >= k) {
        return Err(FrameError::LabelOutOfRange { label: bad, k });
    }
    let denom = T::from_usize(k - 1);
    let data: Vec<T> = frame.labels.iter().map(|&l| T::from_usize(l as usize) / denom).collect();
    Tensor::from_vec(vec![1, frame.height, frame.width], data)
        .map_err(|_| FrameError::BufferSize { expected: frame.labels.len(), got: 0 })
}
