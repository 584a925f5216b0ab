//! Recovery of dropped indices of the newest frame from a sliding window of
//! masked frames.

use std::collections::VecDeque;

use crate::stream::MaskedIndexFrame;
use crate::vq::IndexFrame;
use crate::{Error, Result};

/// The last `N` masked frames of one stream, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameWindow {
    capacity: usize,
    frames: VecDeque<MaskedIndexFrame>,
}

impl FrameWindow {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidParameter("window length must be >= 1".into()));
        }
        Ok(Self {
            capacity,
            frames: VecDeque::with_capacity(capacity),
        })
    }

    pub fn from_frames(frames: Vec<MaskedIndexFrame>) -> Result<Self> {
        let mut window = Self::new(frames.len())?;
        for f in frames {
            window.push(f)?;
        }
        Ok(window)
    }

    /// Appends the newest frame, evicting the oldest once full.
    pub fn push(&mut self, frame: MaskedIndexFrame) -> Result<()> {
        if let Some(first) = self.frames.front() {
            if first.height() != frame.height()
                || first.width() != frame.width()
                || first.codebook_size() != frame.codebook_size()
            {
                return Err(Error::ShapeMismatch("window frames must share (h, w, S)".into()));
            }
        }
        if self.frames.len() == self.capacity {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
        Ok(())
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn newest(&self) -> Option<&MaskedIndexFrame> {
        self.frames.back()
    }

    pub fn frames(&self) -> impl DoubleEndedIterator<Item = &MaskedIndexFrame> {
        self.frames.iter()
    }
}

/// A strategy that fills the dropped positions of the newest frame.
///
/// Implementations must pass received positions of the newest frame
/// through unchanged.
pub trait Recoverer {
    fn recover(&mut self, window: &FrameWindow) -> Result<IndexFrame>;
}

/// Temporal hold with spatial fallback.
///
/// A dropped position takes its most recent received value from earlier
/// frames in the window; failing that, the value of the nearest received
/// position of the newest frame (Manhattan distance, ties to the lowest
/// row-major position); failing that, the previously recovered frame's
/// value; and finally index 0.
pub fn temporal_hold_recover(window: &FrameWindow, previous: Option<&IndexFrame>) -> Result<IndexFrame> {
    let newest = window
        .newest()
        .ok_or(Error::EmptyInput("recovery window"))?;
    let (h, w) = (newest.height(), newest.width());
    if let Some(prev) = previous {
        if prev.height() != h || prev.width() != w {
            return Err(Error::ShapeMismatch("previous recovered frame shape".into()));
        }
    }
    let received: Vec<usize> = (0..newest.len()).filter(|&p| !newest.is_dropped(p)).collect();
    let mut out = Vec::with_capacity(newest.len());
    for pos in 0..newest.len() {
        if let Some(s) = newest.index(pos) {
            out.push(s);
            continue;
        }
        let held = window.frames().rev().skip(1).find_map(|f| f.index(pos));
        let value = held
            .or_else(|| nearest_received(pos, w, &received).and_then(|q| newest.index(q)))
            .or_else(|| previous.map(|p| p.indices()[pos]))
            .unwrap_or(0);
        out.push(value);
    }
    IndexFrame::new(h, w, out)
}

fn nearest_received(pos: usize, w: usize, received: &[usize]) -> Option<usize> {
    let (r, c) = (pos / w, pos % w);
    // `received` is ascending, so min_by_key keeps the lowest position on ties.
    received
        .iter()
        .copied()
        .min_by_key(|&q| (q / w).abs_diff(r) + (q % w).abs_diff(c))
}

/// Stateful [`temporal_hold_recover`] for one stream.
#[derive(Debug, Clone, Default)]
pub struct TemporalHold {
    previous: Option<IndexFrame>,
}

impl TemporalHold {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn previous(&self) -> Option<&IndexFrame> {
        self.previous.as_ref()
    }
}

impl Recoverer for TemporalHold {
    fn recover(&mut self, window: &FrameWindow) -> Result<IndexFrame> {
        let out = temporal_hold_recover(window, self.previous.as_ref())?;
        self.previous = Some(out.clone());
        Ok(out)
    }
}

/// Per-position categorical distribution over the `S` indices.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedDistribution {
    h: usize,
    w: usize,
    classes: usize,
    probs: Vec<f64>,
}

const NORMALIZATION_TOL: f64 = 1e-6;
const PROB_FLOOR: f64 = 1e-12;

impl PredictedDistribution {
    pub fn new(h: usize, w: usize, classes: usize, probs: Vec<f64>) -> Result<Self> {
        if h == 0 || w == 0 || classes == 0 {
            return Err(Error::ShapeMismatch("distribution dims must be >= 1".into()));
        }
        if probs.len() != h * w * classes {
            return Err(Error::DimensionMismatch {
                expected: h * w * classes,
                actual: probs.len(),
            });
        }
        for row in probs.chunks(classes) {
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::InvalidParameter("negative or NaN probability".into()));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::InvalidParameter(format!("row sums to {total}")));
            }
        }
        Ok(Self { h, w, classes, probs })
    }

    pub fn uniform(h: usize, w: usize, classes: usize) -> Self {
        Self {
            h,
            w,
            classes,
            probs: vec![1.0 / classes as f64; h * w * classes],
        }
    }

    pub fn one_hot(frame: &IndexFrame, classes: usize) -> Result<Self> {
        let mut probs = vec![0.0; frame.len() * classes];
        for (pos, &s) in frame.indices().iter().enumerate() {
            let s = s as usize;
            if s >= classes {
                return Err(Error::InvalidParameter(format!("index {s} >= {classes}")));
            }
            probs[pos * classes + s] = 1.0;
        }
        Self::new(frame.height(), frame.width(), classes, probs)
    }

    pub fn prob(&self, pos: usize, class: usize) -> f64 {
        self.probs[pos * self.classes + class]
    }
}

/// `-sum m_ij ln p(truth_ij)` over the masked positions.
pub fn masked_cross_entropy(pred: &PredictedDistribution, truth: &IndexFrame, mask: &[bool]) -> Result<f64> {
    if pred.h != truth.height() || pred.w != truth.width() || mask.len() != truth.len() {
        return Err(Error::ShapeMismatch("prediction, truth and mask must agree".into()));
    }
    let mut loss = 0.0;
    for (pos, (&s, &m)) in truth.indices().iter().zip(mask).enumerate() {
        if !m {
            continue;
        }
        let s = s as usize;
        if s >= pred.classes {
            return Err(Error::InvalidParameter(format!("truth index {s} >= {}", pred.classes)));
        }
        loss -= pred.prob(pos, s).max(PROB_FLOOR).ln();
    }
    Ok(loss)
}

/// Fraction of masked positions recovered exactly; 1.0 for an empty mask.
pub fn recovery_accuracy(recovered: &IndexFrame, truth: &IndexFrame, mask: &[bool]) -> Result<f64> {
    if recovered.height() != truth.height() || recovered.width() != truth.width() || mask.len() != truth.len() {
        return Err(Error::ShapeMismatch("recovered, truth and mask must agree".into()));
    }
    let (mut hits, mut total) = (0usize, 0usize);
    for ((a, b), &m) in recovered.indices().iter().zip(truth.indices()).zip(mask) {
        if m {
            total += 1;
            hits += usize::from(a == b);
        }
    }
    Ok(if total == 0 { 1.0 } else { hits as f64 / total as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn masked(h: usize, w: usize, idx: Vec<u32>, dropped: Vec<bool>) -> MaskedIndexFrame {
        MaskedIndexFrame::with_mask(&IndexFrame::new(h, w, idx).unwrap(), 16, dropped).unwrap()
    }

    #[test]
    fn zero_mask_is_identity() {
        let f = masked(2, 2, vec![1, 2, 3, 4], vec![false; 4]);
        let window = FrameWindow::from_frames(vec![f.clone()]).unwrap();
        let out = temporal_hold_recover(&window, None).unwrap();
        assert_eq!(out.indices(), &[1, 2, 3, 4]);
    }

    #[test]
    fn static_sequence_recovers_exactly() {
        let truth = vec![5, 6, 7, 8];
        let frames = vec![
            masked(2, 2, truth.clone(), vec![false, true, false, true]),
            masked(2, 2, truth.clone(), vec![true, false, true, false]),
            masked(2, 2, truth.clone(), vec![true, true, true, false]),
        ];
        let window = FrameWindow::from_frames(frames).unwrap();
        let out = temporal_hold_recover(&window, None).unwrap();
        let t = IndexFrame::new(2, 2, truth).unwrap();
        assert_eq!(recovery_accuracy(&out, &t, window.newest().unwrap().mask()).unwrap(), 1.0);
    }

    #[test]
    fn spatial_fallback() {
        let frames = vec![
            masked(2, 2, vec![0, 3, 3, 3], vec![true, false, false, false]),
            masked(2, 2, vec![0, 7, 9, 9], vec![true, false, true, true]),
        ];
        let window = FrameWindow::from_frames(frames).unwrap();
        let out = temporal_hold_recover(&window, None).unwrap();
        assert_eq!(out.get(0, 0), 7);
        // (1,0) and (1,1) were received earlier.
        assert_eq!(out.get(1, 0), 3);
        assert_eq!(out.get(1, 1), 3);
    }

    #[test]
    fn spatial_tie_breaks_low() {
        // (1,1) is masked everywhere; (0,1) and (1,0) are both at distance 1.
        let f = masked(2, 2, vec![9, 4, 2, 0], vec![true, false, false, true]);
        let window = FrameWindow::from_frames(vec![f]).unwrap();
        let out = temporal_hold_recover(&window, None).unwrap();
        assert_eq!(out.get(1, 1), 4);
        assert_eq!(out.get(0, 0), 4);
    }

    #[test]
    fn history_and_default_fallbacks() {
        let f = masked(1, 2, vec![0, 0], vec![true, true]);
        let window = FrameWindow::from_frames(vec![f]).unwrap();
        assert_eq!(temporal_hold_recover(&window, None).unwrap().indices(), &[0, 0]);
        let prev = IndexFrame::new(1, 2, vec![11, 12]).unwrap();
        assert_eq!(temporal_hold_recover(&window, Some(&prev)).unwrap().indices(), &[11, 12]);

        let mut hold = TemporalHold::new();
        let full = masked(1, 2, vec![3, 4], vec![false, false]);
        let mut window = FrameWindow::new(1).unwrap();
        window.push(full).unwrap();
        hold.recover(&window).unwrap();
        window.push(masked(1, 2, vec![0, 0], vec![true, true])).unwrap();
        assert_eq!(window.len(), 1);
        assert_eq!(hold.recover(&window).unwrap().indices(), &[3, 4]);
    }

    #[test]
    fn window_checks() {
        assert!(FrameWindow::new(0).is_err());
        let mut w = FrameWindow::new(2).unwrap();
        assert!(temporal_hold_recover(&w, None).is_err());
        w.push(masked(1, 2, vec![0, 0], vec![false, false])).unwrap();
        assert!(w.push(masked(2, 1, vec![0, 0], vec![false, false])).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let truth = IndexFrame::new(1, 3, vec![0, 1, 2]).unwrap();
        let mask = [true, true, true];
        let one_hot = PredictedDistribution::one_hot(&truth, 4).unwrap();
        assert_eq!(masked_cross_entropy(&one_hot, &truth, &mask).unwrap(), 0.0);
        let uniform = PredictedDistribution::uniform(1, 3, 4);
        let ce = masked_cross_entropy(&uniform, &truth, &mask).unwrap();
        assert!((ce - 4.1588830833596715).abs() < 1e-12);
        assert_eq!(masked_cross_entropy(&uniform, &truth, &[false; 3]).unwrap(), 0.0);

        let wrong = PredictedDistribution::one_hot(&IndexFrame::new(1, 3, vec![3, 3, 3]).unwrap(), 4).unwrap();
        let ce = masked_cross_entropy(&wrong, &truth, &mask).unwrap();
        assert!((ce - 3.0 * -(1e-12f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn distribution_validation() {
        assert!(PredictedDistribution::new(1, 1, 2, vec![0.5, 0.6]).is_err());
        assert!(PredictedDistribution::new(1, 1, 2, vec![-0.5, 1.5]).is_err());
        assert!(PredictedDistribution::new(1, 1, 2, vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn accuracy_examples() {
        let t = IndexFrame::new(2, 2, vec![1, 2, 3, 4]).unwrap();
        assert_eq!(recovery_accuracy(&t, &t, &[true; 4]).unwrap(), 1.0);
        let wrong = IndexFrame::new(2, 2, vec![0, 0, 0, 0]).unwrap();
        assert_eq!(recovery_accuracy(&wrong, &t, &[true; 4]).unwrap(), 0.0);
        let most = IndexFrame::new(2, 2, vec![1, 2, 3, 0]).unwrap();
        assert_eq!(recovery_accuracy(&most, &t, &[true; 4]).unwrap(), 0.75);
        assert_eq!(recovery_accuracy(&wrong, &t, &[false; 4]).unwrap(), 1.0);
    }
}
