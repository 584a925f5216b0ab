//! Token-drop bitrate control, channel-loss masking and the diagnostic wire
//! format for transmitted frames.
//!
//! A frame of `h x w` semantic indices costs `h * w * log2(S)` bits, so
//! dropping single indices adjusts the frame size in steps of `log2(S)` bits.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::vq::IndexFrame;
use crate::{rng_from_seed, Error, Result};

/// Bits carried by one index of a codebook with `s` entries.
pub fn bits_per_token(s: usize) -> Result<u32> {
    if s >= 2 && s.is_power_of_two() {
        Ok(s.trailing_zeros())
    } else {
        Err(Error::InvalidCodebookSize(s))
    }
}

pub fn bits_per_frame(h: usize, w: usize, s: usize) -> Result<u64> {
    Ok((h * w) as u64 * bits_per_token(s)? as u64)
}

/// Chunk size in bits for bitrate `v` over a slot of `slot_s` seconds.
pub fn chunk_size(v: f64, slot_s: f64) -> f64 {
    v * slot_s
}

/// Snaps a bitrate to the one-token-per-slot grid (`log2 S / slot` bit/s
/// steps), staying inside `[v_min, v_max]`.
pub fn snap_bitrate(v: f64, s: usize, slot_s: f64, v_min: f64, v_max: f64) -> Result<f64> {
    let step = bits_per_token(s)? as f64 / slot_s;
    let lo = (v_min / step).ceil();
    let hi = (v_max / step).floor();
    if lo > hi {
        return Err(Error::InvalidParameter(format!(
            "bitrate bounds [{v_min}, {v_max}] contain no grid point of step {step}"
        )));
    }
    Ok((v / step).round().clamp(lo, hi) * step)
}

/// A frame of indices in which some positions were dropped or lost.
///
/// Dropped positions hold the sentinel `S`, one past the last valid index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedIndexFrame {
    h: usize,
    w: usize,
    codebook_size: usize,
    indices: Vec<u32>,
    dropped: Vec<bool>,
}

impl MaskedIndexFrame {
    /// Every position received.
    pub fn full(frame: &IndexFrame, codebook_size: usize) -> Result<Self> {
        Self::with_mask(frame, codebook_size, vec![false; frame.len()])
    }

    pub fn with_mask(frame: &IndexFrame, codebook_size: usize, dropped: Vec<bool>) -> Result<Self> {
        if dropped.len() != frame.len() {
            return Err(Error::DimensionMismatch {
                expected: frame.len(),
                actual: dropped.len(),
            });
        }
        if !frame.valid_for(codebook_size) {
            return Err(Error::InvalidParameter("index out of codebook range".into()));
        }
        let sentinel = codebook_size as u32;
        let indices = frame
            .indices()
            .iter()
            .zip(&dropped)
            .map(|(&s, &d)| if d { sentinel } else { s })
            .collect();
        Ok(Self {
            h: frame.height(),
            w: frame.width(),
            codebook_size,
            indices,
            dropped,
        })
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn codebook_size(&self) -> usize {
        self.codebook_size
    }

    pub fn sentinel(&self) -> u32 {
        self.codebook_size as u32
    }

    /// Raw indices, sentinel at dropped positions.
    pub fn raw_indices(&self) -> &[u32] {
        &self.indices
    }

    /// Mask with `true` marking a dropped position.
    pub fn mask(&self) -> &[bool] {
        &self.dropped
    }

    pub fn is_dropped(&self, pos: usize) -> bool {
        self.dropped[pos]
    }

    pub fn index(&self, pos: usize) -> Option<u32> {
        (!self.dropped[pos]).then_some(self.indices[pos])
    }

    pub fn received_count(&self) -> usize {
        self.dropped.iter().filter(|&&d| !d).count()
    }

    pub fn dropped_count(&self) -> usize {
        self.len() - self.received_count()
    }

    /// Bits spent on the received indices.
    pub fn payload_bits(&self) -> u64 {
        self.received_count() as u64 * self.codebook_size.trailing_zeros() as u64
    }

    fn drop_position(&mut self, pos: usize) {
        self.dropped[pos] = true;
        self.indices[pos] = self.codebook_size as u32;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropMode {
    /// Uniform spatial decimation in row-major order.
    #[default]
    Stride,
    /// Uniform sample without replacement under the plan seed.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DropPlan {
    pub keep_count: usize,
    pub mode: DropMode,
    pub seed: u64,
}

impl DropPlan {
    pub fn for_budget(cells: usize, s: usize, target_bits: f64, mode: DropMode, seed: u64) -> Result<Self> {
        if !(target_bits >= 0.0) {
            return Err(Error::InvalidParameter(format!("target bits {target_bits} < 0")));
        }
        let per_token = bits_per_token(s)? as f64;
        let affordable = (target_bits / per_token).floor();
        let keep_count = if affordable >= cells as f64 {
            cells
        } else {
            affordable as usize
        };
        Ok(Self {
            keep_count,
            mode,
            seed,
        })
    }

    /// Row-major positions kept by this plan, sorted.
    pub fn kept_positions(&self, cells: usize) -> Vec<usize> {
        let keep = self.keep_count.min(cells);
        let mut kept = vec![false; cells];
        match self.mode {
            DropMode::Stride => {
                for j in 0..keep {
                    let mut pos = ((j * cells) as f64 / keep as f64).round() as usize;
                    if pos >= cells {
                        pos = 0;
                    }
                    while kept[pos] {
                        pos = (pos + 1) % cells;
                    }
                    kept[pos] = true;
                }
            }
            DropMode::Random => {
                let mut rng = rng_from_seed(self.seed);
                for pos in sample_indices(&mut rng, cells, keep) {
                    kept[pos] = true;
                }
            }
        }
        kept.iter()
            .enumerate()
            .filter_map(|(p, &k)| k.then_some(p))
            .collect()
    }
}

/// Drops indices of `frame` until its payload fits `target_bits`.
pub fn plan_drops(
    frame: &IndexFrame,
    codebook_size: usize,
    target_bits: f64,
    mode: DropMode,
    seed: u64,
) -> Result<MaskedIndexFrame> {
    let cells = frame.len();
    let plan = DropPlan::for_budget(cells, codebook_size, target_bits, mode, seed)?;
    let mut dropped = vec![true; cells];
    for pos in plan.kept_positions(cells) {
        dropped[pos] = false;
    }
    MaskedIndexFrame::with_mask(frame, codebook_size, dropped)
}

/// Independently loses each received index with probability `p`.
///
/// One uniform draw is consumed per position, received or not, so that the
/// loss pattern for a given stream is nested across increasing `p`.
pub fn apply_channel_loss<R: Rng + ?Sized>(
    frame: &MaskedIndexFrame,
    p: f64,
    rng: &mut R,
) -> Result<MaskedIndexFrame> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("loss probability {p} outside [0, 1]")));
    }
    let mut out = frame.clone();
    for pos in 0..out.len() {
        let u: f64 = rng.random();
        if u < p && !out.is_dropped(pos) {
            out.drop_position(pos);
        }
    }
    Ok(out)
}

pub const TRAINING_DROP_MEAN: f64 = 0.3;
pub const TRAINING_DROP_VARIANCE: f64 = 0.3;
pub const TRAINING_DROP_MAX: f64 = 0.6;

/// Drop probability drawn from a normal with mean 0.3 and variance 0.3,
/// truncated to `[0, 0.6]` by rejection.
pub fn sample_training_drop_rate<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let normal = Normal::new(TRAINING_DROP_MEAN, TRAINING_DROP_VARIANCE.sqrt()).unwrap();
    loop {
        let v = normal.sample(rng);
        if (0.0..=TRAINING_DROP_MAX).contains(&v) {
            return v;
        }
    }
}

// Diagnostic wire format. Header: varints frame_id, h, w, S, keep_count.
// Body: per kept position a row-major varint followed by the index in
// log2(S) bits, MSB first, all bit-packed and zero-padded to a byte.

struct BitWriter {
    bytes: Vec<u8>,
    bit: u32,
}

impl BitWriter {
    fn new() -> Self {
        Self { bytes: Vec::new(), bit: 0 }
    }

    fn push_bits(&mut self, value: u64, width: u32) {
        for k in (0..width).rev() {
            if self.bit == 0 {
                self.bytes.push(0);
            }
            if (value >> k) & 1 == 1 {
                let last = self.bytes.last_mut().unwrap();
                *last |= 0x80 >> self.bit;
            }
            self.bit = (self.bit + 1) % 8;
        }
    }

    fn push_varint(&mut self, mut v: u64) {
        loop {
            let group = v & 0x7f;
            v >>= 7;
            if v == 0 {
                self.push_bits(group, 8);
                return;
            }
            self.push_bits(group | 0x80, 8);
        }
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    fn read_bits(&mut self, width: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..width {
            let byte = *self
                .bytes
                .get(self.pos / 8)
                .ok_or_else(|| Error::format("frame", "truncated"))?;
            let b = (byte >> (7 - (self.pos % 8))) & 1;
            v = (v << 1) | b as u64;
            self.pos += 1;
        }
        Ok(v)
    }

    fn read_varint(&mut self) -> Result<u64> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let group = self.read_bits(8)?;
            v |= (group & 0x7f) << shift;
            if group & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(Error::format("frame", "varint overflow"))
    }
}

/// Encodes the received indices of `frame` for transmission.
pub fn encode_frame(frame_id: u64, frame: &MaskedIndexFrame) -> Vec<u8> {
    let width = frame.codebook_size.trailing_zeros();
    let mut w = BitWriter::new();
    for v in [
        frame_id,
        frame.h as u64,
        frame.w as u64,
        frame.codebook_size as u64,
        frame.received_count() as u64,
    ] {
        w.push_varint(v);
    }
    for pos in 0..frame.len() {
        if let Some(s) = frame.index(pos) {
            w.push_varint(pos as u64);
            w.push_bits(s as u64, width);
        }
    }
    w.bytes
}

/// Inverse of [`encode_frame`].
pub fn decode_frame(bytes: &[u8]) -> Result<(u64, MaskedIndexFrame)> {
    let mut r = BitReader { bytes, pos: 0 };
    let frame_id = r.read_varint()?;
    let h = r.read_varint()? as usize;
    let w = r.read_varint()? as usize;
    let s = r.read_varint()? as usize;
    let keep = r.read_varint()? as usize;
    let width = bits_per_token(s)?;
    let cells = h
        .checked_mul(w)
        .filter(|&c| c > 0)
        .ok_or_else(|| Error::format("frame", "bad dimensions"))?;
    if keep > cells {
        return Err(Error::format("frame", "keep count exceeds frame size"));
    }
    let mut indices = vec![0u32; cells];
    let mut dropped = vec![true; cells];
    for _ in 0..keep {
        let pos = r.read_varint()? as usize;
        let idx = r.read_bits(width)? as u32;
        if pos >= cells || !dropped[pos] {
            return Err(Error::format("frame", "bad or repeated position"));
        }
        indices[pos] = idx;
        dropped[pos] = false;
    }
    if r.pos.div_ceil(8) != bytes.len() {
        return Err(Error::format("frame", "trailing bytes"));
    }
    let frame = IndexFrame::new(h, w, indices)?;
    Ok((frame_id, MaskedIndexFrame::with_mask(&frame, s, dropped)?))
}
