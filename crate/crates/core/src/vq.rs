//! EMA vector quantization over semantic feature grids.
//!
//! A [`Codebook`] holds `K` embedding vectors together with the exponential
//! moving averages of their cluster sizes and embedding sums. Entries are
//! refreshed as the ratio of the embedding sum to the Laplace-smoothed
//! cluster size.

use rand::Rng;
use rand_distr::StandardNormal;
use std::path::Path;

use crate::{Error, Result};

/// Dense `h x w x n_z` grid of feature vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    h: usize,
    w: usize,
    dim: usize,
    values: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(h: usize, w: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if h == 0 || w == 0 || dim == 0 {
            return Err(Error::ShapeMismatch("feature grid dims must be >= 1".into()));
        }
        if values.len() != h * w * dim {
            return Err(Error::DimensionMismatch {
                expected: h * w * dim,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("feature grid has non-finite values".into()));
        }
        Ok(Self { h, w, dim, values })
    }

    pub fn zeros(h: usize, w: usize, dim: usize) -> Self {
        Self {
            h,
            w,
            dim,
            values: vec![0.0; h * w * dim],
        }
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> usize {
        self.h * self.w
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Feature vector of the cell at row-major position `pos`.
    pub fn cell(&self, pos: usize) -> &[f64] {
        &self.values[pos * self.dim..(pos + 1) * self.dim]
    }

    pub fn at(&self, i: usize, j: usize) -> &[f64] {
        self.cell(i * self.w + j)
    }

    fn same_shape(&self, other: &FeatureGrid) -> bool {
        self.h == other.h && self.w == other.w && self.dim == other.dim
    }
}

/// Grid of codebook indices, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexFrame {
    h: usize,
    w: usize,
    indices: Vec<u32>,
}

impl IndexFrame {
    pub fn new(h: usize, w: usize, indices: Vec<u32>) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::ShapeMismatch("index frame dims must be >= 1".into()));
        }
        if indices.len() != h * w {
            return Err(Error::DimensionMismatch {
                expected: h * w,
                actual: indices.len(),
            });
        }
        Ok(Self { h, w, indices })
    }

    pub fn filled(h: usize, w: usize, index: u32) -> Self {
        Self {
            h,
            w,
            indices: vec![index; h * w],
        }
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

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.indices[i * self.w + j]
    }

    /// True when every index is below `k`.
    pub fn valid_for(&self, k: usize) -> bool {
        self.indices.iter().all(|&s| (s as usize) < k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    size: usize,
    dim: usize,
    entries: Vec<f64>,
    cluster_size: Vec<f64>,
    embedding_sum: Vec<f64>,
    decay: f64,
    epsilon: f64,
}

impl Codebook {
    pub fn from_parts(
        entries: Vec<Vec<f64>>,
        cluster_size: Vec<f64>,
        embedding_sum: Vec<Vec<f64>>,
        decay: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let size = entries.len();
        if size < 2 {
            return Err(Error::InvalidParameter("codebook needs K >= 2".into()));
        }
        let dim = entries[0].len();
        if dim == 0 {
            return Err(Error::InvalidParameter("codebook dimension must be >= 1".into()));
        }
        if cluster_size.len() != size || embedding_sum.len() != size {
            return Err(Error::LengthMismatch("codebook statistics length differs from K".into()));
        }
        for row in entries.iter().chain(&embedding_sum) {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
        }
        let cb = Self {
            size,
            dim,
            entries: entries.concat(),
            cluster_size,
            embedding_sum: embedding_sum.concat(),
            decay,
            epsilon,
        };
        cb.validate()?;
        Ok(cb)
    }

    /// Entries drawn i.i.d. standard normal; unit cluster sizes and
    /// embedding sums equal to the entries.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        size: usize,
        dim: usize,
        decay: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if size < 2 || dim == 0 {
            return Err(Error::InvalidParameter("codebook needs K >= 2 and n_z >= 1".into()));
        }
        let entries: Vec<f64> = (0..size * dim).map(|_| rng.sample(StandardNormal)).collect();
        let cb = Self {
            size,
            dim,
            embedding_sum: entries.clone(),
            entries,
            cluster_size: vec![1.0; size],
            decay,
            epsilon,
        };
        cb.validate()?;
        Ok(cb)
    }

    fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::InvalidParameter("ema decay must lie in (0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("smoothing epsilon must be > 0".into()));
        }
        if self.cluster_size.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(Error::InvalidParameter("cluster sizes must be finite and >= 0".into()));
        }
        if self.entries.iter().chain(&self.embedding_sum).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("codebook has non-finite values".into()));
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn entry(&self, k: usize) -> &[f64] {
        &self.entries[k * self.dim..(k + 1) * self.dim]
    }

    pub fn cluster_size(&self) -> &[f64] {
        &self.cluster_size
    }

    pub fn embedding_sum(&self, k: usize) -> &[f64] {
        &self.embedding_sum[k * self.dim..(k + 1) * self.dim]
    }

    /// Nearest entry to `v`; ties go to the lowest index.
    pub fn nearest(&self, v: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for k in 0..self.size {
            let d: f64 = self
                .entry(k)
                .iter()
                .zip(v)
                .map(|(e, x)| (x - e) * (x - e))
                .sum();
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }

    /// One EMA step using fresh `assignments` of the cells of `z`.
    ///
    /// Statistics are kept unsmoothed; only the entries see the smoothed
    /// cluster sizes. When every cluster size is zero the entries keep their
    /// values.
    pub fn ema_update(&mut self, z: &FeatureGrid, assignments: &IndexFrame) -> Result<()> {
        if z.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: z.dim(),
            });
        }
        if z.height() != assignments.height() || z.width() != assignments.width() {
            return Err(Error::ShapeMismatch("assignments do not cover the feature grid".into()));
        }
        if !assignments.valid_for(self.size) {
            return Err(Error::InvalidParameter("assignment index out of range".into()));
        }
        let mut counts = vec![0.0; self.size];
        let mut sums = vec![0.0; self.size * self.dim];
        for (pos, &k) in assignments.indices().iter().enumerate() {
            let k = k as usize;
            counts[k] += 1.0;
            for (s, x) in sums[k * self.dim..(k + 1) * self.dim].iter_mut().zip(z.cell(pos)) {
                *s += x;
            }
        }
        let g = self.decay;
        for (c, n) in self.cluster_size.iter_mut().zip(&counts) {
            *c = g * *c + (1.0 - g) * n;
        }
        for (w, s) in self.embedding_sum.iter_mut().zip(&sums) {
            *w = g * *w + (1.0 - g) * s;
        }
        match laplace_smooth(&self.cluster_size, self.epsilon) {
            Ok(smoothed) => {
                for (k, ck) in smoothed.iter().enumerate() {
                    for d in 0..self.dim {
                        self.entries[k * self.dim + d] = self.embedding_sum[k * self.dim + d] / ck;
                    }
                }
                Ok(())
            }
            Err(Error::ZeroStatistics) => Ok(()),
            Err(e) => Err(e),
        }
    }

    /// Mean squared distance from each cell to its nearest entry.
    pub fn distortion(&self, z: &FeatureGrid) -> Result<f64> {
        let (_, zq) = quantize(z, self)?;
        Ok(mean_squared_error(z.values(), zq.values()))
    }

    const MAGIC: &'static [u8; 4] = b"EVQC";
    const VERSION: u32 = 1;

    /// Little-endian binary record: magic, version, K, n_z, decay, epsilon,
    /// entries, cluster sizes, embedding sums.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + 8 * (self.entries.len() * 2 + self.size));
        out.extend_from_slice(Self::MAGIC);
        out.extend_from_slice(&Self::VERSION.to_le_bytes());
        out.extend_from_slice(&(self.size as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u64).to_le_bytes());
        for v in [self.decay, self.epsilon]
            .iter()
            .chain(&self.entries)
            .chain(&self.cluster_size)
            .chain(&self.embedding_sum)
        {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "codebook");
        if r.take(4)? != Self::MAGIC {
            return Err(Error::format("codebook", "bad magic"));
        }
        let version = r.u32()?;
        if version != Self::VERSION {
            return Err(Error::format("codebook", format!("unsupported version {version}")));
        }
        let size = r.u64()? as usize;
        let dim = r.u64()? as usize;
        let decay = r.f64()?;
        let epsilon = r.f64()?;
        let entries = r.f64_vec(size * dim)?;
        let cluster_size = r.f64_vec(size)?;
        let embedding_sum = r.f64_vec(size * dim)?;
        r.finish()?;
        let cb = Self {
            size,
            dim,
            entries,
            cluster_size,
            embedding_sum,
            decay,
            epsilon,
        };
        if size < 2 || dim == 0 {
            return Err(Error::format("codebook", "K must be >= 2 and n_z >= 1"));
        }
        cb.validate()?;
        Ok(cb)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Little-endian cursor shared by the binary formats in this crate.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    kind: &'static str,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8], kind: &'static str) -> Self {
        Self { bytes, pos: 0, kind }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format(self.kind, "truncated"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        if n > (self.bytes.len() - self.pos) / 8 {
            return Err(Error::format(self.kind, "truncated"));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub(crate) fn finish(self) -> Result<()> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(Error::format(self.kind, "trailing bytes"))
        }
    }
}

/// Nearest-entry quantization of every cell of `z`.
pub fn quantize(z: &FeatureGrid, cb: &Codebook) -> Result<(IndexFrame, FeatureGrid)> {
    if z.dim() != cb.dim() {
        return Err(Error::DimensionMismatch {
            expected: cb.dim(),
            actual: z.dim(),
        });
    }
    let mut indices = Vec::with_capacity(z.cells());
    let mut values = Vec::with_capacity(z.values().len());
    for pos in 0..z.cells() {
        let k = cb.nearest(z.cell(pos));
        indices.push(k as u32);
        values.extend_from_slice(cb.entry(k));
    }
    Ok((
        IndexFrame {
            h: z.height(),
            w: z.width(),
            indices,
        },
        FeatureGrid {
            h: z.height(),
            w: z.width(),
            dim: z.dim(),
            values,
        },
    ))
}

/// Laplace smoothing of cluster sizes: `(c_k + eps) / (n + K eps) * n`.
pub fn laplace_smooth(c: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    let n: f64 = c.iter().sum();
    if n == 0.0 {
        return Err(Error::ZeroStatistics);
    }
    let k = c.len() as f64;
    let denom = n + k * epsilon;
    Ok(c.iter().map(|&ck| (ck + epsilon) / denom * n).collect())
}

/// Stage-one codec loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub rec_loss: f64,
    pub commit_loss: f64,
    pub gan_loss: f64,
    pub codec_loss: f64,
    pub lambda_commit: f64,
    pub eta: f64,
    pub delta: f64,
}

pub const DEFAULT_LAMBDA_COMMIT: f64 = 0.25;

impl LossTerms {
    pub fn vq_total(&self) -> f64 {
        self.rec_loss + self.lambda_commit * self.commit_loss
    }

    /// Adds the adversarial term with the adaptive weight derived from the
    /// two gradient norms.
    pub fn with_gan(self, gan_loss: f64, grad_rec_norm: f64, grad_gan_norm: f64, delta: f64) -> Self {
        let eta = adaptive_gan_weight(grad_rec_norm, grad_gan_norm, delta);
        Self {
            gan_loss,
            eta,
            delta,
            codec_loss: self.vq_total() + eta * gan_loss,
            ..self
        }
    }
}

/// Element-mean L1 reconstruction plus `lambda`-weighted element-mean
/// commitment error. `z_q` is treated as a constant.
pub fn vq_loss(
    x: &[f64],
    x_hat: &[f64],
    z: &FeatureGrid,
    z_q: &FeatureGrid,
    lambda_commit: f64,
) -> Result<LossTerms> {
    if x.len() != x_hat.len() {
        return Err(Error::ShapeMismatch(format!(
            "x has {} elements, x_hat {}",
            x.len(),
            x_hat.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::EmptyInput("reconstruction tensors"));
    }
    if !z.same_shape(z_q) {
        return Err(Error::ShapeMismatch("z and z_q differ in shape".into()));
    }
    let rec_loss = x.iter().zip(x_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / x.len() as f64;
    let commit_loss = mean_squared_error(z.values(), z_q.values());
    let partial = LossTerms {
        rec_loss,
        commit_loss,
        gan_loss: 0.0,
        codec_loss: 0.0,
        lambda_commit,
        eta: 0.0,
        delta: 0.0,
    };
    Ok(LossTerms {
        codec_loss: partial.vq_total(),
        ..partial
    })
}

fn mean_squared_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

const GAN_CLAMP: f64 = 1e-7;

/// `ln D(x) + ln(1 - D(x_hat))`, with inputs clamped away from 0 and 1.
pub fn gan_loss(d_real: f64, d_fake: f64) -> f64 {
    let clamp = |v: f64| v.clamp(GAN_CLAMP, 1.0 - GAN_CLAMP);
    clamp(d_real).ln() + (1.0 - clamp(d_fake)).ln()
}

pub fn adaptive_gan_weight(grad_rec_norm: f64, grad_gan_norm: f64, delta: f64) -> f64 {
    grad_rec_norm / (grad_gan_norm + delta)
}

/// Cell `i` is drawn from an isotropic Gaussian around `centers[i % len]`.
pub fn gaussian_mixture_grid<R: Rng + ?Sized>(
    rng: &mut R,
    h: usize,
    w: usize,
    centers: &[Vec<f64>],
    sigma: f64,
) -> Result<FeatureGrid> {
    let dim = centers.first().map(Vec::len).ok_or(Error::EmptyInput("mixture centers"))?;
    if centers.iter().any(|c| c.len() != dim) {
        return Err(Error::ShapeMismatch("mixture centers differ in dimension".into()));
    }
    let mut values = Vec::with_capacity(h * w * dim);
    for i in 0..h * w {
        for &c in &centers[i % centers.len()] {
            values.push(c + sigma * rng.sample::<f64, _>(StandardNormal));
        }
    }
    FeatureGrid::new(h, w, dim, values)
}

/// AR(1) synthetic stand-in for encoder output: frame 0 is standard
/// normal, frame `t` is `kappa * frame_{t-1} + sqrt(1 - kappa^2) * noise`.
pub fn generate_feature_sequence<R: Rng + ?Sized>(
    rng: &mut R,
    frames: usize,
    h: usize,
    w: usize,
    dim: usize,
    kappa: f64,
) -> Result<Vec<FeatureGrid>> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::InvalidParameter(format!("temporal correlation {kappa} outside [0, 1]")));
    }
    if h == 0 || w == 0 || dim == 0 {
        return Err(Error::ShapeMismatch("feature grid dims must be >= 1".into()));
    }
    let n = h * w * dim;
    let fresh = (1.0 - kappa * kappa).sqrt();
    let mut out: Vec<FeatureGrid> = Vec::with_capacity(frames);
    for t in 0..frames {
        let values: Vec<f64> = if t == 0 {
            (0..n).map(|_| rng.sample(StandardNormal)).collect()
        } else {
            let prev = out[t - 1].values();
            prev.iter()
                .map(|&p| {
                    let e: f64 = rng.sample(StandardNormal);
                    kappa * p + fresh * e
                })
                .collect()
        };
        out.push(FeatureGrid { h, w, dim, values });
    }
    Ok(out)
}
