//! Image descriptors and feature-matrix assembly.
//!
//! Each image contributes one column of stacked per-sensor descriptor
//! blocks in the fixed order gist, hog, lbp, then any imported external
//! blocks. Per-block z-score statistics are computed once over the
//! training set and reapplied to query images.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::layout::{FeatureBlock, ModalityLayout, SensorBlock};
use crate::model::FeatureMatrix;

pub const LBP_BINS: usize = 59;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    Intensity,
    Disparity,
}

impl FrameKind {
    pub fn name(&self) -> &'static str {
        match self {
            FrameKind::Intensity => "intensity",
            FrameKind::Disparity => "disparity",
        }
    }
}

/// 8-bit grayscale frame, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFrame {
    pub pixels: Vec<u8>,
    pub width: usize,
    pub height: usize,
    pub kind: FrameKind,
    pub image_id: String,
    pub timestamp: f64,
}

impl ImageFrame {
    pub fn new(
        pixels: Vec<u8>,
        width: usize,
        height: usize,
        kind: FrameKind,
        image_id: String,
        timestamp: f64,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Validation(format!("frame '{image_id}': zero dimension")));
        }
        if pixels.len() != width * height {
            return Err(Error::Validation(format!(
                "frame '{image_id}': {} pixels for {width}x{height}",
                pixels.len()
            )));
        }
        Ok(Self { pixels, width, height, kind, image_id, timestamp })
    }

    fn at(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// Both sensor frames of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePair {
    pub intensity: ImageFrame,
    pub disparity: ImageFrame,
}

impl FramePair {
    pub fn new(intensity: ImageFrame, disparity: ImageFrame) -> Result<Self> {
        if intensity.kind != FrameKind::Intensity || disparity.kind != FrameKind::Disparity {
            return Err(Error::Validation(format!(
                "frame pair '{}': sensor kinds swapped or wrong",
                intensity.image_id
            )));
        }
        if intensity.image_id != disparity.image_id {
            return Err(Error::Ingestion(format!(
                "frame pair mismatch: intensity '{}' vs disparity '{}'",
                intensity.image_id, disparity.image_id
            )));
        }
        if intensity.width != disparity.width || intensity.height != disparity.height {
            return Err(Error::Ingestion(format!(
                "frame pair '{}': sensor frames have different dimensions",
                intensity.image_id
            )));
        }
        Ok(Self { intensity, disparity })
    }

    pub fn image_id(&self) -> &str {
        &self.intensity.image_id
    }

    pub fn timestamp(&self) -> f64 {
        self.intensity.timestamp
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HogConfig {
    pub cell_size: usize,
    pub bins: usize,
    /// Block side length in cells.
    pub block_cells: usize,
    pub clip: f64,
}

impl Default for HogConfig {
    fn default() -> Self {
        Self { cell_size: 16, bins: 9, block_cells: 2, clip: 0.2 }
    }
}

impl HogConfig {
    /// Descriptor length for a given frame size; partial border cells drop.
    pub fn dim(&self, width: usize, height: usize) -> usize {
        let cx = width / self.cell_size;
        let cy = height / self.cell_size;
        if cx < self.block_cells || cy < self.block_cells {
            return 0;
        }
        (cx - self.block_cells + 1)
            * (cy - self.block_cells + 1)
            * self.block_cells
            * self.block_cells
            * self.bins
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GistConfig {
    pub orientations: usize,
    pub scales: usize,
    /// Grid side length (cells per axis).
    pub grid: usize,
    /// Internal working resolution (square, area-averaged).
    pub working_size: usize,
}

impl Default for GistConfig {
    fn default() -> Self {
        Self { orientations: 4, scales: 2, grid: 4, working_size: 32 }
    }
}

impl GistConfig {
    pub fn dim(&self) -> usize {
        self.orientations * self.scales * self.grid * self.grid
    }
}

/// Name and per-sensor dimension of an imported feature modality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalSpec {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorConfig {
    pub hog: HogConfig,
    pub gist: GistConfig,
    pub external: Vec<ExternalSpec>,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self { hog: HogConfig::default(), gist: GistConfig::default(), external: Vec::new() }
    }
}

impl DescriptorConfig {
    /// Fixed layout for a given frame geometry:
    /// {intensity: [gist, hog, lbp, external…], disparity: same}.
    pub fn layout(&self, width: usize, height: usize) -> Result<ModalityLayout> {
        let hog_dim = self.hog.dim(width, height);
        if hog_dim == 0 {
            return Err(Error::Validation(format!(
                "frame {width}x{height} smaller than one HOG block"
            )));
        }
        let mut features = vec![
            FeatureBlock { name: "gist".to_string(), dim: self.gist.dim() },
            FeatureBlock { name: "hog".to_string(), dim: hog_dim },
            FeatureBlock { name: "lbp".to_string(), dim: LBP_BINS },
        ];
        for ext in &self.external {
            features.push(FeatureBlock { name: ext.name.clone(), dim: ext.dim });
        }
        ModalityLayout::new(vec![
            SensorBlock { name: "intensity".to_string(), features: features.clone() },
            SensorBlock { name: "disparity".to_string(), features },
        ])
    }
}

/// Imported per-image feature vectors for one (modality, sensor).
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalFeatures {
    pub name: String,
    pub dim: usize,
    pub sensor: FrameKind,
    pub rows: BTreeMap<String, Vec<f64>>,
}

/// Area-averaged resize to exactly the requested size; upscaling refused.
/// Output values round half up.
pub fn downsample(frame: &ImageFrame, target_w: usize, target_h: usize) -> Result<ImageFrame> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::Validation("downsample target must be nonzero".into()));
    }
    if target_w > frame.width || target_h > frame.height {
        return Err(Error::Validation(format!(
            "cannot upscale {}x{} to {target_w}x{target_h}",
            frame.width, frame.height
        )));
    }
    let grid = area_average(frame, target_w, target_h);
    let pixels = grid
        .iter()
        .map(|&v| libm::floor(v + 0.5).clamp(0.0, 255.0) as u8)
        .collect();
    ImageFrame::new(
        pixels,
        target_w,
        target_h,
        frame.kind,
        frame.image_id.clone(),
        frame.timestamp,
    )
}

/// Fractional box-filter average onto a target grid, row-major f64.
fn area_average(frame: &ImageFrame, target_w: usize, target_h: usize) -> Vec<f64> {
    let sx = frame.width as f64 / target_w as f64;
    let sy = frame.height as f64 / target_h as f64;
    let mut out = Vec::with_capacity(target_w * target_h);
    for ty in 0..target_h {
        let y0 = ty as f64 * sy;
        let y1 = (ty + 1) as f64 * sy;
        for tx in 0..target_w {
            let x0 = tx as f64 * sx;
            let x1 = (tx + 1) as f64 * sx;
            let mut acc = 0.0;
            let mut area = 0.0;
            let yi0 = libm::floor(y0) as usize;
            let yi1 = (libm::ceil(y1) as usize).min(frame.height);
            let xi0 = libm::floor(x0) as usize;
            let xi1 = (libm::ceil(x1) as usize).min(frame.width);
            for yi in yi0..yi1 {
                let wy = overlap(yi as f64, y0, y1);
                if wy == 0.0 {
                    continue;
                }
                for xi in xi0..xi1 {
                    let wx = overlap(xi as f64, x0, x1);
                    if wx == 0.0 {
                        continue;
                    }
                    acc += wx * wy * frame.at(xi, yi) as f64;
                    area += wx * wy;
                }
            }
            out.push(acc / area);
        }
    }
    out
}

fn overlap(cell: f64, lo: f64, hi: f64) -> f64 {
    let a = cell.max(lo);
    let b = (cell + 1.0).min(hi);
    (b - a).max(0.0)
}

/// Gradient-orientation histogram with L2-Hys block normalization.
///
/// Unsigned orientations over [0°, 180°); bin b is centered at b·(180/bins)°,
/// so bin 0 collects horizontal gradients (vertical edges). Partial cells at
/// the right and bottom borders are dropped.
pub fn hog(frame: &ImageFrame, cfg: &HogConfig) -> Result<Vec<f64>> {
    let cell = cfg.cell_size;
    let cx = frame.width / cell;
    let cy = frame.height / cell;
    if cx < cfg.block_cells || cy < cfg.block_cells {
        return Err(Error::Validation(format!(
            "frame {}x{} smaller than one {}x{}-cell HOG block",
            frame.width, frame.height, cfg.block_cells, cfg.block_cells
        )));
    }
    // per-cell orientation histograms
    let mut cells = vec![vec![0.0f64; cfg.bins]; cx * cy];
    let used_w = cx * cell;
    let used_h = cy * cell;
    for y in 0..used_h {
        for x in 0..used_w {
            let xm = frame.at(x.saturating_sub(1), y) as f64;
            let xp = frame.at((x + 1).min(frame.width - 1), y) as f64;
            let ym = frame.at(x, y.saturating_sub(1)) as f64;
            let yp = frame.at(x, (y + 1).min(frame.height - 1)) as f64;
            let gx = xp - xm;
            let gy = yp - ym;
            let mag = libm::sqrt(gx * gx + gy * gy);
            if mag == 0.0 {
                continue;
            }
            let mut theta = libm::atan2(gy, gx);
            if theta < 0.0 {
                theta += core::f64::consts::PI;
            }
            if theta >= core::f64::consts::PI {
                theta -= core::f64::consts::PI;
            }
            let pos = theta / core::f64::consts::PI * cfg.bins as f64;
            let lower = libm::floor(pos) as usize;
            let frac = pos - lower as f64;
            let b0 = lower % cfg.bins;
            let b1 = (lower + 1) % cfg.bins;
            let hist = &mut cells[(y / cell) * cx + x / cell];
            hist[b0] += mag * (1.0 - frac);
            hist[b1] += mag * frac;
        }
    }
    // overlapping blocks, stride one cell, L2-Hys
    let bc = cfg.block_cells;
    let block_len = bc * bc * cfg.bins;
    let mut out = Vec::with_capacity((cy - bc + 1) * (cx - bc + 1) * block_len);
    let mut block = vec![0.0f64; block_len];
    for by in 0..=cy - bc {
        for bx in 0..=cx - bc {
            let mut idx = 0;
            for dy in 0..bc {
                for dx in 0..bc {
                    let hist = &cells[(by + dy) * cx + bx + dx];
                    block[idx..idx + cfg.bins].copy_from_slice(hist);
                    idx += cfg.bins;
                }
            }
            l2_hys(&mut block, cfg.clip);
            out.extend_from_slice(&block);
        }
    }
    Ok(out)
}

fn l2_hys(block: &mut [f64], clip: f64) {
    let norm = libm::sqrt(block.iter().map(|v| v * v).sum::<f64>());
    if norm < 1e-12 {
        block.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    block.iter_mut().for_each(|v| *v = (*v / norm).min(clip));
    let norm = libm::sqrt(block.iter().map(|v| v * v).sum::<f64>());
    if norm < 1e-12 {
        block.iter_mut().for_each(|v| *v = 0.0);
    } else {
        block.iter_mut().for_each(|v| *v /= norm);
    }
}

/// 59-bin uniform LBP histogram (radius 1, 8 neighbors), L1-normalized.
/// A neighbor greater than or equal to the center sets its bit.
pub fn lbp(frame: &ImageFrame) -> Result<Vec<f64>> {
    if frame.width < 3 || frame.height < 3 {
        return Err(Error::Validation(format!(
            "frame {}x{} too small for LBP (need 3x3)",
            frame.width, frame.height
        )));
    }
    let table = uniform_table();
    let mut hist = vec![0.0f64; LBP_BINS];
    // neighbors in circular order starting east, counterclockwise
    const OFFSETS: [(i32, i32); 8] =
        [(1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)];
    let mut count = 0usize;
    for y in 1..frame.height - 1 {
        for x in 1..frame.width - 1 {
            let center = frame.at(x, y);
            let mut code = 0u8;
            for (bit, (dx, dy)) in OFFSETS.iter().enumerate() {
                let nx = (x as i32 + dx) as usize;
                let ny = (y as i32 + dy) as usize;
                if frame.at(nx, ny) >= center {
                    code |= 1 << bit;
                }
            }
            hist[table[code as usize] as usize] += 1.0;
            count += 1;
        }
    }
    let total = count as f64;
    hist.iter_mut().for_each(|v| *v /= total);
    Ok(hist)
}

/// Maps the 58 uniform codes (at most 2 circular bit transitions), in
/// increasing code order, to bins 0..57; everything else to bin 58.
fn uniform_table() -> [u8; 256] {
    let mut table = [58u8; 256];
    let mut next = 0u8;
    for code in 0..256usize {
        let mut transitions = 0;
        for bit in 0..8 {
            let a = (code >> bit) & 1;
            let b = (code >> ((bit + 1) % 8)) & 1;
            if a != b {
                transitions += 1;
            }
        }
        if transitions <= 2 {
            table[code] = next;
            next += 1;
        }
    }
    debug_assert_eq!(next, 58);
    table
}

/// Mean Gabor response magnitude per (scale, orientation, grid cell).
///
/// The frame is area-averaged to a fixed square working resolution, then
/// filtered with a quadrature Gabor bank (zero-mean kernels, clamp-to-edge
/// padding). Entry order: scale-major, then orientation, then grid cell
/// row-major.
pub fn gist(frame: &ImageFrame, cfg: &GistConfig) -> Result<Vec<f64>> {
    let size = cfg.working_size;
    if frame.width < size || frame.height < size {
        return Err(Error::Validation(format!(
            "frame {}x{} too small for GIST (need at least {size}x{size})",
            frame.width, frame.height
        )));
    }
    let img = area_average(frame, size, size);
    let cell = size / cfg.grid;
    let mut out = Vec::with_capacity(cfg.dim());
    for s in 0..cfg.scales {
        let wavelength = 4.0 * libm::pow(2.0, s as f64);
        for o in 0..cfg.orientations {
            let theta = o as f64 * core::f64::consts::PI / cfg.orientations as f64;
            let (even, odd, half) = gabor_pair(wavelength, theta);
            let mut cell_sums = vec![0.0f64; cfg.grid * cfg.grid];
            let mut cell_counts = vec![0usize; cfg.grid * cfg.grid];
            for y in 0..size {
                for x in 0..size {
                    let (mut re, mut im) = (0.0, 0.0);
                    let k = 2 * half + 1;
                    for ky in 0..k {
                        let sy = (y + ky).saturating_sub(half).min(size - 1);
                        for kx in 0..k {
                            let sx = (x + kx).saturating_sub(half).min(size - 1);
                            let v = img[sy * size + sx];
                            re += even[ky * k + kx] * v;
                            im += odd[ky * k + kx] * v;
                        }
                    }
                    let mag = libm::sqrt(re * re + im * im);
                    let gidx = (y / cell).min(cfg.grid - 1) * cfg.grid + (x / cell).min(cfg.grid - 1);
                    cell_sums[gidx] += mag;
                    cell_counts[gidx] += 1;
                }
            }
            for (sum, count) in cell_sums.iter().zip(&cell_counts) {
                out.push(sum / *count as f64);
            }
        }
    }
    Ok(out)
}

/// Quadrature Gabor kernels at the given wavelength and orientation,
/// both adjusted to zero mean.
fn gabor_pair(wavelength: f64, theta: f64) -> (Vec<f64>, Vec<f64>, usize) {
    let sigma = 0.56 * wavelength;
    let half = libm::ceil(2.5 * sigma) as usize;
    let k = 2 * half + 1;
    let (cos_t, sin_t) = (libm::cos(theta), libm::sin(theta));
    let mut even = vec![0.0f64; k * k];
    let mut odd = vec![0.0f64; k * k];
    for ky in 0..k {
        let y = ky as f64 - half as f64;
        for kx in 0..k {
            let x = kx as f64 - half as f64;
            let xr = x * cos_t + y * sin_t;
            let yr = -x * sin_t + y * cos_t;
            let envelope = libm::exp(-(xr * xr + yr * yr) / (2.0 * sigma * sigma));
            let phase = 2.0 * core::f64::consts::PI * xr / wavelength;
            even[ky * k + kx] = envelope * libm::cos(phase);
            odd[ky * k + kx] = envelope * libm::sin(phase);
        }
    }
    for kernel in [&mut even, &mut odd] {
        let mean = kernel.iter().sum::<f64>() / (k * k) as f64;
        kernel.iter_mut().for_each(|v| *v -= mean);
    }
    (even, odd, half)
}

/// Per-block scalar z-score statistics, aligned with the layout's
/// feature-block order. A zero std marks a constant block, which maps
/// to zeros when applied.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub per_block: Vec<(f64, f64)>,
}

impl NormStats {
    pub fn compute(raw: &DMatrix<f64>, layout: &ModalityLayout) -> Self {
        let n = raw.ncols();
        let per_block = layout
            .feature_blocks()
            .into_iter()
            .map(|(_, _, range)| {
                let count = (range.len() * n) as f64;
                let mut sum = 0.0;
                let mut sumsq = 0.0;
                for j in 0..n {
                    for i in range.clone() {
                        let v = raw[(i, j)];
                        sum += v;
                        sumsq += v * v;
                    }
                }
                let mean = sum / count;
                let var = (sumsq / count - mean * mean).max(0.0);
                let std = libm::sqrt(var);
                if std < 1e-12 {
                    (mean, 0.0)
                } else {
                    (mean, std)
                }
            })
            .collect();
        Self { per_block }
    }

    pub fn apply(&self, raw: &mut DMatrix<f64>, layout: &ModalityLayout) -> Result<()> {
        let blocks = layout.feature_blocks();
        if blocks.len() != self.per_block.len() {
            return Err(Error::Shape(format!(
                "normalization stats cover {} blocks, layout has {}",
                self.per_block.len(),
                blocks.len()
            )));
        }
        for ((_, _, range), &(mean, std)) in blocks.into_iter().zip(&self.per_block) {
            for j in 0..raw.ncols() {
                for i in range.clone() {
                    raw[(i, j)] = if std == 0.0 { 0.0 } else { (raw[(i, j)] - mean) / std };
                }
            }
        }
        Ok(())
    }
}

fn raw_columns(
    pairs: &[FramePair],
    cfg: &DescriptorConfig,
    externals: &[ExternalFeatures],
    layout: &ModalityLayout,
) -> Result<DMatrix<f64>> {
    for ext_spec in &cfg.external {
        let found = externals.iter().filter(|e| e.name == ext_spec.name).count();
        if found != 2 {
            return Err(Error::Ingestion(format!(
                "external modality '{}' needs one file per sensor, found {found}",
                ext_spec.name
            )));
        }
    }
    let p = layout.total_dim();
    let n = pairs.len();
    let mut raw = DMatrix::zeros(p, n);
    for (col, pair) in pairs.iter().enumerate() {
        let mut column: Vec<f64> = Vec::with_capacity(p);
        for frame in [&pair.intensity, &pair.disparity] {
            column.extend(gist(frame, &cfg.gist)?);
            column.extend(hog(frame, &cfg.hog)?);
            column.extend(lbp(frame)?);
            for ext_spec in &cfg.external {
                let ext = externals
                    .iter()
                    .find(|e| e.name == ext_spec.name && e.sensor == frame.kind)
                    .ok_or_else(|| {
                        Error::Ingestion(format!(
                            "no external file for modality '{}' sensor '{}'",
                            ext_spec.name,
                            frame.kind.name()
                        ))
                    })?;
                let row = ext.rows.get(pair.image_id()).ok_or_else(|| {
                    Error::Ingestion(format!(
                        "external modality '{}' ({}) missing image '{}'",
                        ext.name,
                        frame.kind.name(),
                        pair.image_id()
                    ))
                })?;
                if row.len() != ext_spec.dim {
                    return Err(Error::Ingestion(format!(
                        "external modality '{}' image '{}': {} values, expected {}",
                        ext.name,
                        pair.image_id(),
                        row.len(),
                        ext_spec.dim
                    )));
                }
                column.extend_from_slice(row);
            }
        }
        debug_assert_eq!(column.len(), p);
        for (i, v) in column.into_iter().enumerate() {
            raw[(i, col)] = v;
        }
    }
    Ok(raw)
}

/// Extracts the training feature matrix and freezes its z-score statistics.
pub fn extract_all(
    pairs: &[FramePair],
    cfg: &DescriptorConfig,
    externals: &[ExternalFeatures],
) -> Result<(FeatureMatrix, NormStats)> {
    let (w, h) = frame_geometry(pairs)?;
    let layout = cfg.layout(w, h)?;
    let mut raw = raw_columns(pairs, cfg, externals, &layout)?;
    let stats = NormStats::compute(&raw, &layout);
    stats.apply(&mut raw, &layout)?;
    let ids = pairs.iter().map(|p| p.image_id().to_string()).collect();
    Ok((FeatureMatrix::new(layout, raw, ids)?, stats))
}

/// Extracts query features using statistics frozen at training time.
pub fn extract_with_stats(
    pairs: &[FramePair],
    cfg: &DescriptorConfig,
    externals: &[ExternalFeatures],
    stats: &NormStats,
) -> Result<FeatureMatrix> {
    let (w, h) = frame_geometry(pairs)?;
    let layout = cfg.layout(w, h)?;
    let mut raw = raw_columns(pairs, cfg, externals, &layout)?;
    stats.apply(&mut raw, &layout)?;
    let ids = pairs.iter().map(|p| p.image_id().to_string()).collect();
    FeatureMatrix::new(layout, raw, ids)
}

fn frame_geometry(pairs: &[FramePair]) -> Result<(usize, usize)> {
    let first = pairs
        .first()
        .ok_or_else(|| Error::Validation("no frames to extract features from".into()))?;
    let (w, h) = (first.intensity.width, first.intensity.height);
    for pair in pairs {
        if pair.intensity.width != w || pair.intensity.height != h {
            return Err(Error::Validation(format!(
                "frame '{}' is {}x{}, expected {w}x{h}",
                pair.image_id(),
                pair.intensity.width,
                pair.intensity.height
            )));
        }
    }
    Ok((w, h))
}
