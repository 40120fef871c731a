//! Dataset loading: frame decoding, sensor pairing, downsampling, and GPS
//! track parsing.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use placerec_core::features::{downsample, FrameKind, FramePair, ImageFrame};
use placerec_core::geo::{GpsSample, GpsTrack};

use crate::error::{CliError, Result};
use crate::manifest::{parse_frame_name, DatasetManifest, FrameRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IngestSummary {
    pub pairs: usize,
    /// Frames dropped because their timestamps fall outside the GPS span.
    pub dropped_outside_gps: usize,
    /// Frames excluded by an explicit --frames range.
    pub excluded_by_range: usize,
}

/// Parses a GPS CSV with header `timestamp,lat,lon`.
pub fn load_track(path: &Path) -> Result<GpsTrack> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "timestamp,lat,lon" => {}
        _ => {
            return Err(CliError::Ingestion(format!(
                "{}: expected header 'timestamp,lat,lon'",
                path.display()
            )))
        }
    }
    let mut samples = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut field = |name: &str| -> Result<f64> {
            fields
                .next()
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| {
                    CliError::Ingestion(format!(
                        "{} line {}: bad {name} value",
                        path.display(),
                        lineno + 1
                    ))
                })
        };
        let timestamp = field("timestamp")?;
        let lat = field("lat")?;
        let lon = field("lon")?;
        samples.push(GpsSample { timestamp, lat, lon });
    }
    GpsTrack::new(samples).map_err(|e| CliError::Ingestion(format!("{}: {e}", path.display())))
}

/// Scans the frames directory for recognizable frame files, sorted by
/// (timestamp, image_id) for a stable ordering.
pub fn scan_frames(dir: &Path) -> Result<Vec<FrameRef>> {
    let entries = std::fs::read_dir(dir).map_err(CliError::io(dir))?;
    let mut refs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(CliError::io(dir))?;
        let path = entry.path();
        if path.is_file() {
            refs.push(parse_frame_name(&path)?);
        }
    }
    refs.sort_by(|a, b| {
        a.timestamp_ms
            .cmp(&b.timestamp_ms)
            .then_with(|| a.image_id.cmp(&b.image_id))
            .then(a.kind.name().cmp(b.kind.name()))
    });
    Ok(refs)
}

fn decode_frame(r: &FrameRef) -> Result<ImageFrame> {
    let img = image::open(&r.path)
        .map_err(|e| CliError::Ingestion(format!("{}: {e}", r.path.display())))?
        .into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    ImageFrame::new(img.into_raw(), w, h, r.kind, r.image_id.clone(), r.timestamp_s())
        .map_err(CliError::from)
}

/// Loads, pairs, and optionally downsamples one run's frames.
///
/// Frames are paired one-to-one by image id across the two sensors; any
/// unpaired frame is an ingestion error naming the image id. Pairs whose
/// timestamps fall outside the GPS span are dropped and counted. Frames at
/// least as large as `target` in both dimensions are area-averaged down to
/// it; smaller frames pass through at native size.
pub fn load_run(
    manifest: &DatasetManifest,
    frame_range: Option<Range<usize>>,
    target: (usize, usize),
) -> Result<(Vec<FramePair>, GpsTrack, IngestSummary)> {
    let track = load_track(&manifest.gps_path)?;
    let refs = scan_frames(&manifest.frames_dir)?;

    let mut by_id: BTreeMap<&str, (Option<&FrameRef>, Option<&FrameRef>)> = BTreeMap::new();
    for r in &refs {
        let slot = by_id.entry(&r.image_id).or_default();
        let side = match r.kind {
            FrameKind::Intensity => &mut slot.0,
            FrameKind::Disparity => &mut slot.1,
        };
        if side.replace(r).is_some() {
            return Err(CliError::Ingestion(format!(
                "duplicate {} frame for image id '{}'",
                r.kind.name(),
                r.image_id
            )));
        }
    }
    let mut paired: Vec<(&FrameRef, &FrameRef)> = Vec::with_capacity(by_id.len());
    for (id, (intensity, disparity)) in &by_id {
        match (intensity, disparity) {
            (Some(i), Some(d)) => paired.push((i, d)),
            (Some(_), None) => {
                return Err(CliError::Ingestion(format!(
                    "image id '{id}' is missing its disparity frame"
                )))
            }
            (None, _) => {
                return Err(CliError::Ingestion(format!(
                    "image id '{id}' is missing its intensity frame"
                )))
            }
        }
    }
    paired.sort_by(|a, b| {
        a.0.timestamp_ms.cmp(&b.0.timestamp_ms).then_with(|| a.0.image_id.cmp(&b.0.image_id))
    });

    let mut summary = IngestSummary::default();
    let total = paired.len();
    let range = frame_range.unwrap_or(0..total);
    let (span_start, span_end) = track.span();
    let (tw, th) = target;

    let mut pairs = Vec::new();
    for (idx, (iref, dref)) in paired.into_iter().enumerate() {
        if !range.contains(&idx) {
            summary.excluded_by_range += 1;
            continue;
        }
        let t = iref.timestamp_s();
        if t < span_start || t > span_end {
            summary.dropped_outside_gps += 1;
            continue;
        }
        let mut intensity = decode_frame(iref)?;
        let mut disparity = decode_frame(dref)?;
        if intensity.width >= tw && intensity.height >= th {
            intensity = downsample(&intensity, tw, th)?;
        }
        if disparity.width >= tw && disparity.height >= th {
            disparity = downsample(&disparity, tw, th)?;
        }
        pairs.push(FramePair::new(intensity, disparity)?);
    }
    summary.pairs = pairs.len();
    if pairs.is_empty() {
        return Err(CliError::Ingestion(format!(
            "no usable frame pairs in {} ({} files scanned)",
            manifest.frames_dir.display(),
            refs.len()
        )));
    }
    Ok((pairs, track, summary))
}

/// Writes an 8-bit binary PGM (P5).
pub fn write_pgm(path: &Path, pixels: &[u8], width: usize, height: usize) -> Result<()> {
    assert_eq!(pixels.len(), width * height);
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend_from_slice(pixels);
    std::fs::write(path, bytes).map_err(CliError::io(path))
}

/// Parses an external feature file: first line `external <name> <dim>
/// <sensor>`, then one `<image_id> v1 … v_dim` line per image.
pub fn load_external(path: &Path) -> Result<placerec_core::features::ExternalFeatures> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut lines = text.lines().enumerate();
    let bad = |lineno: usize, why: String| {
        CliError::Ingestion(format!("{} line {}: {why}", path.display(), lineno + 1))
    };
    let (name, dim, sensor) = match lines.next() {
        Some((lineno, header)) => {
            let mut parts = header.split_whitespace();
            if parts.next() != Some("external") {
                return Err(bad(lineno, "expected header 'external <name> <dim> <sensor>'".into()));
            }
            let name = parts
                .next()
                .ok_or_else(|| bad(lineno, "missing feature name".into()))?
                .to_string();
            let dim: usize = parts
                .next()
                .and_then(|v| v.parse().ok())
                .filter(|&d| d > 0)
                .ok_or_else(|| bad(lineno, "missing or invalid dim".into()))?;
            let sensor = match parts.next() {
                Some("intensity") => FrameKind::Intensity,
                Some("disparity") => FrameKind::Disparity,
                _ => return Err(bad(lineno, "sensor must be intensity or disparity".into())),
            };
            (name, dim, sensor)
        }
        None => return Err(CliError::Ingestion(format!("{}: empty file", path.display()))),
    };
    let mut rows = BTreeMap::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let id = parts.next().unwrap().to_string();
        let values: Vec<f64> = parts
            .map(|v| v.parse().map_err(|_| bad(lineno, format!("bad value '{v}'"))))
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(bad(lineno, format!("{} values, expected {dim}", values.len())));
        }
        rows.insert(id, values);
    }
    Ok(placerec_core::features::ExternalFeatures { name, dim, sensor, rows })
}

/// Parses `--frames a..b` (half-open index range over the sorted pair list).
pub fn parse_frame_range(text: &str) -> Result<Range<usize>> {
    let err = || {
        CliError::Validation(format!(
            "frame range '{text}' must look like 'a..b' with a < b"
        ))
    };
    let (a, b) = text.split_once("..").ok_or_else(err)?;
    let start: usize = a.trim().parse().map_err(|_| err())?;
    let end: usize = b.trim().parse().map_err(|_| err())?;
    if start >= end {
        return Err(err());
    }
    Ok(start..end)
}
