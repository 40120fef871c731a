//! Nested block structure of the stacked descriptor: sensors contain
//! feature modalities, feature modalities occupy contiguous row ranges.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};

/// One feature modality (e.g. a HOG descriptor) inside a sensor block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureBlock {
    pub name: String,
    pub dim: usize,
}

/// One sensor modality (e.g. the intensity panorama) and its feature blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorBlock {
    pub name: String,
    pub features: Vec<FeatureBlock>,
}

impl SensorBlock {
    pub fn dim(&self) -> usize {
        self.features.iter().map(|f| f.dim).sum()
    }
}

/// Ordered sensor/feature block structure assigning every row of the
/// stacked descriptor (and of the weight matrix) to exactly one block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModalityLayout {
    sensors: Vec<SensorBlock>,
}

impl ModalityLayout {
    /// Validates and freezes a block structure.
    pub fn new(sensors: Vec<SensorBlock>) -> Result<Self> {
        if sensors.is_empty() {
            return Err(Error::Layout("layout must have at least one sensor".into()));
        }
        for (i, s) in sensors.iter().enumerate() {
            if s.features.is_empty() {
                return Err(Error::Layout(format!(
                    "sensor '{}' has no feature blocks",
                    s.name
                )));
            }
            for f in &s.features {
                if f.dim == 0 {
                    return Err(Error::Layout(format!(
                        "feature '{}' in sensor '{}' has dim 0",
                        f.name, s.name
                    )));
                }
            }
            for (j, sj) in sensors.iter().enumerate() {
                if i < j && s.name == sj.name {
                    return Err(Error::Layout(format!("duplicate sensor name '{}'", s.name)));
                }
            }
            for (a, fa) in s.features.iter().enumerate() {
                for (b, fb) in s.features.iter().enumerate() {
                    if a < b && fa.name == fb.name {
                        return Err(Error::Layout(format!(
                            "duplicate feature name '{}' in sensor '{}'",
                            fa.name, s.name
                        )));
                    }
                }
            }
        }
        Ok(Self { sensors })
    }

    pub fn sensors(&self) -> &[SensorBlock] {
        &self.sensors
    }

    pub fn sensor_count(&self) -> usize {
        self.sensors.len()
    }

    /// Total row dimension p.
    pub fn total_dim(&self) -> usize {
        self.sensors.iter().map(|s| s.dim()).sum()
    }

    /// Half-open row range of a whole sensor block.
    pub fn sensor_range(&self, sensor: usize) -> Result<Range<usize>> {
        if sensor >= self.sensors.len() {
            return Err(Error::Layout(format!(
                "sensor index {sensor} out of range (have {})",
                self.sensors.len()
            )));
        }
        let start: usize = self.sensors[..sensor].iter().map(|s| s.dim()).sum();
        Ok(start..start + self.sensors[sensor].dim())
    }

    /// Half-open row range of one feature block within a sensor.
    pub fn feature_range(&self, sensor: usize, feature: usize) -> Result<Range<usize>> {
        let srange = self.sensor_range(sensor)?;
        let feats = &self.sensors[sensor].features;
        if feature >= feats.len() {
            return Err(Error::Layout(format!(
                "feature index {feature} out of range in sensor '{}' (have {})",
                self.sensors[sensor].name,
                feats.len()
            )));
        }
        let start: usize = srange.start + feats[..feature].iter().map(|f| f.dim).sum::<usize>();
        Ok(start..start + feats[feature].dim)
    }

    /// All feature blocks in layout order as (sensor index, feature index, row range).
    pub fn feature_blocks(&self) -> Vec<(usize, usize, Range<usize>)> {
        let mut out = Vec::new();
        let mut offset = 0usize;
        for (q, s) in self.sensors.iter().enumerate() {
            for (k, f) in s.features.iter().enumerate() {
                out.push((q, k, offset..offset + f.dim));
                offset += f.dim;
            }
        }
        out
    }

    /// All sensor blocks in layout order as (sensor index, row range).
    pub fn sensor_blocks(&self) -> Vec<(usize, Range<usize>)> {
        let mut out = Vec::new();
        let mut offset = 0usize;
        for (q, s) in self.sensors.iter().enumerate() {
            out.push((q, offset..offset + s.dim()));
            offset += s.dim();
        }
        out
    }

    /// Text header form: `sensor <name>` lines each followed by
    /// `feature <name> <dim>` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.sensors {
            out.push_str("sensor ");
            out.push_str(&s.name);
            out.push('\n');
            for f in &s.features {
                out.push_str(&format!("feature {} {}\n", f.name, f.dim));
            }
        }
        out
    }

    /// Parses the text header form produced by [`ModalityLayout::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut sensors: Vec<SensorBlock> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("sensor") => {
                    let name = parts
                        .next()
                        .ok_or_else(|| {
                            Error::Layout(format!("line {}: sensor without name", lineno + 1))
                        })?
                        .to_string();
                    sensors.push(SensorBlock {
                        name,
                        features: Vec::new(),
                    });
                }
                Some("feature") => {
                    let name = parts
                        .next()
                        .ok_or_else(|| {
                            Error::Layout(format!("line {}: feature without name", lineno + 1))
                        })?
                        .to_string();
                    let dim: usize = parts
                        .next()
                        .and_then(|d| d.parse().ok())
                        .ok_or_else(|| {
                            Error::Layout(format!("line {}: feature without valid dim", lineno + 1))
                        })?;
                    let sensor = sensors.last_mut().ok_or_else(|| {
                        Error::Layout(format!("line {}: feature before any sensor", lineno + 1))
                    })?;
                    sensor.features.push(FeatureBlock { name, dim });
                }
                Some(other) => {
                    return Err(Error::Layout(format!(
                        "line {}: unknown directive '{other}'",
                        lineno + 1
                    )))
                }
                None => unreachable!(),
            }
        }
        ModalityLayout::new(sensors)
    }

    /// Convenience constructor from `(sensor, [(feature, dim)])` pairs.
    pub fn from_spec(spec: &[(&str, &[(&str, usize)])]) -> Result<Self> {
        let sensors = spec
            .iter()
            .map(|(sname, feats)| SensorBlock {
                name: (*sname).to_string(),
                features: feats
                    .iter()
                    .map(|(fname, dim)| FeatureBlock {
                        name: (*fname).to_string(),
                        dim: *dim,
                    })
                    .collect(),
            })
            .collect();
        ModalityLayout::new(sensors)
    }
}
