//! Dataset manifests: one per recorded run (route × season × time of day ×
//! direction), pointing at a frames directory and a GPS CSV.

use std::path::{Path, PathBuf};

use placerec_core::features::FrameKind;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn name(&self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub route: String,
    pub season: String,
    pub time_of_day: String,
    pub direction: Direction,
    /// Absolute path to the directory of frame files.
    pub frames_dir: PathBuf,
    /// Absolute path to the GPS CSV.
    pub gps_path: PathBuf,
}

impl DatasetManifest {
    /// Scenario label used as the training target for this run.
    pub fn scenario_label(&self) -> String {
        format!("{}-{}", self.season, self.time_of_day)
    }

    pub fn to_text(&self) -> String {
        format!(
            "route {}\nseason {}\ntime_of_day {}\ndirection {}\nframes {}\ngps {}\n",
            self.route,
            self.season,
            self.time_of_day,
            self.direction.name(),
            self.frames_dir.display(),
            self.gps_path.display()
        )
    }

    /// Parses a manifest file; relative frame/GPS paths resolve against the
    /// manifest's own directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_text(&text, base).map_err(|e| match e {
            CliError::Validation(msg) => {
                CliError::Validation(format!("{}: {msg}", path.display()))
            }
            other => other,
        })
    }

    pub fn from_text(text: &str, base: &Path) -> Result<Self> {
        let mut route = None;
        let mut season = None;
        let mut time_of_day = None;
        let mut direction = None;
        let mut frames = None;
        let mut gps = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once(char::is_whitespace).ok_or_else(|| {
                CliError::Validation(format!("manifest line {}: expected 'key value'", lineno + 1))
            })?;
            let value = value.trim().to_string();
            match key {
                "route" => route = Some(value),
                "season" => season = Some(value),
                "time_of_day" => time_of_day = Some(value),
                "direction" => {
                    direction = Some(match value.as_str() {
                        "forward" => Direction::Forward,
                        "backward" => Direction::Backward,
                        other => {
                            return Err(CliError::Validation(format!(
                                "manifest line {}: direction must be forward or backward, got '{other}'",
                                lineno + 1
                            )))
                        }
                    })
                }
                "frames" => frames = Some(resolve(base, &value)),
                "gps" => gps = Some(resolve(base, &value)),
                other => {
                    return Err(CliError::Validation(format!(
                        "manifest line {}: unknown key '{other}'",
                        lineno + 1
                    )))
                }
            }
        }
        let need = |name: &str, v: Option<String>| {
            v.ok_or_else(|| CliError::Validation(format!("manifest is missing '{name}'")))
        };
        Ok(Self {
            route: need("route", route)?,
            season: need("season", season)?,
            time_of_day: need("time_of_day", time_of_day)?,
            direction: direction
                .ok_or_else(|| CliError::Validation("manifest is missing 'direction'".into()))?,
            frames_dir: frames
                .ok_or_else(|| CliError::Validation("manifest is missing 'frames'".into()))?,
            gps_path: gps
                .ok_or_else(|| CliError::Validation("manifest is missing 'gps'".into()))?,
        })
    }
}

fn resolve(base: &Path, value: &str) -> PathBuf {
    let p = Path::new(value);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// One frame file reference parsed from its name:
/// `<image_id>_<timestamp_ms>_<intensity|disparity>.(png|pgm)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRef {
    pub image_id: String,
    pub timestamp_ms: u64,
    pub kind: FrameKind,
    pub path: PathBuf,
}

impl FrameRef {
    pub fn timestamp_s(&self) -> f64 {
        self.timestamp_ms as f64 / 1000.0
    }
}

/// Parses a frame filename; the image id may itself contain underscores,
/// so the timestamp and sensor suffix are split off from the right.
pub fn parse_frame_name(path: &Path) -> Result<FrameRef> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| CliError::Ingestion(format!("unreadable file name: {}", path.display())))?;
    let bad = |why: &str| {
        CliError::Ingestion(format!(
            "frame file '{name}': {why} (expected <image_id>_<timestamp_ms>_<intensity|disparity>.(png|pgm))"
        ))
    };
    let (stem, ext) = name
        .rsplit_once('.')
        .ok_or_else(|| bad("missing extension"))?;
    if !ext.eq_ignore_ascii_case("png") && !ext.eq_ignore_ascii_case("pgm") {
        return Err(bad("extension must be png or pgm"));
    }
    let (rest, kind_str) = stem.rsplit_once('_').ok_or_else(|| bad("missing sensor suffix"))?;
    let kind = match kind_str {
        "intensity" => FrameKind::Intensity,
        "disparity" => FrameKind::Disparity,
        _ => return Err(bad("sensor suffix must be intensity or disparity")),
    };
    let (image_id, ts_str) = rest.rsplit_once('_').ok_or_else(|| bad("missing timestamp"))?;
    let timestamp_ms: u64 = ts_str.parse().map_err(|_| bad("timestamp is not an integer"))?;
    if image_id.is_empty() {
        return Err(bad("empty image id"));
    }
    Ok(FrameRef { image_id: image_id.to_string(), timestamp_ms, kind, path: path.to_path_buf() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_name_round_trip() {
        let r = parse_frame_name(Path::new("/d/f007_12500_intensity.pgm")).unwrap();
        assert_eq!(r.image_id, "f007");
        assert_eq!(r.timestamp_ms, 12500);
        assert_eq!(r.kind, FrameKind::Intensity);
        assert_eq!(r.timestamp_s(), 12.5);
    }

    #[test]
    fn frame_name_with_underscored_id() {
        let r = parse_frame_name(Path::new("loop_a_3_999_disparity.png")).unwrap();
        assert_eq!(r.image_id, "loop_a_3");
        assert_eq!(r.kind, FrameKind::Disparity);
    }

    #[test]
    fn bad_frame_names_rejected() {
        for name in ["f0.pgm", "f0_12_depth.pgm", "f0_x_intensity.pgm", "f0_12_intensity.tif"] {
            assert!(parse_frame_name(Path::new(name)).is_err(), "{name}");
        }
    }

    #[test]
    fn manifest_round_trip() {
        let m = DatasetManifest {
            route: "loop-a".into(),
            season: "summer".into(),
            time_of_day: "morning".into(),
            direction: Direction::Backward,
            frames_dir: "/data/run/frames".into(),
            gps_path: "/data/run/gps.csv".into(),
        };
        let parsed = DatasetManifest::from_text(&m.to_text(), Path::new("/elsewhere")).unwrap();
        assert_eq!(m, parsed);
    }

    #[test]
    fn relative_paths_resolve_against_manifest_dir() {
        let text = "route r\nseason s\ntime_of_day t\ndirection forward\nframes frames\ngps gps.csv\n";
        let m = DatasetManifest::from_text(text, Path::new("/data/run")).unwrap();
        assert_eq!(m.frames_dir, PathBuf::from("/data/run/frames"));
        assert_eq!(m.gps_path, PathBuf::from("/data/run/gps.csv"));
    }
}
