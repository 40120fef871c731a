//! Deterministic synthetic benchmark datasets: a GPS loop over distinct
//! per-place textures, re-traversed under per-scenario appearance changes
//! and optionally in the reverse direction with mirrored frames.

use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, Result};
use crate::ingest::write_pgm;
use crate::manifest::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisparityProfile {
    /// Disparity carries its own per-place texture (informative sensor).
    Clean,
    /// Disparity is per-frame random texture, uncorrelated with place or
    /// scenario (noise-only sensor).
    Noise,
}

impl DisparityProfile {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "clean" => Ok(Self::Clean),
            "noise" => Ok(Self::Noise),
            other => Err(CliError::Validation(format!(
                "disparity profile must be 'clean' or 'noise', got '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub seed: u64,
    pub places: usize,
    pub scenarios: usize,
    pub profile: DisparityProfile,
    /// Also emit a reversed traversal per scenario, with mirrored frames.
    pub flip: bool,
    pub width: usize,
    pub height: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            seed: 42,
            places: 20,
            scenarios: 3,
            profile: DisparityProfile::Noise,
            flip: false,
            width: 256,
            height: 64,
        }
    }
}

const SEASONS: &[&str] = &["summer", "fall", "winter", "spring"];
const LOOP_CENTER: (f64, f64) = (39.75, -105.22);
const LOOP_RADIUS_M: f64 = 500.0;
const EARTH_RADIUS_M: f64 = 6_371_000.0;
/// Seconds between consecutive place visits; GPS is sampled at 1 Hz.
const FRAME_PERIOD_S: u64 = 2;
const FIRST_FRAME_S: u64 = 10;

fn stream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    // splitmix-style mixing of the tag tuple into one stream seed
    let mut x = seed ^ 0x9E37_79B9_7F4A_7C15;
    for &t in tags {
        x = x.wrapping_add(t).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x ^= x >> 31;
    }
    ChaCha8Rng::seed_from_u64(x)
}

/// Latitude/longitude of fractional place index `u` on the loop.
fn loop_point(u: f64, places: usize) -> (f64, f64) {
    let theta = core::f64::consts::TAU * u / places as f64;
    let deg_per_m = 180.0 / (core::f64::consts::PI * EARTH_RADIUS_M);
    let lat = LOOP_CENTER.0 + LOOP_RADIUS_M * theta.cos() * deg_per_m;
    let lon =
        LOOP_CENTER.1 + LOOP_RADIUS_M * theta.sin() * deg_per_m / LOOP_CENTER.0.to_radians().cos();
    (lat, lon)
}

/// Mirror-symmetric per-place base texture: a random block pattern on the
/// left half, mirrored to the right so reversed traversals (horizontal
/// flips) see identical pixels.
fn place_texture(opts: &SynthOptions, place: usize, channel: u64) -> Vec<f64> {
    let half = opts.width / 2;
    let block = 16usize;
    let bx = half.div_ceil(block);
    let by = opts.height.div_ceil(block);
    let mut rng = stream(opts.seed, &[1, place as u64, channel]);
    let blocks: Vec<f64> = (0..bx * by).map(|_| rng.gen_range(60.0..195.0)).collect();
    let mut img = vec![0.0; opts.width * opts.height];
    for y in 0..opts.height {
        for x in 0..half {
            let v = blocks[(y / block) * bx + x / block];
            img[y * opts.width + x] = v;
            img[y * opts.width + (opts.width - 1 - x)] = v;
        }
    }
    img
}

/// Rows at the top of each frame reserved for the scenario signature so
/// appearance changes do not scramble the per-place texture below.
const SIGNATURE_ROWS: usize = 16;

/// Scenario signature grating, chosen so each scenario excites a distinct
/// orientation/scale channel even after internal descriptor resizing.
fn scenario_grating(scenario: usize, x: usize, y: usize) -> f64 {
    let amp = 45.0;
    match scenario % 3 {
        0 => amp * (core::f64::consts::TAU * x as f64 / 32.0).sin(),
        1 => amp * (core::f64::consts::TAU * y as f64 / 8.0).sin(),
        _ => amp * (core::f64::consts::TAU * x as f64 / 64.0).sin(),
    }
}

fn scenario_photometric(scenario: usize) -> (f64, f64) {
    let contrast = [1.0, 0.85, 1.15][scenario % 3];
    let brightness = [0.0, 20.0, -15.0][scenario % 3];
    (contrast, brightness)
}

/// Renders one frame: base texture + scenario grating + photometric change
/// + per-visit noise, mirrored left-to-right.
fn render_frame(
    opts: &SynthOptions,
    base: &[f64],
    scenario: usize,
    with_grating: bool,
    noise_rng: &mut ChaCha8Rng,
) -> Vec<u8> {
    let (contrast, brightness) = scenario_photometric(scenario);
    let half = opts.width / 2;
    let strip = SIGNATURE_ROWS.min(opts.height / 2);
    let mut out = vec![0u8; opts.width * opts.height];
    for y in 0..opts.height {
        for x in 0..half {
            let mut v = if with_grating && y < strip {
                // scenario signature strip over flat gray
                128.0 + scenario_grating(scenario, x, y)
            } else {
                contrast * (base[y * opts.width + x] - 128.0) + 128.0 + brightness
            };
            v += noise_rng.gen_range(-4.0..4.0);
            let px = v.round().clamp(0.0, 255.0) as u8;
            out[y * opts.width + x] = px;
            out[y * opts.width + (opts.width - 1 - x)] = px;
        }
    }
    out
}

/// Uninformative disparity frame for the noise profile: a per-visit random
/// blend of two fixed textures. Every frame looks different (so equal-weight
/// matching is corrupted), but the variation spans essentially one
/// direction, so it cannot explain the scenario labels during training.
fn noise_frame(opts: &SynthOptions, anchors: &(Vec<f64>, Vec<f64>), rng: &mut ChaCha8Rng) -> Vec<u8> {
    let alpha: f64 = rng.gen_range(0.0..1.0);
    let mut out = vec![0u8; opts.width * opts.height];
    for (i, px) in out.iter_mut().enumerate() {
        let v = (1.0 - alpha) * anchors.0[i] + alpha * anchors.1[i] + rng.gen_range(-3.0..3.0);
        *px = v.round().clamp(0.0, 255.0) as u8;
    }
    out
}

fn season_name(scenario: usize) -> String {
    if scenario < SEASONS.len() {
        SEASONS[scenario].to_string()
    } else {
        format!("season{scenario}")
    }
}

/// Generates the full dataset under `out_dir` and returns the manifest
/// paths, scenario-major with forward before backward.
pub fn generate(opts: &SynthOptions, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if opts.places < 2 {
        return Err(CliError::Validation("synth needs at least 2 places".into()));
    }
    if opts.scenarios < 2 {
        return Err(CliError::Validation("synth needs at least 2 scenarios".into()));
    }
    if opts.width < 64 || opts.height < 32 || opts.width % 2 != 0 {
        return Err(CliError::Validation(
            "synth frames must be at least 64x32 with even width".into(),
        ));
    }
    let intensity_bases: Vec<Vec<f64>> =
        (0..opts.places).map(|p| place_texture(opts, p, 0)).collect();
    let disparity_bases: Vec<Vec<f64>> =
        (0..opts.places).map(|p| place_texture(opts, p, 1)).collect();
    let noise_anchors = (place_texture(opts, 0, 2), place_texture(opts, 1, 2));

    let mut manifests = Vec::new();
    for scenario in 0..opts.scenarios {
        let directions: &[Direction] = if opts.flip {
            &[Direction::Forward, Direction::Backward]
        } else {
            &[Direction::Forward]
        };
        for &direction in directions {
            let run_dir = out_dir.join(format!("{}_{}", season_name(scenario), direction.name()));
            let frames_dir = run_dir.join("frames");
            std::fs::create_dir_all(&frames_dir).map_err(CliError::io(&frames_dir))?;

            for pos in 0..opts.places {
                let place = match direction {
                    Direction::Forward => pos,
                    Direction::Backward => opts.places - 1 - pos,
                };
                let ts_ms = (FIRST_FRAME_S + FRAME_PERIOD_S * pos as u64) * 1000;
                let dir_tag = match direction {
                    Direction::Forward => 0u64,
                    Direction::Backward => 1u64,
                };
                let mut irng =
                    stream(opts.seed, &[2, scenario as u64, dir_tag, pos as u64]);
                let intensity =
                    render_frame(opts, &intensity_bases[place], scenario, true, &mut irng);
                let disparity = match opts.profile {
                    DisparityProfile::Clean => {
                        let mut drng =
                            stream(opts.seed, &[3, scenario as u64, dir_tag, pos as u64]);
                        render_frame(opts, &disparity_bases[place], scenario, true, &mut drng)
                    }
                    DisparityProfile::Noise => {
                        let mut drng =
                            stream(opts.seed, &[4, scenario as u64, dir_tag, pos as u64]);
                        noise_frame(opts, &noise_anchors, &mut drng)
                    }
                };
                for (kind, pixels) in [("intensity", &intensity), ("disparity", &disparity)] {
                    let name = format!("f{pos:03}_{ts_ms}_{kind}.pgm");
                    write_pgm(&frames_dir.join(name), pixels, opts.width, opts.height)?;
                }
            }

            // 1 Hz GPS covering the traversal with slack on both ends
            let end_s = FIRST_FRAME_S + FRAME_PERIOD_S * (opts.places as u64 - 1) + FIRST_FRAME_S;
            let mut gps = String::from("timestamp,lat,lon\n");
            for t in 0..=end_s {
                let u = ((t as f64 - FIRST_FRAME_S as f64) / FRAME_PERIOD_S as f64)
                    .clamp(0.0, opts.places as f64 - 1.0);
                let u = match direction {
                    Direction::Forward => u,
                    Direction::Backward => opts.places as f64 - 1.0 - u,
                };
                let (lat, lon) = loop_point(u, opts.places);
                gps.push_str(&format!("{t},{lat},{lon}\n"));
            }
            let gps_path = run_dir.join("gps.csv");
            std::fs::write(&gps_path, gps).map_err(CliError::io(&gps_path))?;

            // relative paths keep the dataset byte-identical wherever it lands
            let manifest_text = format!(
                "route loop-a\nseason {}\ntime_of_day morning\ndirection {}\nframes frames\ngps gps.csv\n",
                season_name(scenario),
                direction.name()
            );
            let manifest_path = run_dir.join("manifest.txt");
            std::fs::write(&manifest_path, manifest_text)
                .map_err(CliError::io(&manifest_path))?;
            manifests.push(manifest_path);
        }
    }
    Ok(manifests)
}
