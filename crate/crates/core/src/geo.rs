//! GPS tracks, interpolation to frame timestamps, and the same-place
//! ground-truth relation used for loop-closure evaluation.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Default same-place radius in meters.
pub const DEFAULT_RADIUS_M: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsSample {
    pub timestamp: f64,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

/// Time-sorted sequence of GPS fixes.
#[derive(Debug, Clone, PartialEq)]
pub struct GpsTrack {
    samples: Vec<GpsSample>,
}

impl GpsTrack {
    pub fn new(samples: Vec<GpsSample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Validation(format!(
                "GPS track needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.timestamp.is_finite() || !s.lat.is_finite() || !s.lon.is_finite() {
                return Err(Error::Validation(format!("GPS sample {i} has non-finite fields")));
            }
            if !(-90.0..=90.0).contains(&s.lat) {
                return Err(Error::Validation(format!("GPS sample {i}: lat {} out of range", s.lat)));
            }
            if !(-180.0..=180.0).contains(&s.lon) {
                return Err(Error::Validation(format!("GPS sample {i}: lon {} out of range", s.lon)));
            }
            if i > 0 && s.timestamp <= samples[i - 1].timestamp {
                return Err(Error::Validation(format!(
                    "GPS timestamps must be strictly increasing (sample {i})"
                )));
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[GpsSample] {
        &self.samples
    }

    pub fn span(&self) -> (f64, f64) {
        (self.samples[0].timestamp, self.samples[self.samples.len() - 1].timestamp)
    }

    /// Piecewise-linear interpolation in raw lat/lon. No extrapolation.
    pub fn interpolate(&self, t: f64) -> Result<LatLon> {
        let (first, last) = self.span();
        if !(t >= first && t <= last) {
            return Err(Error::Validation(format!(
                "timestamp {t} outside track span [{first}, {last}]; extrapolation not performed"
            )));
        }
        // binary search for the bracketing segment
        let idx = self
            .samples
            .partition_point(|s| s.timestamp <= t)
            .min(self.samples.len() - 1);
        let (lo, hi) = (&self.samples[idx - 1], &self.samples[idx]);
        if t == lo.timestamp {
            return Ok(LatLon { lat: lo.lat, lon: lo.lon });
        }
        let frac = (t - lo.timestamp) / (hi.timestamp - lo.timestamp);
        Ok(LatLon {
            lat: lo.lat + frac * (hi.lat - lo.lat),
            lon: lo.lon + frac * (hi.lon - lo.lon),
        })
    }
}

/// Great-circle distance in meters.
pub fn haversine_m(p1: LatLon, p2: LatLon) -> f64 {
    let to_rad = core::f64::consts::PI / 180.0;
    let dlat = (p2.lat - p1.lat) * to_rad;
    let dlon = (p2.lon - p1.lon) * to_rad;
    let s1 = libm::sin(dlat / 2.0);
    let s2 = libm::sin(dlon / 2.0);
    let a = s1 * s1 + libm::cos(p1.lat * to_rad) * libm::cos(p2.lat * to_rad) * s2 * s2;
    2.0 * EARTH_RADIUS_M * libm::asin(libm::sqrt(a.min(1.0)))
}

/// Binary same-place relation between query and template frames.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Row i, column j: query i and template j within `radius_m`.
    pub same_place: Vec<Vec<bool>>,
    pub radius_m: f64,
}

impl GroundTruth {
    pub fn num_queries(&self) -> usize {
        self.same_place.len()
    }

    pub fn num_templates(&self) -> usize {
        self.same_place.first().map_or(0, |r| r.len())
    }

    pub fn positive_count(&self) -> usize {
        self.same_place.iter().flatten().filter(|&&v| v).count()
    }
}

/// Marks query/template pairs whose interpolated positions are within
/// `radius_m` meters. Direction-agnostic: only positions matter.
pub fn build_ground_truth(
    query_times: &[f64],
    template_times: &[f64],
    query_track: &GpsTrack,
    template_track: &GpsTrack,
    radius_m: f64,
) -> Result<GroundTruth> {
    if !(radius_m > 0.0 && radius_m.is_finite()) {
        return Err(Error::Validation(format!("radius {radius_m} must be > 0")));
    }
    let query_pos: Vec<LatLon> = query_times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            query_track
                .interpolate(t)
                .map_err(|e| Error::Validation(format!("query frame {i}: {e}")))
        })
        .collect::<Result<_>>()?;
    let template_pos: Vec<LatLon> = template_times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            template_track
                .interpolate(t)
                .map_err(|e| Error::Validation(format!("template frame {j}: {e}")))
        })
        .collect::<Result<_>>()?;
    let same_place = query_pos
        .iter()
        .map(|&q| template_pos.iter().map(|&t| haversine_m(q, t) < radius_m).collect())
        .collect();
    Ok(GroundTruth { same_place, radius_m })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight_track() -> GpsTrack {
        GpsTrack::new(
            [
                GpsSample { timestamp: 0.0, lat: 0.0, lon: 0.0 },
                GpsSample { timestamp: 10.0, lat: 0.001, lon: 0.0 },
                GpsSample { timestamp: 20.0, lat: 0.002, lon: 0.0 },
            ]
            .to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn interpolation_hits_samples_and_midpoints() {
        let track = straight_track();
        let at_sample = track.interpolate(10.0).unwrap();
        assert_eq!(at_sample.lat, 0.001);
        let mid = track.interpolate(5.0).unwrap();
        assert!((mid.lat - 0.0005).abs() < 1e-15);
        assert!(track.interpolate(-1.0).is_err());
        assert!(track.interpolate(20.5).is_err());
    }

    #[test]
    fn haversine_reference_values() {
        let origin = LatLon { lat: 0.0, lon: 0.0 };
        assert_eq!(haversine_m(origin, origin), 0.0);
        // one degree of longitude at the equator: 2πR/360 ≈ 111 195 m
        let one_deg = haversine_m(origin, LatLon { lat: 0.0, lon: 1.0 });
        let expect = 2.0 * core::f64::consts::PI * EARTH_RADIUS_M / 360.0;
        assert!((one_deg - expect).abs() < 1e-6, "{one_deg} vs {expect}");
        // symmetry
        let a = LatLon { lat: 39.75, lon: -105.22 };
        let b = LatLon { lat: 39.74, lon: -105.20 };
        assert_eq!(haversine_m(a, b), haversine_m(b, a));
    }

    #[test]
    fn identical_tracks_give_true_diagonal() {
        let track = straight_track();
        let times = [0.0, 10.0, 20.0];
        let gt = build_ground_truth(&times, &times, &track, &track, 50.0).unwrap();
        for i in 0..3 {
            assert!(gt.same_place[i][i]);
        }
        // samples are ~111 m apart, so off-diagonal is false at 50 m
        assert!(!gt.same_place[0][1]);
        assert!(!gt.same_place[2][0]);
    }

    #[test]
    fn distant_tracks_give_all_false() {
        let near = straight_track();
        let far = GpsTrack::new(
            [
                GpsSample { timestamp: 0.0, lat: 0.1, lon: 0.0 },
                GpsSample { timestamp: 20.0, lat: 0.102, lon: 0.0 },
            ]
            .to_vec(),
        )
        .unwrap();
        let times = [0.0, 10.0, 20.0];
        let gt = build_ground_truth(&times, &times, &near, &far, 50.0).unwrap();
        assert_eq!(gt.positive_count(), 0);
    }

    #[test]
    fn reversed_traversal_matches_on_anti_diagonal() {
        // forward track and its reversed traversal over the same 5 points
        let pts: Vec<f64> = (0..5).map(|i| i as f64 * 0.001).collect();
        let fwd = GpsTrack::new(
            pts.iter()
                .enumerate()
                .map(|(i, &lat)| GpsSample { timestamp: i as f64, lat, lon: 0.0 })
                .collect(),
        )
        .unwrap();
        let bwd = GpsTrack::new(
            pts.iter()
                .rev()
                .enumerate()
                .map(|(i, &lat)| GpsSample { timestamp: i as f64, lat, lon: 0.0 })
                .collect(),
        )
        .unwrap();
        let times: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let gt = build_ground_truth(&times, &times, &bwd, &fwd, 50.0).unwrap();
        // brute-force check: entry (i, j) true iff positions coincide, i.e. j = 4 - i
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(gt.same_place[i][j], j == 4 - i, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn radius_is_monotone_and_transpose_symmetric() {
        let track = straight_track();
        let q = [0.0, 5.0, 10.0, 15.0];
        let t = [0.0, 10.0, 20.0];
        let small = build_ground_truth(&q, &t, &track, &track, 40.0).unwrap();
        let big = build_ground_truth(&q, &t, &track, &track, 120.0).unwrap();
        for i in 0..q.len() {
            for j in 0..t.len() {
                if small.same_place[i][j] {
                    assert!(big.same_place[i][j]);
                }
            }
        }
        let swapped = build_ground_truth(&t, &q, &track, &track, 40.0).unwrap();
        for i in 0..q.len() {
            for j in 0..t.len() {
                assert_eq!(small.same_place[i][j], swapped.same_place[j][i]);
            }
        }
    }
}
