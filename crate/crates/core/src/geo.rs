//! Spherical geodesy and the direction/distance partitions.
//!
//! Everything here works on a sphere of radius [`EARTH_RADIUS_M`]. Inputs are
//! decimal degrees, distances are meters, and bearings are measured clockwise
//! from true north.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Mean Earth radius used for every distance computation.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Meters in one international mile.
pub const METERS_PER_MILE: f64 = 1609.344;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} is not finite")]
    Longitude(f64),
    #[error("negative distance {0} m")]
    NegativeDistance(f64),
    #[error("distance bin edges must start at 0 and be strictly increasing, got {0:?}")]
    Edges(Vec<f64>),
    #[error("distance cap {cap} must exceed the last edge {last}")]
    Cap { cap: f64, last: f64 },
    #[error("unknown direction label {0:?}")]
    DirectionLabel(String),
    #[error("direction index {0} out of range")]
    DirectionIndex(usize),
    #[error("distance bin {index} out of range for {count} rings")]
    RingIndex { index: usize, count: usize },
}

/// A latitude/longitude pair in decimal degrees.
///
/// Longitude is normalized into `[-180, 180)` on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::Latitude(lat));
        }
        if !lon.is_finite() {
            return Err(GeoError::Longitude(lon));
        }
        Ok(Self {
            lat,
            lon: normalize_lon(lon),
        })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

fn normalize_lon(lon: f64) -> f64 {
    if (-180.0..180.0).contains(&lon) {
        return lon;
    }
    let wrapped = (lon + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360.0 for tiny negative inputs
    if wrapped >= 180.0 {
        wrapped - 360.0
    } else {
        wrapped
    }
}

/// Formats a coordinate with the shortest round-trip representation, padded
/// to at least six fractional digits.
fn format_coord(value: f64) -> String {
    let mut s = format!("{value}");
    match s.find('.') {
        Some(dot) => {
            let frac = s.len() - dot - 1;
            for _ in frac..6 {
                s.push('0');
            }
        }
        None => s.push_str(".000000"),
    }
    s
}

impl Serialize for GeoPoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::{Error, SerializeStruct};
        use serde_json::value::RawValue;
        let lat = RawValue::from_string(format_coord(self.lat)).map_err(S::Error::custom)?;
        let lon = RawValue::from_string(format_coord(self.lon)).map_err(S::Error::custom)?;
        let mut st = serializer.serialize_struct("GeoPoint", 2)?;
        st.serialize_field("lat", &lat)?;
        st.serialize_field("lon", &lon)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for GeoPoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            lat: f64,
            lon: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        GeoPoint::new(raw.lat, raw.lon).map_err(D::Error::custom)
    }
}

/// Great-circle distance in meters.
pub fn haversine_m(p: GeoPoint, q: GeoPoint) -> f64 {
    let (phi1, phi2) = (p.lat.to_radians(), q.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (q.lon - p.lon).to_radians();
    let h = (dphi * 0.5).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda * 0.5).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Initial great-circle bearing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bearing {
    /// Degrees in `[0, 360)`, clockwise from north.
    pub degrees: f64,
    /// Set when the two points coincide; `degrees` is then 0 and must not be binned.
    pub degenerate: bool,
}

pub fn bearing_deg(from: GeoPoint, to: GeoPoint) -> Bearing {
    if from == to {
        return Bearing {
            degrees: 0.0,
            degenerate: true,
        };
    }
    let (phi1, phi2) = (from.lat.to_radians(), to.lat.to_radians());
    let dlambda = (to.lon - from.lon).to_radians();
    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    Bearing {
        degrees: normalize_bearing(y.atan2(x).to_degrees()),
        degenerate: false,
    }
}

/// Maps any finite angle into `[0, 360)`.
pub fn normalize_bearing(deg: f64) -> f64 {
    let b = deg.rem_euclid(360.0);
    if b >= 360.0 {
        0.0
    } else {
        b
    }
}

/// Point reached by travelling `dist_m` along the great circle leaving
/// `origin` at `bearing` degrees.
pub fn destination(origin: GeoPoint, bearing: f64, dist_m: f64) -> GeoPoint {
    if dist_m == 0.0 {
        return origin;
    }
    let delta = dist_m / EARTH_RADIUS_M;
    let theta = bearing.to_radians();
    let phi1 = origin.lat.to_radians();
    let lambda1 = origin.lon.to_radians();
    let sin_phi2 = phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos();
    let phi2 = sin_phi2.clamp(-1.0, 1.0).asin();
    let y = theta.sin() * delta.sin() * phi1.cos();
    let x = delta.cos() - phi1.sin() * sin_phi2;
    let lambda2 = lambda1 + y.atan2(x);
    GeoPoint {
        lat: phi2.to_degrees().clamp(-90.0, 90.0),
        lon: normalize_lon(lambda2.to_degrees()),
    }
}

/// One of the eight compass sectors, each 45° wide and centered on its heading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DirectionBin {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl DirectionBin {
    pub const COUNT: usize = 8;
    pub const ALL: [DirectionBin; 8] = [
        DirectionBin::N,
        DirectionBin::NE,
        DirectionBin::E,
        DirectionBin::SE,
        DirectionBin::S,
        DirectionBin::SW,
        DirectionBin::W,
        DirectionBin::NW,
    ];
    pub const WIDTH_DEG: f64 = 45.0;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self, GeoError> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or(GeoError::DirectionIndex(index))
    }

    pub fn label(self) -> &'static str {
        match self {
            DirectionBin::N => "N",
            DirectionBin::NE => "NE",
            DirectionBin::E => "E",
            DirectionBin::SE => "SE",
            DirectionBin::S => "S",
            DirectionBin::SW => "SW",
            DirectionBin::W => "W",
            DirectionBin::NW => "NW",
        }
    }

    /// Center heading of the sector.
    pub fn center_deg(self) -> f64 {
        self.index() as f64 * Self::WIDTH_DEG
    }

    /// Half-open sector `[start, start + 45)`; `start` may be negative for N.
    pub fn sector_start_deg(self) -> f64 {
        self.center_deg() - Self::WIDTH_DEG / 2.0
    }

    pub fn opposite(self) -> Self {
        Self::ALL[(self.index() + 4) % 8]
    }
}

impl fmt::Display for DirectionBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DirectionBin {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|d| d.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| GeoError::DirectionLabel(s.to_string()))
    }
}

impl Serialize for DirectionBin {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for DirectionBin {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Sector containing `bearing`. Sector `i` covers `[45i - 22.5, 45i + 22.5)`.
pub fn dir_bin(bearing: f64) -> DirectionBin {
    let shifted = normalize_bearing(bearing + DirectionBin::WIDTH_DEG / 2.0);
    let idx = (shifted / DirectionBin::WIDTH_DEG).floor() as usize;
    DirectionBin::ALL[idx.min(DirectionBin::COUNT - 1)]
}

/// Concentric distance rings around a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceBins {
    edges: Vec<f64>,
    cap: f64,
}

/// Result of assigning a distance to a ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistBin {
    pub index: usize,
    /// The distance was at or beyond the cap and was folded into the last ring.
    pub out_of_cap: bool,
}

impl DistanceBins {
    pub fn new(edges: Vec<f64>, cap: f64) -> Result<Self, GeoError> {
        let valid = !edges.is_empty()
            && edges[0] == 0.0
            && edges.iter().all(|e| e.is_finite())
            && edges.windows(2).all(|w| w[0] < w[1]);
        if !valid {
            return Err(GeoError::Edges(edges));
        }
        let last = *edges.last().unwrap();
        if !cap.is_finite() || cap <= last {
            return Err(GeoError::Cap { cap, last });
        }
        Ok(Self { edges, cap })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `[lo, hi)` bounds of ring `index`; the last ring ends at the cap.
    pub fn ring(&self, index: usize) -> Result<(f64, f64), GeoError> {
        let lo = *self.edges.get(index).ok_or(GeoError::RingIndex {
            index,
            count: self.edges.len(),
        })?;
        let hi = self.edges.get(index + 1).copied().unwrap_or(self.cap);
        Ok((lo, hi))
    }

    pub fn label(&self, index: usize) -> String {
        match self.ring(index) {
            Ok((lo, hi)) if index + 1 == self.edges.len() => format!("{lo:.0}m+ (cap {hi:.0}m)"),
            Ok((lo, hi)) => format!("{lo:.0}-{hi:.0}m"),
            Err(_) => "?".to_string(),
        }
    }
}

impl Default for DistanceBins {
    /// 0-0.5 mi, 0.5-1 mi, 1-2 mi, 2 mi+ capped at 4 mi.
    fn default() -> Self {
        Self {
            edges: vec![
                0.0,
                0.5 * METERS_PER_MILE,
                METERS_PER_MILE,
                2.0 * METERS_PER_MILE,
            ],
            cap: 4.0 * METERS_PER_MILE,
        }
    }
}

impl<'de> Deserialize<'de> for DistanceBins {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            edges: Vec<f64>,
            cap: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        DistanceBins::new(raw.edges, raw.cap).map_err(D::Error::custom)
    }
}

pub fn dist_bin(dist_m: f64, bins: &DistanceBins) -> Result<DistBin, GeoError> {
    if dist_m.is_nan() || dist_m < 0.0 {
        return Err(GeoError::NegativeDistance(dist_m));
    }
    let last = bins.edges.len() - 1;
    if dist_m >= bins.cap {
        return Ok(DistBin {
            index: last,
            out_of_cap: true,
        });
    }
    // number of edges <= dist, minus one
    let index = bins.edges.partition_point(|&e| e <= dist_m) - 1;
    Ok(DistBin {
        index,
        out_of_cap: false,
    })
}

/// Local east/north tangent plane at `origin`, in meters.
///
/// Equirectangular; accurate to well under a meter at the 10 km scale.
#[derive(Debug, Clone, Copy)]
pub struct TangentPlane {
    origin: GeoPoint,
    cos_lat: f64,
}

impl TangentPlane {
    pub fn new(origin: GeoPoint) -> Self {
        Self {
            origin,
            cos_lat: origin.lat.to_radians().cos(),
        }
    }

    pub fn to_local(&self, p: GeoPoint) -> (f64, f64) {
        let mut dlon = p.lon - self.origin.lon;
        if dlon >= 180.0 {
            dlon -= 360.0;
        } else if dlon < -180.0 {
            dlon += 360.0;
        }
        let east = EARTH_RADIUS_M * dlon.to_radians() * self.cos_lat;
        let north = EARTH_RADIUS_M * (p.lat - self.origin.lat).to_radians();
        (east, north)
    }

    pub fn to_geo(&self, east: f64, north: f64) -> GeoPoint {
        let lat = self.origin.lat + (north / EARTH_RADIUS_M).to_degrees();
        let lon = self.origin.lon + (east / (EARTH_RADIUS_M * self.cos_lat)).to_degrees();
        GeoPoint {
            lat: lat.clamp(-90.0, 90.0),
            lon: normalize_lon(lon),
        }
    }
}
