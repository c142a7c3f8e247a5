//! The uncertainty region of a token: the annular sector around the anchor
//! that contains every location consistent with it.

use log::debug;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::Anchor;
use crate::geo::{
    bearing_deg, destination, dir_bin, haversine_m, DirectionBin, DistanceBins, GeoError, GeoPoint,
    TangentPlane,
};
use crate::mechanism::PasToken;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error("token references unknown anchor {0}")]
    UnknownAnchor(String),
    #[error("ring [{lo}, {hi}) is empty or negative")]
    Ring { lo: f64, hi: f64 },
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error(transparent)]
    Geo(#[from] GeoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UncertaintyRegion {
    pub anchor_loc: GeoPoint,
    pub dir: DirectionBin,
    pub r_lo: f64,
    pub r_hi: f64,
}

impl UncertaintyRegion {
    pub fn new(
        anchor_loc: GeoPoint,
        dir: DirectionBin,
        r_lo: f64,
        r_hi: f64,
    ) -> Result<Self, RegionError> {
        if !(r_lo >= 0.0 && r_lo < r_hi && r_hi.is_finite()) {
            return Err(RegionError::Ring { lo: r_lo, hi: r_hi });
        }
        Ok(Self {
            anchor_loc,
            dir,
            r_lo,
            r_hi,
        })
    }

    pub fn from_token(
        token: &PasToken,
        anchors: &[Anchor],
        bins: &DistanceBins,
    ) -> Result<Self, RegionError> {
        let anchor = anchors
            .iter()
            .find(|a| a.id == token.anchor_id)
            .ok_or_else(|| RegionError::UnknownAnchor(token.anchor_id.clone()))?;
        let (lo, hi) = bins.ring(token.dist_bin)?;
        Self::new(anchor.loc, token.dir, lo, hi)
    }

    /// Planar area of the annular sector in m².
    pub fn area_m2(&self) -> f64 {
        let angle = DirectionBin::WIDTH_DEG.to_radians();
        0.5 * angle * (self.r_hi * self.r_hi - self.r_lo * self.r_lo)
    }

    /// Upper bound on the distance between two points of the region.
    pub fn diameter_m(&self) -> f64 {
        2.0 * self.r_hi
    }

    pub fn contains(&self, x: GeoPoint) -> bool {
        let d = haversine_m(self.anchor_loc, x);
        if d == 0.0 {
            // bearing is undefined at the anchor itself
            return self.r_lo == 0.0;
        }
        if !(self.r_lo <= d && d < self.r_hi) {
            return false;
        }
        let b = bearing_deg(self.anchor_loc, x);
        !b.degenerate && dir_bin(b.degrees) == self.dir
    }
}

/// Latent user locations drawn from a region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatentSamples {
    /// Anchor of the region; the tangent-plane origin for centroid estimation.
    pub origin: GeoPoint,
    pub points: Vec<GeoPoint>,
    /// Draws rejected because floating-point rounding put them outside the region.
    pub redraws: usize,
}

impl LatentSamples {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Draws `k` area-uniform points from the region. Every returned point
/// passes [`UncertaintyRegion::contains`].
pub fn sample_region<R: Rng + ?Sized>(
    region: &UncertaintyRegion,
    k: usize,
    rng: &mut R,
) -> Result<LatentSamples, RegionError> {
    if k == 0 {
        return Err(RegionError::NoSamples);
    }
    let start = region.dir.sector_start_deg();
    let (lo2, hi2) = (region.r_lo * region.r_lo, region.r_hi * region.r_hi);
    let mut points = Vec::with_capacity(k);
    let mut redraws = 0;
    while points.len() < k {
        let bearing = start + DirectionBin::WIDTH_DEG * rng.random::<f64>();
        let radius = (lo2 + rng.random::<f64>() * (hi2 - lo2)).sqrt();
        let p = destination(region.anchor_loc, bearing, radius);
        if region.contains(p) {
            points.push(p);
        } else {
            redraws += 1;
        }
    }
    if redraws > 0 {
        debug!("sample_region: {redraws} boundary draws redrawn for {k} samples");
    }
    Ok(LatentSamples {
        origin: region.anchor_loc,
        points,
        redraws,
    })
}

/// Mean of the samples in the east/north tangent plane at the anchor.
pub fn centroid(samples: &LatentSamples) -> GeoPoint {
    let plane = TangentPlane::new(samples.origin);
    let n = samples.points.len().max(1) as f64;
    let (mut e, mut north) = (0.0, 0.0);
    for &p in &samples.points {
        let (x, y) = plane.to_local(p);
        e += x;
        north += y;
    }
    plane.to_geo(e / n, north / n)
}

/// Localization error of a centroid adversary who sees only `token`.
pub fn ale<R: Rng + ?Sized>(
    true_loc: GeoPoint,
    token: &PasToken,
    anchors: &[Anchor],
    bins: &DistanceBins,
    k: usize,
    rng: &mut R,
) -> Result<f64, RegionError> {
    let region = UncertaintyRegion::from_token(token, anchors, bins)?;
    let samples = sample_region(&region, k, rng)?;
    Ok(haversine_m(true_loc, centroid(&samples)))
}
