//! The anchor-substitution privacy mapping.
//!
//! A true location `u` is replaced by a token `(anchor, direction bin,
//! distance bin)`. The anchor is drawn from an exponential mechanism with
//! score `-d(u, a) / s`; the bins describe where `u` lies as seen from that
//! anchor. Probabilities are computed exactly (log-sum-exp) so the audit can
//! measure privacy ratios without sampling error.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Anchor;
use crate::geo::{
    bearing_deg, dir_bin, dist_bin, haversine_m, DirectionBin, DistanceBins, GeoError, GeoPoint,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanismError {
    #[error("epsilon must be positive and finite, got {0}")]
    Epsilon(f64),
    #[error("scale must be positive and finite, got {0}")]
    Scale(f64),
    #[error("the anchor set is empty")]
    NoAnchors,
    #[error(transparent)]
    Geo(#[from] GeoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub scale_m: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, scale_m: f64) -> Result<Self, MechanismError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(MechanismError::Epsilon(epsilon));
        }
        if !(scale_m > 0.0 && scale_m.is_finite()) {
            return Err(MechanismError::Scale(scale_m));
        }
        Ok(Self { epsilon, scale_m })
    }

    /// Score multiplier applied to distances: `ε / s`.
    pub fn rate(&self) -> f64 {
        self.epsilon / self.scale_m
    }
}

impl Default for PrivacyParams {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            scale_m: 500.0,
        }
    }
}

/// Exact selection probabilities over the public anchors, in anchor order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorDistribution {
    pub anchor_ids: Vec<String>,
    pub probs: Vec<f64>,
    /// Natural-log probabilities, kept for ratio computations that would
    /// underflow in linear space.
    #[serde(skip)]
    pub log_probs: Vec<f64>,
}

fn log_distribution(u: GeoPoint, anchors: &[Anchor], params: PrivacyParams) -> Vec<f64> {
    let rate = params.rate();
    let scores: Vec<f64> = anchors
        .iter()
        .map(|a| -rate * haversine_m(u, a.loc))
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    scores.into_iter().map(|s| s - log_z).collect()
}

pub fn anchor_distribution(
    u: GeoPoint,
    anchors: &[Anchor],
    params: PrivacyParams,
) -> Result<AnchorDistribution, MechanismError> {
    if anchors.is_empty() {
        return Err(MechanismError::NoAnchors);
    }
    let log_probs = log_distribution(u, anchors, params);
    let mut probs: Vec<f64> = log_probs.iter().map(|l| l.exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(AnchorDistribution {
        anchor_ids: anchors.iter().map(|a| a.id.clone()).collect(),
        probs,
        log_probs,
    })
}

impl AnchorDistribution {
    /// Inverse-CDF draw over the stored order; returns the anchor index.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let target: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if target < acc {
                return i;
            }
        }
        // rounding left the cumulative sum just below 1
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

pub fn sample_anchor<'a, R: Rng + ?Sized>(dist: &'a AnchorDistribution, rng: &mut R) -> &'a str {
    &dist.anchor_ids[dist.sample_index(rng)]
}

/// Side information about how a token was produced. Carries no coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenMeta {
    pub run: String,
    /// `u` coincided with the anchor, so the direction defaulted to N.
    #[serde(default)]
    pub degenerate_bearing: bool,
    /// `u` was at least the cap away from the anchor.
    #[serde(default)]
    pub out_of_cap: bool,
}

/// The released location token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PasToken {
    pub anchor_id: String,
    pub dir: DirectionBin,
    pub dist_bin: usize,
    pub params: PrivacyParams,
    pub seed_tag: TokenMeta,
}

impl fmt::Display for PasToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(anchor={}, dir={}, dist_bin={})",
            self.anchor_id, self.dir, self.dist_bin
        )
    }
}

/// Direction and ring of `u` as seen from `anchor_loc`.
pub fn bins_for(
    anchor_loc: GeoPoint,
    u: GeoPoint,
    bins: &DistanceBins,
) -> Result<(DirectionBin, usize, TokenMeta), MechanismError> {
    let bearing = bearing_deg(anchor_loc, u);
    let dir = if bearing.degenerate {
        DirectionBin::N
    } else {
        dir_bin(bearing.degrees)
    };
    let ring = dist_bin(haversine_m(u, anchor_loc), bins)?;
    Ok((
        dir,
        ring.index,
        TokenMeta {
            run: String::new(),
            degenerate_bearing: bearing.degenerate,
            out_of_cap: ring.out_of_cap,
        },
    ))
}

/// Samples an anchor and bins `u` relative to it. The direction is the bearing
/// from the anchor to `u`, so `u` always lies in the token's region.
pub fn make_token<R: Rng + ?Sized>(
    u: GeoPoint,
    anchors: &[Anchor],
    params: PrivacyParams,
    bins: &DistanceBins,
    run: &str,
    rng: &mut R,
) -> Result<PasToken, MechanismError> {
    let dist = anchor_distribution(u, anchors, params)?;
    let anchor = &anchors[dist.sample_index(rng)];
    let (dir, dist_bin, mut meta) = bins_for(anchor.loc, u, bins)?;
    meta.run = run.to_string();
    Ok(PasToken {
        anchor_id: anchor.id.clone(),
        dir,
        dist_bin,
        params,
        seed_tag: meta,
    })
}

/// One full-token outcome whose probability ratio between two grid points
/// exceeds the ε bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenViolation {
    pub u_index: usize,
    pub v_index: usize,
    pub anchor_id: String,
    pub dir: DirectionBin,
    pub dist_bin: usize,
    /// `None` when the token is impossible under `v` (unbounded ratio).
    pub log_ratio: Option<f64>,
    pub unbounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub epsilon: f64,
    pub scale_m: f64,
    pub grid_points: usize,
    pub pairs_checked: usize,
    pub duplicate_pairs_skipped: usize,
    pub no_pairs: bool,
    /// Largest `Pr(a|u) / Pr(a|v)` over ordered pairs and anchors.
    pub max_ratio_anchor_marginal: f64,
    /// Largest `Pr(a|u) / Pr(a|v) / exp(ε d(u,v) / s)`; at most 1 iff the ε bound holds.
    pub bound_eps: f64,
    /// Same with `exp(2ε d(u,v) / s)`.
    pub bound_2eps: f64,
    pub eps_bound_holds: bool,
    pub two_eps_bound_holds: bool,
    pub full_token_violation_count: usize,
    pub full_token_unbounded_count: usize,
    /// Up to [`MAX_REPORTED_VIOLATIONS`] examples.
    pub full_token_violations: Vec<TokenViolation>,
}

pub const MAX_REPORTED_VIOLATIONS: usize = 100;

/// Relative slack on the bound checks, absorbing floating-point error.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

/// Measures geo-DP ratios of the mechanism on every ordered pair of grid points.
pub fn audit_geo_dp(
    anchors: &[Anchor],
    params: PrivacyParams,
    bins: &DistanceBins,
    grid: &[GeoPoint],
) -> Result<AuditReport, MechanismError> {
    if anchors.is_empty() {
        return Err(MechanismError::NoAnchors);
    }
    let rate = params.rate();
    let logs: Vec<Vec<f64>> = grid
        .iter()
        .map(|&u| log_distribution(u, anchors, params))
        .collect();
    let mut tokens = Vec::with_capacity(grid.len());
    for &u in grid {
        let row = anchors
            .iter()
            .map(|a| bins_for(a.loc, u, bins).map(|(d, r, _)| (d, r)))
            .collect::<Result<Vec<_>, _>>()?;
        tokens.push(row);
    }

    let mut pairs = 0;
    let mut duplicates = 0;
    let mut max_log_ratio = f64::NEG_INFINITY;
    let mut max_log_eps = f64::NEG_INFINITY;
    let mut max_log_2eps = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    let mut violation_count = 0;
    let mut unbounded_count = 0;

    for (i, &u) in grid.iter().enumerate() {
        for (j, &v) in grid.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = haversine_m(u, v);
            if d == 0.0 {
                duplicates += 1;
                continue;
            }
            pairs += 1;
            let eps_budget = rate * d;
            for (k, anchor) in anchors.iter().enumerate() {
                let log_ratio = logs[i][k] - logs[j][k];
                max_log_ratio = max_log_ratio.max(log_ratio);
                max_log_eps = max_log_eps.max(log_ratio - eps_budget);
                max_log_2eps = max_log_2eps.max(log_ratio - 2.0 * eps_budget);

                // The token for anchor k under u is reachable under v only if
                // v lands in the same bins.
                let same_token = tokens[i][k] == tokens[j][k];
                let violates = !same_token || log_ratio > eps_budget + AUDIT_TOLERANCE;
                if violates {
                    violation_count += 1;
                    if !same_token {
                        unbounded_count += 1;
                    }
                    if violations.len() < MAX_REPORTED_VIOLATIONS {
                        let (dir, dist_bin) = tokens[i][k];
                        violations.push(TokenViolation {
                            u_index: i,
                            v_index: j,
                            anchor_id: anchor.id.clone(),
                            dir,
                            dist_bin,
                            log_ratio: same_token.then_some(log_ratio),
                            unbounded: !same_token,
                        });
                    }
                }
            }
        }
    }

    let no_pairs = pairs == 0;
    let (max_ratio, bound_eps, bound_2eps) = if no_pairs {
        (1.0, 0.0, 0.0)
    } else {
        (max_log_ratio.exp(), max_log_eps.exp(), max_log_2eps.exp())
    };
    // compared in log space so large ratios cannot overflow
    let holds = |log_excess: f64| no_pairs || log_excess <= AUDIT_TOLERANCE.ln_1p();
    Ok(AuditReport {
        epsilon: params.epsilon,
        scale_m: params.scale_m,
        grid_points: grid.len(),
        pairs_checked: pairs,
        duplicate_pairs_skipped: duplicates,
        no_pairs,
        max_ratio_anchor_marginal: max_ratio,
        bound_eps,
        bound_2eps,
        eps_bound_holds: holds(max_log_eps),
        two_eps_bound_holds: holds(max_log_2eps),
        full_token_violation_count: violation_count,
        full_token_unbounded_count: unbounded_count,
        full_token_violations: violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::destination;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn anchor(id: &str, loc: GeoPoint) -> Anchor {
        Anchor {
            id: id.into(),
            name: id.into(),
            neighborhood: String::new(),
            loc,
            extra: BTreeMap::new(),
        }
    }

    #[test]
    fn equidistant_anchors_are_uniform() {
        let u = pt(40.7, -74.0);
        let anchors = vec![
            anchor("a", destination(u, 90.0, 700.0)),
            anchor("b", destination(u, 270.0, 700.0)),
        ];
        let d = anchor_distribution(u, &anchors, PrivacyParams::default()).unwrap();
        assert!((d.probs[0] - 0.5).abs() < 1e-9);
        assert!((d.probs[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn two_anchor_closed_form() {
        let u = pt(40.7, -74.0);
        let anchors = vec![anchor("a", u), anchor("b", destination(u, 0.0, 500.0))];
        let s = 500.0;
        // exact distance to b, so the closed form uses the same d as the code
        let d_b = haversine_m(u, anchors[1].loc);
        let w = (-d_b / s).exp();
        let dist = anchor_distribution(u, &anchors, PrivacyParams::new(1.0, s).unwrap()).unwrap();
        assert!((dist.probs[0] - 1.0 / (1.0 + w)).abs() < 1e-12);
        assert!((dist.probs[0] - 0.7311).abs() < 1e-4);
        assert!((dist.probs[1] - 0.2689).abs() < 1e-4);
    }

    #[test]
    fn tiny_epsilon_is_uniform() {
        let u = pt(40.7, -74.0);
        let anchors: Vec<Anchor> = (0..5)
            .map(|i| {
                anchor(
                    &i.to_string(),
                    destination(u, 72.0 * i as f64, 500.0 + 900.0 * i as f64),
                )
            })
            .collect();
        let d = anchor_distribution(u, &anchors, PrivacyParams::new(1e-9, 500.0).unwrap()).unwrap();
        assert!(d.probs.iter().all(|p| (p - 0.2).abs() < 1e-6));
    }

    #[test]
    fn empty_anchor_set_is_an_error() {
        assert_eq!(
            anchor_distribution(pt(0.0, 0.0), &[], PrivacyParams::default()),
            Err(MechanismError::NoAnchors)
        );
        assert!(PrivacyParams::new(0.0, 500.0).is_err());
        assert!(PrivacyParams::new(1.0, -1.0).is_err());
    }

    #[test]
    fn sampling_frequencies_match_probabilities() {
        let dist = AnchorDistribution {
            anchor_ids: vec!["a".into(), "b".into()],
            probs: vec![0.7311, 0.2689],
            log_probs: vec![],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| dist.sample_index(&mut rng) == 0).count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.7311).abs() < 0.003, "{freq}");
    }

    #[test]
    fn sampling_is_deterministic_and_degenerate_case() {
        let single = AnchorDistribution {
            anchor_ids: vec!["only".into()],
            probs: vec![1.0],
            log_probs: vec![0.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| sample_anchor(&single, &mut rng) == "only"));

        let u = pt(40.7, -74.0);
        let anchors: Vec<Anchor> = (0..6)
            .map(|i| {
                anchor(
                    &i.to_string(),
                    destination(u, 60.0 * i as f64, 300.0 * (i + 1) as f64),
                )
            })
            .collect();
        let dist = anchor_distribution(u, &anchors, PrivacyParams::default()).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| dist.sample_index(&mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
    }

    #[test]
    fn token_for_single_anchor() {
        let a = pt(40.7, -74.0);
        let u = destination(a, 0.0, 1000.0);
        let anchors = vec![anchor("only", a)];
        let bins = DistanceBins::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tok = make_token(u, &anchors, PrivacyParams::default(), &bins, "t", &mut rng).unwrap();
        assert_eq!(
            (tok.anchor_id.as_str(), tok.dir, tok.dist_bin),
            ("only", DirectionBin::N, 1)
        );
        assert!(!tok.seed_tag.out_of_cap && !tok.seed_tag.degenerate_bearing);

        let far = destination(a, 200.0, 8000.0);
        let tok = make_token(
            far,
            &anchors,
            PrivacyParams::default(),
            &bins,
            "t",
            &mut rng,
        )
        .unwrap();
        assert_eq!(tok.dist_bin, 3);
        assert!(tok.seed_tag.out_of_cap);

        let tok = make_token(a, &anchors, PrivacyParams::default(), &bins, "t", &mut rng).unwrap();
        assert_eq!(tok.dir, DirectionBin::N);
        assert!(tok.seed_tag.degenerate_bearing);
    }

    #[test]
    fn token_on_sector_boundary_uses_half_open_rule() {
        let a = pt(0.0, 0.0);
        // on the equator a 22.5° great-circle heading keeps its initial bearing
        let u = destination(a, 22.5, 300.0);
        let b = bearing_deg(a, u).degrees;
        assert!((b - 22.5).abs() < 1e-9);
        let (dir, _, _) = bins_for(
            a,
            destination(a, 22.5 + 1e-7, 300.0),
            &DistanceBins::default(),
        )
        .unwrap();
        assert_eq!(dir, DirectionBin::NE);
        assert_eq!(dir_bin(22.5), DirectionBin::NE);
    }

    #[test]
    fn token_json_has_no_coordinates() {
        let a = pt(40.7, -74.0);
        let u = destination(a, 10.0, 700.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tok = make_token(
            u,
            &[anchor("x", a)],
            PrivacyParams::default(),
            &DistanceBins::default(),
            "run",
            &mut rng,
        )
        .unwrap();
        let json = serde_json::to_string(&tok).unwrap();
        assert!(
            !json.contains("\"lat\"") && !json.contains("\"lon\""),
            "{json}"
        );
        let back: PasToken = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tok);
    }

    #[test]
    fn audit_single_point_has_no_pairs() {
        let anchors = vec![anchor("a", pt(40.7, -74.0))];
        let r = audit_geo_dp(
            &anchors,
            PrivacyParams::default(),
            &DistanceBins::default(),
            &[pt(40.71, -74.0)],
        )
        .unwrap();
        assert!(r.no_pairs);
        assert_eq!(r.pairs_checked, 0);
        assert!(r.two_eps_bound_holds);
    }

    #[test]
    fn audit_skips_duplicates() {
        let anchors = vec![anchor("a", pt(40.7, -74.0)), anchor("b", pt(40.72, -74.0))];
        let p = pt(40.71, -74.0);
        let r = audit_geo_dp(
            &anchors,
            PrivacyParams::default(),
            &DistanceBins::default(),
            &[p, p, pt(40.711, -74.0)],
        )
        .unwrap();
        assert_eq!(r.duplicate_pairs_skipped, 2);
        assert_eq!(r.pairs_checked, 4);
    }

    /// Independent check of the 2ε bound on a 5×5 grid: ratios computed from
    /// unnormalized weights rather than the log-sum-exp path.
    #[test]
    fn two_eps_bound_on_grid_matches_direct_computation() {
        let anchors: Vec<Anchor> = (0..6)
            .map(|i| {
                anchor(
                    &i.to_string(),
                    pt(
                        40.70 + 0.01 * (i % 3) as f64,
                        -74.0 + 0.015 * (i / 3) as f64,
                    ),
                )
            })
            .collect();
        let grid: Vec<GeoPoint> = (0..5)
            .flat_map(|i| {
                (0..5).map(move |j| pt(40.69 + 0.01 * i as f64, -74.01 + 0.01 * j as f64))
            })
            .collect();
        let params = PrivacyParams::default();
        let weights = |u: GeoPoint| -> Vec<f64> {
            let w: Vec<f64> = anchors
                .iter()
                .map(|a| (-haversine_m(u, a.loc) / 500.0).exp())
                .collect();
            let z: f64 = w.iter().sum();
            w.into_iter().map(|x| x / z).collect()
        };
        let mut worst = 0.0f64;
        for &u in &grid {
            for &v in &grid {
                let d = haversine_m(u, v);
                if d == 0.0 {
                    continue;
                }
                let (pu, pv) = (weights(u), weights(v));
                for k in 0..anchors.len() {
                    worst = worst.max(pu[k] / pv[k] / (2.0 * d / 500.0).exp());
                }
            }
        }
        assert!(worst <= 1.0 + 1e-9);
        let r = audit_geo_dp(&anchors, params, &DistanceBins::default(), &grid).unwrap();
        assert!(r.two_eps_bound_holds);
        assert!(
            (r.bound_2eps - worst).abs() < 1e-9 * worst.max(1.0),
            "{} vs {worst}",
            r.bound_2eps
        );
    }

    #[test]
    fn straddling_sector_boundary_gives_unbounded_token_ratio() {
        let a = pt(40.7, -74.0);
        // the single anchor sees u just west of 22.5° (N) and v just east (NE)
        let u = destination(a, 22.0, 300.0);
        let v = destination(a, 23.0, 300.0);
        let r = audit_geo_dp(
            &[anchor("a", a)],
            PrivacyParams::default(),
            &DistanceBins::default(),
            &[u, v],
        )
        .unwrap();
        assert_eq!(r.pairs_checked, 2);
        assert_eq!(r.full_token_unbounded_count, 2);
        assert!(r
            .full_token_violations
            .iter()
            .all(|v| v.unbounded && v.log_ratio.is_none()));
        // the anchor marginal is trivially 1 with a single anchor
        assert!((r.max_ratio_anchor_marginal - 1.0).abs() < 1e-12);
    }

    fn anchors_strategy() -> impl Strategy<Value = Vec<Anchor>> {
        prop::collection::vec((40.6..40.8f64, -74.1..-73.9f64), 1..12).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (la, lo))| anchor(&format!("a{i}"), pt(la, lo)))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn probabilities_normalize(anchors in anchors_strategy(), la in 40.6..40.8f64, lo in -74.1..-73.9f64, eps in 0.01..10.0f64) {
            let d = anchor_distribution(pt(la, lo), &anchors, PrivacyParams::new(eps, 500.0).unwrap()).unwrap();
            let sum: f64 = d.probs.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(d.probs.iter().all(|&p| p >= 0.0));
        }

        #[test]
        fn closer_anchor_is_more_likely(anchors in anchors_strategy(), la in 40.6..40.8f64, lo in -74.1..-73.9f64) {
            let u = pt(la, lo);
            let d = anchor_distribution(u, &anchors, PrivacyParams::default()).unwrap();
            for i in 0..anchors.len() {
                for j in 0..anchors.len() {
                    let (di, dj) = (haversine_m(u, anchors[i].loc), haversine_m(u, anchors[j].loc));
                    // only where the weights stay representable
                    if di < dj && d.probs[j] > 0.0 {
                        prop_assert!(d.probs[i] > d.probs[j]);
                    }
                }
            }
        }

        #[test]
        fn only_the_ratio_of_epsilon_to_scale_matters(anchors in anchors_strategy(), la in 40.6..40.8f64, lo in -74.1..-73.9f64, c in prop::sample::select(vec![0.5, 2.0, 4.0, 0.25])) {
            let u = pt(la, lo);
            let a = anchor_distribution(u, &anchors, PrivacyParams::new(1.0, 500.0).unwrap()).unwrap();
            let b = anchor_distribution(u, &anchors, PrivacyParams::new(1.0 / c, 500.0 / c).unwrap()).unwrap();
            prop_assert_eq!(a.probs, b.probs);
        }

        #[test]
        fn audited_two_eps_bound_holds(anchors in anchors_strategy(), eps in 0.1..5.0f64) {
            let grid: Vec<GeoPoint> = (0..4)
                .flat_map(|i| (0..4).map(move |j| pt(40.6 + 0.06 * i as f64, -74.1 + 0.06 * j as f64)))
                .collect();
            let r = audit_geo_dp(&anchors, PrivacyParams::new(eps, 500.0).unwrap(), &DistanceBins::default(), &grid).unwrap();
            prop_assert!(r.two_eps_bound_holds, "{}", r.bound_2eps);
        }
    }
}
