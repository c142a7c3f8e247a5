//! Anchors, chunks and queries: the data model, JSONL persistence, and the
//! synthetic-city generator.
//!
//! A dataset directory holds `anchors.jsonl`, `chunks.jsonl` and
//! `queries.jsonl`, one JSON object per line. Unknown fields survive a
//! lenient load/save cycle; strict loading rejects them along with any
//! violated invariant.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::{DeserializeOwned, Error as _};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

use crate::geo::{
    bearing_deg, destination, dir_bin, dist_bin, haversine_m, DirectionBin, DistanceBins, GeoError,
    GeoPoint, METERS_PER_MILE,
};

pub const ANCHORS_FILE: &str = "anchors.jsonl";
pub const CHUNKS_FILE: &str = "chunks.jsonl";
pub const QUERIES_FILE: &str = "queries.jsonl";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: field `{field}`: {message}")]
    Schema {
        file: String,
        line: usize,
        field: String,
        message: String,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("infeasible generator config: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

pub type Extra = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub id: String,
    pub name: String,
    pub neighborhood: String,
    pub loc: GeoPoint,
    #[serde(flatten)]
    pub extra: Extra,
}

/// Position of a chunk relative to one anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorTag {
    pub anchor_id: String,
    pub dir: DirectionBin,
    pub dist_bin: usize,
    pub dist_m: f64,
    #[serde(flatten)]
    pub extra: Extra,
}

impl AnchorTag {
    /// Tag for `loc` as seen from `anchor`. A chunk sitting exactly on the
    /// anchor gets direction N.
    pub fn compute(anchor: &Anchor, loc: GeoPoint, bins: &DistanceBins) -> Result<Self, GeoError> {
        let bearing = bearing_deg(anchor.loc, loc);
        let dir = if bearing.degenerate {
            DirectionBin::N
        } else {
            dir_bin(bearing.degrees)
        };
        let dist_m = haversine_m(anchor.loc, loc);
        Ok(Self {
            anchor_id: anchor.id.clone(),
            dir,
            dist_bin: dist_bin(dist_m, bins)?.index,
            dist_m,
            extra: Extra::new(),
        })
    }
}

/// A retrievable point of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub name: String,
    pub category: String,
    pub tags: Vec<String>,
    pub description: String,
    pub loc: GeoPoint,
    pub anchor_tags: Vec<AnchorTag>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Chunk {
    /// Text handed to the embedder: name, category, tags, description.
    pub fn semantic_text(&self) -> String {
        format!(
            "{} {} {} {}",
            self.name,
            self.category,
            self.tags.join(" "),
            self.description
        )
    }

    pub fn matches(&self, category: &str, must_have_tags: &[String]) -> bool {
        self.category == category && must_have_tags.iter().all(|t| self.tags.contains(t))
    }
}

/// Direction a result must lie in relative to the user, or no constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DirectionConstraint {
    Any,
    Bin(DirectionBin),
}

impl DirectionConstraint {
    pub fn admits(self, bin: DirectionBin) -> bool {
        match self {
            DirectionConstraint::Any => true,
            DirectionConstraint::Bin(b) => b == bin,
        }
    }
}

impl fmt::Display for DirectionConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DirectionConstraint::Any => f.write_str("Any"),
            DirectionConstraint::Bin(b) => write!(f, "{b}"),
        }
    }
}

impl FromStr for DirectionConstraint {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("any") {
            Ok(DirectionConstraint::Any)
        } else {
            s.parse().map(DirectionConstraint::Bin)
        }
    }
}

impl Serialize for DirectionConstraint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DirectionConstraint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialQuery {
    pub query_id: String,
    pub raw_query: String,
    pub entity_category: String,
    pub must_have_tags: Vec<String>,
    pub true_loc: GeoPoint,
    pub radius_m: f64,
    pub direction_constraint: DirectionConstraint,
    pub ground_truth: Vec<String>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl SpatialQuery {
    /// The semantic half of the decomposed query: category plus required tags.
    pub fn semantic_text(&self) -> String {
        let mut s = self.entity_category.clone();
        for t in &self.must_have_tags {
            s.push(' ');
            s.push_str(t);
        }
        s
    }
}

/// `to` is within `radius_m` of `from` and, if constrained, in direction
/// `direction` as seen from `from`. Coincident points have no direction and
/// fail any directional constraint.
pub fn satisfies_spatial(
    from: GeoPoint,
    to: GeoPoint,
    radius_m: f64,
    direction: DirectionConstraint,
) -> bool {
    if haversine_m(from, to) > radius_m {
        return false;
    }
    match direction {
        DirectionConstraint::Any => true,
        DirectionConstraint::Bin(b) => {
            let br = bearing_deg(from, to);
            !br.degenerate && dir_bin(br.degrees) == b
        }
    }
}

/// Brute-force relevance: category and tags match, within `radius_m` of
/// `true_loc`, and in the constrained direction as seen from `true_loc`.
pub fn ground_truth_for(
    true_loc: GeoPoint,
    radius_m: f64,
    direction: DirectionConstraint,
    category: &str,
    must_have_tags: &[String],
    chunks: &[Chunk],
) -> Vec<String> {
    let mut ids: Vec<String> = chunks
        .iter()
        .filter(|c| c.matches(category, must_have_tags))
        .filter(|c| satisfies_spatial(true_loc, c.loc, radius_m, direction))
        .map(|c| c.doc_id.clone())
        .collect();
    ids.sort();
    ids
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadMode {
    /// Accept unknown fields and skip invariant checks beyond field validity.
    Lenient,
    /// Reject unknown fields and any violated dataset invariant.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub anchors: Vec<Anchor>,
    pub chunks: Vec<Chunk>,
    pub queries: Vec<SpatialQuery>,
}

fn read_jsonl<T: DeserializeOwned>(path: &Path, strict: bool) -> Result<Vec<T>, CorpusError> {
    let file_name = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |field: String, message: String| CorpusError::Schema {
            file: file_name.clone(),
            line: line_no,
            field,
            message,
        };
        let value: Value =
            serde_json::from_str(&line).map_err(|e| schema("<line>".into(), e.to_string()))?;
        if let Some(field) = first_invalid_coordinate(&value) {
            return Err(schema(field.0, field.1));
        }
        let record: T = serde_path_to_error::deserialize(&value).map_err(|e| {
            let field = e.path().to_string();
            schema(field, e.into_inner().to_string())
        })?;
        if strict {
            if let Some(unknown) = unknown_field(&value) {
                return Err(schema(
                    unknown,
                    "unknown field rejected in strict mode".into(),
                ));
            }
        }
        out.push(record);
    }
    Ok(out)
}

/// Finds the first `lat`/`lon` pair that is out of range, reporting its JSON path.
fn first_invalid_coordinate(value: &Value) -> Option<(String, String)> {
    fn walk(v: &Value, path: &str) -> Option<(String, String)> {
        match v {
            Value::Object(map) => {
                if let (Some(lat), Some(lon)) = (map.get("lat"), map.get("lon")) {
                    if let (Some(lat), Some(lon)) = (lat.as_f64(), lon.as_f64()) {
                        return match GeoPoint::new(lat, lon) {
                            Ok(_) => None,
                            Err(GeoError::Latitude(_)) => Some((
                                format!("{path}lat"),
                                format!("latitude {lat} outside [-90, 90]"),
                            )),
                            Err(e) => Some((format!("{path}lon"), e.to_string())),
                        };
                    }
                }
                map.iter()
                    .find_map(|(k, child)| walk(child, &format!("{path}{k}.")))
            }
            Value::Array(items) => items.iter().enumerate().find_map(|(i, child)| {
                walk(child, &format!("{}[{i}].", path.trim_end_matches('.')))
            }),
            _ => None,
        }
    }
    walk(value, "")
}

/// Path of the first key in a record (or one of its anchor tags) that is not
/// part of the schema.
fn unknown_field(original: &Value) -> Option<String> {
    fn known_keys(obj: &serde_json::Map<String, Value>) -> &'static [&'static str] {
        if obj.contains_key("doc_id") {
            &[
                "doc_id",
                "name",
                "category",
                "tags",
                "description",
                "loc",
                "anchor_tags",
            ]
        } else if obj.contains_key("query_id") {
            &[
                "query_id",
                "raw_query",
                "entity_category",
                "must_have_tags",
                "true_loc",
                "radius_m",
                "direction_constraint",
                "ground_truth",
            ]
        } else if obj.contains_key("anchor_id") {
            &["anchor_id", "dir", "dist_bin", "dist_m"]
        } else {
            &["id", "name", "neighborhood", "loc"]
        }
    }
    let obj = original.as_object()?;
    let keys = known_keys(obj);
    if let Some(k) = obj.keys().find(|k| !keys.contains(&k.as_str())) {
        return Some(k.clone());
    }
    if let Some(Value::Array(tags)) = obj.get("anchor_tags") {
        for (i, tag) in tags.iter().enumerate() {
            if let Some(tag) = tag.as_object() {
                let keys = known_keys(tag);
                if let Some(k) = tag.keys().find(|k| !keys.contains(&k.as_str())) {
                    return Some(format!("anchor_tags[{i}].{k}"));
                }
            }
        }
    }
    None
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| io_err(e.into()))?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

impl Dataset {
    pub fn load(dir: &Path, mode: LoadMode) -> Result<Self, CorpusError> {
        let strict = mode == LoadMode::Strict;
        let ds = Self {
            anchors: read_jsonl(&dir.join(ANCHORS_FILE), strict)?,
            chunks: read_jsonl(&dir.join(CHUNKS_FILE), strict)?,
            queries: read_jsonl(&dir.join(QUERIES_FILE), strict)?,
        };
        if strict {
            ds.validate(None)?;
        }
        Ok(ds)
    }

    pub fn save(&self, dir: &Path) -> Result<(), CorpusError> {
        fs::create_dir_all(dir).map_err(|source| CorpusError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        write_jsonl(&dir.join(ANCHORS_FILE), &self.anchors)?;
        write_jsonl(&dir.join(CHUNKS_FILE), &self.chunks)?;
        write_jsonl(&dir.join(QUERIES_FILE), &self.queries)
    }

    pub fn anchor(&self, id: &str) -> Option<&Anchor> {
        self.anchors.iter().find(|a| a.id == id)
    }

    pub fn query(&self, id: &str) -> Option<&SpatialQuery> {
        self.queries.iter().find(|q| q.query_id == id)
    }

    pub fn chunk_index(&self) -> HashMap<&str, &Chunk> {
        self.chunks.iter().map(|c| (c.doc_id.as_str(), c)).collect()
    }

    /// Checks every dataset invariant. When `bins` is given, stored anchor
    /// tags and ground truth are also recomputed from coordinates.
    pub fn validate(&self, bins: Option<&DistanceBins>) -> Result<(), CorpusError> {
        let inv = |m: String| Err(CorpusError::Invariant(m));
        let mut anchor_ids = HashSet::new();
        for a in &self.anchors {
            if !anchor_ids.insert(a.id.as_str()) {
                return inv(format!("duplicate anchor id {}", a.id));
            }
        }
        let anchors: HashMap<&str, &Anchor> =
            self.anchors.iter().map(|a| (a.id.as_str(), a)).collect();
        let mut doc_ids = HashSet::new();
        for c in &self.chunks {
            if !doc_ids.insert(c.doc_id.as_str()) {
                return inv(format!("duplicate doc_id {}", c.doc_id));
            }
            if c.anchor_tags.len() < 2 {
                return inv(format!(
                    "chunk {} has {} anchor tag(s); at least 2 required",
                    c.doc_id,
                    c.anchor_tags.len()
                ));
            }
            let distinct: HashSet<_> = c.anchor_tags.iter().map(|t| &t.anchor_id).collect();
            if distinct.len() != c.anchor_tags.len() {
                return inv(format!("chunk {} tags the same anchor twice", c.doc_id));
            }
            for tag in &c.anchor_tags {
                let Some(anchor) = anchors.get(tag.anchor_id.as_str()) else {
                    return inv(format!(
                        "chunk {} tags unknown anchor {}",
                        c.doc_id, tag.anchor_id
                    ));
                };
                if let Some(bins) = bins {
                    let fresh = AnchorTag::compute(anchor, c.loc, bins)?;
                    if fresh.dir != tag.dir || fresh.dist_bin != tag.dist_bin {
                        return inv(format!(
                            "chunk {} tag for {} is inconsistent with coordinates",
                            c.doc_id, tag.anchor_id
                        ));
                    }
                }
            }
        }
        let mut query_ids = HashSet::new();
        for q in &self.queries {
            if !query_ids.insert(q.query_id.as_str()) {
                return inv(format!("duplicate query_id {}", q.query_id));
            }
            if q.ground_truth.is_empty() {
                return inv(format!("query {} has empty ground truth", q.query_id));
            }
            if let Some(missing) = q
                .ground_truth
                .iter()
                .find(|d| !doc_ids.contains(d.as_str()))
            {
                return inv(format!(
                    "query {} references unknown doc {missing}",
                    q.query_id
                ));
            }
            if bins.is_some() {
                let gt = ground_truth_for(
                    q.true_loc,
                    q.radius_m,
                    q.direction_constraint,
                    &q.entity_category,
                    &q.must_have_tags,
                    &self.chunks,
                );
                let stored: BTreeSet<_> = q.ground_truth.iter().collect();
                let fresh: BTreeSet<_> = gt.iter().collect();
                if stored != fresh {
                    return inv(format!(
                        "query {} ground truth does not match its constraints",
                        q.query_id
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let ok = self.lat_min < self.lat_max
            && self.lon_min < self.lon_max
            && GeoPoint::new(self.lat_min, self.lon_min).is_ok()
            && GeoPoint::new(self.lat_max, self.lon_max).is_ok()
            && self.lat_min >= -90.0
            && self.lat_max <= 90.0
            && (-180.0..=180.0).contains(&self.lon_min)
            && (-180.0..=180.0).contains(&self.lon_max);
        if ok {
            Ok(())
        } else {
            Err(CorpusError::Infeasible(format!(
                "invalid bounding box {self:?}"
            )))
        }
    }

    pub fn diameter_m(&self) -> f64 {
        haversine_m(
            GeoPoint::new(self.lat_min, self.lon_min).unwrap(),
            GeoPoint::new(self.lat_max, self.lon_max).unwrap(),
        )
    }

    /// `n × n` lattice spanning the box, corners included. `n = 1` yields the center.
    pub fn grid(&self, n: usize) -> Vec<GeoPoint> {
        let step = |lo: f64, hi: f64, i: usize| {
            if n <= 1 {
                (lo + hi) / 2.0
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        let mut pts = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let lat = step(self.lat_min, self.lat_max, i);
                let lon = step(self.lon_min, self.lon_max, j);
                pts.push(GeoPoint::new(lat, lon).unwrap());
            }
        }
        pts
    }
}

impl Default for BoundingBox {
    fn default() -> Self {
        Self {
            lat_min: 40.55,
            lat_max: 40.90,
            lon_min: -74.05,
            lon_max: -73.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySpec {
    pub name: String,
    /// Nouns used to build POI names.
    pub name_suffixes: Vec<String>,
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub bbox: BoundingBox,
    pub n_anchors: usize,
    pub n_chunks: usize,
    pub n_queries: usize,
    /// Number of nearest anchors each chunk is tagged with.
    pub k_tags: usize,
    pub min_anchor_separation_m: f64,
    /// Chunks are scattered area-uniformly within this radius of a random anchor.
    pub poi_spread_m: f64,
    /// Query locations are scattered area-uniformly within this radius of a random anchor.
    pub user_spread_m: f64,
    pub direction_constraint_prob: f64,
    pub max_ground_truth: usize,
    pub max_retries: usize,
    pub categories: Vec<CategorySpec>,
}

fn spec(name: &str, suffixes: &[&str], tags: &[&str]) -> CategorySpec {
    CategorySpec {
        name: name.to_string(),
        name_suffixes: suffixes.iter().map(|s| s.to_string()).collect(),
        tags: tags.iter().map(|s| s.to_string()).collect(),
    }
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            bbox: BoundingBox::default(),
            n_anchors: 30,
            n_chunks: 1010,
            n_queries: 423,
            k_tags: 2,
            min_anchor_separation_m: 2000.0,
            poi_spread_m: 2500.0,
            user_spread_m: METERS_PER_MILE,
            direction_constraint_prob: 0.5,
            max_ground_truth: 5,
            max_retries: 10_000,
            categories: vec![
                spec(
                    "restaurant",
                    &["Kitchen", "Bistro", "Grill", "Table"],
                    &[
                        "italian",
                        "vegan",
                        "brunch",
                        "seafood",
                        "rooftop",
                        "late-night",
                    ],
                ),
                spec(
                    "cafe",
                    &["Coffee", "Roasters", "Espresso", "Beans"],
                    &[
                        "wifi",
                        "pastries",
                        "quiet",
                        "outdoor-seating",
                        "matcha",
                        "study",
                    ],
                ),
                spec(
                    "hotel",
                    &["Suites", "Inn", "Lodge", "Residences"],
                    &["pool", "spa", "boutique", "pet-friendly", "budget", "gym"],
                ),
                spec(
                    "hospital",
                    &["Medical Center", "Health", "Clinic", "Memorial"],
                    &[
                        "emergency",
                        "pediatric",
                        "trauma",
                        "maternity",
                        "cardiology",
                        "urgent",
                    ],
                ),
                spec(
                    "park",
                    &["Green", "Commons", "Gardens", "Meadow"],
                    &[
                        "playground",
                        "dog-run",
                        "picnic",
                        "trails",
                        "lake",
                        "sports-fields",
                    ],
                ),
                spec(
                    "pharmacy",
                    &["Drugs", "Apothecary", "Chemists", "Rx"],
                    &[
                        "24-hour",
                        "drive-thru",
                        "vaccines",
                        "compounding",
                        "delivery",
                        "cosmetics",
                    ],
                ),
                spec(
                    "museum",
                    &["Gallery", "Collection", "Museum", "Archive"],
                    &[
                        "modern-art",
                        "history",
                        "science",
                        "kids",
                        "sculpture",
                        "photography",
                    ],
                ),
                spec(
                    "gym",
                    &["Fitness", "Athletics", "Strength", "Studio"],
                    &["yoga", "boxing", "sauna", "climbing", "spin", "crossfit"],
                ),
                spec(
                    "library",
                    &["Library", "Reading Room", "Branch", "Athenaeum"],
                    &[
                        "study-rooms",
                        "archives",
                        "children",
                        "makerspace",
                        "computers",
                        "events",
                    ],
                ),
                spec(
                    "bar",
                    &["Tavern", "Lounge", "Pub", "Taproom"],
                    &[
                        "craft-beer",
                        "cocktails",
                        "live-music",
                        "karaoke",
                        "trivia",
                        "happy-hour",
                    ],
                ),
                spec(
                    "grocery",
                    &["Market", "Grocers", "Provisions", "Pantry"],
                    &["organic", "bakery", "deli", "halal", "kosher", "bulk"],
                ),
                spec(
                    "school",
                    &["Academy", "School", "Institute", "Prep"],
                    &[
                        "elementary",
                        "high-school",
                        "charter",
                        "arts",
                        "stem",
                        "bilingual",
                    ],
                ),
            ],
        }
    }
}

const NEIGHBORHOODS: &[&str] = &[
    "Harbor Point",
    "Elm Heights",
    "Riverside",
    "Mill Basin",
    "Cedar Hill",
    "Ferry Landing",
    "Granite Row",
    "Lantern Park",
    "Old Quarry",
    "Bayview",
    "Foundry",
    "North Slope",
    "Gateway",
    "Orchard Flats",
    "Signal Hill",
    "Canal Yards",
    "Maple Grove",
    "Union Fields",
    "Ironbridge",
    "Clover Bend",
    "Stone Dock",
    "Willow Reach",
    "Beacon Square",
    "Tidewater",
    "Copper Gate",
    "Highline",
    "Fairmount",
    "Pier Row",
    "Larkspur",
    "Meridian",
];

const LANDMARKS: &[&str] = &[
    "Station",
    "Library",
    "Plaza",
    "Town Hall",
    "Transit Hub",
    "Terminal",
    "Civic Center",
    "Market Hall",
    "Campus Gate",
    "Clock Tower",
];

const NAME_WORDS: &[&str] = &[
    "Golden", "Blue", "Corner", "Lucky", "Silver", "Red", "Urban", "Harbor", "Maple", "North",
    "Sunset", "Union", "Liberty", "Bright", "Little", "Grand", "Hidden", "Olive", "Copper",
    "Juniper", "Empire", "Saffron", "Velvet", "Mercer",
];

impl GeneratorConfig {
    pub fn validate(&self, bins: &DistanceBins) -> Result<(), CorpusError> {
        self.bbox.validate()?;
        let bad = |m: &str| Err(CorpusError::Infeasible(m.to_string()));
        if self.k_tags < 2 {
            return bad("k_tags must be at least 2");
        }
        if self.n_anchors < self.k_tags {
            return bad("need at least k_tags anchors so every chunk gets distinct anchor tags");
        }
        if self.categories.is_empty()
            || self
                .categories
                .iter()
                .any(|c| c.tags.is_empty() || c.name_suffixes.is_empty())
        {
            return bad("every category needs at least one tag and one name suffix");
        }
        if !(0.0..=1.0).contains(&self.direction_constraint_prob) {
            return bad("direction_constraint_prob must be in [0, 1]");
        }
        if self.max_ground_truth == 0 || self.max_retries == 0 {
            return bad("max_ground_truth and max_retries must be positive");
        }
        if !(self.poi_spread_m >= 0.0
            && self.user_spread_m >= 0.0
            && self.min_anchor_separation_m >= 0.0)
        {
            return bad("spreads and separation must be non-negative");
        }
        if bins.edges().len() < 2 {
            return bad("query radii need at least one non-zero distance edge");
        }
        Ok(())
    }
}

fn area_uniform_around<R: Rng>(center: GeoPoint, radius_m: f64, rng: &mut R) -> GeoPoint {
    let bearing = rng.random::<f64>() * 360.0;
    let r = radius_m * rng.random::<f64>().sqrt();
    destination(center, bearing, r)
}

fn pick_distinct<R: Rng>(items: &[String], n: usize, rng: &mut R) -> Vec<String> {
    let mut picked: Vec<String> = items
        .choose_multiple(rng, n.min(items.len()))
        .cloned()
        .collect();
    picked.sort();
    picked
}

fn english_list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} and {b}"),
        [init @ .., last] => format!("{}, and {last}", init.join(", ")),
    }
}

/// Builds a synthetic city. Output depends only on `(cfg, bins, seed)`.
pub fn generate_dataset(
    cfg: &GeneratorConfig,
    bins: &DistanceBins,
    seed: u64,
) -> Result<Dataset, CorpusError> {
    cfg.validate(bins)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bbox = &cfg.bbox;

    let mut anchors: Vec<Anchor> = Vec::with_capacity(cfg.n_anchors);
    for i in 0..cfg.n_anchors {
        let mut placed = None;
        for _ in 0..cfg.max_retries {
            let lat = rng.random_range(bbox.lat_min..bbox.lat_max);
            let lon = rng.random_range(bbox.lon_min..bbox.lon_max);
            let p = GeoPoint::new(lat, lon)?;
            if anchors
                .iter()
                .all(|a| haversine_m(a.loc, p) >= cfg.min_anchor_separation_m)
            {
                placed = Some(p);
                break;
            }
        }
        let Some(loc) = placed else {
            return Err(CorpusError::Infeasible(format!(
                "could not place anchor {} with {} m separation after {} tries",
                i + 1,
                cfg.min_anchor_separation_m,
                cfg.max_retries
            )));
        };
        let neighborhood = match NEIGHBORHOODS.get(i) {
            Some(n) => n.to_string(),
            None => format!("District {}", i + 1),
        };
        let landmark = LANDMARKS[i % LANDMARKS.len()];
        anchors.push(Anchor {
            id: format!("A{i:02}"),
            name: format!("{neighborhood} {landmark}"),
            neighborhood,
            loc,
            extra: Extra::new(),
        });
    }

    let mut chunks = Vec::with_capacity(cfg.n_chunks);
    for i in 0..cfg.n_chunks {
        let home = &anchors[rng.random_range(0..anchors.len())];
        let loc = area_uniform_around(home.loc, cfg.poi_spread_m, &mut rng);
        let cat = &cfg.categories[rng.random_range(0..cfg.categories.len())];
        let n_tags = rng.random_range(2..=3);
        let tags = pick_distinct(&cat.tags, n_tags, &mut rng);
        let word = NAME_WORDS[rng.random_range(0..NAME_WORDS.len())];
        let suffix = &cat.name_suffixes[rng.random_range(0..cat.name_suffixes.len())];
        let name = format!("{word} {suffix}");
        let description = format!(
            "{name} is a {} in {} known for {}.",
            cat.name,
            home.neighborhood,
            english_list(&tags)
        );

        let mut by_dist: Vec<(f64, &Anchor)> = anchors
            .iter()
            .map(|a| (haversine_m(a.loc, loc), a))
            .collect();
        by_dist.sort_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.id.cmp(&y.1.id)));
        let anchor_tags = by_dist
            .iter()
            .take(cfg.k_tags)
            .map(|(_, a)| AnchorTag::compute(a, loc, bins))
            .collect::<Result<Vec<_>, _>>()?;

        chunks.push(Chunk {
            doc_id: format!("D{i:04}"),
            name,
            category: cat.name.clone(),
            tags,
            description,
            loc,
            anchor_tags,
            extra: Extra::new(),
        });
    }

    let radii: Vec<f64> = bins.edges()[1..].to_vec();
    let mut queries = Vec::with_capacity(cfg.n_queries);
    let max_attempts = cfg.max_retries.max(cfg.n_queries * 200);
    let mut attempts = 0;
    while queries.len() < cfg.n_queries {
        attempts += 1;
        if attempts > max_attempts {
            return Err(CorpusError::Infeasible(format!(
                "only {} of {} queries had 1..={} ground-truth POIs after {max_attempts} attempts",
                queries.len(),
                cfg.n_queries,
                cfg.max_ground_truth
            )));
        }
        let home = &anchors[rng.random_range(0..anchors.len())];
        let true_loc = area_uniform_around(home.loc, cfg.user_spread_m, &mut rng);
        let cat = &cfg.categories[rng.random_range(0..cfg.categories.len())];
        let n_tags = match rng.random::<f64>() {
            x if x < 0.2 => 0,
            x if x < 0.8 => 1,
            _ => 2,
        };
        let must_have_tags = pick_distinct(&cat.tags, n_tags, &mut rng);
        let radius_m = radii[rng.random_range(0..radii.len())];
        let direction = if rng.random::<f64>() < cfg.direction_constraint_prob {
            DirectionConstraint::Bin(DirectionBin::ALL[rng.random_range(0..8)])
        } else {
            DirectionConstraint::Any
        };
        let ground_truth = ground_truth_for(
            true_loc,
            radius_m,
            direction,
            &cat.name,
            &must_have_tags,
            &chunks,
        );
        if ground_truth.is_empty() || ground_truth.len() > cfg.max_ground_truth {
            continue;
        }
        let raw_query = render_query(&cat.name, &must_have_tags, direction, radius_m);
        queries.push(SpatialQuery {
            query_id: format!("Q{:04}", queries.len()),
            raw_query,
            entity_category: cat.name.clone(),
            must_have_tags,
            true_loc,
            radius_m,
            direction_constraint: direction,
            ground_truth,
            extra: Extra::new(),
        });
    }

    Ok(Dataset {
        anchors,
        chunks,
        queries,
    })
}

fn render_query(
    category: &str,
    tags: &[String],
    dir: DirectionConstraint,
    radius_m: f64,
) -> String {
    let mut q = format!("Find a {category}");
    if !tags.is_empty() {
        q.push_str(" with ");
        q.push_str(&english_list(tags));
    }
    let miles = radius_m / METERS_PER_MILE;
    match dir {
        DirectionConstraint::Any => q.push_str(&format!(" within {miles:.1} miles of my location")),
        DirectionConstraint::Bin(b) => q.push_str(&format!(
            " {} of my location within {miles:.1} miles",
            compass_word(b)
        )),
    }
    q
}

fn compass_word(b: DirectionBin) -> &'static str {
    match b {
        DirectionBin::N => "north",
        DirectionBin::NE => "northeast",
        DirectionBin::E => "east",
        DirectionBin::SE => "southeast",
        DirectionBin::S => "south",
        DirectionBin::SW => "southwest",
        DirectionBin::W => "west",
        DirectionBin::NW => "northwest",
    }
}
