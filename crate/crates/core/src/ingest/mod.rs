//! Parsing, anonymization, and integration of the three raw data sets, plus
//! a seeded synthetic city generator.

mod records;
pub mod synth;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use records::{
    normalize_keyword, parse_pois, parse_queries, parse_wifi, write_pois, write_queries, write_wifi, CategoryAliases,
    Parsed, Poi, QueryKind, QueryRecord, WifiRecord,
};

/// Seconds east of UTC used to cut calendar days (UTC+8).
pub const DEFAULT_TZ_OFFSET_S: i64 = 8 * 3600;

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unexpected pois.csv header: {0}")]
    Header(String),
    #[error("anonymization salt must be non-empty")]
    EmptySalt,
    #[error("invalid synthetic city config: {0}")]
    InvalidConfig(String),
}

pub const QUERIES_FILE: &str = "queries.jsonl";
pub const POIS_FILE: &str = "pois.csv";
pub const WIFI_FILE: &str = "wifi.jsonl";
/// Optional keyword -> category map, a JSON object.
pub const ALIASES_FILE: &str = "aliases.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// The raw data sets of one city directory.
#[derive(Debug, Clone, Default)]
pub struct RawCity {
    pub queries: Vec<QueryRecord>,
    pub pois: Vec<Poi>,
    pub wifi: Vec<WifiRecord>,
    pub aliases: CategoryAliases,
    /// Lines rejected per file: queries, POIs, WiFi.
    pub rejected: [usize; 3],
}

/// Reads `queries.jsonl`, `pois.csv`, `wifi.jsonl` and, when present,
/// `aliases.json` from `dir`.
pub fn read_dir(dir: &Path) -> Result<RawCity, IngestError> {
    let open = |name: &str| File::open(dir.join(name)).map(BufReader::new);
    let queries = parse_queries(open(QUERIES_FILE)?)?;
    let pois = parse_pois(open(POIS_FILE)?)?;
    let wifi = parse_wifi(open(WIFI_FILE)?)?;
    let aliases = match open(ALIASES_FILE) {
        Ok(r) => serde_json::from_reader(r)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => CategoryAliases::new(),
        Err(e) => return Err(e.into()),
    };
    Ok(RawCity {
        rejected: [queries.rejected, pois.rejected, wifi.rejected],
        queries: queries.records,
        pois: pois.records,
        wifi: wifi.records,
        aliases,
    })
}

/// Salted SHA-256 of a raw identifier, hex-encoded (64 chars).
pub fn anonymize(raw_user_id: &str, salt: &str) -> Result<String, IngestError> {
    if salt.is_empty() {
        return Err(IngestError::EmptySalt);
    }
    let mut hasher = Sha256::new();
    hasher.update(salt.as_bytes());
    hasher.update([0x1f]);
    hasher.update(raw_user_id.as_bytes());
    Ok(hex::encode(hasher.finalize()))
}

/// Local calendar day index of an epoch timestamp.
pub fn local_day(timestamp: i64, tz_offset_s: i64) -> i64 {
    (timestamp + tz_offset_s).div_euclid(SECONDS_PER_DAY)
}

/// Deduplicated customer count per POI.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VisitTable {
    counts: BTreeMap<String, u64>,
}

impl VisitTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// W(p); zero for POIs never observed.
    pub fn count(&self, poi_id: &str) -> u64 {
        self.counts.get(poi_id).copied().unwrap_or(0)
    }

    pub fn set(&mut self, poi_id: &str, count: u64) {
        self.counts.insert(poi_id.to_string(), count);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

impl FromIterator<(String, u64)> for VisitTable {
    fn from_iter<I: IntoIterator<Item = (String, u64)>>(iter: I) -> Self {
        VisitTable {
            counts: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Integration {
    pub visits: VisitTable,
    /// WiFi records whose POI id did not resolve.
    pub dropped: usize,
}

/// Counts distinct (user, local day) pairs per POI.
pub fn integrate_visits(wifi: &[WifiRecord], pois: &[Poi], tz_offset_s: i64) -> Integration {
    let known: HashSet<&str> = pois.iter().map(|p| p.id.as_str()).collect();
    let mut by_poi: HashMap<&str, Vec<(&str, i64)>> = HashMap::new();
    let mut dropped = 0;
    for w in wifi {
        if known.contains(w.poi_id.as_str()) {
            by_poi
                .entry(w.poi_id.as_str())
                .or_default()
                .push((w.user_id.as_str(), local_day(w.timestamp, tz_offset_s)));
        } else {
            dropped += 1;
        }
    }
    let visits = by_poi
        .into_par_iter()
        .map(|(poi, mut pairs)| {
            pairs.sort_unstable();
            pairs.dedup();
            (poi.to_string(), pairs.len() as u64)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    Integration { visits, dropped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;

    fn poi(id: &str) -> Poi {
        Poi {
            id: id.into(),
            name: id.into(),
            location: GeoPoint { lat: 39.9, lng: 116.4 },
            category_l1: "food".into(),
            category_l2: "coffee-shop".into(),
            brand: None,
            unit_price: None,
        }
    }

    fn wifi(user: &str, ts: i64, poi: &str) -> WifiRecord {
        WifiRecord {
            user_id: user.into(),
            timestamp: ts,
            poi_id: poi.into(),
        }
    }

    // 2015-08-08 00:00:00 at UTC+8
    const DAY0: i64 = 1_438_963_200;

    #[test]
    fn anonymize_properties() {
        let a = anonymize("alice", "s1").unwrap();
        assert_eq!(a, anonymize("alice", "s1").unwrap());
        assert_ne!(a, anonymize("alice", "s2").unwrap());
        assert_eq!(a.len(), 64);
        assert!(a.chars().all(|c| c.is_ascii_hexdigit()));
        assert!(matches!(anonymize("alice", ""), Err(IngestError::EmptySalt)));
    }

    #[test]
    fn anonymize_has_no_collisions_on_fixture() {
        let hashes: HashSet<String> = (0..10_000)
            .map(|i| anonymize(&format!("user-{i}"), "fixture-salt").unwrap())
            .collect();
        assert_eq!(hashes.len(), 10_000);
    }

    #[test]
    fn same_user_same_day_counts_once() {
        let records: Vec<_> = (0..5).map(|i| wifi("u", DAY0 + 3600 * i, "p")).collect();
        let out = integrate_visits(&records, &[poi("p")], DEFAULT_TZ_OFFSET_S);
        assert_eq!(out.visits.count("p"), 1);
    }

    #[test]
    fn distinct_days_count_separately() {
        let records: Vec<_> = (0..3)
            .map(|d| wifi("u", DAY0 + SECONDS_PER_DAY * d + 100, "p"))
            .collect();
        let out = integrate_visits(&records, &[poi("p")], DEFAULT_TZ_OFFSET_S);
        assert_eq!(out.visits.count("p"), 3);
    }

    #[test]
    fn full_cross_product() {
        let mut records = Vec::new();
        for u in ["a", "b"] {
            for d in 0..2 {
                for p in ["p1", "p2"] {
                    records.push(wifi(u, DAY0 + d * SECONDS_PER_DAY + 60, p));
                    records.push(wifi(u, DAY0 + d * SECONDS_PER_DAY + 120, p));
                }
            }
        }
        let out = integrate_visits(&records, &[poi("p1"), poi("p2")], DEFAULT_TZ_OFFSET_S);
        assert_eq!(out.visits.count("p1"), 4);
        assert_eq!(out.visits.count("p2"), 4);
    }

    #[test]
    fn day_boundary_follows_offset() {
        // 23:30 and 00:30 local on consecutive days
        let records = [wifi("u", DAY0 - 1800, "p"), wifi("u", DAY0 + 1800, "p")];
        let local = integrate_visits(&records, &[poi("p")], DEFAULT_TZ_OFFSET_S);
        assert_eq!(local.visits.count("p"), 2);
        let utc = integrate_visits(&records, &[poi("p")], 0);
        assert_eq!(utc.visits.count("p"), 1);
    }

    #[test]
    fn unresolved_poi_dropped() {
        let out = integrate_visits(&[wifi("u", DAY0, "ghost")], &[poi("p")], 0);
        assert_eq!(out.dropped, 1);
        assert_eq!(out.visits.count("ghost"), 0);
    }
}
