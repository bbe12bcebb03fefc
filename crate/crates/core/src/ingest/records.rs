//! Raw record types and their line/CSV wire formats.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::geo::GeoPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    /// Route search towards a named destination POI.
    Route,
    /// "Nearby" search by keyword around the user's location.
    Nearby,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub user_id: String,
    pub timestamp: i64,
    pub origin: GeoPoint,
    pub keyword: String,
    pub target_poi_id: Option<String>,
    pub kind: QueryKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Poi {
    pub id: String,
    pub name: String,
    pub location: GeoPoint,
    pub category_l1: String,
    pub category_l2: String,
    pub brand: Option<String>,
    pub unit_price: Option<f64>,
}

impl Poi {
    /// A category name matches either level of the hierarchy.
    pub fn in_category(&self, category: &str) -> bool {
        self.category_l1 == category || self.category_l2 == category
    }

    pub fn has_brand(&self, brand: &str) -> bool {
        self.brand
            .as_deref()
            .is_some_and(|b| normalize_keyword(b) == normalize_keyword(brand))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WifiRecord {
    pub user_id: String,
    pub timestamp: i64,
    pub poi_id: String,
}

/// Records accepted from a stream plus the number of lines rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub rejected: usize,
}

#[derive(Serialize, Deserialize)]
struct QueryLine {
    user_id: String,
    ts: i64,
    lat: f64,
    lng: f64,
    keyword: String,
    kind: QueryKind,
    poi_id: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct WifiLine {
    user_id: String,
    ts: i64,
    poi_id: String,
}

impl TryFrom<QueryLine> for QueryRecord {
    type Error = ();

    fn try_from(line: QueryLine) -> Result<Self, ()> {
        let origin = GeoPoint::new(line.lat, line.lng).map_err(|_| ())?;
        let target = line.poi_id.filter(|id| !id.is_empty());
        if line.ts <= 0 || line.keyword.trim().is_empty() || line.user_id.is_empty() {
            return Err(());
        }
        if line.kind == QueryKind::Route && target.is_none() {
            return Err(());
        }
        Ok(QueryRecord {
            user_id: line.user_id,
            timestamp: line.ts,
            origin,
            keyword: line.keyword,
            target_poi_id: target,
            kind: line.kind,
        })
    }
}

fn parse_lines<R, L, T>(reader: R, convert: impl Fn(L) -> Result<T, ()>) -> Result<Parsed<T>, IngestError>
where
    R: BufRead,
    L: for<'de> Deserialize<'de>,
{
    let mut records = Vec::new();
    let mut rejected = 0;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<L>(&line).map_err(|_| ()).and_then(&convert) {
            Ok(rec) => records.push(rec),
            Err(()) => rejected += 1,
        }
    }
    Ok(Parsed { records, rejected })
}

/// Parses `queries.jsonl`. Malformed or invalid lines are skipped and counted.
pub fn parse_queries<R: BufRead>(reader: R) -> Result<Parsed<QueryRecord>, IngestError> {
    parse_lines::<_, QueryLine, _>(reader, QueryRecord::try_from)
}

/// Parses `wifi.jsonl`. Malformed or invalid lines are skipped and counted.
pub fn parse_wifi<R: BufRead>(reader: R) -> Result<Parsed<WifiRecord>, IngestError> {
    parse_lines::<_, WifiLine, _>(reader, |l| {
        if l.ts <= 0 || l.user_id.is_empty() || l.poi_id.is_empty() {
            return Err(());
        }
        Ok(WifiRecord {
            user_id: l.user_id,
            timestamp: l.ts,
            poi_id: l.poi_id,
        })
    })
}

pub fn write_queries<W: Write>(mut out: W, queries: &[QueryRecord]) -> Result<(), IngestError> {
    for q in queries {
        let line = QueryLine {
            user_id: q.user_id.clone(),
            ts: q.timestamp,
            lat: q.origin.lat,
            lng: q.origin.lng,
            keyword: q.keyword.clone(),
            kind: q.kind,
            poi_id: q.target_poi_id.clone(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_wifi<W: Write>(mut out: W, wifi: &[WifiRecord]) -> Result<(), IngestError> {
    for w in wifi {
        let line = WifiLine {
            user_id: w.user_id.clone(),
            ts: w.timestamp,
            poi_id: w.poi_id.clone(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

const POI_HEADER: [&str; 8] = [
    "id",
    "name",
    "lat",
    "lng",
    "category_l1",
    "category_l2",
    "brand",
    "unit_price",
];

fn poi_from_row(row: &csv::StringRecord) -> Option<Poi> {
    if row.len() != POI_HEADER.len() {
        return None;
    }
    let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
    let id = row[0].to_string();
    let category_l1 = row[4].to_string();
    if id.is_empty() || category_l1.is_empty() {
        return None;
    }
    let location = GeoPoint::new(row[2].parse().ok()?, row[3].parse().ok()?).ok()?;
    let unit_price = match &row[7] {
        "" => None,
        s => {
            let v: f64 = s.parse().ok()?;
            if !v.is_finite() || v < 0.0 {
                return None;
            }
            Some(v)
        }
    };
    Some(Poi {
        id,
        name: row[1].to_string(),
        location,
        category_l1,
        category_l2: row[5].to_string(),
        brand: opt(&row[6]),
        unit_price,
    })
}

/// Parses `pois.csv`. Bad rows and duplicate ids (after the first) are
/// rejected; a wrong header is an error.
pub fn parse_pois<R: Read>(reader: R) -> Result<Parsed<Poi>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != POI_HEADER {
        return Err(IngestError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut rejected = 0;
    for row in rdr.records() {
        match row.ok().as_ref().and_then(poi_from_row) {
            Some(poi) if seen.insert(poi.id.clone()) => records.push(poi),
            _ => rejected += 1,
        }
    }
    Ok(Parsed { records, rejected })
}

pub fn write_pois<W: Write>(out: W, pois: &[Poi]) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(POI_HEADER)?;
    for p in pois {
        wtr.write_record([
            p.id.clone(),
            p.name.clone(),
            p.location.lat.to_string(),
            p.location.lng.to_string(),
            p.category_l1.clone(),
            p.category_l2.clone(),
            p.brand.clone().unwrap_or_default(),
            p.unit_price.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Trim, case-fold, and map full-width ASCII forms to half-width.
pub fn normalize_keyword(raw: &str) -> String {
    raw.trim()
        .chars()
        .map(|c| match c {
            '\u{3000}' => ' ',
            '\u{FF01}'..='\u{FF5E}' => char::from_u32(c as u32 - 0xFEE0).unwrap_or(c),
            _ => c,
        })
        .flat_map(char::to_lowercase)
        .collect::<String>()
        .trim()
        .to_string()
}

/// Explicit keyword → category mapping for "nearby" queries. Keys are
/// stored normalized.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "BTreeMap<String, String>", into = "BTreeMap<String, String>")]
pub struct CategoryAliases {
    map: BTreeMap<String, String>,
}

impl CategoryAliases {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, keyword: &str, category: &str) {
        self.map.insert(normalize_keyword(keyword), category.to_string());
    }

    pub fn with(mut self, keyword: &str, category: &str) -> Self {
        self.insert(keyword, category);
        self
    }

    /// Category for a keyword.
    pub fn resolve<'a>(&'a self, keyword: &'a str) -> Option<&'a str> {
        self.map.get(&normalize_keyword(keyword)).map(String::as_str)
    }

    /// A keyword equal to the category name itself always matches.
    pub fn matches(&self, keyword: &str, category: &str) -> bool {
        let norm = normalize_keyword(keyword);
        norm == normalize_keyword(category) || self.map.get(&norm).is_some_and(|c| c == category)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

impl From<BTreeMap<String, String>> for CategoryAliases {
    fn from(map: BTreeMap<String, String>) -> Self {
        map.into_iter().collect()
    }
}

impl From<CategoryAliases> for BTreeMap<String, String> {
    fn from(a: CategoryAliases) -> Self {
        a.map
    }
}

impl FromIterator<(String, String)> for CategoryAliases {
    fn from_iter<I: IntoIterator<Item = (String, String)>>(iter: I) -> Self {
        let mut aliases = CategoryAliases::new();
        for (k, v) in iter {
            aliases.insert(&k, &v);
        }
        aliases
    }
}
