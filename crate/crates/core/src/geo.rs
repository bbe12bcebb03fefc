//! Geographic primitives and a uniform-grid spatial index.
//!
//! All distances are great-circle meters on a sphere of radius
//! [`EARTH_RADIUS_M`]. The index buckets points on an equirectangular grid
//! anchored at the data bounding box, so a disc query only touches the few
//! cells overlapping the disc's lat/lng bounding box.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} is not a finite value in [-90, 90]")]
    InvalidLatitude(f64),
    #[error("longitude {0} is not a finite value in [-180, 180]")]
    InvalidLongitude(f64),
    #[error("radius {0} m must be finite and positive")]
    InvalidRadius(f64),
    #[error("cell size {0} m must be finite and positive")]
    InvalidCellSize(f64),
}

/// A WGS84-style coordinate in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lng: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lng: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::InvalidLatitude(lat));
        }
        if !lng.is_finite() || !(-180.0..=180.0).contains(&lng) {
            return Err(GeoError::InvalidLongitude(lng));
        }
        Ok(Self { lat, lng })
    }

    pub fn distance_m(&self, other: &GeoPoint) -> f64 {
        haversine_m(*self, *other)
    }

    /// Total order on (lat, lng), used for deterministic tie-breaking.
    pub fn cmp_lat_lng(&self, other: &GeoPoint) -> std::cmp::Ordering {
        self.lat.total_cmp(&other.lat).then(self.lng.total_cmp(&other.lng))
    }
}

/// Closed disc `{p : haversine(center, p) <= radius_m}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: GeoPoint,
    pub radius_m: f64,
}

impl Disc {
    pub fn new(center: GeoPoint, radius_m: f64) -> Result<Self, GeoError> {
        if !radius_m.is_finite() || radius_m <= 0.0 {
            return Err(GeoError::InvalidRadius(radius_m));
        }
        Ok(Self { center, radius_m })
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        haversine_m(self.center, *p) <= self.radius_m
    }
}

/// Great-circle distance in meters.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lng - a.lng).to_radians();
    let h = (dphi * 0.5).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda * 0.5).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Equirectangular projection around a fixed origin. Accurate to well under
/// a percent over city-sized extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalProjection {
    origin: GeoPoint,
    cos_lat: f64,
}

impl LocalProjection {
    pub fn new(origin: GeoPoint) -> Self {
        Self {
            origin,
            cos_lat: origin.lat.to_radians().cos().max(1e-12),
        }
    }

    /// Projection anchored at the south-west corner of `points`, with the
    /// scale factor taken at the middle latitude. `None` for an empty slice.
    pub fn fit<'a, I>(points: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a GeoPoint>,
    {
        let bbox = BoundingBox::of(points)?;
        let mid_lat = 0.5 * (bbox.min_lat + bbox.max_lat);
        Some(Self {
            origin: GeoPoint {
                lat: bbox.min_lat,
                lng: bbox.min_lng,
            },
            cos_lat: mid_lat.to_radians().cos().max(1e-12),
        })
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    /// Meters east of the origin.
    pub fn x(&self, lng: f64) -> f64 {
        (lng - self.origin.lng).to_radians() * EARTH_RADIUS_M * self.cos_lat
    }

    /// Meters north of the origin.
    pub fn y(&self, lat: f64) -> f64 {
        (lat - self.origin.lat).to_radians() * EARTH_RADIUS_M
    }

    pub fn project(&self, p: GeoPoint) -> (f64, f64) {
        (self.x(p.lng), self.y(p.lat))
    }

    /// Inverse of [`project`](Self::project), clamped into the valid
    /// coordinate range.
    pub fn unproject(&self, x: f64, y: f64) -> GeoPoint {
        let lat = self.origin.lat + (y / EARTH_RADIUS_M).to_degrees();
        let lng = self.origin.lng + (x / (EARTH_RADIUS_M * self.cos_lat)).to_degrees();
        GeoPoint {
            lat: lat.clamp(-90.0, 90.0),
            lng: lng.clamp(-180.0, 180.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lng: f64,
    pub max_lng: f64,
}

impl BoundingBox {
    pub fn of<'a, I>(points: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a GeoPoint>,
    {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut bbox = BoundingBox {
            min_lat: first.lat,
            max_lat: first.lat,
            min_lng: first.lng,
            max_lng: first.lng,
        };
        for p in it {
            bbox.min_lat = bbox.min_lat.min(p.lat);
            bbox.max_lat = bbox.max_lat.max(p.lat);
            bbox.min_lng = bbox.min_lng.min(p.lng);
            bbox.max_lng = bbox.max_lng.max(p.lng);
        }
        Some(bbox)
    }

    /// Lat/lng box enclosing every point within `radius_m` of `center`.
    /// Longitude bounds are `None` when the disc reaches a pole or the box
    /// would wrap the antimeridian.
    fn around(center: GeoPoint, radius_m: f64) -> (f64, f64, Option<(f64, f64)>) {
        // a hair of slack so boundary points survive float rounding
        let ang = radius_m / EARTH_RADIUS_M * (1.0 + 1e-9) + 1e-12;
        let dlat = ang.to_degrees();
        let min_lat = center.lat - dlat;
        let max_lat = center.lat + dlat;
        if min_lat <= -90.0 || max_lat >= 90.0 || ang >= std::f64::consts::FRAC_PI_2 {
            return (min_lat, max_lat, None);
        }
        let ratio = ang.sin() / center.lat.to_radians().cos();
        if ratio >= 1.0 {
            return (min_lat, max_lat, None);
        }
        let dlng = ratio.asin().to_degrees();
        let (lo, hi) = (center.lng - dlng, center.lng + dlng);
        if lo < -180.0 || hi > 180.0 {
            return (min_lat, max_lat, None);
        }
        (min_lat, max_lat, Some((lo, hi)))
    }
}

type Cell = (i64, i64);

/// Immutable uniform-grid index over `(id, point)` items.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    cell_size_m: f64,
    projection: Option<LocalProjection>,
    cells: HashMap<Cell, Vec<(usize, GeoPoint)>>,
    cell_bounds: Option<(Cell, Cell)>,
    len: usize,
}

impl SpatialIndex {
    pub fn build(items: &[(usize, GeoPoint)], cell_size_m: f64) -> Result<Self, GeoError> {
        if !cell_size_m.is_finite() || cell_size_m <= 0.0 {
            return Err(GeoError::InvalidCellSize(cell_size_m));
        }
        for (_, p) in items {
            GeoPoint::new(p.lat, p.lng)?;
        }
        let projection = LocalProjection::fit(items.iter().map(|(_, p)| p));
        let mut index = SpatialIndex {
            cell_size_m,
            projection,
            cells: HashMap::new(),
            cell_bounds: None,
            len: items.len(),
        };
        for &(id, p) in items {
            let cell = index.cell_of(p.lat, p.lng);
            index.cells.entry(cell).or_default().push((id, p));
            index.cell_bounds = Some(match index.cell_bounds {
                None => (cell, cell),
                Some((lo, hi)) => (
                    (lo.0.min(cell.0), lo.1.min(cell.1)),
                    (hi.0.max(cell.0), hi.1.max(cell.1)),
                ),
            });
        }
        Ok(index)
    }

    /// Convenience builder for a plain list of points; ids are positions.
    pub fn from_points(points: &[GeoPoint], cell_size_m: f64) -> Result<Self, GeoError> {
        let items: Vec<(usize, GeoPoint)> = points.iter().copied().enumerate().collect();
        Self::build(&items, cell_size_m)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }

    fn cell_of(&self, lat: f64, lng: f64) -> Cell {
        let proj = self.projection.expect("cell_of requires a non-empty index");
        (
            (proj.x(lng) / self.cell_size_m).floor() as i64,
            (proj.y(lat) / self.cell_size_m).floor() as i64,
        )
    }

    fn for_each_candidate(&self, disc: &Disc, mut f: impl FnMut(usize, GeoPoint)) {
        let (Some(proj), Some((lo, hi))) = (self.projection, self.cell_bounds) else {
            return;
        };
        let (min_lat, max_lat, lng_range) = BoundingBox::around(disc.center, disc.radius_m);
        let y0 = ((proj.y(min_lat) / self.cell_size_m).floor() as i64).max(lo.1);
        let y1 = ((proj.y(max_lat) / self.cell_size_m).floor() as i64).min(hi.1);
        let (x0, x1) = match lng_range {
            Some((a, b)) => (
                ((proj.x(a) / self.cell_size_m).floor() as i64).max(lo.0),
                ((proj.x(b) / self.cell_size_m).floor() as i64).min(hi.0),
            ),
            None => (lo.0, hi.0),
        };
        if x0 > x1 || y0 > y1 {
            return;
        }
        let span = (x1 - x0 + 1) as u128 * (y1 - y0 + 1) as u128;
        if span > self.cells.len() as u128 {
            for bucket in self.cells.values() {
                for &(id, p) in bucket {
                    f(id, p);
                }
            }
            return;
        }
        for cx in x0..=x1 {
            for cy in y0..=y1 {
                if let Some(bucket) = self.cells.get(&(cx, cy)) {
                    for &(id, p) in bucket {
                        f(id, p);
                    }
                }
            }
        }
    }

    /// Ids of all items inside the closed disc, ascending.
    pub fn query_disc(&self, disc: &Disc) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_candidate(disc, |id, p| {
            if haversine_m(disc.center, p) <= disc.radius_m {
                out.push(id);
            }
        });
        out.sort_unstable();
        out
    }

    /// Items inside the closed disc with their distance to the center,
    /// ordered by ascending distance then id.
    pub fn query_disc_with_distance(&self, disc: &Disc) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.for_each_candidate(disc, |id, p| {
            let d = haversine_m(disc.center, p);
            if d <= disc.radius_m {
                out.push((id, d));
            }
        });
        out.sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    /// True when at least one item lies in the closed disc.
    pub fn any_within(&self, disc: &Disc) -> bool {
        let mut found = false;
        self.for_each_candidate(disc, |_, p| {
            found |= haversine_m(disc.center, p) <= disc.radius_m;
        });
        found
    }

    /// Up to `k` items within `max_radius_m`, ascending distance, ties by id.
    pub fn k_nearest(&self, origin: GeoPoint, k: usize, max_radius_m: f64) -> Vec<(usize, f64)> {
        if k == 0 || !(max_radius_m > 0.0) {
            return Vec::new();
        }
        let disc = Disc {
            center: origin,
            radius_m: max_radius_m,
        };
        let mut hits = self.query_disc_with_distance(&disc);
        hits.truncate(k);
        hits
    }

    /// Nearest item overall (ties by id), found by growing the search disc.
    pub fn nearest(&self, origin: GeoPoint) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let mut radius = self.cell_size_m;
        loop {
            let disc = Disc {
                center: origin,
                radius_m: radius,
            };
            if let Some(&hit) = self.query_disc_with_distance(&disc).first() {
                return Some(hit);
            }
            if radius > std::f64::consts::PI * EARTH_RADIUS_M {
                return None;
            }
            radius *= 2.0;
        }
    }
}
