//! Square-cell demand counts for map overlays.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DemandError;
use crate::geo::{GeoPoint, LocalProjection};

/// Smallest accepted cell side, meters.
pub const MIN_CELL_M: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatCell {
    pub lat: f64,
    pub lng: f64,
    pub demand_count: u64,
}

/// Buckets points into `cell_m` squares of a local plane anchored at the
/// south-west corner of the points. Cells are reported at their centers,
/// south to north then west to east.
pub fn heatmap(points: &[GeoPoint], cell_m: f64) -> Result<Vec<HeatCell>, DemandError> {
    if !(cell_m >= MIN_CELL_M && cell_m.is_finite()) {
        return Err(DemandError::CellTooSmall(cell_m));
    }
    let Some(proj) = LocalProjection::fit(points) else {
        return Ok(Vec::new());
    };
    let mut cells: BTreeMap<(i64, i64), u64> = BTreeMap::new();
    for p in points {
        let (x, y) = proj.project(*p);
        *cells
            .entry(((y / cell_m).floor() as i64, (x / cell_m).floor() as i64))
            .or_default() += 1;
    }
    Ok(cells
        .into_iter()
        .map(|((iy, ix), demand_count)| {
            let c = proj.unproject((ix as f64 + 0.5) * cell_m, (iy as f64 + 0.5) * cell_m);
            HeatCell {
                lat: c.lat,
                lng: c.lng,
                demand_count,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_single_cell() {
        let cells = heatmap(&[GeoPoint { lat: 39.9, lng: 116.4 }], 100.0).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].demand_count, 1);
    }

    #[test]
    fn small_cells_rejected() {
        assert!(matches!(heatmap(&[], 49.0), Err(DemandError::CellTooSmall(_))));
        assert!(heatmap(&[], 50.0).unwrap().is_empty());
    }

    #[test]
    fn counts_conserved() {
        let proj = LocalProjection::new(GeoPoint { lat: 39.9, lng: 116.4 });
        let pts: Vec<_> = (0..500)
            .map(|i| proj.unproject((i * 37 % 2000) as f64, (i * 91 % 3000) as f64))
            .collect();
        let cells = heatmap(&pts, 250.0).unwrap();
        assert_eq!(cells.iter().map(|c| c.demand_count).sum::<u64>(), 500);
        assert!(cells.len() <= 8 * 12 + 20);
    }
}
