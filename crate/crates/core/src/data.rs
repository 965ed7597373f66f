//! Dataset ingestion, trip sequencing, taxi-level splitting, and the
//! seeded synthetic-city generator used for desk-scale training.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Datelike, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{assign_cell, build_grid, meters_per_degree_lat, meters_per_degree_lon, GridId};
use crate::{BBox, BocVector, GeoPoint, GridSpec, PoiRecord};

/// One origin-destination trip record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub taxi_id: u64,
    pub pickup: GeoPoint,
    pub dropoff: GeoPoint,
    pub pickup_time: DateTime<Utc>,
}

impl TripRecord {
    pub fn hour(&self) -> usize {
        self.pickup_time.hour() as usize
    }

    /// 0 = Monday ... 6 = Sunday.
    pub fn weekday(&self) -> usize {
        self.pickup_time.weekday().num_days_from_monday() as usize
    }

    /// 0 = weekday, 1 = weekend.
    pub fn day_type(&self) -> usize {
        usize::from(self.weekday() >= 5)
    }
}

/// Counts of parsed and skipped rows from an ingestion pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub parsed: usize,
    pub skipped: usize,
}

fn finite_coord(lon: f64, lat: f64) -> bool {
    lon.is_finite() && lat.is_finite() && lon.abs() <= 180.0 && lat.abs() <= 90.0
}

/// Read trips from delimited text with the header
/// `taxi_id,pickup_time,pickup_lon,pickup_lat,dropoff_lon,dropoff_lat`
/// (ISO-8601 UTC timestamps). Malformed rows are counted and skipped; a
/// file where more than half the rows fail is a hard error.
pub fn ingest_trips(path: &Path) -> Result<(Vec<TripRecord>, IngestReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut trips = Vec::new();
    let mut skipped = 0usize;
    let mut total = 0usize;
    for record in reader.records() {
        total += 1;
        let Ok(row) = record else {
            skipped += 1;
            continue;
        };
        match parse_trip_row(&row) {
            Some(trip) => trips.push(trip),
            None => skipped += 1,
        }
    }
    if total == 0 {
        log::warn!("{}: no trip rows", path.display());
    }
    if total > 0 && skipped * 2 > total {
        return Err(Error::Data(format!(
            "{}: {skipped} of {total} rows malformed",
            path.display()
        )));
    }
    if skipped > 0 {
        log::warn!(
            "{}: skipped {skipped} malformed rows of {total}",
            path.display()
        );
    }
    Ok((
        trips,
        IngestReport {
            parsed: total - skipped,
            skipped,
        },
    ))
}

fn parse_trip_row(row: &csv::StringRecord) -> Option<TripRecord> {
    if row.len() != 6 {
        return None;
    }
    let taxi_id: u64 = row.get(0)?.parse().ok()?;
    let pickup_time = DateTime::parse_from_rfc3339(row.get(1)?)
        .ok()?
        .with_timezone(&Utc);
    let pickup_lon: f64 = row.get(2)?.parse().ok()?;
    let pickup_lat: f64 = row.get(3)?.parse().ok()?;
    let dropoff_lon: f64 = row.get(4)?.parse().ok()?;
    let dropoff_lat: f64 = row.get(5)?.parse().ok()?;
    if !finite_coord(pickup_lon, pickup_lat) || !finite_coord(dropoff_lon, dropoff_lat) {
        return None;
    }
    Some(TripRecord {
        taxi_id,
        pickup: GeoPoint {
            lon: pickup_lon,
            lat: pickup_lat,
        },
        dropoff: GeoPoint {
            lon: dropoff_lon,
            lat: dropoff_lat,
        },
        pickup_time,
    })
}

/// Read POIs from delimited text with the header `lon,lat,category_id`.
pub fn ingest_pois(path: &Path) -> Result<(Vec<PoiRecord>, IngestReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut pois = Vec::new();
    let mut skipped = 0usize;
    let mut total = 0usize;
    for record in reader.records() {
        total += 1;
        let parsed = record.ok().and_then(|row| {
            if row.len() != 3 {
                return None;
            }
            let lon: f64 = row.get(0)?.parse().ok()?;
            let lat: f64 = row.get(1)?.parse().ok()?;
            let category: usize = row.get(2)?.parse().ok()?;
            if !finite_coord(lon, lat) {
                return None;
            }
            Some(PoiRecord {
                location: GeoPoint { lon, lat },
                category,
            })
        });
        match parsed {
            Some(p) => pois.push(p),
            None => skipped += 1,
        }
    }
    if total > 0 && skipped * 2 > total {
        return Err(Error::Data(format!(
            "{}: {skipped} of {total} rows malformed",
            path.display()
        )));
    }
    Ok((
        pois,
        IngestReport {
            parsed: total - skipped,
            skipped,
        },
    ))
}

/// One step of a trip history: the visited (dropoff) cell with its
/// semantic vector and temporal context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryStep {
    pub grid: GridId,
    pub boc: Vec<f64>,
    pub hour: usize,
    pub weekday: usize,
    pub daytype: usize,
}

/// One training sample: `L` historical trips plus the next destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripSequence {
    pub taxi_id: u64,
    pub history: Vec<HistoryStep>,
    pub target_grid: GridId,
    pub target_coords: GeoPoint,
}

/// Cells visited by any trip endpoint (pickup or dropoff), sorted and
/// deduplicated. These become the graph nodes. Trips with an endpoint
/// outside the grid bbox are ignored, matching the geographic filtering
/// of the preprocessing stage.
pub fn occupied_cells(trips: &[TripRecord], grid: &GridSpec) -> Vec<GridId> {
    let mut cells: Vec<GridId> = trips
        .iter()
        .flat_map(|t| {
            assign_cell(grid, &t.pickup)
                .into_iter()
                .chain(assign_cell(grid, &t.dropoff))
        })
        .collect();
    cells.sort_unstable();
    cells.dedup();
    cells
}

/// Group each taxi's trips into segments of consecutive trips whose
/// boarding times are within `gap_hours` of the previous trip, then emit
/// one sequence per window of `seq_len + 1` consecutive trips (history
/// plus target), or one window per segment when `one_per_segment` is set.
///
/// Trips with an endpoint outside the grid are dropped before
/// segmentation. Segments shorter than `seq_len + 1` yield no samples.
pub fn build_sequences(
    trips: &[TripRecord],
    grid: &GridSpec,
    boc: &[BocVector],
    gap_hours: f64,
    seq_len: usize,
    one_per_segment: bool,
) -> Result<Vec<TripSequence>> {
    if seq_len == 0 {
        return Err(Error::Config("sequence length must be at least 1".into()));
    }
    if boc.len() != grid.n_cells() {
        return Err(Error::Shape(format!(
            "{} BOC vectors for {} cells",
            boc.len(),
            grid.n_cells()
        )));
    }
    // Group per taxi in deterministic id order, then sort by time.
    let mut per_taxi: BTreeMap<u64, Vec<&TripRecord>> = BTreeMap::new();
    for trip in trips {
        if grid.bbox.contains(&trip.pickup) && grid.bbox.contains(&trip.dropoff) {
            per_taxi.entry(trip.taxi_id).or_default().push(trip);
        }
    }
    let gap = chrono::Duration::milliseconds((gap_hours * 3_600_000.0) as i64);
    let mut sequences = Vec::new();
    for (taxi_id, mut taxi_trips) in per_taxi {
        taxi_trips.sort_by_key(|t| t.pickup_time);
        let mut segment_start = 0usize;
        for i in 1..=taxi_trips.len() {
            let boundary = i == taxi_trips.len()
                || taxi_trips[i].pickup_time - taxi_trips[i - 1].pickup_time > gap;
            if !boundary {
                continue;
            }
            let segment = &taxi_trips[segment_start..i];
            segment_start = i;
            if segment.len() < seq_len + 1 {
                continue;
            }
            let windows = if one_per_segment {
                1
            } else {
                segment.len() - seq_len
            };
            for w in 0..windows {
                let history = segment[w..w + seq_len]
                    .iter()
                    .map(|t| {
                        let cell = assign_cell(grid, &t.dropoff)?;
                        Ok(HistoryStep {
                            grid: cell,
                            boc: boc[cell.0].weights.clone(),
                            hour: t.hour(),
                            weekday: t.weekday(),
                            daytype: t.day_type(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let target = &segment[w + seq_len];
                sequences.push(TripSequence {
                    taxi_id,
                    history,
                    target_grid: assign_cell(grid, &target.dropoff)?,
                    target_coords: target.dropoff,
                });
            }
        }
    }
    Ok(sequences)
}

/// Train/validation/test partition, disjoint by taxi id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<TripSequence>,
    pub val: Vec<TripSequence>,
    pub test: Vec<TripSequence>,
}

/// Shuffle taxi ids with the seed and partition them by the fractions;
/// every sequence follows its taxi's split.
pub fn split_by_taxi(
    sequences: &[TripSequence],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetSplit> {
    let (fa, fb, fc) = fractions;
    if (fa + fb + fc - 1.0).abs() > 1e-9 || fa <= 0.0 || fb <= 0.0 || fc <= 0.0 {
        return Err(Error::Config(format!(
            "fractions must be positive and sum to 1, got ({fa}, {fb}, {fc})"
        )));
    }
    let mut taxi_ids: Vec<u64> = sequences.iter().map(|s| s.taxi_id).collect();
    taxi_ids.sort_unstable();
    taxi_ids.dedup();
    if taxi_ids.len() < 3 {
        return Err(Error::Config(format!(
            "need at least 3 taxis to split, got {}",
            taxi_ids.len()
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    // Fisher-Yates over the sorted ids keeps the shuffle reproducible.
    for i in (1..taxi_ids.len()).rev() {
        let j = rng.gen_range(0..=i);
        taxi_ids.swap(i, j);
    }
    let n = taxi_ids.len();
    let n_train = ((n as f64 * fa).round() as usize).clamp(1, n - 2);
    let n_val = ((n as f64 * fb).round() as usize).clamp(1, n - n_train - 1);
    let assignment = |taxi: u64| -> usize {
        let pos = taxi_ids
            .iter()
            .position(|&t| t == taxi)
            .expect("taxi in list");
        if pos < n_train {
            0
        } else if pos < n_train + n_val {
            1
        } else {
            2
        }
    };
    let mut split = DatasetSplit {
        train: vec![],
        val: vec![],
        test: vec![],
    };
    for seq in sequences {
        match assignment(seq.taxi_id) {
            0 => split.train.push(seq.clone()),
            1 => split.val.push(seq.clone()),
            _ => split.test.push(seq.clone()),
        }
    }
    Ok(split)
}

/// Parameters of the synthetic city generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_rows: usize,
    pub n_cols: usize,
    pub n_taxis: usize,
    pub trips_per_taxi: usize,
    pub k_poi: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            n_rows: 8,
            n_cols: 8,
            n_taxis: 20,
            trips_per_taxi: 100,
            k_poi: 5,
        }
    }
}

/// Cell size used by the synthetic city.
pub const SYNTH_CELL_M: f64 = 500.0;

/// Bounding box sized for exactly `n_rows x n_cols` cells of
/// [`SYNTH_CELL_M`] meters, anchored at a fixed origin.
pub fn synthetic_bbox(n_rows: usize, n_cols: usize) -> BBox {
    let (min_lon, min_lat) = (10.0, 45.0);
    let height_m = SYNTH_CELL_M * n_rows as f64;
    let width_m = SYNTH_CELL_M * n_cols as f64;
    let lat_c = min_lat + 0.5 * height_m / meters_per_degree_lat::<f64>();
    BBox {
        min_lon,
        max_lon: min_lon + width_m / meters_per_degree_lon::<f64>(lat_c),
        min_lat,
        max_lat: min_lat + height_m / meters_per_degree_lat::<f64>(),
    }
}

/// Generate a small city whose trips follow a seeded Markov pattern over
/// a few attractor cells, with POIs clustered at the attractors. The task
/// is learnable by construction: destinations concentrate on the
/// attractors and the attractor sequence is mostly a cycle with a bias
/// toward a hub.
///
/// Every cell is used as a pickup at least once (given enough trips), so
/// the whole grid participates in the graph.
pub fn generate_synthetic_city(
    spec: &SyntheticSpec,
) -> Result<(GridSpec, Vec<PoiRecord>, Vec<TripRecord>)> {
    if spec.n_rows == 0
        || spec.n_cols == 0
        || spec.n_taxis == 0
        || spec.trips_per_taxi == 0
        || spec.k_poi == 0
    {
        return Err(Error::Config(
            "synthetic city sizes must be positive".into(),
        ));
    }
    let bbox = synthetic_bbox(spec.n_rows, spec.n_cols);
    let grid = build_grid(bbox, SYNTH_CELL_M)?;
    let n_cells = grid.n_cells();
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);

    // Attractor cells: a handful of destination hot spots, confined to
    // the south-west quadrant so the destination mass sits to one side of
    // the grid centroid and the prediction signal has a clear direction.
    let n_attractors = (n_cells / 12).clamp(2, 6);
    let mut cell_perm: Vec<usize> = (0..n_cells).collect();
    for i in (1..n_cells).rev() {
        let j = rng.gen_range(0..=i);
        cell_perm.swap(i, j);
    }
    let in_quadrant = |cell: usize| {
        let (r, c) = (cell / spec.n_cols, cell % spec.n_cols);
        r <= (spec.n_rows - 1) / 2 && c <= (spec.n_cols - 1) / 2
    };
    let attractors: Vec<GridId> = cell_perm
        .iter()
        .copied()
        .filter(|&c| in_quadrant(c))
        .take(n_attractors)
        .map(GridId)
        .collect();
    let n_attractors = attractors.len().max(1);

    let (lon_step, lat_step) = grid.cell_steps();
    let jittered = |center: GeoPoint, rng: &mut ChaCha20Rng| GeoPoint {
        lon: center.lon + rng.gen_range(-0.3..0.3) * lon_step,
        lat: center.lat + rng.gen_range(-0.3..0.3) * lat_step,
    };

    // POIs: a characteristic category cluster per attractor plus a
    // uniform background.
    let mut pois = Vec::new();
    for (i, &attractor) in attractors.iter().enumerate() {
        let center = grid.center(attractor)?;
        for _ in 0..25 {
            pois.push(PoiRecord {
                location: jittered(center, &mut rng),
                category: i % spec.k_poi,
            });
        }
    }
    for _ in 0..n_cells {
        let cell = GridId(rng.gen_range(0..n_cells));
        let center = grid.center(cell)?;
        let category = rng.gen_range(0..spec.k_poi);
        pois.push(PoiRecord {
            location: jittered(center, &mut rng),
            category,
        });
    }

    // Trips: pickups sweep every cell once before going random, so the
    // occupied set covers the grid; dropoffs follow the attractor chain.
    let start = DateTime::parse_from_rfc3339("2024-01-01T00:00:00Z")
        .expect("valid timestamp")
        .with_timezone(&Utc);
    let mut trips = Vec::with_capacity(spec.n_taxis * spec.trips_per_taxi);
    let mut coverage = 0usize;
    for taxi in 0..spec.n_taxis {
        let mut attractor_state = rng.gen_range(0..n_attractors);
        let taxi_start = start + chrono::Duration::minutes(17 * taxi as i64);
        for t in 0..spec.trips_per_taxi {
            let pickup_cell = if coverage < n_cells {
                let cell = cell_perm[coverage];
                coverage += 1;
                GridId(cell)
            } else {
                GridId(rng.gen_range(0..n_cells))
            };
            let r: f64 = rng.gen();
            attractor_state = if r < 0.55 {
                (attractor_state + 1) % n_attractors
            } else if r < 0.85 {
                0
            } else {
                rng.gen_range(0..n_attractors)
            };
            let pickup = jittered(grid.center(pickup_cell)?, &mut rng);
            let dropoff = jittered(grid.center(attractors[attractor_state])?, &mut rng);
            trips.push(TripRecord {
                taxi_id: taxi as u64 + 1,
                pickup,
                dropoff,
                pickup_time: taxi_start + chrono::Duration::hours(2 * t as i64),
            });
        }
    }
    Ok((grid, pois, trips))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::boc_table;
    use std::io::Write;

    fn trip(taxi: u64, hour_offset: f64, lon: f64, lat: f64) -> TripRecord {
        let start = DateTime::parse_from_rfc3339("2024-01-01T00:00:00Z")
            .unwrap()
            .with_timezone(&Utc);
        TripRecord {
            taxi_id: taxi,
            pickup: GeoPoint { lon, lat },
            dropoff: GeoPoint { lon, lat },
            pickup_time: start + chrono::Duration::milliseconds((hour_offset * 3_600_000.0) as i64),
        }
    }

    fn toy_grid() -> GridSpec {
        build_grid(synthetic_bbox(2, 2), SYNTH_CELL_M).unwrap()
    }

    fn uniform_boc(grid: &GridSpec) -> Vec<BocVector> {
        boc_table(&[], grid, 3).unwrap()
    }

    #[test]
    fn five_hourly_trips_make_one_sequence() {
        let grid = toy_grid();
        let center = grid.center(GridId(0)).unwrap();
        let trips: Vec<TripRecord> = (0..5)
            .map(|i| trip(1, i as f64, center.lon, center.lat))
            .collect();
        let seqs = build_sequences(&trips, &grid, &uniform_boc(&grid), 3.0, 4, false).unwrap();
        assert_eq!(seqs.len(), 1);
        assert_eq!(seqs[0].history.len(), 4);
    }

    #[test]
    fn six_trips_slide_into_two_sequences() {
        let grid = toy_grid();
        let center = grid.center(GridId(0)).unwrap();
        let trips: Vec<TripRecord> = (0..6)
            .map(|i| trip(1, i as f64, center.lon, center.lat))
            .collect();
        let seqs = build_sequences(&trips, &grid, &uniform_boc(&grid), 3.0, 4, false).unwrap();
        assert_eq!(seqs.len(), 2);
        // One-per-segment mode collapses back to a single sample.
        let single = build_sequences(&trips, &grid, &uniform_boc(&grid), 3.0, 4, true).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn four_hour_gap_splits_the_segment() {
        let grid = toy_grid();
        let center = grid.center(GridId(0)).unwrap();
        let mut trips: Vec<TripRecord> = (0..4)
            .map(|i| trip(1, i as f64, center.lon, center.lat))
            .collect();
        trips.push(trip(1, 3.0 + 4.0, center.lon, center.lat));
        let seqs = build_sequences(&trips, &grid, &uniform_boc(&grid), 3.0, 4, false).unwrap();
        assert!(
            seqs.is_empty(),
            "the gap must split the segment before a window forms"
        );
    }

    #[test]
    fn exactly_three_hour_gap_stays_in_segment() {
        let grid = toy_grid();
        let center = grid.center(GridId(0)).unwrap();
        let trips: Vec<TripRecord> = (0..5)
            .map(|i| trip(1, 3.0 * i as f64, center.lon, center.lat))
            .collect();
        let seqs = build_sequences(&trips, &grid, &uniform_boc(&grid), 3.0, 4, false).unwrap();
        assert_eq!(seqs.len(), 1);
    }

    #[test]
    fn windows_never_cross_taxis() {
        let grid = toy_grid();
        let center = grid.center(GridId(0)).unwrap();
        let mut trips = Vec::new();
        for taxi in 1..=2u64 {
            for i in 0..3 {
                trips.push(trip(taxi, i as f64, center.lon, center.lat));
            }
        }
        // 3 trips per taxi cannot form a 4+1 window even though 6 total could.
        let seqs = build_sequences(&trips, &grid, &uniform_boc(&grid), 3.0, 4, false).unwrap();
        assert!(seqs.is_empty());
    }

    #[test]
    fn split_partitions_all_sequences_disjointly() {
        let grid = toy_grid();
        let center = grid.center(GridId(0)).unwrap();
        let mut trips = Vec::new();
        for taxi in 1..=10u64 {
            for i in 0..6 {
                trips.push(trip(taxi, i as f64, center.lon, center.lat));
            }
        }
        let seqs = build_sequences(&trips, &grid, &uniform_boc(&grid), 3.0, 4, false).unwrap();
        let split = split_by_taxi(&seqs, (0.65, 0.15, 0.20), 7).unwrap();
        assert_eq!(
            split.train.len() + split.val.len() + split.test.len(),
            seqs.len()
        );
        let ids = |part: &[TripSequence]| -> std::collections::BTreeSet<u64> {
            part.iter().map(|s| s.taxi_id).collect()
        };
        let train = ids(&split.train);
        let val = ids(&split.val);
        let test = ids(&split.test);
        assert!(train.is_disjoint(&val) && train.is_disjoint(&test) && val.is_disjoint(&test));
        // Same seed reproduces the same split.
        let again = split_by_taxi(&seqs, (0.65, 0.15, 0.20), 7).unwrap();
        assert_eq!(split, again);
        // A different seed moves taxis around.
        let other = split_by_taxi(&seqs, (0.65, 0.15, 0.20), 8).unwrap();
        assert!(split != other || train.len() == 10);
    }

    #[test]
    fn hundred_taxis_split_65_15_20() {
        let grid = toy_grid();
        let center = grid.center(GridId(0)).unwrap();
        let mut trips = Vec::new();
        for taxi in 1..=100u64 {
            for i in 0..5 {
                trips.push(trip(taxi, i as f64, center.lon, center.lat));
            }
        }
        let seqs = build_sequences(&trips, &grid, &uniform_boc(&grid), 3.0, 4, false).unwrap();
        let split = split_by_taxi(&seqs, (0.65, 0.15, 0.20), 3).unwrap();
        let count = |part: &[TripSequence]| {
            part.iter()
                .map(|s| s.taxi_id)
                .collect::<std::collections::BTreeSet<_>>()
                .len()
        };
        assert_eq!(count(&split.train), 65);
        assert_eq!(count(&split.val), 15);
        assert_eq!(count(&split.test), 20);
    }

    #[test]
    fn too_few_taxis_is_a_config_error() {
        let grid = toy_grid();
        let center = grid.center(GridId(0)).unwrap();
        let trips: Vec<TripRecord> = (0..6)
            .map(|i| trip(1, i as f64, center.lon, center.lat))
            .collect();
        let seqs = build_sequences(&trips, &grid, &uniform_boc(&grid), 3.0, 4, false).unwrap();
        assert!(matches!(
            split_by_taxi(&seqs, (0.65, 0.15, 0.20), 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn synthetic_city_is_deterministic_and_in_bounds() {
        let spec = SyntheticSpec {
            n_taxis: 10,
            trips_per_taxi: 50,
            ..Default::default()
        };
        let (grid_a, pois_a, trips_a) = generate_synthetic_city(&spec).unwrap();
        let (_, pois_b, trips_b) = generate_synthetic_city(&spec).unwrap();
        assert_eq!(pois_a, pois_b);
        assert_eq!(trips_a, trips_b);
        assert_eq!(trips_a.len(), 500);
        for t in &trips_a {
            assert!(grid_a.bbox.contains(&t.pickup));
            assert!(grid_a.bbox.contains(&t.dropoff));
        }
        for p in &pois_a {
            assert!(grid_a.bbox.contains(&p.location));
        }
    }

    #[test]
    fn synthetic_city_covers_every_cell() {
        let spec = SyntheticSpec::default();
        let (grid, _, trips) = generate_synthetic_city(&spec).unwrap();
        let occ = occupied_cells(&trips, &grid);
        assert_eq!(occ.len(), grid.n_cells());
    }

    #[test]
    fn ingest_trips_skips_bad_rows() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            file,
            "taxi_id,pickup_time,pickup_lon,pickup_lat,dropoff_lon,dropoff_lat"
        )
        .unwrap();
        writeln!(file, "1,2024-01-01T10:00:00Z,10.0,45.0,10.01,45.01").unwrap();
        writeln!(file, "2,2024-01-01T11:00:00Z,10.0,200.0,10.01,45.01").unwrap();
        writeln!(file, "3,2024-01-01T12:00:00Z,10.0,45.0,10.02,45.02").unwrap();
        writeln!(file, "4,2024-01-01T13:00:00Z,10.0,45.0,10.03,45.03").unwrap();
        let (trips, report) = ingest_trips(file.path()).unwrap();
        assert_eq!(trips.len(), 3);
        assert_eq!(report.skipped, 1);
    }

    #[test]
    fn ingest_mostly_malformed_file_is_a_hard_error() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            file,
            "taxi_id,pickup_time,pickup_lon,pickup_lat,dropoff_lon,dropoff_lat"
        )
        .unwrap();
        writeln!(file, "nope").unwrap();
        writeln!(file, "also,not,good").unwrap();
        writeln!(file, "1,2024-01-01T10:00:00Z,10.0,45.0,10.01,45.01").unwrap();
        assert!(matches!(ingest_trips(file.path()), Err(Error::Data(_))));
    }

    #[test]
    fn ingest_empty_file_is_empty_list() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            file,
            "taxi_id,pickup_time,pickup_lon,pickup_lat,dropoff_lon,dropoff_lat"
        )
        .unwrap();
        let (trips, report) = ingest_trips(file.path()).unwrap();
        assert!(trips.is_empty());
        assert_eq!(
            report,
            IngestReport {
                parsed: 0,
                skipped: 0
            }
        );
    }

    #[test]
    fn day_type_distinguishes_weekends() {
        // 2024-01-06 is a Saturday.
        let t = TripRecord {
            taxi_id: 1,
            pickup: GeoPoint { lon: 0.0, lat: 0.0 },
            dropoff: GeoPoint { lon: 0.0, lat: 0.0 },
            pickup_time: DateTime::parse_from_rfc3339("2024-01-06T09:30:00Z")
                .unwrap()
                .with_timezone(&Utc),
        };
        assert_eq!(t.weekday(), 5);
        assert_eq!(t.day_type(), 1);
        assert_eq!(t.hour(), 9);
    }
}
