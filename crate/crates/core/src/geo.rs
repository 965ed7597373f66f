//! Geospatial primitives: great-circle distance, city grid discretization,
//! POI bag-of-categories vectors, and the normalized adjacency matrix that
//! drives the spatial branch.
//!
//! All functions are pure over immutable inputs and safe to call
//! concurrently; grid construction is single-threaded and deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{scalar, Scalar};

/// Mean Earth radius in kilometers, pinned for bit-stable distances.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Geographic point in degrees: `lon` in [-180, 180], `lat` in [-90, 90].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint<T> {
    pub lon: T,
    pub lat: T,
}

impl<T: Scalar> GeoPoint<T> {
    pub fn new(lon: T, lat: T) -> Result<Self> {
        let p = Self { lon, lat };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let lon_ok = self.lon.is_finite() && self.lon.abs() <= scalar(180.0);
        let lat_ok = self.lat.is_finite() && self.lat.abs() <= scalar(90.0);
        if lon_ok && lat_ok {
            Ok(())
        } else {
            Err(Error::OutOfBounds(format!(
                "invalid coordinates ({:?}, {:?})",
                self.lon, self.lat
            )))
        }
    }
}

/// Geographic bounding box, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox<T> {
    pub min_lon: T,
    pub max_lon: T,
    pub min_lat: T,
    pub max_lat: T,
}

impl<T: Scalar> BBox<T> {
    pub fn contains(&self, p: &GeoPoint<T>) -> bool {
        p.lon >= self.min_lon
            && p.lon <= self.max_lon
            && p.lat >= self.min_lat
            && p.lat <= self.max_lat
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.min_lon, self.max_lon, self.min_lat, self.max_lat]
            .iter()
            .all(|x| x.is_finite());
        if !finite || self.min_lon >= self.max_lon || self.min_lat >= self.max_lat {
            return Err(Error::Config(format!("degenerate bounding box {self:?}")));
        }
        Ok(())
    }
}

/// Index of a grid cell, row-major over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GridId(pub usize);

/// A categorized point of interest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoiRecord<T> {
    pub location: GeoPoint<T>,
    pub category: usize,
}

/// Normalized POI-category frequency vector of one cell: all zeros for an
/// empty cell, otherwise nonnegative weights summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BocVector<T> {
    pub weights: Vec<T>,
}

impl<T: Scalar> BocVector<T> {
    pub fn zeros(k: usize) -> Self {
        Self {
            weights: vec![T::zero(); k],
        }
    }

    pub fn is_empty_cell(&self) -> bool {
        self.weights.iter().all(|&w| w == T::zero())
    }
}

/// Meters per degree of latitude under the pinned Earth radius.
pub fn meters_per_degree_lat<T: Scalar>() -> T {
    scalar::<T>(EARTH_RADIUS_KM * 1000.0) * T::PI() / scalar(180.0)
}

/// Meters per degree of longitude at latitude `lat_deg`.
pub fn meters_per_degree_lon<T: Scalar>(lat_deg: T) -> T {
    meters_per_degree_lat::<T>() * lat_deg.to_radians().cos()
}

/// City discretization: bounding box, metric cell size, grid dimensions,
/// and the per-cell center lookup table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub bbox: BBox<T>,
    pub cell_size_m: T,
    pub n_rows: usize,
    pub n_cols: usize,
    lon_step: T,
    lat_step: T,
    centers: Vec<GeoPoint<T>>,
}

impl<T: Scalar> GridSpec<T> {
    pub fn n_cells(&self) -> usize {
        self.n_rows * self.n_cols
    }

    /// Center of cell `id`.
    pub fn center(&self, id: GridId) -> Result<GeoPoint<T>> {
        self.centers
            .get(id.0)
            .copied()
            .ok_or_else(|| Error::Index(format!("grid id {} of {}", id.0, self.centers.len())))
    }

    pub fn centers(&self) -> &[GeoPoint<T>] {
        &self.centers
    }

    /// Degree extent of one cell along (lon, lat).
    pub fn cell_steps(&self) -> (T, T) {
        (self.lon_step, self.lat_step)
    }

    /// Great-circle length of the cell diagonal in km, measured at the
    /// bbox center; bounds the quantization error of `assign_cell`.
    pub fn cell_diagonal_km(&self) -> T {
        let two = scalar::<T>(2.0);
        let lat_c = (self.bbox.min_lat + self.bbox.max_lat) / two;
        let a = GeoPoint {
            lon: self.bbox.min_lon,
            lat: lat_c,
        };
        let b = GeoPoint {
            lon: self.bbox.min_lon + self.lon_step,
            lat: lat_c + self.lat_step,
        };
        haversine_distance(&a, &b)
    }
}

/// Great-circle distance in kilometers between two points, using the
/// haversine formula with the pinned Earth radius.
pub fn haversine_distance<T: Scalar>(a: &GeoPoint<T>, b: &GeoPoint<T>) -> T {
    let half = scalar::<T>(0.5);
    let lat_a = a.lat.to_radians();
    let lat_b = b.lat.to_radians();
    let d_lat = lat_b - lat_a;
    let d_lon = (b.lon - a.lon).to_radians();
    let s_lat = (d_lat * half).sin();
    let s_lon = (d_lon * half).sin();
    let h = s_lat * s_lat + lat_a.cos() * lat_b.cos() * s_lon * s_lon;
    // Clamp against rounding before the square root hits asin's domain edge.
    let h = h.min(T::one()).max(T::zero());
    scalar::<T>(2.0 * EARTH_RADIUS_KM) * h.sqrt().asin()
}

/// Build a grid covering `bbox` with approximately square cells of
/// `cell_size_m` meters on the ground. Cell ids are assigned row-major
/// from the south-west corner.
pub fn build_grid<T: Scalar>(bbox: BBox<T>, cell_size_m: T) -> Result<GridSpec<T>> {
    bbox.validate()?;
    if !cell_size_m.is_finite() || cell_size_m <= T::zero() {
        return Err(Error::Config(format!(
            "cell size must be positive, got {cell_size_m}"
        )));
    }
    let two = scalar::<T>(2.0);
    let lat_c = (bbox.min_lat + bbox.max_lat) / two;
    let lat_step = cell_size_m / meters_per_degree_lat::<T>();
    let lon_step = cell_size_m / meters_per_degree_lon(lat_c);
    // Ceil with a relative guard so extents that are exact multiples of the
    // cell size do not gain a spurious row from rounding noise.
    let cells = |extent: T, step: T| -> usize {
        let ratio = extent / step;
        (ratio - ratio * scalar::<T>(1e-12) - scalar::<T>(1e-12))
            .ceil()
            .to_usize()
            .unwrap_or(1)
            .max(1)
    };
    let n_cols = cells(bbox.max_lon - bbox.min_lon, lon_step);
    let n_rows = cells(bbox.max_lat - bbox.min_lat, lat_step);
    let half = scalar::<T>(0.5);
    let mut centers = Vec::with_capacity(n_rows * n_cols);
    for r in 0..n_rows {
        for c in 0..n_cols {
            centers.push(GeoPoint {
                lon: bbox.min_lon + (scalar::<T>(c as f64) + half) * lon_step,
                lat: bbox.min_lat + (scalar::<T>(r as f64) + half) * lat_step,
            });
        }
    }
    Ok(GridSpec {
        bbox,
        cell_size_m,
        n_rows,
        n_cols,
        lon_step,
        lat_step,
        centers,
    })
}

/// Cell containing `p`. Points on a shared edge belong to the cell with
/// the smaller id; points outside the bbox are an error.
pub fn assign_cell<T: Scalar>(grid: &GridSpec<T>, p: &GeoPoint<T>) -> Result<GridId> {
    if !grid.bbox.contains(p) {
        return Err(Error::OutOfBounds(format!(
            "point ({:?}, {:?}) outside bbox {:?}",
            p.lon, p.lat, grid.bbox
        )));
    }
    let axis = |offset: T, step: T, count: usize| -> usize {
        let u = offset / step;
        let mut idx = u.floor().to_usize().unwrap_or(0);
        // Exact boundary between cells: tie-break to the smaller index.
        if idx > 0 && u == scalar(idx as f64) {
            idx -= 1;
        }
        idx.min(count - 1)
    };
    let c = axis(p.lon - grid.bbox.min_lon, grid.lon_step, grid.n_cols);
    let r = axis(p.lat - grid.bbox.min_lat, grid.lat_step, grid.n_rows);
    Ok(GridId(r * grid.n_cols + c))
}

/// Bag-of-categories vector of `cell`: per-category POI counts normalized
/// to sum 1, or all zeros when the cell holds no POIs.
pub fn boc_vector<T: Scalar>(
    cell: GridId,
    pois: &[PoiRecord<T>],
    grid: &GridSpec<T>,
    k: usize,
) -> Result<BocVector<T>> {
    if k == 0 {
        return Err(Error::Config(
            "bag-of-categories needs at least one category".into(),
        ));
    }
    let mut counts = vec![0usize; k];
    for poi in pois {
        if poi.category >= k {
            return Err(Error::Data(format!(
                "POI category {} out of range 0..{}",
                poi.category, k
            )));
        }
        // POIs outside the bbox carry no cell and are ignored.
        if let Ok(id) = assign_cell(grid, &poi.location) {
            if id == cell {
                counts[poi.category] += 1;
            }
        }
    }
    Ok(normalize_counts(&counts))
}

/// Bag-of-categories vectors for every cell of the grid in one pass.
pub fn boc_table<T: Scalar>(
    pois: &[PoiRecord<T>],
    grid: &GridSpec<T>,
    k: usize,
) -> Result<Vec<BocVector<T>>> {
    if k == 0 {
        return Err(Error::Config(
            "bag-of-categories needs at least one category".into(),
        ));
    }
    let mut counts = vec![vec![0usize; k]; grid.n_cells()];
    for poi in pois {
        if poi.category >= k {
            return Err(Error::Data(format!(
                "POI category {} out of range 0..{}",
                poi.category, k
            )));
        }
        if let Ok(id) = assign_cell(grid, &poi.location) {
            counts[id.0][poi.category] += 1;
        }
    }
    Ok(counts.iter().map(|c| normalize_counts(c)).collect())
}

fn normalize_counts<T: Scalar>(counts: &[usize]) -> BocVector<T> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return BocVector::zeros(counts.len());
    }
    let inv = T::one() / scalar::<T>(total as f64);
    BocVector {
        weights: counts
            .iter()
            .map(|&c| scalar::<T>(c as f64) * inv)
            .collect(),
    }
}

/// Symmetric nonnegative adjacency matrix over graph nodes; plain `A` has
/// a zero diagonal, the normalized form has a strictly positive one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjacency<T> {
    pub n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Adjacency<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn from_dense(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Shape(format!(
                "adjacency needs {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn entries(&self) -> &[T] {
        &self.data
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.at(i, j) - self.at(j, i)).abs());
            }
        }
        worst
    }
}

/// Unweighted proximity graph over the occupied cells: an edge joins two
/// nodes whose cell centers are strictly closer than `tau_km`.
pub fn build_adjacency<T: Scalar>(
    grid: &GridSpec<T>,
    occupied: &[GridId],
    tau_km: T,
) -> Result<Adjacency<T>> {
    if !tau_km.is_finite() || tau_km <= T::zero() {
        return Err(Error::Config(format!(
            "distance threshold must be positive, got {tau_km}"
        )));
    }
    if occupied.is_empty() {
        return Err(Error::Config(
            "adjacency needs at least one occupied cell".into(),
        ));
    }
    let centers: Vec<GeoPoint<T>> = occupied
        .iter()
        .map(|&id| grid.center(id))
        .collect::<Result<_>>()?;
    let n = centers.len();
    let mut adj = Adjacency::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if haversine_distance(&centers[i], &centers[j]) < tau_km {
                adj.set(i, j, T::one());
                adj.set(j, i, T::one());
            }
        }
    }
    Ok(adj)
}

/// Symmetric normalization with self-loops:
/// `A_hat[i][j] = (A[i][j] + I[i][j]) / sqrt(d_i * d_j)` with
/// `d_i = sum_j (A[i][j] + I[i][j])`. Every degree is at least 1, so the
/// result is total, symmetric, with entries in (0, 1] on the diagonal.
pub fn normalize_adjacency<T: Scalar>(a: &Adjacency<T>) -> Adjacency<T> {
    let n = a.n;
    let mut degree = vec![T::zero(); n];
    for i in 0..n {
        let mut d = T::one(); // self-loop
        for j in 0..n {
            d += a.at(i, j);
        }
        degree[i] = d;
    }
    let mut out = Adjacency::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let with_loop = if i == j {
                a.at(i, j) + T::one()
            } else {
                a.at(i, j)
            };
            if with_loop != T::zero() {
                out.set(i, j, with_loop / (degree[i] * degree[j]).sqrt());
            }
        }
    }
    out
}
