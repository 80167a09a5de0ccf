//! Exact closed-ball radius queries over a uniform grid.
//!
//! Membership is decided by [`within`] in both the grid search and the linear
//! scan oracle, so the two agree on boundary points bit for bit.

use crate::cloud::{NormalizedCloud, Point};
use crate::{Error, Result};

/// Upper bound on the number of grid cells.
const MAX_CELLS: usize = 1 << 21;

#[inline]
pub fn dist_sq(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Closed-ball membership test shared by every query path.
#[inline]
pub fn within(p: &Point, center: &Point, r: f64) -> bool {
    dist_sq(p, center) <= r * r
}

fn check_query(center: &Point, r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::arg(format!(
            "radius must be positive and finite, got {r}"
        )));
    }
    if center.iter().any(|c| !c.is_finite()) {
        return Err(Error::arg("query center must be finite"));
    }
    Ok(())
}

/// Linear scan: ids of all points with distance ≤ `r` from `center`, ascending.
pub fn brute_force_radius(points: &[Point], center: &Point, r: f64) -> Result<Vec<usize>> {
    check_query(center, r)?;
    Ok(points
        .iter()
        .enumerate()
        .filter(|(_, p)| within(p, center, r))
        .map(|(i, _)| i)
        .collect())
}

/// Uniform-grid index over an immutable point slice. Point ids are 0-based
/// positions in that slice.
#[derive(Debug, Clone)]
pub struct NeighborIndex<'a> {
    points: &'a [Point],
    origin: Point,
    cell: f64,
    dims: [usize; 3],
    /// `starts[c]..starts[c + 1]` indexes `ids` for cell `c`.
    starts: Vec<u32>,
    ids: Vec<u32>,
}

impl<'a> NeighborIndex<'a> {
    /// Build with a cell size derived from the point count (about four points
    /// per occupied cell for uniform data).
    pub fn build(points: &'a [Point]) -> Result<Self> {
        let extent = Self::extent(points)?;
        let per_axis = ((points.len() as f64 / 4.0).cbrt()).clamp(1.0, 128.0);
        Self::with_cell_size(points, extent / per_axis)
    }

    /// Build with cells sized for queries of radius `r`.
    pub fn build_for_radius(points: &'a [Point], r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::arg(format!("radius must be positive, got {r}")));
        }
        Self::with_cell_size(points, 0.5 * r)
    }

    fn extent(points: &[Point]) -> Result<f64> {
        if points.is_empty() {
            return Err(Error::arg("cannot index an empty cloud"));
        }
        let (lo, hi) = bounds(points);
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(Error::arg("points must be finite"));
        }
        Ok((0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max))
    }

    pub fn with_cell_size(points: &'a [Point], cell: f64) -> Result<Self> {
        let extent = Self::extent(points)?;
        let (origin, hi) = bounds(points);
        let mut cell = if cell.is_finite() && cell > 0.0 {
            cell
        } else {
            extent.max(1.0)
        };
        let dims = loop {
            let dims = [0, 1, 2].map(|a| (((hi[a] - origin[a]) / cell).floor() as usize) + 1);
            if dims.iter().product::<usize>() <= MAX_CELLS {
                break dims;
            }
            cell *= 1.25;
        };

        let mut index = NeighborIndex {
            points,
            origin,
            cell,
            dims,
            starts: Vec::new(),
            ids: Vec::new(),
        };
        // counting sort of point ids by cell
        let n_cells = dims.iter().product::<usize>();
        let keys: Vec<usize> = points.iter().map(|p| index.cell_of(p)).collect();
        let mut starts = vec![0u32; n_cells + 1];
        for &k in &keys {
            starts[k + 1] += 1;
        }
        for c in 0..n_cells {
            starts[c + 1] += starts[c];
        }
        let mut fill = starts.clone();
        let mut ids = vec![0u32; points.len()];
        for (i, &k) in keys.iter().enumerate() {
            ids[fill[k] as usize] = i as u32;
            fill[k] += 1;
        }
        index.starts = starts;
        index.ids = ids;
        Ok(index)
    }

    pub fn points(&self) -> &'a [Point] {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    fn axis_cell(&self, a: usize, v: f64) -> i64 {
        ((v - self.origin[a]) / self.cell).floor() as i64
    }

    fn cell_of(&self, p: &Point) -> usize {
        let mut key = 0;
        for a in 0..3 {
            let c = self.axis_cell(a, p[a]).clamp(0, self.dims[a] as i64 - 1) as usize;
            key = key * self.dims[a] + c;
        }
        key
    }

    /// Call `visit` with every id inside the closed ball, in unspecified order.
    pub fn for_each_within<F: FnMut(usize)>(
        &self,
        center: &Point,
        r: f64,
        mut visit: F,
    ) -> Result<()> {
        check_query(center, r)?;
        // slack keeps cell pruning conservative under rounding
        let slack = 1e-9 * (1.0 + r + center.iter().fold(0.0f64, |m, c| m.max(c.abs())));
        let mut range = [(0usize, 0usize); 3];
        for a in 0..3 {
            let lo = self.axis_cell(a, center[a] - r - slack);
            let hi = self.axis_cell(a, center[a] + r + slack);
            let last = self.dims[a] as i64 - 1;
            if hi < 0 || lo > last {
                return Ok(());
            }
            range[a] = (lo.max(0) as usize, hi.min(last) as usize);
        }
        for i in range[0].0..=range[0].1 {
            for j in range[1].0..=range[1].1 {
                let row = (i * self.dims[1] + j) * self.dims[2];
                let first = self.starts[row + range[2].0] as usize;
                let last = self.starts[row + range[2].1 + 1] as usize;
                for &id in &self.ids[first..last] {
                    let id = id as usize;
                    if within(&self.points[id], center, r) {
                        visit(id);
                    }
                }
            }
        }
        Ok(())
    }

    /// Ids with Euclidean distance ≤ `r` from `center`, ascending.
    pub fn radius_query(&self, center: &Point, r: f64) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        self.for_each_within(center, r, |id| out.push(id))?;
        out.sort_unstable();
        Ok(out)
    }
}

fn bounds(points: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (lo, hi)
}

/// Index a normalised cloud with the default cell size.
pub fn build_index(cloud: &NormalizedCloud) -> Result<NeighborIndex<'_>> {
    NeighborIndex::build(cloud.points())
}
