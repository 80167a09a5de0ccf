//! Per-point product-coefficient features.
//!
//! Each point's closed ball of radius `r` is the root set of a dyadic tree.
//! Level 0 splits it by the plane through the point perpendicular to the first
//! axis of the cycle, level 1 by the second axis, level 2 by the third; with
//! the default x, y, z cycle the eight depth-3 leaves are the octants around
//! the point. Points with coordinate `< split` go left, `>= split` right.
//! Deeper levels keep cycling the axes and halve the cell along that axis, so
//! level `3 + k` splits at the midpoint of the cell the first three levels
//! produced.
//!
//! The neighbour counts per leaf form a counting measure whose product
//! coefficients become extra feature columns.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{NormalizationMode, NormalizedCloud, Point};
use crate::matrix::{FeatureMatrix, Matrix};
use crate::measure::{coefficients_from_leaves, product_coefficient, LeafMassVector};
use crate::spatial::{brute_force_radius, NeighborIndex};
use crate::{Error, Result};

/// Largest supported tree depth (1024 leaf cells).
pub const MAX_FEATURE_DEPTH: u32 = 10;

pub const DEFAULT_RADIUS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    /// Parse an axis cycle such as `"xyz"` or `"zxy"`.
    pub fn parse_order(s: &str) -> Result<[Axis; 3]> {
        let axes: Vec<Axis> = s
            .chars()
            .map(|c| match c.to_ascii_lowercase() {
                'x' => Ok(Axis::X),
                'y' => Ok(Axis::Y),
                'z' => Ok(Axis::Z),
                _ => Err(Error::arg(format!("bad axis {c:?} in order {s:?}"))),
            })
            .collect::<Result<_>>()?;
        let order: [Axis; 3] = axes
            .try_into()
            .map_err(|_| Error::arg(format!("axis order {s:?} must name three axes")))?;
        validate_order(&order)?;
        Ok(order)
    }
}

fn validate_order(order: &[Axis; 3]) -> Result<()> {
    let mut seen = [false; 3];
    for &a in order {
        seen[a as usize] = true;
    }
    if seen.contains(&false) {
        return Err(Error::arg(format!(
            "axis order {order:?} is not a permutation"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    /// Ball radius in normalised units.
    pub radius: f64,
    /// Number of split levels; the tree has `2^depth − 1` coefficients.
    pub depth: u32,
    /// Axis used at level `l` is `axis_order[l % 3]`.
    pub axis_order: [Axis; 3],
    pub include_xyz: bool,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            radius: DEFAULT_RADIUS,
            depth: 3,
            axis_order: [Axis::X, Axis::Y, Axis::Z],
            include_xyz: true,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::arg(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if self.depth == 0 || self.depth > MAX_FEATURE_DEPTH {
            return Err(Error::arg(format!(
                "depth must be in 1..={MAX_FEATURE_DEPTH}, got {}",
                self.depth
            )));
        }
        validate_order(&self.axis_order)
    }

    pub fn n_coefficients(&self) -> usize {
        (1 << self.depth) - 1
    }

    pub fn n_columns(&self) -> usize {
        self.n_coefficients() + if self.include_xyz { 3 } else { 0 }
    }
}

/// Settings recorded alongside an extracted feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub radius: f64,
    pub depth: u32,
    pub axis_order: [Axis; 3],
    pub normalization: NormalizationMode,
    pub include_xyz: bool,
    pub seed: Option<u64>,
}

/// Coefficient column names `a0 .. a{count-1}`.
pub fn coefficient_names(count: usize) -> Vec<String> {
    (0..count).map(|i| format!("a{i}")).collect()
}

/// Column names of the xyz columns plus the coefficients of the first
/// `levels` tree levels.
pub fn level_columns(levels: u32) -> Vec<String> {
    let mut names = vec!["x".to_string(), "y".into(), "z".into()];
    names.extend(coefficient_names((1 << levels) - 1));
    names
}

/// Leaf cell of `q` in the tree rooted at the ball around `center`.
#[inline]
fn leaf_of(q: &Point, center: &Point, radius: f64, depth: u32, order: &[Axis; 3]) -> usize {
    let mut split = *center;
    let mut half = [radius; 3];
    let mut leaf = 0;
    for level in 0..depth as usize {
        let a = order[level % 3] as usize;
        let right = q[a] >= split[a];
        leaf = (leaf << 1) | usize::from(right);
        half[a] *= 0.5;
        if right {
            split[a] += half[a];
        } else {
            split[a] -= half[a];
        }
    }
    leaf
}

fn check_id(index: &NeighborIndex<'_>, point_id: usize) -> Result<()> {
    if point_id >= index.len() {
        return Err(Error::arg(format!(
            "point id {point_id} out of range for {} points",
            index.len()
        )));
    }
    Ok(())
}

/// Neighbour counts in each of the `2^depth` leaf cells around `point_id`.
pub fn leaf_counts(
    index: &NeighborIndex<'_>,
    point_id: usize,
    config: &ExtractionConfig,
) -> Result<Vec<u32>> {
    config.validate()?;
    check_id(index, point_id)?;
    let center = index.points()[point_id];
    let points = index.points();
    let mut counts = vec![0u32; 1 << config.depth];
    index.for_each_within(&center, config.radius, |id| {
        counts[leaf_of(
            &points[id],
            &center,
            config.radius,
            config.depth,
            &config.axis_order,
        )] += 1;
    })?;
    Ok(counts)
}

/// Counts in the eight octants around `point_id`, ordered by the
/// (x, y, z) bit path with left = 0.
pub fn octant_counts(index: &NeighborIndex<'_>, point_id: usize, radius: f64) -> Result<[u32; 8]> {
    let config = ExtractionConfig {
        radius,
        ..ExtractionConfig::default()
    };
    let counts = leaf_counts(index, point_id, &config)?;
    Ok(counts.try_into().expect("depth 3 has eight leaves"))
}

/// Breadth-first product coefficients of the neighbourhood of `point_id`.
pub fn point_features(
    index: &NeighborIndex<'_>,
    point_id: usize,
    config: &ExtractionConfig,
) -> Result<Vec<f64>> {
    let counts = leaf_counts(index, point_id, config)?;
    let leaves = LeafMassVector::from_counts(&counts)?;
    Ok(coefficients_from_leaves(&leaves).into_coefficients())
}

/// Reference implementation of [`point_features`]: scan for neighbours, then
/// partition the id list level by level and take each node's coefficient from
/// its two child counts.
pub fn point_features_recursive(
    points: &[Point],
    point_id: usize,
    config: &ExtractionConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    let center = *points
        .get(point_id)
        .ok_or_else(|| Error::arg(format!("point id {point_id} out of range")))?;
    let ids = brute_force_radius(points, &center, config.radius)?;
    let mut out = vec![0.0; config.n_coefficients()];

    struct Ctx<'a> {
        points: &'a [Point],
        order: [Axis; 3],
        depth: usize,
        out: &'a mut [f64],
    }

    fn descend(
        ctx: &mut Ctx<'_>,
        node: usize,
        level: usize,
        ids: Vec<usize>,
        split: Point,
        half: Point,
    ) -> Result<()> {
        if level == ctx.depth {
            return Ok(());
        }
        let a = ctx.order[level % 3] as usize;
        let (left, right): (Vec<usize>, Vec<usize>) =
            ids.into_iter().partition(|&i| ctx.points[i][a] < split[a]);
        ctx.out[node] = product_coefficient(left.len() as f64, right.len() as f64)?;
        let mut half = half;
        half[a] *= 0.5;
        let (mut ls, mut rs) = (split, split);
        ls[a] -= half[a];
        rs[a] += half[a];
        descend(ctx, 2 * node + 1, level + 1, left, ls, half)?;
        descend(ctx, 2 * node + 2, level + 1, right, rs, half)
    }

    let mut ctx = Ctx {
        points,
        order: config.axis_order,
        depth: config.depth as usize,
        out: &mut out,
    };
    descend(&mut ctx, 0, 0, ids, center, [config.radius; 3])?;
    Ok(out)
}

/// Feature rows for every point of `cloud`: `(x, y, z, a0, a1, …)`.
///
/// `threads` is the worker count (0 = rayon's default); the output does not
/// depend on it.
pub fn extract_all(
    cloud: &NormalizedCloud,
    config: &ExtractionConfig,
    threads: usize,
) -> Result<FeatureMatrix> {
    config.validate()?;
    let index = NeighborIndex::build_for_radius(cloud.points(), config.radius)?;
    let width = config.n_columns();
    let n_coef = config.n_coefficients();
    let mut data = vec![0.0; cloud.len() * width];

    let fill = |data: &mut [f64]| -> Result<()> {
        data.par_chunks_mut(width)
            .enumerate()
            .try_for_each(|(i, row)| {
                let coef = point_features(&index, i, config)?;
                let mut k = 0;
                if config.include_xyz {
                    row[..3].copy_from_slice(&cloud.points()[i]);
                    k = 3;
                }
                row[k..k + n_coef].copy_from_slice(&coef);
                Ok(())
            })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::arg(format!("thread pool: {e}")))?;
    pool.install(|| fill(&mut data))?;

    let mut names = if config.include_xyz {
        vec!["x".to_string(), "y".into(), "z".into()]
    } else {
        Vec::new()
    };
    names.extend(coefficient_names(n_coef));
    let mut fm = FeatureMatrix::new(Matrix::new(cloud.len(), width, data)?, names)?;
    fm.provenance = Some(Provenance {
        radius: config.radius,
        depth: config.depth,
        axis_order: config.axis_order,
        normalization: cloud.transform.mode,
        include_xyz: config.include_xyz,
        seed: None,
    });
    Ok(fm)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-3;

    #[test]
    fn lone_point_lands_in_last_octant() {
        let pts = [[0.5, 0.5, 0.5]];
        let idx = NeighborIndex::build(&pts).unwrap();
        assert_eq!(
            octant_counts(&idx, 0, 0.1).unwrap(),
            [0, 0, 0, 0, 0, 0, 0, 1]
        );
        let f = point_features(&idx, 0, &ExtractionConfig::default()).unwrap();
        assert_eq!(f, vec![-1.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn lower_corner_neighbour_is_leaf_zero() {
        let pts = [[0.5, 0.5, 0.5], [0.5 - EPS, 0.5 - EPS, 0.5 - EPS]];
        let idx = NeighborIndex::build(&pts).unwrap();
        assert_eq!(
            octant_counts(&idx, 0, 0.1).unwrap(),
            [1, 0, 0, 0, 0, 0, 0, 1]
        );
    }

    #[test]
    fn symmetric_cross_has_zero_coefficients() {
        // one point strictly inside each octant; query from an off-cloud center
        let c = [0.5, 0.5, 0.5];
        let mut pts = Vec::new();
        for bits in 0..8 {
            let s = |b: usize| if (bits >> b) & 1 == 1 { 0.02 } else { -0.02 };
            pts.push([c[0] + s(2), c[1] + s(1), c[2] + s(0)]);
        }
        pts.push(c);
        let idx = NeighborIndex::build(&pts).unwrap();
        let with_center = octant_counts(&idx, 8, 0.1).unwrap();
        assert_eq!(with_center, [1, 1, 1, 1, 1, 1, 1, 2]);
        let without: Vec<u32> = with_center
            .iter()
            .enumerate()
            .map(|(i, &c)| if i == 7 { c - 1 } else { c })
            .collect();
        let t = coefficients_from_leaves(&LeafMassVector::from_counts(&without).unwrap());
        assert!(t.coefficients().iter().all(|&a| a == 0.0));
    }

    #[test]
    fn bad_id_and_config() {
        let pts = [[0.5; 3]];
        let idx = NeighborIndex::build(&pts).unwrap();
        assert!(point_features(&idx, 1, &ExtractionConfig::default()).is_err());
        let bad = ExtractionConfig {
            depth: 11,
            ..Default::default()
        };
        assert!(point_features(&idx, 0, &bad).is_err());
        assert!(Axis::parse_order("xxz").is_err());
        assert_eq!(
            Axis::parse_order("zyx").unwrap(),
            [Axis::Z, Axis::Y, Axis::X]
        );
    }

    #[test]
    fn single_point_cloud_matrix() {
        let cloud = NormalizedCloud::from_unit_points(vec![[0.2, 0.3, 0.4]], None).unwrap();
        let fm = extract_all(&cloud, &ExtractionConfig::default(), 1).unwrap();
        assert_eq!(fm.rows(), 1);
        assert_eq!(fm.cols(), 10);
        assert_eq!(
            fm.matrix.row(0),
            &[0.2, 0.3, 0.4, -1.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0]
        );
        assert_eq!(fm.column_names[3], "a0");
        assert_eq!(fm.provenance.as_ref().unwrap().depth, 3);
    }

    #[test]
    fn deeper_levels_split_cell_midpoints() {
        // depth 4, level 3 splits x again at center.x ± r/2
        let cfg = ExtractionConfig {
            depth: 4,
            radius: 0.2,
            ..Default::default()
        };
        let c = [0.5, 0.5, 0.5];
        assert_eq!(
            leaf_of(&[0.65, 0.5, 0.5], &c, 0.2, 4, &cfg.axis_order),
            0b1111
        );
        assert_eq!(
            leaf_of(&[0.55, 0.5, 0.5], &c, 0.2, 4, &cfg.axis_order),
            0b1110
        );
        assert_eq!(
            leaf_of(&[0.35, 0.5, 0.5], &c, 0.2, 4, &cfg.axis_order),
            0b0110
        );
    }
}
