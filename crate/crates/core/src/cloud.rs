//! Raw and unit-cube point clouds.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Point = [f64; 3];

/// Points in source units with optional per-point class codes.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
    labels: Option<Vec<u32>>,
    pub source_crs_note: String,
}

impl PointCloud {
    pub fn new(points: Vec<Point>, labels: Option<Vec<u32>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != points.len() {
                return Err(Error::arg(format!(
                    "{} labels for {} points",
                    l.len(),
                    points.len()
                )));
            }
        }
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::arg(format!("point {i} has a non-finite coordinate")));
        }
        Ok(PointCloud {
            points,
            labels,
            source_crs_note: String::new(),
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    /// One scale for all axes (the largest extent); preserves spheres.
    #[default]
    Isotropic,
    /// Independent min-max scaling per axis.
    PerAxis,
}

impl std::str::FromStr for NormalizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isotropic" => Ok(NormalizationMode::Isotropic),
            "per-axis" | "per_axis" => Ok(NormalizationMode::PerAxis),
            _ => Err(Error::arg(format!("unknown normalization mode {s:?}"))),
        }
    }
}

/// Affine map `normalized = (source - offset) / scale`, per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitCubeTransform {
    pub offset: [f64; 3],
    pub scale: [f64; 3],
    pub mode: NormalizationMode,
}

impl UnitCubeTransform {
    pub fn forward(&self, p: &Point) -> Point {
        let mut q = [0.0; 3];
        for a in 0..3 {
            q[a] = ((p[a] - self.offset[a]) / self.scale[a]).clamp(0.0, 1.0);
        }
        q
    }

    pub fn inverse(&self, q: &Point) -> Point {
        let mut p = [0.0; 3];
        for a in 0..3 {
            p[a] = q[a] * self.scale[a] + self.offset[a];
        }
        p
    }
}

/// A point cloud mapped into `[0,1]^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCloud {
    points: Vec<Point>,
    pub transform: UnitCubeTransform,
    labels: Option<Vec<u32>>,
}

impl NormalizedCloud {
    /// Wrap points that are already inside the unit cube (identity transform).
    pub fn from_unit_points(points: Vec<Point>, labels: Option<Vec<u32>>) -> Result<Self> {
        let cloud = PointCloud::new(points, labels)?;
        if let Some(i) = cloud
            .points
            .iter()
            .position(|p| p.iter().any(|c| !(0.0..=1.0).contains(c)))
        {
            return Err(Error::arg(format!("point {i} lies outside the unit cube")));
        }
        Ok(NormalizedCloud {
            points: cloud.points,
            transform: UnitCubeTransform {
                offset: [0.0; 3],
                scale: [1.0; 3],
                mode: NormalizationMode::Isotropic,
            },
            labels: cloud.labels,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Map back to source units.
    pub fn denormalize(&self) -> PointCloud {
        let points = self
            .points
            .iter()
            .map(|q| self.transform.inverse(q))
            .collect();
        PointCloud {
            points,
            labels: self.labels.clone(),
            source_crs_note: String::new(),
        }
    }

    /// Reorder points (and labels) so that new point `i` is old point `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> NormalizedCloud {
        NormalizedCloud {
            points: order.iter().map(|&i| self.points[i]).collect(),
            transform: self.transform,
            labels: self
                .labels
                .as_ref()
                .map(|l| order.iter().map(|&i| l[i]).collect()),
        }
    }
}

/// Translate the min corner to the origin and scale into `[0,1]^3`.
///
/// Axes with zero extent get scale 1, so a single point maps to the origin.
pub fn normalize_unit_cube(cloud: &PointCloud, mode: NormalizationMode) -> Result<NormalizedCloud> {
    if cloud.is_empty() {
        return Err(Error::arg("cannot normalize an empty cloud"));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &cloud.points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let extent = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let scale = match mode {
        NormalizationMode::Isotropic => {
            let m = extent.iter().cloned().fold(0.0, f64::max);
            let s = if m > 0.0 { m } else { 1.0 };
            [s; 3]
        }
        NormalizationMode::PerAxis => extent.map(|e| if e > 0.0 { e } else { 1.0 }),
    };
    let transform = UnitCubeTransform {
        offset: lo,
        scale,
        mode,
    };
    let points = cloud.points.iter().map(|p| transform.forward(p)).collect();
    Ok(NormalizedCloud {
        points,
        transform,
        labels: cloud.labels.clone(),
    })
}
