//! Seeded synthetic single-tree scenes standing in for labelled LiDAR data.
//!
//! Class codes follow the tree-scene convention: 1 = ground, 2 = trunk and
//! branches, 3 = canopy (foliage). Branch and foliage points interleave
//! inside the crown, so the two classes overlap in raw coordinates and differ
//! mainly in local shape (thin lines versus diffuse clumps).

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::{Point, PointCloud};
use crate::rng;
use crate::{Error, Result};

pub const GROUND: u32 = 1;
pub const TRUNK: u32 = 2;
pub const CANOPY: u32 = 3;

/// Class sizes of the reference tree scene (ground, trunk/branches, canopy).
pub const REFERENCE_CLASS_COUNTS: [u64; 3] = [311_208, 405_911, 81_333];

/// Geometry and sampling parameters of a synthetic scene (metres).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSceneSpec {
    pub n_ground: usize,
    pub n_trunk: usize,
    pub n_canopy: usize,
    /// Half side of the square ground patch centred on the tree.
    pub ground_half_width: f64,
    /// Standard deviation of vertical ground noise.
    pub plane_noise: f64,
    /// Amplitude of the smooth terrain undulation.
    pub terrain_amplitude: f64,
    pub trunk_radius: f64,
    /// Height of the crown centre above the ground; the trunk reaches it.
    pub trunk_height: f64,
    /// Share of trunk-class points that lie on branches rather than the stem.
    pub branch_fraction: f64,
    pub n_branches: usize,
    /// Standard deviation of branch points around the branch axis.
    pub branch_jitter: f64,
    pub canopy_radius: f64,
    /// Standard deviation of foliage points around their branch anchor.
    pub foliage_spread: f64,
    pub seed: u64,
}

impl Default for SyntheticSceneSpec {
    fn default() -> Self {
        SyntheticSceneSpec::standard(30_000, 42)
    }
}

impl SyntheticSceneSpec {
    /// `n` points split in the reference class proportions (≈ 0.39 / 0.51 /
    /// 0.10) with the default tree geometry.
    pub fn standard(n: usize, seed: u64) -> Self {
        let total: u64 = REFERENCE_CLASS_COUNTS.iter().sum();
        let n_ground = (n as u64 * REFERENCE_CLASS_COUNTS[0] + total / 2) / total;
        let n_canopy = (n as u64 * REFERENCE_CLASS_COUNTS[2] + total / 2) / total;
        let n_trunk = n as u64 - n_ground - n_canopy;
        SyntheticSceneSpec {
            n_ground: n_ground as usize,
            n_trunk: n_trunk as usize,
            n_canopy: n_canopy as usize,
            ground_half_width: 8.0,
            plane_noise: 0.05,
            terrain_amplitude: 0.4,
            trunk_radius: 0.3,
            trunk_height: 9.0,
            branch_fraction: 0.7,
            n_branches: 28,
            branch_jitter: 0.01,
            canopy_radius: 4.5,
            foliage_spread: 0.15,
            seed,
        }
    }

    pub fn total(&self) -> usize {
        self.n_ground + self.n_trunk + self.n_canopy
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ground_half_width", self.ground_half_width),
            ("trunk_radius", self.trunk_radius),
            ("trunk_height", self.trunk_height),
            ("canopy_radius", self.canopy_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::arg(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("plane_noise", self.plane_noise),
            ("terrain_amplitude", self.terrain_amplitude),
            ("branch_jitter", self.branch_jitter),
            ("foliage_spread", self.foliage_spread),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::arg(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.branch_fraction) {
            return Err(Error::arg("branch_fraction must lie in [0, 1]"));
        }
        if self.n_branches == 0 && (self.branch_fraction > 0.0 || self.n_canopy > 0) {
            return Err(Error::arg("branches and foliage need n_branches > 0"));
        }
        Ok(())
    }

    fn terrain(&self, x: f64, y: f64) -> f64 {
        self.terrain_amplitude * (x / 3.0).sin() * (y / 4.0).cos()
    }
}

struct Branch {
    origin: Point,
    dir: Point,
    length: f64,
}

impl Branch {
    fn at(&self, t: f64) -> Point {
        [
            self.origin[0] + t * self.dir[0],
            self.origin[1] + t * self.dir[1],
            self.origin[2] + t * self.dir[2],
        ]
    }
}

fn gaussian(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("finite non-negative standard deviation")
}

/// Generate the labelled scene described by `spec`.
pub fn generate_scene(spec: &SyntheticSceneSpec) -> Result<PointCloud> {
    spec.validate()?;
    let mut r = rng::seeded(spec.seed);
    let mut points = Vec::with_capacity(spec.total());
    let mut labels = Vec::with_capacity(spec.total());
    let crown = [0.0, 0.0, spec.trunk_height];
    let ground_noise = gaussian(spec.plane_noise);
    let jitter = gaussian(spec.branch_jitter);
    let spread = gaussian(spec.foliage_spread);

    let branches: Vec<Branch> = (0..spec.n_branches)
        .map(|_| {
            let h = spec.trunk_height + spec.canopy_radius * r.gen_range(-0.7..0.4);
            let azimuth = r.gen_range(0.0..2.0 * PI);
            let elevation: f64 = r.gen_range(0.15..1.0);
            let dir = [
                elevation.cos() * azimuth.cos(),
                elevation.cos() * azimuth.sin(),
                elevation.sin(),
            ];
            let origin = [
                spec.trunk_radius * azimuth.cos(),
                spec.trunk_radius * azimuth.sin(),
                h,
            ];
            // stop where the branch leaves the crown sphere
            let rel = [
                origin[0] - crown[0],
                origin[1] - crown[1],
                origin[2] - crown[2],
            ];
            let b: f64 = rel.iter().zip(&dir).map(|(a, d)| a * d).sum();
            let c: f64 = rel.iter().map(|a| a * a).sum::<f64>() - spec.canopy_radius.powi(2);
            let exit = -b + (b * b - c).max(0.0).sqrt();
            Branch {
                origin,
                dir,
                length: exit * r.gen_range(0.6..0.95),
            }
        })
        .collect();

    for _ in 0..spec.n_ground {
        let x = r.gen_range(-spec.ground_half_width..=spec.ground_half_width);
        let y = r.gen_range(-spec.ground_half_width..=spec.ground_half_width);
        points.push([x, y, spec.terrain(x, y) + ground_noise.sample(&mut r)]);
        labels.push(GROUND);
    }

    let n_branch_pts = (spec.n_trunk as f64 * spec.branch_fraction).round() as usize;
    for _ in 0..spec.n_trunk - n_branch_pts {
        let theta = r.gen_range(0.0..2.0 * PI);
        let rad = spec.trunk_radius + jitter.sample(&mut r);
        let (x, y) = (rad * theta.cos(), rad * theta.sin());
        let z = r.gen_range(spec.terrain(x, y)..spec.trunk_height);
        points.push([x, y, z]);
        labels.push(TRUNK);
    }
    for _ in 0..n_branch_pts {
        let b = &branches[r.gen_range(0..branches.len())];
        let p = b.at(r.gen_range(0.0..b.length));
        points.push(p.map(|c| c + jitter.sample(&mut r)));
        labels.push(TRUNK);
    }

    for _ in 0..spec.n_canopy {
        let b = &branches[r.gen_range(0..branches.len())];
        let p = b.at(b.length * r.gen_range(0.35..1.0));
        points.push(p.map(|c| c + spread.sample(&mut r)));
        labels.push(CANOPY);
    }

    let mut cloud = PointCloud::new(points, Some(labels))?;
    cloud.source_crs_note = format!("synthetic tree scene, seed {}", spec.seed);
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SyntheticSceneSpec {
        SyntheticSceneSpec::standard(2_000, seed)
    }

    #[test]
    fn class_proportions_follow_reference() {
        let s = SyntheticSceneSpec::standard(30_000, 42);
        assert_eq!(s.total(), 30_000);
        let frac = |n: usize| n as f64 / 30_000.0;
        assert!((frac(s.n_ground) - 0.39).abs() < 0.005);
        assert!((frac(s.n_trunk) - 0.51).abs() < 0.005);
        assert!((frac(s.n_canopy) - 0.10).abs() < 0.005);
    }

    #[test]
    fn no_canopy_means_no_label_three() {
        let spec = SyntheticSceneSpec {
            n_canopy: 0,
            ..small(1)
        };
        let c = generate_scene(&spec).unwrap();
        assert!(c.labels().unwrap().iter().all(|&l| l != CANOPY));
        assert_eq!(c.len(), spec.total());
    }

    #[test]
    fn same_seed_same_cloud() {
        assert_eq!(
            generate_scene(&small(5)).unwrap(),
            generate_scene(&small(5)).unwrap()
        );
        assert_ne!(
            generate_scene(&small(5)).unwrap(),
            generate_scene(&small(6)).unwrap()
        );
    }

    #[test]
    fn invalid_spec_rejected() {
        let spec = SyntheticSceneSpec {
            trunk_radius: -1.0,
            ..small(1)
        };
        assert!(generate_scene(&spec).is_err());
    }
}
