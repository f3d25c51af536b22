//! Seeded generators for labeled multi-manifold point clouds in ℝ³.
//!
//! Ambient noise is isotropic Gaussian, truncated to a norm of at most
//! `3·noise_sigma` so that every inlier stays within that distance of its
//! analytic manifold.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Noise vectors longer than this many sigmas are redrawn.
pub const NOISE_TRUNCATION: f64 = 3.0;

/// Swiss-roll parameter range `t ∈ [1.5π, 4.5π]` and height range.
pub const ROLL_T_MIN: f64 = 1.5 * PI;
pub const ROLL_T_MAX: f64 = 4.5 * PI;
pub const ROLL_HEIGHT: f64 = 21.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCloud {
    pub cloud: PointCloud,
    /// Manifold id per point; outliers carry id `manifold_count`.
    pub labels: Vec<usize>,
    pub outlier_flags: Vec<bool>,
    pub seed: u64,
}

impl LabeledCloud {
    pub fn outlier_count(&self) -> usize {
        self.outlier_flags.iter().filter(|&&f| f).count()
    }
}

/// Generator selection with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    NestedSpheres {
        n_per: usize,
        r_small: f64,
        r_big: f64,
        noise_sigma: f64,
    },
    IntersectingSpheres {
        n_per: usize,
        radius: f64,
        center_offset: f64,
        noise_sigma: f64,
    },
    IntersectingPlanes {
        n_per: usize,
        extent: f64,
        dihedral_angle: f64,
        noise_sigma: f64,
    },
    SwissrollPlaneOutliers {
        n_roll: usize,
        n_plane: usize,
        n_outliers: usize,
        noise_sigma: f64,
    },
}

impl Generator {
    pub fn nested_spheres() -> Self {
        Generator::NestedSpheres {
            n_per: 1000,
            r_small: 10.0,
            r_big: 30.0,
            noise_sigma: 0.3,
        }
    }

    pub fn intersecting_spheres() -> Self {
        Generator::IntersectingSpheres {
            n_per: 1000,
            radius: 10.0,
            center_offset: 10.0,
            noise_sigma: 0.3,
        }
    }

    pub fn intersecting_planes() -> Self {
        Generator::IntersectingPlanes {
            n_per: 1000,
            extent: 10.0,
            dihedral_angle: PI / 3.0,
            noise_sigma: 0.3,
        }
    }

    pub fn swissroll_plane_outliers() -> Self {
        Generator::SwissrollPlaneOutliers {
            n_roll: 2000,
            n_plane: 1000,
            n_outliers: 100,
            noise_sigma: 0.1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Generator::NestedSpheres { .. } => "nested_spheres",
            Generator::IntersectingSpheres { .. } => "intersecting_spheres",
            Generator::IntersectingPlanes { .. } => "intersecting_planes",
            Generator::SwissrollPlaneOutliers { .. } => "swissroll_plane_outliers",
        }
    }

    /// Default parameters for a generator name.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "nested_spheres" => Ok(Self::nested_spheres()),
            "intersecting_spheres" => Ok(Self::intersecting_spheres()),
            "intersecting_planes" => Ok(Self::intersecting_planes()),
            "swissroll_plane_outliers" => Ok(Self::swissroll_plane_outliers()),
            other => Err(Error::Config(format!("unknown generator `{other}`"))),
        }
    }

    pub fn manifold_count(&self) -> usize {
        2
    }

    pub fn generate(&self, seed: u64) -> Result<LabeledCloud> {
        match *self {
            Generator::NestedSpheres {
                n_per,
                r_small,
                r_big,
                noise_sigma,
            } => gen_nested_spheres(n_per, (r_small, r_big), noise_sigma, seed),
            Generator::IntersectingSpheres {
                n_per,
                radius,
                center_offset,
                noise_sigma,
            } => gen_intersecting_spheres(n_per, radius, center_offset, noise_sigma, seed),
            Generator::IntersectingPlanes {
                n_per,
                extent,
                dihedral_angle,
                noise_sigma,
            } => gen_intersecting_planes(n_per, extent, dihedral_angle, noise_sigma, seed),
            Generator::SwissrollPlaneOutliers {
                n_roll,
                n_plane,
                n_outliers,
                noise_sigma,
            } => gen_swissroll_plane_outliers(n_roll, n_plane, n_outliers, noise_sigma, seed),
        }
    }
}

struct Sampler {
    rng: ChaCha8Rng,
    noise_sigma: f64,
}

impl Sampler {
    fn new(seed: u64, noise_sigma: f64) -> Result<Self> {
        if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
            return Err(Error::InvalidGeometry(format!("noise_sigma must be >= 0, got {noise_sigma}")));
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise_sigma,
        })
    }

    fn normal3(&mut self) -> [f64; 3] {
        let mut v = [0.0; 3];
        for x in &mut v {
            *x = StandardNormal.sample(&mut self.rng);
        }
        v
    }

    fn unit_sphere(&mut self) -> [f64; 3] {
        loop {
            let v = self.normal3();
            let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if len > 1e-12 {
                return [v[0] / len, v[1] / len, v[2] / len];
            }
        }
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.random::<f64>()
    }

    fn noisy(&mut self, p: [f64; 3]) -> [f64; 3] {
        if self.noise_sigma == 0.0 {
            return p;
        }
        loop {
            let v = self.normal3();
            if v.iter().map(|x| x * x).sum::<f64>() <= NOISE_TRUNCATION * NOISE_TRUNCATION {
                return [
                    p[0] + self.noise_sigma * v[0],
                    p[1] + self.noise_sigma * v[1],
                    p[2] + self.noise_sigma * v[2],
                ];
            }
        }
    }
}

fn finish(rows: Vec<[f64; 3]>, labels: Vec<usize>, outlier_flags: Vec<bool>, seed: u64) -> Result<LabeledCloud> {
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(LabeledCloud {
        cloud: PointCloud::new(3, data)?,
        labels,
        outlier_flags,
        seed,
    })
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidGeometry("each manifold needs at least one sample".into()));
    }
    Ok(())
}

/// One noisy sphere inside another, both centered at the origin.
pub fn gen_nested_spheres(n_per: usize, radii: (f64, f64), noise_sigma: f64, seed: u64) -> Result<LabeledCloud> {
    let (r_small, r_big) = radii;
    check_count(n_per)?;
    if !(r_small > 0.0 && r_small < r_big) {
        return Err(Error::InvalidGeometry(format!(
            "radii must satisfy 0 < r_small < r_big, got ({r_small}, {r_big})"
        )));
    }
    let mut s = Sampler::new(seed, noise_sigma)?;
    let mut rows = Vec::with_capacity(2 * n_per);
    let mut labels = Vec::with_capacity(2 * n_per);
    for (label, r) in [(0, r_small), (1, r_big)] {
        for _ in 0..n_per {
            let u = s.unit_sphere();
            rows.push(s.noisy([r * u[0], r * u[1], r * u[2]]));
            labels.push(label);
        }
    }
    finish(rows, labels, vec![false; 2 * n_per], seed)
}

/// Centers of the two intersecting spheres: `∓offset/2` along the first axis.
pub fn intersecting_sphere_centers(center_offset: f64) -> [[f64; 3]; 2] {
    [[-center_offset / 2.0, 0.0, 0.0], [center_offset / 2.0, 0.0, 0.0]]
}

/// Two equal spheres whose centers are `center_offset` apart.
pub fn gen_intersecting_spheres(
    n_per: usize,
    radius: f64,
    center_offset: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<LabeledCloud> {
    check_count(n_per)?;
    if !(radius > 0.0 && center_offset > 0.0 && center_offset < 2.0 * radius) {
        return Err(Error::InvalidGeometry(format!(
            "spheres of radius {radius} with offset {center_offset} do not intersect"
        )));
    }
    let mut s = Sampler::new(seed, noise_sigma)?;
    let mut rows = Vec::with_capacity(2 * n_per);
    let mut labels = Vec::with_capacity(2 * n_per);
    for (label, c) in intersecting_sphere_centers(center_offset).into_iter().enumerate() {
        for _ in 0..n_per {
            let u = s.unit_sphere();
            rows.push(s.noisy([c[0] + radius * u[0], c[1] + radius * u[1], c[2] + radius * u[2]]));
            labels.push(label);
        }
    }
    finish(rows, labels, vec![false; 2 * n_per], seed)
}

/// Unit normals of the two planes through the first axis.
pub fn plane_normals(dihedral_angle: f64) -> [[f64; 3]; 2] {
    [[0.0, 0.0, 1.0], [0.0, -dihedral_angle.sin(), dihedral_angle.cos()]]
}

/// Two square patches `[-extent, extent]²` sharing the first axis; the second
/// is the first rotated about that axis by `dihedral_angle`.
pub fn gen_intersecting_planes(
    n_per: usize,
    extent: f64,
    dihedral_angle: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<LabeledCloud> {
    check_count(n_per)?;
    if !(dihedral_angle > 0.0 && dihedral_angle <= PI / 2.0) {
        return Err(Error::InvalidGeometry(format!(
            "dihedral angle {dihedral_angle} must lie in (0, π/2]"
        )));
    }
    if !(extent > 0.0) {
        return Err(Error::InvalidGeometry(format!("extent must be > 0, got {extent}")));
    }
    let (sin, cos) = dihedral_angle.sin_cos();
    // Exact zeros at a right angle keep plane 1 on y = 0.
    let (sin, cos) = if dihedral_angle == PI / 2.0 { (1.0, 0.0) } else { (sin, cos) };
    let mut s = Sampler::new(seed, noise_sigma)?;
    let mut rows = Vec::with_capacity(2 * n_per);
    let mut labels = Vec::with_capacity(2 * n_per);
    for label in 0..2 {
        for _ in 0..n_per {
            let u = s.uniform(-extent, extent);
            let v = s.uniform(-extent, extent);
            let p = if label == 0 { [u, v, 0.0] } else { [u, v * cos, v * sin] };
            rows.push(s.noisy(p));
            labels.push(label);
        }
    }
    finish(rows, labels, vec![false; 2 * n_per], seed)
}

/// Swiss-roll point for parameter `t` and height `h`.
pub fn swiss_roll(t: f64, h: f64) -> [f64; 3] {
    [t * t.cos(), h, t * t.sin()]
}

/// Plane patch `z = 0`, `x` in this range, over the roll's full height.
/// It pierces the outer turn once (at `t = 4π`, `x ≈ 12.57`) and stays clear
/// of the inner crossings at `x ≈ 6.28` and `x ≈ −9.42`.
pub const PLANE_X_RANGE: (f64, f64) = (8.0, 30.0);

/// Swiss roll (label 0) crossed by a plane (label 1), plus uniform outliers
/// (label 2) in the inlier bounding box inflated by 10%.
pub fn gen_swissroll_plane_outliers(
    n_roll: usize,
    n_plane: usize,
    n_outliers: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<LabeledCloud> {
    let mut s = Sampler::new(seed, noise_sigma)?;
    let total = n_roll + n_plane + n_outliers;
    let mut rows = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for _ in 0..n_roll {
        let t = s.uniform(ROLL_T_MIN, ROLL_T_MAX);
        let h = s.uniform(0.0, ROLL_HEIGHT);
        rows.push(s.noisy(swiss_roll(t, h)));
        labels.push(0);
    }
    for _ in 0..n_plane {
        let x = s.uniform(PLANE_X_RANGE.0, PLANE_X_RANGE.1);
        let h = s.uniform(0.0, ROLL_HEIGHT);
        rows.push(s.noisy([x, h, 0.0]));
        labels.push(1);
    }
    let mut flags = vec![false; n_roll + n_plane];
    if n_outliers > 0 {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &rows {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        if rows.is_empty() {
            lo = [-1.0; 3];
            hi = [1.0; 3];
        }
        for a in 0..3 {
            let pad = 0.05 * (hi[a] - lo[a]);
            lo[a] -= pad;
            hi[a] += pad;
        }
        for _ in 0..n_outliers {
            let p = [s.uniform(lo[0], hi[0]), s.uniform(lo[1], hi[1]), s.uniform(lo[2], hi[2])];
            rows.push(p);
            labels.push(2);
            flags.push(true);
        }
    }
    if total == 0 {
        return Err(Error::InvalidGeometry("generator produced no points".into()));
    }
    finish(rows, labels, flags, seed)
}
