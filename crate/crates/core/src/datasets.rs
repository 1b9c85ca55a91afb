//! Point clouds, ordered distance/kernel matrices, and the cone-singularity volume.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DyadicTensor;
use crate::haar::{analysis, index_scale, synthesis};
use crate::rng::{PortableRng, Stream};
use crate::smoothmap::{builtin_sin, SmoothMap};

pub const DEFAULT_POINTS: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Target,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    pub seed: u64,
    pub role: Role,
}

/// `n` i.i.d. uniform points in `[-1,1]^3`; source and target use separate streams.
pub fn gen_points(n: usize, seed: u64, role: Role) -> PointCloud {
    let stream = match role {
        Role::Source => Stream::Source,
        Role::Target => Stream::Target,
    };
    let mut rng = PortableRng::new(seed, stream);
    let points = (0..n)
        .map(|_| {
            let x = rng.uniform_in(-1.0, 1.0);
            let y = rng.uniform_in(-1.0, 1.0);
            let z = rng.uniform_in(-1.0, 1.0);
            [x, y, z]
        })
        .collect();
    PointCloud { points, seed, role }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Ordering {
    None,
    /// Sort along the first principal component.
    #[default]
    Pca1,
    /// Sort by position along a 3D Hilbert curve.
    Hilbert,
}

impl std::str::FromStr for Ordering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Ordering::None),
            "pca1" => Ok(Ordering::Pca1),
            "hilbert" => Ok(Ordering::Hilbert),
            _ => Err(Error::Config(format!("unknown ordering {s:?} (none|pca1|hilbert)"))),
        }
    }
}

impl std::fmt::Display for Ordering {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Ordering::None => "none",
            Ordering::Pca1 => "pca1",
            Ordering::Hilbert => "hilbert",
        })
    }
}

/// Default distance floor: `1e-3` of the cube diameter `2√3`.
pub fn default_dist_floor() -> f64 {
    1e-3 * 2.0 * 3f64.sqrt()
}

/// Leading principal axis, sign fixed so its largest-magnitude component is positive.
pub fn principal_axis(points: &[[f64; 3]]) -> [f64; 3] {
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector3::zeros(), |acc, p| acc + Vector3::from(*p)) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let c = Vector3::from(*p) - mean;
        cov += c * c.transpose();
    }
    let eig = SymmetricEigen::new(cov / n);
    let top = eig.eigenvalues.imax();
    let mut v: Vector3<f64> = eig.eigenvectors.column(top).into();
    if v[v.iamax()] < 0.0 {
        v = -v;
    }
    [v[0], v[1], v[2]]
}

/// Position of a point of a `2^bits` lattice along the 3D Hilbert curve (Skilling's transform).
pub fn hilbert_index(mut x: [u32; 3], bits: u32) -> u64 {
    let m = 1u32 << (bits - 1);
    let mut q = m;
    while q > 1 {
        let p = q - 1;
        for i in 0..3 {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q >>= 1;
    }
    for i in 1..3 {
        x[i] ^= x[i - 1];
    }
    let mut t = 0;
    let mut q = m;
    while q > 1 {
        if x[2] & q != 0 {
            t ^= q - 1;
        }
        q >>= 1;
    }
    for v in &mut x {
        *v ^= t;
    }
    let mut idx = 0u64;
    for b in (0..bits).rev() {
        for v in &x {
            idx = (idx << 1) | ((v >> b) & 1) as u64;
        }
    }
    idx
}

const HILBERT_BITS: u32 = 16;

/// Permutation putting the cloud in the given order (stable, ties by index).
pub fn order_points(points: &[[f64; 3]], ordering: Ordering) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..points.len()).collect();
    match ordering {
        Ordering::None => {}
        Ordering::Pca1 => {
            let v = principal_axis(points);
            let key: Vec<f64> = points.iter().map(|p| p[0] * v[0] + p[1] * v[1] + p[2] * v[2]).collect();
            perm.sort_by(|&a, &b| key[a].total_cmp(&key[b]).then(a.cmp(&b)));
        }
        Ordering::Hilbert => {
            let side = (1u64 << HILBERT_BITS) as f64;
            let key: Vec<u64> = points
                .iter()
                .map(|p| {
                    let q = p.map(|c| (((c + 1.0) / 2.0 * side) as u32).min((1 << HILBERT_BITS) - 1));
                    hilbert_index(q, HILBERT_BITS)
                })
                .collect();
            perm.sort_by(|&a, &b| key[a].cmp(&key[b]).then(a.cmp(&b)));
        }
    }
    perm
}

/// `M[a,b] = max(|x_a - y_b|, floor)` with rows and columns in the chosen order.
pub fn distance_matrix(src: &PointCloud, tgt: &PointCloud, ordering: Ordering, floor: f64) -> Result<DyadicTensor> {
    for c in [src, tgt] {
        if !c.points.len().is_power_of_two() {
            return Err(Error::Shape(format!("{} points is not a power of two", c.points.len())));
        }
    }
    let rows = order_points(&src.points, ordering);
    let cols = order_points(&tgt.points, ordering);
    let m = tgt.points.len();
    DyadicTensor::from_index_fn(vec![src.points.len(), m], |i| {
        let a = src.points[rows[i[0]]];
        let b = tgt.points[cols[i[1]]];
        let d2: f64 = (0..3).map(|k| (a[k] - b[k]).powi(2)).sum();
        d2.sqrt().max(floor)
    })
}

pub fn kernel_matrix(m: &DyadicTensor, a: &SmoothMap) -> Result<DyadicTensor> {
    a.apply(m)
}

pub const DEFAULT_CONE_DIMS: [usize; 3] = [256, 256, 128];
pub const DEFAULT_CONE_ALPHA: f64 = 0.3;

#[derive(Clone, Debug, PartialEq)]
pub struct ConeVolume {
    pub alpha: f64,
    /// Axes `(x, y, t)` with `x, y ∈ [-1,1]`, `t ∈ [0,1]`, cell-center samples.
    pub data: DyadicTensor,
}

/// `(1-|z|)^α` inside the unit sphere, `(1-1/|z|)^α` outside, zero on it.
pub fn cone_value(x: f64, y: f64, t: f64, alpha: f64) -> f64 {
    let r = (x * x + y * y + t * t).sqrt();
    if r < 1.0 {
        (1.0 - r).powf(alpha)
    } else if r > 1.0 {
        (1.0 - 1.0 / r).powf(alpha)
    } else {
        0.0
    }
}

/// Cell-center coordinate on `[lo, hi]`.
pub fn axis_coord(m: usize, n: usize, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (m as f64 + 0.5) / n as f64
}

pub fn cone_volume(dims: [usize; 3], alpha: f64) -> Result<ConeVolume> {
    let data = DyadicTensor::from_index_fn(dims.to_vec(), |i| {
        cone_value(
            axis_coord(i[0], dims[0], -1.0, 1.0),
            axis_coord(i[1], dims[1], -1.0, 1.0),
            axis_coord(i[2], dims[2], 0.0, 1.0),
            alpha,
        )
    })?;
    Ok(ConeVolume { alpha, data })
}

/// Ring radius `√(1 - t²)` of the zero set in the `(x, y)` plane at time `t`.
pub fn ring_radius(t: f64) -> f64 {
    (1.0 - t * t).max(0.0).sqrt()
}

/// `(x, y)` slice at time index `ti` of an `(x, y, t)` volume.
pub fn time_slice(v: &DyadicTensor, ti: usize) -> Result<DyadicTensor> {
    let dims = v.dims();
    if dims.len() != 3 || ti >= dims[2] {
        return Err(Error::Index(format!("time index {ti} outside volume {dims:?}")));
    }
    let nt = dims[2];
    DyadicTensor::new(
        vec![dims[0], dims[1]],
        v.data().iter().skip(ti).step_by(nt).copied().collect(),
    )
}

/// Band-wise modulation of every time slice: the 2D Haar coefficient at per-axis scales
/// `(j_x, j_y)` is multiplied by `(j_x + j_y)/2`, the scaling function counting as scale 0.
pub fn equalizer_modulate(v: &DyadicTensor) -> Result<DyadicTensor> {
    let dims = v.dims().to_vec();
    if dims.len() != 3 {
        return Err(Error::Shape(format!("expected an (x, y, t) volume, got {dims:?}")));
    }
    let (nx, ny, nt) = (dims[0], dims[1], dims[2]);
    let weight = |m: usize| index_scale(m).unwrap_or(0) as f64;
    let mut out = vec![0.0; v.len()];
    for ti in 0..nt {
        let mut p = analysis(&time_slice(v, ti)?);
        for (i, c) in p.coefficients_mut().iter_mut().enumerate() {
            *c *= (weight(i / ny) + weight(i % ny)) / 2.0;
        }
        let s = synthesis(&p);
        for (i, &val) in s.data().iter().enumerate() {
            out[i * nt + ti] = val;
        }
    }
    debug_assert_eq!(out.len(), nx * ny * nt);
    DyadicTensor::new(dims, out)
}

/// The distorted volume `sin(modulated f)`.
pub fn equalize(v: &ConeVolume) -> Result<DyadicTensor> {
    builtin_sin(1.0).apply(&equalizer_modulate(&v.data)?)
}
