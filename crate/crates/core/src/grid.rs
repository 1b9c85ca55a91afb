//! Dyadic grid geometry and the d-dimensional sample container.
//!
//! Samples sit at cell centers `(m + 0.5) / 2^N` of the finest grid. Intervals
//! are half-open, `I^j_k = (2^-j (k-1), 2^-j k]`, with `k` 1-based.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_RANK: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct DyadicTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.len() > MAX_RANK {
        return Err(Error::Shape(format!(
            "rank {} outside supported range 1..={MAX_RANK}",
            dims.len()
        )));
    }
    if let Some(&bad) = dims.iter().find(|&&n| n == 0 || !n.is_power_of_two()) {
        return Err(Error::Shape(format!("dimension {bad} is not a power of two")));
    }
    Ok(())
}

impl DyadicTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_dims(&dims)?;
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "dims {dims:?} need {n} samples, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn filled(dims: Vec<usize>, value: f64) -> Result<Self> {
        check_dims(&dims)?;
        let n = dims.iter().product();
        Ok(Self {
            dims,
            data: vec![value; n],
        })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        Self::filled(dims, 0.0)
    }

    /// Builds a tensor by evaluating `g` at every multi-index (row-major order).
    pub fn from_index_fn(dims: Vec<usize>, mut g: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        check_dims(&dims)?;
        let n: usize = dims.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..n {
            data.push(g(&idx));
            advance(&mut idx, &dims);
        }
        Ok(Self { dims, data })
    }

    /// Same as [`from_index_fn`](Self::from_index_fn) but hands `g` the cell-center coordinates.
    pub fn from_point_fn(dims: Vec<usize>, mut g: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let mut x = vec![0.0; dims.len()];
        let scale: Vec<f64> = dims.iter().map(|&n| 1.0 / n as f64).collect();
        Self::from_index_fn(dims, |idx| {
            for (i, &m) in idx.iter().enumerate() {
                x[i] = (m as f64 + 0.5) * scale[i];
            }
            g(&x)
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Per-axis depths `N_i` with `dims_i = 2^{N_i}`.
    pub fn depths(&self) -> Vec<usize> {
        depths_of(&self.dims)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.dims).fold(0, |acc, (&m, &n)| acc * n + m)
    }

    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        if idx.len() != self.rank() || idx.iter().zip(&self.dims).any(|(&m, &n)| m >= n) {
            return Err(Error::Index(format!("index {idx:?} outside dims {:?}", self.dims)));
        }
        Ok(self.data[self.offset(idx)])
    }

    pub fn map(&self, g: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| g(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, g: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self {
            dims: self.dims.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| g(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!(
                "shape mismatch {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    /// L1 norm on `[0,1]^d`: each sample carries measure `1/n`.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum::<f64>() / self.len() as f64
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Block means on the coarser grid with per-axis depths `res`.
    pub fn coarsen(&self, res: &[usize]) -> Result<Self> {
        let depths = self.depths();
        check_resolution(res, &depths)?;
        let mut dims = self.dims.clone();
        let mut data = self.data.clone();
        for axis in 0..dims.len() {
            while dims[axis] > 1 << res[axis] {
                data = halve_axis(&data, &dims, axis);
                dims[axis] /= 2;
            }
        }
        Ok(Self { dims, data })
    }

    /// Piecewise-constant prolongation onto the finer grid with depths `res`.
    pub fn prolong(&self, res: &[usize]) -> Result<Self> {
        let depths = self.depths();
        check_resolution(&depths, res)?;
        let target: Vec<usize> = res.iter().map(|&r| 1 << r).collect();
        let mut out = Self::zeros(target)?;
        add_prolonged(&mut out.data, &out.dims, &self.data, &self.dims);
        Ok(out)
    }
}

fn check_resolution(coarse: &[usize], fine: &[usize]) -> Result<()> {
    if coarse.len() != fine.len() || coarse.iter().zip(fine).any(|(c, f)| c > f) {
        return Err(Error::Scale(format!(
            "resolution {coarse:?} is not coarser than {fine:?}"
        )));
    }
    Ok(())
}

pub(crate) fn depths_of(dims: &[usize]) -> Vec<usize> {
    dims.iter().map(|n| n.trailing_zeros() as usize).collect()
}

/// Row-major odometer step.
pub(crate) fn advance(idx: &mut [usize], dims: &[usize]) {
    for a in (0..dims.len()).rev() {
        idx[a] += 1;
        if idx[a] < dims[a] {
            return;
        }
        idx[a] = 0;
    }
}

/// Averages adjacent pairs along `axis`.
pub(crate) fn halve_axis(src: &[f64], dims: &[usize], axis: usize) -> Vec<f64> {
    let n = dims[axis];
    let inner: usize = dims[axis + 1..].iter().product();
    let outer = src.len() / (n * inner);
    let mut out = Vec::with_capacity(src.len() / 2);
    for o in 0..outer {
        let blk = &src[o * n * inner..(o + 1) * n * inner];
        for p in 0..n / 2 {
            let a = &blk[2 * p * inner..(2 * p + 1) * inner];
            let b = &blk[(2 * p + 1) * inner..(2 * p + 2) * inner];
            out.extend(a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)));
        }
    }
    out
}

/// Repeats every slab along `axis` twice.
pub(crate) fn double_axis(src: &[f64], dims: &[usize], axis: usize) -> Vec<f64> {
    let n = dims[axis];
    let inner: usize = dims[axis + 1..].iter().product();
    let mut out = Vec::with_capacity(src.len() * 2);
    for slab in src.chunks(inner) {
        out.extend_from_slice(slab);
        out.extend_from_slice(slab);
    }
    debug_assert_eq!(out.len(), 2 * n * (src.len() / n));
    out
}

/// `dst += prolong(src)` where every `src` dim divides the matching `dst` dim.
pub(crate) fn add_prolonged(dst: &mut [f64], dst_dims: &[usize], src: &[f64], src_dims: &[usize]) {
    let d = dst_dims.len();
    let last = d - 1;
    let shifts: Vec<u32> = dst_dims
        .iter()
        .zip(src_dims)
        .map(|(a, b)| (a / b).trailing_zeros())
        .collect();
    let row_len = dst_dims[last];
    let rep = 1usize << shifts[last];
    let mut idx = vec![0usize; d];
    for row in dst.chunks_mut(row_len) {
        let mut base = 0;
        for a in 0..last {
            base = base * src_dims[a] + (idx[a] >> shifts[a]);
        }
        base *= src_dims[last];
        let src_row = &src[base..base + src_dims[last]];
        for (chunk, &v) in row.chunks_mut(rep).zip(src_row) {
            for x in chunk {
                *x += v;
            }
        }
        for a in (0..last).rev() {
            idx[a] += 1;
            if idx[a] < dst_dims[a] {
                break;
            }
            idx[a] = 0;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScaleTuple(pub Vec<usize>);

impl ScaleTuple {
    pub fn new(j: Vec<usize>) -> Self {
        Self(j)
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0; d])
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    /// Checks `0 <= j_i <= N_i` against the grid depths.
    pub fn check_against(&self, depths: &[usize]) -> Result<()> {
        if self.0.len() != depths.len() {
            return Err(Error::Scale(format!(
                "scale tuple {:?} has rank {}, grid has rank {}",
                self.0,
                self.0.len(),
                depths.len()
            )));
        }
        if let Some(a) = (0..depths.len()).find(|&a| self.0[a] > depths[a]) {
            return Err(Error::Scale(format!(
                "scale {} on axis {a} exceeds grid depth {}",
                self.0[a], depths[a]
            )));
        }
        Ok(())
    }

    pub fn with_axis(&self, axis: usize, j: usize) -> Self {
        let mut v = self.0.clone();
        v[axis] = j;
        Self(v)
    }
}

impl std::fmt::Display for ScaleTuple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|j| j.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl std::str::FromStr for ScaleTuple {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad scale component {p:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

/// Dyadic box `B^j_k`, `k` 1-based per axis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoxIndex {
    pub j: ScaleTuple,
    pub k: Vec<usize>,
}

impl BoxIndex {
    pub fn new(j: ScaleTuple, k: Vec<usize>) -> Result<Self> {
        if j.rank() != k.len() {
            return Err(Error::Index(format!(
                "scale rank {} does not match location rank {}",
                j.rank(),
                k.len()
            )));
        }
        for (a, (&ja, &ka)) in j.0.iter().zip(&k).enumerate() {
            if ka == 0 || ka > 1 << ja {
                return Err(Error::Index(format!(
                    "location {ka} on axis {a} outside 1..={}",
                    1usize << ja
                )));
            }
        }
        Ok(Self { j, k })
    }

    /// `2^-(j_1+...+j_d)`; exact since it is a power of two.
    pub fn measure(&self) -> f64 {
        (-(self.j.total() as f64)).exp2()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.k.len()
            && self.j.0.iter().zip(&self.k).zip(x).all(|((&j, &k), &xi)| {
                let w = (-(j as f64)).exp2();
                let (lo, hi) = ((k - 1) as f64 * w, k as f64 * w);
                (xi > lo || (k == 1 && xi == 0.0)) && xi <= hi
            })
    }

    /// Sample index ranges covered by the box on a grid with the given depths.
    pub fn sample_ranges(&self, depths: &[usize]) -> Result<Vec<Range<usize>>> {
        self.j.check_against(depths)?;
        Ok(self
            .j
            .0
            .iter()
            .zip(&self.k)
            .zip(depths)
            .map(|((&j, &k), &n)| {
                let w = 1usize << (n - j);
                (k - 1) * w..k * w
            })
            .collect())
    }

    /// All boxes of scale `j` in row-major order of `k`.
    pub fn all_at(j: &ScaleTuple) -> Vec<BoxIndex> {
        let counts: Vec<usize> = j.0.iter().map(|&s| 1usize << s).collect();
        let total: usize = counts.iter().product();
        let mut idx = vec![0usize; counts.len()];
        let mut out = Vec::with_capacity(total);
        for _ in 0..total {
            out.push(BoxIndex {
                j: j.clone(),
                k: idx.iter().map(|m| m + 1).collect(),
            });
            advance(&mut idx, &counts);
        }
        out
    }
}

/// Owned copy of the samples inside box `b`.
pub fn box_slice(f: &DyadicTensor, b: &BoxIndex) -> Result<DyadicTensor> {
    let ranges = b.sample_ranges(&f.depths())?;
    let sub: Vec<usize> = ranges.iter().map(|r| r.len()).collect();
    let mut local = vec![0usize; sub.len()];
    let mut global = vec![0usize; sub.len()];
    DyadicTensor::from_index_fn(sub.clone(), |idx| {
        local.copy_from_slice(idx);
        for a in 0..global.len() {
            global[a] = ranges[a].start + local[a];
        }
        f.data[f.offset(&global)]
    })
}

/// Length of the smallest dyadic interval containing both points; 0 when they coincide.
pub fn dyadic_distance(x: f64, y: f64) -> Result<f64> {
    for v in [x, y] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("{v} outside [0,1]")));
        }
    }
    if x == y {
        return Ok(0.0);
    }
    let cell = |v: f64, j: i32| ((v * (j as f64).exp2()).ceil()).max(1.0);
    let mut j = 0;
    while j < 1100 && cell(x, j + 1) == cell(y, j + 1) {
        j += 1;
    }
    Ok((-(j as f64)).exp2())
}

/// Dyadic distance between the cells `m1`, `m2` of a depth-`depth` axis.
/// Equal cells give the cell width `2^-depth`.
pub fn cell_dyadic_distance(m1: usize, m2: usize, depth: usize) -> f64 {
    let diff_bits = usize::BITS - (m1 ^ m2).leading_zeros();
    let common = depth - diff_bits as usize;
    (-(common as f64)).exp2()
}
