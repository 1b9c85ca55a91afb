//! Paraproduct decomposition `A(f) = Ã(f) + Δ(A,f)`.
//!
//! At a lattice point `j` the quasilinear part is the chain-rule expansion of the mixed
//! derivative `∂_{t_1}..∂_{t_d} A(δ^t f)` at `t = 0`, where `δ^t` interpolates between
//! `P^{j_i}` and `P^{j_i+1}` along each axis. That gives one term per set partition `π`
//! of the axes:
//!
//! `A^{(|π|)}(P^j f) · Π_{B∈π} (Π_{i∈B} Q^{j_i}_i)(Π_{i∉B} P^{j_i}_i) f`.
//!
//! Axes outside a block are averaged at their lattice scale. At `d = 2` this is exactly
//! `A'(PP'f)[P^{j+1}P'^{j'+1}f - ...] + A''(PP'f)[P^{j+1}P'^{j'}f - PP'f][P^jP'^{j'+1}f - PP'f]`.
//!
//! Lattice levels: `N_i` counts the scales `j_i = 0..N_i-1` per axis. With `N_i` equal to the
//! grid depth the linear part telescopes to `Π_i (I - P^0_i) f`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{add_prolonged, double_axis, halve_axis, DyadicTensor, ScaleTuple};
use crate::haar::{average_axis, average_op, difference_op};
use crate::smoothmap::SmoothMap;

pub type Partition = Vec<Vec<usize>>;

/// All set partitions of `{0..d-1}`, blocks ordered by their smallest element.
pub fn set_partitions(d: usize) -> Vec<Partition> {
    fn rec(i: usize, d: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Partition>) {
        if i == d {
            out.push(cur.clone());
            return;
        }
        for b in 0..cur.len() {
            cur[b].push(i);
            rec(i + 1, d, cur, out);
            cur[b].pop();
        }
        cur.push(vec![i]);
        rec(i + 1, d, cur, out);
        cur.pop();
    }
    let mut out = Vec::new();
    if d > 0 {
        rec(0, d, &mut Vec::new(), &mut out);
    }
    out
}

fn mask_of(block: &[usize]) -> usize {
    block.iter().fold(0, |m, &a| m | 1 << a)
}

#[derive(Clone, Debug)]
pub struct PartitionTerm {
    pub scale: ScaleTuple,
    pub partition: Partition,
    pub value: DyadicTensor,
}

impl PartitionTerm {
    pub fn order(&self) -> usize {
        self.partition.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Lattice {
    /// Full product `[0,N_1) × … × [0,N_d)`.
    #[default]
    Full,
    /// Only `j_1 = … = j_d`; cheaper, not the full expansion.
    Diagonal,
}

impl std::str::FromStr for Lattice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Lattice::Full),
            "diagonal" => Ok(Lattice::Diagonal),
            _ => Err(Error::Config(format!("unknown lattice {s:?} (full|diagonal)"))),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DecomposeOptions {
    /// Subtract the directional means first, `f <- Π_i (I - P^0_i) f`.
    pub center_means: bool,
    /// Keep every partition term at full resolution (memory heavy).
    pub retain_terms: bool,
    pub lattice: Lattice,
    /// Keep only partitions with at most this many blocks; `None` is the full expansion.
    pub max_order: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScaleNorms {
    pub scale: Vec<usize>,
    /// L1 norm on `[0,1]^d` of the order-`m` part, index `m - 1`.
    pub order_l1: Vec<f64>,
    pub total_l1: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompositionMeta {
    pub dims: Vec<usize>,
    pub scales: Vec<usize>,
    pub map: String,
    pub options: DecomposeOptions,
    pub term_norms: Vec<ScaleNorms>,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    /// `f` after optional centering; the input the expansion was built on.
    pub input: DyadicTensor,
    /// `A` applied pointwise to `input`.
    pub mapped: DyadicTensor,
    pub approx: DyadicTensor,
    pub residual: DyadicTensor,
    pub terms: Option<Vec<PartitionTerm>>,
    pub meta: DecompositionMeta,
}

/// `Π_{i∈axes} Q^{j_i}_i f`, other axes untouched.
pub fn q_block(f: &DyadicTensor, axes: &[usize], j: &ScaleTuple) -> Result<DyadicTensor> {
    if axes.is_empty() {
        return Err(Error::Config("q_block needs at least one axis".into()));
    }
    j.check_against(&f.depths())?;
    let mut g = f.clone();
    for &a in axes {
        g = difference_op(&g, a, j.as_slice()[a])?;
    }
    Ok(g)
}

/// `(Π_{i∈block} Q^{j_i}_i)(Π_{i∉block} P^{j_i}_i) f`, the derivative of `δ^t f` in the block's `t`s at `t = 0`.
pub fn derivative_block(f: &DyadicTensor, block: &[usize], j: &ScaleTuple) -> Result<DyadicTensor> {
    let mut g = f.clone();
    for a in 0..f.rank() {
        if !block.contains(&a) {
            g = average_axis(&g, a, j.as_slice()[a])?;
        }
    }
    q_block(&g, block, j)
}

fn check_lattice_point(f: &DyadicTensor, j: &ScaleTuple) -> Result<()> {
    j.check_against(&f.depths())?;
    let depths = f.depths();
    if let Some(a) = (0..depths.len()).find(|&a| j.as_slice()[a] >= depths[a]) {
        return Err(Error::Scale(format!(
            "lattice scale {} on axis {a} needs a finer level (depth {})",
            j.as_slice()[a],
            depths[a]
        )));
    }
    Ok(())
}

fn check_order(a: &SmoothMap, d: usize, max_order: Option<usize>) -> Result<usize> {
    let need = max_order.unwrap_or(d).min(d);
    if need == 0 {
        return Err(Error::Config("max_order must be at least 1".into()));
    }
    if a.dmax() < need {
        return Err(Error::Config(format!(
            "map {} has dmax {} but the expansion needs order {need}",
            a.spec(),
            a.dmax()
        )));
    }
    Ok(need)
}

/// Full-resolution partition terms at lattice point `j`, built from `P`/`Q` compositions.
pub fn partition_terms(f: &DyadicTensor, a: &SmoothMap, j: &ScaleTuple) -> Result<Vec<PartitionTerm>> {
    let d = f.rank();
    check_order(a, d, None)?;
    check_lattice_point(f, j)?;
    let pj = average_op(f, j)?;
    let derivs: Vec<DyadicTensor> = (1..=d).map(|m| a.apply_deriv(m, &pj)).collect::<Result<_>>()?;
    let mut blocks: Vec<Option<DyadicTensor>> = vec![None; 1 << d];
    let mut out = Vec::new();
    for partition in set_partitions(d) {
        let mut value = derivs[partition.len() - 1].clone();
        for block in &partition {
            let m = mask_of(block);
            if blocks[m].is_none() {
                blocks[m] = Some(derivative_block(f, block, j)?);
            }
            value = value.zip_map(blocks[m].as_ref().unwrap(), |x, y| x * y)?;
        }
        out.push(PartitionTerm {
            scale: j.clone(),
            partition,
            value,
        });
    }
    Ok(out)
}

/// Sum of the terms with exactly `m` blocks at lattice point `j`.
pub fn order_term(f: &DyadicTensor, a: &SmoothMap, j: &ScaleTuple, m: usize) -> Result<DyadicTensor> {
    if m == 0 || m > f.rank() {
        return Err(Error::Config(format!("order {m} outside 1..={}", f.rank())));
    }
    let mut acc = DyadicTensor::zeros(f.dims().to_vec())?;
    for t in partition_terms(f, a, j)? {
        if t.order() == m {
            acc = acc.add(&t.value)?;
        }
    }
    Ok(acc)
}

/// `Π_i (I - P^0_i) f`: every directional average becomes zero.
pub fn center_means(f: &DyadicTensor) -> Result<DyadicTensor> {
    let mut g = f.clone();
    for a in 0..f.rank() {
        g = g.sub(&average_axis(&g, a, 0)?)?;
    }
    Ok(g)
}

/// What a linear map leaves in the residual: `f - Π_i (I - P^0_i) f`.
pub fn boundary_term(f: &DyadicTensor) -> Result<DyadicTensor> {
    f.sub(&center_means(f)?)
}

/// Max deviation between the alternating corner sum of `δ^t f` over `t ∈ {0,1}^d` and `Π_i Q^{j_i}_i f`.
pub fn interp_corner_check(f: &DyadicTensor, j: &ScaleTuple) -> Result<f64> {
    check_lattice_point(f, j)?;
    let d = f.rank();
    let mut corner_sum = DyadicTensor::zeros(f.dims().to_vec())?;
    for t in 0usize..1 << d {
        let mut g = f.clone();
        for a in 0..d {
            let ja = j.as_slice()[a];
            let lo = average_axis(&g, a, ja)?;
            let hi = average_axis(&g, a, ja + 1)?;
            let ta = ((t >> a) & 1) as f64;
            g = lo.zip_map(&hi, |p, q| p + ta * (q - p))?;
        }
        let sign = if (d - t.count_ones() as usize) % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        corner_sum = corner_sum.zip_map(&g, |s, v| s + sign * v)?;
    }
    let all: Vec<usize> = (0..d).collect();
    corner_sum.max_abs_diff(&q_block(f, &all, j)?)
}

/// Lattice points in accumulation order (first axis fastest).
pub fn lattice_points(levels: &[usize], lattice: Lattice) -> Vec<ScaleTuple> {
    if levels.iter().any(|&n| n == 0) {
        return Vec::new();
    }
    let total: usize = levels.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut j = vec![0usize; levels.len()];
    for _ in 0..total {
        if lattice == Lattice::Full || j.iter().all(|&x| x == j[0]) {
            out.push(ScaleTuple::new(j.clone()));
        }
        for a in 0..levels.len() {
            j[a] += 1;
            if j[a] < levels[a] {
                break;
            }
            j[a] = 0;
        }
    }
    out
}

/// Block means of `f` at every resolution `r ∈ Π_i [0, N_i]`.
struct MeanPyramid {
    levels: Vec<usize>,
    arrays: Vec<Vec<f64>>,
}

impl MeanPyramid {
    fn build(f: &DyadicTensor, levels: &[usize]) -> Result<Self> {
        let d = levels.len();
        let count: usize = levels.iter().map(|n| n + 1).product();
        let mut arrays = vec![Vec::new(); count];
        let top = f.coarsen(levels)?;
        let mut pyr = Self {
            levels: levels.to_vec(),
            arrays: Vec::new(),
        };
        let top_idx = pyr.index(levels);
        arrays[top_idx] = top.into_data();
        // decreasing lexicographic order visits every parent r + e_a before r
        let mut r = levels.to_vec();
        for _ in 1..count {
            for a in (0..d).rev() {
                if r[a] > 0 {
                    r[a] -= 1;
                    break;
                }
                r[a] = levels[a];
            }
            let a = (0..d).rev().find(|&a| r[a] < levels[a]).unwrap();
            let mut parent = r.clone();
            parent[a] += 1;
            let pdims: Vec<usize> = parent.iter().map(|&x| 1 << x).collect();
            let halved = halve_axis(&arrays[pyr.index(&parent)], &pdims, a);
            let idx = pyr.index(&r);
            arrays[idx] = halved;
        }
        pyr.arrays = arrays;
        Ok(pyr)
    }

    fn index(&self, r: &[usize]) -> usize {
        r.iter().zip(&self.levels).fold(0, |acc, (&x, &n)| acc * (n + 1) + x)
    }

    fn get(&self, r: &[usize]) -> &[f64] {
        &self.arrays[self.index(r)]
    }
}

struct Expansion {
    d: usize,
    max_order: usize,
    /// (order, block masks) for every partition kept.
    partitions: Vec<(usize, Vec<usize>)>,
}

const ROWS_PER_TASK: usize = 1 << 12;

struct CoarseTerm {
    data: Vec<f64>,
    order_l1: Vec<f64>,
    total_l1: f64,
}

impl Expansion {
    fn new(d: usize, max_order: usize) -> Self {
        let partitions = set_partitions(d)
            .into_iter()
            .filter(|p| p.len() <= max_order)
            .map(|p| (p.len(), p.iter().map(|b| mask_of(b)).collect()))
            .collect();
        Self {
            d,
            max_order,
            partitions,
        }
    }

    /// Term at lattice point `j`, on the grid of resolution `j + 1`.
    fn coarse_term(&self, pyr: &MeanPyramid, a: &SmoothMap, j: &[usize]) -> CoarseTerm {
        let d = self.d;
        let nsub = 1usize << d;
        let fine: Vec<usize> = j.iter().map(|&x| 1usize << (x + 1)).collect();
        let cells: usize = fine.iter().product();
        // per subset S: the mean array at j + e_S and its strides
        let mut sources: Vec<(&[f64], Vec<usize>)> = Vec::with_capacity(nsub);
        for s in 0..nsub {
            let r: Vec<usize> = (0..d).map(|i| j[i] + ((s >> i) & 1)).collect();
            let mut strides = vec![1usize; d];
            for i in (0..d.saturating_sub(1)).rev() {
                strides[i] = strides[i + 1] * (1usize << r[i + 1]);
            }
            sources.push((pyr.get(&r), strides));
        }
        let mut data = vec![0.0; cells];
        let row_cells = cells / fine[0];
        let chunk = row_cells * (ROWS_PER_TASK / row_cells).clamp(1, fine[0]);
        let partials: Vec<Vec<f64>> = data
            .par_chunks_mut(chunk)
            .enumerate()
            .map(|(ci, out)| {
                let mut norms = vec![0.0; self.max_order + 1];
                let mut idx = vec![0usize; d];
                let mut flat = ci * chunk;
                for a in (0..d).rev() {
                    idx[a] = flat % fine[a];
                    flat /= fine[a];
                }
                let mut g = vec![0.0; nsub];
                let mut dv = vec![0.0; self.max_order + 1];
                let mut by_order = vec![0.0; self.max_order + 1];
                for cell in out.iter_mut() {
                    for (s, (src, strides)) in sources.iter().enumerate() {
                        let mut off = 0;
                        for i in 0..d {
                            let c = if (s >> i) & 1 == 1 { idx[i] } else { idx[i] >> 1 };
                            off += c * strides[i];
                        }
                        g[s] = src[off];
                    }
                    for i in 0..d {
                        let bit = 1 << i;
                        for s in 0..nsub {
                            if s & bit != 0 {
                                g[s] -= g[s ^ bit];
                            }
                        }
                    }
                    a.derivs(g[0], &mut dv);
                    by_order.iter_mut().for_each(|v| *v = 0.0);
                    for (m, masks) in &self.partitions {
                        let mut t = dv[*m];
                        for &b in masks {
                            t *= g[b];
                        }
                        by_order[*m] += t;
                    }
                    let mut total = 0.0;
                    for m in 1..=self.max_order {
                        total += by_order[m];
                        norms[m] += by_order[m].abs();
                    }
                    norms[0] += total.abs();
                    *cell = total;
                    crate::grid::advance(&mut idx, &fine);
                }
                norms
            })
            .collect();
        let mut sums = vec![0.0; self.max_order + 1];
        for p in &partials {
            for (s, v) in sums.iter_mut().zip(p) {
                *s += v;
            }
        }
        let w = 1.0 / cells as f64;
        CoarseTerm {
            data,
            order_l1: sums[1..].iter().map(|s| s * w).collect(),
            total_l1: sums[0] * w,
        }
    }
}

struct Accumulator<'a> {
    pyr: &'a MeanPyramid,
    map: &'a SmoothMap,
    expansion: Expansion,
    lattice: Lattice,
    levels: Vec<usize>,
    norms: Vec<ScaleNorms>,
}

impl Accumulator<'_> {
    /// Σ over `r_0..=r_axis` of the prolonged terms, at resolution
    /// `(N_0..N_axis, r_{axis+1}..)`, with `r = j + 1`. Horner along each axis.
    fn sum_axis(&mut self, axis: usize, r: &mut Vec<usize>) -> Vec<f64> {
        let mut acc: Vec<f64> = Vec::new();
        for ra in 1..=self.levels[axis] {
            r[axis] = ra;
            let part = if axis == 0 {
                self.term(r)
            } else {
                self.sum_axis(axis - 1, r)
            };
            if acc.is_empty() {
                acc = part;
            } else {
                let mut dims: Vec<usize> = r.iter().map(|&x| 1usize << x).collect();
                for (dim, &n) in dims.iter_mut().zip(&self.levels).take(axis) {
                    *dim = 1 << n;
                }
                dims[axis] /= 2;
                acc = double_axis(&acc, &dims, axis);
                for (x, p) in acc.iter_mut().zip(&part) {
                    *x += p;
                }
            }
        }
        acc
    }

    fn term(&mut self, r: &[usize]) -> Vec<f64> {
        let j: Vec<usize> = r.iter().map(|x| x - 1).collect();
        let cells: usize = r.iter().map(|&x| 1usize << x).product();
        if self.lattice == Lattice::Diagonal && j.iter().any(|&x| x != j[0]) {
            return vec![0.0; cells];
        }
        let t = self.expansion.coarse_term(self.pyr, self.map, &j);
        self.norms.push(ScaleNorms {
            scale: j,
            order_l1: t.order_l1,
            total_l1: t.total_l1,
        });
        t.data
    }
}

/// `Ã(f)` summed over the lattice with `levels[i]` scales per axis, and `Δ(A,f) = A(f) - Ã(f)`.
pub fn approximate(
    f: &DyadicTensor,
    a: &SmoothMap,
    levels: &ScaleTuple,
    opts: &DecomposeOptions,
) -> Result<Decomposition> {
    let d = f.rank();
    let max_order = check_order(a, d, opts.max_order)?;
    levels.check_against(&f.depths())?;
    let input = if opts.center_means { center_means(f)? } else { f.clone() };
    let mapped = a.apply(&input)?;
    let lv = levels.as_slice().to_vec();

    let mut norms = Vec::new();
    let approx = if lv.iter().any(|&n| n == 0) {
        DyadicTensor::zeros(f.dims().to_vec())?
    } else {
        let pyr = MeanPyramid::build(&input, &lv)?;
        for arr in &pyr.arrays {
            for &x in arr {
                a.check_domain(x)?;
            }
        }
        let mut acc = Accumulator {
            pyr: &pyr,
            map: a,
            expansion: Expansion::new(d, max_order),
            lattice: opts.lattice,
            levels: lv.clone(),
            norms: Vec::new(),
        };
        let mut r = vec![0usize; d];
        let coarse = acc.sum_axis(d - 1, &mut r);
        norms = acc.norms;
        norms.sort_by(|x, y| x.scale.cmp(&y.scale));
        let coarse_dims: Vec<usize> = lv.iter().map(|&n| 1usize << n).collect();
        let mut out = DyadicTensor::zeros(f.dims().to_vec())?;
        add_prolonged(out.data_mut(), f.dims(), &coarse, &coarse_dims);
        out
    };
    let residual = mapped.sub(&approx)?;

    let terms = if opts.retain_terms {
        let mut all = Vec::new();
        for j in lattice_points(&lv, opts.lattice) {
            all.extend(
                partition_terms(&input, a, &j)?
                    .into_iter()
                    .filter(|t| t.order() <= max_order),
            );
        }
        Some(all)
    } else {
        None
    };

    Ok(Decomposition {
        meta: DecompositionMeta {
            dims: f.dims().to_vec(),
            scales: lv,
            map: a.spec().to_string(),
            options: opts.clone(),
            term_norms: norms,
        },
        input,
        mapped,
        approx,
        residual,
        terms,
    })
}

/// Decomposition over the full grid depth on every axis.
pub fn approximate_full(f: &DyadicTensor, a: &SmoothMap, opts: &DecomposeOptions) -> Result<Decomposition> {
    approximate(f, a, &ScaleTuple::new(f.depths()), opts)
}
