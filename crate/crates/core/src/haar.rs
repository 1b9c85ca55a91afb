//! Averaging operators `P`, difference operators `Q`, and the orthonormal tensor Haar transform.
//!
//! `P` and `Q` work with plain box means. The transform is L2-orthonormal on the
//! sample vector. Per axis the pyramid stores index 0 for the scaling function and
//! indices `2^j .. 2^{j+1}` for the wavelets of scale `j` (0-based location `idx - 2^j`).
//! The wavelet is `+` on the left half of its interval.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::grid::{BoxIndex, DyadicTensor, ScaleTuple};

/// Full tensor Haar coefficient set, same layout as the input samples.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarPyramid {
    coeffs: DyadicTensor,
}

/// Scale of a per-axis pyramid index: `None` for the scaling function.
pub fn index_scale(idx: usize) -> Option<usize> {
    if idx == 0 {
        None
    } else {
        Some((usize::BITS - 1 - idx.leading_zeros()) as usize)
    }
}

impl HaarPyramid {
    pub fn from_coefficients(coeffs: DyadicTensor) -> Self {
        Self { coeffs }
    }

    pub fn dims(&self) -> &[usize] {
        self.coeffs.dims()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient of the constant function.
    pub fn mean(&self) -> f64 {
        self.coeffs.data()[0]
    }

    pub fn coefficients(&self) -> &[f64] {
        self.coeffs.data()
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        self.coeffs.data_mut()
    }

    pub fn as_tensor(&self) -> &DyadicTensor {
        &self.coeffs
    }

    /// Drops every coefficient whose scale on some axis `i` is `>= j_i`.
    pub fn truncated(&self, j: &ScaleTuple) -> Result<Self> {
        j.check_against(&self.coeffs.depths())?;
        let mut out = self.clone();
        let dims = self.dims().to_vec();
        let mut idx = vec![0usize; dims.len()];
        for c in out.coeffs.data_mut() {
            let keep = idx
                .iter()
                .zip(j.as_slice())
                .all(|(&m, &ja)| index_scale(m).map_or(true, |s| s < ja));
            if !keep {
                *c = 0.0;
            }
            crate::grid::advance(&mut idx, &dims);
        }
        Ok(out)
    }
}

fn axis_shape(dims: &[usize], axis: usize) -> (usize, usize, usize) {
    let n = dims[axis];
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    (outer, n, inner)
}

fn forward_axis(data: &mut [f64], dims: &[usize], axis: usize, tmp: &mut Vec<f64>) {
    let (outer, n, inner) = axis_shape(dims, axis);
    tmp.resize(n * inner, 0.0);
    for o in 0..outer {
        let blk = &mut data[o * n * inner..(o + 1) * n * inner];
        let mut len = n;
        while len > 1 {
            let half = len / 2;
            for p in 0..half {
                for i in 0..inner {
                    let a = blk[2 * p * inner + i];
                    let b = blk[(2 * p + 1) * inner + i];
                    tmp[p * inner + i] = (a + b) * FRAC_1_SQRT_2;
                    tmp[(half + p) * inner + i] = (a - b) * FRAC_1_SQRT_2;
                }
            }
            blk[..len * inner].copy_from_slice(&tmp[..len * inner]);
            len = half;
        }
    }
}

fn inverse_axis(data: &mut [f64], dims: &[usize], axis: usize, tmp: &mut Vec<f64>) {
    let (outer, n, inner) = axis_shape(dims, axis);
    tmp.resize(n * inner, 0.0);
    for o in 0..outer {
        let blk = &mut data[o * n * inner..(o + 1) * n * inner];
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            for p in 0..half {
                for i in 0..inner {
                    let s = blk[p * inner + i];
                    let d = blk[(half + p) * inner + i];
                    tmp[2 * p * inner + i] = (s + d) * FRAC_1_SQRT_2;
                    tmp[(2 * p + 1) * inner + i] = (s - d) * FRAC_1_SQRT_2;
                }
            }
            blk[..len * inner].copy_from_slice(&tmp[..len * inner]);
            len *= 2;
        }
    }
}

pub fn analysis(f: &DyadicTensor) -> HaarPyramid {
    let mut coeffs = f.clone();
    let dims = f.dims().to_vec();
    let mut tmp = Vec::new();
    for axis in 0..dims.len() {
        forward_axis(coeffs.data_mut(), &dims, axis, &mut tmp);
    }
    HaarPyramid { coeffs }
}

pub fn synthesis(p: &HaarPyramid) -> DyadicTensor {
    let mut out = p.coeffs.clone();
    let dims = out.dims().to_vec();
    let mut tmp = Vec::new();
    for axis in (0..dims.len()).rev() {
        inverse_axis(out.data_mut(), &dims, axis, &mut tmp);
    }
    out
}

/// `P^j f`: every sample replaced by the mean of its box `B^j_k`.
pub fn average_op(f: &DyadicTensor, j: &ScaleTuple) -> Result<DyadicTensor> {
    j.check_against(&f.depths())?;
    f.coarsen(j.as_slice())?.prolong(&f.depths())
}

/// Averaging along one axis at scale `j_axis`, other axes untouched.
pub fn average_axis(f: &DyadicTensor, axis: usize, j_axis: usize) -> Result<DyadicTensor> {
    let depths = f.depths();
    if axis >= depths.len() {
        return Err(Error::Index(format!("axis {axis} outside rank {}", depths.len())));
    }
    let res = ScaleTuple::new(depths.clone()).with_axis(axis, j_axis);
    average_op(f, &res)
}

/// `Q^{j}_axis f = P^{j+1}_axis f - P^{j}_axis f`.
pub fn difference_op(f: &DyadicTensor, axis: usize, j_axis: usize) -> Result<DyadicTensor> {
    let depths = f.depths();
    if axis >= depths.len() {
        return Err(Error::Index(format!("axis {axis} outside rank {}", depths.len())));
    }
    if j_axis >= depths[axis] {
        return Err(Error::Scale(format!(
            "no scale finer than {j_axis} on axis {axis} (depth {})",
            depths[axis]
        )));
    }
    let fine = average_axis(f, axis, j_axis + 1)?;
    let coarse = average_axis(f, axis, j_axis)?;
    fine.sub(&coarse)
}

/// Box-mean coefficient `mean_B(f * prod_{i in mask} h_i)` where `h_i` is `+1` on the
/// left half of the box along axis `i` and `-1` on the right half.
///
/// On a wavelet axis this is `2^{-(N_i - j_i)/2}` times the orthonormal coefficient, and
/// `Q^{j_i}` restricted to the box equals this coefficient times `h_i`.
pub fn box_coefficient(f: &DyadicTensor, b: &BoxIndex, mask: &[usize]) -> Result<f64> {
    let depths = f.depths();
    let ranges = b.sample_ranges(&depths)?;
    for &a in mask {
        if a >= depths.len() || b.j.as_slice()[a] >= depths[a] {
            return Err(Error::Scale(format!("axis {a} has no wavelet at the box scale")));
        }
    }
    let sub: Vec<usize> = ranges.iter().map(|r| r.len()).collect();
    let count: usize = sub.iter().product();
    let mut local = vec![0usize; sub.len()];
    let mut global = vec![0usize; sub.len()];
    let mut acc = 0.0;
    for _ in 0..count {
        let mut sign = 1.0;
        for &a in mask {
            if local[a] >= sub[a] / 2 {
                sign = -sign;
            }
        }
        for a in 0..sub.len() {
            global[a] = ranges[a].start + local[a];
        }
        acc += sign * f.data()[f.offset(&global)];
        crate::grid::advance(&mut local, &sub);
    }
    Ok(acc / count as f64)
}

/// Converts an orthonormal wavelet coefficient to the box-mean convention.
pub fn orthonormal_to_box_mean(coef: f64, depths: &[usize], scales: &[usize]) -> f64 {
    let exp: f64 = depths.iter().zip(scales).map(|(&n, &j)| (n - j) as f64).sum();
    coef * (-exp / 2.0).exp2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::advance;
    use proptest::prelude::*;

    fn lcg(seed: u64, n: usize) -> Vec<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    /// Explicit 1D orthonormal Haar basis vector for pyramid index `idx` on `n` samples.
    fn basis_1d(n: usize, idx: usize) -> Vec<f64> {
        match index_scale(idx) {
            None => vec![1.0 / (n as f64).sqrt(); n],
            Some(j) => {
                let w = n >> j;
                let k = idx - (1 << j);
                let amp = 1.0 / (w as f64).sqrt();
                (0..n)
                    .map(|m| {
                        if m / w != k {
                            0.0
                        } else if m % w < w / 2 {
                            amp
                        } else {
                            -amp
                        }
                    })
                    .collect()
            }
        }
    }

    #[test]
    fn matches_explicit_basis_inner_products() {
        let dims = vec![4, 4];
        let f = DyadicTensor::new(dims.clone(), lcg(3, 16)).unwrap();
        let p = analysis(&f);
        let mut idx = vec![0usize; 2];
        for c in p.coefficients() {
            let bx = basis_1d(4, idx[0]);
            let by = basis_1d(4, idx[1]);
            let mut ip = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    ip += f.data()[a * 4 + b] * bx[a] * by[b];
                }
            }
            assert!((ip - c).abs() < 1e-14, "{idx:?}");
            advance(&mut idx, &dims);
        }
    }

    #[test]
    fn delta_tensor_has_equal_magnitudes_per_shell() {
        let mut data = vec![0.0; 16];
        data[5] = 1.0;
        let p = analysis(&DyadicTensor::new(vec![4, 4], data).unwrap());
        let total: f64 = p.coefficients().iter().map(|c| c * c).sum();
        assert!((total - 1.0).abs() < 1e-14);
        // nonzero coefficients sharing a per-axis scale pair have equal magnitude
        let mut seen = std::collections::HashMap::new();
        let mut idx = vec![0usize; 2];
        for &c in p.coefficients() {
            if c.abs() > 1e-15 {
                let key = (index_scale(idx[0]), index_scale(idx[1]));
                let prev = *seen.entry(key).or_insert(c.abs());
                assert!((prev - c.abs()).abs() < 1e-14);
            }
            advance(&mut idx, &[4, 4]);
        }
    }

    #[test]
    fn constant_has_only_mean() {
        let f = DyadicTensor::filled(vec![8, 4], 2.5).unwrap();
        let p = analysis(&f);
        assert!((p.mean() - 2.5 * (32f64).sqrt()).abs() < 1e-12);
        assert!(p.coefficients()[1..].iter().all(|&c| c == 0.0));
        let z = HaarPyramid::from_coefficients(DyadicTensor::zeros(vec![8, 4]).unwrap());
        assert!(synthesis(&z).data().iter().all(|&v| v == 0.0));
        let mut only_mean = z.clone();
        only_mean.coefficients_mut()[0] = 1.0;
        let s = synthesis(&only_mean);
        assert!(s.data().iter().all(|&v| (v - 1.0 / 32f64.sqrt()).abs() < 1e-15));
    }

    #[test]
    fn average_examples() {
        let f = DyadicTensor::new(vec![4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p1 = average_op(&f, &ScaleTuple::new(vec![1])).unwrap();
        assert_eq!(p1.data(), &[1.5, 1.5, 3.5, 3.5]);
        assert_eq!(average_op(&f, &ScaleTuple::new(vec![2])).unwrap(), f);
        let p0 = average_op(&f, &ScaleTuple::new(vec![0])).unwrap();
        assert!(p0.data().iter().all(|&v| v == 2.5));
        let q = difference_op(&f, 0, 0).unwrap();
        assert_eq!(q.data(), &[-1.0, -1.0, 1.0, 1.0]);
        assert!(matches!(difference_op(&f, 0, 2), Err(Error::Scale(_))));
    }

    #[test]
    fn box_coefficient_matches_pyramid() {
        let dims = vec![8, 16];
        let f = DyadicTensor::new(dims.clone(), lcg(9, 128)).unwrap();
        let p = analysis(&f);
        let depths = [3, 4];
        let mut idx = vec![0usize; 2];
        for &c in p.coefficients() {
            if let (Some(j0), Some(j1)) = (index_scale(idx[0]), index_scale(idx[1])) {
                let k = vec![idx[0] - (1 << j0) + 1, idx[1] - (1 << j1) + 1];
                let b = BoxIndex::new(ScaleTuple::new(vec![j0, j1]), k).unwrap();
                let direct = box_coefficient(&f, &b, &[0, 1]).unwrap();
                let conv = orthonormal_to_box_mean(c, &depths, &[j0, j1]);
                assert!((direct - conv).abs() < 1e-14);
            }
            advance(&mut idx, &dims);
        }
    }

    #[test]
    fn q_equals_coefficient_times_sign_on_box() {
        let f = DyadicTensor::new(vec![16], lcg(1, 16)).unwrap();
        let q = difference_op(&f, 0, 2).unwrap();
        for b in BoxIndex::all_at(&ScaleTuple::new(vec![2])) {
            let c = box_coefficient(&f, &b, &[0]).unwrap();
            let r = b.sample_ranges(&[4]).unwrap()[0].clone();
            for (i, m) in r.clone().enumerate() {
                let h = if i < r.len() / 2 { 1.0 } else { -1.0 };
                assert!((q.data()[m] - c * h).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn telescoping_over_scales() {
        let f = DyadicTensor::new(vec![32], lcg(5, 32)).unwrap();
        let mut acc = DyadicTensor::zeros(vec![32]).unwrap();
        for j in 0..5 {
            acc = acc.add(&difference_op(&f, 0, j).unwrap()).unwrap();
        }
        let expect = f.sub(&average_op(&f, &ScaleTuple::new(vec![0])).unwrap()).unwrap();
        assert!(acc.max_abs_diff(&expect).unwrap() < 1e-14);
    }

    proptest! {
        #[test]
        fn round_trip_and_parseval(seed in 0u64..1000, shape in 0usize..4) {
            let dims = [vec![64], vec![8, 16], vec![4, 8, 2], vec![2, 4, 2, 4]][shape].clone();
            let n = dims.iter().product();
            let f = DyadicTensor::new(dims, lcg(seed, n)).unwrap();
            let p = analysis(&f);
            let g = synthesis(&p);
            prop_assert!(g.max_abs_diff(&f).unwrap() <= 1e-12 * f.max_abs());
            let e1: f64 = f.data().iter().map(|v| v * v).sum();
            let e2: f64 = p.coefficients().iter().map(|v| v * v).sum();
            prop_assert!((e1 - e2).abs() <= 1e-10 * e1);
        }

        #[test]
        fn difference_ops_commute(seed in 0u64..1000, ja in 0usize..3, jb in 0usize..4) {
            let f = DyadicTensor::new(vec![8, 16], lcg(seed, 128)).unwrap();
            let ab = difference_op(&difference_op(&f, 1, jb).unwrap(), 0, ja).unwrap();
            let ba = difference_op(&difference_op(&f, 0, ja).unwrap(), 1, jb).unwrap();
            prop_assert!(ab.max_abs_diff(&ba).unwrap() < 1e-14);
        }

        #[test]
        fn averaging_is_truncated_synthesis(seed in 0u64..1000, j0 in 0usize..4, j1 in 0usize..3) {
            let f = DyadicTensor::new(vec![8, 4], lcg(seed, 32)).unwrap();
            let j = ScaleTuple::new(vec![j0, j1]);
            let direct = average_op(&f, &j).unwrap();
            let via = synthesis(&analysis(&f).truncated(&j).unwrap());
            prop_assert!(direct.max_abs_diff(&via).unwrap() < 1e-13);
        }

        #[test]
        fn q_integrates_to_zero_per_block(seed in 0u64..1000, j in 0usize..4) {
            let f = DyadicTensor::new(vec![16, 2], lcg(seed, 32)).unwrap();
            let q = difference_op(&f, 0, j).unwrap();
            let w = 16 >> j;
            for col in 0..2 {
                for blk in 0..(1 << j) {
                    let s: f64 = (blk * w..(blk + 1) * w).map(|m| q.data()[m * 2 + col]).sum();
                    prop_assert!(s.abs() < 1e-13);
                }
            }
        }
    }
}
