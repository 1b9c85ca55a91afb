//! Localization of 2D slices by the supports of their largest tensor Haar coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoxIndex, DyadicTensor, ScaleTuple};
use crate::haar::{analysis, index_scale};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedBox {
    pub bx: BoxIndex,
    /// Orthonormal coefficient of the wavelet supported on the box.
    pub coefficient: f64,
}

/// Support boxes of the `k` largest `|c|` among wavelets with scale `>= min_scale` on both
/// axes (ties by coefficient index).
pub fn top_boxes(slice: &DyadicTensor, k: usize, min_scale: usize) -> Result<Vec<RankedBox>> {
    if slice.rank() != 2 {
        return Err(Error::Shape(format!("expected a 2D slice, got {:?}", slice.dims())));
    }
    let ny = slice.dims()[1];
    let p = analysis(slice);
    let mut cands: Vec<(usize, f64)> = p
        .coefficients()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let sx = index_scale(i / ny);
            let sy = index_scale(i % ny);
            matches!((sx, sy), (Some(a), Some(b)) if a >= min_scale && b >= min_scale)
        })
        .map(|(i, &c)| (i, c))
        .collect();
    cands.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
    cands
        .into_iter()
        .take(k)
        .map(|(i, c)| {
            let (ix, iy) = (i / ny, i % ny);
            let (jx, jy) = (index_scale(ix).unwrap(), index_scale(iy).unwrap());
            let bx = BoxIndex::new(
                ScaleTuple::new(vec![jx, jy]),
                vec![ix - (1 << jx) + 1, iy - (1 << jy) + 1],
            )?;
            Ok(RankedBox { bx, coefficient: c })
        })
        .collect()
}

/// Union of the box supports as a row-major pixel mask.
pub fn support_mask(dims: &[usize], boxes: &[RankedBox]) -> Result<Vec<bool>> {
    let depths: Vec<usize> = dims.iter().map(|n| n.trailing_zeros() as usize).collect();
    let mut mask = vec![false; dims.iter().product()];
    for b in boxes {
        let r = b.bx.sample_ranges(&depths)?;
        for x in r[0].clone() {
            for y in r[1].clone() {
                mask[x * dims[1] + y] = true;
            }
        }
    }
    Ok(mask)
}

/// Pixels of `[-1,1]^2` whose center lies within `halfwidth` of the circle of radius `radius`.
pub fn ring_mask(nx: usize, ny: usize, radius: f64, halfwidth: f64) -> Vec<bool> {
    let mut mask = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        let x = crate::datasets::axis_coord(i, nx, -1.0, 1.0);
        for j in 0..ny {
            let y = crate::datasets::axis_coord(j, ny, -1.0, 1.0);
            mask.push(((x * x + y * y).sqrt() - radius).abs() <= halfwidth);
        }
    }
    mask
}

/// Intersection over union; 0 when both masks are empty.
pub fn iou(a: &[bool], b: &[bool]) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}
