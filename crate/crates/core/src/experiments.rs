//! End-to-end pipelines: ordered kernel matrices and the cone-singularity volume.

use serde::{Deserialize, Serialize};

use crate::compress::{compare_report, CompareReport};
use crate::datasets::{
    axis_coord, cone_volume, default_dist_floor, distance_matrix, equalizer_modulate, gen_points, kernel_matrix,
    ring_radius, time_slice, Ordering, Role, DEFAULT_CONE_ALPHA, DEFAULT_CONE_DIMS, DEFAULT_POINTS,
};
use crate::detect::{iou, ring_mask, support_mask, top_boxes, RankedBox};
use crate::error::{Error, Result};
use crate::grid::DyadicTensor;
use crate::paraproduct::{approximate_full, DecomposeOptions, Decomposition};
use crate::regularity::{decay_report, DecayReport};
use crate::report::IouRow;
use crate::smoothmap::{builtin_heat, builtin_potential, builtin_sin};

pub const TABLE_KS: [usize; 3] = [2000, 6000, 10000];

/// `max|approx + residual - A(f)|` relative to `max|A(f)|` (absolute when `A(f) = 0`).
pub fn split_error(d: &Decomposition) -> f64 {
    let mut worst = 0.0f64;
    for ((a, r), m) in d.approx.data().iter().zip(d.residual.data()).zip(d.mapped.data()) {
        worst = worst.max((a + r - m).abs());
    }
    let scale = d.mapped.max_abs();
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelDemoConfig {
    pub points: usize,
    pub seed: u64,
    pub ordering: Ordering,
    /// Heat kernel width.
    pub eps: f64,
    pub ks: Vec<usize>,
    pub floor: f64,
    pub center_means: bool,
}

impl Default for KernelDemoConfig {
    fn default() -> Self {
        Self {
            points: DEFAULT_POINTS,
            seed: 0,
            ordering: Ordering::Pca1,
            eps: 1.0,
            ks: TABLE_KS.to_vec(),
            floor: default_dist_floor(),
            center_means: false,
        }
    }
}

pub struct KernelRun {
    pub kernel: String,
    pub map: String,
    pub decomposition: Decomposition,
    pub compare: CompareReport,
    pub split_error: f64,
}

pub struct KernelDemo {
    pub distance: DyadicTensor,
    pub distance_decay: DecayReport,
    /// Heat first, then potential.
    pub runs: Vec<KernelRun>,
}

pub fn kernel_demo(cfg: &KernelDemoConfig) -> Result<KernelDemo> {
    let n = cfg.points;
    if let Some(&k) = cfg.ks.iter().find(|&&k| k > n * n) {
        return Err(Error::Config(format!("k = {k} exceeds the {} coefficients", n * n)));
    }
    let src = gen_points(n, cfg.seed, Role::Source);
    let tgt = gen_points(n, cfg.seed, Role::Target);
    let distance = distance_matrix(&src, &tgt, cfg.ordering, cfg.floor)?;
    let distance_decay = decay_report(&distance)?;
    let opts = DecomposeOptions {
        center_means: cfg.center_means,
        ..Default::default()
    };
    let mut runs = Vec::new();
    for (kernel, map) in [("heat", builtin_heat(cfg.eps)), ("potential", builtin_potential())] {
        let kmat = kernel_matrix(&distance, &map)?;
        let dec = approximate_full(&distance, &map, &opts)?;
        debug_assert!(cfg.center_means || kmat.max_abs_diff(&dec.mapped)? == 0.0);
        let compare = compare_report(&dec.mapped, &dec.approx, &dec.residual, &cfg.ks)?;
        runs.push(KernelRun {
            kernel: kernel.into(),
            map: map.spec().to_string(),
            split_error: split_error(&dec),
            decomposition: dec,
            compare,
        });
    }
    Ok(KernelDemo {
        distance,
        distance_decay,
        runs,
    })
}

/// Time indices of the reference slices on a 128-sample time axis.
pub const CONE_REFERENCE_SLICES: [usize; 3] = [15, 70, 115];

/// Reference slices rescaled to an `nt`-sample time axis.
pub fn scaled_slices(nt: usize) -> Vec<usize> {
    CONE_REFERENCE_SLICES.iter().map(|&t| t * nt / 128).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeDemoConfig {
    pub dims: [usize; 3],
    pub alpha: f64,
    pub top_k: usize,
    /// Time indices; `None` uses the reference slices rescaled to the grid.
    pub slices: Option<Vec<usize>>,
    /// Smallest per-axis wavelet scale eligible for detection; `None` means depth - 3.
    pub min_scale: Option<usize>,
    /// Half-width of the analytic ring mask in domain units.
    pub ring_halfwidth: f64,
}

impl Default for ConeDemoConfig {
    fn default() -> Self {
        Self {
            dims: DEFAULT_CONE_DIMS,
            alpha: DEFAULT_CONE_ALPHA,
            top_k: 200,
            slices: None,
            min_scale: None,
            ring_halfwidth: 1.0 / 32.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SliceDetection {
    pub row: IouRow,
    pub original: Vec<RankedBox>,
    pub mapped: Vec<RankedBox>,
    pub approx: Vec<RankedBox>,
    pub ring: Vec<bool>,
}

pub struct ConeDemo {
    pub volume: DyadicTensor,
    /// Band-modulated volume `g`; the distorted field is `sin(g)`.
    pub modulated: DyadicTensor,
    pub decomposition: Decomposition,
    pub slices: Vec<SliceDetection>,
    pub min_scale: usize,
}

pub fn cone_demo(cfg: &ConeDemoConfig) -> Result<ConeDemo> {
    let [nx, ny, nt] = cfg.dims;
    let v = cone_volume(cfg.dims, cfg.alpha)?;
    let modulated = equalizer_modulate(&v.data)?;
    let dec = approximate_full(&modulated, &builtin_sin(1.0), &DecomposeOptions::default())?;
    let depth = nx.min(ny).trailing_zeros() as usize;
    let min_scale = cfg.min_scale.unwrap_or(depth.saturating_sub(3));
    let slices = cfg.slices.clone().unwrap_or_else(|| scaled_slices(nt));
    let mut out = Vec::new();
    for &ti in &slices {
        let t = axis_coord(ti, nt, 0.0, 1.0);
        let ring = ring_mask(nx, ny, ring_radius(t), cfg.ring_halfwidth);
        let detect = |vol: &DyadicTensor| -> Result<(Vec<RankedBox>, f64)> {
            let boxes = top_boxes(&time_slice(vol, ti)?, cfg.top_k, min_scale)?;
            let score = iou(&support_mask(&[nx, ny], &boxes)?, &ring);
            Ok((boxes, score))
        };
        let (original, iou_original) = detect(&v.data)?;
        let (mapped, iou_mapped) = detect(&dec.mapped)?;
        let (approx, iou_approx) = detect(&dec.approx)?;
        out.push(SliceDetection {
            row: IouRow {
                t_index: ti,
                t,
                iou_original,
                iou_mapped,
                iou_approx,
            },
            original,
            mapped,
            approx,
            ring,
        });
    }
    Ok(ConeDemo {
        volume: v.data,
        modulated,
        decomposition: dec,
        slices: out,
        min_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_kernel_demo_is_exact_and_deterministic() {
        let cfg = KernelDemoConfig {
            points: 32,
            ks: vec![10, 100],
            ..Default::default()
        };
        let a = kernel_demo(&cfg).unwrap();
        let b = kernel_demo(&cfg).unwrap();
        assert_eq!(a.runs.len(), 2);
        for (x, y) in a.runs.iter().zip(&b.runs) {
            assert!(x.split_error <= 1e-12, "{}", x.split_error);
            assert_eq!(x.compare, y.compare);
            assert_eq!(x.decomposition.approx, y.decomposition.approx);
        }
        assert!(kernel_demo(&KernelDemoConfig {
            points: 32,
            ks: vec![2000],
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn slice_rescaling() {
        assert_eq!(scaled_slices(128), vec![15, 70, 115]);
        assert_eq!(scaled_slices(64), vec![7, 35, 57]);
    }

    #[test]
    fn small_cone_demo_runs() {
        let d = cone_demo(&ConeDemoConfig {
            dims: [32, 32, 16],
            top_k: 20,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(d.slices.len(), 3);
        assert!(split_error(&d.decomposition) <= 1e-12);
        for s in &d.slices {
            assert_eq!(s.original.len(), 20);
            assert!((0.0..=1.0).contains(&s.row.iou_original));
        }
    }
}
