//! Empirical mixed-Hölder exponents from Haar coefficient decay.
//!
//! Coefficients are in the box-mean convention: a member of the mixed class with
//! exponent α has `|c| ≲ 2^{-(j_1+…+j_d)α}`, so `α̂` is minus the slope of
//! `log2 max|c|` against the shell `s = j_1+…+j_d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{advance, cell_dyadic_distance, DyadicTensor};
use crate::haar::{analysis, index_scale, synthesis, HaarPyramid};
use crate::rng::{PortableRng, Stream};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayOptions {
    pub exclude_finest: usize,
    /// Coarse shells hold a handful of coefficients, so their maxima are noisy.
    pub exclude_coarsest: usize,
    /// Shells with fewer coefficients are skipped; the max of a few draws is biased low.
    pub min_shell_count: usize,
    pub min_fit_shells: usize,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self {
            exclude_finest: 2,
            exclude_coarsest: 2,
            min_shell_count: 16,
            min_fit_shells: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellStats {
    pub shell: usize,
    pub count: usize,
    pub max_abs: f64,
    pub q50: f64,
    pub q90: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub alpha_hat: f64,
    pub shells: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub shells: Vec<ShellStats>,
    pub fit: Option<DecayFit>,
    /// Every mixed coefficient is zero.
    pub degenerate: bool,
}

impl DecayReport {
    pub fn alpha_hat(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.alpha_hat)
    }
}

/// Mixed (wavelet on every axis) coefficients in box-mean convention, grouped by shell.
pub fn mixed_coefficients_by_shell(p: &HaarPyramid) -> Vec<Vec<f64>> {
    let dims = p.dims().to_vec();
    let depths: Vec<usize> = dims.iter().map(|n| n.trailing_zeros() as usize).collect();
    let max_shell: usize = depths.iter().map(|n| n.saturating_sub(1)).sum();
    let mut shells = vec![Vec::new(); max_shell + 1];
    let mut idx = vec![0usize; dims.len()];
    for &c in p.coefficients() {
        let mut shell = 0;
        let mut exp = 0.0;
        let mut mixed = true;
        for (a, &m) in idx.iter().enumerate() {
            match index_scale(m) {
                Some(j) => {
                    shell += j;
                    exp += (depths[a] - j) as f64;
                }
                None => mixed = false,
            }
        }
        if mixed {
            shells[shell].push(c * (-exp / 2.0).exp2());
        }
        advance(&mut idx, &dims);
    }
    shells
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn decay_report(f: &DyadicTensor) -> Result<DecayReport> {
    decay_report_with(f, &DecayOptions::default())
}

pub fn decay_report_with(f: &DyadicTensor, opts: &DecayOptions) -> Result<DecayReport> {
    let by_shell = mixed_coefficients_by_shell(&analysis(f));
    let shells: Vec<ShellStats> = by_shell
        .iter()
        .enumerate()
        .map(|(s, coefs)| {
            let mut mags: Vec<f64> = coefs.iter().map(|c| c.abs()).collect();
            mags.sort_by(f64::total_cmp);
            ShellStats {
                shell: s,
                count: mags.len(),
                max_abs: mags.last().copied().unwrap_or(0.0),
                q50: if mags.is_empty() { 0.0 } else { quantile(&mags, 0.5) },
                q90: if mags.is_empty() { 0.0 } else { quantile(&mags, 0.9) },
            }
        })
        .collect();
    if shells.iter().all(|s| s.max_abs == 0.0) {
        return Ok(DecayReport {
            shells,
            fit: None,
            degenerate: true,
        });
    }
    let last = shells.len() as isize - 1 - opts.exclude_finest as isize;
    let used: Vec<&ShellStats> = shells
        .iter()
        .filter(|s| {
            s.shell >= opts.exclude_coarsest
                && s.count >= opts.min_shell_count
                && (s.shell as isize) <= last
                && s.max_abs > 0.0
        })
        .collect();
    if used.len() < opts.min_fit_shells.max(2) {
        return Err(Error::Fit(format!(
            "{} usable shells, need {} (grid {:?})",
            used.len(),
            opts.min_fit_shells,
            f.dims()
        )));
    }
    let xs: Vec<f64> = used.iter().map(|s| s.shell as f64).collect();
    let ys: Vec<f64> = used.iter().map(|s| s.max_abs.log2()).collect();
    let (slope, intercept, r2) = least_squares(&xs, &ys);
    Ok(DecayReport {
        fit: Some(DecayFit {
            slope,
            intercept,
            r2,
            alpha_hat: -slope,
            shells: used.iter().map(|s| s.shell).collect(),
        }),
        shells,
        degenerate: false,
    })
}

/// `(slope, intercept, r2)` of the ordinary least-squares line.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// `α̂(residual) / α̂(mapped)`.
pub fn slope_ratio(mapped: &DyadicTensor, residual: &DyadicTensor) -> Result<f64> {
    let a = decay_report(mapped)?
        .alpha_hat()
        .ok_or_else(|| Error::Fit("mapped tensor is degenerate".into()))?;
    let b = decay_report(residual)?
        .alpha_hat()
        .ok_or_else(|| Error::Fit("residual is degenerate".into()))?;
    Ok(b / a)
}

/// Random tensor Haar synthesis whose box-mean coefficients scale as `U·2^{-(Σj)α}`,
/// `U` uniform in `[-1,1]`. Scaling-function axes count as scale 0.
pub fn synth_field(dims: &[usize], alpha: f64, seed: u64) -> Result<DyadicTensor> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Domain(format!("alpha {alpha} outside (0, 0.5)")));
    }
    let mut rng = PortableRng::new(seed, Stream::Synth);
    let depths: Vec<usize> = dims.iter().map(|n| n.trailing_zeros() as usize).collect();
    let mut idx = vec![0usize; dims.len()];
    let coeffs = DyadicTensor::from_index_fn(dims.to_vec(), |m| {
        idx.copy_from_slice(m);
        let mut w = 1.0;
        for (a, &i) in idx.iter().enumerate() {
            let j = index_scale(i).unwrap_or(0) as f64;
            w *= (-j * (alpha + 0.5) + depths[a] as f64 / 2.0).exp2();
        }
        rng.uniform_in(-1.0, 1.0) * w
    })?;
    Ok(synthesis(&HaarPyramid::from_coefficients(coeffs)))
}

/// Rescales `f` to the given sup norm (zero stays zero).
pub fn normalize_sup(f: &DyadicTensor, amplitude: f64) -> DyadicTensor {
    let m = f.max_abs();
    if m == 0.0 {
        return f.clone();
    }
    f.map(|v| v * amplitude / m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedPair {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
}

/// Sample-index pairs differing on every axis.
pub fn random_pairs(dims: &[usize], count: usize, seed: u64) -> Vec<MixedPair> {
    let mut rng = PortableRng::new(seed, Stream::Pairs);
    (0..count)
        .map(|_| {
            let mut x = Vec::with_capacity(dims.len());
            let mut y = Vec::with_capacity(dims.len());
            for &n in dims {
                let a = rng.below(n);
                let b = (a + 1 + rng.below(n - 1)) % n;
                x.push(a);
                y.push(b);
            }
            MixedPair { x, y }
        })
        .collect()
}

/// `max |δ_{x_d}…δ_{x_1} f| / Π_i ρ(x_i, y_i)^α` over the pairs, `ρ` the dyadic distance
/// of the two cells. Pairs equal on some axis have zero mixed difference and are skipped.
pub fn mixed_difference_check(f: &DyadicTensor, pairs: &[MixedPair], alpha: f64) -> Result<f64> {
    let d = f.rank();
    let depths = f.depths();
    let mut worst = 0.0f64;
    let mut corner = vec![0usize; d];
    for p in pairs {
        if p.x.len() != d || p.y.len() != d {
            return Err(Error::Index(format!("pair rank does not match tensor rank {d}")));
        }
        if (0..d).any(|a| p.x[a] == p.y[a]) {
            continue;
        }
        let mut diff = 0.0;
        for s in 0usize..1 << d {
            for a in 0..d {
                corner[a] = if (s >> a) & 1 == 1 { p.y[a] } else { p.x[a] };
            }
            let sign = if (d - s.count_ones() as usize) % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            diff += sign * f.get(&corner)?;
        }
        let denom: f64 = (0..d)
            .map(|a| cell_dyadic_distance(p.x[a], p.y[a], depths[a]).powf(alpha))
            .product();
        worst = worst.max(diff.abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BoxIndex, ScaleTuple};
    use crate::haar::box_coefficient;

    #[test]
    fn constant_is_degenerate() {
        let r = decay_report(&DyadicTensor::filled(vec![32, 32], 1.5).unwrap()).unwrap();
        assert!(r.degenerate);
        assert!(r.fit.is_none());
        assert!(r.shells.iter().all(|s| s.max_abs == 0.0));
    }

    #[test]
    fn too_few_shells_is_a_fit_error() {
        let f = synth_field(&[8, 8], 0.3, 0).unwrap();
        assert!(matches!(decay_report(&f), Err(Error::Fit(_))));
    }

    #[test]
    fn shell_coefficients_match_box_coefficient() {
        let f = synth_field(&[8, 16], 0.3, 1).unwrap();
        let by_shell = mixed_coefficients_by_shell(&analysis(&f));
        // brute force every box with all-wavelet masks
        let mut direct = vec![Vec::new(); by_shell.len()];
        for j0 in 0..3 {
            for j1 in 0..4 {
                for b in BoxIndex::all_at(&ScaleTuple::new(vec![j0, j1])) {
                    direct[j0 + j1].push(box_coefficient(&f, &b, &[0, 1]).unwrap());
                }
            }
        }
        for (a, b) in by_shell.iter().zip(&direct) {
            let mut a: Vec<f64> = a.iter().map(|v| v.abs()).collect();
            let mut b: Vec<f64> = b.iter().map(|v| v.abs()).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn synth_coefficients_follow_the_prescribed_law() {
        // box-mean coefficient magnitudes are bounded by 2^{-(Σj)α} exactly
        let alpha = 0.3;
        let f = synth_field(&[32, 16], alpha, 4).unwrap();
        for (s, coefs) in mixed_coefficients_by_shell(&analysis(&f)).iter().enumerate() {
            let bound = (-(s as f64) * alpha).exp2();
            assert!(coefs.iter().all(|c| c.abs() <= bound * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn cusp_exponent() {
        let f = DyadicTensor::from_point_fn(vec![1 << 10], |x| (x[0] - 0.5).abs().powf(0.3)).unwrap();
        let a = decay_report(&f).unwrap().alpha_hat().unwrap();
        assert!((0.25..=0.35).contains(&a), "{a}");
    }

    #[test]
    fn synth_recovery_examples() {
        let a = decay_report(&synth_field(&[256, 256], 0.3, 0).unwrap())
            .unwrap()
            .alpha_hat()
            .unwrap();
        assert!((0.25..=0.35).contains(&a), "{a}");
        let b = decay_report(&synth_field(&[1 << 10], 0.49, 0).unwrap())
            .unwrap()
            .alpha_hat()
            .unwrap();
        assert!((0.44..=0.54).contains(&b), "{b}");
    }

    #[test]
    fn exponent_recovery_across_dimensions() {
        for dims in [vec![1 << 10], vec![256, 256], vec![64, 64, 64]] {
            for alpha in [0.1, 0.2, 0.3, 0.4] {
                let a = decay_report(&synth_field(&dims, alpha, 1).unwrap())
                    .unwrap()
                    .alpha_hat()
                    .unwrap();
                assert!((a - alpha).abs() <= 0.05, "{dims:?} {alpha} {a}");
            }
        }
    }

    #[test]
    fn synth_is_deterministic() {
        let a = synth_field(&[16, 16], 0.2, 9).unwrap();
        let b = synth_field(&[16, 16], 0.2, 9).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a, synth_field(&[16, 16], 0.2, 10).unwrap());
        assert!(synth_field(&[16], 0.6, 0).is_err());
    }

    #[test]
    fn mixed_difference_examples() {
        let pairs = random_pairs(&[64, 64], 500, 0);
        assert!(pairs.iter().all(|p| p.x[0] != p.y[0] && p.x[1] != p.y[1]));
        let c = DyadicTensor::filled(vec![64, 64], 2.0).unwrap();
        assert_eq!(mixed_difference_check(&c, &pairs, 0.3).unwrap(), 0.0);

        // bounded and stable for the synthetic class
        let f = synth_field(&[64, 64], 0.3, 2).unwrap();
        let r1 = mixed_difference_check(&f, &random_pairs(&[64, 64], 500, 1), 0.3).unwrap();
        let r2 = mixed_difference_check(&f, &random_pairs(&[64, 64], 4000, 1), 0.3).unwrap();
        assert!(r2 < 3.0 * r1.max(1e-12), "{r1} {r2}");

        // jump across the non-dyadic line x = 1/3: cells straddling it share deep ancestors,
        // so the ratio grows like n^α
        let jump =
            |n: usize| DyadicTensor::from_point_fn(vec![n, n], |x| if x[0] > 1.0 / 3.0 { x[1] } else { 0.0 }).unwrap();
        let straddle = |n: usize| MixedPair {
            x: vec![n / 3 - 1, n / 4],
            y: vec![n / 3, 3 * n / 4],
        };
        let ratios: Vec<f64> = [16, 64, 256, 1024]
            .iter()
            .map(|&n| mixed_difference_check(&jump(n), &[straddle(n)], 0.3).unwrap())
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] > 1.4 * w[0]), "{ratios:?}");
    }
}
