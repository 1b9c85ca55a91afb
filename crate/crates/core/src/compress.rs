//! l1 capture curves of orthonormal tensor Haar coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DyadicTensor;
use crate::haar::{analysis, HaarPyramid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyCurve {
    /// `|c|` in descending order, ties by coefficient index.
    pub sorted_abs: Vec<f64>,
    /// Fraction of the total l1 mass held by the top `rank + 1` coefficients.
    pub cumulative: Vec<f64>,
    pub ks: Vec<usize>,
    pub fractions: Vec<f64>,
    /// All coefficients are zero; every fraction is defined as 1.
    pub degenerate: bool,
}

pub fn entropy_curve(p: &HaarPyramid, ks: &[usize]) -> Result<EntropyCurve> {
    entropy_curve_of(p.coefficients(), ks)
}

/// Curve for an arbitrary coefficient list in its canonical order.
pub fn entropy_curve_of(coeffs: &[f64], ks: &[usize]) -> Result<EntropyCurve> {
    let n = coeffs.len();
    if let Some(&k) = ks.iter().find(|&&k| k > n) {
        return Err(Error::Config(format!("k = {k} exceeds the {n} coefficients")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| coeffs[b].abs().total_cmp(&coeffs[a].abs()).then(a.cmp(&b)));
    let sorted_abs: Vec<f64> = order.iter().map(|&i| coeffs[i].abs()).collect();
    let mut running = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &v in &sorted_abs {
        acc += v;
        running.push(acc);
    }
    let total = acc;
    let degenerate = total == 0.0;
    let cumulative: Vec<f64> = if degenerate {
        vec![1.0; n]
    } else {
        running.iter().map(|r| r / total).collect()
    };
    let fractions = ks
        .iter()
        .map(|&k| match k {
            0 if degenerate => 1.0,
            0 => 0.0,
            k => cumulative[k - 1],
        })
        .collect();
    Ok(EntropyCurve {
        sorted_abs,
        cumulative,
        ks: ks.to_vec(),
        fractions,
        degenerate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub label: String,
    pub fractions: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub ks: Vec<usize>,
    pub rows: Vec<CompareRow>,
    pub curves: Vec<EntropyCurve>,
}

impl CompareReport {
    pub fn row(&self, label: &str) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

pub fn compare_report(
    original: &DyadicTensor,
    approx: &DyadicTensor,
    residual: &DyadicTensor,
    ks: &[usize],
) -> Result<CompareReport> {
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for (label, t) in [("original", original), ("approx", approx), ("residual", residual)] {
        let c = entropy_curve(&analysis(t), ks)?;
        rows.push(CompareRow {
            label: label.into(),
            fractions: c.fractions.clone(),
        });
        curves.push(c);
    }
    Ok(CompareReport {
        ks: ks.to_vec(),
        rows,
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_examples() {
        let c = entropy_curve_of(&[0.0, 3.0, 0.0, 0.0], &[1, 4]).unwrap();
        assert_eq!(c.fractions, vec![1.0, 1.0]);
        let u = entropy_curve_of(&[2.0; 8], &[1, 2, 4, 8]).unwrap();
        assert_eq!(u.fractions, vec![0.125, 0.25, 0.5, 1.0]);
        let z = entropy_curve_of(&[0.0; 4], &[0, 2]).unwrap();
        assert!(z.degenerate);
        assert_eq!(z.fractions, vec![1.0, 1.0]);
        assert!(entropy_curve_of(&[1.0; 4], &[5]).is_err());
    }

    #[test]
    fn identical_inputs_give_identical_rows() {
        let t = DyadicTensor::from_index_fn(vec![8, 8], |i| ((i[0] * 7 + i[1] * 3) % 5) as f64).unwrap();
        let r = compare_report(&t, &t, &t, &[1, 10, 64]).unwrap();
        assert_eq!(r.rows[0].fractions, r.rows[1].fractions);
        assert_eq!(r.rows[1].fractions, r.rows[2].fractions);
    }

    proptest! {
        #[test]
        fn monotone_and_permutation_invariant(v in proptest::collection::vec(-10.0f64..10.0, 1..200), rot in 0usize..200) {
            let n = v.len();
            let ks: Vec<usize> = (0..=n).collect();
            let c = entropy_curve_of(&v, &ks).unwrap();
            prop_assert!(c.fractions.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(c.fractions[n], 1.0);
            let mut w = v.clone();
            w.rotate_left(rot % n);
            w.reverse();
            let c2 = entropy_curve_of(&w, &ks).unwrap();
            prop_assert_eq!(c.fractions, c2.fractions);
        }
    }
}
