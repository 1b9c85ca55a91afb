//! Acceptance criteria, one PASS/FAIL line each. Runs every criterion before exiting
//! nonzero if any failed.

use std::time::Instant;

use paratensor::czd::{cz_split, verify_conditions, CZSplit, LambdaSpec};
use paratensor::datasets::{default_dist_floor, distance_matrix, gen_points, Ordering, Role};
use paratensor::experiments::{cone_demo, kernel_demo, split_error, ConeDemoConfig, KernelDemoConfig};
use paratensor::haar::{analysis, average_axis, average_op, difference_op, synthesis};
use paratensor::paraproduct::{approximate_full, interp_corner_check, partition_terms, DecomposeOptions};
use paratensor::regularity::{decay_report, normalize_sup, synth_field};
use paratensor::report::{compare_table_csv, curve_csv, decay_csv};
use paratensor::rng::{PortableRng, Stream};
use paratensor::smoothmap::{builtin_heat, builtin_sin};
use paratensor::{DyadicTensor, Result, ScaleTuple};

const EXACT_TOL: f64 = 1e-12;
const MEAN_TOL: f64 = 1e-10;

struct Outcome {
    passed: bool,
    summary: String,
    details: Vec<String>,
}

fn random(dims: Vec<usize>, seed: u64) -> DyadicTensor {
    let mut rng = PortableRng::new(seed, Stream::Synth);
    DyadicTensor::from_index_fn(dims, |_| rng.uniform_in(-1.0, 1.0)).unwrap()
}

fn rel_diff(a: &DyadicTensor, b: &DyadicTensor) -> f64 {
    a.max_abs_diff(b).unwrap() / b.max_abs().max(f64::MIN_POSITIVE)
}

fn criterion_1() -> Result<Outcome> {
    let mut details = Vec::new();
    let mut worst = 0.0f64;
    let mut note = |label: String, dev: f64| {
        worst = worst.max(dev);
        details.push(format!("{label}: {dev:.2e}"));
    };

    for (dims, seed) in [(vec![1024, 1024], 1), (vec![64, 64, 64], 2)] {
        let f = random(dims.clone(), seed);
        let p = analysis(&f);
        note(format!("round trip {dims:?}"), rel_diff(&synthesis(&p), &f));
        let e_f: f64 = f.data().iter().map(|v| v * v).sum();
        let e_c: f64 = p.coefficients().iter().map(|v| v * v).sum();
        note(format!("parseval {dims:?}"), (e_f - e_c).abs() / e_f);
    }

    // one-axis telescoping with a nonlinear map
    let a = builtin_sin(1.5);
    let f = random(vec![64, 32, 16], 3);
    for axis in 0..3 {
        let n = f.depths()[axis];
        let mut sum = DyadicTensor::zeros(f.dims().to_vec())?;
        for j in 0..n {
            let hi = a.apply(&average_axis(&f, axis, j + 1)?)?;
            let lo = a.apply(&average_axis(&f, axis, j)?)?;
            sum = sum.add(&hi.sub(&lo)?)?;
        }
        let expect = a.apply(&f)?.sub(&a.apply(&average_axis(&f, axis, 0)?)?)?;
        note(format!("telescoping axis {axis}"), rel_diff(&sum, &expect));
    }

    for (d, dims) in [(1, vec![64]), (2, vec![32, 16]), (3, vec![16, 8, 8])] {
        let f = random(dims.clone(), 4 + d as u64);
        let mut dev = 0.0f64;
        for j in paratensor::paraproduct::lattice_points(&f.depths(), Default::default()) {
            dev = dev.max(interp_corner_check(&f, &j)? / f.max_abs());
        }
        note(format!("interp corners d={d}"), dev);
    }

    // d = 2 terms against the explicit formulas built from the one-axis operators
    let heat = builtin_heat(1.0);
    let mut term_dev = 0.0f64;
    for seed in 0..10 {
        let f = random(vec![64, 64], 100 + seed).map(|v| 0.5 * v);
        for j in [
            ScaleTuple::new(vec![0, 0]),
            ScaleTuple::new(vec![2, 4]),
            ScaleTuple::new(vec![5, 3]),
        ] {
            let (j1, j2) = (j.as_slice()[0], j.as_slice()[1]);
            let p = average_op(&f, &j)?;
            let q12 = difference_op(&difference_op(&f, 0, j1)?, 1, j2)?;
            let q1p2 = difference_op(&average_axis(&f, 1, j2)?, 0, j1)?;
            let q2p1 = difference_op(&average_axis(&f, 0, j1)?, 1, j2)?;
            let first = heat.apply_deriv(1, &p)?.zip_map(&q12, |x, y| x * y)?;
            let second = heat
                .apply_deriv(2, &p)?
                .zip_map(&q1p2, |x, y| x * y)?
                .zip_map(&q2p1, |x, y| x * y)?;
            for t in partition_terms(&f, &heat, &j)? {
                let expect = if t.order() == 1 { &first } else { &second };
                term_dev = term_dev.max(t.value.max_abs_diff(expect)? / expect.max_abs().max(1e-300));
            }
        }
    }
    note("d=2 explicit terms, 10 inputs".into(), term_dev);

    // exact split on pipeline runs
    let sin = builtin_sin(1.0);
    for (dims, map) in [
        (vec![256, 256], &heat),
        (vec![64, 64, 64], &sin),
        (vec![16, 16, 16, 16], &heat),
    ] {
        let f = normalize_sup(&synth_field(&dims, 0.3, 0)?, 0.25);
        let dec = approximate_full(&f, map, &DecomposeOptions::default())?;
        note(format!("approx + residual {dims:?} {}", map.spec()), split_error(&dec));
    }
    let demo = kernel_demo(&KernelDemoConfig::default())?;
    for r in &demo.runs {
        note(format!("approx + residual kernel {}", r.kernel), r.split_error);
    }
    for center in [false, true] {
        let split = cz_split(
            &demo.distance,
            &heat,
            &ScaleTuple::new(vec![4, 4]),
            2,
            &LambdaSpec::Value { lambda: 1e-3 },
            center,
        )?;
        let diag = verify_conditions(&split, &split.mapped)?;
        note(
            format!("bad + good (centered = {center})"),
            diag.exact_sum_max_dev / split.mapped.max_abs(),
        );
    }

    Ok(Outcome {
        passed: worst <= EXACT_TOL,
        summary: format!("exact identities, worst relative deviation {worst:.2e} (tol {EXACT_TOL:e})"),
        details,
    })
}

fn criterion_2() -> Result<Outcome> {
    let mut details = Vec::new();
    let mut passed = true;
    let mut worst_ratio = (f64::INFINITY, f64::NEG_INFINITY);
    for dims in [vec![256, 256], vec![64, 64, 64]] {
        for (name, map) in [("heat(1)", builtin_heat(1.0)), ("sin(1)", builtin_sin(1.0))] {
            for alpha in [0.2, 0.3, 0.4] {
                let start = Instant::now();
                let f = normalize_sup(&synth_field(&dims, alpha, 0)?, 0.25);
                let dec = approximate_full(&f, &map, &DecomposeOptions::default())?;
                let am = decay_report(&dec.mapped)?.alpha_hat();
                let ar = decay_report(&dec.residual)?.alpha_hat();
                let (ok, line) = match (am, ar) {
                    (Some(am), Some(ar)) => {
                        let ratio = ar / am;
                        worst_ratio = (worst_ratio.0.min(ratio), worst_ratio.1.max(ratio));
                        let ok = (1.6..=2.4).contains(&ratio) && (am - alpha).abs() <= 0.07;
                        (
                            ok,
                            format!("alpha_hat(A(f)) {am:.3}  alpha_hat(residual) {ar:.3}  ratio {ratio:.3}"),
                        )
                    }
                    _ => (false, "degenerate decay fit".into()),
                };
                passed &= ok;
                details.push(format!(
                    "{} {dims:?} {name} alpha {alpha}: {line} ({:.1}s)",
                    if ok { "ok  " } else { "FAIL" },
                    start.elapsed().as_secs_f64()
                ));
            }
        }
    }
    Ok(Outcome {
        passed,
        summary: format!(
            "residual slope ratio in [1.6, 2.4] and alpha_hat(A(f)) within 0.07; observed ratios {:.3}..{:.3}",
            worst_ratio.0, worst_ratio.1
        ),
        details,
    })
}

fn criterion_3() -> Result<Outcome> {
    let mut details = Vec::new();
    let mut passed = true;
    let mut min_approx_2000 = f64::INFINITY;
    for seed in 0..5 {
        let demo = kernel_demo(&KernelDemoConfig {
            seed,
            ordering: Ordering::Pca1,
            ..Default::default()
        })?;
        for r in &demo.runs {
            let orig = &r.compare.row("original").unwrap().fractions;
            let approx = &r.compare.row("approx").unwrap().fractions;
            let resid = &r.compare.row("residual").unwrap().fractions;
            let dominate = (0..orig.len()).all(|i| approx[i] > orig[i] && resid[i] > orig[i]);
            let floor = r.kernel != "heat" || approx[0] >= 0.6;
            if r.kernel == "heat" {
                min_approx_2000 = min_approx_2000.min(approx[0]);
            }
            passed &= dominate && floor;
            let pct = |v: &[f64]| {
                v.iter()
                    .map(|x| format!("{:.0}", 100.0 * x))
                    .collect::<Vec<_>>()
                    .join("/")
            };
            details.push(format!(
                "{} seed {seed} {:<9} original {}  approx {}  residual {}",
                if dominate && floor { "ok  " } else { "FAIL" },
                r.kernel,
                pct(orig),
                pct(approx),
                pct(resid)
            ));
        }
    }
    Ok(Outcome {
        passed,
        summary: format!(
            "l1 capture ordering approx, residual > original at k = 2000/6000/10000 and approx(2000) >= 0.6; min heat approx(2000) {min_approx_2000:.3}"
        ),
        details,
    })
}

fn cz_line(label: &str, s: &CZSplit, a_of_f: &DyadicTensor) -> Result<(bool, String)> {
    let d = verify_conditions(s, a_of_f)?;
    let means_ok = !s.centered || d.box_mean_max_abs <= MEAN_TOL;
    let ok = d.exact_sum_ok && d.support_ok && d.chebyshev_ok && means_ok;
    Ok((
        ok,
        format!(
            "{} {label}: lambda {:.3e}, {} boxes, exact sum {:.1e}, support violations {}, |D|*lambda {:.3e} <= sum|term| {:.3e}, box means {:.1e} ({})",
            if ok { "ok  " } else { "FAIL" },
            s.lambda,
            s.bad_boxes.len(),
            d.exact_sum_max_dev,
            d.support_violations,
            d.bad_measure * s.lambda,
            d.term_l1,
            d.box_mean_max_abs,
            if s.centered { "asserted" } else { "reported" },
        ),
    ))
}

fn criterion_4() -> Result<Outcome> {
    let src = gen_points(512, 0, Role::Source);
    let tgt = gen_points(512, 0, Role::Target);
    let f = distance_matrix(&src, &tgt, Ordering::Pca1, default_dist_floor())?;
    let heat = builtin_heat(1.0);
    let j = ScaleTuple::new(vec![4, 4]);
    let alpha = decay_report(&f)?.alpha_hat().expect("nonconstant distance matrix");
    let mut details = vec![format!("alpha_hat of the distance matrix {alpha:.4}")];
    let mut passed = true;
    for center in [false, true] {
        let lam = LambdaSpec::Holder { alpha: Some(alpha) };
        let s = cz_split(&f, &heat, &j, 2, &lam, center)?;
        let (ok, line) = cz_line(&format!("lambda from alpha_hat, centered = {center}"), &s, &s.mapped)?;
        passed &= ok;
        details.push(line);
        // a level with a nonempty D_lambda: boxes whose mean |term| beats the global mean
        let busy = LambdaSpec::Value {
            lambda: s.term.l1_norm(),
        };
        let s = cz_split(&f, &heat, &j, 2, &busy, center)?;
        let (ok, line) = cz_line(&format!("lambda = mean |term|, centered = {center}"), &s, &s.mapped)?;
        passed &= ok && !s.bad_boxes.is_empty();
        details.push(line);
    }
    Ok(Outcome {
        passed,
        summary: "CZ exact sum, support containment, Chebyshev measure bound at j = (4,4), m = 2".into(),
        details,
    })
}

fn criterion_5() -> Result<Outcome> {
    let cfg = ConeDemoConfig::default();
    let demo = cone_demo(&cfg)?;
    let mut details = vec![format!(
        "dims {:?}, top-K {}, min scale {}, ring half-width {}",
        cfg.dims, cfg.top_k, demo.min_scale, cfg.ring_halfwidth
    )];
    let mut passed = split_error(&demo.decomposition) <= EXACT_TOL;
    for s in &demo.slices {
        let r = &s.row;
        let order = r.iou_approx > r.iou_mapped;
        let bracket = r.iou_original >= r.iou_approx && r.iou_approx >= 0.5 * r.iou_original;
        passed &= order && bracket;
        details.push(format!(
            "{} t[{}]: IoU f {:.3}  A(f) {:.3}  approx {:.3}  (approx > A(f): {order}, bracket: {bracket})",
            if order && bracket { "ok  " } else { "FAIL" },
            r.t_index,
            r.iou_original,
            r.iou_mapped,
            r.iou_approx
        ));
    }
    Ok(Outcome {
        passed,
        summary: "cone ring IoU: approx > A(f) and f >= approx >= f/2 at every slice".into(),
        details,
    })
}

fn criterion_6() -> Result<Outcome> {
    let render = || -> Result<String> {
        let demo = kernel_demo(&KernelDemoConfig::default())?;
        let tables: Vec<(&str, &_)> = demo.runs.iter().map(|r| (r.kernel.as_str(), &r.compare)).collect();
        let mut curves = Vec::new();
        for r in &demo.runs {
            for (row, c) in r.compare.rows.iter().zip(&r.compare.curves) {
                curves.push((r.kernel.as_str(), row.label.as_str(), c));
            }
        }
        Ok(format!(
            "{}{}{}",
            compare_table_csv(&tables),
            curve_csv(&curves, 20),
            decay_csv(&demo.distance_decay)
        ))
    };
    let first = render()?;
    let second = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .expect("thread pool")
        .install(render)?;
    let same = first.as_bytes() == second.as_bytes();
    Ok(Outcome {
        passed: same,
        summary: format!(
            "kernel-demo seed 0 CSV outputs byte-identical across runs ({} bytes)",
            first.len()
        ),
        details: Vec::new(),
    })
}

fn main() {
    let criteria: [(usize, fn() -> Result<Outcome>); 6] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (n, run) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(o) => {
                println!(
                    "[{}] criterion {n}: {} ({secs:.1}s)",
                    if o.passed { "PASS" } else { "FAIL" },
                    o.summary
                );
                for d in &o.details {
                    println!("      {d}");
                }
                if !o.passed {
                    failed.push(n);
                }
            }
            Err(e) => {
                println!("[FAIL] criterion {n}: error {e} ({secs:.1}s)");
                failed.push(n);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
