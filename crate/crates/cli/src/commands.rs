use std::path::Path;

use paratensor::czd::{cz_split, verify_conditions, LambdaSpec};
use paratensor::datasets::{default_dist_floor, distance_matrix, gen_points, Role};
use paratensor::dtf::{read_dtf, write_dtf};
use paratensor::experiments::{cone_demo, kernel_demo, split_error, ConeDemoConfig, KernelDemoConfig};
use paratensor::grid::BoxIndex;
use paratensor::paraproduct::{approximate, approximate_full, DecomposeOptions, PartitionTerm};
use paratensor::regularity::{decay_report, normalize_sup, synth_field};
use paratensor::report::{compare_table_csv, curve_csv, decay_csv, iou_csv, Gray};
use paratensor::{DyadicTensor, ScaleTuple};
use serde_json::json;

use crate::args::{ConeDemoArgs, CzSplitArgs, DecomposeArgs, KernelDemoArgs, RegularityArgs, SynthArgs};
use crate::output::{ensure_dir, sidecar, write_json, write_text, CliError, CliResult, RunConfig};

const SPLIT_TOL: f64 = 1e-12;

fn check_split(label: &str, err: f64) -> CliResult<()> {
    if err > SPLIT_TOL {
        return Err(CliError::Check(format!(
            "{label}: approx + residual deviates from A(f) by {err:e} (relative)"
        )));
    }
    Ok(())
}

fn term_name(t: &PartitionTerm) -> String {
    let scale: Vec<String> = t.scale.as_slice().iter().map(|j| j.to_string()).collect();
    let blocks: Vec<String> = t
        .partition
        .iter()
        .map(|b| b.iter().map(|a| a.to_string()).collect::<String>())
        .collect();
    format!("term_j{}_b{}", scale.join("-"), blocks.join("-"))
}

pub fn decompose(a: &DecomposeArgs) -> CliResult<()> {
    let f = read_dtf(&a.input)?;
    let levels = a.scales.clone().unwrap_or_else(|| ScaleTuple::new(f.depths()));
    if levels.rank() != f.rank() {
        return Err(CliError::Usage(format!(
            "--scales has {} entries for a rank-{} input",
            levels.rank(),
            f.rank()
        )));
    }
    let opts = DecomposeOptions {
        center_means: a.center_means,
        retain_terms: a.retain_terms,
        lattice: a.lattice,
        max_order: a.max_order,
    };
    let run = RunConfig {
        subcommand: "decompose",
        input: Some(a.input.clone()),
        output: a.output_dir.clone(),
        map: Some(a.map.spec().to_string()),
        scales: Some(levels.as_slice().to_vec()),
        center_means: a.center_means,
        retain_terms: a.retain_terms,
        extra: json!({ "lattice": a.lattice, "max_order": a.max_order }),
        ..Default::default()
    };
    let dec = approximate(&f, &a.map, &levels, &opts)?;
    let err = split_error(&dec);

    ensure_dir(&a.output_dir)?;
    write_dtf(&a.output_dir.join("approx"), &dec.approx)?;
    write_dtf(&a.output_dir.join("residual"), &dec.residual)?;
    let mut term_files = Vec::new();
    if let Some(terms) = &dec.terms {
        let dir = a.output_dir.join("terms");
        ensure_dir(&dir)?;
        for t in terms {
            let name = term_name(t);
            write_dtf(&dir.join(&name), &t.value)?;
            term_files.push(name);
        }
    }
    write_json(
        &a.output_dir.join("metadata.json"),
        &json!({
            "run": run,
            "decomposition": dec.meta,
            "split_error": err,
            "term_files": term_files,
        }),
    )?;
    for n in &dec.meta.term_norms {
        let orders: Vec<String> = n.order_l1.iter().map(|v| format!("{v:.6e}")).collect();
        println!(
            "scale {} total {:.6e} by order [{}]",
            ScaleTuple::new(n.scale.clone()),
            n.total_l1,
            orders.join(", ")
        );
    }
    println!("split error {err:e}");
    check_split("decompose", err)
}

fn heatmap(path: &Path, t: &DyadicTensor) -> CliResult<()> {
    Ok(Gray::from_tensor(t)?.write(path)?)
}

pub fn kernel_demo_cmd(a: &KernelDemoArgs) -> CliResult<()> {
    let cfg = KernelDemoConfig {
        points: a.points,
        seed: a.seed,
        ordering: a.ordering,
        eps: a.eps,
        ks: a.ks.clone(),
        floor: a.floor.unwrap_or_else(default_dist_floor),
        center_means: a.center_means,
    };
    if !a.points.is_power_of_two() {
        return Err(CliError::Usage(format!("--points {} is not a power of two", a.points)));
    }
    let run = RunConfig {
        subcommand: "kernel-demo",
        output: a.output_dir.clone(),
        map: Some(format!("heat:eps={};potential", a.eps)),
        seed: Some(a.seed),
        ordering: Some(a.ordering.to_string()),
        ks: Some(a.ks.clone()),
        center_means: a.center_means,
        extra: json!({ "points": cfg.points, "floor": cfg.floor }),
        ..Default::default()
    };
    let demo = kernel_demo(&cfg)?;

    let dir = &a.output_dir;
    ensure_dir(dir)?;
    let tables: Vec<(&str, &_)> = demo.runs.iter().map(|r| (r.kernel.as_str(), &r.compare)).collect();
    write_text(&dir.join("table.csv"), &compare_table_csv(&tables))?;
    let mut curves = Vec::new();
    for r in &demo.runs {
        for (row, c) in r.compare.rows.iter().zip(&r.compare.curves) {
            curves.push((r.kernel.as_str(), row.label.as_str(), c));
        }
    }
    write_text(&dir.join("curves.csv"), &curve_csv(&curves, 20))?;
    write_text(&dir.join("distance_decay.csv"), &decay_csv(&demo.distance_decay))?;
    heatmap(&dir.join("distance.pgm"), &demo.distance)?;
    let mut runs_meta = Vec::new();
    for r in &demo.runs {
        let d = &r.decomposition;
        heatmap(&dir.join(format!("{}_original.pgm", r.kernel)), &d.mapped)?;
        heatmap(&dir.join(format!("{}_approx.pgm", r.kernel)), &d.approx)?;
        heatmap(&dir.join(format!("{}_residual.pgm", r.kernel)), &d.residual)?;
        runs_meta.push(json!({
            "kernel": r.kernel,
            "map": r.map,
            "split_error": r.split_error,
            "rows": r.compare.rows,
            "mapped_alpha_hat": decay_report(&d.mapped)?.alpha_hat(),
            "residual_alpha_hat": decay_report(&d.residual)?.alpha_hat(),
        }));
        println!("{}: split error {:e}", r.kernel, r.split_error);
        for row in &r.compare.rows {
            let cells: Vec<String> = cfg
                .ks
                .iter()
                .zip(&row.fractions)
                .map(|(k, v)| format!("k={k} {:.1}%", 100.0 * v))
                .collect();
            println!("  {:<9} {}", row.label, cells.join("  "));
        }
    }
    write_json(
        &dir.join("metadata.json"),
        &json!({
            "run": run,
            "distance_alpha_hat": demo.distance_decay.alpha_hat(),
            "runs": runs_meta,
        }),
    )?;
    for r in &demo.runs {
        check_split(&r.kernel, r.split_error)?;
    }
    Ok(())
}

fn outlined(slice: &DyadicTensor, boxes: &[paratensor::detect::RankedBox]) -> CliResult<Gray> {
    let mut g = Gray::from_tensor(slice)?;
    let depths = slice.depths();
    for b in boxes {
        let r = b.bx.sample_ranges(&depths)?;
        g.outline(r[0].clone(), r[1].clone(), 255);
    }
    Ok(g)
}

pub fn cone_demo_cmd(a: &ConeDemoArgs) -> CliResult<()> {
    let dims: [usize; 3] = a
        .dims
        .clone()
        .try_into()
        .map_err(|_| CliError::Usage(format!("--dims needs three sizes, got {:?}", a.dims)))?;
    let cfg = ConeDemoConfig {
        dims,
        alpha: a.alpha,
        top_k: a.top_k,
        slices: a.slices.clone(),
        min_scale: a.min_scale,
        ring_halfwidth: a.ring_halfwidth,
    };
    let run = RunConfig {
        subcommand: "cone-demo",
        output: a.output_dir.clone(),
        map: Some("sin:beta=1".into()),
        extra: serde_json::to_value(&cfg).expect("serializable config"),
        ..Default::default()
    };
    let demo = cone_demo(&cfg)?;
    let err = split_error(&demo.decomposition);

    let dir = &a.output_dir;
    ensure_dir(dir)?;
    let rows: Vec<_> = demo.slices.iter().map(|s| s.row.clone()).collect();
    write_text(&dir.join("iou.csv"), &iou_csv(&rows))?;
    let dec = &demo.decomposition;
    for s in &demo.slices {
        let ti = s.row.t_index;
        for (label, vol, boxes) in [
            ("original", &demo.volume, &s.original),
            ("distorted", &dec.mapped, &s.mapped),
            ("approx", &dec.approx, &s.approx),
        ] {
            let slice = paratensor::datasets::time_slice(vol, ti)?;
            outlined(&slice, boxes)?.write(&dir.join(format!("slice_t{ti}_{label}.pgm")))?;
        }
        println!(
            "t[{ti}] = {:.4}: IoU original {:.3}  distorted {:.3}  approx {:.3}",
            s.row.t, s.row.iou_original, s.row.iou_mapped, s.row.iou_approx
        );
    }
    write_json(
        &dir.join("metadata.json"),
        &json!({ "run": run, "min_scale": demo.min_scale, "split_error": err, "rows": rows }),
    )?;
    check_split("cone-demo", err)
}

pub fn cz_split_cmd(a: &CzSplitArgs) -> CliResult<()> {
    let f = match &a.input {
        Some(p) => read_dtf(p)?,
        None => {
            if !a.points.is_power_of_two() {
                return Err(CliError::Usage(format!("--points {} is not a power of two", a.points)));
            }
            let src = gen_points(a.points, a.seed, Role::Source);
            let tgt = gen_points(a.points, a.seed, Role::Target);
            distance_matrix(&src, &tgt, a.ordering, default_dist_floor())?
        }
    };
    if a.scale.rank() != f.rank() {
        return Err(CliError::Usage(format!(
            "--scale has {} entries for a rank-{} input",
            a.scale.rank(),
            f.rank()
        )));
    }
    let (lambda, alpha_estimate) = match a.lambda {
        LambdaSpec::Holder { alpha: None } => {
            let alpha = decay_report(&f)?
                .alpha_hat()
                .ok_or_else(|| CliError::Usage("input is constant; no exponent to estimate".into()))?;
            (a.lambda.with_alpha(alpha), Some(alpha))
        }
        ref other => (other.clone(), None),
    };
    let run = RunConfig {
        subcommand: "cz-split",
        input: a.input.clone(),
        output: a.output_dir.clone(),
        map: Some(a.map.spec().to_string()),
        scales: Some(a.scale.as_slice().to_vec()),
        lambda: Some(serde_json::to_string(&a.lambda).expect("serializable lambda")),
        seed: a.input.is_none().then_some(a.seed),
        ordering: a.input.is_none().then(|| a.ordering.to_string()),
        center_means: a.center_means,
        extra: json!({ "order": a.order, "points": a.input.is_none().then_some(a.points) }),
        ..Default::default()
    };
    let split = cz_split(&f, &a.map, &a.scale, a.order, &lambda, a.center_means)?;
    let diag = verify_conditions(&split, &split.mapped)?;

    ensure_dir(&a.output_dir)?;
    write_dtf(&a.output_dir.join("bad"), &split.bad)?;
    write_dtf(&a.output_dir.join("good"), &split.good)?;
    let boxes: Vec<&BoxIndex> = split.bad_boxes.iter().collect();
    write_json(
        &a.output_dir.join("diagnostics.json"),
        &json!({
            "run": run,
            "lambda": split.lambda,
            "alpha_estimate": alpha_estimate,
            "scale": split.scale,
            "order": split.order,
            "boxes": boxes,
            "diagnostics": diag,
        }),
    )?;
    println!(
        "lambda {:.6e}, {} bad boxes, measure {:.6}",
        split.lambda,
        split.bad_boxes.len(),
        diag.bad_measure
    );
    println!(
        "exact sum {} ({:e}), support {}, chebyshev {}, box means {:e}{}",
        ok(diag.exact_sum_ok),
        diag.exact_sum_max_dev,
        ok(diag.support_ok),
        ok(diag.chebyshev_ok),
        diag.box_mean_max_abs,
        if diag.box_means_asserted {
            format!(" {}", ok(diag.box_means_ok))
        } else {
            " (not asserted)".into()
        }
    );
    if !diag.passed {
        return Err(CliError::Check("cz-split conditions".into()));
    }
    Ok(())
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

pub fn regularity_cmd(a: &RegularityArgs) -> CliResult<()> {
    let f = read_dtf(&a.input)?;
    let run = RunConfig {
        subcommand: "regularity",
        input: Some(a.input.clone()),
        output: a.output.clone(),
        map: a.ratio_map.as_ref().map(|m| m.spec().to_string()),
        center_means: a.center_means,
        ..Default::default()
    };
    let report = decay_report(&f)?;
    if let Some(parent) = a.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_text(&a.output, &decay_csv(&report))?;
    match report.alpha_hat() {
        Some(alpha) => println!("alpha_hat {alpha:.4}"),
        None => println!("degenerate: every mixed coefficient is zero"),
    }
    let mut ratio = None;
    if let Some(map) = &a.ratio_map {
        let opts = DecomposeOptions {
            center_means: a.center_means,
            ..Default::default()
        };
        let dec = approximate_full(&f, map, &opts)?;
        let mapped = decay_report(&dec.mapped)?;
        let residual = decay_report(&dec.residual)?;
        let (Some(am), Some(ar)) = (mapped.alpha_hat(), residual.alpha_hat()) else {
            return Err(CliError::Usage("mapped or residual tensor is degenerate".into()));
        };
        println!("alpha_hat A(f) {am:.4}  residual {ar:.4}  ratio {:.4}", ar / am);
        ratio = Some(json!({ "mapped": am, "residual": ar, "ratio": ar / am, "split_error": split_error(&dec) }));
    }
    write_json(
        &sidecar(&a.output),
        &json!({ "run": run, "report": report, "ratio": ratio }),
    )
}

pub fn synth_cmd(a: &SynthArgs) -> CliResult<()> {
    let run = RunConfig {
        subcommand: "synth",
        output: a.output.clone(),
        seed: Some(a.seed),
        extra: json!({ "dims": a.dims, "alpha": a.alpha, "normalize": a.normalize }),
        ..Default::default()
    };
    let mut f = synth_field(&a.dims, a.alpha, a.seed)?;
    if let Some(amp) = a.normalize {
        f = normalize_sup(&f, amp);
    }
    if let Some(parent) = a.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_dtf(&a.output, &f)?;
    write_json(&sidecar(&a.output), &json!({ "run": run, "sup": f.max_abs() }))
}
