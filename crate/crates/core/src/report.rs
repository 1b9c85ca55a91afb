//! CSV and PGM artifacts with matching readers.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compress::{CompareReport, EntropyCurve};
use crate::error::{Error, Result};
use crate::grid::DyadicTensor;
use crate::regularity::{DecayReport, ShellStats};

fn csv_err(path: &str, e: impl std::fmt::Display) -> Error {
    Error::format(path, e.to_string())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf8 csv")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFooter {
    pub slope: Option<f64>,
    pub alpha_hat: Option<f64>,
    pub r2: Option<f64>,
    pub degenerate: bool,
}

/// `shell,max_abs,q50,q90` rows followed by a `# {json}` footer line.
pub fn decay_csv(r: &DecayReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["shell", "max_abs", "q50", "q90"]).unwrap();
    for s in &r.shells {
        w.write_record([
            s.shell.to_string(),
            s.max_abs.to_string(),
            s.q50.to_string(),
            s.q90.to_string(),
        ])
        .unwrap();
    }
    let footer = DecayFooter {
        slope: r.fit.as_ref().map(|f| f.slope),
        alpha_hat: r.fit.as_ref().map(|f| f.alpha_hat),
        r2: r.fit.as_ref().map(|f| f.r2),
        degenerate: r.degenerate,
    };
    let mut out = finish(w);
    out.push_str("# ");
    out.push_str(&serde_json::to_string(&footer).unwrap());
    out.push('\n');
    out
}

pub fn parse_decay_csv(text: &str) -> Result<(Vec<ShellStats>, DecayFooter)> {
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut shells = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| csv_err("decay csv", e))?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| csv_err("decay csv", format!("bad field {i} in {rec:?}")))
        };
        shells.push(ShellStats {
            shell: num(0)? as usize,
            count: 0,
            max_abs: num(1)?,
            q50: num(2)?,
            q90: num(3)?,
        });
    }
    let footer_line = text
        .lines()
        .rev()
        .find_map(|l| l.strip_prefix("# "))
        .ok_or_else(|| csv_err("decay csv", "missing footer"))?;
    let footer = serde_json::from_str(footer_line).map_err(|e| csv_err("decay csv", e))?;
    Ok((shells, footer))
}

/// One row per `(kernel, series)`, one column per `k`.
pub fn compare_table_csv(runs: &[(&str, &CompareReport)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some((_, first)) = runs.first() {
        let mut header = vec!["kernel".to_string(), "series".to_string()];
        header.extend(first.ks.iter().map(|k| format!("k={k}")));
        w.write_record(&header).unwrap();
    }
    for (kernel, rep) in runs {
        for row in &rep.rows {
            let mut rec = vec![kernel.to_string(), row.label.clone()];
            rec.extend(row.fractions.iter().map(|f| f.to_string()));
            w.write_record(&rec).unwrap();
        }
    }
    finish(w)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub kernel: String,
    pub series: String,
    pub fractions: Vec<f64>,
}

pub fn parse_compare_table(text: &str) -> Result<(Vec<usize>, Vec<TableRow>)> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| csv_err("table csv", e))?.clone();
    let ks = header
        .iter()
        .skip(2)
        .map(|h| {
            h.strip_prefix("k=")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| csv_err("table csv", format!("bad column {h:?}")))
        })
        .collect::<Result<Vec<usize>>>()?;
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| csv_err("table csv", e))?;
        let fractions = rec
            .iter()
            .skip(2)
            .map(|v| v.parse().map_err(|_| csv_err("table csv", format!("bad value {v:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(TableRow {
            kernel: rec[0].to_string(),
            series: rec[1].to_string(),
            fractions,
        });
    }
    Ok((ks, rows))
}

/// Ranks 1, 2, … sampled log-uniformly (about `per_decade` per decade), always including the last.
pub fn log_ranks(n: usize, per_decade: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let step = 10f64.powf(1.0 / per_decade as f64);
    let mut x = 1.0f64;
    while (x as usize) <= n {
        let r = x as usize;
        if out.last() != Some(&r) {
            out.push(r);
        }
        x *= step;
    }
    if out.last() != Some(&n) && n > 0 {
        out.push(n);
    }
    out
}

/// `kernel,series,rank,abs_coef,cum_fraction` at log-spaced ranks.
pub fn curve_csv(curves: &[(&str, &str, &EntropyCurve)], per_decade: usize) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kernel", "series", "rank", "abs_coef", "cum_fraction"])
        .unwrap();
    for (kernel, series, c) in curves {
        for r in log_ranks(c.sorted_abs.len(), per_decade) {
            w.write_record([
                kernel.to_string(),
                series.to_string(),
                r.to_string(),
                c.sorted_abs[r - 1].to_string(),
                c.cumulative[r - 1].to_string(),
            ])
            .unwrap();
        }
    }
    finish(w)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IouRow {
    pub t_index: usize,
    pub t: f64,
    pub iou_original: f64,
    pub iou_mapped: f64,
    pub iou_approx: f64,
}

pub fn iou_csv(rows: &[IouRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).unwrap();
    }
    finish(w)
}

pub fn parse_iou_csv(text: &str) -> Result<Vec<IouRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(|e| csv_err("iou csv", e)))
        .collect()
}

/// Binary 8-bit PGM.
#[derive(Clone, Debug, PartialEq)]
pub struct Gray {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Gray {
    /// Linear min-max map of a 2D tensor; rows are the first axis.
    pub fn from_tensor(t: &DyadicTensor) -> Result<Self> {
        if t.rank() != 2 {
            return Err(Error::Shape(format!("heatmap needs a 2D tensor, got {:?}", t.dims())));
        }
        let (lo, hi) = t
            .data()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        let pixels = t
            .data()
            .iter()
            .map(|&v| (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        Ok(Self {
            width: t.dims()[1],
            height: t.dims()[0],
            pixels,
        })
    }

    /// Draws the outline of rows `r0..r1`, columns `c0..c1`.
    pub fn outline(&mut self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>, value: u8) {
        for r in rows.clone() {
            for c in [cols.start, cols.end - 1] {
                self.pixels[r * self.width + c] = value;
            }
        }
        for c in cols {
            for r in [rows.start, rows.end - 1] {
                self.pixels[r * self.width + c] = value;
            }
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::format("pgm", m);
        // header: magic, width, height, maxval separated by whitespace, then one byte
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header"))?);
        }
        if fields[0] != "P5" || fields[3] != "255" {
            return Err(bad("only 8-bit P5 is supported"));
        }
        let width: usize = fields[1].parse().map_err(|_| bad("width"))?;
        let height: usize = fields[2].parse().map_err(|_| bad("height"))?;
        let body = &bytes[pos + 1..];
        if body.len() != width * height {
            return Err(bad("pixel count does not match header"));
        }
        Ok(Self {
            width,
            height,
            pixels: body.to_vec(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|e| match e {
            Error::Format { msg, .. } => Error::format(path, msg),
            other => other,
        })
    }
}
