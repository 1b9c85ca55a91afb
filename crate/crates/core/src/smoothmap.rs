//! Outer maps `A` with analytic derivatives.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::DyadicTensor;

/// Derivative order available from the analytic builtins.
pub const BUILTIN_DMAX: usize = 8;

type UserFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Polynomial(Vec<f64>),
    Potential { tol: f64 },
    Heat { eps: f64 },
    Sin { beta: f64 },
    Numeric { f: UserFn },
}

#[derive(Clone)]
pub struct SmoothMap {
    name: String,
    spec: String,
    dmax: usize,
    kind: Kind,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothMap")
            .field("spec", &self.spec)
            .field("dmax", &self.dmax)
            .finish()
    }
}

pub fn builtin_potential() -> SmoothMap {
    builtin_potential_with_tol(1e-6)
}

pub fn builtin_potential_with_tol(tol: f64) -> SmoothMap {
    SmoothMap {
        name: "potential".into(),
        spec: format!("potential:tol={tol}"),
        dmax: BUILTIN_DMAX,
        kind: Kind::Potential { tol },
    }
}

pub fn builtin_heat(eps: f64) -> SmoothMap {
    SmoothMap {
        name: "heat".into(),
        spec: format!("heat:eps={eps}"),
        dmax: BUILTIN_DMAX,
        kind: Kind::Heat { eps },
    }
}

pub fn builtin_sin(beta: f64) -> SmoothMap {
    SmoothMap {
        name: "sin".into(),
        spec: format!("sin:beta={beta}"),
        dmax: BUILTIN_DMAX,
        kind: Kind::Sin { beta },
    }
}

pub fn identity() -> SmoothMap {
    SmoothMap {
        name: "identity".into(),
        spec: "identity".into(),
        dmax: BUILTIN_DMAX,
        kind: Kind::Polynomial(vec![0.0, 1.0]),
    }
}

pub fn affine(a: f64, b: f64) -> SmoothMap {
    SmoothMap {
        name: "affine".into(),
        spec: format!("affine:a={a},b={b}"),
        dmax: BUILTIN_DMAX,
        kind: Kind::Polynomial(vec![b, a]),
    }
}

/// `x -> sum_i c_i x^i`.
pub fn polynomial(coeffs: Vec<f64>) -> SmoothMap {
    let spec = coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| format!("c{i}={c}"))
        .collect::<Vec<_>>()
        .join(",");
    SmoothMap {
        name: "poly".into(),
        spec: format!("poly:{spec}"),
        dmax: BUILTIN_DMAX,
        kind: Kind::Polynomial(coeffs),
    }
}

fn falling(i: usize, m: usize) -> f64 {
    (0..m).map(|t| (i - t) as f64).product()
}

impl SmoothMap {
    /// Map with derivatives from central finite differences. Accuracy degrades
    /// quickly with the order; see [`is_numeric`](Self::is_numeric).
    pub fn from_fn(name: &str, dmax: usize, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            spec: format!("{name}:numeric"),
            dmax,
            kind: Kind::Numeric { f: Arc::new(f) },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Canonical spec string, parseable by `FromStr` for builtins.
    pub fn spec(&self) -> &str {
        &self.spec
    }

    pub fn dmax(&self) -> usize {
        self.dmax
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, Kind::Numeric { .. })
    }

    /// Lower edge of the guarded domain, if any.
    pub fn singular_below(&self) -> Option<f64> {
        match self.kind {
            Kind::Potential { tol } => Some(tol),
            _ => None,
        }
    }

    pub fn check_domain(&self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("{}: non-finite argument {x}", self.name)));
        }
        if let Some(tol) = self.singular_below() {
            if x <= tol {
                return Err(Error::Domain(format!(
                    "{}: argument {x} at or below tol_singular {tol}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.deriv(0, x)
    }

    /// `A^{(m)}(x)`; `m = 0` is the map itself. No domain check.
    pub fn deriv(&self, m: usize, x: f64) -> f64 {
        match &self.kind {
            Kind::Polynomial(c) => {
                let mut acc = 0.0;
                for i in (m..c.len()).rev() {
                    acc = acc * x + c[i] * falling(i, m);
                }
                acc
            }
            Kind::Potential { .. } => {
                let fact: f64 = (1..=m).map(|t| t as f64).product();
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                sign * fact * x.powi(-(m as i32) - 1)
            }
            Kind::Heat { eps } => (-1.0 / eps).powi(m as i32) * (-x / eps).exp(),
            Kind::Sin { beta } => {
                let (s, c) = (beta * x).sin_cos();
                let b = beta.powi(m as i32);
                match m % 4 {
                    0 => b * s,
                    1 => b * c,
                    2 => -b * s,
                    _ => -b * c,
                }
            }
            Kind::Numeric { f } => numeric_deriv(f.as_ref(), m, x),
        }
    }

    /// Fills `out[m]` with `A^{(m)}(x)` for `m = 0..out.len()`.
    pub fn derivs(&self, x: f64, out: &mut [f64]) {
        match &self.kind {
            Kind::Heat { eps } => {
                let mut v = (-x / eps).exp();
                for o in out.iter_mut() {
                    *o = v;
                    v *= -1.0 / eps;
                }
            }
            Kind::Sin { beta } => {
                let (s, c) = (beta * x).sin_cos();
                let mut b = 1.0;
                for (m, o) in out.iter_mut().enumerate() {
                    *o = b * [s, c, -s, -c][m % 4];
                    b *= beta;
                }
            }
            Kind::Potential { .. } => {
                let inv = 1.0 / x;
                let mut v = inv;
                for (m, o) in out.iter_mut().enumerate() {
                    *o = v;
                    v *= -((m + 1) as f64) * inv;
                }
            }
            _ => {
                for (m, o) in out.iter_mut().enumerate() {
                    *o = self.deriv(m, x);
                }
            }
        }
    }

    /// Pointwise `A^{(m)}` over a tensor with domain checking.
    pub fn apply_deriv(&self, m: usize, f: &DyadicTensor) -> Result<DyadicTensor> {
        if m > self.dmax {
            return Err(Error::Config(format!(
                "{} provides derivatives up to order {}, need {m}",
                self.name, self.dmax
            )));
        }
        for &x in f.data() {
            self.check_domain(x)?;
        }
        Ok(f.map(|x| self.deriv(m, x)))
    }

    pub fn apply(&self, f: &DyadicTensor) -> Result<DyadicTensor> {
        self.apply_deriv(0, f)
    }
}

fn numeric_deriv(f: &(dyn Fn(f64) -> f64 + Send + Sync), m: usize, x: f64) -> f64 {
    if m == 0 {
        return f(x);
    }
    // step balancing truncation O(h^2) against rounding O(eps / h^m)
    let h = f64::EPSILON.powf(1.0 / (m as f64 + 2.0)) * x.abs().max(1.0);
    let mut acc = 0.0;
    let mut binom = 1.0;
    for i in 0..=m {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * f(x + (m as f64 / 2.0 - i as f64) * h);
        binom = binom * (m - i) as f64 / (i + 1) as f64;
    }
    acc / h.powi(m as i32)
}

fn parse_params(spec: &str, body: &str) -> Result<Vec<(String, f64)>> {
    if body.is_empty() {
        return Ok(Vec::new());
    }
    body.split(',')
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value in map spec {spec:?}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad number {v:?} in map spec {spec:?}")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

impl FromStr for SmoothMap {
    type Err = Error;

    /// `heat:eps=1`, `potential`, `potential:tol=1e-6`, `sin:beta=1`, `identity`,
    /// `affine:a=2,b=1`, `poly:c0=1,c3=2`.
    fn from_str(spec: &str) -> Result<Self> {
        let (name, body) = spec.split_once(':').unwrap_or((spec, ""));
        let params = parse_params(spec, body)?;
        let get = |key: &str, default: Option<f64>| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| k == key)
                .map(|p| p.1)
                .or(default)
                .ok_or_else(|| Error::Config(format!("map spec {spec:?} needs {key}=")))
        };
        let allowed: &[&str] = match name {
            "heat" => &["eps"],
            "potential" => &["tol"],
            "sin" => &["beta"],
            "affine" => &["a", "b"],
            "identity" => &[],
            "poly" => &[],
            _ => return Err(Error::Config(format!("unknown map {name:?}"))),
        };
        if name != "poly" {
            if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
                return Err(Error::Config(format!("map {name:?} has no parameter {k:?}")));
            }
        }
        let map = match name {
            "heat" => {
                let eps = get("eps", Some(1.0))?;
                if eps <= 0.0 {
                    return Err(Error::Config(format!("heat needs eps > 0, got {eps}")));
                }
                builtin_heat(eps)
            }
            "potential" => builtin_potential_with_tol(get("tol", Some(1e-6))?),
            "sin" => builtin_sin(get("beta", Some(1.0))?),
            "affine" => affine(get("a", Some(1.0))?, get("b", Some(0.0))?),
            "identity" => identity(),
            _ => {
                let mut coeffs = Vec::new();
                for (k, v) in &params {
                    let i: usize = k
                        .strip_prefix('c')
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| Error::Config(format!("bad polynomial key {k:?}")))?;
                    if coeffs.len() <= i {
                        coeffs.resize(i + 1, 0.0);
                    }
                    coeffs[i] = *v;
                }
                polynomial(coeffs)
            }
        };
        Ok(map)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderCheck {
    pub order: usize,
    pub max_rel_dev: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivativeReport {
    pub orders: Vec<OrderCheck>,
    /// Probes whose stencil reaches the guarded singular region; excluded from the orders.
    pub singular_probes: Vec<f64>,
}

impl DerivativeReport {
    pub fn passed(&self) -> bool {
        self.orders.iter().all(|o| o.passed)
    }
}

pub const DERIV_FAIL_THRESHOLD: f64 = 1e-4;

/// Compares `deriv(m)` with the central difference of `deriv(m-1)` for
/// `m = 1..=min(dmax, 4)`. Deviation is relative with a unit floor on the denominator.
pub fn check_derivatives(a: &SmoothMap, probes: &[f64], h: f64) -> DerivativeReport {
    let mut singular = Vec::new();
    let usable: Vec<f64> = probes
        .iter()
        .copied()
        .filter(|&x| match a.singular_below() {
            Some(tol) if x - h <= tol => {
                singular.push(x);
                false
            }
            _ => true,
        })
        .collect();
    let orders = (1..=a.dmax().min(crate::grid::MAX_RANK))
        .map(|m| {
            let max_rel_dev = usable.iter().fold(0.0f64, |acc, &x| {
                let fd = (a.deriv(m - 1, x + h) - a.deriv(m - 1, x - h)) / (2.0 * h);
                let an = a.deriv(m, x);
                acc.max((fd - an).abs() / an.abs().max(1.0))
            });
            OrderCheck {
                order: m,
                max_rel_dev,
                passed: max_rel_dev <= DERIV_FAIL_THRESHOLD,
            }
        })
        .collect();
    DerivativeReport {
        orders,
        singular_probes: singular,
    }
}
