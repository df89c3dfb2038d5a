//! Numerical evaluators for uncertainty-principle hypotheses: truncated
//! weighted integrals (Beurling, Gelfand-Shilov), Gaussian decay fits
//! (Hardy), Nazarov bound assembly and cross-section sweeps.
//!
//! Evaluators return `ln |W(lambda)|` so that fast-decaying functions times
//! fast-growing weights stay representable.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use gauss_quad::GaussLegendre;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{MtfrError, Result};
use crate::gaussian::GeneralizedGaussian;
use crate::grid::{Axis, SampledField};
use crate::linalg::{inverse, RMat, RVec};

/// Weight functions multiplying `|W|` in truncated integrals.
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    One,
    /// `exp(pi |lambda.M lambda|) / (1 + |lambda|)^N`.
    Beurling { m: RMat, n: f64 },
    /// `exp(pi alpha |Omega^{-1} lambda|^2 / 2)`.
    Gaussian { omega_inv: RMat, alpha: f64 },
    /// `exp((pi/p) alpha^p |x|_p^p)` on the first `d` coordinates.
    PositionPower { d: usize, p: f64, alpha: f64 },
    /// `exp((pi/q) beta^q |w|_q^q)` on the last `d` coordinates.
    FrequencyPower { d: usize, q: f64, beta: f64 },
}

impl Weight {
    pub fn ln_eval(&self, x: &[f64]) -> f64 {
        match self {
            Weight::One => 0.0,
            Weight::Beurling { m, n } => {
                let k = x.len();
                let mut q = 0.0;
                for i in 0..k {
                    for j in 0..k {
                        q += x[i] * m[(i, j)] * x[j];
                    }
                }
                let r = norm(x);
                PI * q.abs() - n * (1.0 + r).ln()
            }
            Weight::Gaussian { omega_inv, alpha } => {
                let y = omega_inv * RVec::from_column_slice(x);
                PI * alpha * y.norm_squared() / 2.0
            }
            Weight::PositionPower { d, p, alpha } => {
                let s: f64 = x[..*d].iter().map(|t| t.abs().powf(*p)).sum();
                PI / p * alpha.powf(*p) * s
            }
            Weight::FrequencyPower { d, q, beta } => {
                let s: f64 = x[x.len() - d..].iter().map(|t| t.abs().powf(*q)).sum();
                PI / q * beta.powf(*q) * s
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.ln_eval(x).exp()
    }

    /// `M = Omega^{-t} (1/2) ((0, I), (I, 0)) Omega^{-1}`.
    pub fn beurling_default(omega: &RMat, n: f64) -> Result<Self> {
        let d2 = omega.nrows();
        let d = d2 / 2;
        let oi = inverse(omega, 1e-14)?;
        let mut anti = RMat::zeros(d2, d2);
        for i in 0..d {
            anti[(i, d + i)] = 0.5;
            anti[(d + i, i)] = 0.5;
        }
        Ok(Weight::Beurling { m: oi.transpose() * anti * &oi, n })
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|t| t * t).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConvergentLooking,
    DivergentLooking,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub radius: f64,
    pub value: f64,
    /// `I(R_j) / I(R_{j-1})`, absent for the first radius.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpReport {
    pub condition: String,
    pub parameters: BTreeMap<String, Value>,
    pub sweep: Vec<SweepPoint>,
    pub verdict: Verdict,
    pub rule: String,
    pub notes: Vec<String>,
}

/// Trend thresholds for sweep verdicts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerdictRule {
    pub growth_tol: f64,
    pub flat_tol: f64,
}

impl Default for VerdictRule {
    fn default() -> Self {
        Self { growth_tol: 0.2, flat_tol: 0.05 }
    }
}

impl VerdictRule {
    pub fn describe(&self) -> String {
        format!(
            "divergent-looking if the last three ratios I(R_j+1)/I(R_j) are >= {}; convergent-looking if the last ratio is <= {} or all values vanish; inconclusive otherwise",
            1.0 + self.growth_tol,
            1.0 + self.flat_tol
        )
    }

    pub fn decide(&self, sweep: &[SweepPoint]) -> Verdict {
        if sweep.iter().all(|p| p.value == 0.0) {
            return Verdict::ConvergentLooking;
        }
        let ratios: Vec<f64> = sweep.iter().filter_map(|p| p.ratio).collect();
        if ratios.len() >= 3 && ratios[ratios.len() - 3..].iter().all(|&r| r >= 1.0 + self.growth_tol) {
            return Verdict::DivergentLooking;
        }
        match ratios.last() {
            Some(&r) if r <= 1.0 + self.flat_tol => Verdict::ConvergentLooking,
            _ => Verdict::Inconclusive,
        }
    }
}

pub fn sweep_from_values(radii: &[f64], values: &[f64]) -> Vec<SweepPoint> {
    radii
        .iter()
        .zip(values)
        .enumerate()
        .map(|(j, (&radius, &value))| SweepPoint {
            radius,
            value,
            ratio: if j == 0 {
                None
            } else if values[j - 1] > 0.0 {
                Some(value / values[j - 1])
            } else if value > 0.0 {
                Some(f64::INFINITY)
            } else {
                Some(1.0)
            },
        })
        .collect()
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() || radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MtfrError::InvalidInput(
            "radii must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Midpoint sums of `exp(ln_f + ln_weight)` over the balls `|lambda| <= R_j`
/// with cells of side about `h`.
pub fn ball_integrals<F>(ln_f: &F, dim: usize, weight: &Weight, radii: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_radii(radii)?;
    let rmax = *radii.last().unwrap();
    let m = ((2.0 * rmax / h).ceil() as usize).max(2);
    let step = 2.0 * rmax / m as f64;
    let cells = (m as f64).powi(dim as i32);
    if cells > 4e8 {
        return Err(MtfrError::GridTooLarge { requested: cells as usize, limit: 400_000_000 });
    }
    let slab = m.pow(dim as u32 - 1);
    let nb = radii.len();
    let partial: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|first| {
            let mut bins = vec![0.0; nb];
            let mut x = vec![0.0; dim];
            x[0] = -rmax + (first as f64 + 0.5) * step;
            for rest in 0..slab {
                let mut r = rest;
                for k in (1..dim).rev() {
                    x[k] = -rmax + ((r % m) as f64 + 0.5) * step;
                    r /= m;
                }
                let rad = norm(&x);
                if rad > rmax {
                    continue;
                }
                let bin = radii.iter().position(|&rr| rad <= rr).unwrap();
                let v = (ln_f(&x) + weight.ln_eval(&x)).exp();
                bins[bin] += v;
            }
            bins
        })
        .collect();
    let vol = step.powi(dim as i32);
    let mut out = vec![0.0; nb];
    for bins in &partial {
        for (o, b) in out.iter_mut().zip(bins) {
            *o += b;
        }
    }
    let mut acc = 0.0;
    for o in out.iter_mut() {
        acc += *o * vol;
        *o = acc;
    }
    Ok(out)
}

/// Default cell size keeping the number of cells below about `2e7`.
pub fn default_step(dim: usize, rmax: f64) -> f64 {
    let budget = 2e7f64.powf(1.0 / dim as f64);
    (2.0 * rmax / budget).max(0.01)
}

/// What a truncated integral is taken of.
pub enum Source<'a> {
    /// `lambda -> ln |W(lambda)|` on `R^dim`, integrated by midpoint sums
    /// with cell side `h` (default from [`default_step`]).
    Evaluator {
        ln_w: &'a (dyn Fn(&[f64]) -> f64 + Sync),
        dim: usize,
        h: Option<f64>,
    },
    /// A sampled field, integrated by Riemann sums over its grid.
    Field(&'a SampledField),
}

impl Source<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Source::Evaluator { dim, .. } => *dim,
            Source::Field(f) => f.n(),
        }
    }

    /// Truncated integrals of `|W| * weight` over the balls of `radii`, and
    /// the cell side used.
    pub fn integrals(&self, weight: &Weight, radii: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_radii(radii)?;
        match self {
            Source::Evaluator { ln_w, dim, h } => {
                let h = h.unwrap_or_else(|| default_step(*dim, *radii.last().unwrap()));
                Ok((ball_integrals(ln_w, *dim, weight, radii, h)?, h))
            }
            Source::Field(f) => {
                let values = radii
                    .iter()
                    .map(|&r| crate::grid::weighted_truncated_integral(f, weight, r))
                    .collect::<Result<Vec<_>>>()?;
                let h = f.axes.iter().map(|a| a.spacing()).fold(0.0, f64::max);
                Ok((values, h))
            }
        }
    }
}

/// Sweep of `int_{|lambda| <= R} |W| exp(pi |lambda.M lambda|) / (1+|lambda|)^N`.
pub fn beurling_sweep(
    source: &Source,
    m: &RMat,
    n_pow: f64,
    radii: &[f64],
    rule: &VerdictRule,
) -> Result<UpReport> {
    let dim = source.dim();
    if m.nrows() != dim || m.ncols() != dim {
        return Err(MtfrError::DimensionMismatch("weight matrix size differs from dimension".into()));
    }
    let weight = Weight::Beurling { m: m.clone(), n: n_pow };
    let (values, h) = source.integrals(&weight, radii)?;
    let sweep = sweep_from_values(radii, &values);
    let mut parameters = BTreeMap::new();
    parameters.insert("N".into(), json!(n_pow));
    parameters.insert("M".into(), crate::io::matrix_value(m));
    parameters.insert("cell".into(), json!(h));
    Ok(UpReport {
        condition: "beurling".into(),
        parameters,
        verdict: rule.decide(&sweep),
        sweep,
        rule: rule.describe(),
        notes: vec![],
    })
}

/// `(1/2) ((0, I), (I, 0))` in dimension `2d`.
pub fn half_antidiagonal(d: usize) -> RMat {
    let mut m = RMat::zeros(2 * d, 2 * d);
    for i in 0..d {
        m[(i, d + i)] = 0.5;
        m[(d + i, i)] = 0.5;
    }
    m
}

/// Which polynomial regressor the Hardy fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolyRegressor {
    /// `ln |lambda|`; exact for `|z|^N exp(-pi |z|^2 / 2)` profiles.
    LogNorm,
    /// `ln(1 + |lambda|)`.
    LogOnePlusNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardyFit {
    pub alpha: f64,
    pub n: f64,
    pub intercept: f64,
    pub residual: f64,
    pub samples: usize,
    pub regressor: PolyRegressor,
}

pub const LN_FLOOR: f64 = -690.7755278982137; // ln(1e-300)

/// Least-squares fit of `ln |W| = c + alpha (-pi |Omega^{-1} lambda|^2 / 2) + N p(|lambda|)`.
pub fn hardy_fit(
    samples: &[(Vec<f64>, f64)],
    omega: &RMat,
    regressor: PolyRegressor,
) -> Result<HardyFit> {
    let oi = inverse(omega, 1e-14)?;
    let rows: Vec<(f64, f64, f64)> = samples
        .iter()
        .filter(|(_, y)| *y > LN_FLOOR)
        .map(|(x, y)| {
            let z = &oi * RVec::from_column_slice(x);
            let r = norm(x);
            let p = match regressor {
                PolyRegressor::LogNorm => r.ln(),
                PolyRegressor::LogOnePlusNorm => (1.0 + r).ln(),
            };
            (-PI * z.norm_squared() / 2.0, p, *y)
        })
        .filter(|(a, p, _)| a.is_finite() && p.is_finite())
        .collect();
    if rows.len() < 3 {
        return Err(MtfrError::DegenerateFit(format!(
            "{} usable samples above the floor",
            rows.len()
        )));
    }
    let a = RMat::from_fn(rows.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => rows[i].0,
        _ => rows[i].1,
    });
    let y = RVec::from_iterator(rows.len(), rows.iter().map(|r| r.2));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-12 * smax {
        return Err(MtfrError::DegenerateFit("regressors are collinear".into()));
    }
    let coef = svd
        .solve(&y, 1e-14 * smax)
        .map_err(|e| MtfrError::DegenerateFit(e.to_string()))?;
    let res = (&a * &coef - &y).norm() / (rows.len() as f64).sqrt();
    Ok(HardyFit {
        alpha: coef[1],
        n: coef[2],
        intercept: coef[0],
        residual: res,
        samples: rows.len(),
        regressor,
    })
}

/// Samples of `ln |W|` on spheres of the given radii: evenly spaced angles in
/// dimension 2, seeded uniform directions otherwise.
pub fn shell_samples<F>(ln_w: &F, dim: usize, radii: &[f64], per_shell: usize, seed: u64) -> Vec<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(radii.len() * per_shell);
    for &r in radii {
        for j in 0..per_shell {
            let dir: Vec<f64> = if dim == 2 {
                let t = 2.0 * PI * (j as f64 + 0.5) / per_shell as f64;
                vec![t.cos(), t.sin()]
            } else {
                let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let nv = norm(&v);
                v.iter().map(|t| t / nv).collect()
            };
            let x: Vec<f64> = dir.iter().map(|t| t * r).collect();
            let y = ln_w(&x);
            out.push((x, y));
        }
    }
    out
}

/// Fraction of each half-axis usable by [`field_shell_samples`]; the outer
/// band is dominated by periodic images on FFT-produced axes.
pub const FIELD_SAMPLE_BAND: f64 = 0.75;

/// Grid points with `r_min <= |lambda| <= r_max` inside the central band of
/// every axis, and their `ln |value|`.
pub fn field_shell_samples(field: &SampledField, r_min: f64, r_max: f64) -> Vec<(Vec<f64>, f64)> {
    (0..field.len())
        .filter_map(|i| {
            let x = field.coords(i);
            let r = norm(&x);
            if r < r_min || r > r_max {
                return None;
            }
            if x.iter().zip(&field.axes).any(|(t, a)| t.abs() > FIELD_SAMPLE_BAND * 0.5 * a.extent) {
                return None;
            }
            let v = field.values[i].norm();
            Some((x, if v > 0.0 { v.ln() } else { f64::NEG_INFINITY }))
        })
        .collect()
}

/// Two truncated integrals with weights `exp((pi/p) alpha^p |x|_p^p)` and
/// `exp((pi/q) beta^q |w|_q^q)`, `1/p + 1/q = 1`.
pub fn gelfand_shilov_sweep(
    source: &Source,
    p: f64,
    alpha: f64,
    beta: f64,
    radii: &[f64],
    rule: &VerdictRule,
) -> Result<(UpReport, UpReport)> {
    if !(p > 1.0 && p.is_finite()) || !(alpha > 0.0) || !(beta > 0.0) {
        return Err(MtfrError::InvalidInput("need 1 < p < inf and alpha, beta > 0".into()));
    }
    if !source.dim().is_multiple_of(2) {
        return Err(MtfrError::DimensionMismatch("time-frequency dimension must be even".into()));
    }
    let d = source.dim() / 2;
    let q = p / (p - 1.0);
    let trigger = alpha * beta >= 1.0;
    let mut reports = Vec::new();
    for (name, weight) in [
        ("gelfand-shilov-x", Weight::PositionPower { d, p, alpha }),
        ("gelfand-shilov-w", Weight::FrequencyPower { d, q, beta }),
    ] {
        let (values, h) = source.integrals(&weight, radii)?;
        let sweep = sweep_from_values(radii, &values);
        let mut parameters = BTreeMap::new();
        parameters.insert("p".into(), json!(p));
        parameters.insert("q".into(), json!(q));
        parameters.insert("alpha".into(), json!(alpha));
        parameters.insert("beta".into(), json!(beta));
        parameters.insert("cell".into(), json!(h));
        reports.push(UpReport {
            condition: name.into(),
            parameters,
            verdict: rule.decide(&sweep),
            sweep,
            rule: rule.describe(),
            notes: vec![format!(
                "alpha * beta = {} {} 1: {}",
                alpha * beta,
                if trigger { ">=" } else { "<" },
                if trigger {
                    "finite integrals together would force W = 0"
                } else {
                    "below the critical product, no conclusion"
                }
            )],
        });
    }
    let b = reports.pop().unwrap();
    let a = reports.pop().unwrap();
    Ok((a, b))
}

/// Boxes and balls, optionally under a linear map `x -> A x`.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeKind {
    Box { center: Vec<f64>, half_widths: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    pub kind: ShapeKind,
    pub map: Option<RMat>,
}

impl Shape {
    pub fn cube(d: usize, half: f64) -> Self {
        Self::boxed(vec![0.0; d], vec![half; d])
    }

    pub fn boxed(center: Vec<f64>, half_widths: Vec<f64>) -> Self {
        Self { kind: ShapeKind::Box { center, half_widths }, map: None }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Self { kind: ShapeKind::Ball { center, radius }, map: None }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ShapeKind::Box { center, .. } | ShapeKind::Ball { center, .. } => center.len(),
        }
    }

    /// The image `A S`.
    pub fn mapped(&self, a: &RMat) -> Self {
        let map = match &self.map {
            Some(m) => a * m,
            None => a.clone(),
        };
        Self { kind: self.kind.clone(), map: Some(map) }
    }

    fn base_volume(&self) -> f64 {
        match &self.kind {
            ShapeKind::Box { half_widths, .. } => half_widths.iter().map(|h| 2.0 * h).product(),
            ShapeKind::Ball { center, radius } => {
                let d = center.len() as f64;
                PI.powf(d / 2.0) / gamma_half_int(d / 2.0 + 1.0) * radius.powf(d)
            }
        }
    }

    pub fn volume(&self) -> f64 {
        let det = self.map.as_ref().map(|m| m.determinant().abs()).unwrap_or(1.0);
        det * self.base_volume()
    }

    /// Support function `h(u) = sup_{s in S} u.s`.
    pub fn support(&self, u: &[f64]) -> f64 {
        let v: Vec<f64> = match &self.map {
            Some(m) => (m.transpose() * RVec::from_column_slice(u)).as_slice().to_vec(),
            None => u.to_vec(),
        };
        match &self.kind {
            ShapeKind::Box { center, half_widths } => center
                .iter()
                .zip(half_widths)
                .zip(&v)
                .map(|((c, h), vi)| c * vi + h * vi.abs())
                .sum(),
            ShapeKind::Ball { center, radius } => {
                center.iter().zip(&v).map(|(c, vi)| c * vi).sum::<f64>() + radius * norm(&v)
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let y: Vec<f64> = match &self.map {
            Some(m) => match m.clone().try_inverse() {
                Some(mi) => (mi * RVec::from_column_slice(x)).as_slice().to_vec(),
                None => return false,
            },
            None => x.to_vec(),
        };
        match &self.kind {
            ShapeKind::Box { center, half_widths } => y
                .iter()
                .zip(center)
                .zip(half_widths)
                .all(|((t, c), h)| (t - c).abs() <= *h),
            ShapeKind::Ball { center, radius } => {
                y.iter().zip(center).map(|(t, c)| (t - c).powi(2)).sum::<f64>().sqrt() <= *radius
            }
        }
    }
}

/// `Gamma(x)` for positive half-integers and integers.
fn gamma_half_int(x: f64) -> f64 {
    let mut g = if (x - x.floor()).abs() < 1e-12 { 1.0 } else { PI.sqrt() };
    let mut t = if (x - x.floor()).abs() < 1e-12 { 1.0 } else { 0.5 };
    while t < x - 1e-12 {
        g *= t;
        t += 1.0;
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanWidth {
    pub value: f64,
    pub stderr: f64,
    pub exact: bool,
}

pub const MEAN_WIDTH_SAMPLES: usize = 1_000_000;

/// Mean width: `2r` for unmapped balls, `|A| * length` in dimension 1, and
/// otherwise a Monte Carlo average of `h(u) + h(-u)` over uniform directions.
pub fn mean_width(shape: &Shape, samples: usize, seed: u64) -> Result<MeanWidth> {
    let d = shape.dim();
    if d == 0 {
        return Err(MtfrError::UnsupportedShape("zero-dimensional shape".into()));
    }
    if d == 1 {
        let w = shape.support(&[1.0]) + shape.support(&[-1.0]);
        return Ok(MeanWidth { value: w, stderr: 0.0, exact: true });
    }
    if let (ShapeKind::Ball { radius, .. }, None) = (&shape.kind, &shape.map) {
        return Ok(MeanWidth { value: 2.0 * radius, stderr: 0.0, exact: true });
    }
    if samples < 2 {
        return Err(MtfrError::InvalidInput("need at least two Monte Carlo samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sq = 0.0;
    let mut u = vec![0.0; d];
    let mut neg = vec![0.0; d];
    for _ in 0..samples {
        for v in u.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let nu = norm(&u);
        for k in 0..d {
            u[k] /= nu;
            neg[k] = -u[k];
        }
        let w = shape.support(&u) + shape.support(&neg);
        sum += w;
        sq += w * w;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0);
    Ok(MeanWidth { value: mean, stderr: (var / (n - 1.0)).sqrt(), exact: false })
}

/// `nc(S, T; C) = C exp(C min(|S||T|, |S|^{1/d} w(T), |T|^{1/d} w(S)))`.
pub fn nazarov_constant(vol_s: f64, vol_t: f64, w_s: f64, w_t: f64, d: usize, c: f64) -> f64 {
    let e = 1.0 / d as f64;
    let m = (vol_s * vol_t).min(vol_s.powf(e) * w_t).min(vol_t.powf(e) * w_s);
    c * (c * m).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NazarovReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub nc: f64,
    pub c: f64,
    pub complement_s: f64,
    pub complement_t: f64,
    pub volume_s: f64,
    pub volume_t: f64,
    pub width_s: MeanWidth,
    pub width_t: MeanWidth,
    /// Smallest `C` with `rhs >= lhs` on this instance (`None` when the
    /// complement energies vanish).
    pub calibrated_c: Option<f64>,
}

/// `int_{complement of S} |v|^2` on the grid of `field`.
pub fn complement_energy(field: &SampledField, s: &Shape) -> f64 {
    let vol = field.cell_volume();
    (0..field.len())
        .filter(|&i| !s.contains(&field.coords(i)))
        .map(|i| field.values[i].norm_sqr())
        .sum::<f64>()
        * vol
}

/// Assembles both sides of the Nazarov-type inequality
/// `||f||^2 <= nc(L1^{-1} S, Im(U)^{-1} L2^{-1} T) (int_{S^c} |A1 f|^2 + int_{T^c} |A2 f|^2)`
/// from the fields `A1 f` and `A2 f`.
#[allow(clippy::too_many_arguments)]
pub fn nazarov_bound(
    a1f: &SampledField,
    a2f: &SampledField,
    s: &Shape,
    t: &Shape,
    l1: &RMat,
    l2: &RMat,
    im_u: &RMat,
    c: f64,
    width_samples: usize,
    seed: u64,
) -> Result<NazarovReport> {
    let d = a1f.n();
    if s.dim() != d || t.dim() != d || a2f.n() != d {
        return Err(MtfrError::DimensionMismatch("shapes and fields must share dimension".into()));
    }
    let im_inv = inverse(im_u, 1e-8)?;
    let l1_inv = inverse(l1, 1e-12)?;
    let l2_inv = inverse(l2, 1e-12)?;
    let s_img = s.mapped(&l1_inv);
    let t_img = t.mapped(&(im_inv * l2_inv));
    let width_s = mean_width(&s_img, width_samples, seed)?;
    let width_t = mean_width(&t_img, width_samples, seed.wrapping_add(1))?;
    let (vs, vt) = (s_img.volume(), t_img.volume());
    let lhs = a1f.l2_norm().powi(2);
    let cs = complement_energy(a1f, s);
    let ct = complement_energy(a2f, t);
    let nc = nazarov_constant(vs, vt, width_s.value, width_t.value, d, c);
    let rhs = nc * (cs + ct);
    let calibrated_c = calibrate_c(lhs, cs + ct, vs, vt, width_s.value, width_t.value, d);
    Ok(NazarovReport {
        lhs,
        rhs,
        ratio: if lhs > 0.0 { rhs / lhs } else { f64::INFINITY },
        nc,
        c,
        complement_s: cs,
        complement_t: ct,
        volume_s: vs,
        volume_t: vt,
        width_s,
        width_t,
        calibrated_c,
    })
}

/// Bisection for the smallest `C` with `nc(C) * energy >= lhs`.
pub fn calibrate_c(lhs: f64, energy: f64, vs: f64, vt: f64, ws: f64, wt: f64, d: usize) -> Option<f64> {
    if lhs <= 0.0 {
        return Some(0.0);
    }
    if energy <= 0.0 {
        return None;
    }
    let f = |c: f64| nazarov_constant(vs, vt, ws, wt, d, c) * energy - lhs;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// `int_{box} |G|^2` by tensor Gauss-Legendre quadrature (dimension <= 3).
pub fn gaussian_box_energy(g: &GeneralizedGaussian, lo: &[f64], hi: &[f64], nodes: usize) -> f64 {
    let n = g.n();
    let rule = GaussLegendre::new(nodes.try_into().expect("nodes >= 1"));
    let pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    let mut total = 0.0;
    let count = nodes.pow(n as u32);
    let mut x = vec![0.0; n];
    for flat in 0..count {
        let mut rem = flat;
        let mut w = 1.0;
        for k in (0..n).rev() {
            let (t, wt) = pairs[rem % nodes];
            rem /= nodes;
            let half = 0.5 * (hi[k] - lo[k]);
            x[k] = lo[k] + half * (t + 1.0);
            w *= wt * half;
        }
        total += w * (2.0 * g.ln_abs(&x)).exp();
    }
    total
}

/// `||G||^2 - int_{box} |G|^2`.
pub fn gaussian_box_complement(g: &GeneralizedGaussian, lo: &[f64], hi: &[f64], nodes: usize) -> f64 {
    (2.0 * g.ln_l2_norm()).exp() - gaussian_box_energy(g, lo, hi, nodes)
}

/// Per-slice verdicts of a 2k-dimensional Beurling-type condition on the
/// `(x2, w2)` cross-sections of a partial STFT field with axes `(x1, x2, w1, w2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossSectionReport {
    pub slices: usize,
    pub passing: usize,
    pub fraction_passing: f64,
    /// Measure in `(x2, w2)` of the slices failing the condition.
    pub exception_measure: f64,
    pub verdicts: Vec<Verdict>,
}

pub fn cross_section_sweep(
    field: &SampledField,
    d: usize,
    k: usize,
    radii: &[f64],
    n_pow: f64,
    rule: &VerdictRule,
    max_elements: usize,
) -> Result<CrossSectionReport> {
    if field.n() != 2 * d || k == 0 || k > d {
        return Err(MtfrError::DimensionMismatch("field must have 2d axes and 1 <= k <= d".into()));
    }
    if field.len() > max_elements {
        return Err(MtfrError::GridTooLarge { requested: field.len(), limit: max_elements });
    }
    check_radii(radii)?;
    let r = d - k;
    let slice_axes: Vec<usize> = (0..k).chain(d..d + k).collect();
    let outer_axes: Vec<usize> = (k..d).chain(d + k..2 * d).collect();
    let strides = field.strides();
    let inner: Vec<Axis> = slice_axes.iter().map(|&a| field.axes[a]).collect();
    let outer_pts: Vec<usize> = outer_axes.iter().map(|&a| field.axes[a].points).collect();
    let n_outer: usize = outer_pts.iter().product();
    let outer_cell: f64 = outer_axes.iter().map(|&a| field.axes[a].spacing()).product();
    let weight = Weight::Beurling { m: half_antidiagonal(k), n: n_pow };
    let verdicts: Vec<Verdict> = (0..n_outer)
        .into_par_iter()
        .map(|o| {
            let mut oidx = vec![0; 2 * r];
            let mut rem = o;
            for i in (0..2 * r).rev() {
                oidx[i] = rem % outer_pts[i];
                rem /= outer_pts[i];
            }
            let mut slice = SampledField::zeros(inner.clone());
            for s in 0..slice.len() {
                let sidx = slice.multi_index(s);
                let mut flat = 0;
                for (j, &a) in slice_axes.iter().enumerate() {
                    flat += sidx[j] * strides[a];
                }
                for (j, &a) in outer_axes.iter().enumerate() {
                    flat += oidx[j] * strides[a];
                }
                slice.values[s] = field.values[flat];
            }
            let values: Vec<f64> = radii
                .iter()
                .map(|&rad| crate::grid::weighted_truncated_integral(&slice, &weight, rad))
                .collect::<Result<Vec<_>>>()
                .unwrap_or_else(|_| vec![f64::NAN; radii.len()]);
            rule.decide(&sweep_from_values(radii, &values))
        })
        .collect();
    let passing = verdicts.iter().filter(|v| **v != Verdict::DivergentLooking).count();
    Ok(CrossSectionReport {
        slices: n_outer,
        passing,
        fraction_passing: passing as f64 / n_outer as f64,
        exception_measure: (n_outer - passing) as f64 * if r == 0 { 0.0 } else { outer_cell },
        verdicts,
    })
}
