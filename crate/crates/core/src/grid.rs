//! Sampled fields on centered uniform tensor grids and discrete versions of
//! the metaplectic generators, partial short-time Fourier transforms and
//! truncated integrals.
//!
//! Axis `i` with `N` points and extent `T` carries the samples
//! `t_j = -T/2 + j T/N`, `j = 0..N`. The Fourier transform along an axis is
//! the Riemann sum of the continuous transform and maps the axis to one with
//! `N` points and extent `N/T`; when `T^2 = N` the grid is self-dual and the
//! discrete transform is exactly unitary.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use crate::check::Weight;
use crate::error::{MtfrError, Result};
use crate::gaussian::GeneralizedGaussian;
use crate::linalg::{c, RMat};
use crate::symplectic::{GeneratorWord, Letter};

pub const DEFAULT_MAX_ELEMENTS: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub points: usize,
    pub extent: f64,
}

impl Axis {
    pub fn new(points: usize, extent: f64) -> Result<Self> {
        if points < 8 || !points.is_power_of_two() {
            return Err(MtfrError::InvalidInput(format!(
                "axis needs a power-of-two number of points >= 8, got {points}"
            )));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(MtfrError::InvalidInput(format!("invalid axis extent {extent}")));
        }
        Ok(Self { points, extent })
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.points as f64
    }

    pub fn coord(&self, j: usize) -> f64 {
        -0.5 * self.extent + j as f64 * self.spacing()
    }

    /// Index of the sample at `x`, if `x` lies on the grid within `1e-9` samples.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let s = (x + 0.5 * self.extent) / self.spacing();
        let r = s.round();
        if (s - r).abs() <= 1e-9 && r >= 0.0 && (r as usize) < self.points {
            Some(r as usize)
        } else {
            None
        }
    }

    /// The axis of the Fourier transform of a field on this axis.
    pub fn dual(&self) -> Axis {
        Axis { points: self.points, extent: self.points as f64 / self.extent }
    }
}

/// Parameters of grid computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub max_elements: usize,
    /// Allow general invertible dilations in dimension >= 2, realized by
    /// shears with Fourier-domain line translations.
    pub allow_shear_dilation: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { max_elements: DEFAULT_MAX_ELEMENTS, allow_shear_dilation: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub axes: Vec<Axis>,
    /// Row-major values, the last axis varying fastest.
    pub values: Vec<Complex64>,
}

impl SampledField {
    pub fn zeros(axes: Vec<Axis>) -> Self {
        let len = axes.iter().map(|a| a.points).product();
        Self { axes, values: vec![c(0.0, 0.0); len] }
    }

    pub fn from_fn<F>(axes: Vec<Axis>, f: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let len: usize = axes.iter().map(|a| a.points).product();
        let n = axes.len();
        let strides = strides_of(&axes);
        let values = (0..len)
            .into_par_iter()
            .map(|flat| {
                let mut x = vec![0.0; n];
                for i in 0..n {
                    x[i] = axes[i].coord((flat / strides[i]) % axes[i].points);
                }
                f(&x)
            })
            .collect();
        Self { axes, values }
    }

    pub fn n(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.axes)
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).product()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.strides()).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let strides = self.strides();
        (0..self.n()).map(|i| (flat / strides[i]) % self.axes[i].points).collect()
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&j, a)| a.coord(j))
            .collect()
    }

    pub fn get(&self, idx: &[usize]) -> Complex64 {
        self.values[self.flat_index(idx)]
    }

    /// Value at a grid point given by coordinates.
    pub fn at(&self, x: &[f64]) -> Result<Complex64> {
        let idx = x
            .iter()
            .zip(&self.axes)
            .map(|(&xi, a)| {
                a.index_of(xi)
                    .ok_or_else(|| MtfrError::OffGridPoint(format!("coordinate {xi} not on grid")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.get(&idx))
    }

    /// `(sum |v|^2 * cell volume)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.cell_volume()).sqrt()
    }

    pub fn scale(&mut self, s: Complex64) {
        for v in self.values.iter_mut() {
            *v *= s;
        }
    }

    pub fn conj(&self) -> SampledField {
        Self { axes: self.axes.clone(), values: self.values.iter().map(|v| v.conj()).collect() }
    }

    /// Trigonometric interpolation at an arbitrary point (periodic
    /// band-limited model; zero outside the sampled box).
    pub fn interpolate(&self, x: &[f64]) -> Complex64 {
        assert_eq!(x.len(), self.n());
        let mut weights: Vec<Vec<f64>> = Vec::with_capacity(self.n());
        for (a, &xi) in self.axes.iter().zip(x) {
            let s = (xi + 0.5 * a.extent) / a.spacing();
            if s < -0.5 || s > a.points as f64 - 0.5 {
                return c(0.0, 0.0);
            }
            weights.push((0..a.points).map(|l| periodic_sinc(s - l as f64, a.points)).collect());
        }
        let mut acc = self.values.clone();
        // contract the last axis repeatedly
        for ax in (0..self.n()).rev() {
            let np = self.axes[ax].points;
            let outer = acc.len() / np;
            let w = &weights[ax];
            acc = (0..outer)
                .map(|o| (0..np).map(|l| acc[o * np + l] * w[l]).sum())
                .collect();
        }
        acc[0]
    }
}

fn strides_of(axes: &[Axis]) -> Vec<usize> {
    let n = axes.len();
    let mut s = vec![1; n];
    for i in (0..n.saturating_sub(1)).rev() {
        s[i] = s[i + 1] * axes[i + 1].points;
    }
    s
}

/// Dirichlet kernel of the even-length trigonometric interpolant with the
/// Nyquist term split symmetrically.
fn periodic_sinc(x: f64, n: usize) -> f64 {
    let t = PI * x / n as f64;
    if t.sin().abs() < 1e-14 {
        let k = (x / n as f64).round() as i64;
        return if k % 2 == 0 { 1.0 } else { -1.0 };
    }
    (PI * x).sin() / (n as f64 * t.tan())
}

/// Gathers every line along `axis`, transforms them independently and
/// scatters the results back.
fn map_lines<F>(field: &mut SampledField, axis: usize, op: F)
where
    F: Fn(&mut Vec<Complex64>) + Sync,
{
    let np = field.axes[axis].points;
    let stride = field.strides()[axis];
    let total = field.len();
    let starts: Vec<usize> = (0..total).filter(|&f| (f / stride).is_multiple_of(np)).collect();
    let values = &field.values;
    let lines: Vec<Vec<Complex64>> = starts
        .par_iter()
        .map(|&s| {
            let mut line: Vec<Complex64> = (0..np).map(|j| values[s + j * stride]).collect();
            op(&mut line);
            line
        })
        .collect();
    for (s, line) in starts.iter().zip(lines) {
        for (j, v) in line.into_iter().enumerate() {
            field.values[s + j * stride] = v;
        }
    }
}

/// Samples a Gaussian, including the relative phase from `Im M` and `Im b`.
pub fn sample(g: &GeneralizedGaussian, axes: &[Axis]) -> Result<SampledField> {
    if axes.len() != g.n() {
        return Err(MtfrError::DimensionMismatch(format!(
            "grid of dimension {} for a Gaussian of dimension {}",
            axes.len(),
            g.n()
        )));
    }
    Ok(SampledField::from_fn(axes.to_vec(), |x| g.eval(x)))
}

/// Uniform grid of `points` samples over `[-extent/2, extent/2)` on each axis.
pub fn uniform_axes(n: usize, points: usize, extent: f64) -> Result<Vec<Axis>> {
    let a = Axis::new(points, extent)?;
    Ok(vec![a; n])
}

/// Continuous Fourier transform along one axis via a centered FFT.
pub fn fourier_axis(field: &SampledField, axis: usize) -> SampledField {
    let mut out = field.clone();
    let a = field.axes[axis];
    let np = a.points;
    let dx = a.spacing();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(np);
    // exp(-2 pi i t_j w_m) = (-1)^{j+m} exp(-2 pi i j m / N) for N divisible by 4
    map_lines(&mut out, axis, |line| {
        for (j, v) in line.iter_mut().enumerate() {
            if j % 2 == 1 {
                *v = -*v;
            }
        }
        fft.process(line);
        for (m, v) in line.iter_mut().enumerate() {
            *v *= if m % 2 == 1 { -dx } else { dx };
        }
    });
    out.axes[axis] = a.dual();
    out
}

pub fn partial_fourier(field: &SampledField, axes: &[usize]) -> SampledField {
    let mut out = field.clone();
    for &a in axes {
        out = fourier_axis(&out, a);
    }
    out
}

/// Multiplication by `exp(pi i x.Qx)`.
pub fn chirp(field: &SampledField, q: &RMat) -> SampledField {
    let n = field.n();
    let mut out = field.clone();
    let strides = field.strides();
    let axes = &field.axes;
    out.values.par_iter_mut().enumerate().for_each(|(flat, v)| {
        let x: Vec<f64> = (0..n).map(|i| axes[i].coord((flat / strides[i]) % axes[i].points)).collect();
        let mut ph = 0.0;
        for i in 0..n {
            for j in 0..n {
                ph += x[i] * q[(i, j)] * x[j];
            }
        }
        *v *= Complex64::from_polar(1.0, PI * ph);
    });
    out
}

/// Largest phase increment of the chirp between adjacent samples, in units
/// of pi; values above 1 alias.
pub fn chirp_phase_step(axes: &[Axis], q: &RMat) -> f64 {
    let n = axes.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        // |(Qx)_i| is maximal at a corner of the box
        let mut row = 0.0;
        for j in 0..n {
            row += q[(i, j)].abs() * 0.5 * axes[j].extent;
        }
        worst = worst.max(2.0 * row * axes[i].spacing());
    }
    worst
}

/// One-dimensional dilation `|a|^{-1/2} f(t / a)` along `axis` by
/// trigonometric interpolation; values mapped from outside the grid are 0.
pub fn dilate_axis(field: &SampledField, axis: usize, a: f64) -> SampledField {
    let mut out = field.clone();
    if a == 1.0 {
        return out;
    }
    let ax = field.axes[axis];
    let np = ax.points;
    if a == -1.0 {
        // t_j -> -t_j is the index map j -> N - j (mod N)
        map_lines(&mut out, axis, |line| {
            let src = line.clone();
            for j in 0..np {
                line[j] = src[(np - j) % np];
            }
        });
        return out;
    }
    let amp = a.abs().powf(-0.5);
    let mut kernel = vec![0.0; np * np];
    let mut active = vec![false; np];
    for j in 0..np {
        let s = (ax.coord(j) / a + 0.5 * ax.extent) / ax.spacing();
        if s < -0.5 || s > np as f64 - 0.5 {
            continue;
        }
        active[j] = true;
        for l in 0..np {
            kernel[j * np + l] = amp * periodic_sinc(s - l as f64, np);
        }
    }
    map_lines(&mut out, axis, |line| {
        let src = line.clone();
        for j in 0..np {
            line[j] = if active[j] {
                src.iter().enumerate().map(|(l, v)| v * kernel[j * np + l]).sum()
            } else {
                c(0.0, 0.0)
            };
        }
    });
    out
}

/// Translation `f(t - s)` along `axis` by a Fourier phase ramp.
pub fn translate_axis_by<F>(field: &SampledField, axis: usize, shift_of: F) -> SampledField
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    // Lines are indexed by their starting flat index; the shift depends on
    // the coordinates of the other axes.
    let mut out = field.clone();
    let ax = field.axes[axis];
    let np = ax.points;
    let stride = field.strides()[axis];
    let total = field.len();
    let starts: Vec<usize> = (0..total).filter(|&f| (f / stride).is_multiple_of(np)).collect();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(np);
    let inv = planner.plan_fft_inverse(np);
    let period = ax.extent;
    let lines: Vec<Vec<Complex64>> = starts
        .par_iter()
        .map(|&s| {
            let x = field.coords(s);
            let shift = shift_of(&x);
            let mut line: Vec<Complex64> = (0..np).map(|j| field.values[s + j * stride]).collect();
            fwd.process(&mut line);
            for (m, v) in line.iter_mut().enumerate() {
                let freq = if m < np / 2 {
                    m as f64
                } else if m == np / 2 {
                    // symmetric Nyquist treatment
                    *v *= (PI * np as f64 * shift / period).cos();
                    *v /= np as f64;
                    continue;
                } else {
                    m as f64 - np as f64
                };
                *v *= Complex64::from_polar(1.0 / np as f64, -2.0 * PI * freq * shift / period);
            }
            inv.process(&mut line);
            line
        })
        .collect();
    for (s, line) in starts.iter().zip(lines) {
        for (j, v) in line.into_iter().enumerate() {
            out.values[s + j * stride] = v;
        }
    }
    out
}

/// `g(x) = f(x_{pi(0)}, ..., x_{pi(n-1)})` where the permutation matrix has
/// `P e_j = e_{pi(j)}`, i.e. `g(x) = f(P^{-1} x)`.
fn permute_axes(field: &SampledField, perm: &[usize]) -> SampledField {
    let n = field.n();
    let mut axes = field.axes.clone();
    for j in 0..n {
        axes[perm[j]] = field.axes[j];
    }
    let mut out = SampledField::zeros(axes);
    let out_strides = out.strides();
    for flat in 0..field.len() {
        let idx = field.multi_index(flat);
        let mut new_flat = 0;
        for j in 0..n {
            new_flat += idx[j] * out_strides[perm[j]];
        }
        out.values[new_flat] = field.values[flat];
    }
    out
}

/// `(perm, diag)` with `L = P diag(d)` when every row and column of `L` holds
/// exactly one nonzero entry.
pub fn permutation_diagonal(l: &RMat) -> Option<(Vec<usize>, Vec<f64>)> {
    let n = l.nrows();
    let mut perm = vec![usize::MAX; n];
    let mut diag = vec![0.0; n];
    let scale = l.amax().max(f64::MIN_POSITIVE);
    for j in 0..n {
        let nz: Vec<usize> = (0..n).filter(|&i| l[(i, j)].abs() > 1e-14 * scale).collect();
        if nz.len() != 1 {
            return None;
        }
        perm[j] = nz[0];
        diag[j] = l[(nz[0], j)];
    }
    let mut seen = vec![false; n];
    for &p in &perm {
        if seen[p] {
            return None;
        }
        seen[p] = true;
    }
    Some((perm, diag))
}

/// `|det L|^{-1/2} f(L^{-1} x)`.
pub fn dilation(field: &SampledField, l: &RMat, cfg: &GridConfig) -> Result<SampledField> {
    let n = field.n();
    if l.nrows() != n {
        return Err(MtfrError::DimensionMismatch("dilation size differs from field".into()));
    }
    if let Some((perm, diag)) = permutation_diagonal(l) {
        let mut out = field.clone();
        for (j, &a) in diag.iter().enumerate() {
            out = dilate_axis(&out, j, a);
        }
        if perm.iter().enumerate().any(|(j, &p)| j != p) {
            out = permute_axes(&out, &perm);
        }
        return Ok(out);
    }
    if !cfg.allow_shear_dilation {
        return Err(MtfrError::UnsupportedDilation(format!(
            "matrix is not a permutation times a diagonal in dimension {n}"
        )));
    }
    shear_dilation(field, l)
}

/// General dilation through `L = P^t Lo D Up` with unit triangular `Lo`, `Up`
/// realized as products of single-column shears.
fn shear_dilation(field: &SampledField, l: &RMat) -> Result<SampledField> {
    let n = l.nrows();
    let lu = l.clone().lu();
    let mut pmat = RMat::identity(n, n);
    lu.p().permute_rows(&mut pmat);
    let lo = lu.l();
    let upper = lu.u();
    let diag: Vec<f64> = (0..n).map(|i| upper[(i, i)]).collect();
    if diag.iter().any(|d| d.abs() < 1e-14) {
        return Err(MtfrError::Singular(0.0));
    }
    let mut up = upper.clone();
    for i in 0..n {
        for j in 0..n {
            up[(i, j)] /= diag[i];
        }
    }
    // operator order: the rightmost factor acts first
    let mut out = field.clone();
    for j in 0..n {
        let col: Vec<(usize, f64)> = (0..j).map(|i| (i, up[(i, j)])).filter(|(_, v)| *v != 0.0).collect();
        out = column_shear(&out, j, &col);
    }
    for (j, &d) in diag.iter().enumerate() {
        out = dilate_axis(&out, j, d);
    }
    for j in (0..n).rev() {
        let col: Vec<(usize, f64)> =
            (j + 1..n).map(|i| (i, lo[(i, j)])).filter(|(_, v)| *v != 0.0).collect();
        out = column_shear(&out, j, &col);
    }
    let pt = pmat.transpose();
    if let Some((perm, _)) = permutation_diagonal(&pt) {
        if perm.iter().enumerate().any(|(j, &p)| j != p) {
            out = permute_axes(&out, &perm);
        }
    }
    Ok(out)
}

/// Operator of `E = I + v e_j^t` (with `v_j = 0`): `f(x - v x_j)`.
fn column_shear(field: &SampledField, j: usize, col: &[(usize, f64)]) -> SampledField {
    let mut out = field.clone();
    for &(i, v) in col {
        out = translate_axis_by(&out, i, |x| v * x[j]);
    }
    out
}

/// A grid field together with the diagnostics raised while producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub field: SampledField,
    pub warnings: Vec<String>,
}

pub fn apply_letter_grid(
    field: &SampledField,
    letter: &Letter,
    cfg: &GridConfig,
    warnings: &mut Vec<String>,
) -> Result<SampledField> {
    match letter {
        Letter::Chirp(q) => {
            if q.nrows() != field.n() {
                return Err(MtfrError::DimensionMismatch("chirp size differs from field".into()));
            }
            let step = chirp_phase_step(&field.axes, q);
            if step > 1.0 {
                warnings.push(format!(
                    "chirp aliasing: phase step {:.2} pi between adjacent samples",
                    step
                ));
            }
            Ok(chirp(field, q))
        }
        Letter::Dilation(l) => dilation(field, l, cfg),
        Letter::PartialFourier(axes) => {
            if axes.iter().any(|&a| a >= field.n()) {
                return Err(MtfrError::InvalidInput(format!("invalid Fourier axes {axes:?}")));
            }
            Ok(partial_fourier(field, axes))
        }
    }
}

/// Applies the operator of `word` to `field`; the last letter acts first.
pub fn apply_word_grid(
    field: &SampledField,
    word: &GeneratorWord,
    cfg: &GridConfig,
) -> Result<GridOutcome> {
    if word.n != field.n() {
        return Err(MtfrError::DimensionMismatch(format!(
            "word of dimension {} on a field of dimension {}",
            word.n,
            field.n()
        )));
    }
    let mut warnings = Vec::new();
    let mut out = field.clone();
    for letter in word.letters.iter().rev() {
        out = apply_letter_grid(&out, letter, cfg, &mut warnings)?;
    }
    Ok(GridOutcome { field: out, warnings })
}

/// `f tensor conj(g)`.
pub fn tensor_conj(f: &SampledField, g: &SampledField, cfg: &GridConfig) -> Result<SampledField> {
    let len = f.len().saturating_mul(g.len());
    if len > cfg.max_elements {
        return Err(MtfrError::GridTooLarge { requested: len, limit: cfg.max_elements });
    }
    let mut axes = f.axes.clone();
    axes.extend(g.axes.iter().cloned());
    let gl = g.len();
    let values = (0..len)
        .into_par_iter()
        .map(|i| f.values[i / gl] * g.values[i % gl].conj())
        .collect();
    Ok(SampledField { axes, values })
}

/// `A (f tensor conj g)` for a word `A` acting in dimension `2d`.
pub fn tfr_grid(
    word: &GeneratorWord,
    f: &SampledField,
    g: &SampledField,
    cfg: &GridConfig,
) -> Result<GridOutcome> {
    let t = tensor_conj(f, g, cfg)?;
    apply_word_grid(&t, word, cfg)
}

/// Partial STFT on the grid: output axes `(x1, x2, w1, w2)` with `x1`, `x2`,
/// `w2` on the input axes and `w1` on the dual axes of the first `k` inputs.
///
/// The window shift `t - x1` uses exact index differences, and `-w2` the
/// reflected index, so no interpolation is involved.
pub fn partial_stft_grid(
    f: &SampledField,
    g: &SampledField,
    k: usize,
    cfg: &GridConfig,
) -> Result<SampledField> {
    let d = f.n();
    if g.axes != f.axes {
        return Err(MtfrError::DimensionMismatch("signal and window grids differ".into()));
    }
    if k == 0 || k > d {
        return Err(MtfrError::InvalidInput(format!("k = {k} outside 1..={d}")));
    }
    let len = f.len().saturating_mul(f.len());
    if len > cfg.max_elements {
        return Err(MtfrError::GridTooLarge { requested: len, limit: cfg.max_elements });
    }
    let mut out_axes: Vec<Axis> = f.axes.clone();
    out_axes.extend(f.axes[..k].iter().map(|a| a.dual()));
    out_axes.extend(f.axes[k..].iter().cloned());
    let mut out = SampledField::zeros(out_axes);
    let out_strides = out.strides();

    // enumerate (x1, x2, w2) index tuples; each gives a k-dimensional FT
    let shift_axes: Vec<usize> = (0..d).map(|i| f.axes[i].points).chain(f.axes[k..].iter().map(|a| a.points)).collect();
    let n_shift: usize = shift_axes.iter().product();
    let inner_axes: Vec<Axis> = f.axes[..k].to_vec();
    let inner_len: usize = inner_axes.iter().map(|a| a.points).product();
    let inner_strides = strides_of(&inner_axes);
    let blocks: Vec<(Vec<usize>, SampledField)> = (0..n_shift)
        .into_par_iter()
        .map(|s| {
            let mut idx = vec![0; shift_axes.len()];
            let mut rem = s;
            for i in (0..shift_axes.len()).rev() {
                idx[i] = rem % shift_axes[i];
                rem /= shift_axes[i];
            }
            let ft = stft_line(f, g, k, &idx);
            (idx, ft)
        })
        .collect();
    for (idx, ft) in blocks {
        let (x1, rest) = idx.split_at(k);
        let (x2, w2) = rest.split_at(d - k);
        for t in 0..inner_len {
            let w1: Vec<usize> = (0..k).map(|i| (t / inner_strides[i]) % inner_axes[i].points).collect();
            let full: Vec<usize> = x1.iter().chain(x2).chain(&w1).chain(w2).cloned().collect();
            let flat: usize = full.iter().zip(&out_strides).map(|(a, b)| a * b).sum();
            out.values[flat] = ft.values[t];
        }
    }
    Ok(out)
}

/// One line of the grid partial STFT: the `k`-dimensional transform over `w1`
/// for the shift indices `idx = (x1, x2, w2)`.
fn stft_line(f: &SampledField, g: &SampledField, k: usize, idx: &[usize]) -> SampledField {
    let d = f.n();
    let inner_axes: Vec<Axis> = f.axes[..k].to_vec();
    let inner_len: usize = inner_axes.iter().map(|a| a.points).product();
    let inner_strides = strides_of(&inner_axes);
    let (x1, rest) = idx.split_at(k);
    let (x2, w2) = rest.split_at(d - k);
    let mut line = SampledField::zeros(inner_axes.clone());
    for t in 0..inner_len {
        let tj: Vec<usize> = (0..k).map(|i| (t / inner_strides[i]) % inner_axes[i].points).collect();
        let mut fi = tj.clone();
        fi.extend_from_slice(x2);
        let mut gi = Vec::with_capacity(d);
        let mut inside = true;
        for i in 0..k {
            let np = f.axes[i].points as isize;
            let v = tj[i] as isize - x1[i] as isize + np / 2;
            if v < 0 || v >= np {
                inside = false;
                break;
            }
            gi.push(v as usize);
        }
        if !inside {
            continue;
        }
        for (i, &w) in w2.iter().enumerate() {
            let np = f.axes[k + i].points;
            gi.push((np - w) % np);
        }
        line.values[t] = f.get(&fi) * g.get(&gi).conj();
    }
    partial_fourier(&line, &(0..k).collect::<Vec<_>>())
}

/// Selected lines of [`partial_stft_grid`]: for each shift index tuple
/// `(x1, x2, w2)` the values over the dual `w1` axes. Useful when the full
/// output does not fit in memory.
pub fn partial_stft_lines(
    f: &SampledField,
    g: &SampledField,
    k: usize,
    shifts: &[Vec<usize>],
) -> Result<Vec<SampledField>> {
    let d = f.n();
    if g.axes != f.axes {
        return Err(MtfrError::DimensionMismatch("signal and window grids differ".into()));
    }
    if k == 0 || k > d {
        return Err(MtfrError::InvalidInput(format!("k = {k} outside 1..={d}")));
    }
    for idx in shifts {
        let bounds = (0..d).map(|i| f.axes[i].points).chain(f.axes[k..].iter().map(|a| a.points));
        if idx.len() != 2 * d - k || idx.iter().zip(bounds).any(|(j, n)| *j >= n) {
            return Err(MtfrError::InvalidInput(format!("shift index {idx:?} outside the grid")));
        }
    }
    Ok(shifts
        .par_iter()
        .map(|idx| {
            let mut line = stft_line(f, g, k, idx);
            line.axes = f.axes[..k].iter().map(|a| a.dual()).collect();
            line
        })
        .collect())
}

/// `V^k_g f(x1, x2, w1, w2)` at one arbitrary point by trapezoidal quadrature
/// on the grid of `f`, with the window interpolated off the grid.
pub fn partial_stft_at(
    f: &SampledField,
    g: &SampledField,
    k: usize,
    x1: &[f64],
    x2: &[f64],
    w1: &[f64],
    w2: &[f64],
) -> Result<Complex64> {
    let d = f.n();
    if k == 0 || k > d || x1.len() != k || w1.len() != k || x2.len() != d - k || w2.len() != d - k {
        return Err(MtfrError::DimensionMismatch("partial STFT point has wrong shape".into()));
    }
    if d != 1 {
        // the window is interpolated in all d variables; keep this to d = 1
        // where it costs O(N) per sample
        return Err(MtfrError::InvalidInput(
            "pointwise grid partial STFT is implemented for d = 1".into(),
        ));
    }
    let a = f.axes[0];
    let mut acc = c(0.0, 0.0);
    for j in 0..a.points {
        let t = a.coord(j);
        let gv = g.interpolate(&[t - x1[0]]);
        acc += f.values[j] * gv.conj() * Complex64::from_polar(1.0, -2.0 * PI * t * w1[0]);
    }
    Ok(acc * a.spacing())
}

/// Riemann sum of `|field| * weight` over the grid points in the ball of
/// radius `radius`.
pub fn weighted_truncated_integral(field: &SampledField, weight: &Weight, radius: f64) -> Result<f64> {
    let half = field.axes.iter().map(|a| 0.5 * a.extent).fold(f64::INFINITY, f64::min);
    if radius > half {
        return Err(MtfrError::RadiusExceedsGrid { radius, half_extent: half });
    }
    let vol = field.cell_volume();
    let parts: Vec<f64> = (0..field.len())
        .into_par_iter()
        .map(|flat| {
            let v = field.values[flat].norm();
            if v == 0.0 {
                return 0.0;
            }
            let x = field.coords(flat);
            if x.iter().map(|t| t * t).sum::<f64>().sqrt() > radius {
                return 0.0;
            }
            v * weight.eval(&x)
        })
        .collect();
    Ok(parts.iter().sum::<f64>() * vol)
}

/// Fraction of `sum |v|^2` outside the box `[lo_i, hi_i]`.
pub fn mass_outside(field: &SampledField, bounds: &[(f64, f64)]) -> Result<f64> {
    if bounds.len() != field.n() {
        return Err(MtfrError::DimensionMismatch("box dimension differs from field".into()));
    }
    let mut total = 0.0;
    let mut outside = 0.0;
    for flat in 0..field.len() {
        let m = field.values[flat].norm_sqr();
        total += m;
        let x = field.coords(flat);
        if x.iter().zip(bounds).any(|(t, (lo, hi))| *t < *lo || *t > *hi) {
            outside += m;
        }
    }
    Ok(if total == 0.0 { 0.0 } else { outside / total })
}

/// Time-frequency shift `exp(2 pi i w t) f(t - x)`; `x` must be a multiple of
/// the spacing.
pub fn time_frequency_shift(field: &SampledField, x: f64, w: f64) -> Result<SampledField> {
    if field.n() != 1 {
        return Err(MtfrError::DimensionMismatch("time-frequency shift on d = 1 fields".into()));
    }
    let a = field.axes[0];
    let steps = x / a.spacing();
    if (steps - steps.round()).abs() > 1e-9 {
        return Err(MtfrError::OffGridPoint(format!("translation {x} is not a multiple of {}", a.spacing())));
    }
    let s = steps.round() as isize;
    let np = a.points as isize;
    let mut out = SampledField::zeros(field.axes.clone());
    for j in 0..np {
        let src = j - s;
        if src >= 0 && src < np {
            let t = a.coord(j as usize);
            out.values[j as usize] = field.values[src as usize] * Complex64::from_polar(1.0, 2.0 * PI * w * t);
        }
    }
    Ok(out)
}

/// `min_c ||rho(M lambda) f - c A rho(lambda) A^{-1} f|| / ||f||` over unimodular `c`.
pub fn intertwining_check(
    word: &GeneratorWord,
    lambda: (f64, f64),
    f: &SampledField,
    cfg: &GridConfig,
) -> Result<f64> {
    if word.n != 1 || f.n() != 1 {
        return Err(MtfrError::DimensionMismatch("intertwining check is for d = 1".into()));
    }
    let m = word.matrix();
    let mx = m[(0, 0)] * lambda.0 + m[(0, 1)] * lambda.1;
    let mw = m[(1, 0)] * lambda.0 + m[(1, 1)] * lambda.1;
    let lhs = time_frequency_shift(f, mx, mw)?;
    let inv = apply_word_grid(f, &word.inverse(), cfg)?.field;
    let shifted = time_frequency_shift(&inv, lambda.0, lambda.1)?;
    let rhs = apply_word_grid(&shifted, word, cfg)?.field;
    let inner: Complex64 = lhs.values.iter().zip(&rhs.values).map(|(a, b)| b.conj() * a).sum();
    let cst = if inner.norm() > 0.0 { inner / inner.norm() } else { c(1.0, 0.0) };
    let diff: f64 = lhs
        .values
        .iter()
        .zip(&rhs.values)
        .map(|(a, b)| (a - cst * b).norm_sqr())
        .sum::<f64>()
        * f.cell_volume();
    Ok(diff.sqrt() / f.l2_norm())
}

/// Grid-friendly word for the scalar rotation `R_{e^{i theta}}`: a power of
/// the Fourier transform followed by a rotation with angle in `[pi/4, 3pi/4]`,
/// so that its chirps are bounded by 1 and its dilation by `1/sqrt 2`.
pub fn grid_scalar_rotation_word(theta: f64) -> GeneratorWord {
    let mut m = ((theta - PI / 2.0) / (PI / 2.0)).round() as i64;
    let mut rest = theta - m as f64 * PI / 2.0;
    if rest < PI / 4.0 - 1e-15 {
        rest += PI / 2.0;
        m -= 1;
    }
    let mut letters = Vec::new();
    if (rest - PI / 2.0).abs() < 1e-15 {
        letters.push(Letter::PartialFourier(vec![0]));
    } else {
        let cot = rest.cos() / rest.sin();
        letters.push(Letter::Chirp(RMat::from_element(1, 1, cot)));
        letters.push(Letter::Dilation(RMat::from_element(1, 1, rest.sin())));
        letters.push(Letter::PartialFourier(vec![0]));
        letters.push(Letter::Chirp(RMat::from_element(1, 1, cot)));
    }
    // R_{pi/2}^m with m reduced mod 4; F^2 is the parity, F^{-1} = parity F
    match m.rem_euclid(4) {
        0 => {}
        1 => letters.push(Letter::PartialFourier(vec![0])),
        2 => letters.push(Letter::Dilation(RMat::from_element(1, 1, -1.0))),
        _ => {
            letters.push(Letter::Dilation(RMat::from_element(1, 1, -1.0)));
            letters.push(Letter::PartialFourier(vec![0]));
        }
    }
    GeneratorWord { n: 1, letters }.simplified()
}

/// Lifts a word in dimension `m` to act on the axes `offset..offset + m` of
/// dimension `n`.
pub fn lift_word(word: &GeneratorWord, offset: usize, n: usize) -> GeneratorWord {
    let m = word.n;
    let embed = |a: &RMat, fill: f64| {
        let mut out = RMat::identity(n, n) * fill;
        out.view_mut((offset, offset), (m, m)).copy_from(a);
        out
    };
    let letters = word
        .letters
        .iter()
        .map(|l| match l {
            Letter::Chirp(q) => Letter::Chirp(embed(q, 0.0)),
            Letter::Dilation(d) => Letter::Dilation(embed(d, 1.0)),
            Letter::PartialFourier(axes) => {
                Letter::PartialFourier(axes.iter().map(|a| a + offset).collect())
            }
        })
        .collect();
    GeneratorWord { n, letters }
}

/// L2-normalized Hermite function `h_n(t) = c_n H_n(sqrt(2 pi) t) exp(-pi t^2)`.
pub fn hermite_function(n: usize, t: f64) -> f64 {
    let x = (2.0 * PI).sqrt() * t;
    let scale = (2.0 * PI).powf(0.25);
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * x * x).exp();
    for k in 0..n {
        let next = (2.0 / (k + 1) as f64).sqrt() * x * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    scale * cur
}

/// Smooth bump `exp(-1 / (1 - r^2))`, `r = |x - center| / half_width`, on one axis.
pub fn bump(x: f64, center: f64, half_width: f64) -> f64 {
    let r = (x - center) / half_width;
    if r.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r * r)).exp()
    }
}
