//! Periodic sampled fields on [0, L)^d with FFT convolution, spectral heat
//! steps, spectral differential operators and quadrature norms.
//!
//! Fourier convention e^{-2 pi i x.xi}: H_t has multiplier e^{-pi t |xi|^2}
//! and the Laplacian has symbol -4 pi^2 |xi|^2, matching the pi-normalized
//! heat kernel.

use crate::error::{Error, Result};
use crate::gaussian::{GaussianMixture, Point, TAIL_LOG};
use rustfft::{num_complex::Complex, FftPlanner};
use std::f64::consts::PI;
use std::io::Write;

/// Relative magnitude below which negative FFT output is round-off noise.
const FFT_NOISE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    /// Period L of the torus [0, L)^d.
    pub period: f64,
    /// Points per dimension, a power of two >= 16.
    pub n: usize,
}

impl GridSpec {
    pub fn new(dim: usize, period: f64, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::BadDimension(dim));
        }
        if !(period > 0.0) {
            return Err(Error::NonPositive { name: "period", value: period });
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::BadGridSize(n));
        }
        Ok(Self { dim, period, n })
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    pub fn node_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Coordinates of node `idx` (row-major in d = 2).
    pub fn node(&self, idx: usize) -> Point {
        let h = self.spacing();
        match self.dim {
            1 => [idx as f64 * h, 0.0],
            _ => [(idx / self.n) as f64 * h, (idx % self.n) as f64 * h],
        }
    }

    /// Wrap a displacement component into [-L/2, L/2).
    pub fn wrap(&self, x: f64) -> f64 {
        let l = self.period;
        let mut y = x % l;
        if y < -l / 2.0 {
            y += l;
        } else if y >= l / 2.0 {
            y -= l;
        }
        y
    }

    /// Wrapped distance of node `idx` from a point.
    pub fn wrapped_distance(&self, idx: usize, from: Point) -> f64 {
        let x = self.node(idx);
        let dx = self.wrap(x[0] - from[0]);
        let dy = if self.dim == 2 { self.wrap(x[1] - from[1]) } else { 0.0 };
        (dx * dx + dy * dy).sqrt()
    }

    /// Signed frequency k/L of bin `k`.
    fn freq(&self, k: usize) -> f64 {
        let k = k as isize;
        let n = self.n as isize;
        let signed = if k < n / 2 { k } else { k - n };
        signed as f64 / self.period
    }

    /// Gradient multiplier frequency: like `freq` but zero at Nyquist, where
    /// the first derivative of the interpolant has no well-defined sign.
    fn grad_freq(&self, k: usize) -> f64 {
        if k == self.n / 2 {
            0.0
        } else {
            self.freq(k)
        }
    }
}

/// Sampled nonnegative scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.node_count() {
            return Err(Error::SpecMismatch);
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        let len = spec.node_count();
        Self { spec, values: vec![0.0; len] }
    }

    /// Riemann mass h^d sum(values).
    pub fn mass(&self) -> f64 {
        let hd = self.spec.spacing().powi(self.spec.dim as i32);
        hd * self.values.iter().sum::<f64>()
    }

    /// (h^d sum values^p)^{1/p}, p > 0.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p > 0.0) {
            return Err(Error::NonPositive { name: "p", value: p });
        }
        let hd = self.spec.spacing().powi(self.spec.dim as i32);
        let sum: f64 = self.values.iter().map(|&v| if v > 0.0 { v.powf(p) } else { 0.0 }).sum();
        Ok((hd * sum).powf(1.0 / p))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Pointwise power with negative-value clamping at zero.
    pub fn powf(&self, s: f64) -> GridField {
        self.map(|v| if v > 0.0 { v.powf(s) } else { 0.0 })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField { spec: self.spec, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<GridField> {
        if self.spec != other.spec {
            return Err(Error::SpecMismatch);
        }
        let values =
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(GridField { spec: self.spec, values })
    }

    /// One row per node: `x[,y],value`, with a header naming the experiment.
    pub fn dump_csv(&self, w: &mut impl Write, experiment: &str) -> Result<()> {
        writeln!(w, "# experiment={experiment}")?;
        if self.spec.dim == 1 {
            writeln!(w, "x,value")?;
        } else {
            writeln!(w, "x,y,value")?;
        }
        for (i, v) in self.values.iter().enumerate() {
            let p = self.spec.node(i);
            if self.spec.dim == 1 {
                writeln!(w, "{},{}", p[0], v)?;
            } else {
                writeln!(w, "{},{},{}", p[0], p[1], v)?;
            }
        }
        Ok(())
    }
}

/// Sample a mixture at the grid nodes (displacements wrapped onto the torus).
/// Rejects mixtures whose tails reach distance L/2 from their own center at
/// more than 1e-14 of the peak.
pub fn sample_mixture(m: &GaussianMixture, spec: GridSpec) -> Result<GridField> {
    if m.dim() != spec.dim {
        return Err(Error::DimensionMismatch(m.dim(), spec.dim));
    }
    check_wraparound(m, spec.period)?;
    let mut values = Vec::with_capacity(spec.node_count());
    for i in 0..spec.node_count() {
        let x = spec.node(i);
        let mut v = 0.0;
        for g in m.terms() {
            let dx = spec.wrap(x[0] - g.center[0]);
            let dy = if spec.dim == 2 { spec.wrap(x[1] - g.center[1]) } else { 0.0 };
            v += g.amplitude * (-g.decay * (dx * dx + dy * dy)).exp();
        }
        values.push(v);
    }
    GridField::new(spec, values)
}

/// The wraparound precondition alone; errors carry the minimal admissible L.
pub fn check_wraparound(m: &GaussianMixture, period: f64) -> Result<()> {
    let a_min = m.terms().iter().map(|g| g.decay).fold(f64::INFINITY, f64::min);
    let min_l = 2.0 * (TAIL_LOG / a_min).sqrt();
    if period < min_l {
        return Err(Error::Wraparound { min_l, have_l: period });
    }
    Ok(())
}

fn fft_nd(spec: &GridSpec, data: &mut [Complex<f64>], inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(spec.n)
    } else {
        planner.plan_fft_forward(spec.n)
    };
    match spec.dim {
        1 => fft.process(data),
        _ => {
            let n = spec.n;
            fft.process(data); // all rows, contiguous
            // columns via transpose
            let mut col = vec![Complex::default(); n];
            for c in 0..n {
                for r in 0..n {
                    col[r] = data[r * n + c];
                }
                fft.process(&mut col);
                for r in 0..n {
                    data[r * n + c] = col[r];
                }
            }
        }
    }
}

fn to_complex(f: &GridField) -> Vec<Complex<f64>> {
    f.values.iter().map(|&v| Complex::new(v, 0.0)).collect()
}

/// Circular convolution scaled by h^d, without any sign policy. Used
/// internally for signed integrands (gradient-weighted fields).
pub(crate) fn fft_convolve_signed(f: &GridField, g: &GridField) -> Result<GridField> {
    if f.spec != g.spec {
        return Err(Error::SpecMismatch);
    }
    let spec = f.spec;
    let mut a = to_complex(f);
    let mut b = to_complex(g);
    fft_nd(&spec, &mut a, false);
    fft_nd(&spec, &mut b, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= *y;
    }
    fft_nd(&spec, &mut a, true);
    let scale = spec.spacing().powi(spec.dim as i32) / spec.node_count() as f64;
    let values = a.iter().map(|c| c.re * scale).collect();
    GridField::new(spec, values)
}

/// Approximate continuum convolution of two nonnegative fields. Round-off
/// negatives (within 1e-13 of the peak) are clamped at zero; anything more
/// negative signals an upstream bug and errors out.
pub fn fft_convolve(f: &GridField, g: &GridField) -> Result<GridField> {
    let mut out = fft_convolve_signed(f, g)?;
    let peak = out.max_abs();
    let threshold = FFT_NOISE * peak;
    let mut worst = 0.0f64;
    for v in out.values.iter_mut() {
        if *v < 0.0 {
            worst = worst.min(*v);
            if -*v <= threshold {
                *v = 0.0;
            }
        }
    }
    if worst < -threshold {
        return Err(Error::NegativeConvolution(worst / peak.max(f64::MIN_POSITIVE)));
    }
    Ok(out)
}

/// Spectral heat step: multiplier e^{-sigma pi dt |xi|^2} per frequency.
/// sigma = 0 (or dt = 0) returns the field unchanged.
pub fn heat_step(f: &GridField, sigma: f64, dt: f64) -> Result<GridField> {
    if dt < 0.0 {
        return Err(Error::NonPositive { name: "dt", value: dt });
    }
    if sigma == 0.0 || dt == 0.0 {
        return Ok(f.clone());
    }
    let spec = f.spec;
    let mut a = to_complex(f);
    fft_nd(&spec, &mut a, false);
    for (i, c) in a.iter_mut().enumerate() {
        let xi2 = match spec.dim {
            1 => {
                let fx = spec.freq(i);
                fx * fx
            }
            _ => {
                let fx = spec.freq(i / spec.n);
                let fy = spec.freq(i % spec.n);
                fx * fx + fy * fy
            }
        };
        *c *= (-sigma * PI * dt * xi2).exp();
    }
    fft_nd(&spec, &mut a, true);
    let peak = f.max_abs();
    let values = a
        .iter()
        .map(|c| {
            let v = c.re / spec.node_count() as f64;
            if v < 0.0 && -v <= FFT_NOISE * peak {
                0.0
            } else {
                v
            }
        })
        .collect();
    GridField::new(spec, values)
}

/// Exact spectral differentiation of the trigonometric interpolant:
/// gradient components (one per dimension) and the Laplacian.
pub fn spectral_grad_laplacian(f: &GridField) -> Result<(Vec<GridField>, GridField)> {
    let spec = f.spec;
    let mut hat = to_complex(f);
    fft_nd(&spec, &mut hat, false);
    let norm = 1.0 / spec.node_count() as f64;

    let mut grads = Vec::new();
    for axis in 0..spec.dim {
        let mut a = hat.clone();
        for (i, c) in a.iter_mut().enumerate() {
            let fx = match (spec.dim, axis) {
                (1, _) => spec.grad_freq(i),
                (_, 0) => spec.grad_freq(i / spec.n),
                _ => spec.grad_freq(i % spec.n),
            };
            *c *= Complex::new(0.0, 2.0 * PI * fx);
        }
        fft_nd(&spec, &mut a, true);
        grads.push(GridField::new(spec, a.iter().map(|c| c.re * norm).collect())?);
    }

    let mut l = hat;
    for (i, c) in l.iter_mut().enumerate() {
        let xi2 = match spec.dim {
            1 => {
                let fx = spec.freq(i);
                fx * fx
            }
            _ => {
                let fx = spec.freq(i / spec.n);
                let fy = spec.freq(i % spec.n);
                fx * fx + fy * fy
            }
        };
        *c *= -4.0 * PI * PI * xi2;
    }
    fft_nd(&spec, &mut l, true);
    let lap = GridField::new(spec, l.iter().map(|c| c.re * norm).collect())?;
    Ok((grads, lap))
}
