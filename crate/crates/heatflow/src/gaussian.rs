//! Closed-form calculus of isotropic Gaussians and Gaussian mixtures.
//!
//! Everything here is exact up to floating point: heat evolution, convolution,
//! powers and Lp norms of single Gaussians have closed forms, and mixtures are
//! closed under heat flow. The grid code treats this module as its oracle.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Points live in at most two dimensions; d = 1 uses the first slot.
pub type Point = [f64; 2];

pub(crate) fn norm_sq(x: Point, d: usize) -> f64 {
    x[..d].iter().map(|c| c * c).sum()
}

/// c * exp(-a |x - mu|^2) with c, a > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicGaussian {
    pub amplitude: f64,
    pub decay: f64,
    pub center: Point,
    pub dim: usize,
}

impl IsotropicGaussian {
    pub fn new(amplitude: f64, decay: f64, center: Point, dim: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::BadDimension(dim));
        }
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::NonPositive { name: "amplitude", value: amplitude });
        }
        if !(decay > 0.0) || !decay.is_finite() {
            return Err(Error::NonPositive { name: "decay", value: decay });
        }
        Ok(Self { amplitude, decay, center, dim })
    }

    pub fn eval(&self, x: Point) -> f64 {
        let dx = [x[0] - self.center[0], x[1] - self.center[1]];
        self.amplitude * (-self.decay * norm_sq(dx, self.dim)).exp()
    }

    /// Total integral c (pi/a)^{d/2}.
    pub fn mass(&self) -> f64 {
        self.amplitude * (PI / self.decay).powf(self.dim as f64 / 2.0)
    }
}

/// The heat kernel H_t(x) = t^{-d/2} exp(-pi |x|^2 / t), unit mass for all t.
pub fn heat_kernel(t: f64, dim: usize) -> Result<IsotropicGaussian> {
    if !(t > 0.0) {
        return Err(Error::NonPositive { name: "t", value: t });
    }
    IsotropicGaussian::new(t.powf(-(dim as f64) / 2.0), PI / t, [0.0; 2], dim)
}

/// Closed-form convolution of two isotropic Gaussians.
pub fn convolve_gaussians(
    g1: &IsotropicGaussian,
    g2: &IsotropicGaussian,
) -> Result<IsotropicGaussian> {
    if g1.dim != g2.dim {
        return Err(Error::DimensionMismatch(g1.dim, g2.dim));
    }
    let (a1, a2) = (g1.decay, g2.decay);
    let amplitude = g1.amplitude * g2.amplitude * (PI / (a1 + a2)).powf(g1.dim as f64 / 2.0);
    let decay = a1 * a2 / (a1 + a2);
    let center = [g1.center[0] + g2.center[0], g1.center[1] + g2.center[1]];
    IsotropicGaussian::new(amplitude, decay, center, g1.dim)
}

/// Pointwise power g^s, again an isotropic Gaussian.
pub fn gaussian_power(g: &IsotropicGaussian, s: f64) -> Result<IsotropicGaussian> {
    if !(s > 0.0) {
        return Err(Error::NonPositive { name: "s", value: s });
    }
    IsotropicGaussian::new(g.amplitude.powf(s), s * g.decay, g.center, g.dim)
}

/// ||g||_p = c (pi/(a p))^{d/(2p)}, valid for every p > 0.
pub fn gaussian_lp_norm(g: &IsotropicGaussian, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::NonPositive { name: "p", value: p });
    }
    Ok(g.amplitude * (PI / (g.decay * p)).powf(g.dim as f64 / (2.0 * p)))
}

/// Nonempty sum of same-dimension Gaussians; strictly positive everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    terms: Vec<IsotropicGaussian>,
}

impl GaussianMixture {
    pub fn new(terms: Vec<IsotropicGaussian>) -> Result<Self> {
        let first = terms.first().ok_or(Error::FieldNotPositive)?;
        let dim = first.dim;
        for t in &terms {
            if t.dim != dim {
                return Err(Error::DimensionMismatch(dim, t.dim));
            }
        }
        Ok(Self { terms })
    }

    pub fn single(g: IsotropicGaussian) -> Self {
        Self { terms: vec![g] }
    }

    pub fn terms(&self) -> &[IsotropicGaussian] {
        &self.terms
    }

    pub fn dim(&self) -> usize {
        self.terms[0].dim
    }

    pub fn mass(&self) -> f64 {
        self.terms.iter().map(|g| g.mass()).sum()
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.terms.iter().map(|g| g.eval(x)).sum()
    }

    /// (grad u / u)(x), computed analytically.
    pub fn log_gradient(&self, x: Point) -> Point {
        let mut grad = [0.0; 2];
        let mut value = 0.0;
        for g in &self.terms {
            let v = g.eval(x);
            value += v;
            for m in 0..g.dim {
                grad[m] += v * (-2.0 * g.decay) * (x[m] - g.center[m]);
            }
        }
        [grad[0] / value, grad[1] / value]
    }

    /// Laplacian of the mixture, analytically.
    pub fn laplacian(&self, x: Point) -> f64 {
        let d = self.dim() as f64;
        self.terms
            .iter()
            .map(|g| {
                let dx = [x[0] - g.center[0], x[1] - g.center[1]];
                let r2 = norm_sq(dx, g.dim);
                g.eval(x) * (4.0 * g.decay * g.decay * r2 - 2.0 * g.decay * d)
            })
            .sum()
    }

    /// div(grad u / u)(x) = (u * Lap u - |grad u|^2) / u^2, analytically.
    pub fn log_gradient_divergence(&self, x: Point) -> f64 {
        let u = self.eval(x);
        let lg = self.log_gradient(x);
        self.laplacian(x) / u - norm_sq(lg, self.dim())
    }

    /// Heat evolution under d_t u = (sigma / 4 pi) Lap u for time t >= 0.
    /// sigma = 0 flows are constant in time.
    pub fn evolve(&self, sigma: f64, t: f64) -> Result<GaussianMixture> {
        if sigma < 0.0 {
            return Err(Error::NonPositive { name: "sigma", value: sigma });
        }
        if !(t > 0.0) {
            return Err(Error::NonPositive { name: "t", value: t });
        }
        if sigma == 0.0 {
            return Ok(self.clone());
        }
        let kernel = heat_kernel(sigma * t, self.dim())?;
        let terms = self
            .terms
            .iter()
            .map(|g| convolve_gaussians(g, &kernel))
            .collect::<Result<Vec<_>>>()?;
        GaussianMixture::new(terms)
    }

    /// Signed-time evolution used by finite-difference probes. Backwards
    /// steps are valid only while every term's decay stays positive.
    pub(crate) fn evolve_signed(&self, sigma: f64, t: f64) -> Result<GaussianMixture> {
        if t >= 0.0 {
            if t == 0.0 || sigma == 0.0 {
                return Ok(self.clone());
            }
            return self.evolve(sigma, t);
        }
        if sigma == 0.0 {
            return Ok(self.clone());
        }
        let d = self.dim() as f64;
        let terms = self
            .terms
            .iter()
            .map(|g| {
                let inv = 1.0 / g.decay + sigma * t / PI;
                if inv <= 0.0 {
                    return Err(Error::NonPositive { name: "deconvolved decay", value: inv });
                }
                let decay = 1.0 / inv;
                let amplitude = g.amplitude * (decay / g.decay).powf(d / 2.0);
                IsotropicGaussian::new(amplitude, decay, g.center, g.dim)
            })
            .collect::<Result<Vec<_>>>()?;
        GaussianMixture::new(terms)
    }

    /// Largest distance from the origin at which any term is still above
    /// `1e-14` of its own peak; used when auto-sizing periodic domains.
    pub fn extent(&self) -> f64 {
        self.terms
            .iter()
            .map(|g| {
                let c = norm_sq(g.center, g.dim).sqrt();
                c + (TAIL_LOG / g.decay).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// -ln(1e-14), the relative tail threshold behind every wraparound check.
pub(crate) const TAIL_LOG: f64 = 32.23619130191664;

/// Compactly supported positive atomic measure, the initial data of
/// the monotonicity corollaries.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    pub atoms: Vec<(Point, f64)>,
    pub support_radius: f64,
    pub dim: usize,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<(Point, f64)>, dim: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::BadDimension(dim));
        }
        if atoms.is_empty() {
            return Err(Error::FieldNotPositive);
        }
        let mut radius: f64 = 0.0;
        for (loc, w) in &atoms {
            if !(*w > 0.0) {
                return Err(Error::NonPositive { name: "atom weight", value: *w });
            }
            radius = radius.max(norm_sq(*loc, dim).sqrt());
        }
        Ok(Self { atoms, support_radius: radius, dim })
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }
}

/// Solve d_t u = (sigma / 4 pi) Lap u with atomic initial data: one heat
/// kernel per atom. A measure is not a function, so sigma = 0 is rejected.
pub fn evolve_atoms(mu: &AtomicMeasure, sigma: f64, t: f64) -> Result<GaussianMixture> {
    if !(t > 0.0) {
        return Err(Error::NonPositive { name: "t", value: t });
    }
    if sigma <= 0.0 {
        return Err(Error::AtomicSigmaZero);
    }
    let kernel = heat_kernel(sigma * t, mu.dim)?;
    let terms = mu
        .atoms
        .iter()
        .map(|(loc, w)| {
            IsotropicGaussian::new(w * kernel.amplitude, kernel.decay, *loc, mu.dim)
        })
        .collect::<Result<Vec<_>>>()?;
    GaussianMixture::new(terms)
}

/// Initial datum of a single flow: either an atomic measure or a mixture.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    Atoms(AtomicMeasure),
    Mixture(GaussianMixture),
}

impl InitialDatum {
    pub fn dim(&self) -> usize {
        match self {
            InitialDatum::Atoms(m) => m.dim,
            InitialDatum::Mixture(m) => m.dim(),
        }
    }

    pub fn evolve(&self, sigma: f64, t: f64) -> Result<GaussianMixture> {
        match self {
            InitialDatum::Atoms(m) => evolve_atoms(m, sigma, t),
            InitialDatum::Mixture(m) => m.evolve(sigma, t),
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            InitialDatum::Atoms(m) => m.total_mass(),
            InitialDatum::Mixture(m) => m.mass(),
        }
    }
}
