//! Exponent and diffusion-rate algebra.
//!
//! Owns the scaling relation sum 1/p_j = n - 1 + 1/p, the sigma balance
//! relation, the sharp Young constant, the algebraic identities behind the
//! closure theorem, and the weighted (extended) parameter set.

use crate::error::{Error, Result};
use crate::gaussian::{convolve_gaussians, gaussian_lp_norm, gaussian_power, heat_kernel};

const EXACT_TOL: f64 = 1e-12;

/// (p_1, ..., p_n, p) with all p_j on one side of 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentTuple {
    pub p_list: Vec<f64>,
    pub p: f64,
    /// +1 when all p_j >= 1 (forward Young), -1 when all p_j <= 1 (reverse).
    pub regime: i8,
}

impl ExponentTuple {
    pub fn n(&self) -> usize {
        self.p_list.len()
    }

    pub fn epsilon(&self) -> f64 {
        self.regime as f64
    }

    /// Residual of sum 1/p_j - (n - 1 + 1/p).
    pub fn scaling_residual(&self) -> f64 {
        let inv_sum: f64 = self.p_list.iter().map(|p| 1.0 / p).sum();
        inv_sum - (self.n() as f64 - 1.0 + 1.0 / self.p)
    }
}

/// Solve the scaling relation for p and classify the regime.
pub fn complete_p(p_list: &[f64]) -> Result<ExponentTuple> {
    if p_list.len() < 2 {
        return Err(Error::TooFewExponents { required: 2, got: p_list.len() });
    }
    for &pj in p_list {
        if !(pj > 0.0) || !pj.is_finite() {
            return Err(Error::NonPositive { name: "p_j", value: pj });
        }
    }
    let all_ge = p_list.iter().all(|&pj| pj >= 1.0 - EXACT_TOL);
    let all_le = p_list.iter().all(|&pj| pj <= 1.0 + EXACT_TOL);
    if !all_ge && !all_le {
        return Err(Error::MixedRegime);
    }
    let inv_p = p_list.iter().map(|p| 1.0 / p).sum::<f64>() - (p_list.len() as f64 - 1.0);
    if inv_p <= 0.0 {
        return Err(Error::InfiniteP);
    }
    Ok(ExponentTuple {
        p_list: p_list.to_vec(),
        p: 1.0 / inv_p,
        regime: if all_ge { 1 } else { -1 },
    })
}

/// (sigma_1, ..., sigma_n) with the pairwise balance relation, plus the
/// effective rate sigma = (sum sigma_j p_j) / p of the convolution flow.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionRates {
    pub sigma_list: Vec<f64>,
    pub sigma_eff: f64,
}

impl DiffusionRates {
    /// Balance residual max over pairs of
    /// (1/p_j)(1 - 1/p_j) sigma_k - (1/p_k)(1 - 1/p_k) sigma_j.
    pub fn balance_residual(&self, tuple: &ExponentTuple) -> f64 {
        let coeff: Vec<f64> =
            tuple.p_list.iter().map(|&p| (1.0 / p) * (1.0 - 1.0 / p)).collect();
        let mut worst: f64 = 0.0;
        for j in 0..coeff.len() {
            for k in 0..coeff.len() {
                worst = worst
                    .max((coeff[j] * self.sigma_list[k] - coeff[k] * self.sigma_list[j]).abs());
            }
        }
        worst
    }

    /// Same rates scaled by a common factor; the monotonicity statements are
    /// invariant under this free scale.
    pub fn scaled(&self, factor: f64) -> DiffusionRates {
        DiffusionRates {
            sigma_list: self.sigma_list.iter().map(|s| s * factor).collect(),
            sigma_eff: self.sigma_eff * factor,
        }
    }

    pub fn max_sigma(&self) -> f64 {
        self.sigma_list.iter().cloned().fold(0.0, f64::max)
    }
}

/// The normalization sigma_j = |1 - 1/p_j| / p_j. It satisfies the balance
/// relation in both regimes and vanishes exactly when p_j = 1.
pub fn canonical_sigmas(tuple: &ExponentTuple) -> DiffusionRates {
    let sigma_list: Vec<f64> =
        tuple.p_list.iter().map(|&p| (1.0 - 1.0 / p).abs() / p).collect();
    from_sigma_list(tuple, sigma_list)
}

/// Build rates from explicit sigmas (no balance check; callers that need the
/// invariant should assert `balance_residual` themselves — the negative
/// controls deliberately break it).
pub fn from_sigma_list(tuple: &ExponentTuple, sigma_list: Vec<f64>) -> DiffusionRates {
    let sigma_eff = sigma_list
        .iter()
        .zip(&tuple.p_list)
        .map(|(s, p)| s * p)
        .sum::<f64>()
        / tuple.p;
    DiffusionRates { sigma_list, sigma_eff }
}

/// C_r = (r^{1/r} / |r'|^{1/r'})^{1/2} with r' = r/(r-1) signed, and the
/// limit convention C_1 = 1.
pub fn sharp_constant(r: f64) -> f64 {
    if (r - 1.0).abs() < EXACT_TOL {
        return 1.0;
    }
    let rp = r / (r - 1.0);
    (r.powf(1.0 / r) / rp.abs().powf(1.0 / rp)).sqrt()
}

/// (prod_j C_{p_j} / C_p)^d, the sharp Young constant of the tuple.
pub fn young_constant(tuple: &ExponentTuple, dim: usize) -> f64 {
    let prod: f64 = tuple.p_list.iter().map(|&p| sharp_constant(p)).product();
    (prod / sharp_constant(tuple.p)).powi(dim as i32)
}

/// Report from `verify_identities`: residuals of the printed identity (e:2)
/// and of the gradient-coefficient identity the main lemma requires, plus
/// both sides of (e:1) exactly as printed (which disagree; see the docs of
/// `verify_identities`).
#[derive(Debug, Clone)]
pub struct IdentityReport {
    pub cross_lhs: f64,
    pub cross_rhs: f64,
    pub cross_residual: f64,
    pub gradient_lhs: f64,
    pub gradient_rhs: f64,
    pub gradient_residual: f64,
    pub printed_e1_lhs: f64,
    pub printed_e1_rhs: f64,
}

/// Check the two scalar identities used in the proof of the closure theorem
/// (n = 2). With A = (p sigma_1 / p_1)|1 - 1/p_1| and B likewise:
///
///   2 sqrt(A B)  =  eps / (p_1 p_2) * (sigma_1 (p - p_1) + sigma_2 (p - p_2))
///
/// and the gradient-coefficient identity
///
///   (p-1)(sigma_1 p_1 + sigma_2 p_2)
///     = p sigma_1 (p_1 - 1) + p sigma_2 (p_2 - 1) + eps p_1 p_2 * 2 sqrt(A B).
///
/// The article prints the second identity without the p_1 p_2 factor on the
/// cross term; on the symmetric tuple (4/3, 4/3, 2) with sigma = 3/16 that
/// printed form evaluates to 25/64 vs 1/2. The report carries both printed
/// sides so the discrepancy stays documented.
pub fn verify_identities(tuple: &ExponentTuple, rates: &DiffusionRates) -> Result<IdentityReport> {
    if tuple.n() != 2 {
        return Err(Error::TooFewExponents { required: 2, got: tuple.n() });
    }
    let (p1, p2, p) = (tuple.p_list[0], tuple.p_list[1], tuple.p);
    let (s1, s2) = (rates.sigma_list[0], rates.sigma_list[1]);
    let eps = tuple.epsilon();

    let a = (p * s1 / p1) * (1.0 - 1.0 / p1).abs();
    let b = (p * s2 / p2) * (1.0 - 1.0 / p2).abs();
    let cross = 2.0 * (a * b).sqrt();

    let cross_lhs = cross;
    let cross_rhs = eps / (p1 * p2) * (s1 * (p - p1) + s2 * (p - p2));
    let gradient_lhs = (p - 1.0) * (s1 * p1 + s2 * p2);
    let gradient_rhs = p * s1 * (p1 - 1.0) + p * s2 * (p2 - 1.0) + eps * p1 * p2 * cross;

    Ok(IdentityReport {
        cross_lhs,
        cross_rhs,
        cross_residual: cross_lhs - cross_rhs,
        gradient_lhs,
        gradient_rhs,
        gradient_residual: gradient_lhs - gradient_rhs,
        printed_e1_lhs: p * s1 * (p1 - 1.0) + p * s2 * (p2 - 1.0) + cross,
        printed_e1_rhs: gradient_lhs,
    })
}

/// Parameters of the weighted closure theorem (relaxed scaling relation).
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub p: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Time-weight exponent beta = d (alpha1 + alpha2 - 1 - 1/p) / 2.
    pub beta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// sigma = (sigma_1/alpha_1 + sigma_2/alpha_2) / p of the output flow.
    pub sigma_eff: f64,
}

/// Validate the weighted hypotheses and fill sigmas, beta and lambdas.
/// Sigmas use the normalization sigma_j = alpha_j (1 - rho_j alpha_j),
/// which satisfies the extended balance relation identically.
pub fn extended_params(
    alpha1: f64,
    alpha2: f64,
    rho1: f64,
    rho2: f64,
    p: f64,
    dim: usize,
) -> Result<ExtendedParams> {
    for (name, v, lo, hi) in [
        ("alpha1", alpha1, f64::MIN_POSITIVE, 1.0),
        ("alpha2", alpha2, f64::MIN_POSITIVE, 1.0),
        ("rho1", rho1, 0.0, 1.0),
        ("rho2", rho2, 0.0, 1.0),
    ] {
        if !(v >= lo && v <= hi) {
            return Err(Error::OutOfRange { name, value: v });
        }
    }
    if !(p >= 1.0) {
        return Err(Error::OutOfRange { name: "p", value: p });
    }
    let weight = rho1 * alpha1 + rho2 * alpha2 - (1.0 + 1.0 / p);
    if weight.abs() > EXACT_TOL {
        return Err(Error::WeightRelation(weight));
    }
    if alpha1 + alpha2 < 1.0 + 1.0 / p - EXACT_TOL {
        return Err(Error::OutOfRange { name: "alpha1+alpha2", value: alpha1 + alpha2 });
    }
    let sigma1 = alpha1 * (1.0 - rho1 * alpha1);
    let sigma2 = alpha2 * (1.0 - rho2 * alpha2);
    let beta = dim as f64 * (alpha1 + alpha2 - 1.0 - 1.0 / p) / 2.0;
    let denom = 2.0 - rho1 * alpha1 - rho2 * alpha2;
    let lambda1 = ((1.0 - rho1 * alpha1) / denom).powi(2);
    let lambda2 = ((1.0 - rho2 * alpha2) / denom).powi(2);
    let sigma_eff = (sigma1 / alpha1 + sigma2 / alpha2) / p;
    Ok(ExtendedParams {
        alpha1,
        alpha2,
        rho1,
        rho2,
        p,
        sigma1,
        sigma2,
        beta,
        lambda1,
        lambda2,
        sigma_eff,
    })
}

/// Gaussian-oracle route to the Young constant: the composed norm
/// || H_{s1}^{1/p1} * ... * H_{sn}^{1/pn} ||_p evaluated in closed form.
pub fn young_constant_via_gaussians(
    tuple: &ExponentTuple,
    rates: &DiffusionRates,
    dim: usize,
) -> Result<f64> {
    let mut acc: Option<crate::gaussian::IsotropicGaussian> = None;
    for (pj, sj) in tuple.p_list.iter().zip(&rates.sigma_list) {
        let g = gaussian_power(&heat_kernel(*sj, dim)?, 1.0 / pj)?;
        acc = Some(match acc {
            None => g,
            Some(prev) => convolve_gaussians(&prev, &g)?,
        });
    }
    gaussian_lp_norm(&acc.expect("nonempty tuple"), tuple.p)
}
