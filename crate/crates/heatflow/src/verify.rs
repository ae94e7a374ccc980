//! Built-in acceptance battery: thirteen self-contained criteria covering the
//! sharp constants, both monotonicity regimes, the derivative formula, the
//! closure and weighted-closure residuals, the convolution lemma, the scalar
//! identities, endpoint limits, the Fourier quantity and the pointwise
//! closures. All randomness is seeded, so every run checks the same
//! configurations.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::exponents::{
    canonical_sigmas, complete_p, extended_params, from_sigma_list, verify_identities,
    young_constant, young_constant_via_gaussians, ExponentTuple,
};
use crate::functionals::{
    auto_period, endpoint_limits, fold_convolution, hausdorff_young_value, q_curve, q_value,
    time_grid,
};
use crate::gaussian::{
    evolve_atoms, gaussian_lp_norm, gaussian_power, heat_kernel, AtomicMeasure, GaussianMixture,
    InitialDatum, IsotropicGaussian,
};
use crate::grid::{fft_convolve, sample_mixture, GridSpec};
use crate::monotonicity::{
    closure_residual, lemma_main_residual, pointwise_closure_residual, q_prime_remark,
    weighted_closure_residual, PointwiseKind,
};

/// One acceptance criterion: `pass` compares `measured` against `tolerance`
/// (and may fold in auxiliary sub-checks described by the criterion).
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub name: &'static str,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CriterionResult {
    pub fn row(&self) -> String {
        format!(
            "{:<28} measured={:<14.6e} expected={:<10.3e} tol={:<10.3e} {}",
            self.name,
            self.measured,
            self.expected,
            self.tolerance,
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

pub const CRITERION_NAMES: [&str; 13] = [
    "gaussian_constant_identity",
    "forward_monotonicity",
    "reverse_monotonicity",
    "threefold_monotonicity",
    "extremal_flatness",
    "derivative_formula",
    "closure_residuals",
    "convolution_lemma",
    "algebraic_identities",
    "endpoint_sandwich",
    "fourier_quantity",
    "weighted_closure",
    "pointwise_closures",
];

pub fn criterion_names() -> &'static [&'static str] {
    &CRITERION_NAMES
}

/// Run the full battery. Coarse mode shrinks the grids and relaxes every
/// tolerance by x100, as a convergence-order sanity check.
pub fn run_all(coarse: bool) -> Result<Vec<CriterionResult>> {
    Ok(vec![
        gaussian_constant_identity(coarse)?,
        forward_monotonicity(coarse)?,
        reverse_monotonicity(coarse)?,
        threefold_monotonicity(coarse)?,
        extremal_flatness(coarse)?,
        derivative_formula(coarse)?,
        closure_residuals(coarse)?,
        convolution_lemma(coarse)?,
        algebraic_identities(coarse)?,
        endpoint_sandwich(coarse)?,
        fourier_quantity(coarse)?,
        weighted_closure(coarse)?,
        pointwise_closures(coarse)?,
    ])
}

fn relax(tol: f64, coarse: bool) -> f64 {
    if coarse {
        tol * 100.0
    } else {
        tol
    }
}

fn grid_n(n: usize, coarse: bool) -> usize {
    if coarse {
        (n / 4).max(128)
    } else {
        n
    }
}

/// Coarse grids cannot resolve the sharp kernels right after t = 0, so the
/// coarse battery starts later; the relative error of sampling e^{-a x^2}
/// with spacing h grows like e^{-pi^2 / (a h^2)}.
fn start_time(coarse: bool) -> f64 {
    if coarse {
        0.1
    } else {
        1e-2
    }
}

fn atoms(list: &[(f64, f64)]) -> Result<AtomicMeasure> {
    AtomicMeasure::new(list.iter().map(|&(x, w)| ([x, 0.0], w)).collect(), 1)
}

fn mixture(terms: &[(f64, f64, f64)]) -> Result<GaussianMixture> {
    GaussianMixture::new(
        terms
            .iter()
            .map(|&(c, a, mu)| IsotropicGaussian::new(c, a, [mu, 0.0], 1))
            .collect::<Result<Vec<_>>>()?,
    )
}

fn random_atoms(rng: &mut ChaCha8Rng) -> Result<AtomicMeasure> {
    let count = rng.gen_range(2..=3usize);
    let list: Vec<(f64, f64)> = (0..count)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.5..1.5)))
        .collect();
    atoms(&list)
}

fn random_mixture(rng: &mut ChaCha8Rng) -> Result<GaussianMixture> {
    let count = rng.gen_range(1..=2usize);
    let terms: Vec<(f64, f64, f64)> = (0..count)
        .map(|_| {
            (rng.gen_range(0.5..1.5), rng.gen_range(2.0..6.0), rng.gen_range(-0.6..0.6))
        })
        .collect();
    mixture(&terms)
}

/// Draw an admissible exponent pair in the given regime; the scaling relation
/// then fixes p.
fn random_tuple(rng: &mut ChaCha8Rng, reverse: bool) -> ExponentTuple {
    loop {
        let (lo, hi) = if reverse { (0.65, 0.95) } else { (1.25, 2.2) };
        let p1 = rng.gen_range(lo..hi);
        let p2 = rng.gen_range(lo..hi);
        if 1.0 / p1 + 1.0 / p2 > 1.05 {
            return complete_p(&[p1, p2]).expect("pair admissible by construction");
        }
    }
}

/// Criterion 1: the closed-form sharp constant against two independent
/// routes, the Gaussian oracle (1e-10) and the periodic grid (1e-4).
fn gaussian_constant_identity(coarse: bool) -> Result<CriterionResult> {
    let tuples = [
        complete_p(&[4.0 / 3.0, 4.0 / 3.0])?,
        complete_p(&[1.5, 1.5])?,
        complete_p(&[2.0 / 3.0, 2.0 / 3.0])?,
    ];
    let spec = GridSpec::new(1, 16.0, 256)?;
    let mut worst_oracle: f64 = 0.0;
    let mut worst_grid: f64 = 0.0;
    for tuple in &tuples {
        let rates = canonical_sigmas(tuple);
        let closed = young_constant(tuple, 1);
        let oracle = young_constant_via_gaussians(tuple, &rates, 1)?;
        worst_oracle = worst_oracle.max((oracle - closed).abs() / closed);

        let fields = tuple
            .p_list
            .iter()
            .zip(&rates.sigma_list)
            .map(|(_, &s)| {
                sample_mixture(&GaussianMixture::single(heat_kernel(s, 1)?), spec)
            })
            .collect::<Result<Vec<_>>>()?;
        let grid = fold_convolution(&fields, tuple)?.lp_norm(tuple.p)?;
        worst_grid = worst_grid.max((grid - closed).abs() / closed);
    }
    let tol = relax(1e-4, coarse);
    Ok(CriterionResult {
        name: "gaussian_constant_identity",
        measured: worst_grid,
        expected: 0.0,
        tolerance: tol,
        pass: worst_grid <= tol && worst_oracle <= relax(1e-10, coarse),
    })
}

fn monotonicity_battery(
    configs: usize,
    seed: u64,
    reverse: bool,
    coarse: bool,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let times = time_grid(start_time(coarse), 1e2, 32, true)?;
    // The p-th power under the output norm narrows the convolution peak by
    // sqrt(p); with p up to ~20 at the earliest time this needs the finer
    // grid, or the quadrature alias error shows up as a fake violation.
    let n = grid_n(8192, coarse);
    let mut worst: f64 = 0.0;
    for _ in 0..configs {
        let tuple = random_tuple(&mut rng, reverse);
        let rates = canonical_sigmas(&tuple);
        let flows: Vec<InitialDatum> = if reverse {
            (0..tuple.n())
                .map(|_| Ok(InitialDatum::Mixture(random_mixture(&mut rng)?)))
                .collect::<Result<Vec<_>>>()?
        } else {
            (0..tuple.n())
                .map(|_| Ok(InitialDatum::Atoms(random_atoms(&mut rng)?)))
                .collect::<Result<Vec<_>>>()?
        };
        let period = auto_period(1.6, rates.max_sigma(), 1e2);
        let spec = GridSpec::new(1, period, n)?;
        let curve = q_curve(&flows, &tuple, &rates, 0.0, &times, spec)?;
        worst = worst.max(curve.worst_monotonicity_violation());
    }
    Ok(worst)
}

/// Criterion 2: adjacent Q differences have the forward sign on random
/// atomic data, regime +1.
fn forward_monotonicity(coarse: bool) -> Result<CriterionResult> {
    let worst = monotonicity_battery(20, 2, false, coarse)?;
    let tol = relax(1e-9, coarse);
    Ok(CriterionResult {
        name: "forward_monotonicity",
        measured: worst,
        expected: 0.0,
        tolerance: tol,
        pass: worst <= tol,
    })
}

/// Criterion 3: same, reversed sign on mixture data, regime -1.
fn reverse_monotonicity(coarse: bool) -> Result<CriterionResult> {
    let worst = monotonicity_battery(20, 3, true, coarse)?;
    let tol = relax(1e-9, coarse);
    Ok(CriterionResult {
        name: "reverse_monotonicity",
        measured: worst,
        expected: 0.0,
        tolerance: tol,
        pass: worst <= tol,
    })
}

/// Criterion 4: three-fold convolution, tuple (4/3, 4/3, 4/3) with p = 4.
fn threefold_monotonicity(coarse: bool) -> Result<CriterionResult> {
    let tuple = complete_p(&[4.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0])?;
    let rates = canonical_sigmas(&tuple);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let times = time_grid(start_time(coarse), 1e2, 32, true)?;
    let n = grid_n(4096, coarse);
    let period = auto_period(1.6, rates.max_sigma(), 1e2);
    let spec = GridSpec::new(1, period, n)?;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let flows: Vec<InitialDatum> = (0..3)
            .map(|_| Ok(InitialDatum::Atoms(random_atoms(&mut rng)?)))
            .collect::<Result<Vec<_>>>()?;
        let curve = q_curve(&flows, &tuple, &rates, 0.0, &times, spec)?;
        worst = worst.max(curve.worst_monotonicity_violation());
    }
    let tol = relax(1e-9, coarse);
    Ok(CriterionResult {
        name: "threefold_monotonicity",
        measured: worst,
        expected: 0.0,
        tolerance: tol,
        pass: worst <= tol,
    })
}

/// Criterion 5: point masses at the origin are extremal, so Q is constant:
/// below 1e-8 variation through the Gaussian oracle, 1e-4 through the grid.
fn extremal_flatness(coarse: bool) -> Result<CriterionResult> {
    let tuple = complete_p(&[4.0 / 3.0, 4.0 / 3.0])?;
    let rates = canonical_sigmas(&tuple);
    let times = time_grid(start_time(coarse), 1e2, 16, true)?;

    // Oracle path: closed-form convolution and norm of evolved point masses.
    let mu = atoms(&[(0.0, 1.0)])?;
    let mut oracle_vals = Vec::with_capacity(times.len());
    for &t in &times {
        let mut acc: Option<IsotropicGaussian> = None;
        for (pj, &sj) in tuple.p_list.iter().zip(&rates.sigma_list) {
            let g = gaussian_power(&evolve_atoms(&mu, sj, t)?.terms()[0], 1.0 / pj)?;
            acc = Some(match acc {
                None => g,
                Some(prev) => crate::gaussian::convolve_gaussians(&prev, &g)?,
            });
        }
        oracle_vals.push(gaussian_lp_norm(&acc.expect("two factors"), tuple.p)?);
    }
    let (lo, hi) = oracle_vals
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let oracle_var = (hi - lo) / hi;

    // Grid path.
    let spec = GridSpec::new(1, 32.0, grid_n(4096, coarse))?;
    let flows = [
        InitialDatum::Atoms(atoms(&[(0.0, 1.0)])?),
        InitialDatum::Atoms(atoms(&[(0.0, 1.0)])?),
    ];
    let curve = q_curve(&flows, &tuple, &rates, 0.0, &times, spec)?;
    let grid_var = curve.max_relative_variation();

    let tol = relax(1e-4, coarse);
    Ok(CriterionResult {
        name: "extremal_flatness",
        measured: grid_var,
        expected: 0.0,
        tolerance: tol,
        pass: grid_var <= tol && oracle_var <= relax(1e-8, coarse),
    })
}

/// Criterion 6: the analytic time-derivative formula against centered finite
/// differences of Q, plus the sign law, on five configurations.
fn derivative_formula(coarse: bool) -> Result<CriterionResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let spec = GridSpec::new(1, 16.0, grid_n(256, coarse).min(512))?;
    let mut worst_rel: f64 = 0.0;
    let mut sign_ok = true;
    for cfg in 0..5 {
        let reverse = cfg >= 3;
        let tuple = random_tuple(&mut rng, reverse);
        let rates = canonical_sigmas(&tuple);
        let data: Vec<GaussianMixture> = if reverse {
            vec![random_mixture(&mut rng)?, random_mixture(&mut rng)?]
        } else {
            vec![
                evolve_atoms(&random_atoms(&mut rng)?, rates.sigma_list[0], 1e-9)?,
                evolve_atoms(&random_atoms(&mut rng)?, rates.sigma_list[1], 1e-9)?,
            ]
        };
        for &t in &[0.5, 1.0, 2.0] {
            let evolved: Vec<GaussianMixture> = data
                .iter()
                .zip(&rates.sigma_list)
                .map(|(m, &s)| m.evolve(s, t))
                .collect::<Result<Vec<_>>>()?;
            let qp = q_prime_remark(&evolved[0], &evolved[1], &tuple, &rates, spec)?;

            let q_at = |tt: f64| -> Result<f64> {
                let fields = data
                    .iter()
                    .zip(&rates.sigma_list)
                    .map(|(m, &s)| sample_mixture(&m.evolve(s, tt)?, spec))
                    .collect::<Result<Vec<_>>>()?;
                q_value(&fields, &tuple, 0.0, tt)
            };
            let q = q_at(t)?;
            let h = 1e-3 * t;
            let fd = (q_at(t + h)? - q_at(t - h)?) / (2.0 * h);
            if tuple.epsilon() * qp < -1e-8 * q {
                sign_ok = false;
            }
            if qp.abs() > 1e-8 * q {
                worst_rel = worst_rel.max((qp - fd).abs() / qp.abs());
            }
        }
    }
    let tol = relax(0.01, coarse);
    Ok(CriterionResult {
        name: "derivative_formula",
        measured: worst_rel,
        expected: 0.0,
        tolerance: tol,
        pass: worst_rel <= tol && sign_ok,
    })
}

/// Criterion 7: the supersolution/subsolution residual of the convolution
/// closure passes on both regimes, and a 10% diffusion imbalance fails.
fn closure_residuals(coarse: bool) -> Result<CriterionResult> {
    // The residual grids stay at full size even in coarse mode: they are
    // cheap, and shrinking them amplifies spectral round-off faster than the
    // x100 relaxation allows for.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rel_tol = relax(1e-8, coarse);
    let mut worst_norm: f64 = f64::INFINITY;
    let mut all_pass = true;

    for cfg in 0..20 {
        let reverse = cfg >= 10;
        let tuple = random_tuple(&mut rng, reverse);
        let rates = canonical_sigmas(&tuple);
        let spec = if reverse {
            GridSpec::new(1, 32.0, 2048)?
        } else {
            GridSpec::new(1, 16.0, 1024)?
        };
        let (d1, d2) = if reverse {
            (random_mixture(&mut rng)?, random_mixture(&mut rng)?)
        } else {
            (
                evolve_atoms(&random_atoms(&mut rng)?, rates.sigma_list[0], 1e-9)?,
                evolve_atoms(&random_atoms(&mut rng)?, rates.sigma_list[1], 1e-9)?,
            )
        };
        for &t in &[0.5, 1.0] {
            let u1 = d1.evolve(rates.sigma_list[0], t)?;
            let u2 = d2.evolve(rates.sigma_list[1], t)?;
            let rep = closure_residual(&u1, &u2, &tuple, &rates, t, spec, None, rel_tol)?;
            let scale = rep.tolerance / rel_tol;
            worst_norm = worst_norm.min(rep.min_residual / scale.max(1e-300));
            all_pass &= rep.pass;
        }
    }

    // Negative control: same data, sigma_1 inflated by 10%.
    let tuple = complete_p(&[4.0 / 3.0, 4.0 / 3.0])?;
    let good = canonical_sigmas(&tuple);
    let mut broken = good.sigma_list.clone();
    broken[0] *= 1.1;
    let rates = from_sigma_list(&tuple, broken);
    let spec = GridSpec::new(1, 24.0, 2048)?;
    let t = 1.0;
    let m1 = mixture(&[(1.0, PI, -0.5), (0.8, 2.0 * PI, 0.6)])?;
    let m2 = mixture(&[(1.2, PI, 0.2)])?;
    let control = closure_residual(
        &m1.evolve(rates.sigma_list[0], t)?,
        &m2.evolve(rates.sigma_list[1], t)?,
        &tuple,
        &rates,
        t,
        spec,
        None,
        rel_tol,
    )?;

    Ok(CriterionResult {
        name: "closure_residuals",
        measured: worst_norm,
        expected: 0.0,
        tolerance: rel_tol,
        pass: all_pass && worst_norm >= -rel_tol && !control.pass,
    })
}

/// Criterion 8: the key convolution identity, LHS vs an independent double
/// quadrature of the RHS, on 20 randomized instances; exact homogeneity in
/// the Lambda weights.
fn convolution_lemma(coarse: bool) -> Result<CriterionResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let spec = GridSpec::new(1, 16.0, grid_n(256, coarse).min(512))?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let u1 = random_mixture(&mut rng)?;
        let u2 = random_mixture(&mut rng)?;
        let a1 = rng.gen_range(0.4..1.0);
        let a2 = rng.gen_range(0.4..1.0);
        let l1 = rng.gen_range(0.2..3.0);
        let l2 = rng.gen_range(0.2..3.0);
        let coord: f64 = rng.gen_range(-1.5..1.5);
        let x = ((coord.rem_euclid(spec.period) / spec.spacing()).round() as usize) % spec.n;
        let sides = lemma_main_residual(&u1, &u2, a1, a2, l1, l2, x, spec)?;
        worst = worst.max(sides.residual().abs() / sides.rhs.abs().max(1e-12));
    }

    // Lambda homogeneity: doubling both weights doubles both sides exactly.
    let u1 = mixture(&[(1.0, 3.0, -0.3), (0.6, 5.0, 0.4)])?;
    let u2 = mixture(&[(0.9, 4.0, 0.1)])?;
    let one = lemma_main_residual(&u1, &u2, 0.7, 0.6, 0.8, 1.7, 40, spec)?;
    let two = lemma_main_residual(&u1, &u2, 0.7, 0.6, 1.6, 3.4, 40, spec)?;
    let homog = ((two.lhs - 2.0 * one.lhs).abs() + (two.rhs - 2.0 * one.rhs).abs())
        / one.rhs.abs().max(1e-12);

    let tol = relax(1e-5, coarse);
    Ok(CriterionResult {
        name: "convolution_lemma",
        measured: worst,
        expected: 0.0,
        tolerance: tol,
        pass: worst <= tol && homog <= 1e-12,
    })
}

/// Criterion 9: the two scalar coefficient identities on 1000 random tuples,
/// plus the documented discrepancy of the printed gradient identity.
fn algebraic_identities(coarse: bool) -> Result<CriterionResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 1000 {
        let reverse = rng.gen_bool(0.5);
        let (lo, hi) = if reverse { (0.35, 0.95) } else { (1.05, 4.0) };
        let p1 = rng.gen_range(lo..hi);
        let p2 = rng.gen_range(lo..hi);
        if 1.0 / p1 + 1.0 / p2 <= 1.0 + 1e-3 {
            continue;
        }
        let t = complete_p(&[p1, p2])?;
        let s = canonical_sigmas(&t).scaled(rng.gen_range(0.5..2.0));
        let rep = verify_identities(&t, &s)?;
        worst = worst.max(rep.cross_residual.abs()).max(rep.gradient_residual.abs());
        done += 1;
    }

    // The printed form of the gradient identity misses a p1 p2 factor on the
    // cross term: on (4/3, 4/3, 2) with sigma = 3/16 it gives 25/64 vs 1/2.
    let t = complete_p(&[4.0 / 3.0, 4.0 / 3.0])?;
    let s = canonical_sigmas(&t);
    let rep = verify_identities(&t, &s)?;
    let discrepancy_ok = (rep.printed_e1_lhs - 25.0 / 64.0).abs() < 1e-12
        && (rep.printed_e1_rhs - 0.5).abs() < 1e-12;

    let tol = relax(1e-12, coarse);
    Ok(CriterionResult {
        name: "algebraic_identities",
        measured: worst,
        expected: 0.0,
        tolerance: tol,
        pass: worst <= tol && discrepancy_ok,
    })
}

/// Criterion 10: for non-extremal data the curve starts at the plain
/// convolution norm and climbs to the sharp-constant bound.
fn endpoint_sandwich(coarse: bool) -> Result<CriterionResult> {
    let tuple = complete_p(&[4.0 / 3.0, 4.0 / 3.0])?;
    let rates = canonical_sigmas(&tuple);
    let spec = GridSpec::new(1, 48.0, grid_n(4096, coarse))?;
    let mixtures = vec![
        mixture(&[(1.0, 40.0, -0.1), (1.0, 40.0, 0.1)])?,
        mixture(&[(1.0, 40.0, 0.0)])?,
    ];
    let (q0, qinf) = endpoint_limits(&mixtures, &tuple, spec)?;

    let data: Vec<InitialDatum> =
        mixtures.into_iter().map(InitialDatum::Mixture).collect();
    let times = time_grid(1e-2, 1e2, 24, true)?;
    let curve = q_curve(&data, &tuple, &rates, 0.0, &times, spec)?;

    let slack = 1e-6;
    let mut sandwich = true;
    for q in &curve.values {
        sandwich &= *q >= q0 * (1.0 - slack) && *q <= qinf * (1.0 + slack);
    }
    let start_err = (curve.values[0] - q0).abs() / q0;
    let end_err = (curve.values.last().unwrap() - qinf).abs() / qinf;
    let measured = start_err.max(end_err);
    let tol = relax(0.01, coarse);
    Ok(CriterionResult {
        name: "endpoint_sandwich",
        measured,
        expected: 0.0,
        tolerance: tol,
        pass: measured <= tol && sandwich && q0 < qinf,
    })
}

/// Criterion 11: the even-exponent Fourier quantity is nondecreasing under
/// heat flow, and its p = 2 case reduces to the mass (Plancherel).
fn fourier_quantity(coarse: bool) -> Result<CriterionResult> {
    let spec = GridSpec::new(1, 72.0, grid_n(4096, coarse))?;
    let times = time_grid(start_time(coarse), 1e2, 16, true)?;
    let data = [
        atoms(&[(-1.0, 1.0), (1.0, 0.7)])?,
        atoms(&[(-0.4, 1.2), (0.5, 0.9)])?,
        atoms(&[(0.0, 1.0), (0.9, 0.4)])?,
    ];
    let mut worst_drop: f64 = 0.0;
    let mut worst_plancherel: f64 = 0.0;
    for mu in &data {
        let mut prev = 0.0;
        for &t in &times {
            let f = sample_mixture(&evolve_atoms(mu, 1.0, t)?, spec)?;
            let v = hausdorff_young_value(&f, 4)?;
            if prev > 0.0 {
                worst_drop = worst_drop.max((prev - v) / prev);
            }
            prev = v;
            let pl = hausdorff_young_value(&f, 2)?;
            worst_plancherel =
                worst_plancherel.max((pl - f.mass().sqrt()).abs() / f.mass().sqrt());
        }
    }
    let tol = relax(1e-5, coarse);
    Ok(CriterionResult {
        name: "fourier_quantity",
        measured: worst_plancherel,
        expected: 0.0,
        tolerance: tol,
        pass: worst_plancherel <= tol && worst_drop <= relax(1e-9, coarse),
    })
}

/// Criterion 12: the weighted closure with alpha = 1, rho = 3/4, p = 2: the
/// weighted curve is nondecreasing, both output residual reports pass, and a
/// single evolved point mass saturates the log-convexity hypothesis.
fn weighted_closure(coarse: bool) -> Result<CriterionResult> {
    let params = extended_params(1.0, 1.0, 0.75, 0.75, 2.0, 1)?;
    let rel_tol = relax(1e-6, coarse);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    // full-size grid even in coarse mode; see closure_residuals
    let spec = GridSpec::new(1, 24.0, 1024)?;
    let mut all_pass = true;
    for _ in 0..5 {
        let mu1 = random_atoms(&mut rng)?;
        let mu2 = random_atoms(&mut rng)?;
        for &t in &[0.5, 1.0, 2.0] {
            let u1 = evolve_atoms(&mu1, params.sigma1, t)?;
            let u2 = evolve_atoms(&mu2, params.sigma2, t)?;
            let (heat, logconv) = weighted_closure_residual(&u1, &u2, &params, t, spec, rel_tol)?;
            all_pass &= heat.pass && logconv.pass;
        }
    }

    // Weighted curve t^beta |u1 * u2|_2 (alpha = 1 powers) is nondecreasing.
    let wide = GridSpec::new(1, 48.0, grid_n(4096, coarse))?;
    let mu1 = atoms(&[(-0.5, 1.0), (0.7, 0.8)])?;
    let mu2 = atoms(&[(0.2, 1.1)])?;
    let times = time_grid(start_time(coarse), 1e2, 16, true)?;
    let mut worst_drop: f64 = 0.0;
    let mut prev = 0.0;
    for &t in &times {
        let a = sample_mixture(&evolve_atoms(&mu1, params.sigma1, t)?, wide)?;
        let b = sample_mixture(&evolve_atoms(&mu2, params.sigma2, t)?, wide)?;
        let v = t.powf(params.beta) * fft_convolve(&a, &b)?.lp_norm(params.p)?;
        if prev > 0.0 {
            worst_drop = worst_drop.max((prev - v) / prev);
        }
        prev = v;
    }

    // Exact saturation of the log-convexity floor for an evolved point mass.
    let t = 1.3;
    let u = evolve_atoms(&atoms(&[(0.0, 1.0)])?, params.sigma1, t)?;
    let saturation =
        (params.sigma1 * u.log_gradient_divergence([0.7, 0.0]) + 2.0 * PI / t).abs();

    let tol = relax(1e-9, coarse);
    Ok(CriterionResult {
        name: "weighted_closure",
        measured: worst_drop,
        expected: 0.0,
        tolerance: tol,
        pass: all_pass && worst_drop <= tol && saturation <= relax(1e-5, coarse),
    })
}

/// Criterion 13: the two pointwise closures (geometric mean with conjugate
/// exponents, harmonic addition) on ten configurations each.
fn pointwise_closures(coarse: bool) -> Result<CriterionResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    // full-size grid even in coarse mode; see closure_residuals
    let spec = GridSpec::new(1, 24.0, 1024)?;
    let rel_tol = relax(1e-8, coarse);
    let mut worst_norm: f64 = f64::INFINITY;
    let mut all_pass = true;
    for kind in [PointwiseKind::GeometricMean, PointwiseKind::HarmonicAddition] {
        for _ in 0..10 {
            let t = rng.gen_range(0.5..2.0);
            let u1 = random_mixture(&mut rng)?.evolve(1.0, t)?;
            let u2 = random_mixture(&mut rng)?.evolve(1.0, t)?;
            let rep = pointwise_closure_residual(kind, &u1, &u2, 2.0, 2.0, t, spec, rel_tol)?;
            let scale = rep.tolerance / rel_tol;
            worst_norm = worst_norm.min(rep.min_residual / scale.max(1e-300));
            all_pass &= rep.pass;
        }
    }
    Ok(CriterionResult {
        name: "pointwise_closures",
        measured: worst_norm,
        expected: 0.0,
        tolerance: rel_tol,
        pass: all_pass && worst_norm >= -rel_tol,
    })
}
