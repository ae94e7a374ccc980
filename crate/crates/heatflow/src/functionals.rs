//! The monotone functionals: the n-fold fractional-power convolution norm
//! Q(t) (optionally time-weighted by t^beta), the even-exponent Fourier
//! quantity expressed as a convolution L2 norm, and the t -> 0 / t -> infinity
//! endpoint values that sandwich Q.

use crate::error::{Error, Result};
use crate::exponents::{young_constant, DiffusionRates, ExponentTuple};
use crate::gaussian::{GaussianMixture, InitialDatum};
use crate::grid::{check_wraparound, fft_convolve, sample_mixture, GridField, GridSpec};
use std::io::Write;

/// Sampled curve t -> Q(t) together with everything needed to reproduce it.
#[derive(Debug, Clone)]
pub struct QCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub tuple: ExponentTuple,
    pub rates: DiffusionRates,
    pub beta: f64,
    pub spec: GridSpec,
}

impl QCurve {
    /// max |Q - Q_first| / Q_first, the flatness measure for extremal data.
    pub fn max_relative_variation(&self) -> f64 {
        let q0 = self.values[0];
        self.values.iter().map(|q| (q - q0).abs() / q0).fold(0.0, f64::max)
    }

    /// Worst signed violation of the regime's monotonicity, relative to Q:
    /// nonpositive result means the curve is monotone up to that slack.
    pub fn worst_monotonicity_violation(&self) -> f64 {
        let eps = self.tuple.epsilon();
        let mut worst = f64::NEG_INFINITY;
        for w in self.values.windows(2) {
            // regime +1 wants w[1] >= w[0]; violation is eps*(w[0]-w[1])
            worst = worst.max(eps * (w[0] - w[1]) / w[0]);
        }
        worst
    }

    pub fn dump_csv(&self, w: &mut impl Write, experiment: &str) -> Result<()> {
        let p_text: Vec<String> = self.tuple.p_list.iter().map(|p| p.to_string()).collect();
        let s_text: Vec<String> =
            self.rates.sigma_list.iter().map(|s| s.to_string()).collect();
        writeln!(
            w,
            "# experiment={} n={} p={},{} sigma={} beta={} d={} L={} N={}",
            experiment,
            self.tuple.n(),
            p_text.join(","),
            self.tuple.p,
            s_text.join(","),
            self.beta,
            self.spec.dim,
            self.spec.period,
            self.spec.n,
        )?;
        writeln!(w, "t,Q")?;
        for (t, q) in self.times.iter().zip(&self.values) {
            writeln!(w, "{t},{q}")?;
        }
        Ok(())
    }
}

/// Log- or linearly-spaced time grid on [t_min, t_max].
pub fn time_grid(t_min: f64, t_max: f64, count: usize, log: bool) -> Result<Vec<f64>> {
    if !(t_min > 0.0) {
        return Err(Error::NonPositive { name: "t_min", value: t_min });
    }
    if t_max <= t_min || count < 2 {
        return Err(Error::NonPositive { name: "t_max - t_min", value: t_max - t_min });
    }
    let k = count as f64 - 1.0;
    Ok((0..count)
        .map(|i| {
            let s = i as f64 / k;
            if log {
                t_min * (t_max / t_min).powf(s)
            } else {
                t_min + s * (t_max - t_min)
            }
        })
        .collect())
}

/// Auto-sized period: 4 x (data extent + twice the largest diffusion width).
pub fn auto_period(max_extent: f64, sigma_max: f64, t_max: f64) -> f64 {
    4.0 * (max_extent + 2.0 * (sigma_max * t_max).sqrt())
}

fn check_positive_fields(flows: &[GridField]) -> Result<()> {
    for f in flows {
        if f.values.iter().any(|&v| v < 0.0) || !(f.mass() > 0.0) {
            return Err(Error::FieldNotPositive);
        }
    }
    Ok(())
}

/// Left-to-right convolution of flows^{1/p_j} on a shared grid.
pub fn fold_convolution(flows: &[GridField], tuple: &ExponentTuple) -> Result<GridField> {
    if flows.len() != tuple.n() {
        return Err(Error::TooFewExponents { required: tuple.n(), got: flows.len() });
    }
    check_positive_fields(flows)?;
    let mut acc: Option<GridField> = None;
    for (f, pj) in flows.iter().zip(&tuple.p_list) {
        let powered = f.powf(1.0 / pj);
        acc = Some(match acc {
            None => powered,
            Some(prev) => fft_convolve(&prev, &powered)?,
        });
    }
    Ok(acc.expect("tuple has n >= 2"))
}

/// time^beta * || flows[0]^{1/p_1} * ... * flows[n-1]^{1/p_n} ||_p.
pub fn q_value(
    flows: &[GridField],
    tuple: &ExponentTuple,
    beta: f64,
    time: f64,
) -> Result<f64> {
    if !(time > 0.0) {
        return Err(Error::NonPositive { name: "time", value: time });
    }
    let conv = fold_convolution(flows, tuple)?;
    Ok(time.powf(beta) * conv.lp_norm(tuple.p)?)
}

/// Evolve each datum exactly to every requested time, sample, and evaluate
/// q_value. Fails up front if the slowest-decaying evolved flow would wrap at
/// the final time.
pub fn q_curve(
    initial: &[InitialDatum],
    tuple: &ExponentTuple,
    rates: &DiffusionRates,
    beta: f64,
    times: &[f64],
    spec: GridSpec,
) -> Result<QCurve> {
    if initial.len() != tuple.n() {
        return Err(Error::TooFewExponents { required: tuple.n(), got: initial.len() });
    }
    for w in times.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::NonPositive { name: "time step", value: w[1] - w[0] });
        }
    }
    let t_max = *times.last().ok_or(Error::NonPositive { name: "times", value: 0.0 })?;
    for (datum, &sigma) in initial.iter().zip(&rates.sigma_list) {
        check_wraparound(&datum.evolve(sigma, t_max)?, spec.period)?;
    }

    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        let flows = initial
            .iter()
            .zip(&rates.sigma_list)
            .map(|(datum, &sigma)| sample_mixture(&datum.evolve(sigma, t)?, spec))
            .collect::<Result<Vec<_>>>()?;
        values.push(q_value(&flows, tuple, beta, t)?);
    }
    Ok(QCurve {
        times: times.to_vec(),
        values,
        tuple: tuple.clone(),
        rates: rates.clone(),
        beta,
        spec,
    })
}

/// ||u^{1/p'} * ... * u^{1/p'}||_2^{2/p} with p/2 convolution factors,
/// p' = p/(p-1). Equals the L^p norm of the Fourier transform of u^{1/p'}
/// by Plancherel; only even p admits this convolution form.
pub fn hausdorff_young_value(flow: &GridField, p: u32) -> Result<f64> {
    if p < 2 || p % 2 != 0 {
        return Err(Error::OddExponent(p));
    }
    check_positive_fields(std::slice::from_ref(flow))?;
    let pf = p as f64;
    let g = flow.powf((pf - 1.0) / pf);
    let mut acc = g.clone();
    for _ in 1..(p / 2) {
        acc = fft_convolve(&acc, &g)?;
    }
    Ok(acc.lp_norm(2.0)?.powf(2.0 / pf))
}

/// (q_zero, q_infinity) endpoints for flows with density initial data
/// u_j(0) = f_j^{p_j}: q_zero = ||f_1 * ... * f_n||_p on the grid and
/// q_infinity = Young constant x prod ||f_j||_{p_j} (the latter in closed
/// form, since ||f_j||_{p_j}^{p_j} is the mass of the mixture).
pub fn endpoint_limits(
    initial: &[GaussianMixture],
    tuple: &ExponentTuple,
    spec: GridSpec,
) -> Result<(f64, f64)> {
    if initial.len() != tuple.n() {
        return Err(Error::TooFewExponents { required: tuple.n(), got: initial.len() });
    }
    let fields = initial
        .iter()
        .map(|m| sample_mixture(m, spec))
        .collect::<Result<Vec<_>>>()?;
    let q_zero = fold_convolution(&fields, tuple)?.lp_norm(tuple.p)?;

    let mut norms = 1.0;
    for (m, pj) in initial.iter().zip(&tuple.p_list) {
        norms *= m.mass().powf(1.0 / pj);
    }
    let q_infinity = young_constant(tuple, spec.dim) * norms;
    Ok((q_zero, q_infinity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::{canonical_sigmas, complete_p, sharp_constant};
    use crate::gaussian::{AtomicMeasure, IsotropicGaussian};
    use std::f64::consts::PI;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn atom(loc: f64, w: f64) -> InitialDatum {
        InitialDatum::Atoms(AtomicMeasure::new(vec![([loc, 0.0], w)], 1).unwrap())
    }

    fn two_atoms(l1: f64, w1: f64, l2: f64, w2: f64) -> InitialDatum {
        InitialDatum::Atoms(
            AtomicMeasure::new(vec![([l1, 0.0], w1), ([l2, 0.0], w2)], 1).unwrap(),
        )
    }

    fn mixture(terms: &[(f64, f64, f64)]) -> InitialDatum {
        InitialDatum::Mixture(
            GaussianMixture::new(
                terms
                    .iter()
                    .map(|&(c, a, mu)| IsotropicGaussian::new(c, a, [mu, 0.0], 1).unwrap())
                    .collect(),
            )
            .unwrap(),
        )
    }

    #[test]
    fn time_grid_shapes() {
        let g = time_grid(0.01, 100.0, 5, true).unwrap();
        assert_close(g[1] / g[0], 10.0, 1e-12);
        let l = time_grid(1.0, 3.0, 3, false).unwrap();
        assert_close(l[1], 2.0, 1e-15);
        assert!(time_grid(0.0, 1.0, 4, true).is_err());
        assert!(time_grid(1.0, 1.0, 4, true).is_err());
    }

    #[test]
    fn extremal_atoms_give_flat_young_curve() {
        let tuple = complete_p(&[4.0 / 3.0, 4.0 / 3.0]).unwrap();
        let rates = canonical_sigmas(&tuple);
        let spec = GridSpec::new(1, 32.0, 4096).unwrap();
        let times = time_grid(0.01, 100.0, 16, true).unwrap();
        let curve = q_curve(
            &[atom(0.0, 1.0), atom(0.0, 1.0)],
            &tuple,
            &rates,
            0.0,
            &times,
            spec,
        )
        .unwrap();
        // constant 2 * 3^{-3/4}
        let expected = 2.0 * 3.0f64.powf(-0.75);
        for q in &curve.values {
            assert_close(*q, expected, 1e-4 * expected);
        }
        assert!(curve.max_relative_variation() < 1e-4);
    }

    #[test]
    fn mass_product_when_all_p_are_one() {
        let tuple = complete_p(&[1.0, 1.0]).unwrap();
        assert_close(tuple.p, 1.0, 1e-15);
        let rates = canonical_sigmas(&tuple);
        assert_eq!(rates.sigma_list, vec![0.0, 0.0]);
        let spec = GridSpec::new(1, 16.0, 512).unwrap();
        let times = vec![0.5, 1.0, 2.0];
        let curve = q_curve(
            &[mixture(&[(1.5, PI, -0.4)]), mixture(&[(0.7, 2.0 * PI, 0.3)])],
            &tuple,
            &rates,
            0.0,
            &times,
            spec,
        )
        .unwrap();
        let m1 = 1.5 * (PI / PI).sqrt();
        let m2 = 0.7 * (PI / (2.0 * PI)).sqrt();
        for q in &curve.values {
            assert_close(*q, m1 * m2, 1e-8);
        }
    }

    #[test]
    fn forward_curve_nondecreasing() {
        let tuple = complete_p(&[1.5, 1.8]).unwrap();
        let rates = canonical_sigmas(&tuple);
        let spec = GridSpec::new(1, 48.0, 4096).unwrap();
        let times = time_grid(0.01, 100.0, 32, true).unwrap();
        let curve = q_curve(
            &[two_atoms(-0.5, 1.0, 0.8, 0.6), atom(0.2, 1.3)],
            &tuple,
            &rates,
            0.0,
            &times,
            spec,
        )
        .unwrap();
        assert!(
            curve.worst_monotonicity_violation() <= 1e-9,
            "violation {}",
            curve.worst_monotonicity_violation()
        );
        // Genuinely increasing, not just flat.
        assert!(curve.values.last().unwrap() > &(curve.values[0] * 1.001));
    }

    #[test]
    fn reverse_curve_nonincreasing() {
        let tuple = complete_p(&[2.0 / 3.0, 2.0 / 3.0]).unwrap();
        assert_close(tuple.p, 0.5, 1e-14);
        let rates = canonical_sigmas(&tuple);
        let spec = GridSpec::new(1, 96.0, 8192).unwrap();
        let times = time_grid(0.01, 100.0, 24, true).unwrap();
        let curve = q_curve(
            &[
                mixture(&[(1.0, PI, -0.5), (0.8, 2.0 * PI, 0.6)]),
                mixture(&[(1.2, PI, 0.2)]),
            ],
            &tuple,
            &rates,
            0.0,
            &times,
            spec,
        )
        .unwrap();
        assert!(
            curve.worst_monotonicity_violation() <= 1e-9,
            "violation {}",
            curve.worst_monotonicity_violation()
        );
        assert!(curve.values.last().unwrap() < &(curve.values[0] * 0.999));
    }

    #[test]
    fn threefold_extremal_constant() {
        let tuple = complete_p(&[4.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0]).unwrap();
        assert_close(tuple.p, 4.0, 1e-12);
        let rates = canonical_sigmas(&tuple);
        let spec = GridSpec::new(1, 48.0, 4096).unwrap();
        let times = time_grid(0.1, 10.0, 8, true).unwrap();
        let curve = q_curve(
            &[atom(0.0, 1.0), atom(0.0, 1.0), atom(0.0, 1.0)],
            &tuple,
            &rates,
            0.0,
            &times,
            spec,
        )
        .unwrap();
        let expected = sharp_constant(4.0 / 3.0).powi(3) / sharp_constant(4.0);
        for q in &curve.values {
            assert_close(*q, expected, 1e-4 * expected);
        }
    }

    #[test]
    fn curve_scale_freedom() {
        // Rates scaled by 2 reparametrize the curve: Q_{2 sigma}(t) = Q(2t).
        let tuple = complete_p(&[1.5, 1.8]).unwrap();
        let rates = canonical_sigmas(&tuple);
        let spec = GridSpec::new(1, 48.0, 2048).unwrap();
        let data = [two_atoms(-0.5, 1.0, 0.8, 0.6), atom(0.2, 1.3)];
        let times = time_grid(0.1, 4.0, 6, true).unwrap();
        let doubled = time_grid(0.2, 8.0, 6, true).unwrap();
        let a = q_curve(&data, &tuple, &rates.scaled(2.0), 0.0, &times, spec).unwrap();
        let b = q_curve(&data, &tuple, &rates, 0.0, &doubled, spec).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_close(*x, *y, 1e-12 * x);
        }
    }

    #[test]
    fn wraparound_precheck_names_minimal_period() {
        let tuple = complete_p(&[1.5, 1.8]).unwrap();
        let rates = canonical_sigmas(&tuple);
        let spec = GridSpec::new(1, 16.0, 1024).unwrap();
        let times = time_grid(0.01, 100.0, 8, true).unwrap();
        match q_curve(&[atom(0.0, 1.0), atom(0.0, 1.0)], &tuple, &rates, 0.0, &times, spec) {
            Err(Error::Wraparound { min_l, have_l }) => {
                assert!(min_l > have_l);
            }
            other => panic!("expected wraparound error, got {other:?}"),
        }
    }

    #[test]
    fn hausdorff_young_p2_is_root_mass() {
        let spec = GridSpec::new(1, 16.0, 512).unwrap();
        let m = mixture(&[(1.0, PI, -0.3), (2.0, 2.0 * PI, 0.5)]);
        for &t in &[0.3, 1.0, 3.0] {
            let f = sample_mixture(&m.evolve(1.0, t).unwrap(), spec).unwrap();
            assert_close(
                hausdorff_young_value(&f, 2).unwrap(),
                m.total_mass().sqrt(),
                1e-8,
            );
        }
        assert!(matches!(hausdorff_young_value(
            &sample_mixture(&m.evolve(1.0, 1.0).unwrap(), spec).unwrap(), 3),
            Err(Error::OddExponent(3))));
    }

    #[test]
    fn hausdorff_young_p4_nondecreasing() {
        let spec = GridSpec::new(1, 72.0, 4096).unwrap();
        let datum = two_atoms(-1.0, 1.0, 1.0, 0.7);
        let times = time_grid(0.01, 100.0, 16, true).unwrap();
        let mut prev = 0.0;
        for &t in &times {
            let f = sample_mixture(&datum.evolve(1.0, t).unwrap(), spec).unwrap();
            let v = hausdorff_young_value(&f, 4).unwrap();
            assert!(v >= prev * (1.0 - 1e-9), "drop at t={t}: {prev} -> {v}");
            prev = v;
        }
    }

    #[test]
    fn hausdorff_young_matches_naive_dft() {
        // Independent oracle: || FT(u^{3/4}) ||_4 via an O(N^2) DFT with
        // continuum normalization (h sum, frequencies k/L).
        let spec = GridSpec::new(1, 32.0, 256).unwrap();
        let m = mixture(&[(1.0, PI, -0.4), (0.5, 0.5 * PI, 0.7)]);
        let f = sample_mixture(&m.evolve(1.0, 0.7).unwrap(), spec).unwrap();
        let value = hausdorff_young_value(&f, 4).unwrap();

        let g: Vec<f64> = f.values.iter().map(|v| v.powf(0.75)).collect();
        let n = spec.n;
        let h = spec.spacing();
        let mut sum4 = 0.0;
        for k in 0..n {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (j, gj) in g.iter().enumerate() {
                let phase = -2.0 * PI * (j as f64) * (k as f64) / (n as f64);
                re += gj * phase.cos();
                im += gj * phase.sin();
            }
            let mag2 = (h * re).powi(2) + (h * im).powi(2);
            sum4 += mag2 * mag2;
        }
        let oracle = (sum4 / spec.period).powf(0.25);
        assert_close(value, oracle, 1e-5 * oracle);
    }

    #[test]
    fn endpoints_sandwich_forward_curve() {
        let tuple = complete_p(&[4.0 / 3.0, 4.0 / 3.0]).unwrap();
        let rates = canonical_sigmas(&tuple);
        let spec = GridSpec::new(1, 48.0, 4096).unwrap();
        let data = [
            mixture(&[(1.0, 40.0, -0.1), (1.0, 40.0, 0.1)]),
            mixture(&[(1.0, 40.0, 0.0)]),
        ];
        let mixtures: Vec<GaussianMixture> = data
            .iter()
            .map(|d| match d {
                InitialDatum::Mixture(m) => m.clone(),
                _ => unreachable!(),
            })
            .collect();
        let (q0, qinf) = endpoint_limits(&mixtures, &tuple, spec).unwrap();
        assert!(q0 < qinf, "non-extremal data must have q0 < qinf: {q0} {qinf}");

        let times = time_grid(1e-2, 1e2, 24, true).unwrap();
        let curve = q_curve(&data, &tuple, &rates, 0.0, &times, spec).unwrap();
        for q in &curve.values {
            assert!(*q >= q0 - 1e-6 * q0, "below q0: {q} < {q0}");
            assert!(*q <= qinf + 1e-6 * qinf, "above qinf: {q} > {qinf}");
        }
        // The curve meets both endpoints at the extreme times within 1%.
        assert_close(curve.values[0], q0, 0.01 * q0);
        assert_close(*curve.values.last().unwrap(), qinf, 0.01 * qinf);
    }

    #[test]
    fn endpoints_coincide_for_extremal_gaussians() {
        let tuple = complete_p(&[4.0 / 3.0, 4.0 / 3.0]).unwrap();
        let rates = canonical_sigmas(&tuple);
        let spec = GridSpec::new(1, 32.0, 4096).unwrap();
        // u_j(0) = H_{sigma_j}: the same as atoms evolved to t = 1, so the
        // whole curve, including both limits, is the constant Young value.
        let mixtures: Vec<GaussianMixture> = rates
            .sigma_list
            .iter()
            .map(|&s| {
                GaussianMixture::single(crate::gaussian::heat_kernel(s, 1).unwrap())
            })
            .collect();
        let (q0, qinf) = endpoint_limits(&mixtures, &tuple, spec).unwrap();
        let expected = 2.0 * 3.0f64.powf(-0.75);
        assert_close(q0, expected, 1e-4 * expected);
        assert_close(qinf, expected, 1e-12);
    }

    #[test]
    fn degenerate_p1_equal_one_constant_factor() {
        // p_1 = 1 contributes C_1 = 1, so q_infinity is the remaining
        // factor's constant times the norms.
        let tuple = complete_p(&[1.0, 1.7]).unwrap();
        assert_close(young_constant(&tuple, 1), 1.0, 1e-12);
    }

    #[test]
    fn csv_header_echoes_configuration() {
        let tuple = complete_p(&[1.5, 2.0]).unwrap();
        let rates = canonical_sigmas(&tuple);
        let spec = GridSpec::new(1, 16.0, 256).unwrap();
        let curve = QCurve {
            times: vec![1.0, 2.0],
            values: vec![0.5, 0.6],
            tuple,
            rates,
            beta: 0.0,
            spec,
        };
        let mut buf = Vec::new();
        curve.dump_csv(&mut buf, "demo").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# experiment=demo n=2 p=1.5,2,"));
        assert!(text.contains("d=1 L=16 N=256"));
        assert!(text.contains("t,Q"));
        assert!(text.contains("1,0.5"));
    }
}
