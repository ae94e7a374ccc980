//! Line-oriented `key = value` experiment configuration. Deliberately not a
//! rich format: diff-friendly, zero extra dependencies, and every resolved
//! value is echoed back into the CSV headers.

use crate::error::{Error, Result};
use crate::exponents::{
    canonical_sigmas, complete_p, extended_params, from_sigma_list, DiffusionRates, ExponentTuple,
    ExtendedParams,
};
use crate::functionals::{auto_period, time_grid};
use crate::gaussian::{AtomicMeasure, GaussianMixture, InitialDatum, IsotropicGaussian, Point};
use crate::grid::GridSpec;

/// What the front end should compute for this experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    QCurve,
    QPrime,
    Residual,
    Weighted,
    Lemma,
    HausdorffYoung,
    Limits,
    Constants,
    Verify,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        Some(match s {
            "qcurve" => Mode::QCurve,
            "qprime" => Mode::QPrime,
            "residual" => Mode::Residual,
            "weighted" => Mode::Weighted,
            "lemma" => Mode::Lemma,
            "hausdorff_young" => Mode::HausdorffYoung,
            "limits" => Mode::Limits,
            "constants" => Mode::Constants,
            "verify" => Mode::Verify,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::QCurve => "qcurve",
            Mode::QPrime => "qprime",
            Mode::Residual => "residual",
            Mode::Weighted => "weighted",
            Mode::Lemma => "lemma",
            Mode::HausdorffYoung => "hausdorff_young",
            Mode::Limits => "limits",
            Mode::Constants => "constants",
            Mode::Verify => "verify",
        }
    }
}

/// A fully parsed experiment with defaults filled in. Exponent admissibility
/// has already been checked; grid sizing may still be deferred (period None).
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub mode: Mode,
    pub dim: usize,
    pub tuple: ExponentTuple,
    pub rates: DiffusionRates,
    /// Set when the config overrides the canonical balanced rates.
    pub sigma_overridden: bool,
    pub n: usize,
    pub period: Option<f64>,
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
    pub log_spacing: bool,
    pub tolerance: f64,
    /// Weighted-theorem parameters, present when alpha/rho/p were given.
    pub extended: Option<ExtendedParams>,
    /// Lemma evaluation weights Lambda_1, Lambda_2.
    pub lambda: (f64, f64),
    /// Even Lebesgue exponent for the Fourier-transform quantity.
    pub hy_exponent: u32,
    pub flows: Vec<InitialDatum>,
}

impl ExperimentSpec {
    /// Resolved time samples for this experiment.
    pub fn times(&self) -> Result<Vec<f64>> {
        time_grid(self.t_min, self.t_max, self.count, self.log_spacing)
    }

    /// Period: explicit if configured, otherwise auto-sized from the data
    /// extent at t_min and the slowest diffusion at t_max.
    pub fn resolved_period(&self) -> Result<f64> {
        if let Some(l) = self.period {
            return Ok(l);
        }
        let mut max_extent = 0.0f64;
        for (flow, &sigma) in self.flows.iter().zip(&self.rates.sigma_list) {
            let early = flow.evolve(sigma.max(1e-6), self.t_min)?;
            max_extent = max_extent.max(early.extent());
        }
        Ok(auto_period(max_extent, self.rates.max_sigma(), self.t_max))
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.dim, self.resolved_period()?, self.n)
    }

    /// One-line summary of every resolved numeric choice, embedded in CSV
    /// headers so a report is reproducible from its own output.
    pub fn header_line(&self) -> String {
        let plist: Vec<String> = self.tuple.p_list.iter().map(|p| format!("{p}")).collect();
        let slist: Vec<String> = self.rates.sigma_list.iter().map(|s| format!("{s}")).collect();
        let period = match self.resolved_period() {
            Ok(l) => format!("{l}"),
            Err(_) => "unresolved".to_string(),
        };
        format!(
            "name={} mode={} d={} p=[{}],{} sigma=[{}] sigma_eff={} N={} L={} t=[{},{}]x{} spacing={} tol={}",
            self.name,
            self.mode.name(),
            self.dim,
            plist.join(","),
            self.tuple.p,
            slist.join(","),
            self.rates.sigma_eff,
            self.n,
            period,
            self.t_min,
            self.t_max,
            self.count,
            if self.log_spacing { "log" } else { "linear" },
            self.tolerance,
        )
    }
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

/// Parse a single number, accepting fraction literals like `3/4`.
fn parse_number(s: &str, line: usize) -> Result<f64> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: f64 = num.trim().parse().map_err(|_| bad(line, format!("malformed number `{s}`")))?;
        let d: f64 = den.trim().parse().map_err(|_| bad(line, format!("malformed number `{s}`")))?;
        if d == 0.0 {
            return Err(bad(line, format!("zero denominator in `{s}`")));
        }
        return Ok(n / d);
    }
    s.parse().map_err(|_| bad(line, format!("malformed number `{s}`")))
}

fn parse_list(s: &str, line: usize) -> Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse_number(t, line))
        .collect()
}

#[derive(Default)]
struct FlowDraft {
    gaussians: Vec<IsotropicGaussian>,
    atoms: Vec<(Point, f64)>,
    line: usize,
}

impl FlowDraft {
    fn build(self, dim: usize) -> Result<InitialDatum> {
        match (self.gaussians.is_empty(), self.atoms.is_empty()) {
            (false, true) => Ok(InitialDatum::Mixture(GaussianMixture::new(self.gaussians)?)),
            (true, false) => Ok(InitialDatum::Atoms(AtomicMeasure::new(self.atoms, dim)?)),
            (true, true) => Err(bad(self.line, "empty [flow] section")),
            (false, false) => {
                Err(bad(self.line, "a [flow] section mixes `gaussian` and `atom` entries"))
            }
        }
    }
}

/// Parse and validate a configuration. Unknown keys, malformed numbers and
/// inadmissible exponents are reported with the offending line number.
pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let mut name = String::from("experiment");
    let mut mode: Option<Mode> = None;
    let mut dim = 1usize;
    let mut p_list: Option<(Vec<f64>, usize)> = None;
    let mut sigma_list: Option<(Vec<f64>, usize)> = None;
    let mut n = 256usize;
    let mut period: Option<f64> = None;
    let mut t_min = 1e-2;
    let mut t_max = 1e2;
    let mut count = 32usize;
    let mut log_spacing = true;
    let mut tolerance = 1e-8;
    let mut alpha: Option<(Vec<f64>, usize)> = None;
    let mut rho: Option<(Vec<f64>, usize)> = None;
    let mut p_target: Option<(f64, usize)> = None;
    let mut lambda = (1.0, 1.0);
    let mut hy_exponent = 4u32;

    let mut flows: Vec<FlowDraft> = Vec::new();
    let mut in_flow = false;

    for (idx, raw) in text.lines().enumerate() {
        let lno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "[flow]" {
            flows.push(FlowDraft { line: lno, ..FlowDraft::default() });
            in_flow = true;
            continue;
        }
        if line.starts_with('[') {
            return Err(bad(lno, format!("unknown section `{line}`")));
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(lno, format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());

        if in_flow {
            let flow = flows.last_mut().expect("in_flow implies a section");
            match key {
                // gaussian = amplitude decay center... (one coordinate per dim)
                "gaussian" => {
                    let v = parse_list(value, lno)?;
                    if v.len() != 2 + dim {
                        return Err(bad(lno, format!(
                            "`gaussian` needs amplitude, decay and {dim} center coordinate(s)"
                        )));
                    }
                    let mut center = [0.0; 2];
                    center[..dim].copy_from_slice(&v[2..]);
                    flow.gaussians.push(
                        IsotropicGaussian::new(v[0], v[1], center, dim)
                            .map_err(|e| bad(lno, e.to_string()))?,
                    );
                }
                // atom = weight location... (one coordinate per dim)
                "atom" => {
                    let v = parse_list(value, lno)?;
                    if v.len() != 1 + dim {
                        return Err(bad(lno, format!(
                            "`atom` needs a weight and {dim} coordinate(s)"
                        )));
                    }
                    let mut loc = [0.0; 2];
                    loc[..dim].copy_from_slice(&v[1..]);
                    flow.atoms.push((loc, v[0]));
                }
                _ => return Err(bad(lno, format!("unknown key `{key}` in [flow] section"))),
            }
            continue;
        }

        match key {
            "name" => name = value.to_string(),
            "mode" => {
                mode = Some(
                    Mode::parse(value).ok_or_else(|| bad(lno, format!("unknown mode `{value}`")))?,
                )
            }
            "dimension" => {
                dim = parse_number(value, lno)? as usize;
                if dim != 1 && dim != 2 {
                    return Err(bad(lno, "dimension must be 1 or 2"));
                }
            }
            "p_list" => p_list = Some((parse_list(value, lno)?, lno)),
            "sigma_list" => sigma_list = Some((parse_list(value, lno)?, lno)),
            "N" => {
                let v = parse_number(value, lno)?;
                n = v as usize;
                if v != n as f64 {
                    return Err(bad(lno, "N must be an integer"));
                }
            }
            "L" => period = Some(parse_number(value, lno)?),
            "t_min" => t_min = parse_number(value, lno)?,
            "t_max" => t_max = parse_number(value, lno)?,
            "count" => count = parse_number(value, lno)? as usize,
            "spacing" => match value {
                "log" => log_spacing = true,
                "linear" => log_spacing = false,
                _ => return Err(bad(lno, format!("spacing must be log or linear, got `{value}`"))),
            },
            "tolerance" => tolerance = parse_number(value, lno)?,
            "alpha" => alpha = Some((parse_list(value, lno)?, lno)),
            "rho" => rho = Some((parse_list(value, lno)?, lno)),
            "p" => p_target = Some((parse_number(value, lno)?, lno)),
            "lambda" => {
                let v = parse_list(value, lno)?;
                if v.len() != 2 {
                    return Err(bad(lno, "`lambda` needs exactly two values"));
                }
                lambda = (v[0], v[1]);
            }
            "hy_exponent" => hy_exponent = parse_number(value, lno)? as u32,
            _ => return Err(bad(lno, format!("unknown key `{key}`"))),
        }
    }

    let mode = mode.ok_or_else(|| bad(0, "missing required key `mode`"))?;

    // Verify mode carries its own built-in configurations.
    let (tuple, rates, sigma_overridden) = if mode == Mode::Verify {
        let tuple = complete_p(&[4.0 / 3.0, 4.0 / 3.0])?;
        let rates = canonical_sigmas(&tuple);
        (tuple, rates, false)
    } else {
        let (plist, pline) =
            p_list.ok_or_else(|| bad(0, "missing required key `p_list`"))?;
        let tuple = complete_p(&plist).map_err(|e| bad(pline, e.to_string()))?;
        match sigma_list {
            Some((slist, sline)) => {
                if slist.len() != tuple.n() {
                    return Err(bad(sline, format!(
                        "sigma_list has {} entries for {} exponents",
                        slist.len(),
                        tuple.n()
                    )));
                }
                let rates = from_sigma_list(&tuple, slist);
                (tuple, rates, true)
            }
            None => {
                let rates = canonical_sigmas(&tuple);
                (tuple, rates, false)
            }
        }
    };

    let extended = match (alpha, rho, p_target) {
        (Some((a, aline)), Some((r, rline)), Some((p, _))) => {
            if a.len() != 2 {
                return Err(bad(aline, "`alpha` needs exactly two values"));
            }
            if r.len() != 2 {
                return Err(bad(rline, "`rho` needs exactly two values"));
            }
            Some(
                extended_params(a[0], a[1], r[0], r[1], p, dim)
                    .map_err(|e| bad(aline, e.to_string()))?,
            )
        }
        (None, None, None) => None,
        _ => return Err(bad(0, "weighted parameters need all of `alpha`, `rho` and `p`")),
    };

    if mode == Mode::Weighted && extended.is_none() {
        return Err(bad(0, "weighted mode needs `alpha`, `rho` and `p`"));
    }

    let built_flows = {
        let mut out = Vec::with_capacity(flows.len());
        for draft in flows {
            let line = draft.line;
            out.push(draft.build(dim).map_err(|e| match e {
                e @ Error::Config { .. } => e,
                other => bad(line, other.to_string()),
            })?);
        }
        out
    };

    let needs_flows = !matches!(mode, Mode::Constants | Mode::Verify);
    if needs_flows && built_flows.len() != tuple.n() {
        return Err(bad(0, format!(
            "mode `{}` needs {} [flow] sections, found {}",
            mode.name(),
            tuple.n(),
            built_flows.len()
        )));
    }
    for flow in &built_flows {
        if flow.dim() != dim {
            return Err(bad(0, "flow dimension does not match `dimension`"));
        }
    }

    Ok(ExperimentSpec {
        name,
        mode,
        dim,
        tuple,
        rates,
        sigma_overridden,
        n,
        period,
        t_min,
        t_max,
        count,
        log_spacing,
        tolerance,
        extended,
        lambda,
        hy_exponent,
        flows: built_flows,
    })
}
