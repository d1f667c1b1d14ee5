//! Side-by-side solver runs on a shared grid, pairwise error tables,
//! and best-fit rate search against a reference solution.

use crate::bath::RateTable;
use crate::error::{Error, Result};
use crate::exec;
use crate::generators::{build_generator, GeneratorKind};
use crate::linalg::CMat;
use crate::operators::Element;
use crate::propagation::{
    error_metric, positivity_report, propagate_fixed, ErrorMetric, EvolutionResult,
    PositivityReport,
};
use crate::system::SystemSpec;

/// Stable text label for a generator kind, used in report and file
/// names.
pub fn kind_label(kind: &GeneratorKind) -> String {
    match kind {
        GeneratorKind::LindbladAllRegimes => "all-regimes".into(),
        GeneratorKind::BlochRedfield => "bloch-redfield".into(),
        GeneratorKind::Degenerate => "degenerate".into(),
        GeneratorKind::NonDegenerate => "nondegenerate".into(),
        GeneratorKind::PartialSecular { .. } => "partial-secular".into(),
    }
}

/// Inverse of [`kind_label`]; "partial-secular" resolves to automatic
/// clustering (an empty cluster vector).
pub fn kind_from_label(label: &str) -> Result<GeneratorKind> {
    match label {
        "all-regimes" => Ok(GeneratorKind::LindbladAllRegimes),
        "bloch-redfield" => Ok(GeneratorKind::BlochRedfield),
        "degenerate" => Ok(GeneratorKind::Degenerate),
        "nondegenerate" => Ok(GeneratorKind::NonDegenerate),
        "partial-secular" => Ok(GeneratorKind::PartialSecular { clusters: vec![] }),
        other => Err(Error::Config(format!(
            "unknown solver '{other}'; expected one of all-regimes, \
             bloch-redfield, degenerate, nondegenerate, partial-secular"
        ))),
    }
}

/// One solver's output with its positivity diagnostics.
#[derive(Debug, Clone)]
pub struct LabeledRun {
    pub label: String,
    pub result: EvolutionResult,
    pub positivity: PositivityReport,
}

/// Error of one run against another, by label.
#[derive(Debug, Clone)]
pub struct PairError {
    pub a: String,
    pub b: String,
    pub metric: ErrorMetric,
}

/// Propagate ρ0 under each requested generator kind on one grid. Kinds
/// run in parallel. Degenerate expects `rates` to be anchored; that is
/// the caller's choice.
pub fn solve_generators(
    system: &SystemSpec,
    rates: &RateTable,
    kinds: &[GeneratorKind],
    rho0: &CMat,
    times: &[f64],
) -> Result<Vec<LabeledRun>> {
    let runs = exec::map_indexed(kinds.len(), |i| -> Result<LabeledRun> {
        let generator = build_generator(system, rates, &kinds[i])?;
        let result = propagate_fixed(&generator, rho0, times)?;
        let positivity = positivity_report(&result);
        Ok(LabeledRun {
            label: kind_label(&kinds[i]),
            result,
            positivity,
        })
    });
    runs.into_iter().collect()
}

/// Error metric for every unordered pair of runs.
pub fn pairwise_errors(runs: &[LabeledRun], elements: &[Element]) -> Result<Vec<PairError>> {
    let mut table = Vec::new();
    for (i, a) in runs.iter().enumerate() {
        for b in runs.iter().skip(i + 1) {
            table.push(PairError {
                a: a.label.clone(),
                b: b.label.clone(),
                metric: error_metric(&a.result, &b.result, elements)?,
            });
        }
    }
    Ok(table)
}

/// Error of every run against one reference solution.
pub fn errors_against(
    runs: &[LabeledRun],
    reference: &EvolutionResult,
    reference_label: &str,
    elements: &[Element],
) -> Result<Vec<PairError>> {
    runs.iter()
        .map(|run| {
            Ok(PairError {
                a: run.label.clone(),
                b: reference_label.to_string(),
                metric: error_metric(&run.result, reference, elements)?,
            })
        })
        .collect()
}

/// Golden-section minimum of a unimodal function on [lo, hi].
pub fn golden_section<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    lo: f64,
    hi: f64,
    iterations: usize,
) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..iterations {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x)?;
    Ok((x, fx))
}

/// Search bounds and stopping rule for fit_rates.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Multiplicative search interval per coordinate.
    pub lo: f64,
    pub hi: f64,
    /// A sweep improving the objective by less than this relative amount
    /// ends the descent.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Also fit the shifts, not only the damping rates.
    pub fit_lamb: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            lo: 0.25,
            hi: 4.0,
            tol: 1e-3,
            max_sweeps: 12,
            fit_lamb: true,
        }
    }
}

/// Outcome of the best-fit rate search.
#[derive(Debug, Clone)]
pub struct RateFit {
    pub table: RateTable,
    /// Multiplier applied to each transition's damping rate.
    pub gamma_factors: Vec<f64>,
    /// Multiplier applied to each transition's shift.
    pub lamb_factors: Vec<f64>,
    pub error: ErrorMetric,
    pub initial_error: ErrorMetric,
}

/// Coordinate-descent fit of per-transition damping rates and shifts
/// (multiplicative factors, golden-section per coordinate) minimizing
/// the time-averaged error against a reference solution. Deterministic.
pub fn fit_rates(
    system: &SystemSpec,
    rates: &RateTable,
    kind: &GeneratorKind,
    rho0: &CMat,
    times: &[f64],
    reference: &EvolutionResult,
    elements: &[Element],
    options: FitOptions,
) -> Result<RateFit> {
    let n = rates.len();
    if n == 0 {
        return Err(Error::Config("no transitions to fit".into()));
    }
    if !(options.lo > 0.0 && options.hi > options.lo) {
        return Err(Error::Config("fit interval must satisfy 0 < lo < hi".into()));
    }
    let apply = |gamma_factors: &[f64], lamb_factors: &[f64]| -> RateTable {
        let mut table = rates.clone();
        for j in 0..n {
            table = table
                .with_gamma(j, rates.rows[j].gamma * gamma_factors[j])
                .with_lamb(j, rates.rows[j].lamb * lamb_factors[j]);
        }
        table
    };
    let objective = |gamma_factors: &[f64], lamb_factors: &[f64]| -> Result<ErrorMetric> {
        let table = apply(gamma_factors, lamb_factors);
        let generator = build_generator(system, &table, kind)?;
        let run = propagate_fixed(&generator, rho0, times)?;
        error_metric(&run, reference, elements)
    };
    let mut gamma_factors = vec![1.0; n];
    let mut lamb_factors = vec![1.0; n];
    let initial_error = objective(&gamma_factors, &lamb_factors)?;
    let mut best = initial_error.time_average;
    let scale = best.max(1e-300);
    let mut converged = false;
    for _ in 0..options.max_sweeps {
        let before = best;
        for j in 0..n {
            let (x, fx) = golden_section(
                |g| {
                    let mut trial = gamma_factors.clone();
                    trial[j] = g;
                    Ok(objective(&trial, &lamb_factors)?.time_average)
                },
                options.lo,
                options.hi,
                40,
            )?;
            if fx < best {
                gamma_factors[j] = x;
                best = fx;
            }
            if options.fit_lamb {
                let (x, fx) = golden_section(
                    |l| {
                        let mut trial = lamb_factors.clone();
                        trial[j] = l;
                        Ok(objective(&gamma_factors, &trial)?.time_average)
                    },
                    options.lo,
                    options.hi,
                    40,
                )?;
                if fx < best {
                    lamb_factors[j] = x;
                    best = fx;
                }
            }
        }
        if before - best <= options.tol * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "rate fit still improving after {} sweeps",
            options.max_sweeps
        )));
    }
    let error = objective(&gamma_factors, &lamb_factors)?;
    Ok(RateFit {
        table: apply(&gamma_factors, &lamb_factors),
        gamma_factors,
        lamb_factors,
        error,
        initial_error,
    })
}
