//! Steep-spectrum study: how decay departs from a single exponential and
//! how many dynamical variables the exact evolution needs as the
//! spectral slope at the transition grows.
//!
//! The damping-rate targets are re-resolved at every slope so the slope
//! is the only variable; couplings shrink as the spectrum rises. The
//! boosted segment is kept narrow (comparable to the shifted resonance
//! region, not the cutoff scale): a wide segment dilutes the slope into
//! an overall rescaling that the rate target absorbs, and the departure
//! from exponential decay then shrinks with r instead of growing.

use std::f64::consts::PI;

use crate::bath::{BathSpec, Spectrum};
use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::{c, CVec};
use crate::operators::Element;
use crate::oracle::exact_reference;
use crate::sysid::{
    effective_dimension, identify_responses, responses_from_evolutions, DimensionCriterion,
    OrderRule, ResponseSet, DEFAULT_HANKEL_DEPTH, DEFAULT_MASS_FRACTION,
};
use crate::system::{Coupling, SystemSpec, Transition};

/// Reference transition frequency of the study.
pub const SLOPE_FREQUENCY: f64 = 10.0 * PI;

/// Bath cutoff of the study.
pub const SLOPE_CUTOFF: f64 = 80.0 * PI;

/// Half-width of the boosted spectral segment, centered on the
/// reference frequency. Wide enough to contain both V transitions and
/// their level shifts, narrow enough that the slope stays a local
/// feature of the spectrum.
pub const SLOPE_SEGMENT_HALF_WIDTH: f64 = 1.0;

/// Two-level damping-rate target.
pub const SLOPE_GAMMA_TWO_LEVEL: f64 = 0.296;

/// Per-transition damping-rate target of the V variant.
pub const SLOPE_GAMMA_V: f64 = 0.2;

/// Frequency splitting of the V variant.
pub const SLOPE_SPLITTING: f64 = 0.296;

/// Populations below this floor are excluded from the log-linear fit.
pub const LOG_FIT_FLOOR: f64 = 1e-8;

/// Sampling interval of the dimension study. Slightly longer than the
/// library default so slow memory contributions outweigh sampling
/// artifacts in the Hankel spectrum.
pub const SLOPE_SAMPLING_INTERVAL: f64 = 0.75;

/// Relative singular-value floor of the dimension study. Directions
/// fainter than this never influence the observed responses at the
/// resolution of the study and are not counted as dynamical variables.
pub const SLOPE_ORDER_FLOOR: f64 = 8e-4;

/// Ohmic-slope spectrum whose middle segment, centered on the reference
/// frequency, has its slope boosted by the factor r.
pub fn steep_bath(r: f64) -> Result<BathSpec> {
    BathSpec::zero_temperature(Spectrum::PiecewiseLinear {
        cutoff: SLOPE_CUTOFF,
        r,
        seg_lo: SLOPE_FREQUENCY - SLOPE_SEGMENT_HALF_WIDTH,
        seg_hi: SLOPE_FREQUENCY + SLOPE_SEGMENT_HALF_WIDTH,
    })
}

/// Two-level system in the middle of the boosted segment.
pub fn two_level_steep(r: f64) -> Result<(SystemSpec, BathSpec)> {
    let system = SystemSpec::new(
        vec![0.0, SLOPE_FREQUENCY],
        vec![Transition::new(
            0,
            1,
            Coupling::TargetGamma(SLOPE_GAMMA_TWO_LEVEL),
        )],
    )?;
    Ok((system, steep_bath(r)?))
}

/// V system with transitions straddling the reference frequency.
pub fn v_steep(r: f64) -> Result<(SystemSpec, BathSpec)> {
    let system = SystemSpec::new(
        vec![
            0.0,
            SLOPE_FREQUENCY - 0.5 * SLOPE_SPLITTING,
            SLOPE_FREQUENCY + 0.5 * SLOPE_SPLITTING,
        ],
        vec![
            Transition::new(0, 1, Coupling::TargetGamma(SLOPE_GAMMA_V)),
            Transition::new(0, 2, Coupling::TargetGamma(SLOPE_GAMMA_V)),
        ],
    )?;
    Ok((system, steep_bath(r)?))
}

/// Largest residual of ln(values) against its least-squares straight
/// line in time, over the samples above `floor`. Zero for a pure
/// exponential; grows as the decay distorts.
pub fn log_linear_deviation(times: &[f64], values: &[f64], floor: f64) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} times against {} values",
            times.len(),
            values.len()
        )));
    }
    let points: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > floor)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if points.len() < 3 {
        return Err(Error::Config(format!(
            "only {} samples above the fit floor",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let (st, sy): (f64, f64) = points.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (tm, ym) = (st / n, sy / n);
    let mut stt = 0.0;
    let mut sty = 0.0;
    for (t, y) in &points {
        stt += (t - tm) * (t - tm);
        sty += (t - tm) * (y - ym);
    }
    if stt == 0.0 {
        return Err(Error::Config("all samples at one time".into()));
    }
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    Ok(points
        .iter()
        .map(|(t, y)| (y - (intercept + slope * t)).abs())
        .fold(0.0, f64::max))
}

/// Non-exponentiality of the exact two-level decay at slope r: the
/// excited state decays from full occupation and the log-population is
/// compared against a straight line.
pub fn two_level_decay_deviation(
    r: f64,
    t_max: f64,
    samples: usize,
    n_modes: Option<usize>,
) -> Result<f64> {
    let (system, bath) = two_level_steep(r)?;
    let psi0 = CVec::from_vec(vec![c(0.0), c(1.0)]);
    let times: Vec<f64> = (0..=samples)
        .map(|i| t_max * i as f64 / samples as f64)
        .collect();
    let run = exact_reference(&system, &bath, &psi0, &times, n_modes)?;
    let pops = run.element_series(Element::Pop(1));
    log_linear_deviation(&times, &pops, LOG_FIT_FLOOR)
}

/// Deviations for r = 2^e over the given exponents, in parallel.
pub fn deviation_sweep(
    exponents: &[u32],
    t_max: f64,
    samples: usize,
    n_modes: Option<usize>,
) -> Result<Vec<(f64, f64)>> {
    let rows = exec::map_indexed(exponents.len(), |i| {
        let r = 2.0_f64.powi(exponents[i] as i32);
        two_level_decay_deviation(r, t_max, samples, n_modes).map(|d| (r, d))
    });
    rows.into_iter().collect()
}

/// Sampling and identification parameters for the dimension study.
#[derive(Debug, Clone, Copy)]
pub struct SidStudyParams {
    pub tau: f64,
    pub depth: usize,
    /// Eigenvalue-magnitude fraction that defines the dimension.
    pub mass_fraction: f64,
    /// Relative singular-value floor for the identification order.
    /// Directions fainter than this fraction of the leading one are
    /// treated as unresolved rather than dynamical.
    pub order_floor: f64,
    /// Bath modes for the exact runs; None picks the default for the
    /// probe horizon.
    pub n_modes: Option<usize>,
}

impl Default for SidStudyParams {
    fn default() -> Self {
        SidStudyParams {
            tau: SLOPE_SAMPLING_INTERVAL,
            depth: DEFAULT_HANKEL_DEPTH,
            mass_fraction: DEFAULT_MASS_FRACTION,
            order_floor: SLOPE_ORDER_FLOOR,
            n_modes: None,
        }
    }
}

fn sample_grid(params: &SidStudyParams) -> Vec<f64> {
    let n_maps = 2 * params.depth + 2;
    (0..n_maps).map(|k| k as f64 * params.tau).collect()
}

fn dimension_of(set: &ResponseSet, params: &SidStudyParams) -> Result<usize> {
    let model = identify_responses(set, params.depth, OrderRule::Tolerance(params.order_floor))?;
    Ok(effective_dimension(
        &model,
        DimensionCriterion::EigenvalueMass(params.mass_fraction),
    ))
}

/// Effective dimension behind the exact two-level excited-state decay.
/// Starting excited leaves the population as the only observed variable.
pub fn two_level_dimension(r: f64, params: &SidStudyParams) -> Result<usize> {
    let (system, bath) = two_level_steep(r)?;
    let psi0 = CVec::from_vec(vec![c(0.0), c(1.0)]);
    let times = sample_grid(params);
    let run = exact_reference(&system, &bath, &psi0, &times, params.n_modes)?;
    let maps = run
        .element_series(Element::Pop(1))
        .into_iter()
        .map(|p| crate::linalg::RMat::from_element(1, 1, p))
        .collect();
    let set = ResponseSet::new(params.tau, maps)?;
    dimension_of(&set, params)
}

/// Effective dimension behind the exact V-system dynamics, observed
/// through the two upper populations and their coherence.
pub fn v_dimension(r: f64, params: &SidStudyParams) -> Result<usize> {
    let (system, bath) = v_steep(r)?;
    let times = sample_grid(params);
    let s = 1.0 / 2.0_f64.sqrt();
    let probes = [
        CVec::from_vec(vec![c(0.0), c(1.0), c(0.0)]),
        CVec::from_vec(vec![c(0.0), c(0.0), c(1.0)]),
        CVec::from_vec(vec![c(0.0), c(s), c(s)]),
        CVec::from_vec(vec![c(0.0), c(s), s * num_complex::Complex64::i()]),
    ];
    let runs: Result<Vec<_>> = probes
        .iter()
        .map(|p| exact_reference(&system, &bath, p, &times, params.n_modes))
        .collect();
    let elements = [
        Element::Pop(1),
        Element::Pop(2),
        Element::ReCoh(1, 2),
        Element::ImCoh(1, 2),
    ];
    let set = responses_from_evolutions(&runs?, &elements)?;
    dimension_of(&set, params)
}

/// One row of the dimension table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionRow {
    pub r: f64,
    pub two_level: usize,
    pub v: usize,
}

/// Effective dimensions for r = 2^e over the given exponents, in
/// parallel over rows.
pub fn dimension_table(exponents: &[u32], params: &SidStudyParams) -> Result<Vec<DimensionRow>> {
    let rows = exec::map_indexed(exponents.len(), |i| {
        let r = 2.0_f64.powi(exponents[i] as i32);
        Ok(DimensionRow {
            r,
            two_level: two_level_dimension(r, params)?,
            v: v_dimension(r, params)?,
        })
    });
    rows.into_iter().collect()
}
