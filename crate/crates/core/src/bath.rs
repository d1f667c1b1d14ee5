//! Bath spectral densities and the per-transition rate data derived from
//! them: golden-rule decay rates, zero-temperature and thermal level
//! shifts, and thermal occupations.
//!
//! All spectra are piecewise linear on [0, Ω] (the Ohmic and flat families
//! are one-segment cases), which gives every zero-temperature shift an
//! exact closed form against which the quadrature route is certified.

use crate::error::{Error, Result};
use crate::quad;
use crate::system::{Coupling, SystemSpec};

pub const TAU: f64 = std::f64::consts::TAU;

/// Spectral density J(ω) on [0, Ω] with a sharp cutoff at Ω.
#[derive(Debug, Clone, PartialEq)]
pub enum Spectrum {
    /// J(ω) = ω/Ω².
    Ohmic { cutoff: f64 },
    /// J(ω) = j0 on the whole interval.
    Flat { j0: f64, cutoff: f64 },
    /// Ohmic slope 1/Ω² outside [seg_lo, seg_hi], slope r/Ω² inside,
    /// continuous everywhere.
    PiecewiseLinear {
        cutoff: f64,
        r: f64,
        seg_lo: f64,
        seg_hi: f64,
    },
    /// Linear interpolation through (grid, values); grid must span [0, Ω].
    Tabulated {
        grid: Vec<f64>,
        values: Vec<f64>,
        cutoff: f64,
    },
}

/// A bath: spectrum plus temperature (k_B = 1, so T carries frequency units).
#[derive(Debug, Clone, PartialEq)]
pub struct BathSpec {
    pub spectrum: Spectrum,
    pub temperature: f64,
}

impl BathSpec {
    pub fn new(spectrum: Spectrum, temperature: f64) -> Result<Self> {
        let bath = BathSpec {
            spectrum,
            temperature,
        };
        bath.validate()?;
        Ok(bath)
    }

    pub fn zero_temperature(spectrum: Spectrum) -> Result<Self> {
        Self::new(spectrum, 0.0)
    }

    pub fn cutoff(&self) -> f64 {
        match &self.spectrum {
            Spectrum::Ohmic { cutoff }
            | Spectrum::Flat { cutoff, .. }
            | Spectrum::PiecewiseLinear { cutoff, .. }
            | Spectrum::Tabulated { cutoff, .. } => *cutoff,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config("temperature must be finite and ≥ 0".into()));
        }
        let cutoff = self.cutoff();
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::Config("cutoff must be positive".into()));
        }
        match &self.spectrum {
            Spectrum::Ohmic { .. } => {}
            Spectrum::Flat { j0, .. } => {
                if !(*j0 >= 0.0 && j0.is_finite()) {
                    return Err(Error::Config("flat density must be ≥ 0".into()));
                }
            }
            Spectrum::PiecewiseLinear {
                cutoff,
                r,
                seg_lo,
                seg_hi,
            } => {
                if !(*r >= 0.0 && r.is_finite()) {
                    return Err(Error::Config("slope factor must be ≥ 0".into()));
                }
                if !(0.0 <= *seg_lo && seg_lo < seg_hi && *seg_hi < *cutoff) {
                    return Err(Error::Config(
                        "segment must satisfy 0 ≤ lo < hi < cutoff".into(),
                    ));
                }
            }
            Spectrum::Tabulated {
                grid,
                values,
                cutoff,
            } => {
                if grid.len() < 2 || grid.len() != values.len() {
                    return Err(Error::Config(
                        "tabulated spectrum needs ≥ 2 aligned (ω, J) points".into(),
                    ));
                }
                if grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config("tabulated grid must increase".into()));
                }
                let span_tol = 1e-9 * cutoff;
                if grid[0].abs() > span_tol || (grid[grid.len() - 1] - cutoff).abs() > span_tol {
                    return Err(Error::Config(
                        "tabulated grid must span [0, cutoff] exactly".into(),
                    ));
                }
                if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::Config("tabulated densities must be ≥ 0".into()));
                }
            }
        }
        Ok(())
    }

    /// The spectrum as linear segments (lo, hi, slope, intercept) covering
    /// [0, Ω]. J(ω) = slope·ω + intercept on each segment.
    pub fn segments(&self) -> Vec<(f64, f64, f64, f64)> {
        let cutoff = self.cutoff();
        match &self.spectrum {
            Spectrum::Ohmic { .. } => {
                vec![(0.0, cutoff, 1.0 / (cutoff * cutoff), 0.0)]
            }
            Spectrum::Flat { j0, .. } => vec![(0.0, cutoff, 0.0, *j0)],
            Spectrum::PiecewiseLinear { r, seg_lo, seg_hi, .. } => {
                let s = 1.0 / (cutoff * cutoff);
                // y at the breakpoints, keeping the function continuous.
                let y_lo = s * seg_lo;
                let y_hi = y_lo + r * s * (seg_hi - seg_lo);
                let mut segs = Vec::new();
                if *seg_lo > 0.0 {
                    segs.push((0.0, *seg_lo, s, 0.0));
                }
                segs.push((*seg_lo, *seg_hi, r * s, y_lo - r * s * seg_lo));
                segs.push((*seg_hi, cutoff, s, y_hi - s * seg_hi));
                segs
            }
            Spectrum::Tabulated { grid, values, .. } => grid
                .windows(2)
                .zip(values.windows(2))
                .map(|(w, v)| {
                    let slope = (v[1] - v[0]) / (w[1] - w[0]);
                    (w[0], w[1], slope, v[0] - slope * w[0])
                })
                .collect(),
        }
    }

    /// Interior frequencies where the slope changes.
    pub fn breakpoints(&self) -> Vec<f64> {
        let segs = self.segments();
        segs.iter().skip(1).map(|s| s.0).collect()
    }
}

/// J(ω); errors outside [0, Ω].
pub fn spectral_density(bath: &BathSpec, omega: f64) -> Result<f64> {
    let cutoff = bath.cutoff();
    if !(0.0..=cutoff).contains(&omega) {
        return Err(Error::Domain(format!(
            "frequency {omega} outside the bath support [0, {cutoff}]"
        )));
    }
    for (lo, hi, slope, intercept) in bath.segments() {
        if omega <= hi || hi == cutoff {
            let _ = lo;
            if omega >= lo - 1e-12 * cutoff || omega <= hi {
                return Ok(slope * omega + intercept);
            }
        }
    }
    unreachable!("segments cover [0, cutoff]")
}

/// Golden-rule decay rate γ = 2π g² J(ω0); errors for ω0 outside (0, Ω).
pub fn decay_rate(bath: &BathSpec, g: f64, omega0: f64) -> Result<f64> {
    require_interior(bath, omega0)?;
    Ok(TAU * g * g * spectral_density(bath, omega0)?)
}

/// |g| realizing a target decay rate at ω0.
pub fn coupling_for_rate(bath: &BathSpec, gamma: f64, omega0: f64) -> Result<f64> {
    require_interior(bath, omega0)?;
    let j = spectral_density(bath, omega0)?;
    if j <= 0.0 {
        return Err(Error::Domain(format!(
            "spectral density vanishes at {omega0}; no coupling realizes γ = {gamma}"
        )));
    }
    if gamma < 0.0 {
        return Err(Error::Domain("target decay rate must be ≥ 0".into()));
    }
    Ok((gamma / (TAU * j)).sqrt())
}

pub fn resolve_coupling(bath: &BathSpec, coupling: Coupling, omega0: f64) -> Result<f64> {
    match coupling {
        Coupling::Amplitude(g) => Ok(g),
        Coupling::TargetGamma(gamma) => coupling_for_rate(bath, gamma, omega0),
    }
}

fn require_interior(bath: &BathSpec, omega0: f64) -> Result<()> {
    let cutoff = bath.cutoff();
    if !(omega0 > 0.0 && omega0 < cutoff) {
        return Err(Error::Domain(format!(
            "transition frequency {omega0} must lie strictly inside (0, {cutoff})"
        )));
    }
    Ok(())
}

/// Level-shift closed form for the Ohmic spectrum:
/// Δ = (γ/2π)[Ω/ω0 + ln(Ω/ω0 − 1)].
pub fn lamb_shift_ohmic_closed(gamma: f64, omega0: f64, cutoff: f64) -> Result<f64> {
    if !(cutoff > omega0 && omega0 > 0.0) {
        return Err(Error::Domain(format!(
            "closed form needs 0 < ω0 < Ω, got ω0 = {omega0}, Ω = {cutoff}"
        )));
    }
    let x = cutoff / omega0;
    Ok(gamma / TAU * (x + (x - 1.0).ln()))
}

/// Exact level shift Δ = g² P∫_0^Ω J(ω)/(ω − ω0) dω evaluated segment by
/// segment: each linear piece integrates in closed form, and the log
/// singularities cancel across continuous breakpoints.
pub fn lamb_shift_closed(bath: &BathSpec, g: f64, omega0: f64) -> Result<f64> {
    require_interior(bath, omega0)?;
    let cutoff = bath.cutoff();
    let segs = bath.segments();
    let mut total = 0.0;
    // Slope terms.
    for &(lo, hi, slope, _) in &segs {
        total += slope * (hi - lo);
    }
    // Endpoint log terms, grouped so that the weight of ln|x − ω0| is the
    // jump of (slope·ω0 + intercept) across x, which vanishes linearly in
    // (ω0 − x) for a continuous spectrum.
    let mut endpoint_terms: Vec<(f64, f64)> = Vec::new();
    for &(lo, hi, slope, intercept) in &segs {
        let weight = slope * omega0 + intercept;
        endpoint_terms.push((hi, weight));
        endpoint_terms.push((lo, -weight));
    }
    let tol = 1e-13 * cutoff;
    for (x, weight) in endpoint_terms {
        let dist = (x - omega0).abs();
        if dist <= tol {
            // ω0 sits on a breakpoint: the grouped weight tends to zero
            // with the distance, so the limiting contribution vanishes.
            continue;
        }
        total += weight * dist.ln();
    }
    Ok(g * g * total)
}

/// Cauchy principal value of ∫ f(x) dx with a simple pole at x_sing; the
/// residue is measured from f itself near the pole.
pub fn principal_value<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, x_sing: f64) -> Result<f64> {
    quad::principal_value(
        move |x| f(x) * (x - x_sing),
        lo,
        hi,
        x_sing,
        &[],
        quad::DEFAULT_REL_TOL,
        quad::DEFAULT_ABS_TOL,
    )
}

/// Level shift by quadrature: Δ = g² P∫_{−ω0}^{Ω−ω0} J(ω + ω0)/ω dω.
pub fn lamb_shift_pv(bath: &BathSpec, g: f64, omega0: f64) -> Result<f64> {
    require_interior(bath, omega0)?;
    let cutoff = bath.cutoff();
    let residue = spectral_density(bath, omega0)?;
    let shifted_breaks: Vec<f64> = bath.breakpoints().iter().map(|b| b - omega0).collect();
    let bath = bath.clone();
    let value = quad::principal_value_with_residue(
        move |w| {
            let u = (w + omega0).clamp(0.0, cutoff);
            spectral_density(&bath, u).expect("clamped to support")
        },
        -omega0,
        cutoff - omega0,
        0.0,
        residue,
        &shifted_breaks,
        quad::DEFAULT_REL_TOL,
        quad::DEFAULT_ABS_TOL,
    )?;
    Ok(g * g * value)
}

/// Bose-Einstein occupation n(ω) = 1/(e^{ω/T} − 1); exactly 0 at T = 0.
pub fn thermal_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if omega <= 0.0 {
        return Err(Error::Domain(format!(
            "thermal occupation needs ω > 0, got {omega}"
        )));
    }
    if temperature < 0.0 {
        return Err(Error::Domain("temperature must be ≥ 0".into()));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let n = 1.0 / (omega / temperature).exp_m1();
    if !n.is_finite() {
        return Err(Error::Domain(format!(
            "thermal occupation overflows at ω/T = {:e}",
            omega / temperature
        )));
    }
    Ok(n)
}

/// n(ω) shaped for integrands: finite for every ω > 0 (underflows to 0 at
/// large ω/T rather than erroring) and extended by its ω → 0 limit slope
/// where the caller multiplies by a density vanishing at 0.
fn occupation_unchecked(omega: f64, temperature: f64) -> f64 {
    let n = 1.0 / (omega / temperature).exp_m1();
    if n.is_finite() {
        n
    } else {
        0.0
    }
}

/// Thermal level shift Δ^T = g² P∫_{−ω0}^{Ω−ω0} J(ω+ω0) n(ω+ω0)/ω dω.
///
/// The lower endpoint is integrable only when J(0) = 0 (the occupation
/// divergence cancels against the density zero); a nonzero J(0) makes the
/// shift infrared-divergent and is rejected.
pub fn thermal_lamb_shift(bath: &BathSpec, g: f64, omega0: f64, temperature: f64) -> Result<f64> {
    require_interior(bath, omega0)?;
    if temperature < 0.0 {
        return Err(Error::Domain("temperature must be ≥ 0".into()));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let j_zero = spectral_density(bath, 0.0)?;
    let cutoff = bath.cutoff();
    if j_zero.abs() > 1e-14 / cutoff.max(1.0) {
        return Err(Error::Domain(
            "thermal shift diverges unless the spectral density vanishes at ω = 0".into(),
        ));
    }
    let residue = spectral_density(bath, omega0)? * occupation_unchecked(omega0, temperature);
    let shifted_breaks: Vec<f64> = bath.breakpoints().iter().map(|b| b - omega0).collect();
    let zero_slope = bath.segments()[0].2;
    let bath_c = bath.clone();
    let value = quad::principal_value_with_residue(
        move |w| {
            let u = (w + omega0).clamp(0.0, cutoff);
            if u <= 0.0 {
                // Limit of J(u)·n(u) as u → 0⁺ for J with slope s at 0.
                return zero_slope * temperature;
            }
            spectral_density(&bath_c, u).expect("clamped to support")
                * occupation_unchecked(u, temperature)
        },
        -omega0,
        cutoff - omega0,
        0.0,
        residue,
        &shifted_breaks,
        quad::DEFAULT_REL_TOL,
        quad::DEFAULT_ABS_TOL,
    )?;
    Ok(g * g * value)
}

/// Per-transition rate data.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    /// Transition frequency ω_j.
    pub omega: f64,
    /// Decay rate γ_j.
    pub gamma: f64,
    /// Zero-temperature shift Δ_j.
    pub lamb: f64,
    /// Thermal shift Δ_j^T (zero at T = 0).
    pub thermal_lamb: f64,
    /// Occupation n̄_j at the transition frequency.
    pub occupation: f64,
    /// Coupling phase φ_j.
    pub phase: f64,
    /// Resolved coupling magnitude |g_j|.
    pub coupling: f64,
}

impl RateRow {
    /// R_j = γ_j / (2|g_j|²); the per-unit-coupling real rate.
    pub fn r_coeff(&self) -> f64 {
        per_coupling(self.gamma / 2.0, self.coupling)
    }

    /// I_j = Δ_j / |g_j|²; the per-unit-coupling shift.
    pub fn i_coeff(&self) -> f64 {
        per_coupling(self.lamb, self.coupling)
    }

    /// Δ_j^T / |g_j|².
    pub fn thermal_i_coeff(&self) -> f64 {
        per_coupling(self.thermal_lamb, self.coupling)
    }
}

fn per_coupling(value: f64, coupling: f64) -> f64 {
    if coupling == 0.0 {
        0.0
    } else {
        value / (coupling * coupling)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    pub temperature: f64,
}

impl RateTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_thermal(&self) -> bool {
        self.temperature > 0.0
    }

    /// Scale one transition's γ (used by rate fitting).
    pub fn with_gamma(&self, j: usize, gamma: f64) -> RateTable {
        let mut t = self.clone();
        t.rows[j].gamma = gamma;
        t
    }

    /// Scale one transition's Δ (used by rate fitting).
    pub fn with_lamb(&self, j: usize, lamb: f64) -> RateTable {
        let mut t = self.clone();
        t.rows[j].lamb = lamb;
        t
    }
}

impl std::fmt::Display for RateTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "temperature = {}", self.temperature)?;
        writeln!(
            f,
            "{:>3} {:>14} {:>14} {:>14} {:>14} {:>12} {:>8} {:>12}",
            "j", "omega", "gamma", "lamb", "thermal_lamb", "occupation", "phase", "coupling"
        )?;
        for (j, r) in self.rows.iter().enumerate() {
            writeln!(
                f,
                "{:>3} {:>14.8} {:>14.8} {:>14.8} {:>14.8} {:>12.6} {:>8.4} {:>12.8}",
                j, r.omega, r.gamma, r.lamb, r.thermal_lamb, r.occupation, r.phase, r.coupling
            )?;
        }
        Ok(())
    }
}

fn build_row(
    bath: &BathSpec,
    omega: f64,
    eval_omega: f64,
    coupling: Coupling,
    phase: f64,
    closed_form: bool,
) -> Result<RateRow> {
    let g = resolve_coupling(bath, coupling, eval_omega)?;
    let gamma = decay_rate(bath, g, eval_omega)?;
    let lamb = if closed_form {
        lamb_shift_closed(bath, g, eval_omega)?
    } else {
        lamb_shift_pv(bath, g, eval_omega)?
    };
    let (thermal_lamb, occupation) = if bath.temperature > 0.0 {
        (
            thermal_lamb_shift(bath, g, eval_omega, bath.temperature)?,
            thermal_occupation(eval_omega, bath.temperature)?,
        )
    } else {
        (0.0, 0.0)
    };
    Ok(RateRow {
        omega,
        gamma,
        lamb,
        thermal_lamb,
        occupation,
        phase,
        coupling: g,
    })
}

fn assemble_table(
    system: &SystemSpec,
    bath: &BathSpec,
    anchor: Option<f64>,
    closed_form: bool,
) -> Result<RateTable> {
    system.validate()?;
    bath.validate()?;
    let mut rows = Vec::with_capacity(system.transitions.len());
    for (j, t) in system.transitions.iter().enumerate() {
        let omega = system.transition_frequency(j, &system.energies);
        let eval_omega = anchor.unwrap_or(omega);
        rows.push(build_row(bath, omega, eval_omega, t.coupling, t.phase, closed_form)?);
    }
    Ok(RateTable {
        rows,
        temperature: bath.temperature,
    })
}

/// One row per transition, with all spectral quantities evaluated at that
/// transition's own frequency. Shifts use certified quadrature.
pub fn build_rate_table(system: &SystemSpec, bath: &BathSpec) -> Result<RateTable> {
    assemble_table(system, bath, None, false)
}

/// Same as build_rate_table but with the exact segment closed form for the
/// zero-temperature shifts; used where the table is rebuilt every step.
pub fn build_rate_table_closed(system: &SystemSpec, bath: &BathSpec) -> Result<RateTable> {
    assemble_table(system, bath, None, true)
}

/// Rate table with every spectral quantity evaluated at one anchor
/// frequency, as the degenerate construction demands. Transition
/// frequencies are kept for reference; target-γ couplings are inverted at
/// the anchor.
pub fn build_rate_table_anchored(
    system: &SystemSpec,
    bath: &BathSpec,
    anchor: f64,
) -> Result<RateTable> {
    assemble_table(system, bath, Some(anchor), false)
}
