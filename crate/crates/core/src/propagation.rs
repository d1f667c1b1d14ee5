//! Density-matrix propagation on uniform time grids, with diagnostics
//! (trace drift, positivity) recorded along the way.

use num_complex::Complex64;

use crate::bath::{build_rate_table_closed, resolve_coupling, BathSpec};
use crate::error::{Error, Result};
use crate::generators::{build_generator, GeneratorKind};
use crate::linalg::{c, expm, hermitian_part, min_eigenvalue_hermitian, CMat};
use crate::operators::{unvectorize, vectorize, Element, Superoperator};
use crate::system::{Coupling, SystemSpec, Transition};

/// A propagated trajectory of density matrices with per-sample
/// diagnostics.
#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub states: Vec<CMat>,
    /// Smallest eigenvalue of the Hermitian part at each sample.
    pub min_eigs: Vec<f64>,
    /// Trace (real part) at each sample.
    pub traces: Vec<f64>,
}

impl EvolutionResult {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Time series of one matrix element.
    pub fn element_series(&self, element: Element) -> Vec<f64> {
        self.states.iter().map(|s| element.extract(s)).collect()
    }
}

/// Summary of how far a solution strays from the physical set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityReport {
    /// Most negative eigenvalue over the whole evolution.
    pub min_eigenvalue: f64,
    /// Time at which it occurs.
    pub time: f64,
    /// Largest |trace − trace(0)| over the evolution.
    pub max_trace_drift: f64,
}

pub fn positivity_report(result: &EvolutionResult) -> PositivityReport {
    let mut min_eigenvalue = f64::INFINITY;
    let mut time = result.times.first().copied().unwrap_or(0.0);
    for (t, e) in result.times.iter().zip(&result.min_eigs) {
        if *e < min_eigenvalue {
            min_eigenvalue = *e;
            time = *t;
        }
    }
    let t0 = result.traces.first().copied().unwrap_or(1.0);
    let max_trace_drift = result
        .traces
        .iter()
        .map(|t| (t - t0).abs())
        .fold(0.0, f64::max);
    PositivityReport {
        min_eigenvalue,
        time,
        max_trace_drift,
    }
}

pub(crate) fn check_uniform(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::Config("need at least two time samples".into()));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config("time grid must increase".into()));
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
            return Err(Error::Config("time grid must be uniform".into()));
        }
    }
    Ok(dt)
}

fn record(states: &mut Vec<CMat>, min_eigs: &mut Vec<f64>, traces: &mut Vec<f64>, rho: CMat) {
    min_eigs.push(min_eigenvalue_hermitian(&rho));
    traces.push(rho.trace().re);
    states.push(rho);
}

/// Evolve ρ under a fixed generator on a uniform grid; the single matrix
/// exponential exp(L·dt) is reused for every step.
pub fn propagate_fixed(
    generator: &Superoperator,
    rho0: &CMat,
    times: &[f64],
) -> Result<EvolutionResult> {
    let d = rho0.nrows();
    if rho0.ncols() != d || generator.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{} but generator acts on dimension {}",
            rho0.nrows(),
            rho0.ncols(),
            generator.dim()
        )));
    }
    let dt = check_uniform(times)?;
    let step = expm(&generator.mat.map(|z| z * dt));
    let mut v = vectorize(rho0);
    let mut states = Vec::with_capacity(times.len());
    let mut min_eigs = Vec::with_capacity(times.len());
    let mut traces = Vec::with_capacity(times.len());
    record(&mut states, &mut min_eigs, &mut traces, rho0.clone());
    for _ in 1..times.len() {
        v = &step * v;
        record(&mut states, &mut min_eigs, &mut traces, unvectorize(&v, d));
    }
    Ok(EvolutionResult {
        times: times.to_vec(),
        states,
        min_eigs,
        traces,
    })
}

/// Freeze target-γ couplings into amplitudes using the level energies at
/// time t0: slow parameter drives change the rates only through the
/// spectral functions afterwards.
pub fn resolve_couplings_at(system: &SystemSpec, bath: &BathSpec, t0: f64) -> Result<SystemSpec> {
    let energies = system.energies_at(t0);
    let mut resolved = system.clone();
    for (j, t) in resolved.transitions.iter_mut().enumerate() {
        let omega = system.transition_frequency(j, &energies);
        let g = resolve_coupling(bath, t.coupling, omega)?;
        t.coupling = Coupling::Amplitude(g);
    }
    Ok(resolved)
}

/// The instantaneous frame of a driven system whose extra Hamiltonian
/// mixes levels: the unitary into the eigenbasis and the system rebuilt
/// there, with the collective coupling projected onto eigenstate
/// transitions. `system` is `None` when every projected component
/// vanishes (the instant is dissipationless).
struct EigenFrame {
    u: CMat,
    energies: Vec<f64>,
    system: Option<SystemSpec>,
}

/// Diagonalize H(t) and decompose the coupling operator over eigenstate
/// transitions. Returns `None` when H_extra(t) has no off-diagonal part,
/// in which case the bare levels already are the eigenbasis.
fn eigenframe_at(resolved: &SystemSpec, t: f64) -> Result<Option<EigenFrame>> {
    let d = resolved.dim;
    let h_extra = resolved.h_extra_at(t);
    let mixing = (0..d)
        .any(|i| (0..d).any(|j| i != j && h_extra[(i, j)].norm() > 0.0));
    if !mixing {
        return Ok(None);
    }
    let energies = resolved.energies_at(t);
    let h = resolved.h0_from_energies(&energies) + &h_extra;
    let eig = hermitian_part(&h).symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let evals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut u = CMat::zeros(d, d);
    for (col, &i) in order.iter().enumerate() {
        u.set_column(col, &eig.eigenvectors.column(i));
    }

    let mut s = CMat::zeros(d, d);
    for (j, tr) in resolved.transitions.iter().enumerate() {
        let Coupling::Amplitude(g) = tr.coupling else {
            return Err(Error::Config(
                "couplings must be resolved before adiabatic stepping".into(),
            ));
        };
        s += resolved.sigma(j) * (c(g) * Complex64::from_polar(1.0, tr.phase));
    }
    let s_eig = u.adjoint() * s * &u;
    let scale = s_eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut transitions = Vec::new();
    let mut dropped: f64 = 0.0;
    for r in 0..d {
        for col in 0..d {
            let w = s_eig[(r, col)];
            if w.norm() <= 1e-12 * scale {
                continue;
            }
            if evals[col] - evals[r] > 1e-9 {
                transitions.push(Transition {
                    lower: r,
                    upper: col,
                    coupling: Coupling::Amplitude(w.norm()),
                    phase: w.arg(),
                });
            } else {
                dropped = dropped.max(w.norm());
            }
        }
    }
    if dropped > 1e-9 * scale {
        return Err(Error::Domain(format!(
            "the instantaneous eigenbasis at t = {t} turns the coupling \
             counter-rotating (stray weight {dropped:.3e})"
        )));
    }
    let system = if transitions.is_empty() {
        None
    } else {
        Some(SystemSpec::new(evals.clone(), transitions)?)
    };
    Ok(Some(EigenFrame {
        u,
        energies: evals,
        system,
    }))
}

/// Evolve a slowly driven system: each step uses the generator built from
/// the midpoint snapshot, with couplings resolved once at the first
/// sample. When the drive mixes levels (off-diagonal H_extra), the
/// snapshot is taken in the instantaneous eigenbasis: frequencies,
/// rates, shifts, and transition operators are all re-derived from the
/// eigenstates before the step and rotated back after it. Every
/// instantaneous transition frequency must stay inside the bath support
/// throughout.
pub fn propagate_adiabatic(
    system: &SystemSpec,
    bath: &BathSpec,
    kind: &GeneratorKind,
    rho0: &CMat,
    times: &[f64],
) -> Result<EvolutionResult> {
    if matches!(kind, GeneratorKind::Degenerate) {
        return Err(Error::Config(
            "the degenerate family needs a fixed anchor table; drive it through propagate_fixed"
                .into(),
        ));
    }
    let d = rho0.nrows();
    if rho0.ncols() != d || system.dim != d {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{} but the system has dimension {}",
            rho0.nrows(),
            rho0.ncols(),
            system.dim
        )));
    }
    let dt = check_uniform(times)?;
    let resolved = resolve_couplings_at(system, bath, times[0])?;
    let mut v = vectorize(rho0);
    let mut states = Vec::with_capacity(times.len());
    let mut min_eigs = Vec::with_capacity(times.len());
    let mut traces = Vec::with_capacity(times.len());
    record(&mut states, &mut min_eigs, &mut traces, rho0.clone());
    for w in times.windows(2) {
        let midpoint = 0.5 * (w[0] + w[1]);
        match eigenframe_at(&resolved, midpoint)? {
            None => {
                let mut snapshot = resolved.clone();
                snapshot.energies = resolved.energies_at(midpoint);
                snapshot.h_extra = resolved.h_extra_at(midpoint);
                snapshot.energy_hook = None;
                snapshot.h_extra_hook = None;
                snapshot.validate()?;
                let rates = build_rate_table_closed(&snapshot, bath)?;
                let generator = build_generator(&snapshot, &rates, kind)?;
                let step = expm(&generator.mat.map(|z| z * dt));
                v = &step * v;
            }
            Some(frame) => {
                let rho = unvectorize(&v, d);
                let rho_eig = frame.u.adjoint() * rho * &frame.u;
                let next_eig = match &frame.system {
                    Some(snapshot) => {
                        let rates = build_rate_table_closed(snapshot, bath)?;
                        let generator = build_generator(snapshot, &rates, kind)?;
                        let step = expm(&generator.mat.map(|z| z * dt));
                        unvectorize(&(&step * vectorize(&rho_eig)), d)
                    }
                    // Every coupling component vanished: bare phases only.
                    None => CMat::from_fn(d, d, |i, j| {
                        let phase = (frame.energies[j] - frame.energies[i]) * dt;
                        rho_eig[(i, j)] * Complex64::from_polar(1.0, phase)
                    }),
                };
                let back = &frame.u * next_eig * frame.u.adjoint();
                v = vectorize(&back);
            }
        }
        record(&mut states, &mut min_eigs, &mut traces, unvectorize(&v, d));
    }
    Ok(EvolutionResult {
        times: times.to_vec(),
        states,
        min_eigs,
        traces,
    })
}

/// Pointwise disagreement between two evolutions over selected matrix
/// elements.
#[derive(Debug, Clone)]
pub struct ErrorMetric {
    /// Per-sample absolute difference averaged over the elements.
    pub series: Vec<f64>,
    pub time_average: f64,
    pub max: f64,
}

pub fn error_metric(
    result: &EvolutionResult,
    reference: &EvolutionResult,
    elements: &[Element],
) -> Result<ErrorMetric> {
    if result.len() != reference.len() {
        return Err(Error::DimensionMismatch(format!(
            "comparing {} samples against {}",
            result.len(),
            reference.len()
        )));
    }
    if elements.is_empty() {
        return Err(Error::Config("no elements selected".into()));
    }
    let series: Vec<f64> = result
        .states
        .iter()
        .zip(&reference.states)
        .map(|(a, b)| {
            elements
                .iter()
                .map(|e| (e.extract(a) - e.extract(b)).abs())
                .sum::<f64>()
                / elements.len() as f64
        })
        .collect();
    let time_average = series.iter().sum::<f64>() / series.len() as f64;
    let max = series.iter().copied().fold(0.0, f64::max);
    Ok(ErrorMetric {
        series,
        time_average,
        max,
    })
}

/// The stationary state of a generator, found as the kernel of its matrix.
/// Errors if the kernel is empty (no stationary state at this tolerance)
/// or has dimension above one (the stationary state is not unique).
pub fn steady_state(generator: &Superoperator) -> Result<CMat> {
    let d = generator.dim();
    let svd = generator.mat.clone().svd(false, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = 1e-10 * smax.max(1.0);
    let v_t = svd.v_t.as_ref().expect("requested");
    let mut kernel: Vec<usize> = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s <= tol {
            kernel.push(i);
        }
    }
    if kernel.is_empty() {
        return Err(Error::Singular(
            "generator has no kernel at tolerance; no stationary state".into(),
        ));
    }
    if kernel.len() > 1 {
        let vectors = kernel
            .iter()
            .map(|i| v_t.row(*i).transpose().map(|z| z.conj()))
            .collect();
        return Err(Error::DegenerateKernel {
            dim: kernel.len(),
            vectors,
        });
    }
    let v = v_t.row(kernel[0]).transpose().map(|z| z.conj());
    let rho = unvectorize(&v, d);
    let trace = rho.trace();
    if trace.norm() < 1e-10 {
        return Err(Error::Singular(
            "kernel vector is traceless; no normalizable stationary state".into(),
        ));
    }
    let rho = rho.map(|z| z / trace);
    Ok(hermitian_part(&rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{build_rate_table, BathSpec, Spectrum};
    use crate::generators::build_lindblad_all_regimes;
    use crate::linalg::{c, CVec};
    use crate::operators::pure_density;
    use crate::system::Transition;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid(t_max: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| t_max * i as f64 / n as f64).collect()
    }

    fn two_level(gamma: f64) -> (SystemSpec, BathSpec) {
        let system = SystemSpec::new(
            vec![0.0, 10.0 * PI],
            vec![Transition::new(0, 1, Coupling::TargetGamma(gamma))],
        )
        .unwrap();
        let bath = BathSpec::zero_temperature(Spectrum::Ohmic {
            cutoff: 80.0 * PI,
        })
        .unwrap();
        (system, bath)
    }

    #[test]
    fn two_level_decay_is_analytic() {
        let gamma = 0.25;
        let (system, bath) = two_level(gamma);
        let rates = build_rate_table(&system, &bath).unwrap();
        let l = build_lindblad_all_regimes(&system, &rates).unwrap();
        let mut psi = CVec::zeros(2);
        psi[0] = c(0.6);
        psi[1] = c(0.8);
        let rho0 = pure_density(&psi);
        let times = grid(30.0, 300);
        let run = propagate_fixed(&l, &rho0, &times).unwrap();
        let omega_eff = 10.0 * PI - rates.rows[0].lamb;
        for (i, t) in times.iter().enumerate() {
            let pop = run.states[i][(1, 1)].re;
            assert_relative_eq!(pop, 0.64 * (-gamma * t).exp(), epsilon = 1e-10);
            let coh = run.states[i][(1, 0)];
            let expect = c(0.8 * 0.6)
                * (crate::linalg::I * (-omega_eff * t) - c(0.5 * gamma * t)).exp();
            assert!((coh - expect).norm() < 1e-9, "t = {t}: {coh} vs {expect}");
        }
        let report = positivity_report(&run);
        assert!(report.min_eigenvalue > -1e-12);
        assert!(report.max_trace_drift < 1e-12);
    }

    #[test]
    fn closed_system_stays_pure() {
        let system = SystemSpec::new(
            vec![0.0, 2.0],
            vec![Transition::new(0, 1, Coupling::Amplitude(0.7))],
        )
        .unwrap();
        let bath = BathSpec::zero_temperature(Spectrum::Flat {
            j0: 0.0,
            cutoff: 5.0,
        })
        .unwrap();
        let rates = build_rate_table(&system, &bath).unwrap();
        assert_eq!(rates.rows[0].gamma, 0.0);
        let l = build_lindblad_all_regimes(&system, &rates).unwrap();
        let mut psi = CVec::zeros(2);
        psi[0] = c(1.0 / 2.0_f64.sqrt());
        psi[1] = c(1.0 / 2.0_f64.sqrt());
        let run = propagate_fixed(&l, &pure_density(&psi), &grid(10.0, 100)).unwrap();
        for (i, t) in run.times.iter().enumerate() {
            assert_relative_eq!(run.states[i][(1, 1)].re, 0.5, epsilon = 1e-12);
            let coh = run.states[i][(1, 0)];
            assert_relative_eq!(coh.arg(), wrap(-2.0 * t), epsilon = 1e-9);
            assert!(run.min_eigs[i] > -1e-13);
        }
        fn wrap(x: f64) -> f64 {
            let mut y = x % (2.0 * PI);
            if y > PI {
                y -= 2.0 * PI;
            } else if y < -PI {
                y += 2.0 * PI;
            }
            y
        }
    }

    #[test]
    fn thermal_two_level_reaches_gibbs_ratio() {
        let omega = 10.0 * PI;
        let temperature = 60.0;
        let system = SystemSpec::new(
            vec![0.0, omega],
            vec![Transition::new(0, 1, Coupling::TargetGamma(0.3))],
        )
        .unwrap();
        let bath = BathSpec::new(Spectrum::Ohmic { cutoff: 80.0 * PI }, temperature).unwrap();
        let rates = build_rate_table(&system, &bath).unwrap();
        let l = build_lindblad_all_regimes(&system, &rates).unwrap();
        let rho = steady_state(&l).unwrap();
        let ratio = rho[(1, 1)].re / rho[(0, 0)].re;
        assert_relative_eq!(ratio, (-omega / temperature).exp(), max_relative = 1e-10);
        assert_relative_eq!(rho.trace().re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_dark_space_reported() {
        let system = SystemSpec::new(
            vec![0.0, 10.0 * PI, 10.0 * PI],
            vec![
                Transition::new(0, 1, Coupling::TargetGamma(0.1)),
                Transition::new(0, 2, Coupling::TargetGamma(0.1)),
            ],
        )
        .unwrap();
        let bath = BathSpec::zero_temperature(Spectrum::Ohmic {
            cutoff: 80.0 * PI,
        })
        .unwrap();
        let rates = build_rate_table(&system, &bath).unwrap();
        let l = build_lindblad_all_regimes(&system, &rates).unwrap();
        match steady_state(&l) {
            Err(Error::DegenerateKernel { dim, vectors }) => {
                assert_eq!(dim, 2);
                assert_eq!(vectors.len(), 2);
            }
            other => panic!("expected degenerate kernel, got {other:?}"),
        }
    }

    #[test]
    fn adiabatic_with_constant_hook_matches_fixed() {
        let (system, bath) = two_level(0.2);
        let energies = system.energies.clone();
        let system = system.with_energy_hook(Arc::new(move |_| energies.clone()));
        let rates = build_rate_table(&system, &bath).unwrap();
        let l = build_lindblad_all_regimes(&system, &rates).unwrap();
        let mut psi = CVec::zeros(2);
        psi[0] = c(0.6);
        psi[1] = c(0.8);
        let rho0 = pure_density(&psi);
        let times = grid(8.0, 160);
        let fixed = propagate_fixed(&l, &rho0, &times).unwrap();
        let adiabatic = propagate_adiabatic(
            &system,
            &bath,
            &GeneratorKind::LindbladAllRegimes,
            &rho0,
            &times,
        )
        .unwrap();
        for i in 0..times.len() {
            assert!(
                crate::linalg::max_abs_diff(&fixed.states[i], &adiabatic.states[i]) < 1e-9,
                "sample {i}"
            );
        }
    }

    #[test]
    fn adiabatic_rejects_frequencies_leaving_support() {
        let (system, bath) = two_level(0.1);
        let system = system.with_energy_hook(Arc::new(move |t: f64| {
            vec![0.0, 10.0 * PI + 100.0 * PI * t]
        }));
        let rho0 = pure_density(&CVec::from_vec(vec![c(0.0), c(1.0)]));
        let times = grid(3.0, 30);
        let err = propagate_adiabatic(
            &system,
            &bath,
            &GeneratorKind::LindbladAllRegimes,
            &rho0,
            &times,
        );
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn grid_and_metric_validation() {
        let (system, bath) = two_level(0.1);
        let rates = build_rate_table(&system, &bath).unwrap();
        let l = build_lindblad_all_regimes(&system, &rates).unwrap();
        let rho0 = pure_density(&CVec::from_vec(vec![c(0.0), c(1.0)]));
        assert!(propagate_fixed(&l, &rho0, &[0.0, 0.1, 0.3]).is_err());
        assert!(propagate_fixed(&l, &rho0, &[0.0]).is_err());
        let run = propagate_fixed(&l, &rho0, &grid(1.0, 10)).unwrap();
        let same = error_metric(&run, &run, &[Element::Pop(1)]).unwrap();
        assert_eq!(same.max, 0.0);
        assert_eq!(same.time_average, 0.0);
        let mut shifted = run.clone();
        for s in &mut shifted.states {
            s[(0, 0)] += c(0.01);
        }
        let m = error_metric(&shifted, &run, &[Element::Pop(0), Element::Pop(1)]).unwrap();
        assert_relative_eq!(m.max, 0.01, epsilon = 1e-12);
        assert_relative_eq!(m.time_average, 0.01, epsilon = 1e-12);
    }
}
