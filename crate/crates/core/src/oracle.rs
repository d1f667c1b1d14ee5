//! Numerically exact zero-temperature reference dynamics.
//!
//! The continuum bath is replaced by N discrete modes on a uniform
//! midpoint grid; the excitation-conserving coupling closes the dynamics
//! in the single-excitation sector, whose dimension grows only linearly
//! in N. Evolution is unitary (Lanczos), so the result is exact up to the
//! declared Krylov tolerance and the finite-grid revival horizon.

use num_complex::Complex64;

use crate::bath::{resolve_coupling, spectral_density, BathSpec};
use crate::error::{Error, Result};
use crate::linalg::{c, CMat, CVec, RMat};
use crate::operators::Element;
use crate::propagation::{check_uniform, EvolutionResult};
use crate::system::SystemSpec;

/// The simulation horizon must stay this factor below the revival time.
pub const REVIVAL_SAFETY: f64 = 3.0;

/// Largest value of (spectral halfwidth)·(substep) handed to one Krylov
/// application; with M_KRYLOV vectors the local error is ~1e-13.
const RHO_MAX: f64 = 4.0;
const M_KRYLOV: usize = 30;

/// A bath sampled as discrete modes at midpoint frequencies.
#[derive(Debug, Clone)]
pub struct DiscretizedBath {
    /// ω_k = (k − ½)·δω for k = 1..N.
    pub frequencies: Vec<f64>,
    /// Mode couplings g̃_k = g·√(J(ω_k)·δω).
    pub couplings: Vec<f64>,
    pub delta_omega: f64,
    /// The continuum bath the modes were sampled from.
    pub bath: BathSpec,
}

impl DiscretizedBath {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Time at which the discrete bath refeeds the system: 2π/δω.
    pub fn revival_time(&self) -> f64 {
        std::f64::consts::TAU / self.delta_omega
    }

    /// Σ_k g̃_k², the discrete stand-in for g²∫J dω.
    pub fn coupling_weight(&self) -> f64 {
        self.couplings.iter().map(|g| g * g).sum()
    }
}

/// Sample the bath with N midpoint modes and overall coupling scale g.
/// Pass g = 1 when the modes feed evolve_single_excitation, which applies
/// each transition's own coupling on top.
pub fn discretize_bath(bath: &BathSpec, g: f64, n: usize) -> Result<DiscretizedBath> {
    bath.validate()?;
    if bath.temperature > 0.0 {
        return Err(Error::Domain(
            "exact reference dynamics are zero-temperature only".into(),
        ));
    }
    if n == 0 {
        return Err(Error::Config("need at least one bath mode".into()));
    }
    let delta_omega = bath.cutoff() / n as f64;
    let mut frequencies = Vec::with_capacity(n);
    let mut couplings = Vec::with_capacity(n);
    for k in 1..=n {
        let omega = (k as f64 - 0.5) * delta_omega;
        frequencies.push(omega);
        couplings.push(g * (spectral_density(bath, omega)? * delta_omega).sqrt());
    }
    Ok(DiscretizedBath {
        frequencies,
        couplings,
        delta_omega,
        bath: bath.clone(),
    })
}

/// Mode count that keeps the revival time REVIVAL_SAFETY times beyond the
/// horizon, rounded up to a multiple of eight.
pub fn default_mode_count(bath: &BathSpec, horizon: f64) -> usize {
    let raw = (REVIVAL_SAFETY * bath.cutoff() * horizon / std::f64::consts::TAU).ceil() as usize;
    raw.div_ceil(8) * 8
}

/// Excitation grade of each level: transitions raise the grade by one,
/// H_extra couplings demand equal grades, and each connected component is
/// shifted so its lowest grade is zero. Errors if the constraints are
/// contradictory (the excitation count would be ill-defined).
pub fn level_grades(system: &SystemSpec) -> Result<Vec<u32>> {
    system.validate()?;
    let d = system.dim;
    // Collect equality (offset 0) and raise (offset 1) constraints.
    let mut edges: Vec<Vec<(usize, i64)>> = vec![Vec::new(); d];
    for t in &system.transitions {
        edges[t.lower].push((t.upper, 1));
        edges[t.upper].push((t.lower, -1));
    }
    let mut extra_pattern = system.h_extra_at(0.0);
    if system.is_time_dependent() {
        // Union of sparsity patterns over a few probe times, so couplings
        // that switch on later still constrain the grading.
        for t in [0.37, 1.0, 2.5, 7.0] {
            let h = system.h_extra_at(t);
            if h.nrows() == extra_pattern.nrows() {
                extra_pattern += h.map(|z| c(z.norm()));
            }
        }
    }
    for i in 0..d {
        for j in (i + 1)..d {
            if extra_pattern[(i, j)].norm() > 1e-14 {
                edges[i].push((j, 0));
                edges[j].push((i, 0));
            }
        }
    }
    let mut grade = vec![i64::MIN; d];
    for start in 0..d {
        if grade[start] != i64::MIN {
            continue;
        }
        grade[start] = 0;
        let mut queue = std::collections::VecDeque::from([start]);
        let mut component = vec![start];
        while let Some(u) = queue.pop_front() {
            for &(v, off) in &edges[u] {
                let expect = grade[u] + off;
                if grade[v] == i64::MIN {
                    grade[v] = expect;
                    component.push(v);
                    queue.push_back(v);
                } else if grade[v] != expect {
                    return Err(Error::Sector(format!(
                        "levels {u} and {v} get contradictory excitation grades"
                    )));
                }
            }
        }
        let min = component.iter().map(|&v| grade[v]).min().unwrap();
        for v in component {
            grade[v] -= min;
        }
    }
    Ok(grade.into_iter().map(|g| g as u32).collect())
}

/// Index maps between system levels and sector slots.
struct Sector {
    grades: Vec<u32>,
    /// Levels of grade one, in level order; they carry the excitation.
    excited: Vec<usize>,
    /// Levels of grade zero; each pairs with every bath mode.
    ground: Vec<usize>,
    /// Contributing transitions as (excited slot, ground slot, coupling
    /// phasor g_j e^{iφ_j}).
    links: Vec<(usize, usize, Complex64)>,
}

fn sector_structure(system: &SystemSpec, bath: &BathSpec) -> Result<Sector> {
    let grades = level_grades(system)?;
    let excited: Vec<usize> = (0..system.dim).filter(|&n| grades[n] == 1).collect();
    let ground: Vec<usize> = (0..system.dim).filter(|&n| grades[n] == 0).collect();
    let mut slot1 = vec![usize::MAX; system.dim];
    for (i, &n) in excited.iter().enumerate() {
        slot1[n] = i;
    }
    let mut slot0 = vec![usize::MAX; system.dim];
    for (i, &n) in ground.iter().enumerate() {
        slot0[n] = i;
    }
    let mut links = Vec::new();
    for (j, t) in system.transitions.iter().enumerate() {
        if grades[t.upper] == 1 && grades[t.lower] == 0 {
            let omega = system.transition_frequency(j, &system.energies);
            let g = resolve_coupling(bath, t.coupling, omega)?;
            let phasor = c(g) * Complex64::new(0.0, t.phase).exp();
            links.push((slot1[t.upper], slot0[t.lower], phasor));
        }
        // Transitions touching higher grades act as zero on the sector.
    }
    Ok(Sector {
        grades,
        excited,
        ground,
        links,
    })
}

/// Hamiltonian snapshot on the sector basis
/// {|excited_i, vac⟩} ∪ {|ground_m, 1_k⟩}, laid out as a-amplitudes first
/// and then β in mode-major blocks per ground level.
struct SectorH<'a> {
    h11: CMat,
    h00: CMat,
    links: &'a [(usize, usize, Complex64)],
    modes: &'a DiscretizedBath,
}

impl SectorH<'_> {
    fn apply(&self, x: &CVec) -> CVec {
        let n1 = self.h11.nrows();
        let n0 = self.h00.nrows();
        let nm = self.modes.len();
        let mut y = CVec::zeros(x.len());
        // System blocks.
        for i in 0..n1 {
            let mut acc = Complex64::default();
            for i2 in 0..n1 {
                acc += self.h11[(i, i2)] * x[i2];
            }
            y[i] = acc;
        }
        for m in 0..n0 {
            for m2 in 0..n0 {
                let h = self.h00[(m, m2)];
                if h == Complex64::default() && m != m2 {
                    continue;
                }
                let src = n1 + m2 * nm;
                let dst = n1 + m * nm;
                for k in 0..nm {
                    y[dst + k] += h * x[src + k];
                }
            }
        }
        // Bath mode energies.
        for m in 0..n0 {
            let base = n1 + m * nm;
            for k in 0..nm {
                y[base + k] += c(self.modes.frequencies[k]) * x[base + k];
            }
        }
        // Excitation exchange: a_u ← ḡ_j Σ_k g̃_k β_{l k};  β_{l k} ← g_j g̃_k a_u.
        for &(u, l, phasor) in self.links {
            let base = n1 + l * nm;
            let mut acc = Complex64::default();
            for k in 0..nm {
                acc += c(self.modes.couplings[k]) * x[base + k];
            }
            y[u] += phasor.conj() * acc;
            let au = x[u];
            for k in 0..nm {
                y[base + k] += phasor * c(self.modes.couplings[k]) * au;
            }
        }
        y
    }

    /// Bound on the spectral halfwidth from the diagonal range plus the
    /// off-diagonal norms.
    fn halfwidth(&self) -> f64 {
        let n1 = self.h11.nrows();
        let n0 = self.h00.nrows();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n1 {
            lo = lo.min(self.h11[(i, i)].re);
            hi = hi.max(self.h11[(i, i)].re);
        }
        let (nu_min, nu_max) = (
            self.modes.frequencies.first().copied().unwrap_or(0.0),
            self.modes.frequencies.last().copied().unwrap_or(0.0),
        );
        for m in 0..n0 {
            lo = lo.min(self.h00[(m, m)].re + nu_min);
            hi = hi.max(self.h00[(m, m)].re + nu_max);
        }
        let mut margin: f64 = 0.0;
        for row in 0..n1 {
            let mut s = 0.0;
            for col in 0..n1 {
                if row != col {
                    s += self.h11[(row, col)].norm();
                }
            }
            margin = margin.max(s);
        }
        for row in 0..n0 {
            let mut s = 0.0;
            for col in 0..n0 {
                if row != col {
                    s += self.h00[(row, col)].norm();
                }
            }
            margin = margin.max(s);
        }
        let couple: f64 = self.modes.coupling_weight().sqrt();
        let link: f64 = self.links.iter().map(|l| l.2.norm()).sum();
        margin += couple * link;
        0.5 * (hi - lo) + margin
    }
}

fn build_snapshot<'a>(
    system: &SystemSpec,
    sector: &'a Sector,
    modes: &'a DiscretizedBath,
    t: f64,
) -> SectorH<'a> {
    let energies = system.energies_at(t);
    let extra = system.h_extra_at(t);
    let n1 = sector.excited.len();
    let n0 = sector.ground.len();
    let mut h11 = CMat::zeros(n1, n1);
    for (i, &n) in sector.excited.iter().enumerate() {
        h11[(i, i)] = c(energies[n]);
        for (i2, &n2) in sector.excited.iter().enumerate() {
            if i != i2 {
                h11[(i, i2)] = extra[(n, n2)];
            } else {
                h11[(i, i)] += extra[(n, n)];
            }
        }
    }
    let mut h00 = CMat::zeros(n0, n0);
    for (m, &n) in sector.ground.iter().enumerate() {
        h00[(m, m)] = c(energies[n]);
        for (m2, &n2) in sector.ground.iter().enumerate() {
            if m != m2 {
                h00[(m, m2)] = extra[(n, n2)];
            } else {
                h00[(m, m)] += extra[(n, n)];
            }
        }
    }
    SectorH {
        h11,
        h00,
        links: &sector.links,
        modes,
    }
}

/// One Krylov application of exp(−iH·dt) to v; assumes the caller sized
/// dt so the halfwidth·dt product is small.
fn krylov_exp(h: &SectorH, v: &CVec, dt: f64) -> CVec {
    let beta0 = v.norm();
    if beta0 == 0.0 {
        return v.clone();
    }
    let mut basis: Vec<CVec> = vec![v.map(|z| z / beta0)];
    let mut alphas: Vec<f64> = Vec::with_capacity(M_KRYLOV);
    let mut betas: Vec<f64> = Vec::new();
    for j in 0..M_KRYLOV {
        let mut w = h.apply(&basis[j]);
        let alpha = basis[j].dotc(&w).re;
        alphas.push(alpha);
        w -= basis[j].map(|z| z * alpha);
        if j > 0 {
            let b = betas[j - 1];
            w -= basis[j - 1].map(|z| z * b);
        }
        // Full reorthogonalization keeps the basis clean at this size.
        for u in &basis {
            let overlap = u.dotc(&w);
            w -= u.map(|z| z * overlap);
        }
        let beta = w.norm();
        if beta < 1e-12 || j + 1 == M_KRYLOV {
            break;
        }
        betas.push(beta);
        basis.push(w.map(|z| z / beta));
    }
    let k = alphas.len();
    let mut t = RMat::zeros(k, k);
    for (i, a) in alphas.iter().enumerate() {
        t[(i, i)] = *a;
    }
    for (i, b) in betas.iter().enumerate() {
        t[(i, i + 1)] = *b;
        t[(i + 1, i)] = *b;
    }
    let eig = t.symmetric_eigen();
    // y = Q exp(−iΛdt) Qᵀ e₁ · β₀
    let mut y = vec![Complex64::default(); k];
    for l in 0..k {
        let phase = (Complex64::new(0.0, -eig.eigenvalues[l] * dt)).exp();
        let w0 = eig.eigenvectors[(0, l)];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += phase * (eig.eigenvectors[(i, l)] * w0 * beta0);
        }
    }
    let mut out = CVec::zeros(v.len());
    for (i, vec) in basis.iter().enumerate() {
        out += vec.map(|z| z * y[i]);
    }
    out
}

fn reduced_density(system: &SystemSpec, sector: &Sector, state: &CVec, nm: usize) -> CMat {
    let d = system.dim;
    let n1 = sector.excited.len();
    let mut rho = CMat::zeros(d, d);
    for (i, &n) in sector.excited.iter().enumerate() {
        for (i2, &n2) in sector.excited.iter().enumerate() {
            rho[(n, n2)] = state[i] * state[i2].conj();
        }
    }
    for (m, &n) in sector.ground.iter().enumerate() {
        for (m2, &n2) in sector.ground.iter().enumerate() {
            let mut acc = Complex64::default();
            let (b1, b2) = (n1 + m * nm, n1 + m2 * nm);
            for k in 0..nm {
                acc += state[b1 + k] * state[b2 + k].conj();
            }
            rho[(n, n2)] = acc;
        }
    }
    rho
}

/// Evolve an initial system excitation exactly against the discretized
/// bath and return the reduced density matrix on the sample grid.
///
/// The initial state must live on grade-one levels; the horizon must stay
/// a REVIVAL_SAFETY factor under the revival time. Build `modes` with
/// g = 1: each transition's own (resolved) coupling scales the exchange.
pub fn evolve_single_excitation(
    system: &SystemSpec,
    modes: &DiscretizedBath,
    psi0: &CVec,
    times: &[f64],
) -> Result<EvolutionResult> {
    if psi0.len() != system.dim {
        return Err(Error::DimensionMismatch(format!(
            "initial state has dimension {} but the system {}",
            psi0.len(),
            system.dim
        )));
    }
    let spacing = check_uniform(times)?;
    let horizon = times[times.len() - 1] - times[0];
    let revival = modes.revival_time();
    if horizon * REVIVAL_SAFETY > revival {
        return Err(Error::Revival {
            horizon,
            revival,
            safety: REVIVAL_SAFETY,
        });
    }
    let sector = sector_structure(system, &modes.bath)?;
    for n in 0..system.dim {
        if sector.grades[n] != 1 && psi0[n].norm() > 1e-12 {
            return Err(Error::Sector(format!(
                "initial amplitude on level {n} (grade {}) is outside the single-excitation sector",
                sector.grades[n]
            )));
        }
    }
    let norm = psi0.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "initial state norm is {norm}, expected 1"
        )));
    }
    let nm = modes.len();
    let n1 = sector.excited.len();
    let dim = n1 + sector.ground.len() * nm;
    let mut state = CVec::zeros(dim);
    for (i, &n) in sector.excited.iter().enumerate() {
        state[i] = psi0[n];
    }
    let time_dependent = system.is_time_dependent();
    let mut snapshot = build_snapshot(system, &sector, modes, times[0]);
    let mut states = Vec::with_capacity(times.len());
    let mut min_eigs = Vec::with_capacity(times.len());
    let mut traces = Vec::with_capacity(times.len());
    let record =
        |state: &CVec, states: &mut Vec<CMat>, min_eigs: &mut Vec<f64>, traces: &mut Vec<f64>| {
            let rho = reduced_density(system, &sector, state, nm);
            min_eigs.push(crate::linalg::min_eigenvalue_hermitian(&rho));
            traces.push(rho.trace().re);
            states.push(rho);
        };
    record(&state, &mut states, &mut min_eigs, &mut traces);
    for w in times.windows(2) {
        let halfwidth = snapshot.halfwidth().max(1e-12);
        let n_sub = ((spacing * halfwidth / RHO_MAX).ceil() as usize).max(1);
        let dt = spacing / n_sub as f64;
        for s in 0..n_sub {
            if time_dependent {
                let midpoint = w[0] + (s as f64 + 0.5) * dt;
                snapshot = build_snapshot(system, &sector, modes, midpoint);
            }
            state = krylov_exp(&snapshot, &state, dt);
        }
        record(&state, &mut states, &mut min_eigs, &mut traces);
    }
    Ok(EvolutionResult {
        times: times.to_vec(),
        states,
        min_eigs,
        traces,
    })
}

/// Exact reference evolution with the mode count chosen automatically
/// from the horizon (override with `n_modes`).
pub fn exact_reference(
    system: &SystemSpec,
    bath: &BathSpec,
    psi0: &CVec,
    times: &[f64],
    n_modes: Option<usize>,
) -> Result<EvolutionResult> {
    let spacing = check_uniform(times)?;
    let horizon = spacing * (times.len() - 1) as f64;
    let n = n_modes.unwrap_or_else(|| default_mode_count(bath, horizon));
    let modes = discretize_bath(bath, 1.0, n)?;
    evolve_single_excitation(system, &modes, psi0, times)
}

/// Populations and pairwise coherences of the grade-one levels plus the
/// grade-zero populations: the elements an exact run determines.
pub fn sector_elements(system: &SystemSpec) -> Result<Vec<Element>> {
    let grades = level_grades(system)?;
    let mut elements = Vec::new();
    for n in 0..system.dim {
        if grades[n] <= 1 {
            elements.push(Element::Pop(n));
        }
    }
    let excited: Vec<usize> = (0..system.dim).filter(|&n| grades[n] == 1).collect();
    for (a, &i) in excited.iter().enumerate() {
        for &j in excited.iter().skip(a + 1) {
            elements.push(Element::ReCoh(i, j));
            elements.push(Element::ImCoh(i, j));
        }
    }
    Ok(elements)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{build_rate_table, BathSpec, Spectrum};
    use crate::generators::build_lindblad_all_regimes;
    use crate::operators::pure_density;
    use crate::propagation::{error_metric, propagate_fixed};
    use crate::system::{Coupling, Transition};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ohmic() -> BathSpec {
        BathSpec::zero_temperature(Spectrum::Ohmic { cutoff: 80.0 * PI }).unwrap()
    }

    fn grid(t_max: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| t_max * i as f64 / n as f64).collect()
    }

    #[test]
    fn single_flat_mode() {
        let bath = BathSpec::zero_temperature(Spectrum::Flat {
            j0: 0.3,
            cutoff: 2.0,
        })
        .unwrap();
        let modes = discretize_bath(&bath, 0.5, 1).unwrap();
        assert_eq!(modes.len(), 1);
        assert_relative_eq!(modes.frequencies[0], 1.0);
        assert_relative_eq!(
            modes.couplings[0] * modes.couplings[0],
            0.25 * 0.3 * 2.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn midpoint_rule_is_exact_for_linear_density() {
        // Σ g̃² = g²∫J dω = g²/2 for J = ω/Ω², exactly at any N.
        for n in [3, 40, 1000] {
            let modes = discretize_bath(&ohmic(), 2.0, n).unwrap();
            assert_relative_eq!(modes.coupling_weight(), 2.0, max_relative = 1e-12);
        }
        assert!(discretize_bath(&ohmic(), 1.0, 0).is_err());
        let warm = BathSpec::new(Spectrum::Ohmic { cutoff: 1.0 }, 0.5).unwrap();
        assert!(discretize_bath(&warm, 1.0, 4).is_err());
    }

    #[test]
    fn revival_accounting() {
        let modes = discretize_bath(&ohmic(), 1.0, 4000).unwrap();
        assert_relative_eq!(modes.revival_time(), 100.0, max_relative = 1e-12);
        assert_eq!(default_mode_count(&ohmic(), 30.0), 3600);
        let system = SystemSpec::new(
            vec![0.0, 10.0 * PI],
            vec![Transition::new(0, 1, Coupling::TargetGamma(0.1))],
        )
        .unwrap();
        let psi0 = CVec::from_vec(vec![c(0.0), c(1.0)]);
        let err = evolve_single_excitation(&system, &modes, &psi0, &grid(34.0, 10));
        assert!(matches!(err, Err(Error::Revival { .. })));
    }

    #[test]
    fn grading_examples() {
        let two = SystemSpec::new(
            vec![0.0, 1.0],
            vec![Transition::new(0, 1, Coupling::Amplitude(0.1))],
        )
        .unwrap();
        assert_eq!(level_grades(&two).unwrap(), vec![0, 1]);
        let v = SystemSpec::new(
            vec![0.0, 3.0, 3.1],
            vec![
                Transition::new(0, 1, Coupling::Amplitude(0.1)),
                Transition::new(0, 2, Coupling::Amplitude(0.1)),
            ],
        )
        .unwrap();
        assert_eq!(level_grades(&v).unwrap(), vec![0, 1, 1]);
        // Two qubits: |00⟩, |01⟩, |10⟩, |11⟩ with four transitions.
        let qq = SystemSpec::new(
            vec![0.0, 3.0, 3.2, 6.2],
            vec![
                Transition::new(0, 1, Coupling::Amplitude(0.1)),
                Transition::new(0, 2, Coupling::Amplitude(0.1)),
                Transition::new(1, 3, Coupling::Amplitude(0.1)),
                Transition::new(2, 3, Coupling::Amplitude(0.1)),
            ],
        )
        .unwrap();
        assert_eq!(level_grades(&qq).unwrap(), vec![0, 1, 1, 2]);
        // Ladder with a rung-skipping transition: contradictory grades.
        let bad = SystemSpec::new(
            vec![0.0, 1.0, 2.0],
            vec![
                Transition::new(0, 1, Coupling::Amplitude(0.1)),
                Transition::new(1, 2, Coupling::Amplitude(0.1)),
                Transition::new(0, 2, Coupling::Amplitude(0.1)),
            ],
        )
        .unwrap();
        assert!(matches!(level_grades(&bad), Err(Error::Sector(_))));
    }

    #[test]
    fn rejects_initial_state_outside_sector() {
        let system = SystemSpec::new(
            vec![0.0, 10.0 * PI],
            vec![Transition::new(0, 1, Coupling::TargetGamma(0.1))],
        )
        .unwrap();
        let modes = discretize_bath(&ohmic(), 1.0, 400).unwrap();
        let psi0 = CVec::from_vec(vec![c(1.0), c(0.0)]);
        assert!(matches!(
            evolve_single_excitation(&system, &modes, &psi0, &grid(1.0, 4)),
            Err(Error::Sector(_))
        ));
    }

    #[test]
    fn zero_coupling_leaves_amplitudes_constant() {
        let system = SystemSpec::new(
            vec![0.0, 3.0, 3.5],
            vec![
                Transition::new(0, 1, Coupling::Amplitude(0.0)),
                Transition::new(0, 2, Coupling::Amplitude(0.0)),
            ],
        )
        .unwrap();
        let modes = discretize_bath(&ohmic(), 1.0, 800).unwrap();
        let s = 1.0 / 2.0_f64.sqrt();
        let psi0 = CVec::from_vec(vec![c(0.0), c(s), c(s)]);
        let run = evolve_single_excitation(&system, &modes, &psi0, &grid(2.0, 20)).unwrap();
        for (i, state) in run.states.iter().enumerate() {
            assert_relative_eq!(state[(1, 1)].re, 0.5, epsilon = 1e-10);
            assert_relative_eq!(state[(2, 2)].re, 0.5, epsilon = 1e-10);
            assert_relative_eq!(state[(1, 2)].norm(), 0.5, epsilon = 1e-10);
            assert!((run.traces[i] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn two_level_decay_matches_golden_rule() {
        let gamma = 0.1;
        let system = SystemSpec::new(
            vec![0.0, 10.0 * PI],
            vec![Transition::new(0, 1, Coupling::TargetGamma(gamma))],
        )
        .unwrap();
        let modes = discretize_bath(&ohmic(), 1.0, 4000).unwrap();
        let psi0 = CVec::from_vec(vec![c(0.0), c(1.0)]);
        let times = grid(30.0, 120);
        let run = evolve_single_excitation(&system, &modes, &psi0, &times).unwrap();
        for (i, t) in times.iter().enumerate() {
            let pop = run.states[i][(1, 1)].re;
            assert!(
                (pop - (-gamma * t).exp()).abs() < 2e-3,
                "t = {t}: {pop} vs {}",
                (-gamma * t).exp()
            );
            assert!(run.min_eigs[i] > -1e-10);
            assert!((run.traces[i] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn convergence_in_mode_count() {
        let system = SystemSpec::new(
            vec![0.0, 10.0 * PI],
            vec![Transition::new(0, 1, Coupling::TargetGamma(0.1))],
        )
        .unwrap();
        let psi0 = CVec::from_vec(vec![c(0.0), c(1.0)]);
        let times = grid(15.0, 30);
        let coarse = discretize_bath(&ohmic(), 1.0, 1800).unwrap();
        let fine = discretize_bath(&ohmic(), 1.0, 3600).unwrap();
        let a = evolve_single_excitation(&system, &coarse, &psi0, &times).unwrap();
        let b = evolve_single_excitation(&system, &fine, &psi0, &times).unwrap();
        let m = error_metric(&a, &b, &[Element::Pop(0), Element::Pop(1)]).unwrap();
        assert!(m.max < 5e-4, "doubling N moved populations by {}", m.max);
    }

    #[test]
    fn dark_superposition_stays_excited() {
        // Unequal rates: the dark direction weights the couplings
        // crosswise, (g₂|1⟩ − g₁|2⟩)/√(g₁²+g₂²).
        let system = SystemSpec::new(
            vec![0.0, 3.0 * PI, 3.0 * PI],
            vec![
                Transition::new(0, 1, Coupling::TargetGamma(0.1)),
                Transition::new(0, 2, Coupling::TargetGamma(0.05)),
            ],
        )
        .unwrap();
        let bath = ohmic();
        let rates = build_rate_table(&system, &bath).unwrap();
        let (g1, g2) = (rates.rows[0].coupling, rates.rows[1].coupling);
        let norm = (g1 * g1 + g2 * g2).sqrt();
        let psi0 = CVec::from_vec(vec![c(0.0), c(g2 / norm), c(-g1 / norm)]);
        let modes = discretize_bath(&bath, 1.0, 2400).unwrap();
        let times = grid(20.0, 40);
        let run = evolve_single_excitation(&system, &modes, &psi0, &times).unwrap();
        let excited: Vec<f64> = run
            .states
            .iter()
            .map(|s| s[(1, 1)].re + s[(2, 2)].re)
            .collect();
        let loss = 1.0 - excited.last().unwrap();
        assert!(loss.abs() < 1e-3, "dark state lost {loss}");
    }

    #[test]
    fn matches_master_equation_with_phases() {
        // Cross-check the exchange phase convention end to end: a V system
        // with a nonzero coupling phase must agree with the all-regimes
        // solution in the weak-coupling regime.
        let system = SystemSpec::new(
            vec![0.0, 10.0 * PI, 10.0 * PI + 0.3],
            vec![
                Transition::new(0, 1, Coupling::TargetGamma(0.1)),
                Transition::new(0, 2, Coupling::TargetGamma(0.05)).with_phase(0.9),
            ],
        )
        .unwrap();
        let bath = ohmic();
        let s = 1.0 / 2.0_f64.sqrt();
        let psi0 = CVec::from_vec(vec![c(0.0), c(s), c(s)]);
        let times = grid(15.0, 60);
        let modes = discretize_bath(&bath, 1.0, 1800).unwrap();
        let exact = evolve_single_excitation(&system, &modes, &psi0, &times).unwrap();
        let rates = build_rate_table(&system, &bath).unwrap();
        let l = build_lindblad_all_regimes(&system, &rates).unwrap();
        let me = propagate_fixed(&l, &pure_density(&psi0), &times).unwrap();
        let elements = sector_elements(&system).unwrap();
        let m = error_metric(&me, &exact, &elements).unwrap();
        assert!(
            m.time_average < 2e-3,
            "master equation vs exact: {}",
            m.time_average
        );
    }
}
