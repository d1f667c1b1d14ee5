//! Master-equation generators built from a system and its rate table.
//!
//! All five families share one assembly: complex pair-weight matrices for
//! the lowering (emission) and raising (absorption) channels, turned into
//! a superoperator. The families differ only in how cross-transition
//! weights are formed (per-column rates, geometric means, or masks).

use num_complex::Complex64;

use crate::bath::RateTable;
use crate::error::{Error, Result};
use crate::linalg::{c, CMat, ONE};
use crate::operators::{commutator_superop, sandwich_superop, Superoperator};
use crate::system::SystemSpec;

/// Master-equation family selector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeneratorKind {
    /// Lindblad-form generator with geometric-mean cross weights; valid
    /// for any detuning pattern.
    LindbladAllRegimes,
    /// Full non-secular generator with per-column rates; not guaranteed
    /// completely positive.
    BlochRedfield,
    /// All rates evaluated at one anchor frequency; expects a rate table
    /// built with an anchor.
    Degenerate,
    /// Per-transition dissipators only; all cross terms dropped.
    NonDegenerate,
    /// Cross terms kept inside clusters, dropped across them. The vector
    /// assigns a cluster label to each transition; an empty vector asks
    /// the builder to cluster with [`DEFAULT_CLUSTER_THRESHOLD`].
    PartialSecular { clusters: Vec<usize> },
}

/// Default multiplier for cluster_transitions: cross terms oscillating
/// twenty times faster than they act are dropped.
pub const DEFAULT_CLUSTER_THRESHOLD: f64 = 20.0;

/// Collective jump/shift operators of the all-regimes equation.
#[derive(Debug, Clone)]
pub enum CollectiveOps {
    /// T = 0: decay operator Σ and shift operator D.
    ZeroTemperature { sigma: CMat, d: CMat },
    /// T > 0: decay Θ, absorption Υ, and the shift pair B, C.
    Thermal {
        theta: CMat,
        upsilon: CMat,
        b: CMat,
        c: CMat,
    },
}

fn check_alignment(system: &SystemSpec, rates: &RateTable) -> Result<()> {
    if system.transitions.len() != rates.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} transitions but {} rate rows",
            system.transitions.len(),
            rates.len()
        )));
    }
    Ok(())
}

fn sqrt_checked(value: f64, what: &str) -> Result<f64> {
    if value < 0.0 {
        return Err(Error::Domain(format!(
            "negative radicand {value:e} in {what}; the collective form does not exist here"
        )));
    }
    Ok(value.sqrt())
}

fn phase_factor(phi: f64) -> Complex64 {
    Complex64::new(0.0, phi).exp()
}

fn weighted_lowering_sum<F: Fn(usize) -> Complex64>(system: &SystemSpec, w: F) -> CMat {
    let mut out = CMat::zeros(system.dim, system.dim);
    for j in 0..system.transitions.len() {
        out += system.sigma(j).map(|z| z * w(j));
    }
    out
}

/// The collective operators entering the all-regimes equation. Errors if
/// any required radicand (a level shift or thermal shift) is negative; the
/// pairwise builders below stay defined in that case.
pub fn collective_ops(system: &SystemSpec, rates: &RateTable) -> Result<CollectiveOps> {
    check_alignment(system, rates)?;
    if !rates.is_thermal() {
        let mut sig = Vec::with_capacity(rates.len());
        let mut shift = Vec::with_capacity(rates.len());
        for row in &rates.rows {
            sig.push(sqrt_checked(row.gamma, "decay operator")? * phase_factor(row.phase));
            shift.push(sqrt_checked(row.lamb, "shift operator")? * phase_factor(row.phase));
        }
        Ok(CollectiveOps::ZeroTemperature {
            sigma: weighted_lowering_sum(system, |j| sig[j]),
            d: weighted_lowering_sum(system, |j| shift[j]),
        })
    } else {
        let mut th = Vec::with_capacity(rates.len());
        let mut up = Vec::with_capacity(rates.len());
        let mut bb = Vec::with_capacity(rates.len());
        let mut cc = Vec::with_capacity(rates.len());
        for row in &rates.rows {
            let n = row.occupation;
            th.push(sqrt_checked(row.gamma * (1.0 + n), "decay operator")? * phase_factor(row.phase));
            up.push(sqrt_checked(row.gamma * n, "absorption operator")? * phase_factor(-row.phase));
            bb.push(
                sqrt_checked(row.lamb + row.thermal_lamb, "shift operator")?
                    * phase_factor(row.phase),
            );
            cc.push(sqrt_checked(row.thermal_lamb, "thermal shift operator")? * phase_factor(row.phase));
        }
        let upsilon = weighted_lowering_sum(system, |j| up[j].conj()).adjoint();
        // adjoint() conjugates the weights, so feed conjugates above.
        Ok(CollectiveOps::Thermal {
            theta: weighted_lowering_sum(system, |j| th[j]),
            upsilon,
            b: weighted_lowering_sum(system, |j| bb[j]),
            c: weighted_lowering_sum(system, |j| cc[j]),
        })
    }
}

/// Geometric mean carrying the sign of the sum; diagonal-preserving
/// (m(a, a) = a) and zero when the inputs cancel.
fn signed_mean(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s == 0.0 {
        0.0
    } else {
        s.signum() * (a * b).abs().sqrt()
    }
}

/// The shift Hamiltonian of the all-regimes equation, extended to shifts
/// of either sign through signed geometric means on the per-coupling
/// data. For non-negative shifts this is exactly −(B†B − CC†).
pub fn lamb_hamiltonian(system: &SystemSpec, rates: &RateTable) -> Result<CMat> {
    check_alignment(system, rates)?;
    let n = rates.len();
    let mut h = CMat::zeros(system.dim, system.dim);
    let sigmas: Vec<CMat> = (0..n).map(|j| system.sigma(j)).collect();
    for j in 0..n {
        let rj = &rates.rows[j];
        for k in 0..n {
            let rk = &rates.rows[k];
            let gg = rj.coupling * rk.coupling;
            let down = gg
                * signed_mean(
                    rj.i_coeff() + rj.thermal_i_coeff(),
                    rk.i_coeff() + rk.thermal_i_coeff(),
                );
            let up = gg * signed_mean(rj.thermal_i_coeff(), rk.thermal_i_coeff());
            let sj_dag = sigmas[j].adjoint();
            if down != 0.0 {
                h += (&sj_dag * &sigmas[k]).map(|z| z * (-down * phase_factor(rk.phase - rj.phase)));
            }
            if up != 0.0 {
                h += (&sigmas[j] * sigmas[k].adjoint())
                    .map(|z| z * (up * phase_factor(rj.phase - rk.phase)));
            }
        }
    }
    Ok(h)
}

/// Complex pair weights for the lowering and raising channels. Entry
/// (j, k) weighs the operator pair (σ_j, σ_k); couplings and phases are
/// folded in.
struct PairWeights {
    down: CMat,
    up: CMat,
}

fn coupling_phasor(rates: &RateTable, j: usize) -> Complex64 {
    c(rates.rows[j].coupling) * phase_factor(rates.rows[j].phase)
}

/// Non-secular weights: the column transition's rates apply unchanged.
fn redfield_weights(rates: &RateTable) -> PairWeights {
    let n = rates.len();
    let mut down = CMat::zeros(n, n);
    let mut up = CMat::zeros(n, n);
    for j in 0..n {
        let gj = coupling_phasor(rates, j);
        for k in 0..n {
            let rk = &rates.rows[k];
            let gk = coupling_phasor(rates, k);
            let lam_down = Complex64::new(
                rk.r_coeff() * (1.0 + rk.occupation),
                -(rk.i_coeff() + rk.thermal_i_coeff()),
            );
            let lam_up = Complex64::new(rk.r_coeff() * rk.occupation, rk.thermal_i_coeff());
            down[(j, k)] = gj.conj() * gk * lam_down;
            up[(j, k)] = gj * gk.conj() * lam_up;
        }
    }
    PairWeights { down, up }
}

/// All-regimes weights: cross terms take geometric means of the two
/// transitions' rates, which symmetrizes the generator into Lindblad form.
fn all_regimes_weights(rates: &RateTable) -> PairWeights {
    let n = rates.len();
    let mut down = CMat::zeros(n, n);
    let mut up = CMat::zeros(n, n);
    for j in 0..n {
        let rj = &rates.rows[j];
        let gj = coupling_phasor(rates, j);
        for k in 0..n {
            let rk = &rates.rows[k];
            let gk = coupling_phasor(rates, k);
            let re_down =
                (rj.r_coeff() * (1.0 + rj.occupation) * rk.r_coeff() * (1.0 + rk.occupation))
                    .sqrt();
            let im_down = signed_mean(
                rj.i_coeff() + rj.thermal_i_coeff(),
                rk.i_coeff() + rk.thermal_i_coeff(),
            );
            let re_up = (rj.r_coeff() * rj.occupation * rk.r_coeff() * rk.occupation).sqrt();
            let im_up = signed_mean(rj.thermal_i_coeff(), rk.thermal_i_coeff());
            down[(j, k)] = gj.conj() * gk * Complex64::new(re_down, -im_down);
            up[(j, k)] = gj * gk.conj() * Complex64::new(re_up, im_up);
        }
    }
    PairWeights { down, up }
}

fn mask_weights<F: Fn(usize, usize) -> bool>(mut w: PairWeights, keep: F) -> PairWeights {
    let n = w.down.nrows();
    for j in 0..n {
        for k in 0..n {
            if !keep(j, k) {
                w.down[(j, k)] = Complex64::default();
                w.up[(j, k)] = Complex64::default();
            }
        }
    }
    w
}

/// Assemble the dissipative superoperator from pair weights:
///   Σ_{jk} (W↓_{jk} + W̄↓_{kj}) σ_k ρ σ_j† − M↓ρ − ρM↓†   (lowering)
/// + Σ_{jk} (W↑_{jk} + W̄↑_{kj}) σ_k† ρ σ_j − M↑ρ − ρM↑†   (raising)
/// with M↓ = Σ W↓_{jk} σ_j†σ_k and M↑ = Σ W↑_{jk} σ_jσ_k†.
fn dissipative_superop(system: &SystemSpec, w: &PairWeights) -> Superoperator {
    let d = system.dim;
    let n = w.down.nrows();
    let sigmas: Vec<CMat> = (0..n).map(|j| system.sigma(j)).collect();
    let daggers: Vec<CMat> = sigmas.iter().map(|s| s.adjoint()).collect();
    let mut total = Superoperator::zeros(d);
    let mut m_down = CMat::zeros(d, d);
    let mut m_up = CMat::zeros(d, d);
    for j in 0..n {
        for k in 0..n {
            let wd = w.down[(j, k)];
            let wu = w.up[(j, k)];
            if wd != Complex64::default() || w.down[(k, j)] != Complex64::default() {
                let coeff = wd + w.down[(k, j)].conj();
                total.add_assign(&sandwich_superop(&sigmas[k], &daggers[j]).scaled(coeff));
            }
            if wu != Complex64::default() || w.up[(k, j)] != Complex64::default() {
                let coeff = wu + w.up[(k, j)].conj();
                total.add_assign(&sandwich_superop(&daggers[k], &sigmas[j]).scaled(coeff));
            }
            if wd != Complex64::default() {
                m_down += (&daggers[j] * &sigmas[k]).map(|z| z * wd);
            }
            if wu != Complex64::default() {
                m_up += (&sigmas[j] * &daggers[k]).map(|z| z * wu);
            }
        }
    }
    let id = CMat::identity(d, d);
    let m = m_down + m_up;
    total.add_assign(&sandwich_superop(&m, &id).scaled(-ONE));
    total.add_assign(&sandwich_superop(&id, &m.adjoint()).scaled(-ONE));
    total
}

fn assemble(system: &SystemSpec, w: &PairWeights) -> Result<Superoperator> {
    let mut l = commutator_superop(&system.hamiltonian())?;
    l.add_assign(&dissipative_superop(system, w));
    Ok(l)
}

/// Lindblad-form generator valid in all detuning regimes.
pub fn build_lindblad_all_regimes(system: &SystemSpec, rates: &RateTable) -> Result<Superoperator> {
    check_alignment(system, rates)?;
    assemble(system, &all_regimes_weights(rates))
}

/// Full non-secular generator.
pub fn build_bloch_redfield(system: &SystemSpec, rates: &RateTable) -> Result<Superoperator> {
    check_alignment(system, rates)?;
    assemble(system, &redfield_weights(rates))
}

/// Generator with all spectral data taken at one anchor frequency; pass a
/// rate table built with that anchor. Equals the non-secular generator
/// when the transitions are exactly degenerate.
pub fn build_degenerate(system: &SystemSpec, rates: &RateTable) -> Result<Superoperator> {
    check_alignment(system, rates)?;
    assemble(system, &all_regimes_weights(rates))
}

/// Per-transition generator: every cross term dropped.
pub fn build_nondegenerate(system: &SystemSpec, rates: &RateTable) -> Result<Superoperator> {
    check_alignment(system, rates)?;
    let w = mask_weights(all_regimes_weights(rates), |j, k| j == k);
    assemble(system, &w)
}

/// Cross terms kept within clusters only. With one cluster this is the
/// all-regimes generator; with all singletons the per-transition one.
pub fn build_partial_secular(
    system: &SystemSpec,
    rates: &RateTable,
    clusters: &[usize],
) -> Result<Superoperator> {
    check_alignment(system, rates)?;
    if clusters.len() != rates.len() {
        return Err(Error::Config(format!(
            "cluster assignment has {} labels for {} transitions",
            clusters.len(),
            rates.len()
        )));
    }
    let w = mask_weights(all_regimes_weights(rates), |j, k| {
        clusters[j] == clusters[k]
    });
    assemble(system, &w)
}

/// Dispatch on the family selector.
pub fn build_generator(
    system: &SystemSpec,
    rates: &RateTable,
    kind: &GeneratorKind,
) -> Result<Superoperator> {
    match kind {
        GeneratorKind::LindbladAllRegimes => build_lindblad_all_regimes(system, rates),
        GeneratorKind::BlochRedfield => build_bloch_redfield(system, rates),
        GeneratorKind::Degenerate => build_degenerate(system, rates),
        GeneratorKind::NonDegenerate => build_nondegenerate(system, rates),
        GeneratorKind::PartialSecular { clusters } if clusters.is_empty() => {
            let auto = cluster_transitions(rates, DEFAULT_CLUSTER_THRESHOLD);
            build_partial_secular(system, rates, &auto)
        }
        GeneratorKind::PartialSecular { clusters } => {
            build_partial_secular(system, rates, clusters)
        }
    }
}

/// Group transitions whose detunings are within `threshold` times their
/// shift/linewidth scale: |ω_j − ω_k| ≤ threshold·max(√|Δ_jΔ_k|, √(γ_jγ_k)),
/// closed transitively. Labels are assigned in order of first appearance.
pub fn cluster_transitions(rates: &RateTable, threshold: f64) -> Vec<usize> {
    let n = rates.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for j in 0..n {
        for k in (j + 1)..n {
            let a = &rates.rows[j];
            let b = &rates.rows[k];
            let scale = (a.lamb * b.lamb).abs().sqrt().max((a.gamma * b.gamma).sqrt());
            if (a.omega - b.omega).abs() <= threshold * scale {
                let (rj, rk) = (find(&mut parent, j), find(&mut parent, k));
                if rj != rk {
                    parent[rk] = rj;
                }
            }
        }
    }
    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let root = find(&mut parent, i);
        if labels[root] == usize::MAX {
            labels[root] = next;
            next += 1;
        }
        out.push(labels[root]);
    }
    out
}

/// Reconstruct the coefficient matrix of the generator over the sandwich
/// basis {σ_j} (plus {σ_j†} for thermal tables); the generator is
/// completely positive iff this matrix is positive semidefinite. Valid
/// because distinct transitions are orthonormal under the trace inner
/// product and the commutator/anticommutator parts project to zero.
pub fn kossakowski_matrix(
    system: &SystemSpec,
    generator: &Superoperator,
    include_raising: bool,
) -> CMat {
    let n = system.transitions.len();
    let mut basis: Vec<CMat> = (0..n).map(|j| system.sigma(j)).collect();
    if include_raising {
        for j in 0..n {
            basis.push(system.sigma(j).adjoint());
        }
    }
    let m = basis.len();
    let mut k = CMat::zeros(m, m);
    for alpha in 0..m {
        for beta in 0..m {
            // Coefficient of ρ ↦ F_α ρ F_β†, i.e. conj(F_β) ⊗ F_α.
            let probe = sandwich_superop(&basis[alpha], &basis[beta].adjoint());
            let dot: Complex64 = probe
                .mat
                .iter()
                .zip(generator.mat.iter())
                .map(|(p, g)| p.conj() * g)
                .sum();
            k[(alpha, beta)] = dot;
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{build_rate_table, build_rate_table_anchored, BathSpec, RateRow, Spectrum};
    use crate::linalg::{max_abs_diff, min_eigenvalue_hermitian};
    use crate::operators::{dissipator_superop, pure_density, vectorize};
    use crate::system::{Coupling, Transition};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ohmic(cutoff: f64, temperature: f64) -> BathSpec {
        BathSpec::new(Spectrum::Ohmic { cutoff }, temperature).unwrap()
    }

    /// Common ground state with two upper levels.
    fn v_system(omega1: f64, omega2: f64, g1: Coupling, g2: Coupling) -> SystemSpec {
        SystemSpec::new(
            vec![0.0, omega1, omega2],
            vec![Transition::new(0, 1, g1), Transition::new(0, 2, g2)],
        )
        .unwrap()
    }

    /// Two stacked two-level pairs sharing one transition frequency but
    /// with distinct couplings and phases: every cross term is exercised
    /// while all per-transition spectral data coincide.
    fn common_frequency_system(omega: f64) -> SystemSpec {
        SystemSpec::new(
            vec![0.0, 1.3, omega, 1.3 + omega],
            vec![
                Transition::new(0, 2, Coupling::Amplitude(0.7)).with_phase(0.4),
                Transition::new(1, 3, Coupling::Amplitude(0.3)).with_phase(-1.1),
            ],
        )
        .unwrap()
    }

    #[test]
    fn flat_spectrum_identity() {
        let system = common_frequency_system(2.0);
        let bath = BathSpec::zero_temperature(Spectrum::Flat {
            j0: 0.05,
            cutoff: 6.0,
        })
        .unwrap();
        let rates = build_rate_table(&system, &bath).unwrap();
        let ar = build_lindblad_all_regimes(&system, &rates).unwrap();
        let br = build_bloch_redfield(&system, &rates).unwrap();
        let scale = br.mat.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(
            ar.max_abs_diff(&br) <= 1e-12 * scale,
            "flat-spectrum identity broken: {}",
            ar.max_abs_diff(&br)
        );
    }

    #[test]
    fn common_frequency_identity_thermal() {
        let system = common_frequency_system(10.0 * PI);
        let bath = ohmic(80.0 * PI, 25.0);
        let rates = build_rate_table(&system, &bath).unwrap();
        assert!(rates.is_thermal());
        let ar = build_lindblad_all_regimes(&system, &rates).unwrap();
        let br = build_bloch_redfield(&system, &rates).unwrap();
        let scale = br.mat.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(ar.max_abs_diff(&br) <= 1e-12 * scale);
    }

    #[test]
    fn collective_route_matches_pairwise_zero_t() {
        let system = v_system(
            10.0 * PI,
            10.0 * PI + 0.4,
            Coupling::TargetGamma(0.1),
            Coupling::TargetGamma(0.05),
        );
        let bath = ohmic(80.0 * PI, 0.0);
        let rates = build_rate_table(&system, &bath).unwrap();
        let ar = build_lindblad_all_regimes(&system, &rates).unwrap();
        let CollectiveOps::ZeroTemperature { sigma, d } = collective_ops(&system, &rates).unwrap()
        else {
            panic!("zero-temperature table");
        };
        let h_l = d.adjoint() * &d * c(-1.0);
        assert!(max_abs_diff(&h_l, &lamb_hamiltonian(&system, &rates).unwrap()) < 1e-14);
        let mut dual = commutator_superop(&(system.hamiltonian() + h_l)).unwrap();
        dual.add_assign(&dissipator_superop(&sigma).unwrap());
        let scale = ar.mat.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(
            ar.max_abs_diff(&dual) <= 1e-12 * scale,
            "dual route defect {}",
            ar.max_abs_diff(&dual)
        );
    }

    #[test]
    fn collective_route_matches_pairwise_thermal() {
        let system = SystemSpec::new(
            vec![0.0, 10.0 * PI, 10.0 * PI + 0.8],
            vec![
                Transition::new(0, 1, Coupling::TargetGamma(0.1)).with_phase(0.3),
                Transition::new(0, 2, Coupling::TargetGamma(0.07)).with_phase(-0.9),
            ],
        )
        .unwrap();
        // The thermal shift dips negative below T ≈ 50 for this geometry;
        // the collective form needs a temperature where it is positive.
        let bath = ohmic(80.0 * PI, 80.0);
        let rates = build_rate_table(&system, &bath).unwrap();
        let ar = build_lindblad_all_regimes(&system, &rates).unwrap();
        let CollectiveOps::Thermal {
            theta,
            upsilon,
            b,
            c: c_op,
        } = collective_ops(&system, &rates).unwrap()
        else {
            panic!("thermal table");
        };
        let h_l = (b.adjoint() * &b - &c_op * c_op.adjoint()).map(|z| z * c(-1.0));
        assert!(max_abs_diff(&h_l, &lamb_hamiltonian(&system, &rates).unwrap()) < 1e-13);
        let mut dual = commutator_superop(&(system.hamiltonian() + h_l)).unwrap();
        dual.add_assign(&dissipator_superop(&theta).unwrap());
        dual.add_assign(&dissipator_superop(&upsilon).unwrap());
        let scale = ar.mat.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(
            ar.max_abs_diff(&dual) <= 1e-12 * scale,
            "thermal dual route defect {}",
            ar.max_abs_diff(&dual)
        );
    }

    #[test]
    fn collective_ops_single_transition() {
        let system = SystemSpec::new(
            vec![0.0, 10.0 * PI],
            vec![Transition::new(0, 1, Coupling::TargetGamma(0.1)).with_phase(0.7)],
        )
        .unwrap();
        let rates = build_rate_table(&system, &ohmic(80.0 * PI, 0.0)).unwrap();
        let CollectiveOps::ZeroTemperature { sigma, d } = collective_ops(&system, &rates).unwrap()
        else {
            panic!()
        };
        let expect = system.sigma(0).map(|z| z * 0.1_f64.sqrt() * phase_factor(0.7));
        assert!(max_abs_diff(&sigma, &expect) < 1e-12);
        let expect_d = system
            .sigma(0)
            .map(|z| z * rates.rows[0].lamb.sqrt() * phase_factor(0.7));
        assert!(max_abs_diff(&d, &expect_d) < 1e-12);
    }

    #[test]
    fn negative_radicand_is_rejected() {
        let system = SystemSpec::new(
            vec![0.0, 1.0],
            vec![Transition::new(0, 1, Coupling::Amplitude(0.5))],
        )
        .unwrap();
        let rates = RateTable {
            rows: vec![RateRow {
                omega: 1.0,
                gamma: 0.1,
                lamb: -0.02,
                thermal_lamb: 0.0,
                occupation: 0.0,
                phase: 0.0,
                coupling: 0.5,
            }],
            temperature: 0.0,
        };
        assert!(matches!(
            collective_ops(&system, &rates),
            Err(Error::Domain(_))
        ));
        // The pairwise builder stays defined and consistent: dropping the
        // shift weights and adding the signed-Gram Hamiltonian recovers it.
        let ar = build_lindblad_all_regimes(&system, &rates).unwrap();
        let h_l = lamb_hamiltonian(&system, &rates).unwrap();
        assert_relative_eq!(h_l[(1, 1)].re, 0.02 / 0.25 * 0.25, epsilon = 1e-15);
        let mut stripped = RateTable {
            rows: rates.rows.clone(),
            temperature: 0.0,
        };
        stripped.rows[0].lamb = 0.0;
        let mut dual = build_lindblad_all_regimes(&system, &stripped).unwrap();
        dual.add_assign(&commutator_superop(&h_l).unwrap());
        assert!(ar.max_abs_diff(&dual) < 1e-14);
    }

    #[test]
    fn signed_mean_mixed_signs_consistent() {
        // Synthetic two-transition table with opposite-sign shifts: the
        // generator still decomposes as stripped weights + signed-Gram
        // Hamiltonian commutator.
        let system = v_system(
            3.0,
            3.2,
            Coupling::Amplitude(0.6),
            Coupling::Amplitude(0.2),
        );
        let rates = RateTable {
            rows: vec![
                RateRow {
                    omega: 3.0,
                    gamma: 0.1,
                    lamb: 0.05,
                    thermal_lamb: 0.0,
                    occupation: 0.0,
                    phase: 0.2,
                    coupling: 0.6,
                },
                RateRow {
                    omega: 3.2,
                    gamma: 0.08,
                    lamb: -0.03,
                    thermal_lamb: 0.0,
                    occupation: 0.0,
                    phase: -0.5,
                    coupling: 0.2,
                },
            ],
            temperature: 0.0,
        };
        let ar = build_lindblad_all_regimes(&system, &rates).unwrap();
        let h_l = lamb_hamiltonian(&system, &rates).unwrap();
        let mut stripped = rates.clone();
        stripped.rows[0].lamb = 0.0;
        stripped.rows[1].lamb = 0.0;
        let mut dual = build_lindblad_all_regimes(&system, &stripped).unwrap();
        dual.add_assign(&commutator_superop(&h_l).unwrap());
        assert!(ar.max_abs_diff(&dual) < 1e-13);
    }

    #[test]
    fn dark_state_is_stationary() {
        let system = v_system(
            10.0 * PI,
            10.0 * PI,
            Coupling::TargetGamma(0.1),
            Coupling::TargetGamma(0.1),
        );
        let rates = build_rate_table(&system, &ohmic(80.0 * PI, 0.0)).unwrap();
        let l = build_lindblad_all_regimes(&system, &rates).unwrap();
        let dim = 3;
        let mut dark = crate::linalg::CVec::zeros(dim);
        dark[1] = c(1.0 / 2.0_f64.sqrt());
        dark[2] = c(-1.0 / 2.0_f64.sqrt());
        let rho = pure_density(&dark);
        let residual = &l.mat * vectorize(&rho);
        let defect = residual.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(defect < 1e-12, "dark state moves at rate {defect}");
        // Its orthogonal partner decays at the collective rate 2γ.
        let mut bright = crate::linalg::CVec::zeros(dim);
        bright[1] = c(1.0 / 2.0_f64.sqrt());
        bright[2] = c(1.0 / 2.0_f64.sqrt());
        let rho_b = pure_density(&bright);
        let deriv = l.apply(&rho_b);
        let pop_rate = (bright.adjoint() * &deriv * &bright)[(0, 0)].re;
        assert_relative_eq!(pop_rate, -2.0 * 0.1, max_relative = 1e-10);
    }

    #[test]
    fn degenerate_equals_redfield_at_exact_degeneracy() {
        let omega = 10.0 * PI;
        let system = v_system(
            omega,
            omega,
            Coupling::Amplitude(0.8),
            Coupling::Amplitude(0.3),
        );
        let bath = ohmic(80.0 * PI, 15.0);
        let anchored = build_rate_table_anchored(&system, &bath, omega).unwrap();
        let plain = build_rate_table(&system, &bath).unwrap();
        let deg = build_degenerate(&system, &anchored).unwrap();
        let br = build_bloch_redfield(&system, &plain).unwrap();
        let scale = br.mat.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(deg.max_abs_diff(&br) <= 1e-12 * scale);
    }

    #[test]
    fn single_transition_all_kinds_agree() {
        let system = SystemSpec::new(
            vec![0.0, 10.0 * PI],
            vec![Transition::new(0, 1, Coupling::TargetGamma(0.296)).with_phase(1.2)],
        )
        .unwrap();
        let bath = ohmic(80.0 * PI, 0.0);
        let rates = build_rate_table(&system, &bath).unwrap();
        let anchored = build_rate_table_anchored(&system, &bath, 10.0 * PI).unwrap();
        let reference = build_lindblad_all_regimes(&system, &rates).unwrap();
        let kinds: Vec<(GeneratorKind, &RateTable)> = vec![
            (GeneratorKind::BlochRedfield, &rates),
            (GeneratorKind::NonDegenerate, &rates),
            (GeneratorKind::Degenerate, &anchored),
            (
                GeneratorKind::PartialSecular { clusters: vec![0] },
                &rates,
            ),
        ];
        for (kind, table) in kinds {
            let l = build_generator(&system, table, &kind).unwrap();
            assert!(
                reference.max_abs_diff(&l) < 1e-13,
                "{kind:?} deviates by {}",
                reference.max_abs_diff(&l)
            );
        }
    }

    #[test]
    fn partial_secular_limits() {
        let system = SystemSpec::new(
            vec![0.0, 10.0 * PI, 10.0 * PI + 0.075, 10.0 * PI + 0.0375],
            vec![
                Transition::new(0, 1, Coupling::TargetGamma(0.1)),
                Transition::new(0, 2, Coupling::TargetGamma(0.075)),
                Transition::new(0, 3, Coupling::TargetGamma(0.05)),
            ],
        )
        .unwrap();
        let rates = build_rate_table(&system, &ohmic(80.0 * PI, 0.0)).unwrap();
        let ar = build_lindblad_all_regimes(&system, &rates).unwrap();
        let nd = build_nondegenerate(&system, &rates).unwrap();
        let one = build_partial_secular(&system, &rates, &[5, 5, 5]).unwrap();
        let single = build_partial_secular(&system, &rates, &[0, 1, 2]).unwrap();
        assert!(ar.max_abs_diff(&one) < 1e-14);
        assert!(nd.max_abs_diff(&single) < 1e-14);
        assert!(build_partial_secular(&system, &rates, &[0, 1]).is_err());
        // Mixed partition: the (0,1) block matches all-regimes, all cross
        // coefficients to transition 2 vanish.
        let ps = build_partial_secular(&system, &rates, &[0, 0, 1]).unwrap();
        let k_ps = kossakowski_matrix(&system, &ps, false);
        let k_ar = kossakowski_matrix(&system, &ar, false);
        for (j, k) in [(0usize, 1usize), (0, 0), (1, 1), (2, 2)] {
            assert!((k_ps[(j, k)] - k_ar[(j, k)]).norm() < 1e-12);
        }
        for (j, k) in [(0usize, 2usize), (1, 2), (2, 0), (2, 1)] {
            assert!(k_ps[(j, k)].norm() < 1e-13);
        }
    }

    #[test]
    fn cluster_transitions_cases() {
        let mk_row = |omega: f64, gamma: f64, lamb: f64| RateRow {
            omega,
            gamma,
            lamb,
            thermal_lamb: 0.0,
            occupation: 0.0,
            phase: 0.0,
            coupling: 1.0,
        };
        let degenerate = RateTable {
            rows: vec![mk_row(5.0, 0.1, 0.2), mk_row(5.0, 0.05, 0.1)],
            temperature: 0.0,
        };
        assert_eq!(
            cluster_transitions(&degenerate, DEFAULT_CLUSTER_THRESHOLD),
            vec![0, 0]
        );
        let split = RateTable {
            rows: vec![mk_row(5.0, 0.1, 0.2), mk_row(5.0 + 1e3 * 0.2, 0.1, 0.2)],
            temperature: 0.0,
        };
        assert_eq!(
            cluster_transitions(&split, DEFAULT_CLUSTER_THRESHOLD),
            vec![0, 1]
        );
        // Chain: 1 close to 2, 2 close to 3, 1 far from 3 → one cluster.
        let chain = RateTable {
            rows: vec![
                mk_row(5.0, 0.01, 0.01),
                mk_row(5.15, 0.01, 0.01),
                mk_row(5.3, 0.01, 0.01),
            ],
            temperature: 0.0,
        };
        assert_eq!(cluster_transitions(&chain, DEFAULT_CLUSTER_THRESHOLD), vec![0, 0, 0]);
        assert_eq!(cluster_transitions(&chain, 1e-9), vec![0, 1, 2]);
        assert_eq!(cluster_transitions(&chain, 1e12), vec![0, 0, 0]);
    }

    #[test]
    fn lindblad_kinds_are_completely_positive() {
        let system = SystemSpec::new(
            vec![0.0, 10.0 * PI, 10.0 * PI + 0.4, 10.0 * PI + 1.3],
            vec![
                Transition::new(0, 1, Coupling::TargetGamma(0.1)).with_phase(0.3),
                Transition::new(0, 2, Coupling::TargetGamma(0.075)),
                Transition::new(0, 3, Coupling::TargetGamma(0.05)).with_phase(-0.8),
            ],
        )
        .unwrap();
        for temperature in [0.0, 30.0] {
            let bath = ohmic(80.0 * PI, temperature);
            let rates = build_rate_table(&system, &bath).unwrap();
            let anchored = build_rate_table_anchored(&system, &bath, 10.0 * PI).unwrap();
            let builds: Vec<(&str, Superoperator)> = vec![
                (
                    "all-regimes",
                    build_lindblad_all_regimes(&system, &rates).unwrap(),
                ),
                ("nondegenerate", build_nondegenerate(&system, &rates).unwrap()),
                ("degenerate", build_degenerate(&system, &anchored).unwrap()),
                (
                    "partial-secular",
                    build_partial_secular(&system, &rates, &[0, 0, 1]).unwrap(),
                ),
            ];
            for (name, l) in builds {
                let k = kossakowski_matrix(&system, &l, temperature > 0.0);
                let min = min_eigenvalue_hermitian(&k);
                assert!(
                    min >= -1e-10,
                    "{name} at T={temperature}: coefficient matrix eigenvalue {min}"
                );
            }
            // The non-secular generator is not completely positive once
            // the transitions differ.
            let br = build_bloch_redfield(&system, &rates).unwrap();
            let k = kossakowski_matrix(&system, &br, temperature > 0.0);
            assert!(min_eigenvalue_hermitian(&k) < -1e-6);
        }
    }

    #[test]
    fn all_generators_annihilate_trace() {
        let system = SystemSpec::new(
            vec![0.0, 2.0, 10.0 * PI, 10.0 * PI + 0.5],
            vec![
                Transition::new(0, 2, Coupling::Amplitude(0.6)).with_phase(0.2),
                Transition::new(1, 3, Coupling::Amplitude(0.4)),
                Transition::new(0, 3, Coupling::Amplitude(0.2)).with_phase(2.0),
            ],
        )
        .unwrap();
        let bath = ohmic(80.0 * PI, 12.0);
        let rates = build_rate_table(&system, &bath).unwrap();
        let kinds = [
            GeneratorKind::LindbladAllRegimes,
            GeneratorKind::BlochRedfield,
            GeneratorKind::NonDegenerate,
            GeneratorKind::PartialSecular {
                clusters: vec![0, 0, 1],
            },
        ];
        for kind in &kinds {
            let l = build_generator(&system, &rates, kind).unwrap();
            assert!(
                l.trace_annihilation_defect() < 1e-10,
                "{kind:?} leaks trace"
            );
            assert!(l.hermiticity_preservation_defect() < 1e-10);
        }
    }

    #[test]
    fn upsilon_is_raising() {
        let system = SystemSpec::new(
            vec![0.0, 10.0 * PI],
            vec![Transition::new(0, 1, Coupling::TargetGamma(0.1)).with_phase(0.6)],
        )
        .unwrap();
        let rates = build_rate_table(&system, &ohmic(80.0 * PI, 80.0)).unwrap();
        let CollectiveOps::Thermal { theta, upsilon, .. } =
            collective_ops(&system, &rates).unwrap()
        else {
            panic!()
        };
        // Θ lowers (annihilates the ground state column), Υ raises.
        assert!(theta[(0, 1)].norm() > 0.0);
        assert!(theta[(1, 0)].norm() == 0.0);
        assert!(upsilon[(1, 0)].norm() > 0.0);
        assert!(upsilon[(0, 1)].norm() == 0.0);
        let n = rates.rows[0].occupation;
        assert_relative_eq!(
            upsilon[(1, 0)].norm(),
            (0.1 * n).sqrt(),
            max_relative = 1e-12
        );
        // Phase convention: Υ carries e^{−iφ} on the raising operator.
        assert_relative_eq!(upsilon[(1, 0)].arg(), -0.6, max_relative = 1e-12);
    }
}
