//! Monte Carlo wavefunction unraveling of the all-regimes equation.
//!
//! First-order jump scheme: deterministic drift under the effective
//! non-Hermitian Hamiltonian, norm loss as jump probability, collapse
//! through the collective operators. Trajectories are independent and
//! seeded from (root seed, index), so the ensemble average is bit-stable
//! under any execution order.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::bath::RateTable;
use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::generators::{collective_ops, lamb_hamiltonian, CollectiveOps};
use crate::linalg::{expm, min_eigenvalue_hermitian, CMat, CVec};
use crate::propagation::EvolutionResult;
use crate::system::SystemSpec;

/// Trajectories per chunk; chunks are the parallel work unit and the
/// reduction sums them in index order, keeping results bit-identical with
/// and without the parallel feature.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryConfig {
    pub n_trajectories: usize,
    /// Integration step; snapped down so an integer number of steps tiles
    /// each sample interval.
    pub dt: f64,
    pub seed: u64,
    /// Jump-weight floor: a total collapse weight at or below this is
    /// treated as "no jump available" (dark states).
    pub jump_tol: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            n_trajectories: 1000,
            dt: 0.01,
            seed: 0x6f71_73_69_6d,
            jump_tol: 1e-12,
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories == 0 {
            return Err(Error::Config("need at least one trajectory".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config("trajectory dt must be positive".into()));
        }
        if !(self.jump_tol >= 0.0) {
            return Err(Error::Config("jump tolerance must be ≥ 0".into()));
        }
        Ok(())
    }
}

/// Collective jump operators and the effective drift Hamiltonian.
#[derive(Debug, Clone)]
pub struct JumpModel {
    pub jump_ops: Vec<CMat>,
    /// H0 + H_extra + H_L − (i/2) Σ_c c†c.
    pub h_eff: CMat,
}

/// The unraveling of the all-regimes generator: one collective decay
/// operator at T = 0, decay plus absorption at T > 0.
pub fn jump_operators(system: &SystemSpec, rates: &RateTable) -> Result<JumpModel> {
    let jump_ops = match collective_ops(system, rates)? {
        CollectiveOps::ZeroTemperature { sigma, .. } => vec![sigma],
        CollectiveOps::Thermal { theta, upsilon, .. } => vec![theta, upsilon],
    };
    let mut h_eff = system.hamiltonian() + lamb_hamiltonian(system, rates)?;
    for c in &jump_ops {
        h_eff += (c.adjoint() * c).map(|z| z * Complex64::new(0.0, -0.5));
    }
    Ok(JumpModel { jump_ops, h_eff })
}

/// Ensemble average plus run diagnostics.
#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub average: EvolutionResult,
    /// Largest single-step jump probability seen anywhere; above 0.1 the
    /// first-order scheme is noticeably biased (shrink dt).
    pub max_step_jump_probability: f64,
    pub total_jumps: u64,
    pub n_trajectories: usize,
}

impl EnsembleRun {
    pub fn step_warning(&self) -> bool {
        self.max_step_jump_probability > 0.1
    }
}

fn mix_seed(root: u64, index: u64) -> u64 {
    let mut z = root.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct ChunkSum {
    /// Σ over trajectories of |ψ(t_i)⟩⟨ψ(t_i)|.
    states: Vec<CMat>,
    max_p: f64,
    jumps: u64,
}

fn outer(psi: &CVec) -> CMat {
    psi * psi.adjoint()
}

fn run_one(
    u_eff: &CMat,
    jump_ops: &[CMat],
    psi0: &CVec,
    n_samples: usize,
    n_sub: usize,
    jump_tol: f64,
    rng: &mut ChaCha12Rng,
    sums: &mut [CMat],
    max_p: &mut f64,
    jumps: &mut u64,
) -> Result<()> {
    let mut psi = psi0.clone();
    for (i, sum) in sums.iter_mut().enumerate().take(n_samples) {
        *sum += outer(&psi);
        if i + 1 == n_samples {
            break;
        }
        for _ in 0..n_sub {
            let phi = u_eff * &psi;
            let survival = phi.norm_squared();
            let p = 1.0 - survival;
            if p > 0.5 {
                return Err(Error::JumpStep { p });
            }
            if p > *max_p {
                *max_p = p;
            }
            let draw: f64 = rng.gen();
            if draw < p {
                // Collapse weights come from the pre-step state.
                let weights: Vec<f64> =
                    jump_ops.iter().map(|c| (c * &psi).norm_squared()).collect();
                let total: f64 = weights.iter().sum();
                if total <= jump_tol {
                    psi = phi.map(|z| z / survival.sqrt());
                    continue;
                }
                let mut pick: f64 = rng.gen::<f64>() * total;
                let mut chosen = jump_ops.len() - 1;
                for (c, w) in weights.iter().enumerate() {
                    if pick < *w {
                        chosen = c;
                        break;
                    }
                    pick -= w;
                }
                let collapsed = &jump_ops[chosen] * &psi;
                let norm = collapsed.norm();
                psi = collapsed.map(|z| z / norm);
                *jumps += 1;
            } else {
                psi = phi.map(|z| z / survival.sqrt());
            }
        }
    }
    Ok(())
}

/// Average n_traj wavefunction trajectories of the all-regimes equation on
/// a uniform sample grid. The integration step tiles each sample interval
/// exactly; results are reproducible from the config alone.
pub fn run_ensemble(
    system: &SystemSpec,
    rates: &RateTable,
    psi0: &CVec,
    times: &[f64],
    config: &TrajectoryConfig,
) -> Result<EnsembleRun> {
    config.validate()?;
    if psi0.len() != system.dim {
        return Err(Error::DimensionMismatch(format!(
            "initial state has dimension {} but the system {}",
            psi0.len(),
            system.dim
        )));
    }
    if times.len() < 2 {
        return Err(Error::Config("need at least two time samples".into()));
    }
    let spacing = times[1] - times[0];
    if !(spacing > 0.0) {
        return Err(Error::Config("time grid must increase".into()));
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - spacing).abs() > 1e-9 * spacing {
            return Err(Error::Config("time grid must be uniform".into()));
        }
    }
    let norm = psi0.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "initial state norm is {norm}, expected 1"
        )));
    }
    let n_sub = (spacing / config.dt).round().max(1.0) as usize;
    let dt = spacing / n_sub as f64;
    let model = jump_operators(system, rates)?;
    let u_eff = expm(&model.h_eff.map(|z| z * Complex64::new(0.0, -dt)));
    let d = system.dim;
    let n_samples = times.len();
    let n_chunks = config.n_trajectories.div_ceil(CHUNK);
    let chunk_results: Vec<Result<ChunkSum>> = map_indexed(n_chunks, |chunk| {
        let lo = chunk * CHUNK;
        let hi = ((chunk + 1) * CHUNK).min(config.n_trajectories);
        let mut sum = ChunkSum {
            states: vec![CMat::zeros(d, d); n_samples],
            max_p: 0.0,
            jumps: 0,
        };
        for index in lo..hi {
            let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(config.seed, index as u64));
            run_one(
                &u_eff,
                &model.jump_ops,
                psi0,
                n_samples,
                n_sub,
                config.jump_tol,
                &mut rng,
                &mut sum.states,
                &mut sum.max_p,
                &mut sum.jumps,
            )?;
        }
        Ok(sum)
    });
    let mut states = vec![CMat::zeros(d, d); n_samples];
    let mut max_p = 0.0_f64;
    let mut jumps = 0u64;
    for chunk in chunk_results {
        let chunk = chunk?;
        for (acc, s) in states.iter_mut().zip(&chunk.states) {
            *acc += s;
        }
        max_p = max_p.max(chunk.max_p);
        jumps += chunk.jumps;
    }
    let scale = 1.0 / config.n_trajectories as f64;
    let states: Vec<CMat> = states.into_iter().map(|s| s.map(|z| z * scale)).collect();
    let min_eigs = states.iter().map(min_eigenvalue_hermitian).collect();
    let traces = states.iter().map(|s| s.trace().re).collect();
    Ok(EnsembleRun {
        average: EvolutionResult {
            times: times.to_vec(),
            states,
            min_eigs,
            traces,
        },
        max_step_jump_probability: max_p,
        total_jumps: jumps,
        n_trajectories: config.n_trajectories,
    })
}
