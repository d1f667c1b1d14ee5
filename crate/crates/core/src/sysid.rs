//! Subspace identification: recover the dimension, one-step map, and
//! generator of the minimal linear system behind observed responses.
//!
//! The input is the set of response maps Y_k on the observed coordinates
//! at a fixed sampling interval. Two block Hankel matrices built from the
//! Y_k expose the hidden dimension through their singular values; the
//! shifted one yields the one-step map on the retained subspace.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::{logm_real, RMat, RVec};
use crate::operators::Element;
use crate::propagation::{check_uniform, EvolutionResult};

/// Relative singular-value floor below which directions are treated as
/// numerically absent (pseudo-inverse cutoff).
pub const PINV_CUTOFF: f64 = 1e-10;

/// Default Hankel depth n (uses maps Y_0 .. Y_{2n+1}).
pub const DEFAULT_HANKEL_DEPTH: usize = 8;

/// Default sampling interval, in units of the reference frequency.
pub const DEFAULT_SAMPLING_INTERVAL: f64 = 0.5;

/// Default eigenvalue-magnitude mass fraction for dimension counting.
pub const DEFAULT_MASS_FRACTION: f64 = 0.999;

/// Default singular-value tail fraction for the residual criterion.
pub const DEFAULT_RESIDUAL_FRACTION: f64 = 3e-4;

/// Observed response maps Y_k at sampling interval τ; Y_0 is the
/// identity because the probe basis is the observed coordinates.
#[derive(Debug, Clone)]
pub struct ResponseSet {
    pub tau: f64,
    pub maps: Vec<RMat>,
}

impl ResponseSet {
    pub fn new(tau: f64, maps: Vec<RMat>) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Config(format!(
                "sampling interval must be positive, got {tau}"
            )));
        }
        let dim = match maps.first() {
            Some(m) => m.nrows(),
            None => return Err(Error::Config("no response maps".into())),
        };
        for (k, m) in maps.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "response map {k} is {}x{}, expected {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "response map {k} has non-finite entries"
                )));
            }
        }
        let id_defect = (&maps[0] - RMat::identity(dim, dim)).abs().max();
        if id_defect > 1e-6 {
            return Err(Error::Config(format!(
                "Y_0 deviates from the identity by {id_defect:.2e}"
            )));
        }
        Ok(ResponseSet { tau, maps })
    }

    pub fn dim(&self) -> usize {
        self.maps[0].nrows()
    }

    /// Largest Hankel depth the stored maps support.
    pub fn max_depth(&self) -> usize {
        self.maps.len().saturating_sub(2) / 2
    }
}

/// How many singular directions of H0 to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderRule {
    Fixed(usize),
    /// Keep σ_i > tol · σ_1.
    Tolerance(f64),
}

/// How to count the effective dimension of an identified model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DimensionCriterion {
    /// Smallest k whose top-k eigenvalue magnitudes of M̂ reach the
    /// given fraction of the total magnitude.
    EigenvalueMass(f64),
    /// Smallest k whose singular-value tail drops below the given
    /// fraction of the 1-norm of the Hankel data.
    OneNormResidual(f64),
}

impl Default for DimensionCriterion {
    fn default() -> Self {
        DimensionCriterion::EigenvalueMass(DEFAULT_MASS_FRACTION)
    }
}

/// The identified reduced model.
#[derive(Debug, Clone)]
pub struct SIDModel {
    pub h0: RMat,
    pub h1: RMat,
    /// All singular values of H0, descending.
    pub singular_values: Vec<f64>,
    /// Retained order M.
    pub order: usize,
    /// One-step map on the retained subspace (M×M).
    pub m_hat: RMat,
    /// ln(M̂)/τ when the principal branch exists; None when an
    /// eigenvalue sits on the closed negative real axis (see
    /// extract_generator for the error detail).
    pub generator: Option<RMat>,
    pub tau: f64,
}

impl SIDModel {
    /// Eigenvalues of the one-step map, descending by magnitude.
    pub fn map_eigenvalues(&self) -> Vec<Complex64> {
        let mut eigs: Vec<Complex64> = self.m_hat.complex_eigenvalues().iter().copied().collect();
        eigs.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        eigs
    }

    /// Continuous-time eigenvalues ln(λ)/τ of the identified dynamics.
    pub fn generator_eigenvalues(&self) -> Result<Vec<Complex64>> {
        self.map_eigenvalues()
            .into_iter()
            .map(|ev| {
                if ev.norm() < 1e-300 {
                    return Err(Error::Singular(
                        "one-step map has a zero eigenvalue".into(),
                    ));
                }
                if ev.re < 0.0 && ev.im.abs() <= 1e-12 * ev.norm() {
                    return Err(Error::LogBranch {
                        re: ev.re,
                        im: ev.im,
                    });
                }
                Ok(ev.ln() / self.tau)
            })
            .collect()
    }
}

/// Probe a black-box linear evolver with unit initial conditions on each
/// observed coordinate and collect the response maps. `evolve` receives
/// an initial coordinate vector and the sample times (starting at 0) and
/// returns the observed coordinates at each time. Probes run in
/// parallel.
pub fn probe_responses<F>(dim: usize, tau: f64, n_maps: usize, evolve: F) -> Result<ResponseSet>
where
    F: Fn(RVec, &[f64]) -> Result<Vec<RVec>> + Sync + Send,
{
    if dim == 0 || n_maps == 0 {
        return Err(Error::Config("empty probe request".into()));
    }
    let times: Vec<f64> = (0..n_maps).map(|k| k as f64 * tau).collect();
    let columns = exec::map_indexed(dim, |j| {
        let mut e = RVec::zeros(dim);
        e[j] = 1.0;
        evolve(e, &times)
    });
    let mut maps = vec![RMat::zeros(dim, dim); n_maps];
    for (j, column) in columns.into_iter().enumerate() {
        let column = column?;
        if column.len() != n_maps {
            return Err(Error::DimensionMismatch(format!(
                "probe {j} returned {} samples, expected {n_maps}",
                column.len()
            )));
        }
        for (k, sample) in column.into_iter().enumerate() {
            if sample.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "probe {j} sample {k} has dimension {}, expected {dim}",
                    sample.len()
                )));
            }
            maps[k].set_column(j, &sample);
        }
    }
    ResponseSet::new(tau, maps)
}

/// Build response maps from full density-matrix evolutions. Each run
/// starts from one probe state; the probes' observed coordinates must be
/// linearly independent so unit-initial-condition responses follow by a
/// change of basis. All runs must share one uniform time grid.
pub fn responses_from_evolutions(
    runs: &[EvolutionResult],
    elements: &[Element],
) -> Result<ResponseSet> {
    let dim = elements.len();
    if runs.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "{} probe runs for {dim} observed coordinates",
            runs.len()
        )));
    }
    let tau = check_uniform(&runs[0].times)?;
    let n_maps = runs[0].times.len();
    for run in runs {
        if run.times.len() != n_maps
            || run
                .times
                .iter()
                .zip(&runs[0].times)
                .any(|(a, b)| (a - b).abs() > 1e-12 * tau)
        {
            return Err(Error::Config("probe runs use different time grids".into()));
        }
    }
    let mut probe = RMat::zeros(dim, dim);
    for (p, run) in runs.iter().enumerate() {
        for (i, el) in elements.iter().enumerate() {
            probe[(i, p)] = el.extract(&run.states[0]);
        }
    }
    let probe_inv = probe.lu().try_inverse().ok_or_else(|| {
        Error::Singular("probe states do not span the observed coordinates".into())
    })?;
    let mut maps = Vec::with_capacity(n_maps);
    for k in 0..n_maps {
        let mut z = RMat::zeros(dim, dim);
        for (p, run) in runs.iter().enumerate() {
            for (i, el) in elements.iter().enumerate() {
                z[(i, p)] = el.extract(&run.states[k]);
            }
        }
        maps.push(z * &probe_inv);
    }
    ResponseSet::new(tau, maps)
}

/// Block Hankel pair: block (i, j) of H0 is Y_{i+j}, of H1 is Y_{i+j+1},
/// for i, j = 0..=depth.
pub fn build_hankel(set: &ResponseSet, depth: usize) -> Result<(RMat, RMat)> {
    let needed = 2 * depth + 2;
    if set.maps.len() < needed {
        return Err(Error::Config(format!(
            "Hankel depth {depth} needs {needed} response maps, have {}",
            set.maps.len()
        )));
    }
    let n = set.dim();
    let rows = (depth + 1) * n;
    let mut h0 = RMat::zeros(rows, rows);
    let mut h1 = RMat::zeros(rows, rows);
    for i in 0..=depth {
        for j in 0..=depth {
            h0.view_mut((i * n, j * n), (n, n))
                .copy_from(&set.maps[i + j]);
            h1.view_mut((i * n, j * n), (n, n))
                .copy_from(&set.maps[i + j + 1]);
        }
    }
    Ok((h0, h1))
}

/// Identify the reduced one-step map from the Hankel pair by truncated
/// SVD: M̂ = S^{-1/2} Uᵀ H1 V S^{-1/2} on the retained directions.
pub fn identify(h0: &RMat, h1: &RMat, tau: f64, rule: OrderRule) -> Result<SIDModel> {
    if h0.shape() != h1.shape() {
        return Err(Error::DimensionMismatch(format!(
            "Hankel shapes differ: {:?} vs {:?}",
            h0.shape(),
            h1.shape()
        )));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Config(format!(
            "sampling interval must be positive, got {tau}"
        )));
    }
    let svd = h0.clone().svd(true, true);
    let singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    let top = singular_values.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Err(Error::Singular("Hankel data is identically zero".into()));
    }
    let floor_rank = singular_values
        .iter()
        .filter(|&&s| s > PINV_CUTOFF * top)
        .count();
    let order = match rule {
        OrderRule::Fixed(m) => m.min(floor_rank),
        OrderRule::Tolerance(tol) => {
            if !(tol > 0.0) {
                return Err(Error::Config("order tolerance must be positive".into()));
            }
            singular_values
                .iter()
                .filter(|&&s| s > tol * top)
                .count()
                .min(floor_rank)
        }
    };
    if order == 0 {
        return Err(Error::Singular(
            "order rule kept no singular directions".into(),
        ));
    }
    let u = svd.u.as_ref().expect("SVD computed with u");
    let v_t = svd.v_t.as_ref().expect("SVD computed with v_t");
    // W = U_Mᵀ H1 V_M, then scale rows and columns by 1/√σ.
    let u_m = u.columns(0, order);
    let v_m = v_t.rows(0, order).transpose();
    let w = u_m.transpose() * h1 * v_m;
    let mut m_hat = RMat::zeros(order, order);
    for a in 0..order {
        for b in 0..order {
            m_hat[(a, b)] = w[(a, b)] / (singular_values[a] * singular_values[b]).sqrt();
        }
    }
    let generator = extract_generator(&m_hat, tau).ok();
    Ok(SIDModel {
        h0: h0.clone(),
        h1: h1.clone(),
        singular_values,
        order,
        m_hat,
        generator,
        tau,
    })
}

/// Convenience: Hankel construction plus identification at the set's
/// maximal depth (capped by `depth`).
pub fn identify_responses(set: &ResponseSet, depth: usize, rule: OrderRule) -> Result<SIDModel> {
    let depth = depth.min(set.max_depth());
    let (h0, h1) = build_hankel(set, depth)?;
    identify(&h0, &h1, set.tau, rule)
}

/// Principal matrix logarithm of the one-step map divided by τ. Errors
/// when an eigenvalue sits on the closed negative real axis: there the
/// branch is ambiguous and the sampling interval exceeds half the
/// smallest dynamical period.
pub fn extract_generator(m_hat: &RMat, tau: f64) -> Result<RMat> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Config(format!(
            "sampling interval must be positive, got {tau}"
        )));
    }
    Ok(logm_real(m_hat)?.map(|v| v / tau))
}

/// Count the effective dimension of an identified model; identify at a
/// generous order first so the count is not clipped by the truncation.
pub fn effective_dimension(model: &SIDModel, criterion: DimensionCriterion) -> usize {
    match criterion {
        DimensionCriterion::EigenvalueMass(fraction) => {
            let mags: Vec<f64> = model.map_eigenvalues().iter().map(|e| e.norm()).collect();
            let total: f64 = mags.iter().sum();
            if total <= 0.0 {
                return 0;
            }
            let mut acc = 0.0;
            for (k, m) in mags.iter().enumerate() {
                acc += m;
                if acc >= fraction * total {
                    return k + 1;
                }
            }
            mags.len()
        }
        DimensionCriterion::OneNormResidual(fraction) => {
            let scale = one_norm(&model.h0);
            for k in 0..=model.singular_values.len() {
                let tail: f64 = model.singular_values[k..].iter().sum();
                if tail <= fraction * scale {
                    return k;
                }
            }
            model.singular_values.len()
        }
    }
}

fn one_norm(m: &RMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
