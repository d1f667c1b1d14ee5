//! Named studies runnable end to end. Each scenario supplies a system,
//! a bath, an initial state, and a sampling grid; generic drivers then
//! propagate the requested solvers (with the exact discretized-bath
//! reference where enabled) and write plain-text artifacts into an
//! output directory.
//!
//! Configuration is flat `key = value` text with optional `[section]`
//! headers that prefix the keys (`[run]` + `t_max = 30` means
//! `run.t_max = 30`). Every key a scenario accepts appears in its
//! default configuration; unknown keys are rejected so typos cannot
//! silently fall back to defaults. Re-running a scenario with the same
//! configuration produces bit-identical files.
//!
//! The four-level scenario places its two transitions on distinct
//! lower levels (lowering operators |g1><u1| and |g2><u2|, so the
//! product sigma_1^dagger sigma_2 vanishes and the upper levels talk to
//! each other only through their direct coupling). The level layout is
//! [g1, g2, u1, u2].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::bath::{
    build_rate_table_anchored, build_rate_table_closed, thermal_occupation, BathSpec, Spectrum,
};
use crate::compare::{
    errors_against, fit_rates, kind_from_label, kind_label, pairwise_errors, solve_generators,
    FitOptions, LabeledRun,
};
use crate::error::{Error, Result};
use crate::exec;
use crate::generators::{build_generator, GeneratorKind};
use crate::io::{
    write_ensemble_csv, write_evolution_csv, write_kv, write_rate_table_csv,
    write_response_set_csv, write_sid_summary,
};
use crate::linalg::{c, CMat, CVec};
use crate::operators::{pure_density, Element};
use crate::oracle::{exact_reference, level_grades, sector_elements};
use crate::propagation::{
    positivity_report, propagate_adiabatic, resolve_couplings_at, steady_state,
};
use crate::slope::{
    deviation_sweep, dimension_table, SidStudyParams, SLOPE_GAMMA_TWO_LEVEL, SLOPE_GAMMA_V,
};
use crate::system::{Coupling, SystemSpec, Transition};
use crate::sysid::{
    effective_dimension, identify_responses, responses_from_evolutions, DimensionCriterion,
    OrderRule, ResponseSet, DEFAULT_HANKEL_DEPTH, DEFAULT_MASS_FRACTION,
    DEFAULT_SAMPLING_INTERVAL,
};
use crate::trajectories::{run_ensemble, TrajectoryConfig};

/// Flat configuration: string keys and values with typed accessors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn from_pairs(pairs: &[(&str, &str)]) -> Config {
        Config {
            entries: pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sorted (key, value) view for echoing into reports.
    pub fn echo(&self) -> Vec<(String, String)> {
        self.entries
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing configuration key '{key}'")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::Config(format!("key '{key}': '{raw}' is not a number")))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::Config(format!("key '{key}': '{raw}' is not a whole number")))
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::Config(format!("key '{key}': '{raw}' is not a whole number")))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.require(key)? {
            "true" => Ok(true),
            "false" => Ok(false),
            raw => Err(Error::Config(format!(
                "key '{key}': '{raw}' is neither 'true' nor 'false'"
            ))),
        }
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.str_list(key)?
            .iter()
            .map(|item| {
                item.parse()
                    .map_err(|_| Error::Config(format!("key '{key}': '{item}' is not a number")))
            })
            .collect()
    }

    pub fn str_list(&self, key: &str) -> Result<Vec<String>> {
        let raw = self.require(key)?;
        let items: Vec<String> = raw
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        if items.is_empty() {
            return Err(Error::Config(format!("key '{key}' has an empty list")));
        }
        Ok(items)
    }

    /// Mode-count override: 0 means automatic.
    pub fn n_modes(&self, key: &str) -> Result<Option<usize>> {
        let n = self.usize(key)?;
        Ok(if n == 0 { None } else { Some(n) })
    }

    /// Overlay `over` onto `self`; every overlaid key must already
    /// exist (the defaults define the accepted vocabulary).
    pub fn overlaid(&self, over: &Config) -> Result<Config> {
        let mut merged = self.clone();
        for (key, value) in &over.entries {
            if !merged.entries.contains_key(key) {
                return Err(Error::Config(format!(
                    "unknown configuration key '{key}' (accepted: {})",
                    merged
                        .entries
                        .keys()
                        .cloned()
                        .collect::<Vec<_>>()
                        .join(", ")
                )));
            }
            merged.entries.insert(key.clone(), value.clone());
        }
        Ok(merged)
    }
}

/// Parse `key = value` lines with optional `[section]` headers; a
/// section prefixes the keys that follow it as `section.key`. Blank
/// lines and `#` comments are ignored.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut config = Config::default();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            if name.is_empty() {
                return Err(Error::Config(format!("line {}: empty section", idx + 1)));
            }
            section = format!("{name}.");
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected 'key = value', got '{line}'",
                idx + 1
            )));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", idx + 1)));
        }
        config.set(&format!("{section}{key}"), value.trim());
    }
    Ok(config)
}

/// Everything the generic drivers need to run a scenario.
pub struct Prepared {
    pub system: SystemSpec,
    pub bath: BathSpec,
    pub psi0: CVec,
    pub times: Vec<f64>,
    /// Density-matrix elements the study observes and compares.
    pub elements: Vec<Element>,
    pub kinds: Vec<GeneratorKind>,
    /// Whether a comparison run includes the exact reference.
    pub oracle: bool,
    pub n_modes: Option<usize>,
}

type SummaryRows = Vec<(String, String)>;

/// What to do with a prepared scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    /// Write the resolved rate table.
    Rates,
    /// Propagate the first requested solver.
    Evolve,
    /// Run every requested solver (and the exact reference where
    /// enabled) and tabulate pairwise errors.
    Compare,
    /// Identify the dynamics behind the scenario's evolution.
    Sysid,
    /// Average a jump-unraveling ensemble.
    Trajectories,
    /// Tune damping rates and shifts against the exact reference.
    Fit,
}

/// A named study: defaults, ingredient factory, and an optional
/// study-specific comparison action replacing the generic one.
pub struct Scenario {
    pub name: &'static str,
    pub summary: &'static str,
    defaults: fn() -> Config,
    prepare: fn(&Config) -> Result<Prepared>,
    special: Option<fn(&Config, &Path) -> Result<SummaryRows>>,
}

impl Scenario {
    pub fn defaults(&self) -> Config {
        (self.defaults)()
    }

    /// Merge user configuration over the defaults, rejecting unknown
    /// keys.
    pub fn effective_config(&self, user: &Config) -> Result<Config> {
        self.defaults().overlaid(user)
    }

    pub fn prepare(&self, config: &Config) -> Result<Prepared> {
        (self.prepare)(config)
    }

    /// Run one verb with user configuration overlaid on the defaults,
    /// writing artifacts, a column-schema file, and a summary under
    /// `out_dir`. On failure the summary flags the abort and partial
    /// outputs stay in place.
    pub fn execute(&self, verb: Verb, user: &Config, out_dir: &Path) -> Result<SummaryRows> {
        let config = self.effective_config(user)?;
        fs::create_dir_all(out_dir)?;
        write_schema(out_dir)?;
        let outcome = match verb {
            Verb::Compare => match self.special {
                Some(action) => action(&config, out_dir),
                None => self
                    .prepare(&config)
                    .and_then(|p| compare_prepared(&p, out_dir)),
            },
            Verb::Rates => self.prepare(&config).and_then(|p| run_rates(&p, out_dir)),
            Verb::Evolve => self.prepare(&config).and_then(|p| run_evolve(&p, out_dir)),
            Verb::Sysid => self
                .prepare(&config)
                .and_then(|p| run_sysid(&p, &config, out_dir)),
            Verb::Trajectories => self
                .prepare(&config)
                .and_then(|p| run_trajectories(&p, &config, out_dir)),
            Verb::Fit => self.prepare(&config).and_then(|p| run_fit(&p, out_dir)),
        };
        match outcome {
            Ok(rows) => {
                self.write_summary(&config, out_dir, "ok", &rows)?;
                Ok(rows)
            }
            Err(e) => {
                let rows = vec![("error".to_string(), e.to_string())];
                self.write_summary(&config, out_dir, "aborted", &rows)?;
                Err(e)
            }
        }
    }

    /// Full comparison run (the `Compare` verb).
    pub fn run_comparison(&self, user: &Config, out_dir: &Path) -> Result<SummaryRows> {
        self.execute(Verb::Compare, user, out_dir)
    }

    fn write_summary(
        &self,
        config: &Config,
        out_dir: &Path,
        status: &str,
        rows: &[(String, String)],
    ) -> Result<()> {
        let mut pairs = vec![
            ("scenario".to_string(), self.name.to_string()),
            ("status".to_string(), status.to_string()),
        ];
        for (k, v) in config.echo() {
            pairs.push((format!("config.{k}"), v));
        }
        pairs.extend_from_slice(rows);
        let mut w = create(out_dir, "summary.txt")?;
        write_kv(&mut w, &pairs)
    }
}

fn create(out_dir: &Path, name: &str) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(out_dir.join(name))?))
}

fn write_schema(out_dir: &Path) -> Result<()> {
    let mut w = create(out_dir, "schema.txt")?;
    w.write_all(SCHEMA.as_bytes())?;
    Ok(())
}

const SCHEMA: &str = "\
Artifact columns. All files are plain text; lines starting with '#'
carry metadata as 'key = value'.

evolution_<solver>.csv, exact.csv, ensemble.csv
  time, re_<i>_<j> and im_<i>_<j> for every density-matrix entry
  (row-major), min_eigenvalue, trace. ensemble.csv is preceded by
  seed, n_trajectories, dt, total_jumps, max_step_jump_probability.

errors.csv
  a, b, time_average, max: the mean and maximum over time of the
  average absolute difference between the observed elements of runs
  a and b.

rates.csv, rates_fitted.csv
  transition, omega, gamma, lamb, thermal_lamb, occupation, phase,
  coupling, after '# temperature'.

responses*.csv
  '# tau', '# dim', '# maps', then map, row, col, value for the
  sampled response maps.

sid*.txt
  identified model: order, tau, spectral radius, singular values,
  and one-step map eigenvalues.

dimension_table.csv
  r, two_level, v: effective dimension counts per slope factor.

deviations.csv
  r, deviation: largest log-population residual per slope factor.

steady_states.csv
  temperature, occupation, rho_ee, rho_gg, ratio, expected,
  residual for the thermal fixed point.

summary.txt
  scenario, status, the effective configuration echoed as
  'config.<key>', and per-run results.
";

/// Write one labeled run as `evolution_<label>.csv`.
fn write_run(out_dir: &Path, run: &LabeledRun) -> Result<()> {
    let mut w = create(out_dir, &format!("evolution_{}.csv", run.label))?;
    writeln!(w, "# solver = {}", run.label)?;
    write_evolution_csv(&mut w, &run.result)
}

/// Solve a static system for every kind, routing the anchored-table
/// family through a rate table built at the first transition
/// frequency.
fn solve_static(
    resolved: &SystemSpec,
    bath: &BathSpec,
    kinds: &[GeneratorKind],
    rho0: &CMat,
    times: &[f64],
) -> Result<Vec<LabeledRun>> {
    let (anchored_kinds, plain_kinds): (Vec<_>, Vec<_>) = kinds
        .iter()
        .cloned()
        .partition(|k| matches!(k, GeneratorKind::Degenerate));
    let mut runs = Vec::new();
    if !plain_kinds.is_empty() {
        let rates = build_rate_table_closed(resolved, bath)?;
        runs.extend(solve_generators(resolved, &rates, &plain_kinds, rho0, times)?);
    }
    if !anchored_kinds.is_empty() {
        let anchor = resolved.transition_frequencies()[0];
        let anchored = build_rate_table_anchored(resolved, bath, anchor)?;
        runs.extend(solve_generators(
            resolved,
            &anchored,
            &anchored_kinds,
            rho0,
            times,
        )?);
    }
    // Restore the requested order.
    let mut ordered = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let label = kind_label(kind);
        let idx = runs
            .iter()
            .position(|r| r.label == label)
            .expect("every requested kind was solved");
        ordered.push(runs.swap_remove(idx));
    }
    Ok(ordered)
}

/// Propagate every requested solver on the scenario grid.
fn solve_all(p: &Prepared, resolved: &SystemSpec, kinds: &[GeneratorKind]) -> Result<Vec<LabeledRun>> {
    let rho0 = pure_density(&p.psi0);
    if resolved.is_time_dependent() {
        let outcomes = exec::map_indexed(kinds.len(), |i| -> Result<LabeledRun> {
            let result = propagate_adiabatic(resolved, &p.bath, &kinds[i], &rho0, &p.times)?;
            Ok(LabeledRun {
                label: kind_label(&kinds[i]),
                positivity: positivity_report(&result),
                result,
            })
        });
        outcomes.into_iter().collect()
    } else {
        solve_static(resolved, &p.bath, kinds, &rho0, &p.times)
    }
}

/// Generic comparison: propagate every requested solver (adiabatically
/// for driven systems), optionally run the exact reference, and write
/// evolutions plus an error table.
pub fn compare_prepared(p: &Prepared, out_dir: &Path) -> Result<SummaryRows> {
    let resolved = resolve_couplings_at(&p.system, &p.bath, p.times[0])?;
    let runs = solve_all(p, &resolved, &p.kinds)?;
    for run in &runs {
        write_run(out_dir, run)?;
    }

    let mut errors = pairwise_errors(&runs, &p.elements)?;
    let mut rows: SummaryRows = Vec::new();
    if p.oracle {
        let exact = exact_reference(&resolved, &p.bath, &p.psi0, &p.times, p.n_modes)?;
        let mut w = create(out_dir, "exact.csv")?;
        writeln!(w, "# solver = exact")?;
        write_evolution_csv(&mut w, &exact)?;
        errors.extend(errors_against(&runs, &exact, "exact", &p.elements)?);
    }

    let mut w = create(out_dir, "errors.csv")?;
    writeln!(w, "a,b,time_average,max")?;
    for e in &errors {
        writeln!(
            w,
            "{},{},{},{}",
            e.a, e.b, e.metric.time_average, e.metric.max
        )?;
    }
    drop(w);

    for run in &runs {
        rows.push((
            format!("result.{}.min_eigenvalue", run.label),
            format!("{}", run.positivity.min_eigenvalue),
        ));
    }
    for e in &errors {
        rows.push((
            format!("result.error.{}.vs.{}.time_average", e.a, e.b),
            format!("{}", e.metric.time_average),
        ));
        rows.push((
            format!("result.error.{}.vs.{}.max", e.a, e.b),
            format!("{}", e.metric.max),
        ));
    }
    Ok(rows)
}

/// Resolve couplings and write the rate table.
fn run_rates(p: &Prepared, out_dir: &Path) -> Result<SummaryRows> {
    let resolved = resolve_couplings_at(&p.system, &p.bath, p.times[0])?;
    let rates = build_rate_table_closed(&resolved, &p.bath)?;
    let mut w = create(out_dir, "rates.csv")?;
    write_rate_table_csv(&mut w, &rates)?;
    let mut rows: SummaryRows = vec![(
        "result.transitions".to_string(),
        format!("{}", rates.len()),
    )];
    for (j, row) in rates.rows.iter().enumerate() {
        rows.push((
            format!("result.rate_{j}"),
            format!("omega={},gamma={},lamb={}", row.omega, row.gamma, row.lamb),
        ));
    }
    Ok(rows)
}

/// Propagate the first requested solver only.
fn run_evolve(p: &Prepared, out_dir: &Path) -> Result<SummaryRows> {
    let resolved = resolve_couplings_at(&p.system, &p.bath, p.times[0])?;
    let runs = solve_all(p, &resolved, &p.kinds[..1])?;
    let run = &runs[0];
    write_run(out_dir, run)?;
    Ok(vec![
        ("result.solver".to_string(), run.label.clone()),
        (
            "result.min_eigenvalue".to_string(),
            format!("{}", run.positivity.min_eigenvalue),
        ),
        (
            "result.samples".to_string(),
            format!("{}", run.result.times.len()),
        ),
    ])
}

/// Identify the dynamics behind the scenario's own evolution, sampled
/// stroboscopically at `sid.tau`: the exact reference where enabled,
/// the first requested solver otherwise.
fn run_sysid(p: &Prepared, config: &Config, out_dir: &Path) -> Result<SummaryRows> {
    if p.system.is_time_dependent() {
        return Err(Error::Config(
            "system identification needs a static system".into(),
        ));
    }
    let tau = config.f64("sid.tau")?;
    let depth = config.usize("sid.depth")?;
    let floor = config.f64("sid.order_floor")?;
    let mass = config.f64("sid.mass_fraction")?;
    let resolved = resolve_couplings_at(&p.system, &p.bath, p.times[0])?;
    let solver = if p.oracle { None } else { Some(&p.kinds[0]) };
    let set = probe_responses(&resolved, &p.bath, tau, 2 * depth + 2, p.n_modes, solver)?;
    let mut w = create(out_dir, "responses.csv")?;
    write_response_set_csv(&mut w, &set)?;
    let model = identify_responses(&set, depth, OrderRule::Tolerance(floor))?;
    let mut w = create(out_dir, "sid.txt")?;
    write_sid_summary(&mut w, &model)?;
    Ok(vec![
        ("result.order".to_string(), format!("{}", model.order)),
        (
            "result.dimension_mass".to_string(),
            format!(
                "{}",
                effective_dimension(&model, DimensionCriterion::EigenvalueMass(mass))
            ),
        ),
    ])
}

/// Average a jump-unraveling ensemble and compare it against the
/// deterministic solution of the first requested solver.
fn run_trajectories(p: &Prepared, config: &Config, out_dir: &Path) -> Result<SummaryRows> {
    if p.system.is_time_dependent() {
        return Err(Error::Config(
            "trajectory ensembles need a static system".into(),
        ));
    }
    let traj = TrajectoryConfig {
        n_trajectories: config.usize("trajectories.n")?,
        dt: config.f64("trajectories.dt")?,
        seed: config.u64("trajectories.seed")?,
        ..TrajectoryConfig::default()
    };
    let resolved = resolve_couplings_at(&p.system, &p.bath, p.times[0])?;
    let rates = build_rate_table_closed(&resolved, &p.bath)?;
    let ensemble = run_ensemble(&resolved, &rates, &p.psi0, &p.times, &traj)?;
    let mut w = create(out_dir, "ensemble.csv")?;
    write_ensemble_csv(&mut w, &ensemble, &traj)?;

    let runs = solve_all(p, &resolved, &p.kinds[..1])?;
    write_run(out_dir, &runs[0])?;
    let errors = errors_against(
        &runs,
        &ensemble.average,
        &format!("ensemble_{}", ensemble.n_trajectories),
        &p.elements,
    )?;
    let mut rows: SummaryRows = vec![
        (
            "result.n_trajectories".to_string(),
            format!("{}", ensemble.n_trajectories),
        ),
        (
            "result.total_jumps".to_string(),
            format!("{}", ensemble.total_jumps),
        ),
        (
            "result.max_step_jump_probability".to_string(),
            format!("{}", ensemble.max_step_jump_probability),
        ),
        (
            "result.step_warning".to_string(),
            format!("{}", ensemble.step_warning()),
        ),
    ];
    for e in &errors {
        rows.push((
            format!("result.error.{}.vs.{}.time_average", e.a, e.b),
            format!("{}", e.metric.time_average),
        ));
    }
    Ok(rows)
}

/// Tune per-transition damping factors (and shifts) of the first
/// requested solver against the exact reference.
fn run_fit(p: &Prepared, out_dir: &Path) -> Result<SummaryRows> {
    if !p.oracle {
        return Err(Error::Config(
            "rate fitting needs the exact reference (run.oracle = true)".into(),
        ));
    }
    if p.system.is_time_dependent() {
        return Err(Error::Config("rate fitting needs a static system".into()));
    }
    let resolved = resolve_couplings_at(&p.system, &p.bath, p.times[0])?;
    let rates = if matches!(p.kinds[0], GeneratorKind::Degenerate) {
        let anchor = resolved.transition_frequencies()[0];
        build_rate_table_anchored(&resolved, &p.bath, anchor)?
    } else {
        build_rate_table_closed(&resolved, &p.bath)?
    };
    let exact = exact_reference(&resolved, &p.bath, &p.psi0, &p.times, p.n_modes)?;
    let mut w = create(out_dir, "exact.csv")?;
    writeln!(w, "# solver = exact")?;
    write_evolution_csv(&mut w, &exact)?;
    drop(w);

    let rho0 = pure_density(&p.psi0);
    // Steep-slope fits move far from the analytic rates and converge
    // slowly along coupled coordinates; give the descent room.
    let options = FitOptions {
        max_sweeps: 60,
        ..FitOptions::default()
    };
    let fit = fit_rates(
        &resolved,
        &rates,
        &p.kinds[0],
        &rho0,
        &p.times,
        &exact,
        &p.elements,
        options,
    )?;
    let mut w = create(out_dir, "rates.csv")?;
    write_rate_table_csv(&mut w, &rates)?;
    let mut w = create(out_dir, "rates_fitted.csv")?;
    write_rate_table_csv(&mut w, &fit.table)?;

    let join = |xs: &[f64]| {
        xs.iter()
            .map(|x| format!("{x}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    Ok(vec![
        (
            "result.solver".to_string(),
            kind_label(&p.kinds[0]),
        ),
        (
            "result.nominal_error".to_string(),
            format!("{}", fit.initial_error.time_average),
        ),
        (
            "result.fitted_error".to_string(),
            format!("{}", fit.error.time_average),
        ),
        ("result.gamma_factors".to_string(), join(&fit.gamma_factors)),
        ("result.lamb_factors".to_string(), join(&fit.lamb_factors)),
    ])
}

/// Uniform grid with `samples` intervals on [0, t_max].
fn time_grid(t_max: f64, samples: usize) -> Result<Vec<f64>> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::Config("run.t_max must be positive".into()));
    }
    if samples < 2 {
        return Err(Error::Config("run.samples must be at least 2".into()));
    }
    Ok((0..=samples)
        .map(|i| t_max * i as f64 / samples as f64)
        .collect())
}

fn ohmic_bath(config: &Config) -> Result<BathSpec> {
    BathSpec::new(
        Spectrum::Ohmic {
            cutoff: config.f64("bath.cutoff")?,
        },
        config.f64("bath.temperature")?,
    )
}

fn solver_kinds(config: &Config) -> Result<Vec<GeneratorKind>> {
    config
        .str_list("run.solvers")?
        .iter()
        .map(|label| kind_from_label(label))
        .collect()
}

fn normalized(amplitudes: Vec<Complex64>) -> CVec {
    let v = CVec::from_vec(amplitudes);
    let n = v.norm();
    v / c(n)
}

/// The run/sid/trajectories vocabulary shared by every scenario that
/// uses the generic drivers.
fn run_keys(t_max: &str, samples: &str, solvers: &str) -> Vec<(&'static str, String)> {
    let traj = TrajectoryConfig::default();
    vec![
        ("run.t_max", t_max.to_string()),
        ("run.samples", samples.to_string()),
        ("run.solvers", solvers.to_string()),
        ("run.oracle", "true".to_string()),
        ("run.n_modes", "0".to_string()),
        ("sid.tau", format!("{DEFAULT_SAMPLING_INTERVAL}")),
        ("sid.depth", format!("{DEFAULT_HANKEL_DEPTH}")),
        ("sid.order_floor", "0.0008".to_string()),
        ("sid.mass_fraction", format!("{DEFAULT_MASS_FRACTION}")),
        ("trajectories.n", format!("{}", traj.n_trajectories)),
        ("trajectories.dt", format!("{}", traj.dt)),
        ("trajectories.seed", format!("{}", traj.seed)),
    ]
}

fn ohmic_keys() -> Vec<(&'static str, String)> {
    vec![
        ("bath.cutoff", format!("{}", 80.0 * PI)),
        ("bath.temperature", "0".to_string()),
    ]
}

fn config_from(
    mut specific: Vec<(&'static str, String)>,
    shared: Vec<(&'static str, String)>,
) -> Config {
    specific.extend(shared);
    let pairs: Vec<(&str, &str)> = specific.iter().map(|(k, v)| (*k, v.as_str())).collect();
    Config::from_pairs(&pairs)
}

/// Generic ingredients shared by the V-system scenarios: levels
/// [0, omega1, omega1 + detuning] with lowering operators |0><1| and
/// |0><2|.
fn prepare_v(config: &Config) -> Result<Prepared> {
    let omega1 = config.f64("system.omega1")?;
    let detuning = config.f64("system.detuning")?;
    let system = SystemSpec::new(
        vec![0.0, omega1, omega1 + detuning],
        vec![
            Transition::new(0, 1, Coupling::TargetGamma(config.f64("system.gamma1")?)),
            Transition::new(0, 2, Coupling::TargetGamma(config.f64("system.gamma2")?)),
        ],
    )?;
    let s = 1.0 / 2.0_f64.sqrt();
    let elements = sector_elements(&system)?;
    Ok(Prepared {
        system,
        bath: ohmic_bath(config)?,
        psi0: normalized(vec![c(0.0), c(s), c(s)]),
        times: time_grid(config.f64("run.t_max")?, config.usize("run.samples")?)?,
        elements,
        kinds: solver_kinds(config)?,
        oracle: config.bool("run.oracle")?,
        n_modes: config.n_modes("run.n_modes")?,
    })
}

fn v_defaults(detuning: f64, samples: &str, solvers: &str) -> Config {
    let mut keys = run_keys("30", samples, solvers);
    keys.extend(ohmic_keys());
    config_from(
        vec![
            ("system.omega1", format!("{}", 10.0 * PI)),
            ("system.detuning", format!("{detuning}")),
            ("system.gamma1", "0.1".to_string()),
            ("system.gamma2", "0.05".to_string()),
        ],
        keys,
    )
}

fn prepare_trident(config: &Config) -> Result<Prepared> {
    let omega1 = config.f64("system.omega1")?;
    let gammas = [
        config.f64("system.gamma1")?,
        config.f64("system.gamma2")?,
        config.f64("system.gamma3")?,
    ];
    // Upper level j sits at omega1 + gamma2/(j-1) for j = 2, 3.
    let energies = vec![0.0, omega1, omega1 + gammas[1], omega1 + 0.5 * gammas[1]];
    let transitions = (0..3)
        .map(|j| Transition::new(0, j + 1, Coupling::TargetGamma(gammas[j])))
        .collect();
    let system = SystemSpec::new(energies, transitions)?;
    let elements = sector_elements(&system)?;
    Ok(Prepared {
        system,
        bath: ohmic_bath(config)?,
        psi0: normalized(vec![c(0.0), Complex64::new(0.0, 7.0), c(3.0), c(0.0)]),
        times: time_grid(config.f64("run.t_max")?, config.usize("run.samples")?)?,
        elements,
        kinds: solver_kinds(config)?,
        oracle: config.bool("run.oracle")?,
        n_modes: config.n_modes("run.n_modes")?,
    })
}

/// Two co-located qubits, basis [|00>, |10>, |01>, |11>]: each qubit's
/// lowering operator is the coherent sum of its two elementary
/// transitions, which share a frequency and therefore a resolved
/// coupling.
fn prepare_two_qubits(config: &Config) -> Result<Prepared> {
    let omega1 = config.f64("system.omega1")?;
    let omega2 = omega1 + config.f64("system.splitting")?;
    let gamma = config.f64("system.gamma")?;
    let system = SystemSpec::new(
        vec![0.0, omega1, omega2, omega1 + omega2],
        vec![
            Transition::new(0, 1, Coupling::TargetGamma(gamma)),
            Transition::new(2, 3, Coupling::TargetGamma(gamma)),
            Transition::new(0, 2, Coupling::TargetGamma(gamma)),
            Transition::new(1, 3, Coupling::TargetGamma(gamma)),
        ],
    )?;
    let elements = sector_elements(&system)?;
    Ok(Prepared {
        system,
        bath: ohmic_bath(config)?,
        psi0: normalized(vec![c(0.0), Complex64::new(0.0, 1.0), c(1.0), c(0.0)]),
        times: time_grid(config.f64("run.t_max")?, config.usize("run.samples")?)?,
        elements,
        kinds: solver_kinds(config)?,
        oracle: config.bool("run.oracle")?,
        n_modes: config.n_modes("run.n_modes")?,
    })
}

fn steep_bath_from(config: &Config) -> Result<BathSpec> {
    let omega0 = config.f64("system.omega0")?;
    let half_width = config.f64("bath.half_width")?;
    BathSpec::zero_temperature(Spectrum::PiecewiseLinear {
        cutoff: config.f64("bath.cutoff")?,
        r: config.f64("bath.r")?,
        seg_lo: omega0 - half_width,
        seg_hi: omega0 + half_width,
    })
}

fn prepare_slope_two_level(config: &Config) -> Result<Prepared> {
    let system = SystemSpec::new(
        vec![0.0, config.f64("system.omega0")?],
        vec![Transition::new(
            0,
            1,
            Coupling::TargetGamma(config.f64("system.gamma")?),
        )],
    )?;
    let elements = sector_elements(&system)?;
    Ok(Prepared {
        system,
        bath: steep_bath_from(config)?,
        psi0: CVec::from_vec(vec![c(0.0), c(1.0)]),
        times: time_grid(config.f64("run.t_max")?, config.usize("run.samples")?)?,
        elements,
        kinds: solver_kinds(config)?,
        oracle: config.bool("run.oracle")?,
        n_modes: config.n_modes("run.n_modes")?,
    })
}

fn prepare_slope_v(config: &Config) -> Result<Prepared> {
    let omega0 = config.f64("system.omega0")?;
    let splitting = config.f64("system.splitting")?;
    let gamma = config.f64("system.gamma")?;
    let system = SystemSpec::new(
        vec![0.0, omega0 - 0.5 * splitting, omega0 + 0.5 * splitting],
        vec![
            Transition::new(0, 1, Coupling::TargetGamma(gamma)),
            Transition::new(0, 2, Coupling::TargetGamma(gamma)),
        ],
    )?;
    let elements = sector_elements(&system)?;
    Ok(Prepared {
        system,
        bath: steep_bath_from(config)?,
        psi0: CVec::from_vec(vec![c(0.0), c(0.0), c(1.0)]),
        times: time_grid(config.f64("run.t_max")?, config.usize("run.samples")?)?,
        elements,
        kinds: solver_kinds(config)?,
        oracle: config.bool("run.oracle")?,
        n_modes: config.n_modes("run.n_modes")?,
    })
}

/// Piecewise detuning drive of the dark-state studies. `step` selects
/// the plateau profile, otherwise the detuning ramps linearly after a
/// quarter of the run.
fn dark_detuning(step: bool, t_max: f64) -> impl Fn(f64) -> f64 + Send + Sync {
    move |t: f64| {
        if step {
            if t > 0.25 * t_max && t < 0.75 * t_max {
                0.5 * PI
            } else {
                0.0
            }
        } else if t > 0.25 * t_max {
            (PI / 64.0) * (t - 0.25 * t_max)
        } else {
            0.0
        }
    }
}

fn prepare_dark(config: &Config, step: bool) -> Result<Prepared> {
    let omega1 = config.f64("system.omega1")?;
    let gamma = config.f64("system.gamma")?;
    let t_max = config.f64("run.t_max")?;
    let drive = dark_detuning(step, t_max);
    let system = SystemSpec::new(
        vec![0.0, omega1, omega1],
        vec![
            Transition::new(0, 1, Coupling::TargetGamma(gamma)),
            Transition::new(0, 2, Coupling::TargetGamma(gamma)),
        ],
    )?
    .with_energy_hook(Arc::new(move |t| vec![0.0, omega1, omega1 + drive(t)]));
    let s = 1.0 / 2.0_f64.sqrt();
    let elements = sector_elements(&system)?;
    Ok(Prepared {
        system,
        bath: ohmic_bath(config)?,
        psi0: normalized(vec![c(0.0), c(s), c(-s)]),
        times: time_grid(t_max, config.usize("run.samples")?)?,
        elements,
        kinds: solver_kinds(config)?,
        oracle: config.bool("run.oracle")?,
        n_modes: config.n_modes("run.n_modes")?,
    })
}

/// Four-level avoided crossing: [g1, g2, u1, u2], u2 fixed, u1 swept
/// sinusoidally through it, the upper levels directly coupled.
fn prepare_landau_zener(config: &Config) -> Result<Prepared> {
    let omega2 = config.f64("system.omega2")?;
    let delta0 = config.f64("system.delta0")?;
    let period = config.f64("system.period")?;
    let coupling = config.f64("system.coupling")?;
    let nu = 2.0 * PI / period;
    let mut h_extra = CMat::zeros(4, 4);
    h_extra[(2, 3)] = c(coupling);
    h_extra[(3, 2)] = c(coupling);
    let system = SystemSpec::new(
        vec![0.0, 0.0, omega2 - delta0, omega2],
        vec![
            Transition::new(0, 2, Coupling::TargetGamma(config.f64("system.gamma1")?)),
            Transition::new(1, 3, Coupling::TargetGamma(config.f64("system.gamma2")?)),
        ],
    )?
    .with_h_extra(h_extra)?
    .with_energy_hook(Arc::new(move |t| {
        vec![0.0, 0.0, omega2 - delta0 * (nu * t).cos(), omega2]
    }));
    let elements = sector_elements(&system)?;
    Ok(Prepared {
        system,
        bath: ohmic_bath(config)?,
        psi0: CVec::from_vec(vec![c(0.0), c(0.0), c(1.0), c(0.0)]),
        times: time_grid(config.f64("run.t_max")?, config.usize("run.samples")?)?,
        elements,
        kinds: solver_kinds(config)?,
        oracle: config.bool("run.oracle")?,
        n_modes: config.n_modes("run.n_modes")?,
    })
}

fn prepare_thermal(config: &Config) -> Result<Prepared> {
    let temperatures = config.f64_list("bath.temperatures")?;
    let system = SystemSpec::new(
        vec![0.0, config.f64("system.omega")?],
        vec![Transition::new(
            0,
            1,
            Coupling::TargetGamma(config.f64("system.gamma")?),
        )],
    )?;
    let elements = sector_elements(&system)?;
    Ok(Prepared {
        system,
        bath: BathSpec::new(
            Spectrum::Ohmic {
                cutoff: config.f64("bath.cutoff")?,
            },
            temperatures[0],
        )?,
        psi0: CVec::from_vec(vec![c(0.0), c(1.0)]),
        times: time_grid(config.f64("run.t_max")?, config.usize("run.samples")?)?,
        elements,
        kinds: solver_kinds(config)?,
        oracle: config.bool("run.oracle")?,
        n_modes: config.n_modes("run.n_modes")?,
    })
}

/// Excited-block observables and a probe basis spanning them: one pure
/// state per excited level plus two superpositions per pair, so the
/// probe matrix in these coordinates is invertible by construction.
fn excited_block(system: &SystemSpec) -> Result<(Vec<CVec>, Vec<Element>)> {
    let grades = level_grades(system)?;
    let excited: Vec<usize> = (0..system.energies.len()).filter(|&n| grades[n] == 1).collect();
    if excited.is_empty() {
        return Err(Error::Config("no excited levels to identify".into()));
    }
    let dim = system.energies.len();
    let s = 1.0 / 2.0_f64.sqrt();
    let mut probes = Vec::new();
    let mut elements = Vec::new();
    for &j in &excited {
        let mut pure = CVec::zeros(dim);
        pure[j] = c(1.0);
        probes.push(pure);
        elements.push(Element::Pop(j));
    }
    for (a, &j) in excited.iter().enumerate() {
        for &k in &excited[a + 1..] {
            let mut plus = CVec::zeros(dim);
            plus[j] = c(s);
            plus[k] = c(s);
            probes.push(plus);
            let mut quad = CVec::zeros(dim);
            quad[j] = c(s);
            quad[k] = s * Complex64::i();
            probes.push(quad);
            elements.push(Element::ReCoh(j, k));
            elements.push(Element::ImCoh(j, k));
        }
    }
    Ok((probes, elements))
}

/// Strobed probe evolutions of the excited block: the exact reference
/// when `solver` is None, otherwise the named generator.
fn probe_responses(
    system: &SystemSpec,
    bath: &BathSpec,
    tau: f64,
    n_maps: usize,
    n_modes: Option<usize>,
    solver: Option<&GeneratorKind>,
) -> Result<ResponseSet> {
    let times: Vec<f64> = (0..n_maps).map(|k| k as f64 * tau).collect();
    let (probes, elements) = excited_block(system)?;
    let runs = match solver {
        None => exec::map_indexed(probes.len(), |i| {
            exact_reference(system, bath, &probes[i], &times, n_modes)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?,
        Some(kind) => probes
            .iter()
            .map(|probe| {
                let mut runs =
                    solve_static(system, bath, &[kind.clone()], &pure_density(probe), &times)?;
                Ok(runs.pop().expect("one run requested").result)
            })
            .collect::<Result<Vec<_>>>()?,
    };
    responses_from_evolutions(&runs, &elements)
}

/// Identify the dynamics behind the exact V-system evolution at each
/// detuning and report model order, dimension counts, and the
/// eigenvalue weight beyond the leading four.
fn run_v_sid(config: &Config, out_dir: &Path) -> Result<SummaryRows> {
    let omega_mean = config.f64("system.omega_mean")?;
    let gammas = (config.f64("system.gamma1")?, config.f64("system.gamma2")?);
    let detunings = config.f64_list("system.detunings")?;
    let bath = ohmic_bath(config)?;
    let tau = config.f64("sid.tau")?;
    let depth = config.usize("sid.depth")?;
    let floor = config.f64("sid.order_floor")?;
    let mass = config.f64("sid.mass_fraction")?;
    let n_modes = config.n_modes("run.n_modes")?;
    let mut rows: SummaryRows = Vec::new();
    for (i, &detuning) in detunings.iter().enumerate() {
        let system = SystemSpec::new(
            vec![
                0.0,
                omega_mean - 0.5 * detuning,
                omega_mean + 0.5 * detuning,
            ],
            vec![
                Transition::new(0, 1, Coupling::TargetGamma(gammas.0)),
                Transition::new(0, 2, Coupling::TargetGamma(gammas.1)),
            ],
        )?;
        let resolved = resolve_couplings_at(&system, &bath, 0.0)?;
        let set = probe_responses(&resolved, &bath, tau, 2 * depth + 2, n_modes, None)?;
        let mut w = create(out_dir, &format!("responses_{i}.csv"))?;
        write_response_set_csv(&mut w, &set)?;
        let model = identify_responses(&set, depth, OrderRule::Tolerance(floor))?;
        let mut w = create(out_dir, &format!("sid_{i}.txt"))?;
        write_sid_summary(&mut w, &model)?;
        let magnitudes: Vec<f64> = model.map_eigenvalues().iter().map(|l| l.norm()).collect();
        let total: f64 = magnitudes.iter().sum();
        let tail: f64 = magnitudes.iter().skip(4).sum();
        rows.push((format!("result.detuning_{i}"), format!("{detuning}")));
        rows.push((format!("result.order_{i}"), format!("{}", model.order)));
        rows.push((
            format!("result.dimension_mass_{i}"),
            format!(
                "{}",
                effective_dimension(&model, DimensionCriterion::EigenvalueMass(mass))
            ),
        ));
        rows.push((
            format!("result.eigenvalue_tail_fraction_{i}"),
            format!("{}", if total > 0.0 { tail / total } else { 0.0 }),
        ));
    }
    Ok(rows)
}

/// Dimension table and deviation sweep of the steep-slope study.
fn run_slope_table(config: &Config, out_dir: &Path) -> Result<SummaryRows> {
    let parse_exponents = |key: &str| -> Result<Vec<u32>> {
        config
            .str_list(key)?
            .iter()
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::Config(format!("key '{key}': '{s}' is not an exponent")))
            })
            .collect()
    };
    let exponents = parse_exponents("study.exponents")?;
    let deviation_exponents = parse_exponents("study.deviation_exponents")?;
    let params = SidStudyParams {
        tau: config.f64("study.tau")?,
        depth: config.usize("study.depth")?,
        mass_fraction: config.f64("study.mass_fraction")?,
        order_floor: config.f64("study.order_floor")?,
        n_modes: config.n_modes("study.n_modes")?,
    };
    let table = dimension_table(&exponents, &params)?;
    let mut w = create(out_dir, "dimension_table.csv")?;
    writeln!(w, "r,two_level,v")?;
    for row in &table {
        writeln!(w, "{},{},{}", row.r, row.two_level, row.v)?;
    }
    drop(w);

    let deviations = deviation_sweep(
        &deviation_exponents,
        config.f64("run.t_max")?,
        config.usize("run.samples")?,
        params.n_modes,
    )?;
    let mut w = create(out_dir, "deviations.csv")?;
    writeln!(w, "r,deviation")?;
    for (r, dev) in &deviations {
        writeln!(w, "{r},{dev}")?;
    }
    drop(w);

    let mut rows: SummaryRows = vec![("result.rows".to_string(), format!("{}", table.len()))];
    for row in &table {
        rows.push((
            format!("result.dimension.r_{}", row.r),
            format!("{},{}", row.two_level, row.v),
        ));
    }
    for (r, dev) in &deviations {
        rows.push((format!("result.deviation.r_{r}"), format!("{dev}")));
    }
    Ok(rows)
}

/// Thermal fixed point: steady states across a temperature grid plus
/// one relaxation evolution at the first temperature.
fn run_thermal(config: &Config, out_dir: &Path) -> Result<SummaryRows> {
    let omega = config.f64("system.omega")?;
    let temperatures = config.f64_list("bath.temperatures")?;
    let prepared = prepare_thermal(config)?;
    let mut w = create(out_dir, "steady_states.csv")?;
    writeln!(
        w,
        "temperature,occupation,rho_ee,rho_gg,ratio,expected,residual"
    )?;
    let mut worst: f64 = 0.0;
    for &t_bath in &temperatures {
        let bath = BathSpec::new(
            Spectrum::Ohmic {
                cutoff: config.f64("bath.cutoff")?,
            },
            t_bath,
        )?;
        let resolved = resolve_couplings_at(&prepared.system, &bath, 0.0)?;
        let rates = build_rate_table_closed(&resolved, &bath)?;
        let generator = build_generator(&resolved, &rates, &GeneratorKind::LindbladAllRegimes)?;
        let steady = steady_state(&generator)?;
        let (ee, gg) = (steady[(1, 1)].re, steady[(0, 0)].re);
        let ratio = ee / gg;
        let expected = (-omega / t_bath).exp();
        let residual = ratio - expected;
        worst = worst.max(residual.abs());
        writeln!(
            w,
            "{t_bath},{},{ee},{gg},{ratio},{expected},{residual}",
            thermal_occupation(omega, t_bath)?
        )?;
    }
    drop(w);

    let mut rows = compare_prepared(&prepared, out_dir)?;
    rows.push((
        "result.max_detailed_balance_residual".to_string(),
        format!("{worst}"),
    ));
    Ok(rows)
}

fn slope_run_keys(solvers: &str) -> Vec<(&'static str, String)> {
    let mut keys = vec![
        ("system.omega0", format!("{}", 10.0 * PI)),
        ("bath.half_width", "1".to_string()),
        ("bath.r", "128".to_string()),
        ("bath.cutoff", format!("{}", 80.0 * PI)),
    ];
    keys.extend(run_keys("30", "300", solvers));
    keys
}

/// The built-in studies. Names are unique; each runs end to end with
/// its defaults.
pub fn builtin_scenarios() -> &'static [Scenario] {
    &[
        Scenario {
            name: "v-near-degenerate",
            summary: "V system at a detuning of four linewidths: the \
                      all-regimes solution against the exact reference, with \
                      the nondegenerate and Bloch-Redfield solutions for \
                      contrast",
            defaults: || v_defaults(0.4, "300", "all-regimes,nondegenerate,bloch-redfield"),
            prepare: prepare_v,
            special: None,
        },
        Scenario {
            name: "v-wiggles",
            summary: "V system at a detuning of a hundred linewidths: \
                      population oscillations that the nondegenerate solver \
                      misses",
            defaults: || v_defaults(10.0, "600", "all-regimes,nondegenerate"),
            prepare: prepare_v,
            special: None,
        },
        Scenario {
            name: "v-sid",
            summary: "identify the dynamics behind the exact V-system \
                      evolution across a detuning sweep and count the \
                      dynamical variables",
            defaults: || {
                config_from(
                    vec![
                        ("system.omega_mean", format!("{}", 3.0 * PI)),
                        ("system.gamma1", "0.1".to_string()),
                        ("system.gamma2", "0.05".to_string()),
                        (
                            "system.detunings",
                            format!(
                                "0,{},{},{}",
                                0.28 * PI * 0.1,
                                2.0 * PI * 0.1,
                                4.8 * PI * 0.1
                            ),
                        ),
                        ("sid.tau", format!("{DEFAULT_SAMPLING_INTERVAL}")),
                        ("sid.depth", format!("{DEFAULT_HANKEL_DEPTH}")),
                        ("sid.order_floor", "0.0008".to_string()),
                        ("sid.mass_fraction", format!("{DEFAULT_MASS_FRACTION}")),
                        ("run.n_modes", "0".to_string()),
                    ],
                    ohmic_keys(),
                )
            },
            prepare: |config| {
                let first = config.f64_list("system.detunings")?[0];
                let mut v = Config::default();
                v.set(
                    "system.omega1",
                    &format!("{}", config.f64("system.omega_mean")? - 0.5 * first),
                );
                v.set("system.detuning", &format!("{first}"));
                v.set("system.gamma1", config.require("system.gamma1")?);
                v.set("system.gamma2", config.require("system.gamma2")?);
                v.set("bath.cutoff", config.require("bath.cutoff")?);
                v.set("bath.temperature", config.require("bath.temperature")?);
                v.set("run.t_max", "8.5");
                v.set("run.samples", "34");
                v.set("run.solvers", "all-regimes");
                v.set("run.oracle", "true");
                v.set("run.n_modes", config.require("run.n_modes")?);
                prepare_v(&v)
            },
            special: Some(run_v_sid),
        },
        Scenario {
            name: "trident",
            summary: "three near-degenerate transitions sharing a ground \
                      level, compared against the exact reference",
            defaults: || {
                let mut keys = run_keys("30", "300", "all-regimes");
                keys.extend(ohmic_keys());
                config_from(
                    vec![
                        ("system.omega1", format!("{}", 10.0 * PI)),
                        ("system.gamma1", "0.1".to_string()),
                        ("system.gamma2", "0.075".to_string()),
                        ("system.gamma3", "0.05".to_string()),
                    ],
                    keys,
                )
            },
            prepare: prepare_trident,
            special: None,
        },
        Scenario {
            name: "two-qubits",
            summary: "two co-located qubits with slightly split \
                      frequencies decaying into a shared bath, from a \
                      single-excitation entangled state",
            defaults: || {
                let mut keys = run_keys("30", "300", "all-regimes");
                keys.extend(ohmic_keys());
                config_from(
                    vec![
                        ("system.omega1", format!("{}", 10.0 * PI)),
                        ("system.splitting", "0.2".to_string()),
                        ("system.gamma", "0.1".to_string()),
                    ],
                    keys,
                )
            },
            prepare: prepare_two_qubits,
            special: None,
        },
        Scenario {
            name: "slope-2level",
            summary: "two-level decay on a steep spectral slope: exact \
                      against all-regimes and Bloch-Redfield",
            defaults: || {
                config_from(
                    vec![("system.gamma", format!("{SLOPE_GAMMA_TWO_LEVEL}"))],
                    slope_run_keys("all-regimes,bloch-redfield"),
                )
            },
            prepare: prepare_slope_two_level,
            special: None,
        },
        Scenario {
            name: "slope-v",
            summary: "V system on a steep spectral slope from the upper \
                      level: exact against all-regimes and Bloch-Redfield \
                      (fit the rates with the fit command)",
            defaults: || {
                config_from(
                    vec![
                        ("system.splitting", format!("{SLOPE_GAMMA_TWO_LEVEL}")),
                        ("system.gamma", format!("{SLOPE_GAMMA_V}")),
                    ],
                    slope_run_keys("all-regimes,bloch-redfield"),
                )
            },
            prepare: prepare_slope_v,
            special: None,
        },
        Scenario {
            name: "slope-table",
            summary: "effective-dimension table and non-exponentiality \
                      sweep over spectral slopes r = 2^e",
            defaults: || {
                let p = SidStudyParams::default();
                config_from(
                    vec![
                        (
                            "study.exponents",
                            (0..14).map(|e| e.to_string()).collect::<Vec<_>>().join(","),
                        ),
                        (
                            "study.deviation_exponents",
                            (0..9).map(|e| e.to_string()).collect::<Vec<_>>().join(","),
                        ),
                        ("study.tau", format!("{}", p.tau)),
                        ("study.depth", format!("{}", p.depth)),
                        ("study.mass_fraction", format!("{}", p.mass_fraction)),
                        ("study.order_floor", format!("{}", p.order_floor)),
                        ("study.n_modes", "0".to_string()),
                        ("run.t_max", "30".to_string()),
                        ("run.samples", "120".to_string()),
                    ],
                    vec![],
                )
            },
            prepare: |config| {
                let mut two_level = Config::default();
                two_level.set("system.omega0", &format!("{}", 10.0 * PI));
                two_level.set("system.gamma", &format!("{SLOPE_GAMMA_TWO_LEVEL}"));
                two_level.set("bath.half_width", "1");
                two_level.set("bath.r", "128");
                two_level.set("bath.cutoff", &format!("{}", 80.0 * PI));
                two_level.set("run.t_max", config.require("run.t_max")?);
                two_level.set("run.samples", config.require("run.samples")?);
                two_level.set("run.solvers", "all-regimes");
                two_level.set("run.oracle", "true");
                two_level.set("run.n_modes", config.require("study.n_modes")?);
                prepare_slope_two_level(&two_level)
            },
            special: Some(run_slope_table),
        },
        Scenario {
            name: "dark-f1",
            summary: "dark-state V system whose detuning ramps up \
                      gradually after a quarter of the run",
            defaults: || {
                let mut keys = run_keys("8", "400", "all-regimes");
                keys.extend(ohmic_keys());
                config_from(
                    vec![
                        ("system.omega1", format!("{}", 3.0 * PI)),
                        ("system.gamma", "0.1".to_string()),
                    ],
                    keys,
                )
            },
            prepare: |config| prepare_dark(config, false),
            special: None,
        },
        Scenario {
            name: "dark-f2",
            summary: "dark-state V system whose detuning steps to a \
                      plateau and back",
            defaults: || {
                let mut keys = run_keys("8", "400", "all-regimes");
                keys.extend(ohmic_keys());
                config_from(
                    vec![
                        ("system.omega1", format!("{}", 3.0 * PI)),
                        ("system.gamma", "0.1".to_string()),
                    ],
                    keys,
                )
            },
            prepare: |config| prepare_dark(config, true),
            special: None,
        },
        Scenario {
            name: "landau-zener",
            summary: "four-level avoided crossing [g1, g2, u1, u2]: the \
                      swept upper level u1 crosses u2 while both decay to \
                      distinct lower levels",
            defaults: || {
                let mut keys = run_keys("32", "640", "all-regimes");
                keys.extend(ohmic_keys());
                config_from(
                    vec![
                        ("system.omega2", format!("{}", 2.0 * PI)),
                        ("system.delta0", format!("{}", 0.5 * PI)),
                        ("system.period", "64".to_string()),
                        ("system.coupling", "0.2".to_string()),
                        ("system.gamma1", "0.025".to_string()),
                        ("system.gamma2", "0.05".to_string()),
                    ],
                    keys,
                )
            },
            prepare: prepare_landau_zener,
            special: None,
        },
        Scenario {
            name: "thermal-2level",
            summary: "two-level system in a warm bath: relaxation plus \
                      steady states across a temperature grid checked \
                      against detailed balance",
            defaults: || {
                let mut keys = run_keys("40", "200", "all-regimes");
                keys.push(("bath.cutoff", format!("{}", 80.0 * PI)));
                let mut config = config_from(
                    vec![
                        ("system.omega", format!("{}", 10.0 * PI)),
                        ("system.gamma", "0.1".to_string()),
                        ("bath.temperatures", "20,40,80,160,320".to_string()),
                    ],
                    keys,
                );
                // The exact reference is zero-temperature only.
                config.set("run.oracle", "false");
                config
            },
            prepare: prepare_thermal,
            special: Some(run_thermal),
        },
    ]
}

/// Look a scenario up by name.
pub fn find_scenario(name: &str) -> Result<&'static Scenario> {
    builtin_scenarios()
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown scenario '{name}'; available: {}",
                builtin_scenarios()
                    .iter()
                    .map(|s| s.name)
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })
}

/// Print the resolved rate table of a prepared scenario.
pub fn write_rates<W: Write>(w: &mut W, p: &Prepared) -> Result<()> {
    let resolved = resolve_couplings_at(&p.system, &p.bath, p.times[0])?;
    let rates = build_rate_table_closed(&resolved, &p.bath)?;
    write_rate_table_csv(w, &rates)
}
