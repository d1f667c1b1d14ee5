//! Plain-text serialization: CSV for time series and tables, a matrix
//! text format for superoperators, and key = value summaries.
//!
//! All writers print floats with Rust's shortest-roundtrip formatting,
//! so write/read cycles reproduce values bit for bit. Readers skip blank
//! lines and `#` comments.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::bath::{RateTable, Spectrum};
use crate::error::{Error, Result};
use crate::linalg::{CMat, RMat};
use crate::operators::Superoperator;
use crate::oracle::DiscretizedBath;
use crate::propagation::EvolutionResult;
use crate::sysid::{ResponseSet, SIDModel};
use crate::trajectories::{EnsembleRun, TrajectoryConfig};

fn parse_f64(token: &str, line: usize) -> Result<f64> {
    token
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: expected a number, got {token:?}")))
}

fn parse_usize(token: &str, line: usize) -> Result<usize> {
    token
        .trim()
        .parse::<usize>()
        .map_err(|_| Error::Parse(format!("line {line}: expected an integer, got {token:?}")))
}

/// Numbered content lines with blanks and `#` comments removed; comment
/// lines of the form `# key = value` are collected separately.
fn content_lines<R: BufRead>(reader: R) -> Result<(Vec<(usize, String)>, Vec<(String, String)>)> {
    let mut lines = Vec::new();
    let mut meta = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        lines.push((idx + 1, trimmed.to_string()));
    }
    Ok((lines, meta))
}

/// Header of the evolution CSV for a given system dimension.
pub fn evolution_header(dim: usize) -> String {
    let mut cols = vec!["time".to_string()];
    for i in 0..dim {
        for j in 0..dim {
            cols.push(format!("re_rho_{i}_{j}"));
            cols.push(format!("im_rho_{i}_{j}"));
        }
    }
    cols.push("min_eigenvalue".to_string());
    cols.push("trace".to_string());
    cols.join(",")
}

/// One row per sample: time, the density matrix row-major as Re/Im
/// pairs, its smallest eigenvalue, and its trace.
pub fn write_evolution_csv<W: Write>(w: &mut W, result: &EvolutionResult) -> Result<()> {
    if result.is_empty() {
        return Err(Error::Config("nothing to write: empty evolution".into()));
    }
    let dim = result.states[0].nrows();
    writeln!(w, "{}", evolution_header(dim))?;
    for (k, t) in result.times.iter().enumerate() {
        let mut fields = vec![format!("{t}")];
        let state = &result.states[k];
        for i in 0..dim {
            for j in 0..dim {
                fields.push(format!("{}", state[(i, j)].re));
                fields.push(format!("{}", state[(i, j)].im));
            }
        }
        fields.push(format!("{}", result.min_eigs[k]));
        fields.push(format!("{}", result.traces[k]));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn read_evolution_csv<R: BufRead>(reader: R) -> Result<EvolutionResult> {
    let (lines, _) = content_lines(reader)?;
    let mut rows = lines.into_iter();
    let (header_line, header) = rows
        .next()
        .ok_or_else(|| Error::Parse("empty evolution file".into()))?;
    let n_cols = header.split(',').count();
    if n_cols < 4 || (n_cols - 3) % 2 != 0 {
        return Err(Error::Parse(format!(
            "line {header_line}: {n_cols} columns do not fit time + Re/Im pairs + diagnostics"
        )));
    }
    let dim_sq = (n_cols - 3) / 2;
    let dim = (dim_sq as f64).sqrt().round() as usize;
    if dim * dim != dim_sq {
        return Err(Error::Parse(format!(
            "line {header_line}: {dim_sq} matrix entries are not a square count"
        )));
    }
    let mut result = EvolutionResult {
        times: Vec::new(),
        states: Vec::new(),
        min_eigs: Vec::new(),
        traces: Vec::new(),
    };
    for (line, row) in rows {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != n_cols {
            return Err(Error::Parse(format!(
                "line {line}: {} fields, expected {n_cols}",
                fields.len()
            )));
        }
        result.times.push(parse_f64(fields[0], line)?);
        let mut state = CMat::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                let base = 1 + 2 * (i * dim + j);
                state[(i, j)] = Complex64::new(
                    parse_f64(fields[base], line)?,
                    parse_f64(fields[base + 1], line)?,
                );
            }
        }
        result.states.push(state);
        result.min_eigs.push(parse_f64(fields[n_cols - 2], line)?);
        result.traces.push(parse_f64(fields[n_cols - 1], line)?);
    }
    if result.is_empty() {
        return Err(Error::Parse("evolution file has no data rows".into()));
    }
    Ok(result)
}

/// Ensemble average in the evolution CSV layout, preceded by run
/// metadata as `# key = value` comments.
pub fn write_ensemble_csv<W: Write>(
    w: &mut W,
    run: &EnsembleRun,
    config: &TrajectoryConfig,
) -> Result<()> {
    writeln!(w, "# seed = {}", config.seed)?;
    writeln!(w, "# n_trajectories = {}", run.n_trajectories)?;
    writeln!(w, "# dt = {}", config.dt)?;
    writeln!(w, "# total_jumps = {}", run.total_jumps)?;
    writeln!(
        w,
        "# max_step_jump_probability = {}",
        run.max_step_jump_probability
    )?;
    write_evolution_csv(w, &run.average)
}

/// Resolved per-transition rates in CSV form.
pub fn write_rate_table_csv<W: Write>(w: &mut W, rates: &RateTable) -> Result<()> {
    writeln!(w, "# temperature = {}", rates.temperature)?;
    writeln!(
        w,
        "transition,omega,gamma,lamb,thermal_lamb,occupation,phase,coupling"
    )?;
    for (j, row) in rates.rows.iter().enumerate() {
        writeln!(
            w,
            "{j},{},{},{},{},{},{},{}",
            row.omega,
            row.gamma,
            row.lamb,
            row.thermal_lamb,
            row.occupation,
            row.phase,
            row.coupling
        )?;
    }
    Ok(())
}

/// Discrete bath audit dump: one row per mode.
pub fn write_bath_modes_csv<W: Write>(w: &mut W, modes: &DiscretizedBath) -> Result<()> {
    writeln!(w, "# delta_omega = {}", modes.delta_omega)?;
    writeln!(w, "omega,coupling")?;
    for (omega, g) in modes.frequencies.iter().zip(&modes.couplings) {
        writeln!(w, "{omega},{g}")?;
    }
    Ok(())
}

/// Tabulated spectral density from two-column CSV (ω, J(ω)); the cutoff
/// is the last grid point. An optional header line is skipped.
pub fn read_tabulated_spectrum<R: BufRead>(reader: R) -> Result<Spectrum> {
    let (lines, _) = content_lines(reader)?;
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for (k, (line, row)) in lines.iter().enumerate() {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::Parse(format!(
                "line {line}: expected two columns, got {}",
                fields.len()
            )));
        }
        if k == 0 && fields[0].trim().parse::<f64>().is_err() {
            continue;
        }
        grid.push(parse_f64(fields[0], *line)?);
        values.push(parse_f64(fields[1], *line)?);
    }
    if grid.len() < 2 {
        return Err(Error::Parse(
            "tabulated spectrum needs at least two rows".into(),
        ));
    }
    let cutoff = *grid.last().unwrap();
    Ok(Spectrum::Tabulated {
        grid,
        values,
        cutoff,
    })
}

/// Matrix text format: a `dim <d>` header, then the d²×d² matrix one row
/// per line as whitespace-separated Re Im pairs.
pub fn write_superoperator<W: Write>(w: &mut W, op: &Superoperator) -> Result<()> {
    writeln!(w, "dim {}", op.dim())?;
    let n = op.mat.nrows();
    for i in 0..n {
        let mut fields = Vec::with_capacity(2 * n);
        for j in 0..n {
            fields.push(format!("{}", op.mat[(i, j)].re));
            fields.push(format!("{}", op.mat[(i, j)].im));
        }
        writeln!(w, "{}", fields.join(" "))?;
    }
    Ok(())
}

pub fn read_superoperator<R: BufRead>(reader: R) -> Result<Superoperator> {
    let (lines, _) = content_lines(reader)?;
    let mut rows = lines.into_iter();
    let (header_line, header) = rows
        .next()
        .ok_or_else(|| Error::Parse("empty superoperator file".into()))?;
    let dim = match header.split_whitespace().collect::<Vec<_>>()[..] {
        ["dim", d] => parse_usize(d, header_line)?,
        _ => {
            return Err(Error::Parse(format!(
                "line {header_line}: expected `dim <d>` header"
            )))
        }
    };
    let n = dim * dim;
    let mut mat = CMat::zeros(n, n);
    for i in 0..n {
        let (line, row) = rows
            .next()
            .ok_or_else(|| Error::Parse(format!("superoperator row {i} missing")))?;
        let fields: Vec<&str> = row.split_whitespace().collect();
        if fields.len() != 2 * n {
            return Err(Error::Parse(format!(
                "line {line}: {} numbers, expected {}",
                fields.len(),
                2 * n
            )));
        }
        for j in 0..n {
            mat[(i, j)] = Complex64::new(
                parse_f64(fields[2 * j], line)?,
                parse_f64(fields[2 * j + 1], line)?,
            );
        }
    }
    if rows.next().is_some() {
        return Err(Error::Parse("trailing rows after superoperator".into()));
    }
    Ok(Superoperator::new(dim, mat))
}

/// Long-form real matrix CSV with explicit shape metadata.
pub fn write_real_matrix_csv<W: Write>(w: &mut W, m: &RMat) -> Result<()> {
    writeln!(w, "# rows = {}", m.nrows())?;
    writeln!(w, "# cols = {}", m.ncols())?;
    writeln!(w, "row,col,value")?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            writeln!(w, "{i},{j},{}", m[(i, j)])?;
        }
    }
    Ok(())
}

pub fn read_real_matrix_csv<R: BufRead>(reader: R) -> Result<RMat> {
    let (lines, meta) = content_lines(reader)?;
    let shape = |key: &str| -> Result<usize> {
        meta.iter()
            .find(|(k, _)| k == key)
            .ok_or_else(|| Error::Parse(format!("missing `# {key} = ...` metadata")))
            .and_then(|(_, v)| parse_usize(v, 0))
    };
    let (rows, cols) = (shape("rows")?, shape("cols")?);
    let mut m = RMat::zeros(rows, cols);
    let mut seen = 0usize;
    for (line, row) in lines {
        if row.starts_with("row,") {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!(
                "line {line}: expected row,col,value"
            )));
        }
        let (i, j) = (parse_usize(fields[0], line)?, parse_usize(fields[1], line)?);
        if i >= rows || j >= cols {
            return Err(Error::Parse(format!(
                "line {line}: index ({i},{j}) outside {rows}x{cols}"
            )));
        }
        m[(i, j)] = parse_f64(fields[2], line)?;
        seen += 1;
    }
    if seen != rows * cols {
        return Err(Error::Parse(format!(
            "matrix has {seen} entries, expected {}",
            rows * cols
        )));
    }
    Ok(m)
}

/// Response maps in long form (map index, row, col, value) with the
/// sampling interval and shape as metadata.
pub fn write_response_set_csv<W: Write>(w: &mut W, set: &ResponseSet) -> Result<()> {
    writeln!(w, "# tau = {}", set.tau)?;
    writeln!(w, "# dim = {}", set.dim())?;
    writeln!(w, "# maps = {}", set.maps.len())?;
    writeln!(w, "map,row,col,value")?;
    for (k, m) in set.maps.iter().enumerate() {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                writeln!(w, "{k},{i},{j},{}", m[(i, j)])?;
            }
        }
    }
    Ok(())
}

pub fn read_response_set_csv<R: BufRead>(reader: R) -> Result<ResponseSet> {
    let (lines, meta) = content_lines(reader)?;
    let lookup = |key: &str| -> Result<&str> {
        meta.iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Parse(format!("missing `# {key} = ...` metadata")))
    };
    let tau = parse_f64(lookup("tau")?, 0)?;
    let dim = parse_usize(lookup("dim")?, 0)?;
    let n_maps = parse_usize(lookup("maps")?, 0)?;
    let mut maps = vec![RMat::zeros(dim, dim); n_maps];
    let mut seen = 0usize;
    for (line, row) in lines {
        if row.starts_with("map,") {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!(
                "line {line}: expected map,row,col,value"
            )));
        }
        let k = parse_usize(fields[0], line)?;
        let i = parse_usize(fields[1], line)?;
        let j = parse_usize(fields[2], line)?;
        if k >= n_maps || i >= dim || j >= dim {
            return Err(Error::Parse(format!(
                "line {line}: index ({k},{i},{j}) outside {n_maps} maps of {dim}x{dim}"
            )));
        }
        maps[k][(i, j)] = parse_f64(fields[3], line)?;
        seen += 1;
    }
    if seen != n_maps * dim * dim {
        return Err(Error::Parse(format!(
            "{seen} entries for {n_maps} maps of {dim}x{dim}"
        )));
    }
    ResponseSet::new(tau, maps)
}

/// Identified-model summary as `key = value` lines; vector-valued keys
/// are space-separated.
pub fn write_sid_summary<W: Write>(w: &mut W, model: &SIDModel) -> Result<()> {
    writeln!(w, "order = {}", model.order)?;
    writeln!(w, "tau = {}", model.tau)?;
    let eigs = model.map_eigenvalues();
    let radius = eigs.first().map(|e| e.norm()).unwrap_or(0.0);
    writeln!(w, "spectral_radius = {radius}")?;
    writeln!(w, "has_generator = {}", model.generator.is_some())?;
    let join = |it: &mut dyn Iterator<Item = String>| it.collect::<Vec<_>>().join(" ");
    writeln!(
        w,
        "singular_values = {}",
        join(&mut model.singular_values.iter().map(|s| format!("{s}")))
    )?;
    writeln!(
        w,
        "map_eigenvalues_re = {}",
        join(&mut eigs.iter().map(|e| format!("{}", e.re)))
    )?;
    writeln!(
        w,
        "map_eigenvalues_im = {}",
        join(&mut eigs.iter().map(|e| format!("{}", e.im)))
    )?;
    Ok(())
}

/// Plain `key = value` lines, used for parameter echoes and run
/// summaries.
pub fn write_kv<W: Write>(w: &mut W, pairs: &[(String, String)]) -> Result<()> {
    for (k, v) in pairs {
        writeln!(w, "{k} = {v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{build_rate_table, spectral_density, BathSpec};
    use crate::generators::build_lindblad_all_regimes;
    use crate::linalg::c;
    use crate::operators::pure_density;
    use crate::oracle::discretize_bath;
    use crate::propagation::propagate_fixed;
    use crate::system::{Coupling, SystemSpec, Transition};
    use crate::trajectories::run_ensemble;
    use approx::assert_relative_eq;

    fn two_level_run() -> EvolutionResult {
        let system = SystemSpec::new(
            vec![0.0, 2.0],
            vec![Transition::new(0, 1, Coupling::TargetGamma(0.4))],
        )
        .unwrap();
        let bath = BathSpec::zero_temperature(Spectrum::Flat {
            j0: 0.02,
            cutoff: 50.0,
        })
        .unwrap();
        let rates = build_rate_table(&system, &bath).unwrap();
        let l = build_lindblad_all_regimes(&system, &rates).unwrap();
        let psi = crate::linalg::CVec::from_vec(vec![c(0.6), c(0.8)]);
        let times: Vec<f64> = (0..6).map(|k| 0.5 * k as f64).collect();
        propagate_fixed(&l, &pure_density(&psi), &times).unwrap()
    }

    #[test]
    fn evolution_csv_roundtrip_is_exact() {
        let run = two_level_run();
        let mut buf = Vec::new();
        write_evolution_csv(&mut buf, &run).unwrap();
        let back = read_evolution_csv(buf.as_slice()).unwrap();
        assert_eq!(run.times, back.times);
        assert_eq!(run.min_eigs, back.min_eigs);
        assert_eq!(run.traces, back.traces);
        for (a, b) in run.states.iter().zip(&back.states) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ensemble_csv_carries_metadata() {
        let system = SystemSpec::new(
            vec![0.0, 2.0],
            vec![Transition::new(0, 1, Coupling::TargetGamma(0.4))],
        )
        .unwrap();
        let bath = BathSpec::zero_temperature(Spectrum::Flat {
            j0: 0.02,
            cutoff: 50.0,
        })
        .unwrap();
        let rates = build_rate_table(&system, &bath).unwrap();
        let psi = crate::linalg::CVec::from_vec(vec![c(0.0), c(1.0)]);
        let times: Vec<f64> = (0..4).map(|k| 0.25 * k as f64).collect();
        let config = TrajectoryConfig {
            n_trajectories: 8,
            seed: 77,
            ..Default::default()
        };
        let run = run_ensemble(&system, &rates, &psi, &times, &config).unwrap();
        let mut buf = Vec::new();
        write_ensemble_csv(&mut buf, &run, &config).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("# seed = 77"));
        assert!(text.contains("# n_trajectories = 8"));
        let back = read_evolution_csv(buf.as_slice()).unwrap();
        assert_eq!(back.times, run.average.times);
    }

    #[test]
    fn superoperator_roundtrip_is_exact() {
        let system = SystemSpec::new(
            vec![0.0, 2.0, 2.3],
            vec![
                Transition::new(0, 1, Coupling::TargetGamma(0.4)),
                Transition::new(0, 2, Coupling::TargetGamma(0.2)).with_phase(0.5),
            ],
        )
        .unwrap();
        let bath = BathSpec::zero_temperature(Spectrum::Flat {
            j0: 0.02,
            cutoff: 50.0,
        })
        .unwrap();
        let rates = build_rate_table(&system, &bath).unwrap();
        let l = build_lindblad_all_regimes(&system, &rates).unwrap();
        let mut buf = Vec::new();
        write_superoperator(&mut buf, &l).unwrap();
        let back = read_superoperator(buf.as_slice()).unwrap();
        assert_eq!(back.dim(), 3);
        assert_eq!(l.mat, back.mat);
        assert!(read_superoperator(b"dim x\n".as_slice()).is_err());
        assert!(read_superoperator(b"dim 2\n1 0\n".as_slice()).is_err());
    }

    #[test]
    fn tabulated_spectrum_reads_csv() {
        let text = "omega,j\n# a comment\n0,0\n1.0,0.5\n2.5,0.1\n";
        let spectrum = read_tabulated_spectrum(text.as_bytes()).unwrap();
        let bath = BathSpec::zero_temperature(spectrum).unwrap();
        assert_relative_eq!(bath.cutoff(), 2.5);
        assert_relative_eq!(spectral_density(&bath, 0.5).unwrap(), 0.25);
        assert!(read_tabulated_spectrum(b"0\n1\n".as_slice()).is_err());
        assert!(read_tabulated_spectrum(b"".as_slice()).is_err());
    }

    #[test]
    fn bath_modes_dump_lists_every_mode() {
        let bath = BathSpec::zero_temperature(Spectrum::Ohmic { cutoff: 10.0 }).unwrap();
        let modes = discretize_bath(&bath, 1.0, 16).unwrap();
        let mut buf = Vec::new();
        write_bath_modes_csv(&mut buf, &modes).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2 + 16);
        assert!(text.lines().nth(1).unwrap() == "omega,coupling");
    }

    #[test]
    fn response_set_roundtrip_and_matrix_roundtrip() {
        let maps: Vec<RMat> = (0..6)
            .map(|k| RMat::from_element(2, 2, 0.0) + RMat::identity(2, 2) * 0.8f64.powi(k))
            .collect();
        let set = ResponseSet::new(0.3, maps).unwrap();
        let mut buf = Vec::new();
        write_response_set_csv(&mut buf, &set).unwrap();
        let back = read_response_set_csv(buf.as_slice()).unwrap();
        assert_eq!(back.tau, set.tau);
        assert_eq!(back.maps, set.maps);

        let m = RMat::from_row_slice(2, 3, &[1.5, -2.0, 0.25, 0.0, 3.75, -0.125]);
        let mut buf = Vec::new();
        write_real_matrix_csv(&mut buf, &m).unwrap();
        let back = read_real_matrix_csv(buf.as_slice()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn sid_summary_lists_model_facts() {
        use crate::sysid::{identify_responses, OrderRule};
        let maps: Vec<RMat> = (0..8)
            .map(|k| RMat::from_element(1, 1, 0.9f64.powi(k)))
            .collect();
        let set = ResponseSet::new(0.5, maps).unwrap();
        let model = identify_responses(&set, 3, OrderRule::Tolerance(1e-8)).unwrap();
        let mut buf = Vec::new();
        write_sid_summary(&mut buf, &model).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("order = 1"));
        assert!(text.contains("has_generator = true"));
        assert!(text.contains("spectral_radius = 0.9"));
    }
}
