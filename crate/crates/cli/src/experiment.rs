use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use qgate_core::model::{pulse_norm, random_pulse, ParameterVector, ProblemSpec};
use qgate_core::objective;
use qgate_core::solver::{self, SolveOptions, SolveReport, Status};

use crate::config::{Algorithm, ExperimentConfig, InitialNorm};
use crate::error::{CliError, Result};
use crate::output::{fmt_f64, iteration_csv, write_text, SWEEP_HEADER};
use crate::spectrum::{default_samples, pulse_spectrum};

pub const OUT_DIR_ENV: &str = "QGATE_OUT";

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    /// Thread count; rayon's default when `None`.
    pub workers: Option<usize>,
    pub seed_offset: u64,
}

impl RunOptions {
    fn out_dir(&self, config: &ExperimentConfig) -> PathBuf {
        self.out_dir
            .clone()
            .unwrap_or_else(|| config.output.dir.clone())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.workers {
            builder = builder.num_threads(n.max(1));
        }
        Ok(builder.build()?)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub status: &'static str,
    pub iterations: usize,
    pub rejected_steps: usize,
    pub initial_norm: f64,
    pub final_gate_error: f64,
    pub final_geodesic_error: f64,
    pub final_norm: f64,
    pub total_seconds: f64,
    pub log: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
    pub seed_offset: u64,
    pub initial_norm: f64,
    /// `(norm, median ill-conditioning)` of the automatic norm search.
    pub norm_search: Option<Vec<(f64, f64)>>,
    pub all_converged: bool,
    pub runs: Vec<RunSummary>,
    #[serde(skip)]
    pub reports: Vec<SolveReport>,
}

impl ExperimentSummary {
    /// Process exit status: 0 iff every run converged.
    pub fn exit_code(&self) -> i32 {
        if self.all_converged {
            0
        } else {
            1
        }
    }
}

fn solve(
    problem: &ProblemSpec,
    algorithm: Algorithm,
    a0: &ParameterVector,
    options: SolveOptions,
) -> Result<SolveReport> {
    Ok(match algorithm {
        Algorithm::Newton => solver::newton_raphson_solve(problem, a0, options)?,
        Algorithm::Bfgs => solver::bfgs_grape_solve(problem, a0, options)?,
    })
}

fn stem(problem: &ProblemSpec, algorithm: Algorithm) -> String {
    let alg = match algorithm {
        Algorithm::Newton => "newton",
        Algorithm::Bfgs => "bfgs",
    };
    format!("{}_{alg}", problem.name)
}

/// Solves the configured problem once per seed and writes one iteration CSV
/// per run, optional spectra of the final pulses, and `summary.json`.
pub fn run_experiment(
    config: &ExperimentConfig,
    options: &RunOptions,
) -> Result<ExperimentSummary> {
    config.validate()?;
    let out_dir = options.out_dir(config);
    let problem = config.build_problem()?;
    let pool = options.pool()?;
    let s = &config.solver;
    let (rho, norm_search) = match s.initial_norm {
        InitialNorm::Fixed(rho) => (rho, None),
        InitialNorm::Mode(_) => {
            let search = pool.install(|| {
                solver::find_best_initial_norm(
                    &problem,
                    s.fluence_bound,
                    s.norm_grid_size,
                    s.samples_per_norm,
                    s.search_seed,
                )
            })?;
            (search.best_norm, Some(search.curve))
        }
    };
    let seeds: Vec<u64> = s
        .seeds
        .iter()
        .map(|x| x.wrapping_add(options.seed_offset))
        .collect();
    let prefix = stem(&problem, s.algorithm);
    let results = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| -> Result<(RunSummary, SolveReport)> {
                let start = Instant::now();
                let a0 = random_pulse(&problem.basis, problem.system.n_controls(), rho, seed);
                let report = solve(
                    &problem,
                    s.algorithm,
                    &a0,
                    SolveOptions {
                        max_iter: s.max_iter,
                        seed,
                    },
                )?;
                let total_seconds = start.elapsed().as_secs_f64();
                let log = out_dir.join(format!("{prefix}_seed{seed}.csv"));
                write_text(&log, &iteration_csv(&report.records))?;
                let spectrum = if config.output.spectrum {
                    let samples = config
                        .output
                        .spectrum_samples
                        .unwrap_or_else(|| default_samples(&problem.basis));
                    let table = pulse_spectrum(&problem.basis, &report.final_params, samples);
                    let path = out_dir.join(format!("{prefix}_seed{seed}_spectrum.csv"));
                    write_text(&path, &table.to_csv())?;
                    Some(path)
                } else {
                    None
                };
                let last = report.final_record();
                let summary = RunSummary {
                    seed,
                    status: report.status.as_str(),
                    iterations: report.iterations(),
                    rejected_steps: report.records.iter().filter(|r| !r.accepted).count(),
                    initial_norm: rho,
                    final_gate_error: last.gate_error,
                    final_geodesic_error: last.geodesic_error,
                    final_norm: pulse_norm(&problem.basis, &report.final_params),
                    total_seconds,
                    log,
                    spectrum,
                };
                Ok((summary, report))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let all_converged = results.iter().all(|(_, r)| r.status == Status::Converged);
    let (runs, reports) = results.into_iter().unzip();
    let summary = ExperimentSummary {
        version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
        out_dir: out_dir.clone(),
        seed_offset: options.seed_offset,
        initial_norm: rho,
        norm_search,
        all_converged,
        runs,
        reports,
    };
    let json = serde_json::to_string_pretty(&summary)? + "\n";
    write_text(&out_dir.join("summary.json"), &json)?;
    Ok(summary)
}

/// One `(norm, seed)` cell of a norm sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub norm: f64,
    pub seed: u64,
    /// Ill-conditioning of the initial pulse.
    pub ill_conditioning: f64,
    /// Wall-clock time until the gate error first reached the tolerance;
    /// NaN if it never did.
    pub time_to_eps: f64,
    pub final_norm: f64,
    pub status: Status,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(r.norm),
            r.seed,
            fmt_f64(r.ill_conditioning),
            fmt_f64(r.time_to_eps),
            fmt_f64(r.final_norm)
        ));
    }
    out
}

fn sweep_cell(
    config: &ExperimentConfig,
    problem: &ProblemSpec,
    out_dir: &Path,
    index: usize,
    norm: f64,
    seed: u64,
) -> Result<SweepRow> {
    let a0 = random_pulse(&problem.basis, problem.system.n_controls(), norm, seed);
    let eval = objective::evaluate(&problem.system, &problem.basis, &problem.target, &a0)?;
    let jd = objective::jacobian(
        &problem.system,
        &problem.basis,
        &problem.target,
        &eval.propagation,
    )?;
    let ill_conditioning = objective::ill_conditioning(&jd);
    let report = solve(
        problem,
        config.solver.algorithm,
        &a0,
        SolveOptions {
            max_iter: config.solver.max_iter,
            seed,
        },
    )?;
    let log = out_dir.join(format!(
        "{}_norm{index}_seed{seed}.csv",
        stem(problem, config.solver.algorithm)
    ));
    write_text(&log, &iteration_csv(&report.records))?;
    let time_to_eps = report
        .accepted()
        .find(|r| r.gate_error <= problem.tolerance)
        .map_or(f64::NAN, |r| r.wall_seconds);
    Ok(SweepRow {
        norm,
        seed,
        ill_conditioning,
        time_to_eps,
        final_norm: pulse_norm(&problem.basis, &report.final_params),
        status: report.status,
    })
}

/// Runs every `(norm, seed)` cell, each starting from a random pulse of that
/// norm, and writes `sweep.csv` ordered by `(norm, seed)` once all cells are
/// done.
pub fn campaign_norm_sweep(
    config: &ExperimentConfig,
    norms: &[f64],
    options: &RunOptions,
) -> Result<Vec<SweepRow>> {
    config.validate()?;
    if norms.is_empty() {
        return Err(CliError::config("the norm grid must not be empty"));
    }
    if let Some(bad) = norms.iter().find(|n| !(**n >= 0.0 && n.is_finite())) {
        return Err(CliError::config(format!("invalid norm {bad}")));
    }
    let out_dir = options.out_dir(config);
    let problem = config.build_problem()?;
    let mut sorted: Vec<f64> = norms.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut seeds: Vec<u64> = config
        .solver
        .seeds
        .iter()
        .map(|x| x.wrapping_add(options.seed_offset))
        .collect();
    seeds.sort_unstable();
    let cells: Vec<(usize, f64, u64)> = sorted
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| seeds.iter().map(move |&s| (i, n, s)))
        .collect();
    let pool = options.pool()?;
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|&(i, n, s)| sweep_cell(config, &problem, &out_dir, i, n, s))
            .collect::<Result<Vec<_>>>()
    })?;
    write_text(&out_dir.join("sweep.csv"), &sweep_csv(&rows))?;
    Ok(rows)
}
