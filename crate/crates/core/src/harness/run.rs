//! Single runs, epsilon sweeps and the oracle suite.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::config::{AmplitudeMode, RunConfig};
use super::output::{format_value, write_csv_file, write_manifest_file, write_snapshot_file, Manifest, RunResult};
use super::HarnessError;
use crate::diagnostics::{
    crossing_equivalence, decay_verdict, gronwall_monitor, DecayReport, DiagnosticsRow, GronwallReport, RowCollector,
    RowContext,
};
use crate::dynamics::{
    dissipation, energy_pairing, recompose, rhs_full, rhs_perturbation, Fields, Model, PerturbationState,
};
use crate::initial::{
    assemble_initial, build_remark_data, build_scaled_data, condition_lhs, seeded_perturbation, InitialCondition,
    LinearData, PerturbationSeeds,
};
use crate::integrator::{integrate, Formulation, Termination, Trajectory};
use crate::linear::{evolve_linear_with, forcing_factored, forcing_raw, ForcingTriple};
use crate::norms::{hs_norm, vector_hs_norm};

/// Environment variable holding the number of sweep worker threads.
pub const THREADS_ENV: &str = "TCM_THREADS";

/// File names inside the output directory.
pub const CSV_NAME: &str = "diagnostics.csv";
pub const SNAPSHOT_NAME: &str = "snapshot.tcm";
pub const MANIFEST_NAME: &str = "manifest.toml";
pub const SWEEP_SUMMARY_NAME: &str = "sweep_summary.csv";

/// 0 completed, 2 blow-up or non-finite state.
pub fn exit_code(termination: Termination) -> i32 {
    match termination {
        Termination::Completed => 0,
        Termination::BlowupDetected | Termination::NonFinite => 2,
    }
}

/// Linear data chosen by `amplitude_mode`.
pub fn build_linear(config: &RunConfig) -> Result<LinearData, HarnessError> {
    let grid = config.grid()?;
    let cone = config.cone()?;
    let data = match config.amplitude_mode {
        AmplitudeMode::Remark11 => build_remark_data(&cone, &grid)?,
        AmplitudeMode::Explicit => build_scaled_data(&cone, &grid, config.amplitude)?,
    };
    Ok(data)
}

/// Linear data plus the seeded perturbation.
pub fn build_initial(config: &RunConfig) -> Result<InitialCondition, HarnessError> {
    let linear = build_linear(config)?;
    let (w0, c0, theta0) = seeded_perturbation(linear.grid(), &config.seeds());
    Ok(assemble_initial(linear, w0, c0, theta0)?)
}

/// In-memory result of a run.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub initial: InitialCondition,
    pub trajectory: Trajectory,
    pub rows: Vec<DiagnosticsRow>,
    pub context: RowContext,
}

impl Simulation {
    pub fn decay(&self) -> DecayReport {
        decay_verdict(&self.rows, self.trajectory.termination)
    }

    /// `None` when fewer than two rows exist.
    pub fn gronwall(&self, c_fit: f64) -> Option<GronwallReport> {
        gronwall_monitor(&self.rows, self.context.a0, c_fit).ok()
    }

    /// `sup_t e^t E(t)` over the rows.
    pub fn sup_scaled_forcing(&self) -> f64 {
        self.rows.iter().map(|r| r.t.exp() * r.e).fold(0.0, f64::max)
    }
}

/// Integrate without writing anything.
pub fn simulate(config: &RunConfig) -> Result<Simulation, HarnessError> {
    config.validate()?;
    let initial = build_initial(config)?;
    let context = RowContext::from_initial(&initial, config.c_for_condition);
    let mut collector = RowCollector::new(context);
    let trajectory = integrate(&initial, &config.stepper(), &mut collector)?;
    Ok(Simulation {
        initial,
        trajectory,
        rows: collector.rows,
        context,
    })
}

/// Result of [`run`].
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub simulation: Simulation,
    pub manifest: Manifest,
    pub exit_code: i32,
    pub csv_path: PathBuf,
    pub snapshot_path: PathBuf,
    pub manifest_path: PathBuf,
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn manifest_for(config: &RunConfig, sim: &Simulation) -> Manifest {
    let traj = &sim.trajectory;
    let decay = sim.decay();
    let gronwall = sim.gronwall(config.c_fit);
    Manifest {
        config: config.clone(),
        result: RunResult {
            termination: traj.termination.as_str().to_string(),
            exit_code: exit_code(traj.termination),
            steps_taken: traj.steps_taken,
            final_time: traj.final_state.t,
            final_norm: traj.final_norm,
            max_cfl: traj.max_cfl,
            max_energy_residual: traj.max_energy_residual,
            condition_lhs: sim.context.condition_lhs_at_c,
            decay_verdict: decay.verdict,
            decay_sup_first: decay.sup_first,
            decay_sup_last: decay.sup_last,
            gronwall_verdict: gronwall.as_ref().map(|g| g.verdict),
            gronwall_minimal_c: gronwall.as_ref().and_then(|g| g.minimal_c),
            gronwall_clamped_at_floor: gronwall.as_ref().map(|g| g.clamped_at_floor),
            crossing_equivalence: crossing_equivalence(&sim.rows, config.gamma),
            sup_scaled_forcing: sim.sup_scaled_forcing(),
        },
    }
}

/// Run one configuration and write the CSV, snapshot and manifest into
/// `config.output_dir`.
pub fn run(config: &RunConfig) -> Result<RunOutcome, HarnessError> {
    let simulation = simulate(config)?;
    let dir = &config.output_dir;
    create_dir(dir)?;
    let csv_path = dir.join(CSV_NAME);
    let snapshot_path = dir.join(SNAPSHOT_NAME);
    let manifest_path = dir.join(MANIFEST_NAME);
    write_csv_file(&csv_path, &simulation.rows)?;
    write_snapshot_file(&snapshot_path, &simulation.trajectory.final_state)?;
    let manifest = manifest_for(config, &simulation);
    write_manifest_file(&manifest_path, &manifest)?;
    log::info!(
        "run finished: {} after {} steps, outputs in {}",
        simulation.trajectory.termination.as_str(),
        simulation.trajectory.steps_taken,
        dir.display()
    );
    Ok(RunOutcome {
        exit_code: exit_code(simulation.trajectory.termination),
        simulation,
        manifest,
        csv_path,
        snapshot_path,
        manifest_path,
    })
}

/// Worker count from [`THREADS_ENV`], else the available parallelism.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// First occurrences of each value, and the dropped repeats.
pub fn dedup_epsilons(epsilons: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut kept: Vec<f64> = Vec::new();
    let mut dropped = Vec::new();
    for &e in epsilons {
        if kept.iter().any(|k| k.to_bits() == e.to_bits()) {
            dropped.push(e);
        } else {
            kept.push(e);
        }
    }
    (kept, dropped)
}

/// One row of the sweep summary.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub condition_lhs: Option<f64>,
    pub sup_scaled_forcing: Option<f64>,
    pub decay_verdict: Option<bool>,
    pub termination: Option<Termination>,
    pub exit_code: i32,
    pub error: Option<String>,
}

/// Summary of a sweep, in the order of the (deduplicated) epsilons.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub duplicates: Vec<f64>,
    pub path: Option<PathBuf>,
}

fn sweep_one(base: &RunConfig, epsilon: f64) -> SweepRow {
    let mut config = base.with_epsilon(epsilon);
    config.output_dir = base.output_dir.join(format!("eps_{epsilon}"));
    match run(&config) {
        Ok(out) => SweepRow {
            epsilon,
            condition_lhs: Some(out.manifest.result.condition_lhs),
            sup_scaled_forcing: Some(out.manifest.result.sup_scaled_forcing),
            decay_verdict: Some(out.manifest.result.decay_verdict),
            termination: Some(out.simulation.trajectory.termination),
            exit_code: out.exit_code,
            error: None,
        },
        Err(e) => SweepRow {
            epsilon,
            condition_lhs: None,
            sup_scaled_forcing: None,
            decay_verdict: None,
            termination: None,
            exit_code: 1,
            error: Some(e.to_string()),
        },
    }
}

/// Columns of the sweep summary CSV.
pub const SWEEP_COLUMNS: [&str; 6] = [
    "epsilon",
    "condition_lhs",
    "sup_scaled_forcing",
    "decay_verdict",
    "termination",
    "error",
];

fn write_summary(path: &Path, rows: &[SweepRow]) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let err = |e: csv::Error| HarnessError::Output(e.to_string());
    out.write_record(SWEEP_COLUMNS).map_err(err)?;
    let opt = |x: Option<f64>| x.map(format_value).unwrap_or_default();
    for r in rows {
        out.write_record([
            format_value(r.epsilon),
            opt(r.condition_lhs),
            opt(r.sup_scaled_forcing),
            r.decay_verdict.map(|v| v.to_string()).unwrap_or_default(),
            r.termination.map(|t| t.as_str().to_string()).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    out.flush().map_err(|e| HarnessError::Output(e.to_string()))
}

/// Run `config` once per distinct epsilon, concurrently on [`thread_count`]
/// workers. Failing runs become rows with an error message; the summary is
/// written to `output_dir/sweep_summary.csv` once every run has finished.
pub fn sweep(config: &RunConfig, epsilons: &[f64]) -> Result<SweepSummary, HarnessError> {
    let (kept, duplicates) = dedup_epsilons(epsilons);
    if !duplicates.is_empty() {
        log::warn!("dropping duplicate epsilon values {duplicates:?}");
    }
    let slots: Vec<Mutex<Option<SweepRow>>> = kept.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = thread_count().min(kept.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= kept.len() {
                    break;
                }
                let row = sweep_one(config, kept[i]);
                *slots[i].lock().expect("sweep slot") = Some(row);
            });
        }
    });
    let rows: Vec<SweepRow> = slots
        .into_iter()
        .map(|s| s.into_inner().expect("sweep slot").expect("every slot filled"))
        .collect();
    create_dir(&config.output_dir)?;
    let path = config.output_dir.join(SWEEP_SUMMARY_NAME);
    write_summary(&path, &rows)?;
    Ok(SweepSummary {
        rows,
        duplicates,
        path: Some(path),
    })
}

/// One oracle check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            value,
            tolerance,
            passed: value.is_finite() && value <= tolerance,
        }
    }

    /// `PASS name: value <= tolerance`.
    pub fn line(&self) -> String {
        format!(
            "{} {}: {:.3e} (tolerance {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance
        )
    }
}

fn fields_rel(a: &Fields, b: &Fields) -> f64 {
    a.difference(b).hs_norm(3) / b.hs_norm(3).max(f64::MIN_POSITIVE)
}

fn forcing_rel(a: &ForcingTriple, b: &ForcingTriple) -> f64 {
    let diff = vector_hs_norm(&(&a.f - &b.f), 3) + vector_hs_norm(&(&a.g - &b.g), 3) + hs_norm(&(&a.h - &b.h), 3);
    diff / b.energy().max(f64::MIN_POSITIVE)
}

/// Oracle suite on the configured grid and data: closed-form linear flow
/// against the linearized stepper, raw against factored forcing, the two
/// tendency paths, the energy law and the projection of `dw`.
pub fn verify(config: &RunConfig) -> Result<Vec<Check>, HarnessError> {
    config.validate()?;
    let linear = build_linear(config)?;
    let grid = linear.grid().clone();
    let (mu, nu) = (config.mu, config.nu);
    let mut checks = Vec::new();

    // Linearized stepper against e^{-mu t} a0 and e^{nu t Lap} m0.
    let t_lin = config.t_end.min(1.0);
    let mut cfg = config.stepper();
    cfg.model = Model::Linearized;
    cfg.formulation = Formulation::Full;
    cfg.t_end = t_lin;
    cfg.dt = config.dt.min(t_lin);
    cfg.sample_interval = t_lin;
    let ic = crate::initial::unperturbed(linear.clone());
    let traj = integrate(&ic, &cfg, &mut crate::integrator::NullSink)?;
    let flow = evolve_linear_with(&linear, t_lin, mu, nu)?;
    let exact = Fields {
        first: flow.big_u.clone(),
        second: flow.big_v.clone(),
        theta: crate::grid::SpectralField::zeros(&grid),
    };
    checks.push(Check::new(
        "linear-flow agreement",
        fields_rel(&traj.final_state.fields(), &exact),
        1e-8,
    ));

    // Raw and factored forcing.
    let mut worst: f64 = 0.0;
    for t in [0.0, 0.5] {
        let flow = evolve_linear_with(&linear, t, mu, nu)?;
        worst = worst.max(forcing_rel(&forcing_raw(&flow), &forcing_factored(&flow)));
    }
    checks.push(Check::new("raw-vs-factored forcing", worst, 1e-10));

    // Two tendency paths at a perturbed state.
    let mut seeds = config.seeds();
    if seeds.w_amplitude == 0.0 && seeds.c_amplitude == 0.0 && seeds.theta_amplitude == 0.0 {
        seeds = PerturbationSeeds {
            w_amplitude: 1e-2,
            c_amplitude: 1e-2,
            theta_amplitude: 1e-2,
            seed: config.seed,
        };
    }
    let t = 0.5;
    let (w, c, theta) = seeded_perturbation(&grid, &seeds);
    let p = PerturbationState::new(w, c, theta, t)?;
    let flow = evolve_linear_with(&linear, t, mu, nu)?;
    let forcing = forcing_factored(&flow);
    let mut via_perturbation = rhs_perturbation(&p, &flow, &forcing)?;
    via_perturbation.first.add_scaled(1.0, &flow.du_dt());
    via_perturbation.second.add_scaled(1.0, &flow.dv_dt());
    let state = recompose(&p, &flow)?;
    let full = rhs_full(&state)?;
    checks.push(Check::new("two-path consistency", fields_rel(&via_perturbation, &full), 1e-8));

    // Energy law at the recomposed state.
    let fields = state.fields();
    let d = dissipation(&fields, mu, nu);
    let residual = (energy_pairing(&full, &fields) + d).abs() / d.max(f64::MIN_POSITIVE);
    checks.push(Check::new("energy law", residual, 1e-8));

    let dw = rhs_perturbation(&p, &flow, &forcing)?;
    checks.push(Check::new("projection of dw", dw.first.relative_divergence(), 1e-10));
    Ok(checks)
}

/// Print one line per check; returns whether all passed.
pub fn report_checks<W: Write>(out: &mut W, checks: &[Check]) -> std::io::Result<bool> {
    for c in checks {
        writeln!(out, "{}", c.line())?;
    }
    Ok(checks.iter().all(|c| c.passed))
}

/// Condition left side for the configured constant; convenience for sweeps.
pub fn condition_for(config: &RunConfig) -> Result<f64, HarnessError> {
    Ok(condition_lhs(&build_initial(config)?, config.c_for_condition))
}
