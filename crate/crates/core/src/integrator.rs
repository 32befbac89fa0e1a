//! Integrating-factor RK4 (Lawson) for either formulation.
//!
//! With `L = (-mu, nu Lap, 0)` diagonal in Fourier space and `E_s = e^{sL}`,
//! one step of size `h` reads
//!
//! ```text
//! k1 = N(t, y)
//! k2 = N(t + h/2, E_{h/2}(y + h/2 k1))
//! k3 = N(t + h/2, E_{h/2} y + h/2 k2)
//! k4 = N(t + h, E_h y + h E_{h/2} k3)
//! y+ = E_h y + h/6 (E_h k1 + 2 E_{h/2}(k2 + k3) + k4)
//! ```
//!
//! The stiff damping and diffusion are integrated exactly; only the explicit
//! part `N` sees the RK4 error.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    decompose, dissipation, explicit_full, explicit_perturbation, l2_energy, recompose, Fields, Model,
    PerturbationState, TCMState,
};
use crate::error::{Result, TcmError};
use crate::initial::{InitialCondition, LinearData};
use crate::linear::{evolve_linear_with, forcing_factored, ForcingTriple, LinearFlow};
use crate::norms::vector_linf_norm;

/// Default H^3 threshold for blow-up detection.
pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e6;

/// Variables advanced by the stepper.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    /// `(u, v, theta)`.
    Full,
    /// `(w, c, theta)` around the closed-form linear flow.
    #[default]
    Perturbation,
}

/// Fixed-step integration settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub dt: f64,
    pub t_end: f64,
    pub blowup_threshold: f64,
    pub formulation: Formulation,
    pub model: Model,
    pub mu: f64,
    pub nu: f64,
    /// Time between diagnostic samples, rounded to a whole number of steps.
    pub sample_interval: f64,
}

impl StepperConfig {
    /// Nonlinear perturbation run with `mu = nu = 1`, sampling every step.
    pub fn new(dt: f64, t_end: f64) -> Result<Self> {
        let cfg = Self {
            dt,
            t_end,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            formulation: Formulation::default(),
            model: Model::default(),
            mu: 1.0,
            nu: 1.0,
            sample_interval: dt,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_formulation(mut self, formulation: Formulation) -> Self {
        self.formulation = formulation;
        self
    }

    pub fn with_model(mut self, model: Model) -> Self {
        self.model = model;
        self
    }

    pub fn with_sample_interval(mut self, interval: f64) -> Self {
        self.sample_interval = interval;
        self
    }

    pub fn with_blowup_threshold(mut self, threshold: f64) -> Self {
        self.blowup_threshold = threshold;
        self
    }

    pub fn with_coefficients(mut self, mu: f64, nu: f64) -> Self {
        self.mu = mu;
        self.nu = nu;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(TcmError::InvalidInput(format!("{name} = {x} must be positive and finite")))
            }
        };
        positive("dt", self.dt)?;
        positive("t_end", self.t_end)?;
        positive("sample_interval", self.sample_interval)?;
        if !(self.blowup_threshold > 0.0) {
            return Err(TcmError::InvalidInput(format!(
                "blowup_threshold = {} must be positive",
                self.blowup_threshold
            )));
        }
        if self.dt > self.t_end {
            return Err(TcmError::InvalidInput(format!("dt = {} exceeds t_end = {}", self.dt, self.t_end)));
        }
        for (name, x) in [("mu", self.mu), ("nu", self.nu)] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(TcmError::InvalidInput(format!("{name} = {x} must be >= 0")));
            }
        }
        Ok(())
    }

    /// Number of steps; the last one is shortened when `dt` does not divide `t_end`.
    pub fn steps(&self) -> usize {
        let ratio = self.t_end / self.dt;
        let rounded = ratio.round();
        if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
            rounded as usize
        } else {
            ratio.ceil() as usize
        }
    }

    /// Time after `k` steps.
    pub fn time_at(&self, k: usize) -> f64 {
        if k >= self.steps() {
            self.t_end
        } else {
            k as f64 * self.dt
        }
    }

    /// Steps between samples.
    pub fn sample_stride(&self) -> usize {
        ((self.sample_interval / self.dt).round() as usize).max(1)
    }
}

/// How a trajectory ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    BlowupDetected,
    NonFinite,
}

impl Termination {
    /// `completed`, `blowup_detected` or `nonfinite`.
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Completed => "completed",
            Self::BlowupDetected => "blowup_detected",
            Self::NonFinite => "nonfinite",
        }
    }
}

/// Summary of an integration.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Strictly increasing times at which the sink was called.
    pub sample_times: Vec<f64>,
    pub termination: Termination,
    /// Last state reached: the offending state on blow-up, the last finite one
    /// on a non-finite stage.
    pub final_state: TCMState,
    pub final_perturbation: PerturbationState,
    pub steps_taken: usize,
    /// `||(u, v, theta)||_{H^3}` of `final_state`.
    pub final_norm: f64,
    /// Largest advisory CFL number `dt * k_max * (||u||_inf + ||v||_inf)` seen at samples.
    pub max_cfl: f64,
    /// Largest `|energy residual|` over all steps.
    pub max_energy_residual: f64,
}

/// Everything the diagnostics need at a sample time.
pub struct StepSample<'a> {
    pub step: usize,
    pub t: f64,
    pub full: &'a TCMState,
    pub perturbation: &'a PerturbationState,
    pub flow: &'a LinearFlow,
    pub forcing: &'a ForcingTriple,
    /// `(E_{n+1} - E_n)/h + <D>` for the step ending here (zero at `t = 0`),
    /// with `E = 1/2 ||(u, v, theta)||^2_{L^2}`, `D = mu ||u||^2 + nu ||grad v||^2`
    /// and `<D>` the RK4 quadrature of `D` over the stages.
    pub energy_residual: f64,
}

/// Receiver of samples emitted during [`integrate`].
pub trait DiagnosticsSink {
    fn record(&mut self, sample: &StepSample<'_>) -> Result<()>;
}

/// Sink that discards every sample.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullSink;

impl DiagnosticsSink for NullSink {
    fn record(&mut self, _sample: &StepSample<'_>) -> Result<()> {
        Ok(())
    }
}

impl<F> DiagnosticsSink for F
where
    F: FnMut(&StepSample<'_>) -> Result<()>,
{
    fn record(&mut self, sample: &StepSample<'_>) -> Result<()> {
        self(sample)
    }
}

type FlowEntry = Arc<(LinearFlow, ForcingTriple)>;

/// Result of one step.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub fields: Fields,
    /// RK4 quadrature `h/6 (D1 + 2 D2 + 2 D3 + D4)` of the dissipation over
    /// the physical stage states.
    pub dissipation_integral: f64,
}

/// IF-RK4 stepper; caches the closed-form flow and forcing by stage time.
pub struct Stepper {
    cfg: StepperConfig,
    linear: Arc<LinearData>,
    cache: Vec<(u64, FlowEntry)>,
}

impl Stepper {
    pub fn new(cfg: StepperConfig, linear: Arc<LinearData>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            linear,
            cache: Vec::with_capacity(4),
        })
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    /// Linear flow and factored forcing at `t`.
    pub fn flow_at(&mut self, t: f64) -> Result<FlowEntry> {
        let key = t.to_bits();
        if let Some((_, entry)) = self.cache.iter().find(|(k, _)| *k == key) {
            return Ok(entry.clone());
        }
        let flow = evolve_linear_with(&self.linear, t, self.cfg.mu, self.cfg.nu)?;
        let forcing = forcing_factored(&flow);
        let entry = Arc::new((flow, forcing));
        if self.cache.len() == 3 {
            self.cache.remove(0);
        }
        self.cache.push((key, entry.clone()));
        Ok(entry)
    }

    fn explicit(&mut self, t: f64, y: &Fields) -> Result<Fields> {
        if self.cfg.model == Model::Linearized {
            return Ok(Fields::zeros(y.grid()));
        }
        let out = match self.cfg.formulation {
            Formulation::Full => explicit_full(y),
            Formulation::Perturbation => {
                let entry = self.flow_at(t)?;
                explicit_perturbation(y, &entry.0, &entry.1)
            }
        };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(TcmError::NonFinite(format!("explicit stage at t = {t}")))
        }
    }

    /// The physical state `(u, v, theta)` for the stepped variables at `t`.
    pub fn full_fields(&mut self, y: &Fields, t: f64) -> Result<Fields> {
        match self.cfg.formulation {
            Formulation::Full => Ok(y.clone()),
            Formulation::Perturbation => {
                let entry = self.flow_at(t)?;
                let p = PerturbationState::from_fields(y.clone(), t);
                Ok(recompose(&p, &entry.0)?.fields())
            }
        }
    }

    fn stage_dissipation(&mut self, y: &Fields, t: f64) -> Result<f64> {
        let full = self.full_fields(y, t)?;
        Ok(dissipation(&full, self.cfg.mu, self.cfg.nu))
    }

    /// Advance `y` from `t0` to `t1`.
    pub fn step(&mut self, y: &Fields, t0: f64, t1: f64) -> Result<StepOutput> {
        let h = t1 - t0;
        let tm = t0 + 0.5 * h;
        let (mu, nu) = (self.cfg.mu, self.cfg.nu);
        let half = |f: &Fields| f.propagate_linear(0.5 * h, mu, nu);
        let full = |f: &Fields| f.propagate_linear(h, mu, nu);

        let k1 = self.explicit(t0, y)?;
        let mut y2 = y.clone();
        y2.axpy(0.5 * h, &k1);
        let y2 = half(&y2);
        let k2 = self.explicit(tm, &y2)?;
        let mut y3 = half(y);
        y3.axpy(0.5 * h, &k2);
        let k3 = self.explicit(tm, &y3)?;
        let mut y4 = full(y);
        y4.axpy(h, &half(&k3));
        let k4 = self.explicit(t1, &y4)?;

        let mut next = full(y);
        next.axpy(h / 6.0, &full(&k1));
        let mut k23 = k2;
        k23.axpy(1.0, &k3);
        next.axpy(h / 3.0, &half(&k23));
        next.axpy(h / 6.0, &k4);
        if !next.is_finite() {
            return Err(TcmError::NonFinite(format!("step to t = {t1}")));
        }

        let d = [
            self.stage_dissipation(y, t0)?,
            self.stage_dissipation(&y2, tm)?,
            self.stage_dissipation(&y3, tm)?,
            self.stage_dissipation(&y4, t1)?,
        ];
        let dissipation_integral = h / 6.0 * (d[0] + 2.0 * d[1] + 2.0 * d[2] + d[3]);
        Ok(StepOutput {
            fields: next,
            dissipation_integral,
        })
    }
}

/// Initial stepped variables for the chosen formulation.
fn initial_fields(ic: &InitialCondition, cfg: &StepperConfig) -> Fields {
    let fields = match cfg.formulation {
        Formulation::Full => Fields {
            first: ic.u0(),
            second: ic.v0(),
            theta: ic.theta0.clone(),
        },
        Formulation::Perturbation => Fields {
            first: ic.w0.clone(),
            second: ic.c0.clone(),
            theta: ic.theta0.clone(),
        },
    };
    fields.dealias()
}

struct Snapshot {
    full: TCMState,
    perturbation: PerturbationState,
    entry: FlowEntry,
    norm: f64,
}

fn snapshot(stepper: &mut Stepper, y: &Fields, t: f64) -> Result<Snapshot> {
    let cfg = stepper.config().clone();
    let entry = stepper.flow_at(t)?;
    let (full, perturbation) = match cfg.formulation {
        Formulation::Full => {
            let full = TCMState::from_fields(y.clone(), t, cfg.mu, cfg.nu);
            let p = decompose(&full, &entry.0)?;
            (full, p)
        }
        Formulation::Perturbation => {
            let p = PerturbationState::from_fields(y.clone(), t);
            (recompose(&p, &entry.0)?, p)
        }
    };
    let norm = full.fields().hs_norm(3);
    Ok(Snapshot {
        full,
        perturbation,
        entry,
        norm,
    })
}

/// Integrate from `ic` to `cfg.t_end`, calling `sink` at `t = 0`, every
/// `sample_stride` steps and at the final time.
///
/// Blow-up (H^3 norm of the full state above the threshold) and non-finite
/// stages end the run early and are reported through
/// [`Trajectory::termination`]; `Err` is reserved for invalid input and sink
/// failures.
pub fn integrate(ic: &InitialCondition, cfg: &StepperConfig, sink: &mut dyn DiagnosticsSink) -> Result<Trajectory> {
    cfg.validate()?;
    let mut stepper = Stepper::new(cfg.clone(), Arc::new(ic.linear.clone()))?;
    let grid = ic.grid().clone();
    let k_max = grid.dealias_wavenumber();
    let steps = cfg.steps();
    let stride = cfg.sample_stride();

    let mut y = initial_fields(ic, cfg);
    let mut snap = snapshot(&mut stepper, &y, 0.0)?;
    let mut energy = l2_energy(&snap.full.fields());
    let mut sample_times = Vec::new();
    let mut max_cfl: f64 = 0.0;
    let mut max_residual: f64 = 0.0;
    let mut residual = 0.0;
    let mut termination = Termination::Completed;
    let mut steps_taken = 0;

    let mut emit = |snap: &Snapshot, step: usize, residual: f64, times: &mut Vec<f64>, cfl: &mut f64| {
        let speed = vector_linf_norm(&snap.full.u) + vector_linf_norm(&snap.full.v);
        *cfl = cfl.max(cfg.dt * k_max * speed);
        times.push(snap.full.t);
        sink.record(&StepSample {
            step,
            t: snap.full.t,
            full: &snap.full,
            perturbation: &snap.perturbation,
            flow: &snap.entry.0,
            forcing: &snap.entry.1,
            energy_residual: residual,
        })
    };

    if !snap.norm.is_finite() || !y.is_finite() {
        termination = Termination::NonFinite;
    } else if snap.norm > cfg.blowup_threshold {
        termination = Termination::BlowupDetected;
    }
    emit(&snap, 0, 0.0, &mut sample_times, &mut max_cfl)?;

    if termination == Termination::Completed {
        for k in 0..steps {
            let (t0, t1) = (cfg.time_at(k), cfg.time_at(k + 1));
            let out = match stepper.step(&y, t0, t1) {
                Ok(out) => out,
                Err(TcmError::NonFinite(_)) => {
                    termination = Termination::NonFinite;
                    break;
                }
                Err(e) => return Err(e),
            };
            let next_snap = snapshot(&mut stepper, &out.fields, t1)?;
            if !next_snap.norm.is_finite() {
                termination = Termination::NonFinite;
                break;
            }
            y = out.fields;
            snap = next_snap;
            steps_taken = k + 1;
            let next_energy = l2_energy(&snap.full.fields());
            residual = (next_energy - energy + out.dissipation_integral) / (t1 - t0);
            max_residual = max_residual.max(residual.abs());
            energy = next_energy;

            let blown = snap.norm > cfg.blowup_threshold;
            if blown || steps_taken % stride == 0 || steps_taken == steps {
                emit(&snap, steps_taken, residual, &mut sample_times, &mut max_cfl)?;
            }
            if blown {
                termination = Termination::BlowupDetected;
                break;
            }
        }
    }
    if termination == Termination::NonFinite && sample_times.last() != Some(&snap.full.t) {
        emit(&snap, steps_taken, residual, &mut sample_times, &mut max_cfl)?;
    }

    Ok(Trajectory {
        sample_times,
        termination,
        final_norm: snap.norm,
        final_state: snap.full,
        final_perturbation: snap.perturbation,
        steps_taken,
        max_cfl,
        max_energy_residual: max_residual,
    })
}
