//! Constrained energy minimization: explicit heat flow with pointwise
//! reprojection, and a projected-gradient alternative with Cayley retraction.

use crate::error::{Error, Result};
use crate::field::{
    energy, harmonic_residual, nonlinearity, rough_laplacian, AcsField,
};
use crate::geometry::MetricField;
use crate::matalg::{cayley_chart_inv, tangent_projection, MetricAtPoint};

pub const STALL_WINDOW: usize = 50;
const BACKTRACK_LIMIT: usize = 20;

/// Parameters of the reprojected explicit Euler flow dJ/dt = ΔJ − J∇_pJ∇_pJ.
///
/// Construct through [`FlowConfig::new`], which validates; the fields stay
/// public so stability-boundary probes can bypass validation deliberately.
#[derive(Debug, Clone)]
pub struct FlowConfig {
    /// Time step as a fraction of h²: dt = dt_factor · h².
    pub dt_factor: f64,
    pub max_steps: usize,
    /// Terminate when the sup harmonic residual drops below this.
    pub residual_tol: f64,
    /// Stall: |ΔE| ≤ energy_stall_tol · E for STALL_WINDOW consecutive steps.
    pub energy_stall_tol: f64,
    /// Reproject pointwise every this many steps (default 1).
    pub reproject_every: usize,
}

impl FlowConfig {
    pub fn new(
        dt_factor: f64,
        max_steps: usize,
        residual_tol: f64,
        energy_stall_tol: f64,
        reproject_every: usize,
    ) -> Result<Self> {
        let cfg = FlowConfig {
            dt_factor,
            max_steps,
            residual_tol,
            energy_stall_tol,
            reproject_every,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_factor > 0.0 && self.dt_factor <= 0.25) {
            return Err(Error::InvalidInput(format!(
                "dt_factor = {} outside (0, 0.25]",
                self.dt_factor
            )));
        }
        if !(self.residual_tol > 0.0) || !(self.energy_stall_tol > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if self.reproject_every == 0 {
            return Err(Error::InvalidInput("reproject_every must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            dt_factor: 0.05,
            max_steps: 10_000,
            residual_tol: 1e-6,
            energy_stall_tol: 1e-12,
            reproject_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub sup_residual: f64,
    pub max_constraint_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    InProgress,
    ResidualConverged,
    Stalled,
    MaxSteps,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::InProgress => "in_progress",
            Termination::ResidualConverged => "residual_converged",
            Termination::Stalled => "stalled",
            Termination::MaxSteps => "max_steps",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub field: AcsField,
    pub time: f64,
    pub step: usize,
    pub history: Vec<HistoryEntry>,
    pub termination: Termination,
}

impl FlowState {
    pub fn new(field: AcsField) -> Self {
        FlowState {
            field,
            time: 0.0,
            step: 0,
            history: Vec::new(),
            termination: Termination::InProgress,
        }
    }

    /// History as CSV with round-trippable float formatting.
    pub fn history_csv(&self) -> String {
        let mut out =
            String::from("step,time,energy,sup_residual,max_constraint_residual\n");
        for e in &self.history {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                e.step, e.time, e.energy, e.sup_residual, e.max_constraint_residual
            ));
        }
        out
    }
}

/// Energy, sup harmonic residual and max constraint residual of a field.
pub fn measure(field: &AcsField, g: &MetricField) -> Result<HistoryEntry> {
    let res = harmonic_residual(field, g)?;
    Ok(HistoryEntry {
        step: 0,
        time: 0.0,
        energy: energy(field, g)?,
        sup_residual: res.sup,
        max_constraint_residual: field.constraint_residual_max(),
    })
}

/// One explicit Euler step J ← J + dt (ΔJ − J∇_pJ∇_pJ), reprojected
/// according to `cfg.reproject_every`; Dirichlet boundary layer frozen.
/// On NaN the state is left at the last good field and a divergence error
/// is returned.
pub fn flow_step(state: &mut FlowState, g: &MetricField, cfg: &FlowConfig) -> Result<()> {
    let pre = state.field.constraint_residual_max();
    if pre > 1e-8 {
        return Err(Error::Domain(format!(
            "flow step requires constraint residual <= 1e-8 (got {pre:.3e})"
        )));
    }
    let dt = cfg.dt_factor * state.field.grid().h() * state.field.grid().h();
    let lap = rough_laplacian(&state.field, g)?;
    let nl = nonlinearity(&state.field, g)?;
    let mut next = state.field.clone();
    {
        let grid = next.grid().clone();
        let m = grid.dim();
        let mut idx = vec![0usize; m];
        for flat in 0..grid.n_points() {
            grid.multi_index(flat, &mut idx);
            if grid.is_boundary_cell(&idx) {
                continue;
            }
            let l = lap.mat(flat);
            let q = nl.mat(flat);
            let out = next.mat_mut(flat);
            for c in 0..out.len() {
                out[c] += dt * (l[c] - q[c]);
            }
        }
    }
    if !next.is_finite() {
        return Err(Error::Divergence {
            step: state.step,
            detail: "non-finite field values after explicit update".into(),
        });
    }
    if (state.step + 1) % cfg.reproject_every == 0 {
        next.project().map_err(|e| Error::Divergence {
            step: state.step,
            detail: format!("reprojection failed: {e}"),
        })?;
    }
    state.field = next;
    state.step += 1;
    state.time += dt;
    Ok(())
}

/// Run the flow until residual convergence, stall, or `max_steps`;
/// `observer` (if any) sees the state after each recorded history entry.
pub fn run_flow_with(
    initial: AcsField,
    g: &MetricField,
    cfg: &FlowConfig,
    mut observer: Option<&mut dyn FnMut(&FlowState) -> Result<()>>,
) -> Result<FlowState> {
    let mut field = initial;
    let (_pre, post) = field
        .project()
        .map_err(|e| Error::InvalidInput(format!("initial field not projectable: {e}")))?;
    if post > 1e-8 {
        return Err(Error::InvalidInput(format!(
            "initial field violates constraints after projection ({post:.3e})"
        )));
    }
    let mut state = FlowState::new(field);
    let mut stall_count = 0usize;
    loop {
        let mut entry = measure(&state.field, g)?;
        entry.step = state.step;
        entry.time = state.time;
        if let Some(prev) = state.history.last() {
            if (entry.energy - prev.energy).abs()
                <= cfg.energy_stall_tol * entry.energy.abs().max(1e-300)
            {
                stall_count += 1;
            } else {
                stall_count = 0;
            }
        }
        state.history.push(entry);
        if let Some(obs) = observer.as_deref_mut() {
            obs(&state)?;
        }
        if entry.sup_residual <= cfg.residual_tol {
            state.termination = Termination::ResidualConverged;
            break;
        }
        if stall_count >= STALL_WINDOW {
            state.termination = Termination::Stalled;
            break;
        }
        if state.step >= cfg.max_steps {
            state.termination = Termination::MaxSteps;
            break;
        }
        flow_step(&mut state, g, cfg)?;
    }
    Ok(state)
}

pub fn run_flow(initial: AcsField, g: &MetricField, cfg: &FlowConfig) -> Result<FlowState> {
    run_flow_with(initial, g, cfg, None)
}

/// One projected-gradient step: the ambient negative gradient
/// 2(ΔJ − J∇_pJ∇_pJ) is tangent-projected to V, converted to the Cayley
/// chart coordinate C = −(dt/2) J V (so the path's first variation is dt·V),
/// retracted pointwise, and reprojected. Energy non-increase is enforced by
/// halving dt up to 20 times; exhaustion leaves the state unchanged.
pub fn projected_gradient_step(
    state: &mut FlowState,
    g: &MetricField,
    cfg: &FlowConfig,
) -> Result<()> {
    let pre = state.field.constraint_residual_max();
    if pre > 1e-8 {
        return Err(Error::Domain(format!(
            "gradient step requires constraint residual <= 1e-8 (got {pre:.3e})"
        )));
    }
    let grid = state.field.grid().clone();
    let m = grid.dim();
    let base_energy = energy(&state.field, g)?;
    let lap = rough_laplacian(&state.field, g)?;
    let nl = nonlinearity(&state.field, g)?;
    let gm = MetricAtPoint::euclidean(m);
    // tangent direction field V (g-skewness is conformal-invariant, so the
    // Euclidean frame serves every supported metric)
    let mut v = AcsField::zeros(grid.clone());
    let mut idx = vec![0usize; m];
    for flat in 0..grid.n_points() {
        grid.multi_index(flat, &mut idx);
        if grid.is_boundary_cell(&idx) {
            continue;
        }
        let amb = lap.to_mat(flat).sub(&nl.to_mat(flat)).scale(2.0);
        let jm = state.field.to_mat(flat);
        let s = tangent_projection(&amb, &jm, &gm)?;
        v.set_mat(flat, &s);
    }
    let mut dt = cfg.dt_factor * grid.h() * grid.h();
    for _ in 0..=BACKTRACK_LIMIT {
        match retract(&state.field, &v, dt, &grid) {
            Ok(mut trial) => {
                if trial.project().is_ok() && energy(&trial, g)? <= base_energy {
                    state.field = trial;
                    state.step += 1;
                    state.time += dt;
                    return Ok(());
                }
            }
            Err(_) => {} // chart out of range at this dt; halve and retry
        }
        dt *= 0.5;
    }
    Err(Error::StepFailure(format!(
        "backtracking exhausted after {BACKTRACK_LIMIT} halvings"
    )))
}

fn retract(
    field: &AcsField,
    v: &AcsField,
    dt: f64,
    grid: &crate::grid::Grid,
) -> Result<AcsField> {
    let m = grid.dim();
    let mut out = field.clone();
    let mut idx = vec![0usize; m];
    for flat in 0..grid.n_points() {
        grid.multi_index(flat, &mut idx);
        if grid.is_boundary_cell(&idx) {
            continue;
        }
        let jm = field.to_mat(flat);
        let c = jm.mul(&v.to_mat(flat)).scale(-dt / 2.0);
        let next = cayley_chart_inv(&c, &jm)?;
        out.set_mat(flat, &next);
    }
    Ok(out)
}
