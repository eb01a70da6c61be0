//! Cell-centered finite-volume discretization with zero-flux boundaries and
//! explicit Euler time stepping.
//!
//! Every flux lives on a face and is added to one cell and subtracted from
//! its neighbour, so the discrete masses of `u` and `v` telescope exactly.
//! Boundary faces are never written: they carry zero flux, which is the
//! discrete Neumann condition.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsContext, DiagnosticsRecord};
use crate::error::SolverError;
use crate::model::{Advection, Grid, InitialData, ModelParams, ScenarioConfig, State};
use crate::weight::{self, WeightFunction};

/// Smallest time step the integrator accepts.
pub const DT_FLOOR: f64 = 1e-15;
/// Negative values above this are rounding; below it the step is rejected.
pub const POSITIVITY_TOLERANCE: f64 = 1e-12;
/// Negative signal values above this are clipped to zero.
pub const SIGNAL_CLIP: f64 = 1e-14;

const TINY: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeOptions {
    pub advection: Advection,
    pub dt_max: f64,
    pub cfl_safety: f64,
    pub blowup_linf: f64,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        Self {
            advection: Advection::Central,
            dt_max: f64::INFINITY,
            cfl_safety: 0.5,
            blowup_linf: 1e8,
        }
    }
}

impl SchemeOptions {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        Self {
            advection: config.scheme,
            dt_max: config.dt_max,
            cfl_safety: config.cfl_safety,
            blowup_linf: config.blowup_linf,
        }
    }
}

/// Face-centered values, one vector per axis.
///
/// Entry `c` of axis `k` belongs to the upper face of cell `c` along `k`.
/// For the last cell along the axis that face is on the boundary and the
/// entry is zero; lower boundary faces are implicit zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    pub axes: Vec<Vec<f64>>,
}

impl FaceField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            axes: vec![vec![0.0; grid.len()]; grid.dim()],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.axes
            .iter()
            .flat_map(|a| a.iter())
            .fold(0.0, |m, &x| m.max(x.abs()))
    }
}

/// Fluxes of the three fields through every face.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFluxes {
    pub u: FaceField,
    pub v: FaceField,
    pub w: FaceField,
}

/// Visits every interior face along `axis` as `(lower cell, upper cell)`.
#[inline]
fn for_each_interior_face(grid: &Grid, axis: usize, mut f: impl FnMut(usize, usize)) {
    let cells = grid.cells3();
    let stride = grid.strides()[axis];
    let n = cells[axis];
    let block = stride * n;
    let outer = grid.len() / block;
    // within a block the lower cells of the faces are contiguous
    for o in 0..outer {
        let base = o * block;
        for lo in base..base + (n - 1) * stride {
            f(lo, lo + stride);
        }
    }
}

/// Two-point gradient `(w_hi - w_lo) / h` across every interior face.
pub fn grad_w_faces(w: &[f64], grid: &Grid) -> FaceField {
    let h = grid.spacing3();
    let mut out = FaceField::zeros(grid);
    for (k, axis) in out.axes.iter_mut().enumerate() {
        let inv_h = 1.0 / h[k];
        for_each_interior_face(grid, k, |lo, hi| axis[lo] = (w[hi] - w[lo]) * inv_h);
    }
    out
}

/// Face flux `-(u_hi - u_lo)/h + chi * u_face * grad_w` of one species.
pub fn species_flux(
    density: &[f64],
    chi: f64,
    gw: &FaceField,
    grid: &Grid,
    scheme: Advection,
) -> FaceField {
    let h = grid.spacing3();
    let mut out = FaceField::zeros(grid);
    for (k, axis) in out.axes.iter_mut().enumerate() {
        let inv_h = 1.0 / h[k];
        let g = &gw.axes[k];
        for_each_interior_face(grid, k, |lo, hi| {
            let velocity = chi * g[lo];
            let face = match scheme {
                Advection::Central => 0.5 * (density[lo] + density[hi]),
                Advection::Upwind => {
                    if velocity > 0.0 {
                        density[lo]
                    } else if velocity < 0.0 {
                        density[hi]
                    } else {
                        0.5 * (density[lo] + density[hi])
                    }
                }
            };
            axis[lo] = -(density[hi] - density[lo]) * inv_h + velocity * face;
        });
    }
    out
}

/// Pure diffusive flux `-grad w` of the signal.
fn diffusive_flux(gw: &FaceField) -> FaceField {
    FaceField {
        axes: gw
            .axes
            .iter()
            .map(|a| a.iter().map(|&g| -g).collect())
            .collect(),
    }
}

/// Conservative divergence: net outflow of each cell per unit volume.
pub fn divergence(flux: &FaceField, grid: &Grid) -> Vec<f64> {
    let h = grid.spacing3();
    let mut out = vec![0.0; grid.len()];
    for (k, axis) in flux.axes.iter().enumerate() {
        let inv_h = 1.0 / h[k];
        for_each_interior_face(grid, k, |lo, hi| {
            let q = axis[lo] * inv_h;
            out[lo] += q;
            out[hi] -= q;
        });
    }
    out
}

pub fn face_fluxes(
    state: &State,
    params: &ModelParams,
    grid: &Grid,
    scheme: Advection,
) -> FaceFluxes {
    let gw = grad_w_faces(&state.w, grid);
    FaceFluxes {
        u: species_flux(&state.u, params.chi1, &gw, grid, scheme),
        v: species_flux(&state.v, params.chi2, &gw, grid, scheme),
        w: diffusive_flux(&gw),
    }
}

/// Time derivatives of the three cell fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Rhs {
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
    pub dw: Vec<f64>,
}

pub fn rhs(state: &State, params: &ModelParams, grid: &Grid, scheme: &SchemeOptions) -> Rhs {
    rhs_fused(state, params, grid, scheme)
}

/// Explicit stability limit: the minimum of the diffusive, advective and
/// absorption limits, scaled by `cfl_safety` and capped by `dt_max`.
///
/// The advective limit counts the `2 dim` faces a cell can drain through,
/// so with `cfl_safety <= 1/2` the upwind update of `u`, `v` and the update
/// of `w` are convex combinations (positivity and the maximum principle).
pub fn stable_dt(state: &State, params: &ModelParams, grid: &Grid, scheme: &SchemeOptions) -> f64 {
    stable_dt_with(state, params, grid, scheme, max_grad_w(&state.w, grid))
}

fn stable_dt_with(
    state: &State,
    params: &ModelParams,
    grid: &Grid,
    scheme: &SchemeOptions,
    max_grad_w: f64,
) -> f64 {
    let h = grid.h_min();
    let faces = 2.0 * grid.dim() as f64;
    let diffusion = h * h / faces;
    let velocity = params.chi_max() * max_grad_w;
    let advection = h / (faces * velocity).max(TINY);
    let max_absorption = state.u.iter().zip(&state.v).fold(0.0, |m: f64, (&u, &v)| {
        m.max(params.alpha * u + params.beta * v)
    });
    let absorption = 1.0 / max_absorption.max(TINY);
    (scheme.cfl_safety * diffusion.min(advection).min(absorption)).min(scheme.dt_max)
}

/// One forward-Euler step of size `dt`.
pub fn step(
    state: &State,
    dt: f64,
    params: &ModelParams,
    grid: &Grid,
    scheme: &SchemeOptions,
) -> Result<State, SolverError> {
    let r = rhs(state, params, grid, scheme);
    advance(state, &r, dt)
}

fn advance(state: &State, r: &Rhs, dt: f64) -> Result<State, SolverError> {
    let update = |field: &'static str, old: &[f64], d: &[f64]| -> Result<Vec<f64>, SolverError> {
        let next: Vec<f64> = old.iter().zip(d).map(|(&x, &dx)| x + dt * dx).collect();
        let bad = next
            .iter()
            .position(|&y| !(y.is_finite() && y >= -POSITIVITY_TOLERANCE));
        match bad {
            None => Ok(next),
            Some(cell) if !next[cell].is_finite() => Err(SolverError::NonFinite { field, cell }),
            Some(cell) => Err(SolverError::Positivity {
                field,
                cell,
                value: next[cell],
            }),
        }
    };
    let u = update("u", &state.u, &r.du)?;
    let v = update("v", &state.v, &r.dv)?;
    let mut w = update("w", &state.w, &r.dw)?;
    for x in w.iter_mut() {
        if *x < 0.0 && *x >= -SIGNAL_CLIP {
            *x = 0.0;
        }
    }
    Ok(State {
        t: state.t + dt,
        u,
        v,
        w,
    })
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RunOutcome {
    Completed,
    /// Divergence sentinel tripped: `value` in `field` at `cell` and time `t`.
    Blowup {
        t: f64,
        field: String,
        cell: usize,
        value: f64,
    },
}

/// Extremes seen over every step of a run, not just the sampled ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    pub min_u: f64,
    pub min_v: f64,
    pub min_w: f64,
    pub max_w: f64,
    /// Largest single-step increase of `max w` (zero or negative when the
    /// maximum never grows).
    pub max_w_rise: f64,
}

impl Envelope {
    fn new(state: &State) -> Self {
        Self {
            min_u: min_of(&state.u),
            min_v: min_of(&state.v),
            min_w: min_of(&state.w),
            max_w: max_of(&state.w),
            max_w_rise: f64::NEG_INFINITY,
        }
    }

    fn update(&mut self, prev_max_w: f64, state: &State) -> f64 {
        let max_w = max_of(&state.w);
        self.min_u = self.min_u.min(min_of(&state.u));
        self.min_v = self.min_v.min(min_of(&state.v));
        self.min_w = self.min_w.min(min_of(&state.w));
        self.max_w = self.max_w.max(max_w);
        self.max_w_rise = self.max_w_rise.max(max_w - prev_max_w);
        max_w
    }
}

fn min_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_state: State,
    pub records: Vec<DiagnosticsRecord>,
    pub outcome: RunOutcome,
    pub steps: usize,
    pub initial: InitialData,
    pub weight: Option<WeightFunction>,
    pub envelope: Envelope,
}

/// Weight function for the tracked functional, if the config asks for one.
///
/// The amplitude is `M = max(chi1, chi2) * max w0`. A missing `p` is taken
/// from the equality root, a missing `eps` from the threshold construction.
pub fn weight_for(
    config: &ScenarioConfig,
    initial: &InitialData,
) -> Result<Option<WeightFunction>, SolverError> {
    let m = config.params.chi_max() * initial.w0_max;
    let (p, eps) = match (config.weight_p, config.weight_eps) {
        (None, None) => return Ok(None),
        (Some(p), Some(eps)) => (p, eps),
        (None, Some(eps)) => (weight::p_for_equality(m, eps)?, eps),
        (Some(p), None) => (p, weight::epsilon_for_threshold(m, config.grid.dim())?),
    };
    Ok(Some(weight::make_weight(p, eps, m)?))
}

/// Integrates the scenario to `t_end`, sampling diagnostics every
/// `output_every` and at `t_end`.
pub fn run(config: &ScenarioConfig) -> Result<RunOutput, SolverError> {
    config.validate()?;
    let grid = &config.grid;
    let params = &config.params;
    let scheme = SchemeOptions::from_config(config);
    let initial = config.initial.sample(grid)?;
    let weight = weight_for(config, &initial)?;
    let ctx = DiagnosticsContext {
        grid: grid.clone(),
        u_bar: initial.u_bar,
        v_bar: initial.v_bar,
        weight: weight.map(|wf| (wf, params.chi1)),
    };

    let mut state = initial.state();
    let mut envelope = Envelope::new(&state);
    let mut max_w = envelope.max_w;
    let mut records = vec![diagnostics::record(&state, &ctx, None)?];
    let mut steps = 0usize;
    let mut sample = 1u64;
    let mut outcome = RunOutcome::Completed;

    while state.t < config.t_end {
        let target = (sample as f64 * config.output_every).min(config.t_end);
        let dt_stable = stable_dt_with(&state, params, grid, &scheme, max_grad_w(&state.w, grid));
        if dt_stable < DT_FLOOR {
            return Err(SolverError::DtUnderflow {
                t: state.t,
                dt: dt_stable,
            });
        }
        let remaining = target - state.t;
        let (dt, hits_target) = if dt_stable >= remaining {
            (remaining, true)
        } else {
            (dt_stable, false)
        };
        let r = rhs_fused(&state, params, grid, &scheme);
        let mut next = match advance(&state, &r, dt) {
            Ok(next) => next,
            Err(SolverError::NonFinite { field, cell }) => {
                outcome = RunOutcome::Blowup {
                    t: state.t + dt,
                    field: field.to_string(),
                    cell,
                    value: f64::NAN,
                };
                break;
            }
            Err(e) => return Err(e),
        };
        if hits_target {
            next.t = target;
        }
        steps += 1;
        max_w = envelope.update(max_w, &next);
        state = next;

        let blowup = [("u", &state.u), ("v", &state.v)]
            .into_iter()
            .find_map(|(name, f)| {
                f.iter()
                    .enumerate()
                    .find(|(_, &x)| x.abs() > scheme.blowup_linf)
                    .map(|(cell, &x)| (name, cell, x))
            });
        if hits_target || blowup.is_some() {
            let prev = records.last();
            records.push(diagnostics::record(&state, &ctx, prev)?);
            if hits_target {
                sample += 1;
            }
        }
        if let Some((field, cell, value)) = blowup {
            outcome = RunOutcome::Blowup {
                t: state.t,
                field: field.to_string(),
                cell,
                value,
            };
            break;
        }
    }

    Ok(RunOutput {
        final_state: state,
        records,
        outcome,
        steps,
        initial,
        weight,
        envelope,
    })
}

/// Same result as `-divergence(species_flux(..))` for u and v and
/// `divergence(gw) - (alpha u + beta v) w` for w, in one pass per axis.
fn rhs_fused(state: &State, params: &ModelParams, grid: &Grid, scheme: &SchemeOptions) -> Rhs {
    let n = grid.len();
    let h = grid.spacing3();
    let (u, v, w) = (&state.u[..n], &state.v[..n], &state.w[..n]);
    let mut du = vec![0.0; n];
    let mut dv = vec![0.0; n];
    let mut dw = vec![0.0; n];
    let upwind = scheme.advection == Advection::Upwind;
    let face_value = |d: &[f64], lo: usize, hi: usize, velocity: f64| {
        if upwind && velocity > 0.0 {
            d[lo]
        } else if upwind && velocity < 0.0 {
            d[hi]
        } else {
            0.5 * (d[lo] + d[hi])
        }
    };
    for (k, hk) in h.iter().enumerate().take(grid.dim()) {
        let inv_h = 1.0 / hk;
        for_each_interior_face(grid, k, |lo, hi| {
            let g = (w[hi] - w[lo]) * inv_h;
            let vel_u = params.chi1 * g;
            let vel_v = params.chi2 * g;
            let fu = -(u[hi] - u[lo]) * inv_h + vel_u * face_value(u, lo, hi, vel_u);
            let fv = -(v[hi] - v[lo]) * inv_h + vel_v * face_value(v, lo, hi, vel_v);
            let (qu, qv, qw) = (fu * inv_h, fv * inv_h, g * inv_h);
            du[lo] -= qu;
            du[hi] += qu;
            dv[lo] -= qv;
            dv[hi] += qv;
            dw[lo] += qw;
            dw[hi] -= qw;
        });
    }
    for i in 0..n {
        dw[i] -= (params.alpha * u[i] + params.beta * v[i]) * w[i];
    }
    Rhs { du, dv, dw }
}

/// Largest two-point gradient of `w` over the interior faces.
fn max_grad_w(w: &[f64], grid: &Grid) -> f64 {
    let h = grid.spacing3();
    let mut out = 0.0f64;
    for (k, hk) in h.iter().enumerate().take(grid.dim()) {
        let inv_h = 1.0 / hk;
        for_each_interior_face(grid, k, |lo, hi| {
            out = out.max(((w[hi] - w[lo]) * inv_h).abs());
        });
    }
    out
}
