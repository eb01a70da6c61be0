//! Scalar diagnostics of a run and the checks built on them: conservation,
//! the signal envelope, the space-time gradient budgets, the weighted `L^p`
//! functional, and convergence to the homogeneous state.

use serde::Serialize;

use crate::error::DiagnosticsError;
use crate::model::{Grid, State};
use crate::solver::Envelope;
use crate::weight::WeightFunction;

/// Relative slack allowed when `chi * max w` touches the end of the weight domain.
const WEIGHT_DOMAIN_SLACK: f64 = 1e-12;

/// One time sample of every tracked quantity.
///
/// Field order is the column order of the diagnostics CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub linf_u: f64,
    pub linf_v: f64,
    pub linf_w: f64,
    /// `max |u - u_bar|`.
    pub dev_u: f64,
    /// `max |v - v_bar|`.
    pub dev_v: f64,
    /// `(1/p) int u^p phi(chi1 w)`, when a weight is configured.
    pub lyapunov: Option<f64>,
    pub dirichlet_u: f64,
    pub dirichlet_v: f64,
    pub dirichlet_w: f64,
    pub cum_dirichlet_u: f64,
    pub cum_dirichlet_v: f64,
    pub cum_dirichlet_w: f64,
}

impl DiagnosticsRecord {
    pub const COLUMNS: [&'static str; 15] = [
        "t",
        "mass_u",
        "mass_v",
        "linf_u",
        "linf_v",
        "linf_w",
        "dev_u",
        "dev_v",
        "lyapunov",
        "dirichlet_u",
        "dirichlet_v",
        "dirichlet_w",
        "cum_dirichlet_u",
        "cum_dirichlet_v",
        "cum_dirichlet_w",
    ];
}

/// Fixed reference data for [`record`].
#[derive(Debug, Clone)]
pub struct DiagnosticsContext {
    pub grid: Grid,
    pub u_bar: f64,
    pub v_bar: f64,
    /// Weight and the sensitivity that scales its argument.
    pub weight: Option<(WeightFunction, f64)>,
}

/// `int f`, the cell sum times the cell volume.
pub fn mass(field: &[f64], grid: &Grid) -> f64 {
    grid.volume_element() * field.iter().sum::<f64>()
}

/// Discrete `int |grad f|^2` from the face gradients.
///
/// Each axis has `m_k - 1` interior faces; they are weighted by the face
/// area times `L_k / (m_k - 1)` so that together they tile the box, and a
/// field with unit slope along one axis has energy exactly `|Omega|`.
pub fn dirichlet_energy(field: &[f64], grid: &Grid) -> f64 {
    let cells = grid.cells();
    let spacing = grid.spacing();
    let strides = grid.strides();
    let mut total = 0.0;
    for k in 0..grid.dim() {
        let face_area = grid.volume_element() / spacing[k];
        let dual = grid.lengths()[k] / (cells[k] - 1) as f64;
        let stride = strides[k];
        let mut sum = 0.0;
        for c in 0..field.len() {
            if (c / stride) % cells[k] + 1 < cells[k] {
                let g = (field[c + stride] - field[c]) / spacing[k];
                sum += g * g;
            }
        }
        total += face_area * dual * sum;
    }
    total
}

/// `(1/p) int u^p phi(chi w)`.
pub fn lyapunov(
    state: &State,
    wf: &WeightFunction,
    chi: f64,
    grid: &Grid,
) -> Result<f64, DiagnosticsError> {
    let w_max = state.w.iter().copied().fold(0.0, f64::max);
    let top = chi * w_max;
    if top > wf.m * (1.0 + WEIGHT_DOMAIN_SLACK) {
        return Err(DiagnosticsError::WeightDomain {
            value: top,
            m: wf.m,
        });
    }
    let mut sum = 0.0;
    for (&u, &w) in state.u.iter().zip(&state.w) {
        let s = (chi * w).clamp(0.0, wf.m);
        sum += u.powf(wf.p) * wf.phi(s)?;
    }
    Ok(grid.volume_element() * sum / wf.p)
}

fn linf(field: &[f64]) -> f64 {
    field.iter().fold(0.0, |m: f64, &x| m.max(x.abs()))
}

fn deviation(field: &[f64], mean: f64) -> f64 {
    field.iter().fold(0.0, |m: f64, &x| m.max((x - mean).abs()))
}

/// Builds the record for `state`, advancing the time integrals by the
/// trapezoid rule from `prev`.
pub fn record(
    state: &State,
    ctx: &DiagnosticsContext,
    prev: Option<&DiagnosticsRecord>,
) -> Result<DiagnosticsRecord, DiagnosticsError> {
    let grid = &ctx.grid;
    let dirichlet_u = dirichlet_energy(&state.u, grid);
    let dirichlet_v = dirichlet_energy(&state.v, grid);
    let dirichlet_w = dirichlet_energy(&state.w, grid);
    let lyapunov = match &ctx.weight {
        Some((wf, chi)) => Some(lyapunov(state, wf, *chi, grid)?),
        None => None,
    };
    let (cum_u, cum_v, cum_w) = match prev {
        None => (0.0, 0.0, 0.0),
        Some(p) => {
            let dt = state.t - p.t;
            (
                p.cum_dirichlet_u + 0.5 * dt * (p.dirichlet_u + dirichlet_u),
                p.cum_dirichlet_v + 0.5 * dt * (p.dirichlet_v + dirichlet_v),
                p.cum_dirichlet_w + 0.5 * dt * (p.dirichlet_w + dirichlet_w),
            )
        }
    };
    Ok(DiagnosticsRecord {
        t: state.t,
        mass_u: mass(&state.u, grid),
        mass_v: mass(&state.v, grid),
        linf_u: linf(&state.u),
        linf_v: linf(&state.v),
        linf_w: linf(&state.w),
        dev_u: deviation(&state.u, ctx.u_bar),
        dev_v: deviation(&state.v, ctx.v_bar),
        lyapunov,
        dirichlet_u,
        dirichlet_v,
        dirichlet_w,
        cum_dirichlet_u: cum_u,
        cum_dirichlet_v: cum_v,
        cum_dirichlet_w: cum_w,
    })
}

/// Log-linear fit of the signal decay over a trailing window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub t_start: f64,
    pub rate: f64,
    pub r_squared: f64,
    /// `alpha u_bar + beta v_bar`, the decay rate of the homogeneous mode.
    pub reference_rate: f64,
    /// Half of the reference rate, the rate guaranteed after stabilization.
    pub half_reference: f64,
}

/// Fits `-ln(y) ~ rate * t + c` by least squares over the trailing
/// `window_fraction` of the samples.
pub fn fit_decay(
    series: &[(f64, f64)],
    window_fraction: f64,
    reference_rate: f64,
) -> Result<DecayFit, DiagnosticsError> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(DiagnosticsError::FitDeclined(format!(
            "window fraction {window_fraction} outside (0, 1]"
        )));
    }
    let take = ((series.len() as f64 * window_fraction).ceil() as usize).max(3);
    if series.len() < take {
        return Err(DiagnosticsError::FitDeclined(format!(
            "need at least 3 samples, have {}",
            series.len()
        )));
    }
    let window = &series[series.len() - take..];
    if let Some(&(t, y)) = window.iter().find(|(_, y)| !(*y > 0.0 && y.is_finite())) {
        return Err(DiagnosticsError::FitDeclined(format!(
            "non-positive value {y} at t = {t}"
        )));
    }
    let n = window.len() as f64;
    let t_mean = window.iter().map(|p| p.0).sum::<f64>() / n;
    let y_mean = window.iter().map(|p| -p.1.ln()).sum::<f64>() / n;
    let mut stt = 0.0;
    let mut sty = 0.0;
    let mut syy = 0.0;
    for &(t, y) in window {
        let dt = t - t_mean;
        let dy = -y.ln() - y_mean;
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt == 0.0 {
        return Err(DiagnosticsError::FitDeclined(
            "window spans zero time".into(),
        ));
    }
    let rate = sty / stt;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sty * sty / (stt * syy)).clamp(0.0, 1.0)
    };
    Ok(DecayFit {
        t_start: window[0].0,
        rate,
        r_squared,
        reference_rate,
        half_reference: 0.5 * reference_rate,
    })
}

/// Tolerances of [`verify_theorems`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyTolerances {
    /// Relative drift of the masses of `u` and `v`.
    pub mass_drift: f64,
    /// Slack on `0 <= w <= max w0` and on the monotonicity of `max w`.
    pub envelope: f64,
    /// Slack on the signal gradient budget.
    pub energy: f64,
    /// Largest last-quarter share of the cumulative gradient integrals.
    pub tail_fraction: f64,
    /// End-state bound on `max |u - u_bar|`. Engineering choice: no rate is
    /// available for the densities.
    pub dev_u: f64,
    pub dev_v: f64,
    /// End-state bound on `max w`.
    pub linf_w: f64,
    /// Trailing share of samples used in the decay fit.
    pub window_fraction: f64,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        Self {
            mass_drift: 1e-10,
            envelope: 1e-12,
            energy: 1e-8,
            tail_fraction: 0.01,
            dev_u: 1e-3,
            dev_v: 1e-3,
            linf_w: 1e-3,
            window_fraction: 0.5,
        }
    }
}

/// Reference data a completed run is checked against.
#[derive(Debug, Clone)]
pub struct VerifyContext {
    pub w0_max: f64,
    /// `(1/2) int w0^2`.
    pub half_w0_sq: f64,
    /// `alpha u_bar + beta v_bar`.
    pub reference_rate: f64,
    /// Per-step extremes; without it only the samples are checked.
    pub envelope: Option<Envelope>,
    pub tolerances: VerifyTolerances,
}

impl VerifyContext {
    pub fn new(
        initial: &crate::model::InitialData,
        params: &crate::model::ModelParams,
        grid: &Grid,
        envelope: Option<Envelope>,
    ) -> Self {
        let sq: Vec<f64> = initial.w0.iter().map(|w| w * w).collect();
        Self {
            w0_max: initial.w0_max,
            half_w0_sq: 0.5 * mass(&sq, grid),
            reference_rate: params.alpha * initial.u_bar + params.beta * initial.v_bar,
            envelope,
            tolerances: VerifyTolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Measured quantity the check compares.
    pub value: f64,
    /// Threshold it was compared against.
    pub limit: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub checks: Vec<Check>,
    pub decay: Option<DecayFit>,
}

impl TheoremReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Runs the six theorem checks on a sampled series.
pub fn verify_theorems(series: &[DiagnosticsRecord], ctx: &VerifyContext) -> TheoremReport {
    let tol = &ctx.tolerances;
    let mut checks = Vec::with_capacity(6);
    let Some(first) = series.first() else {
        return TheoremReport {
            checks: vec![Check {
                name: "series",
                passed: false,
                value: 0.0,
                limit: 1.0,
                detail: "empty series".into(),
            }],
            decay: None,
        };
    };
    let last = series.last().unwrap_or(first);

    let drift = series
        .iter()
        .map(|r| {
            ((r.mass_u - first.mass_u).abs() / first.mass_u)
                .max((r.mass_v - first.mass_v).abs() / first.mass_v)
        })
        .fold(0.0, f64::max);
    checks.push(Check {
        name: "conservation",
        passed: drift <= tol.mass_drift,
        value: drift,
        limit: tol.mass_drift,
        detail: "max relative drift of mass_u, mass_v".into(),
    });

    let mut rise = series
        .windows(2)
        .map(|p| p[1].linf_w - p[0].linf_w)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut top = series.iter().map(|r| r.linf_w).fold(0.0, f64::max);
    let mut bottom = 0.0f64;
    if let Some(env) = &ctx.envelope {
        rise = rise.max(env.max_w_rise);
        top = top.max(env.max_w);
        bottom = env.min_w;
    }
    let overshoot = (top - ctx.w0_max).max(-bottom).max(rise).max(0.0);
    checks.push(Check {
        name: "max_principle",
        passed: overshoot <= tol.envelope,
        value: overshoot,
        limit: tol.envelope,
        detail: format!("min w {bottom:e}, max w {top}, largest rise of max w {rise:e}"),
    });

    let budget = ctx.half_w0_sq + tol.energy;
    let worst = series.iter().map(|r| r.cum_dirichlet_w).fold(0.0, f64::max);
    let monotone = series
        .windows(2)
        .all(|p| p[1].cum_dirichlet_w >= p[0].cum_dirichlet_w);
    checks.push(Check {
        name: "signal_energy_budget",
        passed: worst <= budget && monotone,
        value: worst,
        limit: budget,
        detail: format!("cumulative int|grad w|^2 vs (1/2) int w0^2; nondecreasing: {monotone}"),
    });

    let t_quarter = first.t + 0.75 * (last.t - first.t);
    let at_quarter = series
        .iter()
        .rev()
        .find(|r| r.t <= t_quarter)
        .unwrap_or(first);
    let tail_share = |cum_end: f64, cum_q: f64| {
        if cum_end > 0.0 {
            (cum_end - cum_q) / cum_end
        } else {
            0.0
        }
    };
    let share = tail_share(last.cum_dirichlet_u, at_quarter.cum_dirichlet_u)
        .max(tail_share(last.cum_dirichlet_v, at_quarter.cum_dirichlet_v));
    checks.push(Check {
        name: "gradient_integrals_converge",
        passed: share <= tol.tail_fraction,
        value: share,
        limit: tol.tail_fraction,
        detail: "last-quarter share of int int |grad u|^2 and |grad v|^2".into(),
    });

    let end_ok = last.dev_u <= tol.dev_u && last.dev_v <= tol.dev_v && last.linf_w <= tol.linf_w;
    checks.push(Check {
        name: "stabilization",
        passed: end_ok,
        value: (last.dev_u / tol.dev_u)
            .max(last.dev_v / tol.dev_v)
            .max(last.linf_w / tol.linf_w),
        limit: 1.0,
        detail: format!(
            "dev_u {:e}, dev_v {:e}, linf_w {:e} at t = {}",
            last.dev_u, last.dev_v, last.linf_w, last.t
        ),
    });

    let samples: Vec<(f64, f64)> = series.iter().map(|r| (r.t, r.linf_w)).collect();
    let decay = fit_decay(&samples, tol.window_fraction, ctx.reference_rate);
    match &decay {
        Ok(fit) => checks.push(Check {
            name: "signal_decay_rate",
            passed: fit.rate >= fit.half_reference,
            value: fit.rate,
            limit: fit.half_reference,
            detail: format!(
                "fitted from t = {} (r^2 = {}), slowest-mode rate {}",
                fit.t_start, fit.r_squared, fit.reference_rate
            ),
        }),
        Err(e) => checks.push(Check {
            name: "signal_decay_rate",
            passed: false,
            value: f64::NAN,
            limit: 0.5 * ctx.reference_rate,
            detail: e.to_string(),
        }),
    }

    TheoremReport {
        checks,
        decay: decay.ok(),
    }
}
