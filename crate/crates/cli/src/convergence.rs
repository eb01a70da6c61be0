//! Self-convergence studies: successive grid refinement at a fixed end time,
//! and successive halving of the time step on a fixed grid.

use std::fmt;

use serde::Serialize;

use chemolab::model::InitialProfiles;
use chemolab::solver::{self, SchemeOptions};
use chemolab::{Advection, Grid, Profile, ScenarioConfig, State};

use crate::error::CliError;
use crate::output::format_f64;

/// Error of one level against the restriction of the next finer one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelError {
    pub cells: Vec<usize>,
    pub h: f64,
    /// `L^1` distance per field: u, v, w.
    pub errors: [f64; 3],
    /// Sum of the three field errors, the `L^1` error of the whole state.
    pub total: f64,
    /// `log2` of this level's error over the next level's, per field.
    pub orders: Option<[f64; 3]>,
    /// Same for `total`.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub scheme: Advection,
    pub t_end: f64,
    pub rows: Vec<LevelError>,
}

impl ConvergenceTable {
    /// Smallest observed order of the whole-state error over all level pairs.
    pub fn min_order(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.order).reduce(f64::min)
    }

    /// Smallest observed order over all fields and level pairs.
    pub fn min_field_order(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.orders)
            .flatten()
            .reduce(f64::min)
    }
}

impl fmt::Display for ConvergenceTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "cells,h,err_u,err_v,err_w,err,order_u,order_v,order_w,order"
        )?;
        for r in &self.rows {
            let cells: Vec<String> = r.cells.iter().map(|c| c.to_string()).collect();
            let orders = match (r.orders, r.order) {
                (Some(o), Some(total)) => {
                    format!("{},{}", o.map(format_f64).join(","), format_f64(total))
                }
                _ => ",,,".to_string(),
            };
            writeln!(
                f,
                "{},{},{},{},{}",
                cells.join("x"),
                format_f64(r.h),
                r.errors.map(format_f64).join(","),
                format_f64(r.total),
                orders
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemporalTable {
    /// Largest step of the three runs; the others use half and a quarter.
    pub dt: f64,
    /// `L^1` distance between the `dt` and `dt/2` runs, per field.
    pub diff_coarse: [f64; 3],
    /// Same between the `dt/2` and `dt/4` runs.
    pub diff_fine: [f64; 3],
    /// `log2(diff_coarse / diff_fine)`, about 1 for a first-order method.
    pub orders: [f64; 3],
}

impl fmt::Display for TemporalTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dt,diff_u,diff_v,diff_w")?;
        writeln!(
            f,
            "{},{}",
            format_f64(self.dt),
            self.diff_coarse.map(format_f64).join(",")
        )?;
        writeln!(
            f,
            "{},{}",
            format_f64(0.5 * self.dt),
            self.diff_fine.map(format_f64).join(",")
        )?;
        writeln!(f, "order,{}", self.orders.map(format_f64).join(","))
    }
}

/// `int |a - b|` on `grid`.
pub fn l1_distance(a: &[f64], b: &[f64], grid: &Grid) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * grid.volume_element()
}

fn field_distances(a: &State, b: &State, grid: &Grid) -> [f64; 3] {
    [
        l1_distance(&a.u, &b.u, grid),
        l1_distance(&a.v, &b.v, grid),
        l1_distance(&a.w, &b.w, grid),
    ]
}

fn final_state(config: &ScenarioConfig) -> Result<State, CliError> {
    let out = solver::run(config)?;
    match out.outcome {
        chemolab::RunOutcome::Completed => Ok(out.final_state),
        chemolab::RunOutcome::Blowup { t, .. } => Err(CliError::Usage(format!(
            "convergence run diverged at t = {t}"
        ))),
    }
}

/// Only the end state matters here, so intermediate sampling is skipped.
fn end_only(config: &ScenarioConfig) -> ScenarioConfig {
    let mut c = config.clone();
    c.output_every = c.t_end;
    c
}

/// Replaces each level's initial profiles by the restriction of the finest
/// level's samples, so that every level starts from exactly the restricted
/// finer data and only the evolution contributes to the level errors.
fn nest_initial_data(configs: &mut [ScenarioConfig]) -> Result<(), CliError> {
    let Some(finest) = configs.last() else {
        return Ok(());
    };
    let data = finest
        .initial
        .sample(&finest.grid)
        .map_err(chemolab::SolverError::from)?;
    let mut fields = [data.u0, data.v0, data.w0];
    for cfg in configs.iter_mut().rev() {
        if cfg.grid.len() != fields[0].len() {
            fields = fields.map(|f| cfg.grid.restrict(&f));
        }
        let [u, v, w] = fields.clone().map(|values| Profile::Values { values });
        cfg.initial = InitialProfiles { u, v, w };
    }
    Ok(())
}

/// Runs `levels` grids, the first being `base.grid`, concurrently.
///
/// Returns the table and each level's grid with its final state.
pub fn spatial_study(
    base: &ScenarioConfig,
    levels: usize,
) -> Result<(ConvergenceTable, Vec<(Grid, State)>), CliError> {
    let mut configs = Vec::with_capacity(levels);
    let mut cfg = end_only(base);
    for _ in 0..levels {
        configs.push(cfg.clone());
        cfg.grid = cfg.grid.refined();
    }
    nest_initial_data(&mut configs)?;
    let states: Vec<State> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| s.spawn(move || final_state(c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("refinement level panicked"))
            .collect::<Result<_, _>>()
    })?;

    let mut rows: Vec<LevelError> = (0..levels - 1)
        .map(|k| {
            let grid = &configs[k].grid;
            let fine = &states[k + 1];
            let restricted = State {
                t: fine.t,
                u: grid.restrict(&fine.u),
                v: grid.restrict(&fine.v),
                w: grid.restrict(&fine.w),
            };
            let errors = field_distances(&states[k], &restricted, grid);
            LevelError {
                cells: grid.cells().to_vec(),
                h: grid.h_min(),
                errors,
                total: errors.iter().sum(),
                orders: None,
                order: None,
            }
        })
        .collect();
    for k in 0..rows.len().saturating_sub(1) {
        let (a, b) = (rows[k].errors, rows[k + 1].errors);
        rows[k].orders = Some([0, 1, 2].map(|i| (a[i] / b[i]).log2()));
        rows[k].order = Some((rows[k].total / rows[k + 1].total).log2());
    }
    let table = ConvergenceTable {
        scheme: base.scheme,
        t_end: base.t_end,
        rows,
    };
    let grids_states = configs.into_iter().map(|c| c.grid).zip(states).collect();
    Ok((table, grids_states))
}

/// Runs the base grid with steps `dt`, `dt/2`, `dt/4`, where `dt` is half the
/// stable step of the initial state.
pub fn temporal_study(base: &ScenarioConfig) -> Result<TemporalTable, CliError> {
    let cfg = end_only(base);
    let initial = cfg
        .initial
        .sample(&cfg.grid)
        .map_err(chemolab::SolverError::from)?;
    let scheme = SchemeOptions {
        dt_max: f64::INFINITY,
        ..SchemeOptions::from_config(&cfg)
    };
    let dt = 0.5 * solver::stable_dt(&initial.state(), &cfg.params, &cfg.grid, &scheme);
    let configs: Vec<ScenarioConfig> = [1.0, 0.5, 0.25]
        .iter()
        .map(|f| {
            let mut c = cfg.clone();
            c.dt_max = dt * f;
            c
        })
        .collect();
    let states: Vec<State> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| s.spawn(move || final_state(c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("time-step level panicked"))
            .collect::<Result<_, _>>()
    })?;
    let diff_coarse = field_distances(&states[0], &states[1], &cfg.grid);
    let diff_fine = field_distances(&states[1], &states[2], &cfg.grid);
    Ok(TemporalTable {
        dt,
        diff_coarse,
        diff_fine,
        orders: [0, 1, 2].map(|i| (diff_coarse[i] / diff_fine[i]).log2()),
    })
}
