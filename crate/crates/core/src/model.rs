//! Domain types shared by the solver and the diagnostics: model constants,
//! the box grid, cell-averaged states, and validation of initial data.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::ModelError;

/// Positive constants of the two-species chemotaxis system with signal absorption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Chemotactic sensitivity of `u`.
    pub chi1: f64,
    /// Chemotactic sensitivity of `v`.
    pub chi2: f64,
    /// Consumption rate of the signal by `u`.
    pub alpha: f64,
    /// Consumption rate of the signal by `v`.
    pub beta: f64,
}

impl ModelParams {
    pub fn new(chi1: f64, chi2: f64, alpha: f64, beta: f64) -> Result<Self, ModelError> {
        let params = Self {
            chi1,
            chi2,
            alpha,
            beta,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [
            ("chi1", self.chi1),
            ("chi2", self.chi2),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::NonPositiveParameter { name, value });
            }
        }
        Ok(())
    }

    pub fn chi_max(&self) -> f64 {
        self.chi1.max(self.chi2)
    }
}

/// Axis-aligned box `(0, L_1) x ... x (0, L_n)` split into uniform cells.
///
/// Cell fields are stored row-major with the x index running fastest.
/// Unused trailing axes hold a single cell of unit length so that indexing
/// code can always work in three dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    lengths: [f64; 3],
    cells: [usize; 3],
    spacing: [f64; 3],
    volume_element: f64,
}

impl Grid {
    pub fn new(lengths: &[f64], cells: &[usize]) -> Result<Self, ModelError> {
        let dim = lengths.len();
        if !(1..=3).contains(&dim) {
            return Err(ModelError::BadDimension(dim));
        }
        if cells.len() != dim {
            return Err(ModelError::AxisMismatch {
                lengths: dim,
                cells: cells.len(),
            });
        }
        let mut l = [1.0; 3];
        let mut m = [1usize; 3];
        let mut h = [1.0; 3];
        for k in 0..dim {
            if !(lengths[k].is_finite() && lengths[k] > 0.0) {
                return Err(ModelError::BadLength {
                    axis: k,
                    value: lengths[k],
                });
            }
            if cells[k] < 2 {
                return Err(ModelError::TooFewCells {
                    axis: k,
                    cells: cells[k],
                });
            }
            l[k] = lengths[k];
            m[k] = cells[k];
            h[k] = lengths[k] / cells[k] as f64;
        }
        let volume_element = h[..dim].iter().product();
        Ok(Self {
            dim,
            lengths: l,
            cells: m,
            spacing: h,
            volume_element,
        })
    }

    /// Unit box `(0,1)^dim` with `m` cells per axis.
    pub fn unit(dim: usize, m: usize) -> Result<Self, ModelError> {
        Self::new(&vec![1.0; dim], &vec![m; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn volume_element(&self) -> f64 {
        self.volume_element
    }

    /// Measure of the whole box.
    pub fn volume(&self) -> f64 {
        self.lengths().iter().product()
    }

    pub fn h_min(&self) -> f64 {
        self.spacing().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn cells3(&self) -> [usize; 3] {
        self.cells
    }

    pub(crate) fn spacing3(&self) -> [f64; 3] {
        self.spacing
    }

    /// Linear-index stride of each axis.
    pub fn strides(&self) -> [usize; 3] {
        [1, self.cells[0], self.cells[0] * self.cells[1]]
    }

    pub fn index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.cells[0] * (ijk[1] + self.cells[1] * ijk[2])
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.cells[0];
        let rest = idx / self.cells[0];
        [i, rest % self.cells[1], rest / self.cells[1]]
    }

    /// Cell-center coordinates; unused axes report 0.
    pub fn center(&self, idx: usize) -> [f64; 3] {
        let ijk = self.multi_index(idx);
        let mut x = [0.0; 3];
        for k in 0..self.dim {
            x[k] = (ijk[k] as f64 + 0.5) * self.spacing[k];
        }
        x
    }

    /// Samples a closed-form function at every cell center.
    pub fn sample<F: Fn([f64; 3]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|idx| f(self.center(idx))).collect()
    }

    /// Same box with twice as many cells along every axis.
    pub fn refined(&self) -> Self {
        let cells: Vec<usize> = self.cells().iter().map(|m| 2 * m).collect();
        Self::new(self.lengths(), &cells).expect("refining a valid grid stays valid")
    }

    /// Restricts a field given on `self.refined()` back to this grid by
    /// averaging the `2^dim` children of every coarse cell.
    pub fn restrict(&self, fine: &[f64]) -> Vec<f64> {
        let fine_grid = self.refined();
        assert_eq!(fine.len(), fine_grid.len(), "fine field has wrong size");
        let children = 1usize << self.dim;
        let mut coarse = vec![0.0; self.len()];
        for (idx, out) in coarse.iter_mut().enumerate() {
            let ijk = self.multi_index(idx);
            let mut acc = 0.0;
            for child in 0..children {
                let mut f = [0usize; 3];
                for k in 0..3 {
                    f[k] = if k < self.dim {
                        2 * ijk[k] + ((child >> k) & 1)
                    } else {
                        0
                    };
                }
                acc += fine[fine_grid.index(f)];
            }
            *out = acc / children as f64;
        }
        coarse
    }

    pub(crate) fn check_len(&self, field: &'static str, len: usize) -> Result<(), ModelError> {
        if len != self.len() {
            return Err(ModelError::FieldSize {
                field,
                expected: self.len(),
                found: len,
            });
        }
        Ok(())
    }
}

/// Cell-averaged densities `u`, `v` and signal `w` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

/// Initial data that passed [`validate_initial_data`], plus the derived
/// reference quantities used throughout the diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub u0: Vec<f64>,
    pub v0: Vec<f64>,
    pub w0: Vec<f64>,
    /// `max w0` over all cells.
    pub w0_max: f64,
    /// Spatial mean of `u0`.
    pub u_bar: f64,
    /// Spatial mean of `v0`.
    pub v_bar: f64,
}

impl InitialData {
    pub fn state(&self) -> State {
        State {
            t: 0.0,
            u: self.u0.clone(),
            v: self.v0.clone(),
            w: self.w0.clone(),
        }
    }
}

/// Checks `u0 > 0`, `v0 > 0`, `w0 >= 0` and finiteness in every cell.
pub fn validate_initial_data(
    u0: Vec<f64>,
    v0: Vec<f64>,
    w0: Vec<f64>,
    grid: &Grid,
) -> Result<InitialData, ModelError> {
    grid.check_len("u0", u0.len())?;
    grid.check_len("v0", v0.len())?;
    grid.check_len("w0", w0.len())?;
    for (field, values) in [("u0", &u0), ("v0", &v0)] {
        for (cell, &x) in values.iter().enumerate() {
            if !x.is_finite() {
                return Err(ModelError::NonFinite { field, cell });
            }
            if x <= 0.0 {
                return Err(ModelError::NonPositiveDensity {
                    field,
                    cell,
                    value: x,
                });
            }
        }
    }
    for (cell, &x) in w0.iter().enumerate() {
        if !x.is_finite() {
            return Err(ModelError::NonFinite { field: "w0", cell });
        }
        if x < 0.0 {
            return Err(ModelError::NegativeSignal { cell, value: x });
        }
    }
    let w0_max = w0.iter().copied().fold(0.0, f64::max);
    let u_bar = cell_mean(&u0);
    let v_bar = cell_mean(&v0);
    Ok(InitialData {
        u0,
        v0,
        w0,
        w0_max,
        u_bar,
        v_bar,
    })
}

// On a uniform grid mass/|Omega| reduces to the plain mean of the cells.
fn cell_mean(field: &[f64]) -> f64 {
    field.iter().sum::<f64>() / field.len() as f64
}

/// Outcome of comparing `chi_i * max w0` against the global-existence bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub m1: f64,
    pub m2: f64,
    /// `sqrt(2/n) * pi`.
    pub bound: f64,
    pub within: bool,
}

/// Advisory check of the smallness condition `max(chi1, chi2) * max w0 < sqrt(2/n) pi`.
pub fn threshold_check(params: &ModelParams, w0_max: f64, n: usize) -> ThresholdReport {
    let m1 = params.chi1 * w0_max;
    let m2 = params.chi2 * w0_max;
    let bound = threshold_bound(n);
    ThresholdReport {
        m1,
        m2,
        bound,
        within: m1.max(m2) < bound,
    }
}

pub fn threshold_bound(n: usize) -> f64 {
    (2.0 / n as f64).sqrt() * PI
}

/// Treatment of the density at a face in the chemotactic flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Advection {
    /// Arithmetic average of the two neighbouring cells.
    #[default]
    Central,
    /// Value of the cell the face velocity points away from.
    Upwind,
}

/// Closed-form or tabulated initial profile of one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `base + amplitude * prod_i cos(k_i pi x_i / L_i)`.
    CosineBump {
        base: f64,
        amplitude: f64,
        k: Vec<f64>,
    },
    /// `floor + amplitude * exp(-|x - center|^2 / (2 width^2))`.
    Gaussian {
        center: Vec<f64>,
        width: f64,
        amplitude: f64,
        floor: f64,
    },
    /// Explicit cell values in grid order.
    Values {
        values: Vec<f64>,
    },
}

impl Profile {
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>, ModelError> {
        let dim = grid.dim();
        match self {
            Profile::Constant { value } => Ok(vec![*value; grid.len()]),
            Profile::CosineBump { base, amplitude, k } => {
                if k.len() != dim {
                    return Err(ModelError::ProfileAxes {
                        expected: dim,
                        found: k.len(),
                    });
                }
                let lengths = grid.lengths().to_vec();
                Ok(grid.sample(|x| {
                    let mut prod = 1.0;
                    for a in 0..dim {
                        prod *= (k[a] * std::f64::consts::PI * x[a] / lengths[a]).cos();
                    }
                    base + amplitude * prod
                }))
            }
            Profile::Gaussian {
                center,
                width,
                amplitude,
                floor,
            } => {
                if center.len() != dim {
                    return Err(ModelError::ProfileAxes {
                        expected: dim,
                        found: center.len(),
                    });
                }
                if !(width.is_finite() && *width > 0.0) {
                    return Err(ModelError::BadWidth(*width));
                }
                Ok(grid.sample(|x| {
                    let r2: f64 = (0..dim).map(|a| (x[a] - center[a]).powi(2)).sum();
                    floor + amplitude * (-r2 / (2.0 * width * width)).exp()
                }))
            }
            Profile::Values { values } => {
                grid.check_len("values", values.len())?;
                Ok(values.clone())
            }
        }
    }
}

/// Initial profiles of the three fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialProfiles {
    pub u: Profile,
    pub v: Profile,
    pub w: Profile,
}

impl InitialProfiles {
    pub fn sample(&self, grid: &Grid) -> Result<InitialData, ModelError> {
        validate_initial_data(
            self.u.sample(grid)?,
            self.v.sample(grid)?,
            self.w.sample(grid)?,
            grid,
        )
    }
}

/// Everything needed to run one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: ModelParams,
    pub grid: Grid,
    pub initial: InitialProfiles,
    pub t_end: f64,
    pub dt_max: f64,
    pub cfl_safety: f64,
    /// Diagnostics sampling interval.
    pub output_every: f64,
    pub scheme: Advection,
    /// Divergence sentinel on `max(|u|, |v|)`.
    pub blowup_linf: f64,
    pub weight_p: Option<f64>,
    pub weight_eps: Option<f64>,
}

impl ScenarioConfig {
    /// Config with the documented defaults: central scheme, `cfl_safety = 0.5`,
    /// 200 diagnostic samples, no cap on `dt` beyond `t_end`.
    pub fn new(params: ModelParams, grid: Grid, initial: InitialProfiles, t_end: f64) -> Self {
        Self {
            params,
            grid,
            initial,
            t_end,
            dt_max: t_end,
            cfl_safety: 0.5,
            output_every: t_end / 200.0,
            scheme: Advection::Central,
            blowup_linf: 1e8,
            weight_p: None,
            weight_eps: None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.params.validate()?;
        let positive = |name: &'static str, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(ModelError::OutOfRange { name, value })
            }
        };
        positive("t_end", self.t_end)?;
        positive("dt_max", self.dt_max)?;
        positive("output_every", self.output_every)?;
        positive("blowup_linf", self.blowup_linf)?;
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(ModelError::OutOfRange {
                name: "cfl_safety",
                value: self.cfl_safety,
            });
        }
        if let Some(p) = self.weight_p {
            if !(p > 1.0 && p.is_finite()) {
                return Err(ModelError::OutOfRange {
                    name: "weight_p",
                    value: p,
                });
            }
        }
        if let Some(eps) = self.weight_eps {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(ModelError::OutOfRange {
                    name: "weight_eps",
                    value: eps,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_data_is_accepted() {
        let grid = Grid::unit(2, 8).unwrap();
        let n = grid.len();
        let data = validate_initial_data(vec![1.0; n], vec![1.0; n], vec![0.5; n], &grid).unwrap();
        assert_eq!(data.u_bar, 1.0);
        assert_eq!(data.v_bar, 1.0);
        assert_eq!(data.w0_max, 0.5);
    }

    #[test]
    fn zero_density_cell_is_rejected() {
        let grid = Grid::unit(1, 16).unwrap();
        let mut u0 = vec![1.0; 16];
        u0[5] = 0.0;
        let err = validate_initial_data(u0, vec![1.0; 16], vec![0.0; 16], &grid).unwrap_err();
        assert!(matches!(
            err,
            ModelError::NonPositiveDensity {
                field: "u0",
                cell: 5,
                ..
            }
        ));
        assert!(err.to_string().contains("non-positive initial density"));
    }

    #[test]
    fn non_finite_is_rejected() {
        let grid = Grid::unit(1, 4).unwrap();
        let err = validate_initial_data(
            vec![1.0; 4],
            vec![1.0; 4],
            vec![0.0, f64::NAN, 0.0, 0.0],
            &grid,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            ModelError::NonFinite {
                field: "w0",
                cell: 1
            }
        ));
        let err = validate_initial_data(
            vec![1.0, f64::INFINITY, 1.0, 1.0],
            vec![1.0; 4],
            vec![0.0; 4],
            &grid,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            ModelError::NonFinite {
                field: "u0",
                cell: 1
            }
        ));
    }

    #[test]
    fn cosine_mean_is_one() {
        let grid = Grid::unit(1, 64).unwrap();
        let u0 = grid.sample(|x| 1.0 + 0.5 * (std::f64::consts::PI * x[0]).cos());
        let n = grid.len();
        let data = validate_initial_data(u0, vec![1.0; n], vec![0.0; n], &grid).unwrap();
        assert!((data.u_bar - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation_is_idempotent() {
        let grid = Grid::unit(2, 6).unwrap();
        let u0 = grid.sample(|x| 1.0 + x[0] * x[1]);
        let n = grid.len();
        let once = validate_initial_data(u0, vec![2.0; n], vec![0.1; n], &grid).unwrap();
        let twice = validate_initial_data(once.u0.clone(), once.v0.clone(), once.w0.clone(), &grid)
            .unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn grid_rejects_degenerate_axes() {
        assert!(matches!(
            Grid::new(&[1.0, 1.0], &[8, 1]),
            Err(ModelError::TooFewCells { axis: 1, cells: 1 })
        ));
        assert!(Grid::new(&[1.0; 4], &[4; 4]).is_err());
        assert!(Grid::new(&[0.0], &[4]).is_err());
        let g = Grid::new(&[2.0, 0.5], &[8, 4]).unwrap();
        assert_eq!(g.spacing(), &[0.25, 0.125]);
        assert_eq!(g.volume_element(), 0.25 * 0.125);
        assert_eq!(g.len(), 32);
        assert_eq!(g.multi_index(g.index([3, 2, 0])), [3, 2, 0]);
    }

    #[test]
    fn restriction_of_constant_is_constant() {
        let g = Grid::unit(2, 4).unwrap();
        let fine = vec![3.0; g.refined().len()];
        assert!(g.restrict(&fine).iter().all(|&x| x == 3.0));
        // linear field: the average of the children is the coarse center value
        let fine = g.refined().sample(|x| x[0] + 2.0 * x[1]);
        let coarse = g.restrict(&fine);
        let expect = g.sample(|x| x[0] + 2.0 * x[1]);
        for (a, b) in coarse.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn threshold_examples() {
        let p = ModelParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let r = threshold_check(&p, 0.5, 2);
        assert!((r.bound - std::f64::consts::PI).abs() < 1e-15);
        assert!(r.within);

        let p = ModelParams::new(7.0, 11.0, 1.0, 1.0).unwrap();
        assert!(threshold_check(&p, 0.0, 3).within);

        let p = ModelParams::new(3.0, 1.0, 1.0, 1.0).unwrap();
        let r = threshold_check(&p, 1.2, 3);
        assert!((r.m1 - 3.6).abs() < 1e-15);
        // sqrt(2/3) * pi = 2.565099660323728...
        assert!((r.bound - 2.565_099_660_323_728).abs() < 1e-12);
        assert!(!r.within);
    }

    #[test]
    fn params_must_be_positive() {
        assert!(matches!(
            ModelParams::new(-1.0, 1.0, 1.0, 1.0),
            Err(ModelError::NonPositiveParameter { name: "chi1", .. })
        ));
        assert!(ModelParams::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn profiles_sample_at_centers() {
        let grid = Grid::new(&[2.0], &[4]).unwrap();
        let bump = Profile::CosineBump {
            base: 1.0,
            amplitude: 0.5,
            k: vec![1.0],
        };
        let vals = bump.sample(&grid).unwrap();
        let x0: f64 = 0.25;
        assert!((vals[0] - (1.0 + 0.5 * (std::f64::consts::PI * x0 / 2.0).cos())).abs() < 1e-15);
        let g = Profile::Gaussian {
            center: vec![1.0],
            width: 0.5,
            amplitude: 2.0,
            floor: 0.1,
        };
        let vals = g.sample(&grid).unwrap();
        assert!(vals.iter().all(|&x| x > 0.1));
        assert_eq!(vals[1], vals[2]);
        assert!(Profile::Values {
            values: vec![1.0; 3]
        }
        .sample(&grid)
        .is_err());
    }
}
