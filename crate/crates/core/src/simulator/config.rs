//! Experiment description. The layout mirrors the on-disk configuration file:
//! one struct per section, flat keys inside each section.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{PotentialSpec, DELTA_MAX};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub grid: GridSection,
    pub potential: PotentialSection,
    pub truncation: TruncationSection,
    pub time: TimeSection,
    pub solver: SolverSection,
    pub experiment: ExperimentSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub nodes: usize,
    pub extent: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes_y: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extent_y: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            dim: 1,
            nodes: 129,
            extent: 1.0,
            nodes_y: None,
            extent_y: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialFamily {
    #[default]
    Quadratic,
    CubicCore,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSection {
    pub family: PotentialFamily,
    /// Threshold `w` in `ψ(r) = r² − w r (+ a₃ r³)`.
    pub w: f64,
    pub a3: f64,
}

impl Default for PotentialSection {
    fn default() -> Self {
        PotentialSection {
            family: PotentialFamily::Quadratic,
            w: 3.0,
            a3: 0.0,
        }
    }
}

impl PotentialSection {
    pub fn spec(&self) -> PotentialSpec {
        match self.family {
            PotentialFamily::Quadratic => PotentialSpec::Quadratic { w: self.w },
            PotentialFamily::CubicCore => PotentialSpec::CubicCore {
                w: self.w,
                a3: self.a3,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationLaw {
    /// `T_δ`.
    #[default]
    Smooth,
    /// `max(r, 2δ)`, for twin runs against the untruncated system.
    IdentityFloor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationSection {
    pub delta: f64,
    pub law: TruncationLaw,
}

impl Default for TruncationSection {
    fn default() -> Self {
        TruncationSection {
            delta: DELTA_MAX,
            law: TruncationLaw::Smooth,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub tau: f64,
    pub horizon: f64,
    /// Displacement/damage coupling sweeps per step (1 = plain staggering).
    pub picard_iters: usize,
    pub snapshot_every: usize,
    /// A failing step is split at most this many times.
    pub max_halvings: u32,
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection {
            tau: 1e-3,
            horizon: 0.5,
            picard_iters: 1,
            snapshot_every: 10,
            max_halvings: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Projected,
    Yosida,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadStencil {
    /// Derivative of the discrete elastic energy (face differences).
    #[default]
    Variational,
    /// Centered nodal gradients.
    Centered,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub backend: Backend,
    pub lambda: f64,
    /// Biharmonic weight; 0 disables the regularisation.
    pub epsilon: f64,
    pub elliptic_tol: f64,
    pub step_tol: f64,
    pub load_stencil: LoadStencil,
    /// Embedding constant of `W` into `C⁰`; estimated from the grid if absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_omega: Option<f64>,
    pub c3: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            backend: Backend::Projected,
            lambda: 1e-3,
            epsilon: 0.0,
            elliptic_tol: 1e-10,
            step_tol: 1e-9,
            load_stencil: LoadStencil::Variational,
            c_omega: None,
            c3: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourcePreset {
    Constant,
    #[default]
    Sine,
    Bump,
    File,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPreset {
    #[default]
    Constant,
    Cosine,
    Bump,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub g: SourcePreset,
    pub g_amplitude: f64,
    pub g_mode: u32,
    pub g_center: f64,
    pub g_width: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_file: Option<String>,

    pub z0: InitialPreset,
    pub z0_value: f64,
    pub z0_amplitude: f64,
    pub z0_mode: u32,
    pub z0_center: f64,
    pub z0_width: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z0_file: Option<String>,

    pub perturbation_sizes: Vec<f64>,
    pub levels: usize,
    pub sweep_delta: Vec<f64>,
    pub sweep_z0_amplitude: Vec<f64>,
    pub sweep_g_amplitude: Vec<f64>,
    pub sweep_perturbation: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            g: SourcePreset::Sine,
            g_amplitude: 1.0,
            g_mode: 1,
            g_center: 0.5,
            g_width: 0.1,
            g_file: None,
            z0: InitialPreset::Constant,
            z0_value: 1.0,
            z0_amplitude: 0.0,
            z0_mode: 1,
            z0_center: 0.5,
            z0_width: 0.1,
            z0_file: None,
            perturbation_sizes: vec![1e-2, 1e-3, 1e-4],
            levels: 3,
            sweep_delta: vec![1.0 / 12.0, 1.0 / 24.0],
            sweep_z0_amplitude: vec![0.0, 0.05],
            sweep_g_amplitude: vec![4.0, 6.0],
            sweep_perturbation: 1e-3,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl SimConfig {
    /// Checks that need no fields; the field-level assumptions are checked
    /// when a [`super::Scenario`] is built.
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.grid.dim) {
            return Err(Error::Config(format!(
                "grid.dim must be 1 or 2, got {}",
                self.grid.dim
            )));
        }
        let d = self.truncation.delta;
        if !(d > 0.0 && d <= DELTA_MAX * (1.0 + 1e-12)) {
            return Err(Error::Assumption(format!(
                "δ ∈ (0,1/12] violated: delta = {d}"
            )));
        }
        self.potential.spec().validate()?;
        positive("time.tau", self.time.tau)?;
        positive("time.horizon", self.time.horizon)?;
        if self.time.picard_iters == 0 {
            return Err(Error::Config("time.picard_iters must be at least 1".into()));
        }
        if self.time.snapshot_every == 0 {
            return Err(Error::Config(
                "time.snapshot_every must be at least 1".into(),
            ));
        }
        positive("solver.lambda", self.solver.lambda)?;
        positive("solver.elliptic_tol", self.solver.elliptic_tol)?;
        positive("solver.step_tol", self.solver.step_tol)?;
        positive("solver.c3", self.solver.c3)?;
        if !(self.solver.epsilon >= 0.0 && self.solver.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "solver.epsilon must be nonnegative, got {}",
                self.solver.epsilon
            )));
        }
        if let Some(c) = self.solver.c_omega {
            positive("solver.c_omega", c)?;
        }
        if self.experiment.g == SourcePreset::File && self.experiment.g_file.is_none() {
            return Err(Error::Config("experiment.g = \"file\" needs g_file".into()));
        }
        if self.experiment.z0 == InitialPreset::File && self.experiment.z0_file.is_none() {
            return Err(Error::Config(
                "experiment.z0 = \"file\" needs z0_file".into(),
            ));
        }
        Ok(())
    }
}
