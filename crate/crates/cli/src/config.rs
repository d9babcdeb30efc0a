//! JSON run configuration and its validation.
//!
//! Unknown keys are rejected. Every path in `outputs` is relative to the
//! output directory; `bank_in` is relative to the config file.

use std::collections::HashSet;
use std::path::{Component, Path, PathBuf};

use dielq_core::emission::{AtomSpec, DEFAULT_CUTOFF};
use dielq_core::lattice::Grid;
use dielq_core::medium::{build_profile, Descriptor, MediumProfile};
use dielq_core::modes::{transverse_dimension, Variant};
use serde::{Deserialize, Serialize};

use crate::error::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Decompose,
    Modes,
    Verify,
    Ldos,
    Rate,
    CavityFactor,
}

impl Task {
    fn needs_bank(self) -> bool {
        matches!(self, Task::Ldos | Task::Rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub spacing: f64,
}

impl GridSpec {
    pub fn grid(&self) -> Result<Grid, RunError> {
        Grid::new(self.dims, self.spacing).map_err(|e| RunError::schema(format!("grid: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    /// Eigen residual tolerance, relative to the eigenvalue.
    pub eigen_tol: f64,
    /// Relative residual for Poisson solves (decomposition, cavity factor).
    pub poisson_tol: f64,
    pub max_iterations: usize,
    pub guard: Option<usize>,
    pub prefer_dense: bool,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self { eigen_tol: 1e-8, poisson_tol: 1e-10, max_iterations: 500, guard: None, prefer_dense: false }
    }
}

/// Lorentzian width and truncation. A missing `eta` means the default width
/// derived from the local level spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BroadeningSpec {
    pub eta: Option<f64>,
    pub cutoff: f64,
    pub truncate: bool,
}

impl Default for BroadeningSpec {
    fn default() -> Self {
        Self { eta: None, cutoff: DEFAULT_CUTOFF, truncate: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdosSpec {
    pub omega_min: f64,
    pub omega_max: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub broadening: BroadeningSpec,
    /// Defaults to each atom's transition dipole.
    #[serde(default)]
    pub orientation: Option<[f64; 3]>,
}

fn default_samples() -> usize {
    201
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateSpec {
    /// Upper and lower level of the emitting transition.
    pub transition: [usize; 2],
    pub broadening: BroadeningSpec,
    /// Multiply by the squared empty-cavity factor of the (uniform) host.
    pub local_field: bool,
}

impl Default for RateSpec {
    fn default() -> Self {
        Self { transition: [1, 0], broadening: BroadeningSpec::default(), local_field: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CavitySpec {
    /// Host permittivities; empty means the uniform permittivity of `medium`.
    pub eps: Vec<f64>,
    pub box_cells: usize,
    pub radius_cells: usize,
}

impl Default for CavitySpec {
    fn default() -> Self {
        Self {
            eps: Vec::new(),
            box_cells: dielq_core::emission::CAVITY_BOX_CELLS,
            radius_cells: dielq_core::emission::CAVITY_RADIUS_CELLS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecomposeSpec {
    /// Number of seeded random fields to split.
    pub samples: usize,
}

impl Default for DecomposeSpec {
    fn default() -> Self {
        Self { samples: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub bank: String,
    pub modes: String,
    pub ldos_prefix: String,
    pub rates: String,
    pub cavity: String,
    pub decompose: String,
    pub verify: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            bank: "bank.qmb".into(),
            modes: "modes.csv".into(),
            ldos_prefix: "ldos".into(),
            rates: "rates.json".into(),
            cavity: "cavity.json".into(),
            decompose: "decompose.json".into(),
            verify: "verify.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub medium: Descriptor,
    #[serde(default)]
    pub mu_medium: Option<Descriptor>,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default)]
    pub solver: SolverSpec,
    /// Number of lowest nonzero modes for the `modes` task.
    #[serde(default)]
    pub modes: Option<usize>,
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub ldos: Option<LdosSpec>,
    #[serde(default)]
    pub rate: RateSpec,
    #[serde(default)]
    pub cavity: CavitySpec,
    #[serde(default)]
    pub decompose: DecomposeSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
    /// Previously saved bank used instead of solving.
    #[serde(default)]
    pub bank_in: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_variant() -> Variant {
    Variant::Nonmagnetic
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::schema(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::schema(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Samples the medium (and permeability, if any) on the configured grid.
    pub fn build_medium(&self) -> Result<MediumProfile, RunError> {
        let grid = self.grid.grid()?;
        let mut m = build_profile(&self.medium, grid).map_err(|e| RunError::schema(format!("medium: {e}")))?;
        if let Some(mu) = &self.mu_medium {
            m = m.with_mu(mu).map_err(|e| RunError::schema(format!("mu_medium: {e}")))?;
        }
        Ok(m)
    }

    /// All schema and feasibility checks that do not need a solve.
    pub fn validate(&self) -> Result<(), RunError> {
        let mut issues = Vec::new();
        let grid = match self.grid.grid() {
            Ok(g) => Some(g),
            Err(e) => {
                issues.push(e.to_string());
                None
            }
        };
        if self.tasks.is_empty() {
            issues.push("tasks: at least one task is required".into());
        }
        let mut seen = HashSet::new();
        for t in &self.tasks {
            if !seen.insert(*t) {
                issues.push(format!("tasks: {t:?} listed twice"));
            }
        }
        let s = &self.solver;
        for (name, v) in [("eigen_tol", s.eigen_tol), ("poisson_tol", s.poisson_tol)] {
            if !(v > 0.0 && v < 1.0) {
                issues.push(format!("solver.{name} = {v} outside (0, 1)"));
            }
        }
        if s.max_iterations == 0 {
            issues.push("solver.max_iterations must be positive".into());
        }

        let has_modes = self.tasks.contains(&Task::Modes);
        if has_modes {
            match (self.modes, grid) {
                (None, _) => issues.push("modes: required by the modes task".into()),
                (Some(0), _) => issues.push("modes: must be at least 1".into()),
                (Some(n), Some(g)) if n > transverse_dimension(&g) => issues.push(format!(
                    "modes: {n} requested but the grid has only {} nonzero transverse modes",
                    transverse_dimension(&g)
                )),
                _ => {}
            }
            if self.bank_in.is_some() {
                issues.push("bank_in and the modes task are mutually exclusive".into());
            }
        }
        for (i, t) in self.tasks.iter().enumerate() {
            if t.needs_bank() && self.bank_in.is_none() && !self.tasks[..i].contains(&Task::Modes) {
                issues.push(format!("tasks: {t:?} needs a mode bank; list modes before it or set bank_in"));
            }
        }

        let wants_atoms = self.tasks.iter().any(|t| matches!(t, Task::Ldos | Task::Rate));
        if wants_atoms && self.atoms.is_empty() {
            issues.push("atoms: ldos and rate need at least one atom".into());
        }
        let [k, l] = self.rate.transition;
        for (i, a) in self.atoms.iter().enumerate() {
            if let Err(e) = a.validate() {
                issues.push(format!("atoms[{i}]: {e}"));
                continue;
            }
            if let Some(g) = grid {
                let len = g.lengths();
                if (0..3).any(|d| !(a.position[d] >= 0.0 && a.position[d] < len[d])) {
                    issues.push(format!("atoms[{i}]: position {:?} outside the box {len:?}", a.position));
                }
            }
            if self.tasks.contains(&Task::Rate) && self.rate.local_field && !(a.cavity_radius > 0.0) {
                issues.push(format!("atoms[{i}]: rate.local_field needs a positive cavity_radius"));
            }
            if wants_atoms {
                match a.transition_frequency(k, l) {
                    Ok(w) if w > 0.0 => {}
                    Ok(w) => issues.push(format!("atoms[{i}]: transition {k}->{l} has frequency {w} <= 0")),
                    Err(e) => issues.push(format!("atoms[{i}]: {e}")),
                }
            }
        }
        check_broadening("rate.broadening", &self.rate.broadening, &mut issues);

        if self.tasks.contains(&Task::Ldos) {
            match &self.ldos {
                None => issues.push("ldos: section required by the ldos task".into()),
                Some(l) => {
                    if !(l.omega_min >= 0.0 && l.omega_max > l.omega_min && l.omega_max.is_finite()) {
                        issues.push(format!("ldos: need 0 <= omega_min < omega_max, got [{}, {}]", l.omega_min, l.omega_max));
                    }
                    if l.samples == 0 {
                        issues.push("ldos.samples must be positive".into());
                    }
                    if let Some(o) = l.orientation {
                        if !o.iter().all(|v| v.is_finite()) || o.iter().all(|v| *v == 0.0) {
                            issues.push("ldos.orientation must be finite and nonzero".into());
                        }
                    }
                    check_broadening("ldos.broadening", &l.broadening, &mut issues);
                }
            }
        }

        if self.tasks.contains(&Task::CavityFactor) {
            let c = &self.cavity;
            if c.radius_cells < 2 || 4 * c.radius_cells > c.box_cells {
                issues.push(format!(
                    "cavity: radius_cells {} must be >= 2 and at most box_cells / 4 ({})",
                    c.radius_cells, c.box_cells
                ));
            }
            if c.eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
                issues.push("cavity.eps values must be positive".into());
            }
        }
        if self.tasks.contains(&Task::Decompose) && self.decompose.samples == 0 {
            issues.push("decompose.samples must be positive".into());
        }

        let o = &self.outputs;
        let names = [&o.bank, &o.modes, &o.ldos_prefix, &o.rates, &o.cavity, &o.decompose, &o.verify];
        for name in names {
            if let Err(e) = check_relative(name) {
                issues.push(format!("outputs: {e}"));
            }
        }

        if issues.is_empty() {
            // descriptor-level checks need the grid
            let medium = self.build_medium()?;
            let uniform = medium.uniform_eps().is_some() && medium.mu().is_none();
            if self.tasks.contains(&Task::Rate) && self.rate.local_field && !uniform {
                issues.push("rate.local_field needs a homogeneous nonmagnetic medium".into());
            }
            if self.tasks.contains(&Task::CavityFactor) && self.cavity.eps.is_empty() && medium.uniform_eps().is_none() {
                issues.push("cavity.eps is required when the medium is not homogeneous".into());
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(RunError::Schema(issues))
        }
    }
}

fn check_broadening(name: &str, b: &BroadeningSpec, issues: &mut Vec<String>) {
    if let Some(eta) = b.eta {
        if !(eta > 0.0 && eta.is_finite()) {
            issues.push(format!("{name}.eta must be positive, got {eta}"));
        }
    }
    if b.truncate && !(b.cutoff > 0.0 && b.cutoff.is_finite()) {
        issues.push(format!("{name}.cutoff must be positive, got {}", b.cutoff));
    }
}

fn check_relative(name: &str) -> Result<(), String> {
    let p = Path::new(name);
    if name.is_empty() {
        return Err("empty file name".into());
    }
    if p.components().any(|c| !matches!(c, Component::Normal(_))) {
        return Err(format!("{name:?} must be a plain relative path inside the output directory"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"grid": {"dims": [4, 4, 4], "spacing": 1.0},
        "medium": {"kind": "homogeneous", "eps": 2.0}, "tasks": ["verify"]}"#;

    fn with(patch: serde_json::Value) -> Result<RunConfig, RunError> {
        let mut v: serde_json::Value = serde_json::from_str(BASE).unwrap();
        for (k, x) in patch.as_object().unwrap() {
            v[k] = x.clone();
        }
        RunConfig::from_json(&v.to_string())
    }

    fn issues(e: RunError) -> String {
        assert_eq!(e.exit_code(), 2);
        e.to_string()
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = RunConfig::from_json(BASE).unwrap();
        assert_eq!(c.solver, SolverSpec::default());
        assert_eq!(c.variant, Variant::Nonmagnetic);
        assert_eq!(c.seed, 0);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_schema_errors() {
        let e = with(serde_json::json!({"modez": 3})).unwrap_err();
        assert!(issues(e).contains("modez"));
        let e = with(serde_json::json!({"solver": {"eigen_tol": 1e-8, "tolerance": 1}})).unwrap_err();
        assert!(issues(e).contains("tolerance"));
        let e = with(serde_json::json!({"tasks": ["spectrum"]})).unwrap_err();
        assert!(issues(e).contains("spectrum"));
    }

    #[test]
    fn mode_count_is_bounded_by_transverse_dimension() {
        let c = with(serde_json::json!({"modes": 127, "tasks": ["modes"]})).unwrap();
        assert!(issues(c.validate().unwrap_err()).contains("only 126"));
        with(serde_json::json!({"modes": 126, "tasks": ["modes"]})).unwrap().validate().unwrap();
    }

    #[test]
    fn bank_consumers_need_a_bank_first() {
        let atoms = serde_json::json!([{"position": [1, 1, 1], "levels": [0, 1], "dipoles": [[0,0,0],[1,0,0],[1,0,0],[0,0,0]], "cavity_radius": 0}]);
        let c = with(serde_json::json!({"modes": 4, "atoms": atoms, "tasks": ["rate", "modes"]})).unwrap();
        assert!(issues(c.validate().unwrap_err()).contains("needs a mode bank"));
        let c = with(serde_json::json!({"modes": 4, "atoms": atoms, "tasks": ["modes", "rate"]})).unwrap();
        c.validate().unwrap();
        let c = with(serde_json::json!({"modes": 4, "tasks": ["modes", "rate"]})).unwrap();
        assert!(issues(c.validate().unwrap_err()).contains("at least one atom"));
        let c = with(serde_json::json!({"modes": 4, "atoms": atoms, "tasks": ["modes", "ldos"]})).unwrap();
        assert!(issues(c.validate().unwrap_err()).contains("ldos: section"));
    }

    #[test]
    fn atoms_and_outputs_are_checked() {
        let far = serde_json::json!([{"position": [9, 1, 1], "levels": [0, 1], "dipoles": [[0,0,0],[1,0,0],[1,0,0],[0,0,0]], "cavity_radius": 0}]);
        let c = with(serde_json::json!({"modes": 4, "atoms": far, "tasks": ["modes", "rate"]})).unwrap();
        assert!(issues(c.validate().unwrap_err()).contains("outside the box"));
        let c = with(serde_json::json!({"outputs": {"verify": "../v.json"}})).unwrap();
        assert!(issues(c.validate().unwrap_err()).contains("plain relative path"));
        let c = with(serde_json::json!({"tasks": ["verify", "verify"]})).unwrap();
        assert!(issues(c.validate().unwrap_err()).contains("twice"));
    }

    #[test]
    fn local_field_needs_uniform_host_and_radius() {
        let atoms = serde_json::json!([{"position": [1, 1, 1], "levels": [0, 1], "dipoles": [[0,0,0],[1,0,0],[1,0,0],[0,0,0]], "cavity_radius": 0}]);
        let c = with(serde_json::json!({"modes": 4, "atoms": atoms, "tasks": ["modes", "rate"], "rate": {"local_field": true}})).unwrap();
        assert!(issues(c.validate().unwrap_err()).contains("cavity_radius"));
        let sphere = serde_json::json!({"kind": "sphere", "center": [2, 2, 2], "radius": 1.0, "eps_in": 4.0, "eps_out": 1.0});
        let atoms = serde_json::json!([{"position": [1, 1, 1], "levels": [0, 1], "dipoles": [[0,0,0],[1,0,0],[1,0,0],[0,0,0]], "cavity_radius": 1}]);
        let c = with(serde_json::json!({"modes": 4, "atoms": atoms, "medium": sphere, "tasks": ["modes", "rate"], "rate": {"local_field": true}}))
            .unwrap();
        assert!(issues(c.validate().unwrap_err()).contains("homogeneous"));
    }
}
