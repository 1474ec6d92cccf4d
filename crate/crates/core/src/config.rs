//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::problems::ProblemParams;
use crate::scheme::{PointSource, SourceOptions};
use crate::stepper::StageOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub name: String,
    #[serde(default)]
    pub params: ProblemParams,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub nx: Option<usize>,
    pub ny: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub cfl: f64,
    /// Overrides the problem's sensor strength.
    pub kappa: Option<f64>,
    /// Overrides the problem's final time.
    pub t_end: Option<f64>,
    pub max_steps: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { cfl: 0.4, kappa: None, t_end: None, max_steps: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimiterConfig {
    pub sensor: bool,
    pub pp: bool,
    pub source_average: bool,
    pub source_point: bool,
    pub point_source: PointSource,
}

impl Default for LimiterConfig {
    fn default() -> Self {
        LimiterConfig { sensor: true, pp: true, source_average: true, source_point: true, point_source: PointSource::Central }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldFormat {
    Csv,
    Vtk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Steps between field dumps; 0 writes only the initial and final fields.
    pub dump_stride: usize,
    /// Steps between diagnostics samples.
    pub diagnostics_stride: usize,
    pub formats: Vec<FieldFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, dump_stride: 0, diagnostics_stride: 1, formats: vec![FieldFormat::Csv] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub limiters: LimiterConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    /// Default configuration for a named problem.
    pub fn for_problem(name: &str) -> Self {
        RunConfig {
            problem: ProblemConfig { name: name.into(), params: ProblemParams::default() },
            mesh: MeshConfig::default(),
            solver: SolverConfig::default(),
            limiters: LimiterConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| SolverError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SolverError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.solver;
        if !(s.cfl > 0.0 && s.cfl <= 1.0) {
            return Err(SolverError::Config(format!("cfl must lie in (0, 1], got {}", s.cfl)));
        }
        if let Some(k) = s.kappa {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(SolverError::Config(format!("kappa must be nonnegative, got {k}")));
            }
        }
        if let Some(t) = s.t_end {
            if !(t > 0.0 && t.is_finite()) {
                return Err(SolverError::Config(format!("t_end must be positive, got {t}")));
            }
        }
        for n in [self.mesh.nx, self.mesh.ny].into_iter().flatten() {
            if n < 2 {
                return Err(SolverError::Config(format!("mesh needs at least 2 cells per direction, got {n}")));
            }
        }
        if self.output.diagnostics_stride == 0 {
            return Err(SolverError::Config("diagnostics_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn stage_options(&self, problem_kappa: f64) -> StageOptions {
        let l = &self.limiters;
        StageOptions {
            source: SourceOptions { average: l.source_average, point: l.source_point, point_variant: l.point_source },
            sensor: l.sensor,
            kappa: self.solver.kappa.unwrap_or(problem_kappa),
            pp: l.pp,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::from_toml("[problem]\nname = \"orszag_tang\"\n").unwrap();
        assert_eq!(c.solver.cfl, 0.4);
        assert!(c.limiters.pp && c.limiters.sensor && c.limiters.source_average && c.limiters.source_point);
        assert_eq!(c.limiters.point_source, PointSource::Central);
        assert_eq!(c.stage_options(1.0).kappa, 1.0);
    }

    #[test]
    fn full_config_round_trip() {
        let text = r#"
[problem]
name = "vortex"
params = { mu = 1.0 }

[mesh]
nx = 20
ny = 20

[solver]
cfl = 0.3
kappa = 2.0
t_end = 5.0

[limiters]
pp = false
point_source = "upwind"

[output]
dir = "out"
dump_stride = 10
formats = ["csv", "vtk"]
"#;
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.problem.params.mu, Some(1.0));
        assert_eq!(c.limiters.point_source, PointSource::Upwind);
        assert_eq!(c.output.formats, vec![FieldFormat::Csv, FieldFormat::Vtk]);
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values_and_unknown_keys() {
        for text in [
            "[problem]\nname = \"sine\"\n[solver]\ncfl = 1.5\n",
            "[problem]\nname = \"sine\"\n[solver]\ncfl = 0.0\n",
            "[problem]\nname = \"sine\"\n[solver]\nkappa = -1.0\n",
            "[problem]\nname = \"sine\"\n[mesh]\nnx = 1\n",
            "[problem]\nname = \"sine\"\n[limiters]\nfoo = true\n",
            "[problem]\nname = \"sine\"\nparams = { nu = 3.0 }\n",
            "[mesh]\nnx = 4\n",
        ] {
            let e = RunConfig::from_toml(text).unwrap_err();
            assert!(e.is_config_error(), "{text}: {e}");
        }
    }
}
