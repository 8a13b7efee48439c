//! Experiment configuration shared by all subcommands.
//!
//! A config is built in three layers: the subcommand's defaults, an optional
//! JSON file merged on top, then any explicit command line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use gradalign::krylov::KrylovConfig;
use gradalign::linalg::read_matrix_market;
use gradalign::problems::{gen_bvp, gen_perturbed, gen_random_spd};
use gradalign::steps::{Method, RuleParams};
use gradalign::{Problem, RngSeed, SolveConfig, SparseMatrix, StepRule};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Random SPD matrix with a prescribed condition number.
    Random,
    /// Finite-difference two-point boundary value problem.
    Bvp,
    /// Matrix Market file given by `path`.
    Mm,
    /// Random SPD matrix scaled to unit norm plus a sparse nonsymmetric
    /// perturbation of size `delta`.
    Perturbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSpec {
    pub family: Family,
    pub n: usize,
    pub kappa: f64,
    /// Base seed; repetition `r` uses `seed + r`.
    pub seed: u64,
    pub delta: f64,
    pub path: Option<PathBuf>,
    /// Rotate random matrices away from diagonal form.
    pub rotate: bool,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec {
            family: Family::Random,
            n: 100,
            kappa: 1e2,
            seed: 1,
            delta: 1e-4,
            path: None,
            rotate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    /// Method names: any gradient method, `CG` or `GMRES`.
    pub methods: Vec<String>,
    /// Parameters applied to every gradient method that takes them.
    pub params: RuleParams,
    pub tol: f64,
    /// Iteration budget; chosen from the condition number when absent.
    pub max_iters: Option<usize>,
    pub restart_l: usize,
    pub repetitions: usize,
    pub output_dir: Option<PathBuf>,
    pub verify_theorems: bool,
    /// Worker threads; all cores when absent.
    pub jobs: Option<usize>,
    /// Condition numbers of the table grid.
    pub kappas: Vec<f64>,
    /// Problem sizes of the table grid.
    pub sizes: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemSpec::default(),
            methods: vec!["MGC".into()],
            params: RuleParams::default(),
            tol: 1e-6,
            max_iters: None,
            restart_l: KrylovConfig::default().restart_l,
            repetitions: 1,
            output_dir: None,
            verify_theorems: false,
            jobs: None,
            kappas: vec![1e2, 1e3, 1e4, 1e5],
            sizes: vec![200, 400, 600, 800, 1000],
        }
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

impl ExperimentConfig {
    /// Layers the JSON file at `path` over `self`.
    pub fn merged_with_file(&self, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let over: Value = serde_json::from_str(&text)?;
        let mut base = serde_json::to_value(self)?;
        merge(&mut base, over);
        Ok(serde_json::from_value(base)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 1 {
            return Err(CliError::usage("repetitions must be >= 1"));
        }
        if !(self.tol > 0.0) {
            return Err(CliError::usage(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if self.max_iters == Some(0) {
            return Err(CliError::usage("max-iters must be >= 1"));
        }
        if self.methods.is_empty() {
            return Err(CliError::usage("no methods given"));
        }
        if self.problem.family == Family::Mm && self.problem.path.is_none() {
            return Err(CliError::usage("--problem mm needs --path"));
        }
        self.method_specs().map(|_| ())
    }

    pub fn method_specs(&self) -> Result<Vec<MethodSpec>> {
        self.methods
            .iter()
            .map(|m| MethodSpec::parse(m, &self.params))
            .collect()
    }

    pub fn solve_config(&self, p: &Problem) -> SolveConfig {
        SolveConfig {
            tol_rel: self.tol,
            max_iters: self
                .max_iters
                .unwrap_or_else(|| SolveConfig::default_max_iters(p.kappa)),
            ..Default::default()
        }
    }

    pub fn krylov_config(&self, p: &Problem) -> KrylovConfig {
        KrylovConfig {
            tol_rel: self.tol,
            max_iters: self.solve_config(p).max_iters,
            restart_l: self.restart_l,
            // CG is run on perturbed systems on purpose
            allow_nonsymmetric: self.problem.family == Family::Perturbed,
        }
    }

    /// Seed of repetition `rep`.
    pub fn seed(&self, rep: usize) -> RngSeed {
        RngSeed(self.problem.seed).offset(rep as u64)
    }
}

/// A resolved method: a gradient steplength rule or a Krylov baseline.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodSpec {
    Gradient(StepRule),
    Cg,
    Gmres,
}

impl MethodSpec {
    pub fn parse(name: &str, params: &RuleParams) -> Result<Self> {
        match name.trim().to_ascii_uppercase().as_str() {
            "CG" => Ok(MethodSpec::Cg),
            "GMRES" => Ok(MethodSpec::Gmres),
            _ => {
                let method: Method = name
                    .parse()
                    .map_err(|e: gradalign::Error| CliError::usage(e.to_string()))?;
                let rule =
                    StepRule::build(method, params).map_err(|e| CliError::usage(e.to_string()))?;
                Ok(MethodSpec::Gradient(rule))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            MethodSpec::Gradient(r) => r.to_string(),
            MethodSpec::Cg => "CG".into(),
            MethodSpec::Gmres => "GMRES".into(),
        }
    }
}

/// Problem factory for one experiment. Matrix files are read once.
pub enum ProblemSource {
    Generated(ProblemSpec),
    Matrix(SparseMatrix, ProblemSpec),
}

impl ProblemSource {
    pub fn prepare(spec: &ProblemSpec) -> Result<Self> {
        match (spec.family, &spec.path) {
            (Family::Mm, Some(path)) => Ok(ProblemSource::Matrix(
                read_matrix_market(path)?,
                spec.clone(),
            )),
            (Family::Mm, None) => Err(CliError::usage("--problem mm needs --path")),
            _ => Ok(ProblemSource::Generated(spec.clone())),
        }
    }

    pub fn instance(&self, seed: RngSeed) -> Result<Problem> {
        let p = match self {
            ProblemSource::Matrix(a, spec) => {
                let label = spec
                    .path
                    .as_ref()
                    .and_then(|p| p.file_stem())
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "matrix".into());
                Problem::from_matrix(a.clone(), seed, label)?
            }
            ProblemSource::Generated(spec) => match spec.family {
                Family::Random => gen_random_spd(spec.n, spec.kappa, seed, spec.rotate)?,
                Family::Bvp => gen_bvp(spec.n, seed)?,
                Family::Perturbed => {
                    let base =
                        gen_random_spd(spec.n, spec.kappa, seed, spec.rotate)?.unit_normalized()?;
                    gen_perturbed(&base, spec.delta, seed)?
                }
                Family::Mm => unreachable!("matrix families are prepared from a file"),
            },
        };
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_layers_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(
            &path,
            r#"{"problem": {"kappa": 1000.0}, "methods": ["SDC", "CG"], "params": {"d1": 2}}"#,
        )
        .unwrap();
        let c = ExperimentConfig::default().merged_with_file(&path).unwrap();
        assert_eq!(c.problem.kappa, 1e3);
        assert_eq!(c.problem.n, 100);
        assert_eq!(c.params.d1, Some(2));
        let specs = c.method_specs().unwrap();
        assert_eq!(specs[1], MethodSpec::Cg);
        assert_eq!(specs[0].label(), "SDC(2,4)");
    }

    #[test]
    fn unknown_keys_and_methods_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"problem": {"size": 3}}"#).unwrap();
        assert!(matches!(
            ExperimentConfig::default().merged_with_file(&path),
            Err(CliError::Usage(_))
        ));
        let c = ExperimentConfig {
            methods: vec!["XYZ".into()],
            ..Default::default()
        };
        assert_eq!(c.validate().unwrap_err().exit_code(), 1);
    }

    #[test]
    fn perturbed_instances_are_unit_scaled_and_nonsymmetric() {
        let spec = ProblemSpec {
            family: Family::Perturbed,
            n: 30,
            kappa: 1e3,
            ..Default::default()
        };
        let p = ProblemSource::prepare(&spec)
            .unwrap()
            .instance(RngSeed(3))
            .unwrap();
        assert!(!p.a.is_symmetric());
        let max_diag = (0..p.n()).map(|i| p.a.get(i, i)).fold(0.0, f64::max);
        assert!(max_diag <= 1.0 + 1e-3, "{max_diag}");
    }
}
