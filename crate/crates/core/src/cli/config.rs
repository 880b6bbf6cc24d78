//! TOML run configuration and its translation into pipeline objects.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::complex::{CoefficientMode, IntMat, LocalSystem};
use crate::connections::ConnectionOptions;
use crate::critical::{CriticalOptions, SeedSpec};
use crate::currents::QuadratureOptions;
use crate::expr::{FormExpression, ScalarExpression};
use crate::flow::{FlowSpec, StepControls};
use crate::geometry::ManifoldBackend;

use super::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub manifold: ManifoldConfig,
    pub function: Option<FunctionConfig>,
    pub flow: FlowConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub seeds: Option<SeedConfig>,
    #[serde(default)]
    pub coefficients: CoefficientConfig,
    #[serde(default)]
    pub forms: Vec<FormConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    pub kind: String,
    pub ambient_dim: Option<usize>,
    pub constraint: Option<String>,
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionConfig {
    pub f: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub kind: String,
    pub direction: Option<Vec<f64>>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub max_time: Option<f64>,
    pub capture_radius: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub grad_tol: f64,
    pub nondegen_tol: f64,
    pub merge_tol: f64,
    /// Shooting offset along eigen-disks.
    pub epsilon: f64,
    /// Crossing radius of the orientation-sign rule.
    pub sign_epsilon: f64,
    /// Seeding radius of the sweep quadrature.
    pub epsilon0: f64,
    pub int_tol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            grad_tol: 1e-10,
            nondegen_tol: 1e-6,
            merge_tol: 1e-6,
            epsilon: 1e-3,
            sign_epsilon: 1e-3,
            epsilon0: 1e-3,
            int_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    pub kind: String,
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub per_axis: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientConfig {
    pub mode: Option<String>,
    pub p: Option<u64>,
    /// One integer matrix per deck generator, row-major.
    pub local_system: Option<Vec<Vec<Vec<i64>>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormConfig {
    pub name: String,
    pub degree: usize,
    pub coefficients: Vec<FormCoefficientConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormCoefficientConfig {
    /// 1-based variable indices, strictly increasing.
    pub indices: Vec<usize>,
    pub expr: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Forms whose residue tables go into the report.
    pub residues: Vec<String>,
    /// Forms run through the pointwise chain-homotopy check.
    pub fme: Vec<String>,
    pub fme_samples: usize,
    pub fme_margin: f64,
    pub fme_step: f64,
    pub fme_seed: u64,
    pub fme_tolerance: f64,
    /// Forms run through the chain-map identity.
    pub chain_map: Vec<String>,
    pub chain_map_tolerance: f64,
    /// Pairs of closed forms for the intersection pairing.
    pub pairing: Vec<[String; 2]>,
    pub pairing_tolerance: f64,
    /// Forms checked for integral residues.
    pub integral_residues: Vec<String>,
    /// Run the reversed-flow complex and the duality cross-check.
    pub dualize: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            residues: Vec::new(),
            fme: Vec::new(),
            fme_samples: 20,
            fme_margin: 1e-2,
            fme_step: 1e-4,
            fme_seed: 2024,
            fme_tolerance: 1e-3,
            chain_map: Vec::new(),
            chain_map_tolerance: 1e-4,
            pairing: Vec::new(),
            pairing_tolerance: 1e-5,
            integral_residues: Vec::new(),
            dualize: false,
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("config error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        let t = &self.tolerances;
        for (name, v) in [
            ("grad_tol", t.grad_tol),
            ("nondegen_tol", t.nondegen_tol),
            ("merge_tol", t.merge_tol),
            ("epsilon", t.epsilon),
            ("sign_epsilon", t.sign_epsilon),
            ("epsilon0", t.epsilon0),
            ("int_tol", t.int_tol),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(CliError::Config(format!(
                    "tolerance `{name}` must be positive, got {v}"
                )));
            }
        }
        let mut names: Vec<&str> = self.forms.iter().map(|f| f.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.forms.len() {
            return Err(CliError::Config("form names must be unique".into()));
        }
        Ok(())
    }

    pub fn build_manifold(&self) -> Result<ManifoldBackend, CliError> {
        let m = &self.manifold;
        match m.kind.as_str() {
            "implicit" => {
                let ambient = m.ambient_dim.ok_or_else(|| {
                    CliError::Config("implicit manifold needs `ambient_dim`".into())
                })?;
                let text = m.constraint.as_ref().ok_or_else(|| {
                    CliError::Config("implicit manifold needs `constraint`".into())
                })?;
                let c = ScalarExpression::parse(text, ambient)
                    .map_err(|e| CliError::Config(format!("constraint: {e}")))?;
                Ok(ManifoldBackend::implicit(ambient, c))
            }
            "flat-torus" => {
                let dim = m
                    .dim
                    .ok_or_else(|| CliError::Config("flat torus needs `dim`".into()))?;
                Ok(ManifoldBackend::flat_torus(dim))
            }
            "klein-bottle" => Ok(ManifoldBackend::klein_bottle()),
            other => Err(CliError::Config(format!(
                "unknown manifold kind `{other}` (expected implicit, flat-torus or klein-bottle)"
            ))),
        }
    }

    pub fn build_function(
        &self,
        manifold: &ManifoldBackend,
    ) -> Result<Option<ScalarExpression>, CliError> {
        let Some(fc) = &self.function else {
            return Ok(None);
        };
        let f = ScalarExpression::parse(&fc.f, manifold.ambient_dim())
            .map_err(|e| CliError::Config(format!("function: {e}")))?;
        // Deck invariance: the field must descend to the quotient.
        if matches!(manifold, ManifoldBackend::FlatQuotient { .. }) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
            for iso in manifold.deck_generators() {
                for _ in 0..16 {
                    let x = DVector::from_fn(manifold.ambient_dim(), |_, _| {
                        rng.gen_range(-1.0..2.0)
                    });
                    let moved = iso.apply(&x);
                    let a = f.eval(x.as_slice()).map_err(|e| {
                        CliError::Config(format!("function evaluation: {e}"))
                    })?;
                    let b = f.eval(moved.as_slice()).map_err(|e| {
                        CliError::Config(format!("function evaluation: {e}"))
                    })?;
                    if (a - b).abs() > 1e-9 * (1.0 + a.abs()) {
                        return Err(CliError::Config(
                            "function is not invariant under the deck group".into(),
                        ));
                    }
                }
            }
        }
        Ok(Some(f))
    }

    pub fn build_flow(&self, manifold: &ManifoldBackend) -> Result<FlowSpec, CliError> {
        let mut controls = StepControls::default();
        if let Some(v) = self.flow.rtol {
            controls.rtol = v;
        }
        if let Some(v) = self.flow.atol {
            controls.atol = v;
        }
        if let Some(v) = self.flow.max_time {
            controls.max_time = v;
        }
        if let Some(v) = self.flow.capture_radius {
            controls.capture_radius = v;
        }
        let mut spec = match self.flow.kind.as_str() {
            "gradient" => {
                let f = self.build_function(manifold)?.ok_or_else(|| {
                    CliError::Config("gradient flow needs a [function] section".into())
                })?;
                FlowSpec::gradient_uphill(manifold.clone(), f)
            }
            "sphere17" => {
                let dir = self
                    .flow
                    .direction
                    .clone()
                    .unwrap_or_else(|| vec![1.0, 0.0]);
                if dir.len() != 2 {
                    return Err(CliError::Config(
                        "sphere17 `direction` must have two chart components".into(),
                    ));
                }
                FlowSpec::sphere17(manifold.clone(), DVector::from_vec(dir))
            }
            other => Err(CliError::Config(format!(
                "unknown flow kind `{other}` (expected gradient or sphere17)"
            )))?,
        };
        spec.controls = controls;
        Ok(spec)
    }

    pub fn build_seeds(&self, manifold: &ManifoldBackend) -> Result<SeedSpec, CliError> {
        let Some(sc) = &self.seeds else {
            return Ok(SeedSpec::default_for(manifold));
        };
        match sc.kind.as_str() {
            "random" => Ok(SeedSpec::Random {
                count: sc.count.unwrap_or(32 * 3usize.pow(manifold.dim() as u32)),
                seed: sc.seed.unwrap_or(0x6d6f7273),
            }),
            "grid" => {
                let per_axis = sc.per_axis.clone().ok_or_else(|| {
                    CliError::Config("grid seeds need `per_axis` counts".into())
                })?;
                Ok(SeedSpec::Grid { per_axis })
            }
            other => Err(CliError::Config(format!(
                "unknown seed kind `{other}` (expected random or grid)"
            ))),
        }
    }

    pub fn critical_options(&self) -> CriticalOptions {
        CriticalOptions {
            grad_tol: self.tolerances.grad_tol,
            nondegen_tol: self.tolerances.nondegen_tol,
            merge_tol: self.tolerances.merge_tol,
            ..CriticalOptions::default()
        }
    }

    pub fn connection_options(&self) -> ConnectionOptions {
        ConnectionOptions {
            epsilon: self.tolerances.epsilon,
            sign_epsilon: self.tolerances.sign_epsilon,
            ..ConnectionOptions::default()
        }
    }

    pub fn quadrature_options(&self) -> QuadratureOptions {
        QuadratureOptions {
            epsilon0: self.tolerances.epsilon0,
            ..QuadratureOptions::default()
        }
    }

    pub fn build_mode(&self, manifold: &ManifoldBackend) -> Result<CoefficientMode, CliError> {
        let mode = self.coefficients.mode.as_deref().unwrap_or("integers");
        match mode {
            "integers" => {
                if !manifold.orientable() {
                    // Non-orientable backends default into their only mode.
                    Ok(CoefficientMode::ModP(2))
                } else {
                    Ok(CoefficientMode::Integers)
                }
            }
            "mod-p" => {
                let p = self
                    .coefficients
                    .p
                    .ok_or_else(|| CliError::Config("mod-p mode needs `p`".into()))?;
                Ok(CoefficientMode::ModP(p))
            }
            "twisted" => {
                let mats = self.coefficients.local_system.as_ref().ok_or_else(|| {
                    CliError::Config("twisted mode needs `local_system` matrices".into())
                })?;
                let rank = mats
                    .first()
                    .and_then(|m| m.first())
                    .map(Vec::len)
                    .ok_or_else(|| CliError::Config("empty local system".into()))?;
                let generators: Vec<IntMat> = mats
                    .iter()
                    .map(|rows| IntMat::from_rows(rows.clone()))
                    .collect();
                let ls = LocalSystem::new(rank, generators)
                    .map_err(|e| CliError::Config(format!("local system: {e}")))?;
                Ok(CoefficientMode::Twisted(ls))
            }
            other => Err(CliError::Config(format!(
                "unknown coefficient mode `{other}` (expected integers, mod-p or twisted)"
            ))),
        }
    }

    pub fn build_form(&self, name: &str, num_vars: usize) -> Result<FormExpression, CliError> {
        let fc = self
            .forms
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| CliError::Config(format!("form `{name}` is not defined")))?;
        let mut coefficients = Vec::with_capacity(fc.coefficients.len());
        for c in &fc.coefficients {
            let zero_based: Vec<usize> = c
                .indices
                .iter()
                .map(|&i| {
                    i.checked_sub(1).ok_or_else(|| {
                        CliError::Config(format!("form `{name}`: indices are 1-based"))
                    })
                })
                .collect::<Result<_, _>>()?;
            let expr = ScalarExpression::parse(&c.expr, num_vars)
                .map_err(|e| CliError::Config(format!("form `{name}`: {e}")))?;
            coefficients.push((zero_based, expr));
        }
        FormExpression::new(fc.degree, num_vars, coefficients)
            .map_err(|e| CliError::Config(format!("form `{name}`: {e}")))
    }
}
