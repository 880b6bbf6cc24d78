//! Pipeline orchestration: configuration, staged computation with a
//! content-hash cache, machine-readable reports and CSV exports.

pub mod artifacts;
pub mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::complex::{
    build_complex, homology, morse_inequalities, poincare_dual, CoefficientMode, HomologyResult,
    MorseComplex,
};
use crate::connections::{find_all_connections, sample_invariant_manifold, ConnectionData, ManifoldRole};
use crate::critical::{find_critical_points, CriticalSet};
use crate::currents::{
    admissible_samples, check_integral_residues, pairing, residue_table, verify_fme,
    verify_p_chain_map,
};
use crate::flow::FlowSpec;
use crate::geometry::ManifoldBackend;

use artifacts::{
    stage_key, write_clouds_csv, write_flow_lines_csv, Cache, ConnectionDataJson,
    CriticalPointJson, CriticalSetJson, MatrixJson,
};
use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    CriticalPoints,
    Connections,
    Complex,
    Homology,
    Residues,
    VerifyFme,
    Pairing,
    Report,
    All,
}

impl std::str::FromStr for Subcommand {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "critical-points" => Subcommand::CriticalPoints,
            "connections" => Subcommand::Connections,
            "complex" => Subcommand::Complex,
            "homology" => Subcommand::Homology,
            "residues" => Subcommand::Residues,
            "verify-fme" => Subcommand::VerifyFme,
            "pairing" => Subcommand::Pairing,
            "report" => Subcommand::Report,
            "all" => Subcommand::All,
            other => return Err(format!("unknown subcommand `{other}`")),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConnectionCountJson {
    pub to: usize,
    pub from: usize,
    pub lines: usize,
    pub signed_count: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HomologyJson {
    pub mode: String,
    pub betti: Vec<usize>,
    pub torsion: Vec<Vec<u64>>,
    pub euler_characteristic: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityJson {
    pub degree: usize,
    pub morse_sum: i64,
    pub betti_sum: i64,
    pub holds: bool,
    pub equality: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DualityJson {
    pub homology_matches: bool,
    pub transpose_consistent: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidueEntryJson {
    pub id: usize,
    pub index: usize,
    pub role: String,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidueTableJson {
    pub form: String,
    pub degree: usize,
    pub residues: Vec<ResidueEntryJson>,
    pub coresidues: Vec<ResidueEntryJson>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FmeJson {
    pub form: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainMapJson {
    pub form: String,
    pub rows: Vec<(usize, f64, f64)>,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairingJson {
    pub alpha: String,
    pub beta: String,
    pub residue_pairing: f64,
    pub direct_integral: f64,
    pub difference: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegralResidueJson {
    pub form: String,
    pub all_integral: bool,
    pub entries: Vec<(usize, f64, i64, bool)>,
    pub spark_note: Option<String>,
}

/// The machine-readable run report; every table is reproducible from the
/// cached intermediates, and two runs of the same config agree byte-for-byte
/// outside the `timings` section.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: String,
    pub code_version: String,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_points: Option<Vec<CriticalPointJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub euler_characteristic: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub connections: Option<Vec<ConnectionCountJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_matrices: Option<Vec<MatrixJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub homology: Option<HomologyJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub morse_inequalities: Option<Vec<InequalityJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duality: Option<DualityJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residues: Option<Vec<ResidueTableJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fme: Option<Vec<FmeJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain_map: Option<Vec<ChainMapJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairing: Option<Vec<PairingJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integral_residues: Option<Vec<IntegralResidueJson>>,
    pub warnings: Vec<String>,
    pub verification_failures: Vec<String>,
    pub timings_ms: BTreeMap<String, u64>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report_path: PathBuf,
    pub verification_failures: Vec<String>,
}

/// Execute one subcommand of the pipeline. Returns the report location and
/// any verification failures (which map to exit code 2).
pub fn run(
    config_path: &Path,
    out_dir: &Path,
    subcommand: Subcommand,
    no_cache: bool,
    verbose: bool,
) -> Result<RunOutcome, CliError> {
    let config = RunConfig::from_path(config_path)?;
    let mut pipeline = Pipeline::new(config, out_dir.to_path_buf(), no_cache, verbose)?;
    pipeline.dispatch(subcommand)?;
    pipeline.finish(subcommand)
}

struct Pipeline {
    config: RunConfig,
    out_dir: PathBuf,
    cache: Cache,
    verbose: bool,
    manifold: ManifoldBackend,
    flow: FlowSpec,
    critical: Option<CriticalSet>,
    connections: Option<ConnectionData>,
    complex: Option<MorseComplex>,
    homology: Option<HomologyResult>,
    report: RunReport,
}

impl Pipeline {
    fn new(
        config: RunConfig,
        out_dir: PathBuf,
        no_cache: bool,
        verbose: bool,
    ) -> Result<Self, CliError> {
        std::fs::create_dir_all(&out_dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out_dir.display())))?;
        let cache = Cache::new(&out_dir, !no_cache)?;
        let manifold = config.build_manifold()?;
        let flow = config.build_flow(&manifold)?;
        let report = RunReport {
            schema: "morseflow-report/1".to_string(),
            code_version: artifacts::CODE_VERSION.to_string(),
            config: config.clone(),
            critical_points: None,
            euler_characteristic: None,
            connections: None,
            boundary_matrices: None,
            homology: None,
            morse_inequalities: None,
            duality: None,
            residues: None,
            fme: None,
            chain_map: None,
            pairing: None,
            integral_residues: None,
            warnings: Vec::new(),
            verification_failures: Vec::new(),
            timings_ms: BTreeMap::new(),
        };
        Ok(Pipeline {
            config,
            out_dir,
            cache,
            verbose,
            manifold,
            flow,
            critical: None,
            connections: None,
            complex: None,
            homology: None,
            report,
        })
    }

    fn log(&self, msg: &str) {
        if self.verbose {
            eprintln!("[morseflow] {msg}");
        }
    }

    fn timed<T>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Self) -> Result<T, CliError>,
    ) -> Result<T, CliError> {
        let start = Instant::now();
        let out = f(self)?;
        let elapsed = start.elapsed().as_millis() as u64;
        self.report.timings_ms.insert(name.to_string(), elapsed);
        Ok(out)
    }

    fn dispatch(&mut self, sub: Subcommand) -> Result<(), CliError> {
        match sub {
            Subcommand::CriticalPoints => {
                self.stage_critical()?;
            }
            Subcommand::Connections => {
                self.stage_connections()?;
            }
            Subcommand::Complex => {
                self.stage_complex()?;
            }
            Subcommand::Homology => {
                self.stage_homology()?;
            }
            Subcommand::Residues => {
                self.stage_residues()?;
            }
            Subcommand::VerifyFme => {
                self.stage_fme()?;
            }
            Subcommand::Pairing => {
                self.stage_pairing()?;
            }
            Subcommand::Report | Subcommand::All => {
                if self.flow.function().is_some() {
                    self.stage_homology()?;
                    if !self.config.analysis.residues.is_empty() {
                        self.stage_residues()?;
                    }
                    if !self.config.analysis.chain_map.is_empty() {
                        self.stage_chain_map()?;
                    }
                    if !self.config.analysis.pairing.is_empty() {
                        self.stage_pairing()?;
                    }
                    if !self.config.analysis.integral_residues.is_empty() {
                        self.stage_integral_residues()?;
                    }
                }
                if !self.config.analysis.fme.is_empty() {
                    self.stage_fme()?;
                }
            }
        }
        Ok(())
    }

    fn stage_critical(&mut self) -> Result<&CriticalSet, CliError> {
        if self.critical.is_some() {
            return Ok(self.critical.as_ref().unwrap());
        }
        let key = stage_key(&[
            &self.config.manifold,
            &self.config.function,
            &self.config.tolerances,
            &self.config.seeds,
        ]);
        if let Some(json) = self.cache.load::<CriticalSetJson>("critical", key) {
            self.log("critical points: cache hit");
            let cs = json.into_set();
            self.fill_critical_report(&cs);
            self.critical = Some(cs);
            return Ok(self.critical.as_ref().unwrap());
        }
        let cs = self.timed("critical", |p| {
            let f = p
                .config
                .build_function(&p.manifold)?
                .ok_or_else(|| CliError::Config("this stage needs a [function] section".into()))?;
            let seeds = p.config.build_seeds(&p.manifold)?;
            find_critical_points(&p.manifold, &f, &seeds, &p.config.critical_options())
                .map_err(|e| CliError::Compute(e.to_string()))
        })?;
        self.log(&format!("critical points: {}", cs.points.len()));
        self.cache
            .store("critical", key, &CriticalSetJson::from_set(&cs))?;
        self.fill_critical_report(&cs);
        self.critical = Some(cs);
        Ok(self.critical.as_ref().unwrap())
    }

    fn fill_critical_report(&mut self, cs: &CriticalSet) {
        self.report.critical_points = Some(CriticalSetJson::from_set(cs).points);
        self.report.euler_characteristic = Some(cs.euler_characteristic());
    }

    fn stage_connections(&mut self) -> Result<&ConnectionData, CliError> {
        if self.connections.is_some() {
            return Ok(self.connections.as_ref().unwrap());
        }
        self.stage_critical()?;
        let key = stage_key(&[
            &self.config.manifold,
            &self.config.function,
            &self.config.tolerances,
            &self.config.seeds,
            &self.config.flow,
        ]);
        let data = if let Some(json) = self.cache.load::<ConnectionDataJson>("connections", key) {
            self.log("connections: cache hit");
            json.into_data()
        } else {
            let data = self.timed("connections", |p| {
                let cs = p.critical.as_ref().unwrap();
                find_all_connections(&p.flow, cs, &p.config.connection_options())
                    .map_err(|e| CliError::Compute(e.to_string()))
            })?;
            self.cache
                .store("connections", key, &ConnectionDataJson::from_data(&data))?;
            data
        };
        self.report.connections = Some(
            data.lines
                .iter()
                .map(|(&(to, from), lines)| ConnectionCountJson {
                    to,
                    from,
                    lines: lines.len(),
                    signed_count: lines.iter().map(|l| l.sign).sum(),
                })
                .collect(),
        );
        self.report.warnings.extend(data.warnings.iter().cloned());
        write_flow_lines_csv(&self.out_dir.join("flow_lines.csv"), &data)?;
        artifacts::write_trajectories_csv(&self.out_dir.join("trajectories.csv"), &data)?;
        self.connections = Some(data);
        Ok(self.connections.as_ref().unwrap())
    }

    fn stage_complex(&mut self) -> Result<&MorseComplex, CliError> {
        if self.complex.is_some() {
            return Ok(self.complex.as_ref().unwrap());
        }
        self.stage_connections()?;
        let mode = self.config.build_mode(&self.manifold)?;
        let complex = {
            let cs = self.critical.as_ref().unwrap();
            let conn = self.connections.as_ref().unwrap();
            match build_complex(&self.manifold, cs, conn, mode) {
                Ok(c) => c,
                Err(e @ crate::complex::ComplexError::D2NotZero { .. }) => {
                    self.report
                        .verification_failures
                        .push(format!("d² = 0 failed: {e}"));
                    return Err(CliError::Compute(e.to_string()));
                }
                Err(e) => return Err(CliError::Compute(e.to_string())),
            }
        };
        self.report.boundary_matrices = Some(
            (1..=self.manifold.dim())
                .map(|k| MatrixJson::from_mat(k, &complex.boundary[k]))
                .collect(),
        );
        self.complex = Some(complex);
        Ok(self.complex.as_ref().unwrap())
    }

    fn stage_homology(&mut self) -> Result<&HomologyResult, CliError> {
        if self.homology.is_some() {
            return Ok(self.homology.as_ref().unwrap());
        }
        self.stage_complex()?;
        let h = self.timed("homology", |p| {
            homology(p.complex.as_ref().unwrap()).map_err(|e| CliError::Compute(e.to_string()))
        })?;
        let mode_name = match &self.complex.as_ref().unwrap().mode {
            CoefficientMode::Integers => "integers".to_string(),
            CoefficientMode::ModP(p) => format!("mod-{p}"),
            CoefficientMode::Twisted(ls) => format!("twisted-rank-{}", ls.rank),
        };
        self.report.homology = Some(HomologyJson {
            mode: mode_name,
            betti: h.betti.clone(),
            torsion: h.torsion.clone(),
            euler_characteristic: h.euler_characteristic(),
        });
        // Morse inequalities only make sense with integral (or field) counts.
        if matches!(
            self.complex.as_ref().unwrap().mode,
            CoefficientMode::Integers
        ) {
            let counts = self
                .critical
                .as_ref()
                .unwrap()
                .index_counts(self.manifold.dim());
            let ineq = morse_inequalities(&counts, &h);
            if !ineq.all_hold() {
                self.report
                    .verification_failures
                    .push("Morse inequalities violated".to_string());
            }
            self.report.morse_inequalities = Some(
                ineq.rows
                    .iter()
                    .map(|r| InequalityJson {
                        degree: r.degree,
                        morse_sum: r.morse_sum,
                        betti_sum: r.betti_sum,
                        holds: r.holds,
                        equality: r.morse_sum == r.betti_sum,
                    })
                    .collect(),
            );
        }
        self.homology = Some(h);
        if self.config.analysis.dualize {
            self.stage_duality()?;
        }
        Ok(self.homology.as_ref().unwrap())
    }

    fn stage_duality(&mut self) -> Result<(), CliError> {
        if !self.manifold.orientable()
            || !matches!(
                self.complex.as_ref().map(|c| &c.mode),
                Some(CoefficientMode::Integers)
            )
        {
            self.report
                .warnings
                .push("duality check skipped (needs an orientable, untwisted run)".into());
            return Ok(());
        }
        let report = self.timed("duality", |p| {
            let seeds = p.config.build_seeds(&p.manifold)?;
            let (_, report) = poincare_dual(
                &p.flow,
                &seeds,
                &p.config.critical_options(),
                &p.config.connection_options(),
                p.critical.as_ref().unwrap(),
                p.complex.as_ref().unwrap(),
            )
            .map_err(|e| CliError::Compute(e.to_string()))?;
            Ok(report)
        })?;
        if !report.holds() {
            self.report.verification_failures.push(format!(
                "duality mismatch: homology {}, transposes {}",
                report.homology_matches, report.transpose_consistent
            ));
        }
        self.report.duality = Some(DualityJson {
            homology_matches: report.homology_matches,
            transpose_consistent: report.transpose_consistent,
            holds: report.holds(),
        });
        Ok(())
    }

    fn stage_residues(&mut self) -> Result<(), CliError> {
        self.stage_critical()?;
        let names = self.config.analysis.residues.clone();
        let opts = self.config.quadrature_options();
        let mut tables = Vec::new();
        for name in names {
            let alpha = self
                .config
                .build_form(&name, self.manifold.ambient_dim())?;
            let table = self.timed(&format!("residues.{name}"), |p| {
                residue_table(&p.flow, p.critical.as_ref().unwrap(), &alpha, &opts)
                    .map_err(|e| CliError::Compute(e.to_string()))
            })?;
            tables.push(ResidueTableJson {
                form: name,
                degree: table.degree,
                residues: table
                    .residues
                    .iter()
                    .map(|e| ResidueEntryJson {
                        id: e.id,
                        index: e.index,
                        role: role_name(e.role).into(),
                        value: e.value,
                        error: e.error,
                    })
                    .collect(),
                coresidues: table
                    .coresidues
                    .iter()
                    .map(|e| ResidueEntryJson {
                        id: e.id,
                        index: e.index,
                        role: role_name(e.role).into(),
                        value: e.value,
                        error: e.error,
                    })
                    .collect(),
            });
        }
        self.report.residues = Some(tables);
        Ok(())
    }

    fn stage_fme(&mut self) -> Result<(), CliError> {
        let cs = if self.flow.function().is_some() {
            Some(self.stage_critical()?.clone())
        } else {
            None
        };
        let a = self.config.analysis.clone();
        let opts = self.config.quadrature_options();
        let mut results = Vec::new();
        for name in &a.fme {
            let alpha = self.config.build_form(name, self.manifold.ambient_dim())?;
            let report = self.timed(&format!("fme.{name}"), |p| {
                let samples = admissible_samples(
                    &p.flow,
                    cs.as_ref(),
                    a.fme_samples,
                    a.fme_margin,
                    a.fme_seed,
                )
                .map_err(|e| CliError::Compute(e.to_string()))?;
                verify_fme(&p.flow, &alpha, &samples, a.fme_step, &opts)
                    .map_err(|e| CliError::Compute(e.to_string()))
            })?;
            let passed = report.max_residual < a.fme_tolerance;
            if !passed {
                self.report.verification_failures.push(format!(
                    "FME residual {:.3e} above tolerance {:.1e} for form `{name}`",
                    report.max_residual, a.fme_tolerance
                ));
            }
            results.push(FmeJson {
                form: name.clone(),
                samples: report.samples_used,
                max_residual: report.max_residual,
                tolerance: a.fme_tolerance,
                passed,
            });
        }
        self.report.fme = Some(results);
        Ok(())
    }

    fn stage_chain_map(&mut self) -> Result<(), CliError> {
        self.stage_complex()?;
        let names = self.config.analysis.chain_map.clone();
        let tol = self.config.analysis.chain_map_tolerance;
        let opts = self.config.quadrature_options();
        let mut results = Vec::new();
        for name in names {
            let beta = self.config.build_form(&name, self.manifold.ambient_dim())?;
            let report = self.timed(&format!("chain_map.{name}"), |p| {
                verify_p_chain_map(
                    &p.flow,
                    p.critical.as_ref().unwrap(),
                    p.complex.as_ref().unwrap(),
                    &beta,
                    &opts,
                )
                .map_err(|e| CliError::Compute(e.to_string()))
            })?;
            let passed = report.max_residual < tol;
            if !passed {
                self.report.verification_failures.push(format!(
                    "chain-map residual {:.3e} above tolerance {tol:.1e} for form `{name}`",
                    report.max_residual
                ));
            }
            results.push(ChainMapJson {
                form: name,
                rows: report.rows.iter().map(|r| (r.q, r.lhs, r.rhs)).collect(),
                max_residual: report.max_residual,
                tolerance: tol,
                passed,
            });
        }
        self.report.chain_map = Some(results);
        Ok(())
    }

    fn stage_pairing(&mut self) -> Result<(), CliError> {
        self.stage_critical()?;
        let pairs = self.config.analysis.pairing.clone();
        let tol = self.config.analysis.pairing_tolerance;
        let opts = self.config.quadrature_options();
        let mut results = Vec::new();
        for [a_name, b_name] in pairs {
            let alpha = self
                .config
                .build_form(&a_name, self.manifold.ambient_dim())?;
            let beta = self
                .config
                .build_form(&b_name, self.manifold.ambient_dim())?;
            let report = self.timed(&format!("pairing.{a_name}.{b_name}"), |p| {
                pairing(&p.flow, p.critical.as_ref().unwrap(), &alpha, &beta, &opts)
                    .map_err(|e| CliError::Compute(e.to_string()))
            })?;
            let passed = report.difference < tol;
            if !passed {
                self.report.verification_failures.push(format!(
                    "pairing difference {:.3e} above tolerance {tol:.1e} for ({a_name}, {b_name})",
                    report.difference
                ));
            }
            results.push(PairingJson {
                alpha: a_name,
                beta: b_name,
                residue_pairing: report.residue_pairing,
                direct_integral: report.direct_integral,
                difference: report.difference,
                tolerance: tol,
                passed,
            });
        }
        self.report.pairing = Some(results);
        Ok(())
    }

    fn stage_integral_residues(&mut self) -> Result<(), CliError> {
        self.stage_critical()?;
        let names = self.config.analysis.integral_residues.clone();
        let int_tol = self.config.tolerances.int_tol;
        let opts = self.config.quadrature_options();
        let mut results = Vec::new();
        for name in names {
            let alpha = self.config.build_form(&name, self.manifold.ambient_dim())?;
            let report = self.timed(&format!("integral_residues.{name}"), |p| {
                check_integral_residues(
                    &p.flow,
                    p.critical.as_ref().unwrap(),
                    &alpha,
                    int_tol,
                    &opts,
                )
                .map_err(|e| CliError::Compute(e.to_string()))
            })?;
            results.push(IntegralResidueJson {
                form: name,
                all_integral: report.all_integral,
                entries: report
                    .entries
                    .iter()
                    .map(|e| (e.id, e.value, e.nearest, e.within_tol))
                    .collect(),
                spark_note: report.spark_note,
            });
        }
        self.report.integral_residues = Some(results);
        Ok(())
    }

    fn export_clouds(&mut self) -> Result<(), CliError> {
        let Some(cs) = self.critical.as_ref() else {
            return Ok(());
        };
        let mut clouds = BTreeMap::new();
        let opts = self.config.connection_options();
        for p in &cs.points {
            for (role, name) in [
                (ManifoldRole::Unstable, "unstable"),
                (ManifoldRole::Stable, "stable"),
            ] {
                let dim = match role {
                    ManifoldRole::Unstable => p.unstable_frame.vectors.len(),
                    ManifoldRole::Stable => p.stable_frame.vectors.len(),
                };
                if dim == 0 || dim > 2 {
                    continue;
                }
                let cloud = sample_invariant_manifold(&self.flow, cs, p.id, role, &opts)
                    .map_err(|e| CliError::Compute(e.to_string()))?;
                clouds.insert((p.id, name), cloud);
            }
        }
        write_clouds_csv(&self.out_dir.join("clouds.csv"), &clouds)
    }

    fn finish(mut self, sub: Subcommand) -> Result<RunOutcome, CliError> {
        if sub == Subcommand::All && self.flow.function().is_some() {
            self.export_clouds()?;
        }
        let report_path = self.out_dir.join("report.json");
        let text = serde_json::to_string_pretty(&self.report)
            .map_err(|e| CliError::Io(format!("report serialization: {e}")))?;
        std::fs::write(&report_path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", report_path.display())))?;
        self.log(&format!("report written to {}", report_path.display()));
        Ok(RunOutcome {
            report_path,
            verification_failures: self.report.verification_failures,
        })
    }
}

fn role_name(role: ManifoldRole) -> &'static str {
    match role {
        ManifoldRole::Stable => "stable",
        ManifoldRole::Unstable => "unstable",
    }
}
