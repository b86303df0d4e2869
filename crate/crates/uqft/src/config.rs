//! Run configurations: the schema, parse-time validation, world
//! building, suite drivers, and the CSV/JSON result writers with their
//! run manifest.
//!
//! One structured text file (TOML) fully determines a run: kinematics,
//! the interaction measure, packet and sequence definitions, quadrature
//! settings, output locations, and exactly one suite block selected by
//! `suite.kind`. Parsing is strict — unknown keys, inconsistent suite
//! blocks, and every positivity constraint of the underlying modules are
//! rejected before any computation starts.
//!
//! Each run writes its result files plus `manifest.json` recording the
//! configuration hash (FNV-1a of the raw file bytes), crate version,
//! seeds, output list, timings, and a partial/error flag. Result files
//! are bit-reproducible for a fixed configuration, seed, and thread
//! settings; the manifest's timing fields are the one intentional
//! exception.
//!
//! CSV headers are fixed here: `eigenvalues.csv` has `index,eigenvalue`;
//! `scatter.csv` has `L,numeric_re,numeric_im,err,closed_re,closed_im,
//! ratio_abs`; `cluster.csv` has `rho,deviation,pairing_re,pairing_im,
//! err`; `freefield.csv` has `f,g,pairing_re,pairing_im,oracle_re,
//! oracle_im,diff,bound`.

use crate::cache::fnv64;
use crate::gram::{self, GramError, MAX_BASIS, MAX_SIDE_DEGREE};
use crate::quad::QuadConfig;
use crate::scatter::{self, ScatterKinematics, FORWARD_EXCLUSION_WIDTHS};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;
use uqft_core::algebra::{seq_product, FunctionSequence, GaussianPacket, Kinematics};
use uqft_core::kernel::MomentMeasure;

/// Configuration schema version this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Error raised while reading or validating a configuration (exit code 2
/// territory for the command-line front end).
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    /// The file could not be read.
    #[error("cannot read configuration: {0}")]
    Io(#[from] std::io::Error),
    /// The file is not valid TOML for the schema.
    #[error("configuration does not parse: {0}")]
    Parse(#[from] toml::de::Error),
    /// The schema version is not supported.
    #[error("unsupported schema version {found}; this build reads version {SCHEMA_VERSION}")]
    Schema {
        /// Version the file declares.
        found: u32,
    },
    /// A semantic constraint failed.
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Error raised while executing a run.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// The configuration was rejected (exit code 2).
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// Evaluation failed or a verified property did not hold (exit 1).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A result file could not be written (exit 1).
    #[error("output failed: {0}")]
    Output(String),
}

/// A fully parsed run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Schema version; must equal [`SCHEMA_VERSION`].
    pub schema: u32,
    /// Run seed (feeds the Monte-Carlo oracle unless overridden).
    #[serde(default)]
    pub seed: u64,
    /// Single-particle kinematics.
    pub kinematics: KinematicsBlock,
    /// Interaction measure.
    #[serde(default)]
    pub measure: MeasureBlock,
    /// Named Gaussian labels (always stored with the on-shell lift).
    #[serde(default)]
    pub packets: Vec<PacketDef>,
    /// Named state labels built from packets.
    #[serde(default)]
    pub sequences: Vec<SequenceDef>,
    /// Quadrature settings.
    #[serde(default)]
    pub quadrature: QuadBlock,
    /// Output locations.
    #[serde(default)]
    pub output: OutputBlock,
    /// The suite to execute.
    pub suite: SuiteBlock,
}

/// Mass block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicsBlock {
    /// Particle mass m > 0.
    pub mass: f64,
}

/// The nonnegative atomic interaction measure.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureBlock {
    /// Measure atoms; an empty list is the free theory.
    #[serde(default)]
    pub atoms: Vec<AtomDef>,
}

/// One measure atom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomDef {
    /// Atom location λ.
    pub lambda: f64,
    /// Atom weight ≥ 0.
    pub weight: f64,
}

/// One named Gaussian label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketDef {
    /// Identifier referenced by sequence definitions.
    pub id: String,
    /// Momentum centre.
    pub center: [f64; 3],
    /// Width L > 0.
    pub width: f64,
    /// Phase parameter τ.
    #[serde(default)]
    pub tau: f64,
}

/// One named state label: a sum of packet products.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceDef {
    /// Identifier referenced by suite blocks.
    pub id: String,
    /// Summands.
    pub terms: Vec<SequenceTermDef>,
}

/// One summand of a sequence: a complex coefficient times a product of
/// named packets (the empty product is the unit).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceTermDef {
    /// Coefficient as `[re, im]`.
    #[serde(default = "default_coeff")]
    pub coeff: [f64; 2],
    /// Packet identifiers multiplied left to right.
    #[serde(default)]
    pub packets: Vec<String>,
}

fn default_coeff() -> [f64; 2] {
    [1.0, 0.0]
}

/// Base quadrature preset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadPreset {
    /// Production grids.
    #[default]
    Default,
    /// Half-resolution grids for quick runs.
    Coarse,
}

/// Quadrature settings: a preset plus optional per-field overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadBlock {
    /// Starting preset.
    #[serde(default)]
    pub preset: QuadPreset,
    /// Momentum-grid points per axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum_points: Option<usize>,
    /// Momentum half-span per axis in units of 1/L.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum_halfspan_widths: Option<f64>,
    /// Position-sample ball radius in units of L.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contraction_radius_widths: Option<f64>,
    /// Relative-time step in units of 1/m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upsilon_step_mass: Option<f64>,
    /// Relative-time half-span in units of 1/m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upsilon_halfspan_mass: Option<f64>,
    /// Gauss–Hermite nodes per axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hermite_points: Option<usize>,
    /// Relative tolerance for pair-overlap refinement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cubature_rel_tol: Option<f64>,
    /// Monte-Carlo samples per smoothing width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    /// Monte-Carlo seed override (defaults to the run seed).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_seed: Option<u64>,
    /// Smoothing-width ladder (descending, halving).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_ladder: Option<Vec<f64>>,
}

impl QuadBlock {
    /// The quadrature configuration this block describes; `run_seed`
    /// becomes the Monte-Carlo seed unless explicitly overridden.
    pub fn to_quad_config(&self, run_seed: u64) -> QuadConfig {
        let mut cfg = match self.preset {
            QuadPreset::Default => QuadConfig::default(),
            QuadPreset::Coarse => QuadConfig::coarse(),
        };
        cfg.mc_seed = self.mc_seed.unwrap_or(run_seed);
        if let Some(v) = self.momentum_points {
            cfg.momentum_points = v;
        }
        if let Some(v) = self.momentum_halfspan_widths {
            cfg.momentum_halfspan_widths = v;
        }
        if let Some(v) = self.contraction_radius_widths {
            cfg.contraction_radius_widths = v;
        }
        if let Some(v) = self.upsilon_step_mass {
            cfg.upsilon_step_mass = v;
        }
        if let Some(v) = self.upsilon_halfspan_mass {
            cfg.upsilon_halfspan_mass = v;
        }
        if let Some(v) = self.hermite_points {
            cfg.hermite_points = v;
        }
        if let Some(v) = self.cubature_rel_tol {
            cfg.cubature_rel_tol = v;
        }
        if let Some(v) = self.mc_samples {
            cfg.mc_samples = v;
        }
        if let Some(v) = &self.epsilon_ladder {
            cfg.epsilon_ladder = v.clone();
        }
        cfg
    }
}

/// Output locations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    /// Directory receiving result files and the manifest.
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    /// Optional transform-cache directory (the `UQFT_CACHE_DIR`
    /// environment variable overrides it).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { dir: default_out_dir(), cache_dir: None }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Which suite a run executes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteKind {
    /// Gram matrix with positivity verdict.
    Gram,
    /// Scattering convergence scan.
    Scatter,
    /// Cluster-decomposition scan.
    Cluster,
    /// Free-sector pairing against the matching-sum oracle.
    Freefield,
}

impl SuiteKind {
    /// Lower-case name used in file contents.
    pub fn name(self) -> &'static str {
        match self {
            SuiteKind::Gram => "gram",
            SuiteKind::Scatter => "scatter",
            SuiteKind::Cluster => "cluster",
            SuiteKind::Freefield => "freefield",
        }
    }
}

/// The suite selector plus exactly one matching sub-block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteBlock {
    /// Selected suite; its sub-block must be present, all others absent.
    pub kind: SuiteKind,
    /// Gram suite parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gram: Option<GramSuite>,
    /// Scattering suite parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scatter: Option<ScatterSuite>,
    /// Cluster suite parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<ClusterSuite>,
    /// Free-field suite parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freefield: Option<FreefieldSuite>,
}

/// Gram suite: the basis whose matrix is assembled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GramSuite {
    /// Sequence identifiers forming the basis, in order.
    pub basis: Vec<String>,
}

/// Scattering suite: kinematics and the width ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterSuite {
    /// Incoming on-shell momenta.
    pub in_momenta: Vec<[f64; 3]>,
    /// Outgoing on-shell momenta.
    pub out_momenta: Vec<[f64; 3]>,
    /// Packet widths scanned, each producing one row.
    pub widths: Vec<f64>,
}

/// Cluster suite: two states, a direction, and the separation ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSuite {
    /// Left state label.
    pub f: String,
    /// Right state label (translated).
    pub g: String,
    /// Spatial translation direction (normalized internally).
    pub direction: [f64; 3],
    /// Separations ρ ≥ 0 scanned.
    pub rhos: Vec<f64>,
}

/// Free-field suite: pairs compared against the matching-sum oracle
/// under the empty measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreefieldSuite {
    /// `[left, right]` sequence identifier pairs.
    pub pairs: Vec<[String; 2]>,
}

/// Reads and fully validates a configuration file, returning the parsed
/// configuration together with the raw bytes (hashed into the manifest).
pub fn parse_config(path: &Path) -> Result<(RunConfig, Vec<u8>), ConfigError> {
    let bytes = fs::read(path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| ConfigError::Invalid("configuration is not UTF-8".into()))?;
    let config: RunConfig = toml::from_str(&text)?;
    config.validate()?;
    Ok((config, bytes))
}

impl RunConfig {
    /// Checks every semantic constraint the schema cannot express.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        if self.schema != SCHEMA_VERSION {
            return Err(ConfigError::Schema { found: self.schema });
        }
        if !(self.kinematics.mass > 0.0) || !self.kinematics.mass.is_finite() {
            return invalid(format!("kinematics.mass must be positive, got {}", self.kinematics.mass));
        }
        for atom in &self.measure.atoms {
            if !atom.lambda.is_finite() || !atom.weight.is_finite() || atom.weight < 0.0 {
                return invalid(format!(
                    "measure atom (lambda {}, weight {}) must be finite with nonnegative weight",
                    atom.lambda, atom.weight
                ));
            }
        }
        let mut packet_ids = BTreeMap::new();
        for p in &self.packets {
            if p.id.is_empty() {
                return invalid("packet ids must be nonempty".into());
            }
            if packet_ids.insert(p.id.clone(), ()).is_some() {
                return invalid(format!("duplicate packet id {:?}", p.id));
            }
            if !(p.width > 0.0) || !p.width.is_finite() {
                return invalid(format!("packet {:?} width must be positive, got {}", p.id, p.width));
            }
            if !p.tau.is_finite() || p.center.iter().any(|c| !c.is_finite()) {
                return invalid(format!("packet {:?} has a non-finite centre or tau", p.id));
            }
        }
        let mut sequence_ids = BTreeMap::new();
        for s in &self.sequences {
            if s.id.is_empty() {
                return invalid("sequence ids must be nonempty".into());
            }
            if sequence_ids.insert(s.id.clone(), ()).is_some() {
                return invalid(format!("duplicate sequence id {:?}", s.id));
            }
            for term in &s.terms {
                if term.coeff.iter().any(|c| !c.is_finite()) {
                    return invalid(format!("sequence {:?} has a non-finite coefficient", s.id));
                }
                if term.packets.len() > MAX_SIDE_DEGREE {
                    return invalid(format!(
                        "sequence {:?} has a {}-particle term; suites accept at most {} particles per side",
                        s.id,
                        term.packets.len(),
                        MAX_SIDE_DEGREE
                    ));
                }
                for pid in &term.packets {
                    if !packet_ids.contains_key(pid) {
                        return invalid(format!("sequence {:?} references unknown packet {:?}", s.id, pid));
                    }
                }
            }
        }
        let quad = self.quadrature.to_quad_config(self.seed);
        quad.validate().map_err(|e| ConfigError::Invalid(format!("quadrature: {e}")))?;
        let suite = &self.suite;
        let require_sequence = |id: &String, role: &str| {
            if sequence_ids.contains_key(id) {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{role} references unknown sequence {id:?}")))
            }
        };
        for (name, present) in [
            ("gram", suite.gram.is_some()),
            ("scatter", suite.scatter.is_some()),
            ("cluster", suite.cluster.is_some()),
            ("freefield", suite.freefield.is_some()),
        ] {
            if present && name != suite.kind.name() {
                return invalid(format!(
                    "suite.{} is present but suite.kind is {:?}",
                    name,
                    suite.kind.name()
                ));
            }
        }
        match suite.kind {
            SuiteKind::Gram => {
                let block = suite
                    .gram
                    .as_ref()
                    .ok_or_else(|| ConfigError::Invalid("suite.gram block is required".into()))?;
                if block.basis.is_empty() {
                    return invalid("suite.gram.basis must be nonempty".into());
                }
                if block.basis.len() > MAX_BASIS {
                    return invalid(format!(
                        "suite.gram.basis has {} vectors; the cap is {}",
                        block.basis.len(),
                        MAX_BASIS
                    ));
                }
                for id in &block.basis {
                    require_sequence(id, "suite.gram.basis")?;
                }
            }
            SuiteKind::Scatter => {
                let block = suite
                    .scatter
                    .as_ref()
                    .ok_or_else(|| ConfigError::Invalid("suite.scatter block is required".into()))?;
                if block.widths.is_empty() {
                    return invalid("suite.scatter.widths must be nonempty".into());
                }
                for &w in &block.widths {
                    if !(w > 0.0) || !w.is_finite() {
                        return invalid(format!("suite.scatter widths must be positive, got {w}"));
                    }
                }
                let kin = Kinematics::new(self.kinematics.mass)
                    .map_err(|e| ConfigError::Invalid(format!("kinematics: {e}")))?;
                let sk = ScatterKinematics::new(
                    block.in_momenta.clone(),
                    block.out_momenta.clone(),
                    &kin,
                )
                .map_err(|e| ConfigError::Invalid(format!("suite.scatter: {e}")))?;
                if sk.total() < 4 {
                    return invalid(format!(
                        "suite.scatter needs at least four legs, got {}",
                        sk.total()
                    ));
                }
                if !(sk.sigma_b_sq() > 0.0) {
                    return invalid("suite.scatter velocities are degenerate (zero spread)".into());
                }
                for &w in &block.widths {
                    let needed = FORWARD_EXCLUSION_WIDTHS / w;
                    if sk.min_gap() <= needed {
                        return invalid(format!(
                            "suite.scatter is forward at width {w}: in/out gap {:.4e} is within {:.4e}",
                            sk.min_gap(),
                            needed
                        ));
                    }
                }
            }
            SuiteKind::Cluster => {
                let block = suite
                    .cluster
                    .as_ref()
                    .ok_or_else(|| ConfigError::Invalid("suite.cluster block is required".into()))?;
                require_sequence(&block.f, "suite.cluster.f")?;
                require_sequence(&block.g, "suite.cluster.g")?;
                let norm_sq: f64 = block.direction.iter().map(|c| c * c).sum();
                if !(norm_sq > 0.0) || !norm_sq.is_finite() {
                    return invalid("suite.cluster.direction must be finite and nonzero".into());
                }
                if block.rhos.is_empty() {
                    return invalid("suite.cluster.rhos must be nonempty".into());
                }
                for &rho in &block.rhos {
                    if !rho.is_finite() || rho < 0.0 {
                        return invalid(format!("suite.cluster separations must be ≥ 0, got {rho}"));
                    }
                }
            }
            SuiteKind::Freefield => {
                let block = suite.freefield.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("suite.freefield block is required".into())
                })?;
                if block.pairs.is_empty() {
                    return invalid("suite.freefield.pairs must be nonempty".into());
                }
                for [f, g] in &block.pairs {
                    require_sequence(f, "suite.freefield.pairs")?;
                    require_sequence(g, "suite.freefield.pairs")?;
                }
            }
        }
        Ok(())
    }
}

/// Everything a suite needs, built from a validated configuration.
pub struct World {
    /// Single-particle kinematics.
    pub kin: Kinematics,
    /// Interaction measure.
    pub measure: MomentMeasure,
    /// Quadrature configuration (Monte-Carlo seed resolved).
    pub quad: QuadConfig,
    /// Named state labels.
    pub sequences: BTreeMap<String, FunctionSequence>,
}

/// Builds the kinematics, measure, quadrature settings, and named state
/// labels a validated configuration describes. Every packet label
/// carries the on-shell lift — raw unlifted labels are not expressible
/// in a run configuration.
pub fn build_world(config: &RunConfig) -> Result<World, ConfigError> {
    let kin = Kinematics::new(config.kinematics.mass)
        .map_err(|e| ConfigError::Invalid(format!("kinematics: {e}")))?;
    let measure =
        MomentMeasure::new(config.measure.atoms.iter().map(|a| (a.lambda, a.weight)).collect())
            .map_err(|e| ConfigError::Invalid(format!("measure: {e}")))?;
    let quad = config.quadrature.to_quad_config(config.seed);
    let mut packets = BTreeMap::new();
    for p in &config.packets {
        let packet = GaussianPacket::new(p.center, p.width, p.tau)
            .and_then(|packet| packet.lift())
            .map_err(|e| ConfigError::Invalid(format!("packet {:?}: {e}", p.id)))?;
        packets.insert(p.id.clone(), packet);
    }
    let mut sequences = BTreeMap::new();
    for s in &config.sequences {
        let mut seq = FunctionSequence::zero();
        for term in &s.terms {
            let mut product =
                FunctionSequence::scalar(Complex64::new(term.coeff[0], term.coeff[1]));
            for pid in &term.packets {
                let packet = packets[pid].clone();
                product = seq_product(&product, &FunctionSequence::from_packet(packet));
            }
            seq = seq.add(&product);
        }
        sequences.insert(s.id.clone(), seq);
    }
    Ok(World { kin, measure, quad, sequences })
}

/// Paths produced by a completed (or partially completed) run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    /// Result files, in the order written.
    pub outputs: Vec<PathBuf>,
    /// The run manifest.
    pub manifest: PathBuf,
}

/// Parses, validates, and executes the configuration at `path`.
pub fn execute_run(path: &Path) -> Result<RunOutcome, RunError> {
    let (config, bytes) = parse_config(path)?;
    run_suite(&config, &bytes)
}

/// Executes a validated configuration: runs its suite, writes the result
/// files, and always writes `manifest.json` — with the error recorded
/// and the partial flag set when the suite failed midway.
pub fn run_suite(config: &RunConfig, config_bytes: &[u8]) -> Result<RunOutcome, RunError> {
    let world = build_world(config)?;
    let dir = &config.output.dir;
    fs::create_dir_all(dir)
        .map_err(|e| RunError::Output(format!("cannot create {}: {e}", dir.display())))?;
    let started = Instant::now();
    let mut outputs: Vec<PathBuf> = Vec::new();
    let result = match config.suite.kind {
        SuiteKind::Gram => run_gram(config, &world, dir, &mut outputs),
        SuiteKind::Scatter => run_scatter(config, &world, dir, &mut outputs),
        SuiteKind::Cluster => run_cluster(config, &world, dir, &mut outputs),
        SuiteKind::Freefield => run_freefield(config, &world, dir, &mut outputs),
    };
    let elapsed_ms = started.elapsed().as_millis() as u64;
    let manifest_path = dir.join("manifest.json");
    let manifest = serde_json::json!({
        "schema": SCHEMA_VERSION,
        "kind": "run_manifest",
        "config_hash": format!("{:016x}", fnv64(config_bytes)),
        "crate_version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "mc_seed": world.quad.mc_seed,
        "suite": config.suite.kind.name(),
        "outputs": outputs.iter().map(|p| file_name_of(p)).collect::<Vec<_>>(),
        "cache_dir": config.output.cache_dir.as_ref().map(|p| p.display().to_string()),
        "timings_ms": { "total": elapsed_ms },
        "partial": result.is_err(),
        "error": result.as_ref().err().map(|e| e.to_string()),
    });
    write_text(&manifest_path, &format!("{:#}\n", manifest))?;
    result.map(|()| RunOutcome { outputs, manifest: manifest_path })
}

fn file_name_of(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn write_text(path: &Path, text: &str) -> Result<(), RunError> {
    fs::write(path, text)
        .map_err(|e| RunError::Output(format!("cannot write {}: {e}", path.display())))
}

fn numerical(e: GramError) -> RunError {
    RunError::Numerical(e.to_string())
}

/// Gram suite: writes `gram.json` and `eigenvalues.csv`; a failed
/// positivity verdict is a numerical failure after the files are
/// written.
fn run_gram(
    config: &RunConfig,
    world: &World,
    dir: &Path,
    outputs: &mut Vec<PathBuf>,
) -> Result<(), RunError> {
    let ids = &config.suite.gram.as_ref().expect("validated").basis;
    let basis: Vec<FunctionSequence> =
        ids.iter().map(|id| world.sequences[id].clone()).collect();
    let report = gram::gram_matrix(&basis, &world.measure, &world.kin, &world.quad)
        .map_err(numerical)?;
    let json = serde_json::json!({
        "schema": SCHEMA_VERSION,
        "kind": "gram_report",
        "basis": ids,
        "matrix": report
            .matrix
            .iter()
            .map(|row| row.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "entry_errors": report.entry_errors,
        "eigenvalues": report.eigenvalues,
        "min_eig": report.min_eig,
        "max_eig": report.max_eig,
        "psd": report.psd,
    });
    let json_path = dir.join("gram.json");
    write_text(&json_path, &format!("{:#}\n", json))?;
    outputs.push(json_path);
    let mut csv = String::from("index,eigenvalue\n");
    for (i, e) in report.eigenvalues.iter().enumerate() {
        let _ = writeln!(csv, "{i},{e}");
    }
    let csv_path = dir.join("eigenvalues.csv");
    write_text(&csv_path, &csv)?;
    outputs.push(csv_path);
    if !report.psd {
        return Err(RunError::Numerical(format!(
            "Gram matrix fails positivity: min eigenvalue {} against max {}",
            report.min_eig, report.max_eig
        )));
    }
    Ok(())
}

/// Scattering suite: writes `scatter.csv` (columns `L,numeric_re,
/// numeric_im,err,closed_re,closed_im,ratio_abs`) and `scatter.json`.
fn run_scatter(
    config: &RunConfig,
    world: &World,
    dir: &Path,
    outputs: &mut Vec<PathBuf>,
) -> Result<(), RunError> {
    let block = config.suite.scatter.as_ref().expect("validated");
    let sk = ScatterKinematics::new(block.in_momenta.clone(), block.out_momenta.clone(), &world.kin)
        .map_err(|e| RunError::Numerical(e.to_string()))?;
    let rows = scatter::convergence_scan(&sk, &block.widths, &world.measure, &world.quad)
        .map_err(|e| RunError::Numerical(e.to_string()))?;
    let mut csv = String::from("L,numeric_re,numeric_im,err,closed_re,closed_im,ratio_abs\n");
    for row in &rows {
        if !row.numeric.value.re.is_finite() || !row.numeric.value.im.is_finite() {
            return Err(RunError::Numerical(format!(
                "amplitude at width {} is not finite",
                row.width
            )));
        }
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            row.width,
            row.numeric.value.re,
            row.numeric.value.im,
            row.numeric.error,
            row.closed.re,
            row.closed.im,
            row.ratio.norm()
        );
    }
    let csv_path = dir.join("scatter.csv");
    write_text(&csv_path, &csv)?;
    outputs.push(csv_path);
    let json = serde_json::json!({
        "schema": SCHEMA_VERSION,
        "kind": "scatter_scan",
        "in_momenta": block.in_momenta,
        "out_momenta": block.out_momenta,
        "rows": rows
            .iter()
            .map(|r| serde_json::json!({
                "width": r.width,
                "numeric": [r.numeric.value.re, r.numeric.value.im],
                "err": r.numeric.error,
                "closed": [r.closed.re, r.closed.im],
                "ratio_abs": r.ratio.norm(),
            }))
            .collect::<Vec<_>>(),
    });
    let json_path = dir.join("scatter.json");
    write_text(&json_path, &format!("{:#}\n", json))?;
    outputs.push(json_path);
    Ok(())
}

/// Cluster suite: writes `cluster.csv` (columns `rho,deviation,
/// pairing_re,pairing_im,err`) and `cluster.json`.
fn run_cluster(
    config: &RunConfig,
    world: &World,
    dir: &Path,
    outputs: &mut Vec<PathBuf>,
) -> Result<(), RunError> {
    let block = config.suite.cluster.as_ref().expect("validated");
    let samples = gram::cluster_scan(
        &world.sequences[&block.f],
        &world.sequences[&block.g],
        block.direction,
        &block.rhos,
        &world.measure,
        &world.kin,
        &world.quad,
    )
    .map_err(numerical)?;
    let mut csv = String::from("rho,deviation,pairing_re,pairing_im,err\n");
    for s in &samples {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            s.rho, s.deviation, s.pairing.value.re, s.pairing.value.im, s.pairing.error
        );
    }
    let csv_path = dir.join("cluster.csv");
    write_text(&csv_path, &csv)?;
    outputs.push(csv_path);
    let json = serde_json::json!({
        "schema": SCHEMA_VERSION,
        "kind": "cluster_scan",
        "f": block.f,
        "g": block.g,
        "direction": block.direction,
        "rows": samples
            .iter()
            .map(|s| serde_json::json!({
                "rho": s.rho,
                "deviation": s.deviation,
                "pairing": [s.pairing.value.re, s.pairing.value.im],
                "err": s.pairing.error,
            }))
            .collect::<Vec<_>>(),
    });
    let json_path = dir.join("cluster.json");
    write_text(&json_path, &format!("{:#}\n", json))?;
    outputs.push(json_path);
    Ok(())
}

/// Free-field suite: pairs evaluated under the empty measure against the
/// matching-sum oracle. Writes `freefield.csv` (columns `f,g,pairing_re,
/// pairing_im,oracle_re,oracle_im,diff,bound`) and `freefield.json`; any
/// pair disagreeing beyond its bound is a numerical failure after the
/// files are written.
fn run_freefield(
    config: &RunConfig,
    world: &World,
    dir: &Path,
    outputs: &mut Vec<PathBuf>,
) -> Result<(), RunError> {
    let block = config.suite.freefield.as_ref().expect("validated");
    let empty = MomentMeasure::empty();
    let mut csv = String::from("f,g,pairing_re,pairing_im,oracle_re,oracle_im,diff,bound\n");
    let mut rows = Vec::new();
    let mut worst: Option<String> = None;
    for [fid, gid] in &block.pairs {
        let f = &world.sequences[fid];
        let g = &world.sequences[gid];
        let pairing = gram::eval_pairing(f, g, &empty, &world.kin, &world.quad).map_err(numerical)?;
        let oracle = gram::free_field_oracle(f, g, &world.kin, &world.quad).map_err(numerical)?;
        let diff = (pairing.value - oracle.value).norm();
        let scale = pairing.value.norm().max(oracle.value.norm());
        let bound = 3.0 * (pairing.error + oracle.error) + 1e-8 * scale;
        if diff > bound && worst.is_none() {
            worst = Some(format!(
                "free-field mismatch on ({fid}, {gid}): |Δ| = {diff:.3e} exceeds bound {bound:.3e}"
            ));
        }
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            fid, gid, pairing.value.re, pairing.value.im, oracle.value.re, oracle.value.im, diff, bound
        );
        rows.push(serde_json::json!({
            "f": fid,
            "g": gid,
            "pairing": [pairing.value.re, pairing.value.im],
            "oracle": [oracle.value.re, oracle.value.im],
            "diff": diff,
            "bound": bound,
        }));
    }
    let csv_path = dir.join("freefield.csv");
    write_text(&csv_path, &csv)?;
    outputs.push(csv_path);
    let json = serde_json::json!({
        "schema": SCHEMA_VERSION,
        "kind": "freefield_comparison",
        "rows": rows,
    });
    let json_path = dir.join("freefield.json");
    write_text(&json_path, &format!("{:#}\n", json))?;
    outputs.push(json_path);
    match worst {
        Some(msg) => Err(RunError::Numerical(msg)),
        None => Ok(()),
    }
}
