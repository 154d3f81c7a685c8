//! Experiment configuration: JSON file + dotted-path overrides -> validated,
//! fully-resolved config with defaults filled in. The resolved form is echoed
//! next to the outputs and hashed into every artifact.

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug)]
pub enum ConfigError {
    Parse(String),
    Schema { field: String, message: String },
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Parse(m) => write!(f, "ParseError: {m}"),
            ConfigError::Schema { field, message } => {
                write!(f, "SchemaError at '{field}': {message}")
            }
        }
    }
}

fn schema_err<T>(field: &str, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Schema {
        field: field.to_string(),
        message: message.into(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Analyze,
    ReturnWord,
    Spectrum,
    Ek,
    Discrepancy,
    Product,
    Certify,
}

impl Command {
    pub fn parse(text: &str) -> Option<Command> {
        match text {
            "analyze" => Some(Command::Analyze),
            "return-word" => Some(Command::ReturnWord),
            "spectrum" => Some(Command::Spectrum),
            "ek" => Some(Command::Ek),
            "discrepancy" => Some(Command::Discrepancy),
            "product" => Some(Command::Product),
            "certify" => Some(Command::Certify),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum RoofSpec {
    Perron,
    Explicit {
        s: Vec<f64>,
    },
    Random {
        seed: u64,
        #[serde(default = "default_roof_floor")]
        floor: f64,
    },
}

fn default_roof_floor() -> f64 {
    subflow_core::flow::MIN_ROOF
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSpec {
    pub d: Vec<f64>,
    #[serde(default = "default_true")]
    pub project_mean_zero: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartnerSpec {
    CircleRotation { frequency: f64 },
    TorusLinear { f1: f64, f2: f64 },
}

impl Default for PartnerSpec {
    fn default() -> Self {
        // Golden-ratio conjugate: badly approximable, cleanest decay plots.
        PartnerSpec::CircleRotation {
            frequency: 0.618_033_988_749_894_9,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    #[serde(default = "d_c1")]
    pub c1: f64,
    #[serde(default = "d_one")]
    pub c: f64,
    #[serde(default = "d_one")]
    pub c_prime: f64,
    #[serde(default)]
    pub c2: f64,
    #[serde(default = "d_k")]
    pub k: u32,
    #[serde(default = "d_upsilon")]
    pub upsilon: f64,
    #[serde(default)]
    pub beta_tilde: Option<f64>,
    #[serde(default = "d_nmin")]
    pub n_min_factor: f64,
}

fn d_c1() -> f64 {
    0.5
}
fn d_one() -> f64 {
    1.0
}
fn d_k() -> u32 {
    100
}
fn d_upsilon() -> f64 {
    10.0
}
fn d_nmin() -> f64 {
    4.0
}

impl Default for Constants {
    fn default() -> Self {
        serde_json::from_value(Value::Object(Default::default())).unwrap()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OmegaGrid {
    Values { values: Vec<f64> },
    Linear { min: f64, max: f64, count: usize },
}

impl Default for OmegaGrid {
    fn default() -> Self {
        OmegaGrid::Values {
            values: vec![1.0, std::f64::consts::SQRT_2, (1.0 + 5f64.sqrt()) / 2.0],
        }
    }
}

impl OmegaGrid {
    pub fn resolve(&self) -> Vec<f64> {
        match self {
            OmegaGrid::Values { values } => values.clone(),
            OmegaGrid::Linear { min, max, count } => {
                let n = (*count).max(2);
                (0..n)
                    .map(|i| min + (max - min) * i as f64 / (n - 1) as f64)
                    .collect()
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RGrid {
    ThetaPow {
        theta_pow: ThetaPow,
    },
    Values {
        values: Vec<f64>,
    },
    Log {
        min: f64,
        max: f64,
        count: usize,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaPow {
    pub from: f64,
    pub to: f64,
    #[serde(default = "d_per_power")]
    pub per_power: u32,
}

fn d_per_power() -> u32 {
    2
}

impl Default for RGrid {
    fn default() -> Self {
        RGrid::ThetaPow {
            theta_pow: ThetaPow {
                from: 4.0,
                to: 12.0,
                per_power: 2,
            },
        }
    }
}

impl RGrid {
    /// Resolves against the Perron root (needed for theta-power ladders).
    pub fn resolve(&self, theta: f64) -> Vec<f64> {
        match self {
            RGrid::Values { values } => values.clone(),
            RGrid::Log { min, max, count } => {
                let n = (*count).max(2);
                (0..n)
                    .map(|i| min * (max / min).powf(i as f64 / (n - 1) as f64))
                    .collect()
            }
            RGrid::ThetaPow { theta_pow } => {
                let steps =
                    ((theta_pow.to - theta_pow.from) * theta_pow.per_power as f64).round() as u32;
                (0..=steps)
                    .map(|i| {
                        theta
                            .powf(theta_pow.from + i as f64 / theta_pow.per_power as f64)
                    })
                    .collect()
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TGrid {
    #[serde(default = "d_tmax")]
    pub max: f64,
    #[serde(default = "d_tstep")]
    pub step: f64,
    /// Averaging time T; defaults to 10 * max.
    #[serde(default)]
    pub window: Option<f64>,
}

fn d_tmax() -> f64 {
    2000.0
}
fn d_tstep() -> f64 {
    0.05
}

impl Default for TGrid {
    fn default() -> Self {
        TGrid {
            max: d_tmax(),
            step: d_tstep(),
            window: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NGrid {
    #[serde(default = "d_nmax")]
    pub max: usize,
}

fn d_nmax() -> usize {
    1_000_000
}

impl Default for NGrid {
    fn default() -> Self {
        NGrid { max: d_nmax() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EkGrid {
    #[serde(default = "d_ekn")]
    pub n: usize,
    #[serde(default = "d_ekb")]
    pub b: f64,
    /// Threshold for the bad-count; defaults to the derived rho.
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default = "d_klist")]
    pub k_list: Vec<u32>,
    #[serde(default = "d_ulist")]
    pub upsilon_list: Vec<f64>,
    #[serde(default = "d_coverk")]
    pub cover_k: u32,
    #[serde(default = "d_one")]
    pub cover_eta: f64,
}

fn d_ekn() -> usize {
    30
}
fn d_ekb() -> f64 {
    4.0
}
fn d_klist() -> Vec<u32> {
    vec![10, 100, 1000, 10_000, 100_000]
}
fn d_ulist() -> Vec<f64> {
    vec![100.0, 1000.0]
}
fn d_coverk() -> u32 {
    5
}

impl Default for EkGrid {
    fn default() -> Self {
        serde_json::from_value(Value::Object(Default::default())).unwrap()
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    #[serde(default)]
    pub omega: OmegaGrid,
    #[serde(default)]
    pub r: RGrid,
    #[serde(default)]
    pub t: TGrid,
    #[serde(default)]
    pub n: NGrid,
    #[serde(default)]
    pub ek: EkGrid,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRange {
    #[serde(default)]
    pub r_min: Option<f64>,
    #[serde(default)]
    pub r_max: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    #[serde(default)]
    pub master: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    /// Text form ("a->abbb; b->a") or {"rules": {...}} object.
    pub substitution: Value,
    #[serde(default = "default_roof")]
    pub roof: RoofSpec,
    /// Optional cylindrical-function JSON; the built-in mean-zero profile
    /// derived from the roof is used when absent.
    #[serde(default)]
    pub function: Option<Value>,
    #[serde(default)]
    pub step: Option<StepSpec>,
    #[serde(default)]
    pub partner: PartnerSpec,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub fit: FitRange,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_sup_samples")]
    pub sup_samples: usize,
    #[serde(default = "d_outdir")]
    pub output_dir: String,
    #[serde(default = "d_ellmax")]
    pub ell_max: u32,
    #[serde(default = "d_cap")]
    pub cap: u64,
    #[serde(default = "d_depth")]
    pub complexity_depth: usize,
}

fn default_roof() -> RoofSpec {
    RoofSpec::Perron
}
fn d_samples() -> usize {
    4
}
fn d_sup_samples() -> usize {
    64
}
fn d_outdir() -> String {
    "out".to_string()
}
fn d_ellmax() -> u32 {
    8
}
fn d_cap() -> u64 {
    subflow_core::substitution::DEFAULT_LENGTH_CAP
}
fn d_depth() -> usize {
    64
}

impl ExperimentConfig {
    /// Loads a JSON config, applies dotted-path overrides
    /// (`--grids.omega.max=5`), injects the CLI command when given, fills
    /// defaults and validates ranges.
    pub fn load(
        path: &str,
        cli_command: Option<Command>,
        overrides: &[(String, String)],
    ) -> Result<ExperimentConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Parse(format!("cannot read '{path}': {e}")))?;
        Self::from_text(&text, cli_command, overrides)
    }

    pub fn from_text(
        text: &str,
        cli_command: Option<Command>,
        overrides: &[(String, String)],
    ) -> Result<ExperimentConfig, ConfigError> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| {
            ConfigError::Parse(format!(
                "invalid JSON at line {}, column {}: {e}",
                e.line(),
                e.column()
            ))
        })?;
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        if let Some(cmd) = cli_command {
            value["command"] = serde_json::to_value(cmd).unwrap();
        }
        if value.get("command").is_none() {
            return schema_err("command", "missing (pass a subcommand or set it in the config)");
        }
        let cfg: ExperimentConfig =
            serde_json::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if let RoofSpec::Explicit { s } = &self.roof {
            if s.len() < 2 {
                return schema_err("roof.s", "needs at least two entries");
            }
            let sum: f64 = s.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return schema_err("roof.s", format!("entries sum to {sum}, not 1"));
            }
            if s.iter().any(|&x| x < subflow_core::flow::MIN_ROOF) {
                return schema_err("roof.s", "entries must be strictly positive (>= 1e-6)");
            }
        }
        if let RoofSpec::Random { floor, .. } = &self.roof {
            if !(*floor >= subflow_core::flow::MIN_ROOF && *floor < 0.5) {
                return schema_err("roof.floor", "must lie in [1e-6, 0.5)");
            }
        }
        let c = &self.constants;
        if !(c.c1 > 0.0 && c.c1 < 1.0) {
            return schema_err("constants.c1", format!("{} not in (0, 1)", c.c1));
        }
        if c.c <= 0.0 || c.c_prime <= 0.0 || c.c2 < 0.0 {
            return schema_err("constants", "c, c_prime must be > 0 and c2 >= 0");
        }
        if c.k < 1 {
            return schema_err("constants.k", "must be >= 1");
        }
        if c.upsilon <= 0.0 {
            return schema_err("constants.upsilon", "must be > 0");
        }
        if let Some(bt) = c.beta_tilde {
            if !(bt > 0.0 && bt < 1.0) {
                return schema_err("constants.beta_tilde", "must lie in (0, 1)");
            }
        }
        if c.n_min_factor <= 0.0 {
            return schema_err("constants.n_min_factor", "must be > 0");
        }
        if self.grids.t.step <= 0.0 || self.grids.t.max < self.grids.t.step {
            return schema_err("grids.t", "need 0 < step <= max");
        }
        if let Some(w) = self.grids.t.window {
            if w < 10.0 * self.grids.t.max {
                return schema_err("grids.t.window", "must be >= 10 * t.max");
            }
        }
        if self.samples == 0 || self.sup_samples == 0 {
            return schema_err("samples", "must be >= 1");
        }
        if self.grids.ek.b < 2.0 {
            return schema_err("grids.ek.b", "must be >= 2");
        }
        if !(self.grids.ek.cover_eta > 0.0 && self.grids.ek.cover_eta <= 1.0) {
            return schema_err("grids.ek.cover_eta", "must lie in (0, 1]");
        }
        if self.grids.omega.resolve().is_empty() {
            return schema_err("grids.omega", "must be non-empty");
        }
        Ok(())
    }

    pub fn resolved_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// FNV-1a 64 over the canonical (sorted-key) JSON encoding.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(&self.resolved_json()).expect("serializable");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in canonical.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

fn apply_override(root: &mut Value, key: &str, raw: &str) -> Result<(), ConfigError> {
    let parsed: Value = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));
    let mut cursor = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return schema_err(key, "empty path segment");
        }
        if !cursor.is_object() {
            return schema_err(key, "path traverses a non-object value");
        }
        let map = cursor.as_object_mut().unwrap();
        if i + 1 == parts.len() {
            map.insert(part.to_string(), parsed);
            return Ok(());
        }
        cursor = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}
