//! Run configuration: one TOML document describing the dataset, workload,
//! estimator list and experiment parameters. The resolved config (with the
//! master seed filled in) is echoed into every report for provenance.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use celab_core::estimator::derive_seed;
use celab_core::registry::EstimatorSpec;
use celab_core::rules::{RuleCheckConfig, SeedMode};
use celab_core::synth::SynthConfig;
use celab_core::table::{read_schema, Table};
use celab_core::workload::WorkloadConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Master seed; mandatory (either here or via --seed).
    pub seed: Option<u64>,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub workload: WorkloadSpec,
    #[serde(default)]
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default)]
    pub dynamic: Option<DynamicSpec>,
    #[serde(default)]
    pub rules: Option<RulesSpec>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DatasetSpec {
    /// Display name used in report rows; defaults to the CSV stem or "synth".
    pub name: Option<String>,
    pub csv: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub synth: Option<SynthSpec>,
}

/// Synthetic dataset parameters; the seed falls back to a value derived from
/// the master seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub skew: f64,
    pub correlation: f64,
    pub domain_size: usize,
    pub rows: usize,
    pub seed: Option<u64>,
}

impl SynthSpec {
    pub fn resolve(&self, master_seed: u64) -> SynthConfig {
        SynthConfig {
            skew: self.skew,
            correlation: self.correlation,
            domain_size: self.domain_size,
            rows: self.rows,
            seed: self
                .seed
                .unwrap_or_else(|| derive_seed(master_seed, 0xDA7A)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub n_queries: usize,
    pub seed: Option<u64>,
    pub p_center_data: Option<f64>,
    pub p_width_uniform: Option<f64>,
    pub lambda_factor: Option<f64>,
    /// Load queries from a JSON-lines file instead of generating them.
    pub file: Option<PathBuf>,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            n_queries: 1000,
            seed: None,
            p_center_data: None,
            p_width_uniform: None,
            lambda_factor: None,
            file: None,
        }
    }
}

impl WorkloadSpec {
    pub fn resolve(&self, master_seed: u64) -> WorkloadConfig {
        let mut cfg = WorkloadConfig::new(
            self.n_queries,
            self.seed.unwrap_or_else(|| derive_seed(master_seed, 0x301)),
        );
        if let Some(p) = self.p_center_data {
            cfg.p_center_data = p;
        }
        if let Some(p) = self.p_width_uniform {
            cfg.p_width_uniform = p;
        }
        if let Some(l) = self.lambda_factor {
            cfg.lambda_factor = l;
        }
        cfg
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynamicSpec {
    /// Timeline lengths T to sweep.
    pub t_values: Vec<f64>,
    #[serde(default = "default_append_fraction")]
    pub append_fraction: f64,
    /// Queries in the dynamic workload (defaults to workload.n_queries).
    pub n_queries: Option<usize>,
    /// Mock clock for deterministic routing.
    pub t_u_override: Option<f64>,
    /// Extra epochs for the autoregressive model's update, sweepable.
    pub made_update_epochs: Option<usize>,
}

fn default_append_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RulesSpec {
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default = "default_repeats")]
    pub stability_repeats: usize,
    #[serde(default = "default_seed_mode")]
    pub seed_mode: SeedMode,
}

fn default_probes() -> usize {
    10_000
}
fn default_repeats() -> usize {
    2_000
}
fn default_seed_mode() -> SeedMode {
    SeedMode::Paired
}

impl RulesSpec {
    pub fn resolve(&self, master_seed: u64) -> RuleCheckConfig {
        RuleCheckConfig {
            probes: self.probes,
            stability_repeats: self.stability_repeats,
            seed: derive_seed(master_seed, 0x201E5),
            seed_mode: self.seed_mode,
            ..RuleCheckConfig::default()
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path, seed_flag: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(s) = seed_flag {
            cfg.seed = Some(s);
        }
        if cfg.seed.is_none() {
            bail!("a master seed is required (set `seed` in the config or pass --seed)");
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn master_seed(&self) -> u64 {
        self.seed.expect("validated at load")
    }

    fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        match (&d.csv, &d.synth) {
            (None, None) => bail!("dataset needs either csv+schema paths or a synth block"),
            (Some(_), Some(_)) => bail!("dataset cannot be both csv and synth"),
            (Some(csv), None) => {
                if !csv.exists() {
                    bail!("dataset csv {} does not exist", csv.display());
                }
                let schema = d
                    .schema
                    .as_ref()
                    .context("csv datasets need a schema sidecar path")?;
                if !schema.exists() {
                    bail!("schema sidecar {} does not exist", schema.display());
                }
            }
            (None, Some(_)) => {}
        }
        if let Some(file) = &self.workload.file {
            if !file.exists() {
                bail!("workload file {} does not exist", file.display());
            }
        }
        Ok(())
    }

    /// Loads or generates the table this run operates on.
    pub fn load_table(&self) -> Result<Table> {
        let d = &self.dataset;
        if let Some(synth) = &d.synth {
            let cfg = synth.resolve(self.master_seed());
            return Ok(celab_core::synth::gen_synth(&cfg)?);
        }
        let csv = d.csv.as_ref().expect("validated");
        let schema = read_schema(d.schema.as_ref().expect("validated"))?;
        Ok(Table::ingest_csv(csv, schema)?)
    }

    pub fn dataset_name(&self) -> String {
        if let Some(name) = &self.dataset.name {
            return name.clone();
        }
        match &self.dataset.csv {
            Some(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into()),
            None => "synth".into(),
        }
    }

    /// The provenance echo embedded in every report.
    pub fn provenance(&self) -> serde_json::Value {
        serde_json::json!({
            "seed": self.master_seed(),
            "config": self,
        })
    }
}
