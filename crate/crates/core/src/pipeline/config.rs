use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::grabcut::{Connectivity, GrabCutParams};
use crate::{Error, Result};

/// Canonical defaults; [`verify_defaults`] checks `PipelineConfig::default()`
/// against this block.
pub const FROZEN_DEFAULTS: &str = "\
tau = 0.2
epsilon = 0.00001
gamma = 0.0001
num_eigenvectors = 16
beta = 0.5
max_images_for_relevance = 90
grabcut_iterations = 5
grabcut_components = 5
grabcut_gamma = 50
grabcut_connectivity = 8
working_resolution = 256
relevance_source = imagenet-s16
affinity_source = dino-s8
seed = 0
zero_tolerance = 0.00000001
refine = true
export_debug = false
workers = 0
";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Cosine threshold of the affinity graph.
    pub tau: f64,
    /// Affinity below the threshold.
    pub epsilon: f64,
    /// Spectral bias of the seeded cut.
    pub gamma: f64,
    pub num_eigenvectors: usize,
    /// Softmax temperature of the seed.
    pub beta: f64,
    pub max_images_for_relevance: usize,
    pub grabcut_iterations: usize,
    pub grabcut_components: usize,
    pub grabcut_gamma: f64,
    pub grabcut_connectivity: u32,
    /// Square pixel size for refinement and output masks; 0 keeps the
    /// feature grid's native image size.
    pub working_resolution: usize,
    /// Source tags; the ablation runner selects packs by these.
    pub relevance_source: String,
    pub affinity_source: String,
    pub seed: u64,
    pub zero_tolerance: f64,
    /// Run colour-model refinement; otherwise output the upscaled coarse mask.
    pub refine: bool,
    pub export_debug: bool,
    /// Worker threads for the per-image fan-out; 0 picks the core count.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tau: 0.2,
            epsilon: 1e-5,
            gamma: 1e-4,
            num_eigenvectors: 16,
            beta: 0.5,
            max_images_for_relevance: 90,
            grabcut_iterations: 5,
            grabcut_components: 5,
            grabcut_gamma: 50.0,
            grabcut_connectivity: 8,
            working_resolution: 256,
            relevance_source: "imagenet-s16".into(),
            affinity_source: "dino-s8".into(),
            seed: 0,
            zero_tolerance: 1e-8,
            refine: true,
            export_debug: false,
            workers: 0,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

impl PipelineConfig {
    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "tau" => self.tau = parse_value(key, v)?,
            "epsilon" => self.epsilon = parse_value(key, v)?,
            "gamma" => self.gamma = parse_value(key, v)?,
            "num_eigenvectors" => self.num_eigenvectors = parse_value(key, v)?,
            "beta" => self.beta = parse_value(key, v)?,
            "max_images_for_relevance" => self.max_images_for_relevance = parse_value(key, v)?,
            "grabcut_iterations" => self.grabcut_iterations = parse_value(key, v)?,
            "grabcut_components" => self.grabcut_components = parse_value(key, v)?,
            "grabcut_gamma" => self.grabcut_gamma = parse_value(key, v)?,
            "grabcut_connectivity" => self.grabcut_connectivity = parse_value(key, v)?,
            "working_resolution" => self.working_resolution = parse_value(key, v)?,
            "relevance_source" => self.relevance_source = v.to_owned(),
            "affinity_source" => self.affinity_source = v.to_owned(),
            "seed" => self.seed = parse_value(key, v)?,
            "zero_tolerance" => self.zero_tolerance = parse_value(key, v)?,
            "refine" => self.refine = parse_value(key, v)?,
            "export_debug" => self.export_debug = parse_value(key, v)?,
            "workers" => self.workers = parse_value(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Defaults overridden by flat `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if !(-1.0..=1.0).contains(&self.tau) {
            return bad("tau must lie in [-1, 1]");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma must be non-negative");
        }
        if self.num_eigenvectors == 0 {
            return bad("num_eigenvectors must be positive");
        }
        if !(self.beta > 0.0) {
            return bad("beta must be positive");
        }
        if self.max_images_for_relevance == 0 {
            return bad("max_images_for_relevance must be positive");
        }
        if self.grabcut_components == 0 {
            return bad("grabcut_components must be positive");
        }
        if !(self.grabcut_gamma >= 0.0) {
            return bad("grabcut_gamma must be non-negative");
        }
        Connectivity::from_count(self.grabcut_connectivity).map_err(|e| Error::Config(e.to_string()))?;
        if !(self.zero_tolerance >= 0.0) {
            return bad("zero_tolerance must be non-negative");
        }
        Ok(())
    }

    /// Canonical text form; parsing it gives back the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("tau", format!("{:?}", self.tau));
        kv("epsilon", format!("{:?}", self.epsilon));
        kv("gamma", format!("{:?}", self.gamma));
        kv("num_eigenvectors", self.num_eigenvectors.to_string());
        kv("beta", format!("{:?}", self.beta));
        kv("max_images_for_relevance", self.max_images_for_relevance.to_string());
        kv("grabcut_iterations", self.grabcut_iterations.to_string());
        kv("grabcut_components", self.grabcut_components.to_string());
        kv("grabcut_gamma", format!("{:?}", self.grabcut_gamma));
        kv("grabcut_connectivity", self.grabcut_connectivity.to_string());
        kv("working_resolution", self.working_resolution.to_string());
        kv("relevance_source", self.relevance_source.clone());
        kv("affinity_source", self.affinity_source.clone());
        kv("seed", self.seed.to_string());
        kv("zero_tolerance", format!("{:?}", self.zero_tolerance));
        kv("refine", self.refine.to_string());
        kv("export_debug", self.export_debug.to_string());
        kv("workers", self.workers.to_string());
        s
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn grabcut_params(&self) -> Result<GrabCutParams> {
        Ok(GrabCutParams {
            iterations: self.grabcut_iterations,
            components: self.grabcut_components,
            pairwise_gamma: self.grabcut_gamma,
            connectivity: Connectivity::from_count(self.grabcut_connectivity)?,
            seed: self.seed,
        })
    }
}

/// Fails if the compiled-in defaults drift from [`FROZEN_DEFAULTS`].
pub fn verify_defaults() -> Result<()> {
    let frozen = PipelineConfig::parse(FROZEN_DEFAULTS)?;
    let compiled = PipelineConfig::default();
    // Every frozen key must be present, so the block cannot silently omit one.
    let listed = FROZEN_DEFAULTS.lines().filter(|l| !l.trim().is_empty()).count();
    if listed != compiled.to_text().lines().count() {
        return Err(Error::Config("frozen default block does not list every field".into()));
    }
    if frozen != compiled {
        return Err(Error::Config("compiled defaults differ from the frozen block".into()));
    }
    Ok(())
}
