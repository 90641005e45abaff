//! TOML configuration with full documented defaults.
//!
//! A missing file section falls back to the defaults below, so a minimal
//! config containing only overrides is valid. Unknown keys are rejected.
//! Hard contract violations are errors; qualitative parameter-ratio
//! checks (cable vs overhead constants) only warn, and the warnings are
//! recorded in the run manifest.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::artifacts::sha256_hex;
use crate::error::{Error, Result};
use crate::eval::SplitPolicy;
use crate::mlp::Algorithm;
use crate::model::ModelRecipe;
use crate::raster::ViewWindow;
use crate::regression::gpr::{GprHyper, GprKernel};
use crate::regression::linear::LinearVariant;
use crate::relay::RelaySettings;
use crate::simulator::{LineKind, LineSection, MixedLineSpec, SequenceParams, SourceSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Artifact root; the CLI `--out` flag overrides it.
    pub out_dir: String,
    /// Master seed; every stage derives its own stream from it.
    pub seed: u64,
    pub line: LineConfig,
    pub relay: RelayConfig,
    pub render: RenderConfig,
    pub glcm: GlcmConfig,
    pub split: SplitConfig,
    pub datasets: Vec<DatasetConfig>,
    pub models: Vec<ModelEntry>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            out_dir: "out".into(),
            seed: 1,
            line: LineConfig::default(),
            relay: RelayConfig::default(),
            render: RenderConfig::default(),
            glcm: GlcmConfig::default(),
            split: SplitConfig::default(),
            datasets: default_datasets(),
            models: default_models(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LineConfig {
    pub nominal_kv: f64,
    pub frequency_hz: f64,
    pub load_mw: f64,
    pub sections: Vec<SectionConfig>,
    pub source_s: SourceConfig,
    pub source_r: Option<SourceConfig>,
}

impl Default for LineConfig {
    fn default() -> Self {
        LineConfig {
            nominal_kv: 154.0,
            frequency_hz: 50.0,
            load_mw: 20.0,
            sections: vec![
                SectionConfig::overhead(200.0),
                SectionConfig::cable(10.0),
                SectionConfig::overhead(50.0),
            ],
            source_s: SourceConfig {
                emf_kv: 154.0,
                angle_deg: 0.0,
                r1: 0.5,
                x1: 5.0,
                r0: 1.0,
                x0: 10.0,
            },
            source_r: Some(SourceConfig {
                emf_kv: 0.98 * 154.0,
                angle_deg: -5.0,
                r1: 0.5,
                x1: 5.0,
                r0: 1.0,
                x0: 10.0,
            }),
        }
    }
}

/// Per-km sequence constants of one section. Capacitances are nF/km.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionConfig {
    pub kind: String,
    pub length_km: f64,
    pub r1: f64,
    pub x1: f64,
    pub r0: f64,
    pub x0: f64,
    pub c1_nf: f64,
    pub c0_nf: f64,
}

impl SectionConfig {
    fn overhead(length_km: f64) -> Self {
        let p = SequenceParams::overhead_default();
        SectionConfig {
            kind: "ohl".into(),
            length_km,
            r1: p.r1,
            x1: p.x1,
            r0: p.r0,
            x0: p.x0,
            c1_nf: p.c1,
            c0_nf: p.c0,
        }
    }

    fn cable(length_km: f64) -> Self {
        let p = SequenceParams::cable_default();
        SectionConfig {
            kind: "ugc".into(),
            length_km,
            r1: p.r1,
            x1: p.x1,
            r0: p.r0,
            x0: p.x0,
            c1_nf: p.c1,
            c0_nf: p.c0,
        }
    }

    fn line_kind(&self) -> Result<LineKind> {
        match self.kind.as_str() {
            "ohl" => Ok(LineKind::Overhead),
            "ugc" => Ok(LineKind::Cable),
            other => Err(Error::Config(format!(
                "section kind must be \"ohl\" or \"ugc\", got {other:?}"
            ))),
        }
    }

    fn to_section(&self) -> Result<LineSection> {
        Ok(LineSection {
            kind: self.line_kind()?,
            length_km: self.length_km,
            params: SequenceParams {
                r1: self.r1,
                x1: self.x1,
                r0: self.r0,
                x0: self.x0,
                c1: self.c1_nf,
                c0: self.c0_nf,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// Line-to-line EMF magnitude in kV.
    pub emf_kv: f64,
    pub angle_deg: f64,
    pub r1: f64,
    pub x1: f64,
    pub r0: f64,
    pub x0: f64,
}

impl SourceConfig {
    fn to_source(&self) -> SourceSpec {
        SourceSpec {
            emf_kv: Complex64::from_polar(self.emf_kv, self.angle_deg.to_radians()),
            z1: Complex64::new(self.r1, self.x1),
            z0: Complex64::new(self.r0, self.x0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelayConfig {
    pub samples_per_cycle: usize,
    pub prefault_cycles: usize,
    pub fault_cycles: usize,
    pub zone1_reach: f64,
    pub zone2_reach: f64,
}

impl Default for RelayConfig {
    fn default() -> Self {
        RelayConfig {
            samples_per_cycle: 20,
            prefault_cycles: 2,
            fault_cycles: 4,
            zone1_reach: 0.8,
            zone2_reach: 1.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            r_min: -50.0,
            r_max: 250.0,
            x_min: -50.0,
            x_max: 250.0,
            width: 256,
            height: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlcmConfig {
    pub levels: usize,
    pub symmetric: bool,
    /// (row, col) co-occurrence offsets in pixels.
    pub offsets: Vec<[i32; 2]>,
}

impl Default for GlcmConfig {
    fn default() -> Self {
        GlcmConfig {
            levels: 8,
            symmetric: true,
            offsets: vec![[0, 1], [-1, 1], [-1, 0], [-1, -1]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    /// "systematic" or "seeded-random".
    pub policy: String,
    pub test_every: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            policy: "systematic".into(),
            test_every: 5,
        }
    }
}

impl SplitConfig {
    pub fn policy(&self) -> Result<SplitPolicy> {
        match self.policy.as_str() {
            "systematic" => Ok(SplitPolicy::Systematic),
            "seeded-random" => Ok(SplitPolicy::SeededRandom),
            other => Err(Error::Config(format!(
                "split policy must be \"systematic\" or \"seeded-random\", got {other:?}"
            ))),
        }
    }
}

/// R-X extent override for one dataset's images. Every image of a
/// dataset shares one frame so its texture features stay comparable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl WindowConfig {
    pub fn to_view(self) -> ViewWindow {
        ViewWindow {
            r_min: self.r_min,
            r_max: self.r_max,
            x_min: self.x_min,
            x_max: self.x_max,
        }
    }
}

/// One scenario grid: `count` faults on `section` at
/// `start_km + k*step_km`, constant fault impedance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub section: usize,
    pub start_km: f64,
    pub step_km: f64,
    pub count: usize,
    pub zf_ohm: f64,
    /// View window for this dataset's images; the global render window
    /// applies when absent. A short cable's impedance span covers only a
    /// few pixels of the full-line frame, so cable datasets need a
    /// zoomed frame to remain locatable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowConfig>,
}

fn default_datasets() -> Vec<DatasetConfig> {
    vec![
        DatasetConfig {
            name: "ohl".into(),
            section: 0,
            start_km: 5.0,
            step_km: 5.0,
            count: 40,
            zf_ohm: 1.0,
            window: None,
        },
        DatasetConfig {
            name: "ugc".into(),
            section: 1,
            start_km: 0.2,
            step_km: 0.2,
            count: 50,
            zf_ohm: 1.0,
            window: Some(WindowConfig {
                r_min: 12.0,
                r_max: 15.0,
                x_min: 80.0,
                x_max: 86.0,
            }),
        },
    ]
}

/// One roster entry. `kind` selects the family; only that family's
/// hyperparameter keys may be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub name: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cascade: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub goal_mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_leaf: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimize: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl ModelEntry {
    fn bare(name: &str, kind: &str) -> Self {
        ModelEntry {
            name: name.into(),
            kind: kind.into(),
            hidden: None,
            cascade: None,
            algorithm: None,
            max_epochs: None,
            goal_mse: None,
            grad_tol: None,
            variant: None,
            min_leaf: None,
            kernel: None,
            optimize: None,
            sigma_f: None,
            length: None,
            sigma_n: None,
            alpha: None,
        }
    }

    fn mlp(name: &str, algorithm: &str, cascade: bool) -> Self {
        let mut e = Self::bare(name, "mlp");
        e.algorithm = Some(algorithm.into());
        e.cascade = Some(cascade);
        e
    }

    fn linear(name: &str, variant: &str) -> Self {
        let mut e = Self::bare(name, "linear");
        e.variant = Some(variant.into());
        e
    }

    fn tree(name: &str, min_leaf: usize) -> Self {
        let mut e = Self::bare(name, "tree");
        e.min_leaf = Some(min_leaf);
        e
    }

    fn gpr(name: &str, kernel: &str) -> Self {
        let mut e = Self::bare(name, "gpr");
        e.kernel = Some(kernel.into());
        e
    }

    /// Reject hyperparameters that belong to a different family.
    fn check_foreign_fields(&self) -> Result<()> {
        let fields: [(&str, bool); 15] = [
            ("hidden", self.hidden.is_some()),
            ("cascade", self.cascade.is_some()),
            ("algorithm", self.algorithm.is_some()),
            ("max_epochs", self.max_epochs.is_some()),
            ("goal_mse", self.goal_mse.is_some()),
            ("grad_tol", self.grad_tol.is_some()),
            ("variant", self.variant.is_some()),
            ("min_leaf", self.min_leaf.is_some()),
            ("kernel", self.kernel.is_some()),
            ("optimize", self.optimize.is_some()),
            ("sigma_f", self.sigma_f.is_some()),
            ("length", self.length.is_some()),
            ("sigma_n", self.sigma_n.is_some()),
            ("alpha", self.alpha.is_some()),
            ("", false),
        ];
        let allowed: &[&str] = match self.kind.as_str() {
            "mlp" => &[
                "hidden",
                "cascade",
                "algorithm",
                "max_epochs",
                "goal_mse",
                "grad_tol",
            ],
            "linear" => &["variant"],
            "tree" => &["min_leaf"],
            "gpr" => &[
                "kernel", "optimize", "sigma_f", "length", "sigma_n", "alpha",
            ],
            other => {
                return Err(Error::Config(format!(
                    "model {:?}: unknown kind {other:?} (expected mlp, linear, tree or gpr)",
                    self.name
                )))
            }
        };
        for (field, present) in fields {
            if present && !allowed.contains(&field) {
                return Err(Error::Config(format!(
                    "model {:?}: field {field:?} does not apply to kind {:?}",
                    self.name, self.kind
                )));
            }
        }
        Ok(())
    }

    pub fn to_recipe(&self) -> Result<ModelRecipe> {
        self.check_foreign_fields()?;
        match self.kind.as_str() {
            "mlp" => {
                let algorithm = match self.algorithm.as_deref().unwrap_or("lm") {
                    "lm" => Algorithm::Lm,
                    "scg" => Algorithm::Scg,
                    "gdx" => Algorithm::Gdx,
                    other => {
                        return Err(Error::Config(format!(
                            "model {:?}: unknown algorithm {other:?} (expected lm, scg or gdx)",
                            self.name
                        )))
                    }
                };
                Ok(ModelRecipe::Mlp {
                    hidden: self.hidden.unwrap_or(10),
                    cascade: self.cascade.unwrap_or(false),
                    algorithm,
                    max_epochs: self.max_epochs.unwrap_or(1000),
                    goal_mse: self.goal_mse.unwrap_or(0.0),
                    grad_tol: self.grad_tol.unwrap_or(1e-7),
                })
            }
            "linear" => {
                let variant = match self.variant.as_deref().unwrap_or("ols") {
                    "ols" => LinearVariant::Ols,
                    "interactions" => LinearVariant::Interactions,
                    "robust" => LinearVariant::Robust,
                    "stepwise" => LinearVariant::Stepwise,
                    other => {
                        return Err(Error::Config(format!(
                            "model {:?}: unknown variant {other:?} \
                             (expected ols, interactions, robust or stepwise)",
                            self.name
                        )))
                    }
                };
                Ok(ModelRecipe::Linear { variant })
            }
            "tree" => Ok(ModelRecipe::Tree {
                min_leaf: self.min_leaf.unwrap_or(12),
            }),
            "gpr" => {
                let kernel = match self.kernel.as_deref().unwrap_or("se") {
                    "se" => GprKernel::SquaredExponential,
                    "matern52" => GprKernel::Matern52,
                    "exp" => GprKernel::Exponential,
                    "rq" => GprKernel::RationalQuadratic,
                    other => {
                        return Err(Error::Config(format!(
                            "model {:?}: unknown kernel {other:?} \
                             (expected se, matern52, exp or rq)",
                            self.name
                        )))
                    }
                };
                let defaults = GprHyper::default();
                Ok(ModelRecipe::Gpr {
                    kernel,
                    hyper: GprHyper {
                        sigma_f: self.sigma_f.unwrap_or(defaults.sigma_f),
                        length: self.length.unwrap_or(defaults.length),
                        sigma_n: self.sigma_n.unwrap_or(defaults.sigma_n),
                        alpha: self.alpha.unwrap_or(defaults.alpha),
                    },
                    optimize: self.optimize.unwrap_or(true),
                })
            }
            other => Err(Error::Config(format!(
                "model {:?}: unknown kind {other:?}",
                self.name
            ))),
        }
    }
}

/// The comparison roster: three trainers times two topologies, the four
/// linear variants, three tree granularities and four GPR kernels.
fn default_models() -> Vec<ModelEntry> {
    vec![
        ModelEntry::mlp("ff-lm", "lm", false),
        ModelEntry::mlp("ff-scg", "scg", false),
        ModelEntry::mlp("ff-gdx", "gdx", false),
        ModelEntry::mlp("cf-lm", "lm", true),
        ModelEntry::mlp("cf-scg", "scg", true),
        ModelEntry::mlp("cf-gdx", "gdx", true),
        ModelEntry::linear("linear", "ols"),
        ModelEntry::linear("interactions", "interactions"),
        ModelEntry::linear("robust", "robust"),
        ModelEntry::linear("stepwise", "stepwise"),
        ModelEntry::tree("tree-fine", 4),
        ModelEntry::tree("tree-medium", 12),
        ModelEntry::tree("tree-coarse", 36),
        ModelEntry::gpr("gpr-se", "se"),
        ModelEntry::gpr("gpr-matern52", "matern52"),
        ModelEntry::gpr("gpr-exp", "exp"),
        ModelEntry::gpr("gpr-rq", "rq"),
    ]
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_')
}

impl PipelineConfig {
    pub fn line_spec(&self) -> Result<MixedLineSpec> {
        let sections = self
            .line
            .sections
            .iter()
            .map(SectionConfig::to_section)
            .collect::<Result<Vec<_>>>()?;
        Ok(MixedLineSpec {
            nominal_kv: self.line.nominal_kv,
            frequency_hz: self.line.frequency_hz,
            sections,
            source_s: self.line.source_s.to_source(),
            source_r: self.line.source_r.as_ref().map(SourceConfig::to_source),
            load_mw: self.line.load_mw,
        })
    }

    pub fn relay_settings(&self, line: &MixedLineSpec) -> Result<RelaySettings> {
        let mut settings = RelaySettings::from_line(line)?;
        settings.samples_per_cycle = self.relay.samples_per_cycle;
        settings.prefault_cycles = self.relay.prefault_cycles;
        settings.fault_cycles = self.relay.fault_cycles;
        settings.zone1_reach = self.relay.zone1_reach;
        settings.zone2_reach = self.relay.zone2_reach;
        Ok(settings)
    }

    pub fn view_window(&self) -> ViewWindow {
        ViewWindow {
            r_min: self.render.r_min,
            r_max: self.render.r_max,
            x_min: self.render.x_min,
            x_max: self.render.x_max,
        }
    }

    /// The frame a dataset's images are rendered in.
    pub fn dataset_window(&self, ds: &DatasetConfig) -> ViewWindow {
        ds.window.map(WindowConfig::to_view).unwrap_or_else(|| self.view_window())
    }

    pub fn glcm_offsets(&self) -> Vec<(i32, i32)> {
        self.glcm.offsets.iter().map(|o| (o[0], o[1])).collect()
    }

    pub fn recipes(&self) -> Result<Vec<(String, ModelRecipe)>> {
        self.models
            .iter()
            .map(|m| Ok((m.name.clone(), m.to_recipe()?)))
            .collect()
    }

    /// Effective-config fingerprint: hash of the canonical serialization,
    /// so CLI overrides are captured too.
    pub fn content_hash(&self) -> Result<String> {
        // The output location does not influence artifact bytes, so it must
        // not influence the run identity either.
        let mut keyed = self.clone();
        keyed.out_dir = String::new();
        let text = toml::to_string(&keyed)
            .map_err(|e| Error::Config(format!("config not serializable: {e}")))?;
        Ok(sha256_hex(text.as_bytes()))
    }

    /// Hard validation plus soft qualitative checks. Returns the warning
    /// list (empty when everything also satisfies the soft checks).
    pub fn validate(&self) -> Result<Vec<String>> {
        let cfg_err = |why: String| Err(Error::Config(why));

        if self.out_dir.is_empty() {
            return cfg_err("out_dir must not be empty".into());
        }

        let line = self.line_spec()?;
        line.validate().map_err(|e| Error::Config(e.to_string()))?;

        let r = &self.relay;
        if r.samples_per_cycle < 2 || r.prefault_cycles == 0 || r.fault_cycles == 0 {
            return cfg_err(
                "relay needs samples_per_cycle >= 2 and at least one cycle on each side".into(),
            );
        }
        if !(r.zone1_reach > 0.0 && r.zone2_reach > 0.0) {
            return cfg_err("relay zone reaches must be positive".into());
        }

        self.view_window()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.render.width < 2 || self.render.height < 2 {
            return cfg_err(format!(
                "render size {}x{} is too small (need at least 2x2)",
                self.render.width, self.render.height
            ));
        }

        let g = &self.glcm;
        if !(2..=256).contains(&g.levels) {
            return cfg_err(format!("glcm levels must be in 2..=256, got {}", g.levels));
        }
        if g.offsets.is_empty() {
            return cfg_err("glcm needs at least one offset".into());
        }
        for o in &g.offsets {
            if o == &[0, 0] {
                return cfg_err("glcm offset (0, 0) pairs every pixel with itself".into());
            }
            if o[0].unsigned_abs() as usize >= self.render.height
                || o[1].unsigned_abs() as usize >= self.render.width
            {
                return cfg_err(format!(
                    "glcm offset ({}, {}) does not fit inside a {}x{} image",
                    o[0], o[1], self.render.width, self.render.height
                ));
            }
        }

        self.split.policy()?;
        if self.split.test_every < 2 {
            return cfg_err(format!(
                "split test_every must be at least 2, got {}",
                self.split.test_every
            ));
        }

        if self.datasets.is_empty() {
            return cfg_err("at least one dataset is required".into());
        }
        let mut names: Vec<&str> = Vec::new();
        for d in &self.datasets {
            if !valid_name(&d.name) {
                return cfg_err(format!(
                    "dataset name {:?} must be lowercase [a-z0-9-_]",
                    d.name
                ));
            }
            if names.contains(&d.name.as_str()) {
                return cfg_err(format!("duplicate dataset name {:?}", d.name));
            }
            names.push(&d.name);
            if d.count < self.split.test_every {
                return cfg_err(format!(
                    "dataset {:?}: {} scenarios cannot fill a 1-in-{} split",
                    d.name, d.count, self.split.test_every
                ));
            }
            if let Some(w) = &d.window {
                w.to_view()
                    .validate()
                    .map_err(|e| Error::Config(format!("dataset {:?}: {e}", d.name)))?;
            }
            crate::simulator::scenario_grid(
                &line, d.section, d.start_km, d.step_km, d.count, d.zf_ohm,
            )
            .map_err(|e| Error::Config(format!("dataset {:?}: {e}", d.name)))?;
        }

        if self.models.is_empty() {
            return cfg_err("at least one model is required".into());
        }
        let mut names: Vec<&str> = Vec::new();
        for m in &self.models {
            if !valid_name(&m.name) {
                return cfg_err(format!(
                    "model name {:?} must be lowercase [a-z0-9-_]",
                    m.name
                ));
            }
            if names.contains(&m.name.as_str()) {
                return cfg_err(format!("duplicate model name {:?}", m.name));
            }
            names.push(&m.name);
            m.to_recipe()?;
        }

        Ok(self.ratio_warnings())
    }

    /// Qualitative cable-vs-overhead constants: cable series reactance
    /// 50-70% of overhead, cable capacitance 30-40 times overhead.
    fn ratio_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        let overheads: Vec<&SectionConfig> = self
            .line
            .sections
            .iter()
            .filter(|s| s.kind == "ohl")
            .collect();
        let cables: Vec<&SectionConfig> = self
            .line
            .sections
            .iter()
            .filter(|s| s.kind == "ugc")
            .collect();
        for (i, c) in cables.iter().enumerate() {
            for (j, o) in overheads.iter().enumerate() {
                if o.x1 > 0.0 {
                    let rx = c.x1 / o.x1;
                    if !(0.50..=0.70).contains(&rx) {
                        warnings.push(format!(
                            "cable section {i} vs overhead section {j}: x1 ratio {rx:.3} \
                             outside the expected 0.50..0.70 band"
                        ));
                    }
                }
                if o.c1_nf > 0.0 {
                    let rc = c.c1_nf / o.c1_nf;
                    if !(30.0..=40.0).contains(&rc) {
                        warnings.push(format!(
                            "cable section {i} vs overhead section {j}: c1 ratio {rc:.1} \
                             outside the expected 30..40 band"
                        ));
                    }
                }
            }
        }
        warnings
    }
}

/// Parsed, defaulted and validated configuration plus its side products.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub warnings: Vec<String>,
}

pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

pub fn load_config(path: &std::path::Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let config = parse_config(&text)?;
    let warnings = config.validate()?;
    Ok(LoadedConfig { config, warnings })
}
