//! Stage orchestration over a persistent artifact tree.
//!
//! Every stage reads its inputs from disk and writes its outputs back,
//! so any suffix of the pipeline can be re-run against persisted
//! upstream artifacts. Layout under the output root:
//!
//! ```text
//! scenarios.csv            simulate
//! loci.csv                 simulate
//! images/<scenario>.pgm    render
//! features.csv             features
//! models/<dataset>/<model>.txt  train
//! report.json, table_rmse.csv, table_best.csv,
//! plot_actual_vs_pred.csv  eval
//! manifest.json            written after every run
//! ```
//!
//! Scenario ids are `<dataset>-<NNN>` (1-based, zero padded), which keys
//! every downstream artifact back to its dataset.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::artifacts::{
    read_features, read_loci, read_scenarios, sha256_file, sha256_hex, write_best_table,
    write_features, write_json, write_loci, write_plot_csv, write_rmse_table, write_scenarios,
    FeatureRow, LocusRow, ScenarioRow,
};
use crate::config::{DatasetConfig, PipelineConfig};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate, seeded_random_split, systematic_split, DatasetSplit, EvalModel, EvalReport,
    SplitPolicy,
};
use crate::glcm::{compute_glcm, features20, quantize, FEATURE_NAMES};
use crate::model::{train_model, TrainedModel};
use crate::raster::{read_pgm, render_scene, write_pgm};
use crate::relay::{impedance_trajectory, zone_characteristic, ImpedanceLocus, ImpedancePoint};
use crate::rng::sub_seed;
use crate::simulator::{prefault_state, scenario_grid, solve_slg_fault, MixedLineSpec};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Simulate,
    Render,
    Features,
    Train,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Simulate,
        Stage::Render,
        Stage::Features,
        Stage::Train,
        Stage::Eval,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Render => "render",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Eval => "eval",
        }
    }

    pub fn parse(text: &str) -> Result<Stage> {
        match text {
            "simulate" => Ok(Stage::Simulate),
            "render" => Ok(Stage::Render),
            "features" => Ok(Stage::Features),
            "train" => Ok(Stage::Train),
            "eval" => Ok(Stage::Eval),
            other => Err(Error::Config(format!(
                "unknown stage {other:?} (expected simulate, render, features, train or eval)"
            ))),
        }
    }
}

/// Parse a comma-separated stage subset. Requested stages always run in
/// pipeline order, whatever the listed order.
pub fn parse_stages(text: &str) -> Result<Vec<Stage>> {
    let mut requested = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err(Error::Config("empty stage name in stage list".into()));
        }
        let stage = Stage::parse(item)?;
        if !requested.contains(&stage) {
            requested.push(stage);
        }
    }
    let ordered: Vec<Stage> = Stage::ALL
        .into_iter()
        .filter(|s| requested.contains(s))
        .collect();
    Ok(ordered)
}

pub fn scenario_id(dataset: &str, index: usize) -> String {
    format!("{dataset}-{:03}", index + 1)
}

/// One output file: path relative to the output root plus its digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    /// Wall-clock duration; the only non-deterministic manifest field.
    pub seconds: f64,
    pub artifacts: Vec<ArtifactRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub warnings: Vec<String>,
    pub stages: Vec<StageRecord>,
    /// Digest of everything above except stage timing.
    pub content_hash: String,
}

impl RunManifest {
    pub fn compute_content_hash(&self) -> String {
        let mut buf = String::new();
        buf.push_str(&self.tool_version);
        buf.push('\n');
        buf.push_str(&self.config_hash);
        buf.push('\n');
        for w in &self.warnings {
            buf.push_str(w);
            buf.push('\n');
        }
        for s in &self.stages {
            buf.push_str(&s.stage);
            buf.push('\n');
            for a in &s.artifacts {
                buf.push_str(&a.path);
                buf.push(' ');
                buf.push_str(&a.sha256);
                buf.push('\n');
            }
        }
        sha256_hex(buf.as_bytes())
    }
}

struct Ctx<'a> {
    cfg: &'a PipelineConfig,
    out: PathBuf,
    line: MixedLineSpec,
    relay: crate::relay::RelaySettings,
}

impl Ctx<'_> {
    fn abs(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn record(&self, rel: &str) -> Result<ArtifactRecord> {
        Ok(ArtifactRecord {
            path: rel.to_string(),
            sha256: sha256_file(&self.abs(rel))?,
        })
    }

    fn require(&self, rel: &str, producer: Stage) -> Result<PathBuf> {
        let path = self.abs(rel);
        if !path.is_file() {
            return Err(Error::MissingArtifact {
                path: path.display().to_string(),
                stage: producer.as_str().to_string(),
            });
        }
        Ok(path)
    }

    fn image_rel(id: &str) -> String {
        format!("images/{id}.pgm")
    }

    fn model_rel(dataset: &str, model: &str) -> String {
        format!("models/{dataset}/{model}.txt")
    }

    fn section_length(&self, section: usize, origin: &Path) -> Result<f64> {
        match self.line.sections.get(section) {
            Some(s) => Ok(s.length_km),
            None => Err(Error::MalformedArtifact {
                path: origin.display().to_string(),
                why: format!(
                    "section {section} does not exist on the configured line ({} sections)",
                    self.line.sections.len()
                ),
            }),
        }
    }

    /// Rows of `features.csv` belonging to one dataset, in file order.
    /// Ids are `<dataset>-<index>`, so the match is on the prefix before
    /// the final dash.
    fn dataset_rows<'r>(&self, rows: &'r [FeatureRow], dataset: &str) -> Vec<&'r FeatureRow> {
        rows.iter()
            .filter(|r| {
                r.scenario_id
                    .rsplit_once('-')
                    .is_some_and(|(prefix, _)| prefix == dataset)
            })
            .collect()
    }
}

fn stage_simulate(ctx: &Ctx) -> Result<Vec<ArtifactRecord>> {
    let pre = prefault_state(&ctx.line)?;
    let mut scenario_rows = Vec::new();
    let mut locus_rows = Vec::new();
    for ds in &ctx.cfg.datasets {
        let scenarios = scenario_grid(
            &ctx.line,
            ds.section,
            ds.start_km,
            ds.step_km,
            ds.count,
            ds.zf_ohm,
        )?;
        for (k, scen) in scenarios.iter().enumerate() {
            let id = scenario_id(&ds.name, k);
            scenario_rows.push(ScenarioRow {
                scenario_id: id.clone(),
                section: scen.section_index,
                distance_km: scen.distance_km,
                absolute_km: ctx.line.absolute_km(scen.section_index, scen.distance_km),
                zf_ohm: scen.zf_ohm,
            });
            let fault = solve_slg_fault(&ctx.line, scen)?;
            let locus = impedance_trajectory(&pre, &fault, &ctx.relay)?;
            for (i, p) in locus.points.iter().enumerate() {
                locus_rows.push(LocusRow {
                    scenario_id: id.clone(),
                    sample_index: i,
                    r_ohm: p.r,
                    x_ohm: p.x,
                });
            }
        }
    }
    write_scenarios(&ctx.abs("scenarios.csv"), &scenario_rows)?;
    write_loci(&ctx.abs("loci.csv"), &locus_rows)?;
    Ok(vec![
        ctx.record("scenarios.csv")?,
        ctx.record("loci.csv")?,
    ])
}

/// Regroup flat locus rows into per-scenario traces. Rows of one
/// scenario must be contiguous with sample indices counting from zero.
fn group_loci(rows: &[LocusRow], origin: &Path) -> Result<Vec<(String, Vec<ImpedancePoint>)>> {
    let malformed = |why: String| Error::MalformedArtifact {
        path: origin.display().to_string(),
        why,
    };
    let mut groups: Vec<(String, Vec<ImpedancePoint>)> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for row in rows {
        let start_new = groups.last().is_none_or(|(id, _)| id != &row.scenario_id);
        if start_new {
            if !seen.insert(row.scenario_id.clone()) {
                return Err(malformed(format!(
                    "scenario {} appears in two separate blocks",
                    row.scenario_id
                )));
            }
            groups.push((row.scenario_id.clone(), Vec::new()));
        }
        let points = &mut groups.last_mut().expect("group exists").1;
        if row.sample_index != points.len() {
            return Err(malformed(format!(
                "scenario {} sample {} out of order (expected {})",
                row.scenario_id,
                row.sample_index,
                points.len()
            )));
        }
        points.push(ImpedancePoint {
            r: row.r_ohm,
            x: row.x_ohm,
        });
    }
    Ok(groups)
}

fn stage_render(ctx: &Ctx) -> Result<Vec<ArtifactRecord>> {
    let loci_path = ctx.require("loci.csv", Stage::Simulate)?;
    let rows = read_loci(&loci_path)?;
    let groups = group_loci(&rows, &loci_path)?;
    let zones = vec![
        zone_characteristic(&ctx.line, &ctx.relay, 1)?,
        zone_characteristic(&ctx.line, &ctx.relay, 2)?,
    ];
    std::fs::create_dir_all(ctx.abs("images"))?;
    let mut artifacts = Vec::with_capacity(groups.len());
    for (id, points) in groups {
        // Scenario ids carry their dataset as the prefix before the final
        // dash; ids from outside the current config fall back to the
        // global frame.
        let window = ctx
            .cfg
            .datasets
            .iter()
            .find(|d| {
                id.rsplit_once('-')
                    .is_some_and(|(prefix, _)| prefix == d.name)
            })
            .map(|d| ctx.cfg.dataset_window(d))
            .unwrap_or_else(|| ctx.cfg.view_window());
        let clamped = points
            .iter()
            .enumerate()
            .filter(|(_, p)| **p == crate::relay::CLAMP_POINT)
            .map(|(i, _)| i)
            .collect();
        let locus = ImpedanceLocus {
            points,
            samples_per_cycle: ctx.relay.samples_per_cycle,
            prefault_cycles: ctx.relay.prefault_cycles,
            fault_cycles: ctx.relay.fault_cycles,
            clamped,
        };
        let img = render_scene(
            &locus,
            &zones,
            &window,
            ctx.cfg.render.width,
            ctx.cfg.render.height,
        )?;
        let rel = Ctx::image_rel(&id);
        write_pgm(&img, &ctx.abs(&rel))?;
        artifacts.push(ctx.record(&rel)?);
    }
    Ok(artifacts)
}

fn stage_features(ctx: &Ctx) -> Result<Vec<ArtifactRecord>> {
    let scen_path = ctx.require("scenarios.csv", Stage::Simulate)?;
    let scenarios = read_scenarios(&scen_path)?;
    let offsets = ctx.cfg.glcm_offsets();
    let mut rows = Vec::with_capacity(scenarios.len());
    for s in &scenarios {
        let img_path = ctx.require(&Ctx::image_rel(&s.scenario_id), Stage::Render)?;
        let img = read_pgm(&img_path)?;
        let lm = quantize(&img, ctx.cfg.glcm.levels)?;
        let g = compute_glcm(&lm, &offsets, ctx.cfg.glcm.symmetric)?;
        let features = features20(&g);
        let section_km = ctx.section_length(s.section, &scen_path)?;
        rows.push(FeatureRow {
            scenario_id: s.scenario_id.clone(),
            section: s.section,
            distance_km: s.distance_km,
            target_norm: s.distance_km / section_km,
            features: features.to_vec(),
        });
    }
    write_features(&ctx.abs("features.csv"), &rows)?;
    Ok(vec![ctx.record("features.csv")?])
}

/// Deterministic per-dataset split, derived from config and row count
/// alone so the train and eval stages agree without a split artifact.
fn dataset_split(ctx: &Ctx, dataset: &str, n: usize) -> Result<DatasetSplit> {
    match ctx.cfg.split.policy()? {
        SplitPolicy::Systematic => systematic_split(n, ctx.cfg.split.test_every),
        SplitPolicy::SeededRandom => seeded_random_split(
            n,
            ctx.cfg.split.test_every,
            sub_seed(ctx.cfg.seed, &format!("split/{dataset}")),
        ),
    }
}

fn feature_matrix(rows: &[&FeatureRow]) -> (DMatrix<f64>, DVector<f64>) {
    let x = DMatrix::from_fn(rows.len(), FEATURE_NAMES.len(), |r, c| rows[r].features[c]);
    let y = DVector::from_fn(rows.len(), |r, _| rows[r].target_norm);
    (x, y)
}

fn dataset_feature_rows<'r>(
    ctx: &Ctx,
    rows: &'r [FeatureRow],
    ds: &DatasetConfig,
    origin: &Path,
) -> Result<Vec<&'r FeatureRow>> {
    let subset = ctx.dataset_rows(rows, &ds.name);
    if subset.is_empty() {
        return Err(Error::MalformedArtifact {
            path: origin.display().to_string(),
            why: format!("no rows for dataset {:?}", ds.name),
        });
    }
    Ok(subset)
}

fn stage_train(ctx: &Ctx) -> Result<Vec<ArtifactRecord>> {
    let feat_path = ctx.require("features.csv", Stage::Features)?;
    let all_rows = read_features(&feat_path)?;
    let recipes = ctx.cfg.recipes()?;
    let mut artifacts = Vec::new();
    for ds in &ctx.cfg.datasets {
        let rows = dataset_feature_rows(ctx, &all_rows, ds, &feat_path)?;
        let (x, y) = feature_matrix(&rows);
        let split = dataset_split(ctx, &ds.name, rows.len())?;
        let total_km = ctx.section_length(ds.section, &feat_path)?;
        std::fs::create_dir_all(ctx.abs(&format!("models/{}", ds.name)))?;
        for (name, recipe) in &recipes {
            let seed = sub_seed(ctx.cfg.seed, &format!("{}/{}", ds.name, name));
            let model = train_model(name, recipe, &x, &split.train, &y, total_km, seed)?;
            let rel = Ctx::model_rel(&ds.name, name);
            model.save(&ctx.abs(&rel))?;
            artifacts.push(ctx.record(&rel)?);
        }
    }
    Ok(artifacts)
}

fn stage_eval(ctx: &Ctx) -> Result<Vec<ArtifactRecord>> {
    let feat_path = ctx.require("features.csv", Stage::Features)?;
    let all_rows = read_features(&feat_path)?;
    let mut reports: Vec<EvalReport> = Vec::new();
    for ds in &ctx.cfg.datasets {
        let rows = dataset_feature_rows(ctx, &all_rows, ds, &feat_path)?;
        let (x, y) = feature_matrix(&rows);
        let split = dataset_split(ctx, &ds.name, rows.len())?;
        let total_km = ctx.section_length(ds.section, &feat_path)?;
        let mut models: Vec<TrainedModel> = Vec::with_capacity(ctx.cfg.models.len());
        for entry in &ctx.cfg.models {
            let rel = Ctx::model_rel(&ds.name, &entry.name);
            let path = ctx.require(&rel, Stage::Train)?;
            models.push(TrainedModel::load(&path)?);
        }
        let refs: Vec<&dyn EvalModel> = models.iter().map(|m| m as &dyn EvalModel).collect();
        reports.push(evaluate(&refs, &x, &y, &split, &ds.name, total_km)?);
    }
    write_json(&ctx.abs("report.json"), &reports)?;
    write_rmse_table(&ctx.abs("table_rmse.csv"), &reports)?;
    write_best_table(&ctx.abs("table_best.csv"), &reports)?;
    write_plot_csv(&ctx.abs("plot_actual_vs_pred.csv"), &reports)?;
    Ok(vec![
        ctx.record("report.json")?,
        ctx.record("table_rmse.csv")?,
        ctx.record("table_best.csv")?,
        ctx.record("plot_actual_vs_pred.csv")?,
    ])
}

/// Validate the config, run the requested stages in pipeline order, and
/// write `manifest.json` under the output root.
pub fn run_pipeline(cfg: &PipelineConfig, stages: &[Stage]) -> Result<RunManifest> {
    let warnings = cfg.validate()?;
    if stages.is_empty() {
        return Err(Error::Config("no stages requested".into()));
    }
    let line = cfg.line_spec()?;
    let relay = cfg.relay_settings(&line)?;
    let ctx = Ctx {
        cfg,
        out: PathBuf::from(&cfg.out_dir),
        line,
        relay,
    };
    std::fs::create_dir_all(&ctx.out)?;
    let mut records = Vec::new();
    for stage in Stage::ALL.into_iter().filter(|s| stages.contains(s)) {
        let started = Instant::now();
        let artifacts = match stage {
            Stage::Simulate => stage_simulate(&ctx)?,
            Stage::Render => stage_render(&ctx)?,
            Stage::Features => stage_features(&ctx)?,
            Stage::Train => stage_train(&ctx)?,
            Stage::Eval => stage_eval(&ctx)?,
        };
        records.push(StageRecord {
            stage: stage.as_str().to_string(),
            seconds: started.elapsed().as_secs_f64(),
            artifacts,
        });
    }
    let mut manifest = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        config_hash: cfg.content_hash()?,
        warnings,
        stages: records,
        content_hash: String::new(),
    };
    manifest.content_hash = manifest.compute_content_hash();
    write_json(&ctx.abs("manifest.json"), &manifest)?;
    Ok(manifest)
}
