//! End-to-end dataset generation and the batch commands behind the CLI.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::{
    dataset_statistics, integrate_sub_pairs, read_records, validate_record, DatasetRecord, DatasetStats, GenParams,
    SubPair, Violation,
};
use crate::chunking::{chunk_trajectory_with, SubTrajectory, VERTICAL_THRESHOLD_M};
use crate::config::{LandmarkAnchor, PipelineConfig, ProviderSpec, Variant};
use crate::entities::{extract_entity_candidates, select_entity, Lexicon};
use crate::error::{Error, Result};
use crate::landmarks::{
    detection_preference, detection_sector, select_landmark, CategoryLibrary, DetectionSector, Landmark,
};
use crate::metrics::{navigation_metrics, read_eval_input, BleuSmoothing, EvalInput, LanguageReport, NavigationReport};
use crate::navgraph::{
    load_graph, normalize_heading, sample_trajectories, ConnectivityGraph, SamplingOptions, Trajectory,
};
use crate::provider::{Detector, Embedder, FixtureDetector, FixtureEmbedder, LanguageModel, StreamProvider};
use crate::speaker::{decode, DecodingParams, PanoFeatures, ToyLm, Vocabulary, VIEWS_PER_PANORAMA};
use crate::templating::{build_template_library, craft_sub_instruction, TemplateLibrary};

/// Trajectories processed between two manifest checkpoints.
const CHECKPOINT_EVERY: usize = 16;

/// Panoramas hold 3 elevation rows of 12 views, 30 degrees apart; the middle
/// row looks at the horizon.
const VIEWS_PER_ROW: usize = 12;

/// Index of the horizon-level view closest to `heading` in a panorama whose
/// first column faces `center_heading - 180`.
pub fn oriented_view_index(heading: f64, center_heading: f64) -> usize {
    let offset = (normalize_heading(heading - center_heading) + 180.0).rem_euclid(360.0);
    let column = (offset / 30.0).round() as usize % VIEWS_PER_ROW;
    VIEWS_PER_ROW + column
}

fn build_detector(spec: &ProviderSpec) -> Result<Box<dyn Detector>> {
    match spec {
        ProviderSpec::Fixture { path } => Ok(Box::new(FixtureDetector::load(path)?)),
        ProviderSpec::Command { command } => Ok(Box::new(StreamProvider::spawn("detector", command)?)),
        ProviderSpec::Toy { .. } => Err(Error::Config("detector cannot be a toy LM".into())),
    }
}

fn build_embedder(spec: &ProviderSpec) -> Result<Box<dyn Embedder>> {
    match spec {
        ProviderSpec::Fixture { path } => Ok(Box::new(FixtureEmbedder::load(path)?)),
        ProviderSpec::Command { command } => Ok(Box::new(StreamProvider::spawn("embedder", command)?)),
        ProviderSpec::Toy { .. } => Err(Error::Config("embedder cannot be a toy LM".into())),
    }
}

fn build_lm(spec: &ProviderSpec) -> Result<Box<dyn LanguageModel>> {
    match spec {
        ProviderSpec::Toy { path } => Ok(Box::new(ToyLm::load(path)?)),
        ProviderSpec::Command { command } => Ok(Box::new(StreamProvider::spawn("lm", command)?)),
        ProviderSpec::Fixture { .. } => Err(Error::Config("language model must be `toy` or `command`".into())),
    }
}

/// Everything needed to turn sampled trajectories into records.
pub struct Pipeline {
    config: PipelineConfig,
    graphs: Vec<ConnectivityGraph>,
    detector: Box<dyn Detector>,
    embedder: Box<dyn Embedder>,
    lm: Box<dyn LanguageModel>,
    vocab: Vocabulary,
    categories: CategoryLibrary,
    templates: TemplateLibrary,
    lexicon: Lexicon,
    pano_views: Option<BTreeMap<String, Vec<Vec<f64>>>>,
}

impl Pipeline {
    pub fn from_config(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let graphs = config.sampling.graphs.iter().map(load_graph).collect::<Result<Vec<_>>>()?;
        let categories = CategoryLibrary::load(&config.landmarks.categories)?;
        let templates = match &config.templating.library {
            Some(p) => TemplateLibrary::load(p)?,
            None => build_template_library(),
        };
        let lexicon = match &config.entities.lexicon {
            Some(p) => Lexicon::load(p)?,
            None => Lexicon::default(),
        };
        let pano_views = match &config.speaker.pano_features {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Some(serde_json::from_str(&text).map_err(|e| Error::json(p.display().to_string(), e))?)
            }
            None => None,
        };
        let detector = build_detector(&config.providers.detector)?;
        let embedder = build_embedder(&config.providers.embedder)?;
        let lm = build_lm(&config.providers.lm)?;
        let vocab = Vocabulary::new(lm.vocabulary()?)?;
        Ok(Self { config, graphs, detector, embedder, lm, vocab, categories, templates, lexicon, pano_views })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn provider_names(&self) -> ProviderNames {
        ProviderNames {
            detector: self.detector.name().to_string(),
            embedder: self.embedder.name().to_string(),
            lm: self.lm.name().to_string(),
        }
    }

    /// Samples trajectories from every configured graph, in config order.
    /// Each graph gets its own seed stream derived from the run seed.
    pub fn sample(&self) -> Result<Vec<Trajectory>> {
        let s = &self.config.sampling;
        let mut out = Vec::new();
        for (i, graph) in self.graphs.iter().enumerate() {
            let opts = SamplingOptions {
                min_steps: s.min_steps,
                max_steps: s.max_steps,
                seed: self.config.seed.wrapping_add(i as u64),
                count: Some(s.trajectories_per_graph),
                min_length: s.min_length,
                max_length: s.max_length,
            };
            let trajs = sample_trajectories(graph, &opts)?;
            if trajs.len() < s.trajectories_per_graph {
                log::warn!(
                    "graph {}: only {} of {} trajectories qualify",
                    graph.scan_id(),
                    trajs.len(),
                    s.trajectories_per_graph
                );
            }
            out.extend(trajs);
        }
        Ok(out)
    }

    fn landmark_for(&self, traj: &Trajectory, sub: &SubTrajectory) -> Result<Option<Landmark>> {
        if !self.config.templating.landmarks {
            return Ok(None);
        }
        let pano = &self.config.landmarks.panorama;
        let search = |t: usize| -> Result<Option<Landmark>> {
            let pose = &traj.poses[t];
            let sector: DetectionSector = detection_sector(pose.heading);
            select_landmark(&traj.scan_id, &pose.viewpoint_id, &sector, self.detector.as_ref(), &self.categories, pano)
        };
        match self.config.landmarks.anchor {
            LandmarkAnchor::ExitWaypoint => search(sub.steps.end),
            LandmarkAnchor::DetectionWaypoint => {
                let mut best: Option<Landmark> = None;
                for t in sub.steps.start..=sub.steps.end {
                    if let Some(lm) = search(t)? {
                        let better =
                            best.as_ref().is_none_or(|b| detection_preference(&lm.detection, &b.detection).is_lt());
                        if better {
                            best = Some(lm);
                        }
                    }
                }
                Ok(best)
            }
        }
    }

    fn panoramas_for(&self, traj: &Trajectory, sub: &SubTrajectory) -> Result<Vec<PanoFeatures>> {
        let Some(map) = &self.pano_views else {
            return Ok(Vec::new());
        };
        let center = self.config.landmarks.panorama.center_heading;
        (sub.steps.start..=sub.steps.end)
            .map(|t| {
                let pose = &traj.poses[t];
                let key = format!("{}/{}", traj.scan_id, pose.viewpoint_id);
                let views =
                    map.get(&key).ok_or_else(|| Error::InvalidInput(format!("no panorama features for \"{key}\"")))?;
                if views.len() != VIEWS_PER_PANORAMA {
                    return Err(Error::InvalidInput(format!("\"{key}\" has {} views", views.len())));
                }
                Ok(PanoFeatures { views: views.clone(), oriented: oriented_view_index(pose.heading, center) })
            })
            .collect()
    }

    /// Generates one record per decoding variant for a trajectory.
    pub fn process(&self, index: usize, traj: &Trajectory) -> Result<Vec<DatasetRecord>> {
        let subs = chunk_trajectory_with(traj, self.config.chunking.merge_straight)?;
        let mut prepared = Vec::with_capacity(subs.len());
        for sub in &subs {
            let landmark = self.landmark_for(traj, sub)?;
            let crafted = craft_sub_instruction(sub, landmark.as_ref(), &self.templates);
            let panos = self.panoramas_for(traj, sub)?;
            prepared.push((sub, landmark, crafted, panos));
        }

        let headings: Vec<f64> = traj.poses.iter().map(|p| p.heading).collect();
        let mut records = Vec::with_capacity(self.config.variants.len());
        for (vi, variant) in self.config.variants.iter().enumerate() {
            let params = DecodingParams { k: variant.k, alpha: variant.alpha, max_len: self.config.speaker.max_len };
            let mut pairs = Vec::with_capacity(prepared.len());
            for (sub, landmark, crafted, panos) in &prepared {
                let generated =
                    decode(&self.config.speaker.prompt, crafted, panos, self.lm.as_ref(), &self.vocab, &params)?;
                if generated.truncated {
                    log::warn!("trajectory {index}: decoding hit max_len {}", params.max_len);
                }
                let text = if generated.text.trim().is_empty() {
                    log::warn!("trajectory {index}: empty decode, keeping the crafted instruction");
                    crafted.text.clone()
                } else {
                    generated.text
                };
                let entity = match landmark {
                    Some(lm) => {
                        let candidates = extract_entity_candidates(&text, &self.lexicon);
                        select_entity(
                            &traj.scan_id,
                            lm,
                            &candidates,
                            self.embedder.as_ref(),
                            self.config.entities.embedding,
                        )?
                        .map(|pair| pair.entity)
                    }
                    None => None,
                };
                pairs.push(SubPair {
                    steps: sub.steps.clone(),
                    sub_instruction: text,
                    entity,
                    landmark: landmark.clone(),
                });
            }
            let integrated = integrate_sub_pairs(&pairs, &self.config.assembly.joiner)?;
            records.push(DatasetRecord::from_integrated(
                format!("{}_{index:05}_{vi}", traj.scan_id),
                traj.scan_id.clone(),
                traj.path(),
                headings.clone(),
                integrated,
                GenParams { alpha: variant.alpha, k: variant.k, seed: self.config.seed },
            ));
        }
        Ok(records)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderNames {
    pub detector: String,
    pub embedder: String,
    pub lm: String,
}

/// Settings the output depends on that are not fixed by the code itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knobs {
    pub variants: Vec<Variant>,
    pub min_steps: usize,
    pub max_steps: usize,
    pub min_length: Option<f64>,
    pub max_length: Option<f64>,
    pub landmark_anchor: LandmarkAnchor,
    pub panorama_width: u32,
    pub panorama_height: u32,
    pub panorama_center_heading: f64,
    pub sector_half_width_deg: f64,
    pub straight_threshold_deg: f64,
    pub backward_threshold_deg: f64,
    pub vertical_threshold_m: f64,
    pub merge_straight: bool,
    pub landmarks_in_templates: bool,
    pub prompt: String,
    pub max_len: usize,
    pub entity_embedding: crate::entities::LandmarkEmbedding,
    pub joiner: String,
}

impl Knobs {
    fn from_config(c: &PipelineConfig) -> Self {
        Self {
            variants: c.variants.clone(),
            min_steps: c.sampling.min_steps,
            max_steps: c.sampling.max_steps,
            min_length: c.sampling.min_length,
            max_length: c.sampling.max_length,
            landmark_anchor: c.landmarks.anchor,
            panorama_width: c.landmarks.panorama.width,
            panorama_height: c.landmarks.panorama.height,
            panorama_center_heading: c.landmarks.panorama.center_heading,
            sector_half_width_deg: DetectionSector::HALF_WIDTH,
            straight_threshold_deg: 15.0,
            backward_threshold_deg: 165.0,
            vertical_threshold_m: VERTICAL_THRESHOLD_M,
            merge_straight: c.chunking.merge_straight,
            landmarks_in_templates: c.templating.landmarks,
            prompt: c.speaker.prompt.clone(),
            max_len: c.speaker.max_len,
            entity_embedding: c.entities.embedding,
            joiner: c.assembly.joiner.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_sha256: String,
    pub providers: ProviderNames,
    pub trajectories_total: usize,
    pub trajectories_done: usize,
    pub records: usize,
    pub sub_pairs: usize,
    pub entity_pairs: usize,
    /// Length of the dataset file covering `trajectories_done`.
    pub output_bytes: u64,
    pub complete: bool,
    pub knobs: Knobs,
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// SHA-256 over the configuration with the worker count and output path
/// blanked, since neither changes the generated bytes.
pub fn config_hash(config: &PipelineConfig) -> String {
    let mut c = config.clone();
    c.workers = 1;
    c.output = PathBuf::new();
    let json = serde_json::to_string(&c).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

fn write_manifest(path: &Path, m: &Manifest) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let text = serde_json::to_string_pretty(m).expect("manifest serializes");
    fs::write(&tmp, text + "\n").map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_manifest(path: &Path) -> Option<Manifest> {
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerateReport {
    pub output: PathBuf,
    pub manifest: PathBuf,
    pub trajectories: usize,
    pub records: usize,
    pub sub_pairs: usize,
    pub entity_pairs: usize,
    /// Trajectories skipped because an earlier run had finished them.
    pub resumed: usize,
}

/// Runs the whole pipeline and writes the dataset plus its manifest.
///
/// With `resume` set, a manifest left by an interrupted run with the same
/// configuration hash lets generation continue after the last checkpoint.
pub fn cmd_generate(config: PipelineConfig, resume: bool) -> Result<GenerateReport> {
    let pipeline = Pipeline::from_config(config)?;
    let cfg = pipeline.config();
    let output = cfg.output.clone();
    let mpath = manifest_path(&output);
    let hash = config_hash(cfg);
    let trajectories = pipeline.sample()?;
    if trajectories.is_empty() {
        log::warn!("no trajectories sampled; writing an empty dataset");
    }
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }

    let mut manifest = Manifest {
        seed: cfg.seed,
        config_sha256: hash.clone(),
        providers: pipeline.provider_names(),
        trajectories_total: trajectories.len(),
        trajectories_done: 0,
        records: 0,
        sub_pairs: 0,
        entity_pairs: 0,
        output_bytes: 0,
        complete: false,
        knobs: Knobs::from_config(cfg),
    };

    let previous = resume.then(|| read_manifest(&mpath)).flatten().filter(|m| {
        m.config_sha256 == hash
            && m.trajectories_total == trajectories.len()
            && fs::metadata(&output).map(|md| md.len() >= m.output_bytes).unwrap_or(false)
    });
    let file = match &previous {
        Some(prev) => {
            log::info!("resuming after {} of {} trajectories", prev.trajectories_done, prev.trajectories_total);
            let mut f = OpenOptions::new().write(true).open(&output).map_err(|e| Error::io(&output, e))?;
            f.set_len(prev.output_bytes).map_err(|e| Error::io(&output, e))?;
            f.seek(SeekFrom::End(0)).map_err(|e| Error::io(&output, e))?;
            manifest.trajectories_done = prev.trajectories_done;
            manifest.records = prev.records;
            manifest.sub_pairs = prev.sub_pairs;
            manifest.entity_pairs = prev.entity_pairs;
            manifest.output_bytes = prev.output_bytes;
            f
        }
        None => File::create(&output).map_err(|e| Error::io(&output, e))?,
    };
    let resumed = manifest.trajectories_done;
    let mut writer = BufWriter::new(file);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;

    let mut start = manifest.trajectories_done;
    while start < trajectories.len() {
        let end = (start + CHECKPOINT_EVERY).min(trajectories.len());
        let batch: Vec<Vec<DatasetRecord>> = pool.install(|| {
            (start..end).into_par_iter().map(|i| pipeline.process(i, &trajectories[i])).collect::<Result<Vec<_>>>()
        })?;
        for rec in batch.iter().flatten() {
            let line = rec.to_json_line();
            writer
                .write_all(line.as_bytes())
                .and_then(|_| writer.write_all(b"\n"))
                .map_err(|e| Error::io(&output, e))?;
            manifest.records += 1;
            manifest.sub_pairs += rec.sub_pairs.len();
            manifest.entity_pairs += rec.sub_pairs.iter().filter(|s| s.entity.is_some()).count();
            manifest.output_bytes += line.len() as u64 + 1;
        }
        writer.flush().map_err(|e| Error::io(&output, e))?;
        manifest.trajectories_done = end;
        write_manifest(&mpath, &manifest)?;
        start = end;
    }
    manifest.complete = true;
    write_manifest(&mpath, &manifest)?;

    Ok(GenerateReport {
        output,
        manifest: mpath,
        trajectories: trajectories.len(),
        records: manifest.records,
        sub_pairs: manifest.sub_pairs,
        entity_pairs: manifest.entity_pairs,
        resumed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvalReport {
    Language {
        items: usize,
        #[serde(flatten)]
        scores: LanguageReport,
    },
    Navigation(NavigationReport),
}

impl EvalReport {
    /// Fixed-width table for terminal output.
    pub fn table(&self) -> String {
        let mut s = String::new();
        match self {
            EvalReport::Language { items, scores } => {
                let _ = writeln!(s, "{:<10} {:>10}", "metric", "score");
                for (name, v) in [
                    ("BLEU-4", scores.bleu4),
                    ("METEOR", scores.meteor),
                    ("ROUGE-L", scores.rouge_l),
                    ("CIDEr", scores.cider),
                ] {
                    let _ = writeln!(s, "{name:<10} {v:>10.2}");
                }
                let _ = writeln!(s, "({items} items)");
            }
            EvalReport::Navigation(r) => {
                let _ = writeln!(s, "{:<10} {:>10}", "metric", "value");
                for (name, v) in [("TL", r.tl), ("NE", r.ne), ("SR", 100.0 * r.sr), ("SPL", 100.0 * r.spl)] {
                    let _ = writeln!(s, "{name:<10} {v:>10.2}");
                }
                let _ = writeln!(s, "({} episodes)", r.episodes);
            }
        }
        s
    }
}

pub fn cmd_evaluate(path: &Path, smoothing: BleuSmoothing) -> Result<EvalReport> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match read_eval_input(BufReader::new(file))? {
        EvalInput::Language(corpus) => {
            Ok(EvalReport::Language { items: corpus.len(), scores: LanguageReport::compute(&corpus, smoothing) })
        }
        EvalInput::Navigation(episodes) => Ok(EvalReport::Navigation(navigation_metrics(&episodes)?)),
    }
}

pub fn cmd_stats(path: &Path) -> Result<DatasetStats> {
    Ok(dataset_statistics(&read_records(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub records: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every record; hops are checked for adjacency when a graph with
/// the record's scan id is among `graphs`.
pub fn cmd_validate(path: &Path, graphs: &[PathBuf]) -> Result<ValidationReport> {
    let records = read_records(path)?;
    let mut by_scan = BTreeMap::new();
    for g in graphs {
        let graph = load_graph(g)?;
        by_scan.insert(graph.scan_id().to_string(), graph);
    }
    let mut violations = Vec::new();
    for r in &records {
        violations.extend(validate_record(r, by_scan.get(&r.scan)));
    }
    Ok(ValidationReport { records: records.len(), violations })
}
