//! One function per subcommand. Each reads the previous stage's files from
//! the output directory and records what it read and wrote in the manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use framing::baselines::{
    baseline_rankings, lda_outlet_embeddings, lm_embed_outlets, tfidf_outlet_embeddings,
    LdaModel, Method, OutletEmbedding, TfidfModel,
};
use framing::corpus::{ingest_tree, load_instances, partition, save_instances, Instance};
use framing::groundtruth::{
    ground_truth_rankings, load_leanings, normalize_survey, GroundTruth, SurveyTable,
};
use framing::measurement::{
    agglomerative_cluster, agreement, extreme_instances, histogram, instance_level_agreement,
    similarity_rankings, topic_distance_matrix, AgreementReport, Dendrogram, DendrogramNode,
    DistanceMatrix, ExtremeReport, Histogram, InstanceAgreement, MeasureError, PairExclusion,
    SimilarityRanking,
};
use framing::promptgen::{
    expand_manual_templates, extract_shared_ngrams, generate_attention, generate_bigram_outer,
    generate_ngram_inner, generate_random, load_prompts, save_prompts, MaskedPrompt, NgramSet,
    TemplateSet,
};
use framing::representation::{
    build_topic_representation, FramingMatrix, NormalizationMode, RepresentationSettings,
    SkippedPrompt, TopicRepresentation,
};
use framing::scorer::{HttpScorer, HttpScorerConfig, ModelId, Scorer, StubScorer};
use serde::{Deserialize, Serialize};

use crate::config::{GroundTruthKind, PromptMethod, Run, ScorerBackend};
use crate::workspace::Workspace;

pub const INSTANCES_ALL: &str = "instances/all.jsonl";
pub const INSTANCES_TRAIN: &str = "instances/train.jsonl";
pub const INSTANCES_DEV: &str = "instances/dev.jsonl";

pub fn prompts_path(topic: &str, method: &PromptMethod) -> String {
    format!("prompts/{topic}/{method}.jsonl")
}

fn cell(topic: &str, family: &str, method: &PromptMethod, norm: NormalizationMode) -> String {
    format!("{topic}/{family}/{method}/{norm}")
}

pub fn representation_path(t: &str, f: &str, m: &PromptMethod, n: NormalizationMode) -> String {
    format!("representations/{}.json", cell(t, f, m, n))
}

pub fn measure_path(t: &str, f: &str, m: &PromptMethod, n: NormalizationMode) -> String {
    format!("measure/{}.json", cell(t, f, m, n))
}

pub fn eval_path(t: &str, f: &str, m: &PromptMethod, n: NormalizationMode, gt: &str) -> String {
    format!("eval/{}/{gt}.json", cell(t, f, m, n))
}

pub fn cluster_path(t: &str, f: &str, m: &PromptMethod, n: NormalizationMode) -> String {
    format!("cluster/{}.json", cell(t, f, m, n))
}

pub fn baseline_path(topic: &str, method: Method, family: Option<&str>) -> String {
    match family {
        Some(f) => format!("baseline/{topic}/{method}-{f}.json"),
        None => format!("baseline/{topic}/{method}.json"),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IngestSummary {
    pub instances: usize,
    pub train: usize,
    pub dev: usize,
    pub overlength: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RepresentationDoc {
    pub topic: String,
    pub family: String,
    pub method: String,
    pub normalization: NormalizationMode,
    pub representation: TopicRepresentation,
    pub skipped: Vec<SkippedPrompt>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MeasureDoc {
    pub topic: String,
    pub family: String,
    pub method: String,
    pub normalization: NormalizationMode,
    pub distances: DistanceMatrix,
    pub exclusions: Vec<PairExclusion>,
    pub rankings: Vec<SimilarityRanking>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvalDoc {
    pub topic: String,
    pub family: String,
    pub method: String,
    pub normalization: NormalizationMode,
    pub ground_truth: String,
    /// Sources shared by the experiment and the ground truth.
    pub outlets: Vec<String>,
    pub agreement: Option<AgreementReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub instances: InstanceAgreement,
    pub histogram: Histogram,
    pub extremes: Option<ExtremeReport>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClusterDoc {
    pub topic: String,
    pub family: String,
    pub method: String,
    pub normalization: NormalizationMode,
    pub dendrogram: Dendrogram,
    pub tree: Option<DendrogramNode>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BaselineAgreement {
    pub agreement: Option<AgreementReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BaselineDoc {
    pub topic: String,
    pub method: Method,
    pub family: Option<String>,
    pub embeddings: Vec<OutletEmbedding>,
    pub distances: DistanceMatrix,
    pub rankings: Vec<SimilarityRanking>,
    pub agreement: BTreeMap<String, BaselineAgreement>,
}

pub fn build_scorer(run: &Run, ws: &mut Workspace) -> Result<Box<dyn Scorer>> {
    Ok(match &run.config.scorer {
        ScorerBackend::Stub(p) => {
            let path = run.resolve(p);
            ws.input(&format!("stub:{p}"), &path)?;
            Box::new(StubScorer::from_path(&path)?)
        }
        ScorerBackend::Http(url) => Box::new(HttpScorer::new(HttpScorerConfig::new(url.clone()))),
    })
}

fn read_instances(ws: &mut Workspace, rel: &str) -> Result<Vec<Instance>> {
    let path = ws.require(rel, "ingest")?;
    ws.input(rel, &path)?;
    Ok(load_instances(&path)?)
}

fn for_topic(run: &Run, instances: &[Instance], topic: &str) -> Vec<Instance> {
    instances
        .iter()
        .filter(|i| i.topic == topic && run.config.sources.contains(&i.source))
        .cloned()
        .collect()
}

fn corpus_files(dir: &Path, out: &mut Vec<std::path::PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .collect::<std::result::Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            corpus_files(&p, out)?;
        } else if p.extension().and_then(|e| e.to_str()) == Some("txt") {
            out.push(p);
        }
    }
    Ok(())
}

pub fn ingest(run: &Run) -> Result<()> {
    let Some(dir) = &run.config.corpus_dir else {
        bail!("corpus_dir is not set in the config; nothing to ingest");
    };
    let root = run.resolve(dir);
    let mut ws = Workspace::new(&run.out_dir);
    let mut files = Vec::new();
    corpus_files(&root, &mut files)?;
    for f in &files {
        let rel = f.strip_prefix(&root).unwrap_or(f).to_string_lossy().replace('\\', "/");
        ws.input(&format!("corpus:{rel}"), f)?;
    }
    let cfg = run.config.corpus_config();
    let ingested = ingest_tree(&root, &cfg)?;
    let instances: Vec<Instance> = ingested
        .instances
        .into_iter()
        .filter(|i| run.config.topics.contains(&i.topic) && run.config.sources.contains(&i.source))
        .collect();
    ensure!(!instances.is_empty(), "no instances found under {} for the configured topics and sources", root.display());
    let split = partition(&instances, &cfg)?;
    for (rel, set) in [
        (INSTANCES_ALL, &instances),
        (INSTANCES_TRAIN, &split.train),
        (INSTANCES_DEV, &split.dev),
    ] {
        save_instances(set, &ws.path(rel))?;
        ws.output(rel)?;
    }
    let overlength = ingested
        .overlength
        .into_iter()
        .filter(|id| instances.iter().any(|i| &i.id == id))
        .collect();
    ws.write_json(
        "instances/summary.json",
        &IngestSummary {
            instances: instances.len(),
            train: split.train.len(),
            dev: split.dev.len(),
            overlength,
            warnings: split.warnings,
        },
    )?;
    log::info!(
        "ingested {} instances ({} train, {} dev)",
        instances.len(),
        split.train.len(),
        split.dev.len()
    );
    ws.commit("ingest", &run.config_sha256, run.config.seed)
}

fn manual_prompts(run: &Run, ws: &mut Workspace, topic: &str) -> Result<Vec<MaskedPrompt>> {
    let set = match &run.config.templates {
        Some(p) => {
            let path = run.resolve(p);
            ws.input(&format!("templates:{p}"), &path)?;
            let raw = std::fs::read_to_string(&path)?;
            serde_json::from_str::<TemplateSet>(&raw)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let terms: Vec<&str> = match run.config.topic_terms.get(topic) {
                Some(t) => t.iter().map(String::as_str).collect(),
                None => vec![topic],
            };
            TemplateSet::default_for(topic, &terms)
        }
    };
    let templates = set.templates(topic);
    ensure!(!templates.is_empty(), "no manual templates for topic {topic}");
    Ok(expand_manual_templates(&templates)?)
}

fn generate(
    run: &Run,
    ws: &mut Workspace,
    topic: &str,
    method: &PromptMethod,
    dev: &[Instance],
    scorer: &mut Option<Box<dyn Scorer>>,
) -> Result<Vec<MaskedPrompt>> {
    let cfg = run.config.promptgen_config();
    let by_source = || -> BTreeMap<String, Vec<Instance>> {
        let mut m: BTreeMap<String, Vec<Instance>> = run
            .config
            .sources
            .iter()
            .map(|s| (s.clone(), Vec::new()))
            .collect();
        for i in dev {
            m.entry(i.source.clone()).or_default().push(i.clone());
        }
        m
    };
    let shared = |n: usize, min| -> Result<NgramSet> {
        Ok(extract_shared_ngrams(&by_source(), n, min)?.into_iter().collect())
    };
    Ok(match method {
        PromptMethod::Random => generate_random(dev, &cfg)?,
        PromptMethod::Attention => {
            if scorer.is_none() {
                *scorer = Some(build_scorer(run, ws)?);
            }
            let family = &run.config.families[0];
            let clf = ModelId::classifier(family, topic);
            generate_attention(dev, scorer.as_deref().unwrap(), &clf, &cfg)?
        }
        PromptMethod::BigramOuter => {
            let s = shared(2, cfg.bo_min_sources)?;
            dev.iter().flat_map(|i| generate_bigram_outer(i, &s)).collect()
        }
        PromptMethod::BigramInner => {
            let s = shared(2, cfg.bi_min_sources)?;
            dev.iter().flat_map(|i| generate_ngram_inner(i, &s, 2)).collect()
        }
        PromptMethod::TrigramInner => {
            let s = shared(3, cfg.bi_min_sources)?;
            dev.iter().flat_map(|i| generate_ngram_inner(i, &s, 3)).collect()
        }
        PromptMethod::Manual(_) => manual_prompts(run, ws, topic)?
            .into_iter()
            .filter(|p| method.accepts_manual_id(&p.id))
            .collect(),
    })
}

fn fixed_prompts(
    run: &Run,
    ws: &mut Workspace,
    dir: &str,
    topic: &str,
    method: &PromptMethod,
) -> Result<Vec<MaskedPrompt>> {
    let base = run.resolve(dir).join(topic);
    let exact = base.join(format!("{method}.jsonl"));
    let (path, filter) = if exact.is_file() {
        (exact, false)
    } else if matches!(method, PromptMethod::Manual(f) if !f.is_empty())
        && base.join("manual.jsonl").is_file()
    {
        (base.join("manual.jsonl"), true)
    } else {
        bail!("prompt file {} does not exist", exact.display());
    };
    let rel = path.strip_prefix(run.resolve(dir)).unwrap_or(&path);
    ws.input(&format!("prompts:{}", rel.display()), &path)?;
    let prompts = load_prompts(&path)?;
    if let Some(p) = prompts.iter().find(|p| p.topic != topic) {
        bail!("{}: prompt {} belongs to topic {}", path.display(), p.id, p.topic);
    }
    Ok(prompts
        .into_iter()
        .filter(|p| !filter || method.accepts_manual_id(&p.id))
        .collect())
}

pub fn prompts(run: &Run) -> Result<()> {
    let mut ws = Workspace::new(&run.out_dir);
    let mut scorer: Option<Box<dyn Scorer>> = None;
    let needs_dev = run.config.prompts_dir.is_none()
        && run
            .prompt_methods
            .iter()
            .any(|m| !matches!(m, PromptMethod::Manual(_)));
    let dev = if needs_dev {
        read_instances(&mut ws, INSTANCES_DEV)?
    } else {
        Vec::new()
    };
    for topic in &run.config.topics {
        let dev_t = for_topic(run, &dev, topic);
        for method in &run.prompt_methods {
            let prompts = match &run.config.prompts_dir {
                Some(dir) => fixed_prompts(run, &mut ws, dir, topic, method)?,
                None => generate(run, &mut ws, topic, method, &dev_t, &mut scorer)?,
            };
            let mut seen = BTreeSet::new();
            if let Some(p) = prompts.iter().find(|p| !seen.insert(p.id.as_str())) {
                bail!("duplicate prompt id {}", p.id);
            }
            if prompts.is_empty() {
                log::warn!("{topic}/{method}: no prompts generated");
            }
            let rel = prompts_path(topic, method);
            save_prompts(&prompts, &ws.path(&rel))?;
            ws.output(&rel)?;
            log::info!("{topic}/{method}: {} prompts", prompts.len());
        }
    }
    ws.commit("prompts", &run.config_sha256, run.config.seed)
}

pub fn represent(run: &Run) -> Result<()> {
    let mut ws = Workspace::new(&run.out_dir);
    let scorer = build_scorer(run, &mut ws)?;
    for topic in &run.config.topics {
        for method in &run.prompt_methods {
            let rel = prompts_path(topic, method);
            let path = ws.require(&rel, "prompts")?;
            ws.input(&rel, &path)?;
            let prompts = load_prompts(&path)?;
            for family in &run.config.families {
                for &norm in &run.config.normalizations {
                    let mut settings = RepresentationSettings::new(family.clone(), norm, run.config.k);
                    settings.max_in_flight = run.config.max_in_flight;
                    let built =
                        build_topic_representation(&prompts, &run.config.sources, scorer.as_ref(), &settings)
                            .with_context(|| cell(topic, family, method, norm))?;
                    ws.write_json(
                        &representation_path(topic, family, method, norm),
                        &RepresentationDoc {
                            topic: topic.clone(),
                            family: family.clone(),
                            method: method.to_string(),
                            normalization: norm,
                            representation: built.representation,
                            skipped: built.skipped,
                        },
                    )?;
                }
            }
        }
    }
    ws.commit("represent", &run.config_sha256, run.config.seed)
}

/// Iterate every (topic, family, method, normalization) cell of the run.
fn cells(run: &Run) -> Vec<(String, String, PromptMethod, NormalizationMode)> {
    let mut out = Vec::new();
    for t in &run.config.topics {
        for f in &run.config.families {
            for m in &run.prompt_methods {
                for &n in &run.config.normalizations {
                    out.push((t.clone(), f.clone(), m.clone(), n));
                }
            }
        }
    }
    out
}

pub fn measure(run: &Run) -> Result<()> {
    let mut ws = Workspace::new(&run.out_dir);
    for (t, f, m, n) in cells(run) {
        let doc: RepresentationDoc = ws.read_json(&representation_path(&t, &f, &m, n), "represent")?;
        let (distances, exclusions) = topic_distance_matrix(&doc.representation)
            .with_context(|| cell(&t, &f, &m, n))?;
        let rankings = similarity_rankings(&distances)?;
        ws.write_json(
            &measure_path(&t, &f, &m, n),
            &MeasureDoc {
                topic: t.clone(),
                family: f.clone(),
                method: m.to_string(),
                normalization: n,
                distances,
                exclusions,
                rankings,
            },
        )?;
    }
    ws.commit("measure", &run.config_sha256, run.config.seed)
}

/// A ground truth restricted to the run's sources.
pub struct Truth {
    pub name: String,
    pub outlets: Vec<String>,
    pub rankings: Vec<SimilarityRanking>,
}

pub fn load_truths(run: &Run, ws: &mut Workspace) -> Result<Vec<Truth>> {
    let mut out = Vec::new();
    for spec in &run.config.ground_truth {
        let path = run.resolve(&spec.path);
        ws.input(&format!("ground_truth:{}", spec.path), &path)?;
        let gt = match spec.kind {
            GroundTruthKind::Survey => {
                let table = SurveyTable::load(&path, spec.baseline.as_deref())?;
                GroundTruth::Survey(normalize_survey(&table)?)
            }
            GroundTruthKind::Leaning => GroundTruth::Leaning(load_leanings(&path)?),
        };
        let (restricted, _, missing) = gt.restrict(&run.config.sources);
        let mut outlets = restricted.outlets();
        outlets.sort();
        ensure!(
            outlets.len() >= 3,
            "ground truth {} covers only {} of the configured sources (missing {:?})",
            spec.name,
            outlets.len(),
            missing
        );
        out.push(Truth {
            name: spec.name.clone(),
            rankings: ground_truth_rankings(&restricted)?,
            outlets,
        });
    }
    Ok(out)
}

fn restrict_matrix(dm: &DistanceMatrix, keep: &[String]) -> Result<DistanceMatrix, MeasureError> {
    let idx: Vec<usize> = keep
        .iter()
        .map(|s| {
            dm.index(s).ok_or_else(|| MeasureError::MissingSource {
                outlet: s.clone(),
                prompt_id: "<topic>".into(),
            })
        })
        .collect::<Result<_, _>>()?;
    DistanceMatrix::from_fn(keep.to_vec(), |i, j| Ok(dm.values[idx[i]][idx[j]]))
}

fn restrict_representation(rep: &TopicRepresentation, keep: &[String]) -> TopicRepresentation {
    let matrices = rep
        .matrices
        .iter()
        .map(|m| FramingMatrix {
            prompt_id: m.prompt_id.clone(),
            vocabulary: m.vocabulary.clone(),
            rows: m
                .rows
                .iter()
                .filter(|(s, _)| keep.contains(s))
                .map(|(s, r)| (s.clone(), r.clone()))
                .collect(),
            floored: m
                .floored
                .iter()
                .filter(|(s, _)| keep.contains(s))
                .map(|(s, r)| (s.clone(), r.clone()))
                .collect(),
        })
        .collect();
    TopicRepresentation::new(rep.topic.clone(), matrices)
}

/// Agreement between predicted distances and a ground truth over their
/// shared outlets.
pub fn compare(dm: &DistanceMatrix, truth: &Truth) -> Result<AgreementReport, MeasureError> {
    let sub = restrict_matrix(dm, &truth.outlets)?;
    agreement(&similarity_rankings(&sub)?, &truth.rankings)
}

pub fn eval(run: &Run) -> Result<()> {
    let mut ws = Workspace::new(&run.out_dir);
    let truths = load_truths(run, &mut ws)?;
    ensure!(!truths.is_empty(), "no ground truth configured");
    let mut prompt_cache: BTreeMap<String, Vec<MaskedPrompt>> = BTreeMap::new();
    for (t, f, m, n) in cells(run) {
        let mdoc: MeasureDoc = ws.read_json(&measure_path(&t, &f, &m, n), "measure")?;
        let rdoc: RepresentationDoc =
            ws.read_json(&representation_path(&t, &f, &m, n), "represent")?;
        let prel = prompts_path(&t, &m);
        if !prompt_cache.contains_key(&prel) {
            let path = ws.require(&prel, "prompts")?;
            ws.input(&prel, &path)?;
            prompt_cache.insert(prel.clone(), load_prompts(&path)?);
        }
        let prompts = &prompt_cache[&prel];
        for truth in &truths {
            let (agreement, error) = match compare(&mdoc.distances, truth) {
                Ok(a) => (Some(a), None),
                Err(e) => {
                    log::warn!("{}/{}: {e}", cell(&t, &f, &m, n), truth.name);
                    (None, Some(e.to_string()))
                }
            };
            let rep = restrict_representation(&rdoc.representation, &truth.outlets);
            let instances = instance_level_agreement(&rep, &truth.rankings)?;
            let hist = histogram(&instances.records, run.config.histogram_bins);
            let extremes = if instances.records.is_empty() {
                None
            } else {
                Some(extreme_instances(
                    &instances.records,
                    run.config.extremes,
                    &rep,
                    prompts,
                    run.config.k,
                )?)
            };
            ws.write_json(
                &eval_path(&t, &f, &m, n, &truth.name),
                &EvalDoc {
                    topic: t.clone(),
                    family: f.clone(),
                    method: m.to_string(),
                    normalization: n,
                    ground_truth: truth.name.clone(),
                    outlets: truth.outlets.clone(),
                    agreement,
                    error,
                    instances,
                    histogram: hist,
                    extremes,
                },
            )?;
        }
    }
    ws.commit("eval", &run.config_sha256, run.config.seed)
}

pub fn cluster(run: &Run) -> Result<()> {
    let mut ws = Workspace::new(&run.out_dir);
    for (t, f, m, n) in cells(run) {
        let mdoc: MeasureDoc = ws.read_json(&measure_path(&t, &f, &m, n), "measure")?;
        let dendrogram = agglomerative_cluster(&mdoc.distances)?;
        let tree = dendrogram.tree();
        ws.write_json(
            &cluster_path(&t, &f, &m, n),
            &ClusterDoc {
                topic: t.clone(),
                family: f.clone(),
                method: m.to_string(),
                normalization: n,
                dendrogram,
                tree,
            },
        )?;
    }
    ws.commit("cluster", &run.config_sha256, run.config.seed)
}

pub fn baseline(run: &Run) -> Result<()> {
    let mut ws = Workspace::new(&run.out_dir);
    if run.baselines().is_empty() {
        log::info!("no baseline methods selected");
        return Ok(());
    }
    let truths = load_truths(run, &mut ws)?;
    let train = read_instances(&mut ws, INSTANCES_TRAIN)?;
    let dev = read_instances(&mut ws, INSTANCES_DEV)?;
    let needs_scorer = run
        .baselines()
        .iter()
        .any(|m| matches!(m, Method::LmC | Method::LmM));
    let scorer = if needs_scorer {
        Some(build_scorer(run, &mut ws)?)
    } else {
        None
    };
    for topic in &run.config.topics {
        let dev_t = for_topic(run, &dev, topic);
        let mut all_t = for_topic(run, &train, topic);
        all_t.extend(dev_t.iter().cloned());
        ensure!(!dev_t.is_empty(), "topic {topic} has no dev instances");
        for &method in run.baselines() {
            let families: Vec<Option<&String>> = match method {
                Method::Tfidf | Method::Lda => vec![None],
                Method::LmC | Method::LmM => run.config.families.iter().map(Some).collect(),
            };
            for family in families {
                let embeddings = match method {
                    Method::Tfidf => {
                        let model = TfidfModel::fit(
                            all_t.iter().map(|i| i.text.as_str()).collect::<Vec<_>>(),
                        )?;
                        ws.write_json(&format!("baseline/{topic}/models/tfidf.json"), &model)?;
                        tfidf_outlet_embeddings(&model, &dev_t)?
                    }
                    Method::Lda => {
                        let model =
                            LdaModel::fit(all_t.iter().map(|i| i.text.as_str()), &run.config.lda_config())?;
                        ws.write_json(&format!("baseline/{topic}/models/lda.json"), &model)?;
                        lda_outlet_embeddings(&model, &dev_t)?
                    }
                    Method::LmC | Method::LmM => lm_embed_outlets(
                        &dev_t,
                        method,
                        scorer.as_deref().expect("scorer built for LM baselines"),
                        family.expect("LM baselines carry a family"),
                        run.config.max_in_flight,
                    )?,
                };
                let have: BTreeSet<&str> = embeddings.iter().map(|e| e.source.as_str()).collect();
                if let Some(s) = run.config.sources.iter().find(|s| !have.contains(s.as_str())) {
                    bail!("{topic}/{method}: source {s} has no dev instances to embed");
                }
                let (distances, rankings) = baseline_rankings(&embeddings)?;
                let agreement = truths
                    .iter()
                    .map(|truth| {
                        let a = match compare(&distances, truth) {
                            Ok(a) => BaselineAgreement {
                                agreement: Some(a),
                                error: None,
                            },
                            Err(e) => BaselineAgreement {
                                agreement: None,
                                error: Some(e.to_string()),
                            },
                        };
                        (truth.name.clone(), a)
                    })
                    .collect();
                ws.write_json(
                    &baseline_path(topic, method, family.map(String::as_str)),
                    &BaselineDoc {
                        topic: topic.clone(),
                        method,
                        family: family.cloned(),
                        embeddings,
                        distances,
                        rankings,
                        agreement,
                    },
                )?;
            }
        }
    }
    ws.commit("baseline", &run.config_sha256, run.config.seed)
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_line(fields: &[String]) -> String {
    let mut line = fields
        .iter()
        .map(|f| {
            if f.contains([',', '"', '\n']) {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.clone()
            }
        })
        .collect::<Vec<_>>()
        .join(",");
    line.push('\n');
    line
}

/// Summary tables over every evaluated cell and baseline.
pub fn report(run: &Run) -> Result<()> {
    let mut ws = Workspace::new(&run.out_dir);
    let gts: Vec<String> = run.config.ground_truth.iter().map(|g| g.name.clone()).collect();

    let mut by_topic = csv_line(&[
        "topic", "family", "method", "normalization", "ground_truth", "mean_tau", "std_tau",
        "undefined", "instances",
    ].map(String::from));
    let mut summary = csv_line(&[
        "family", "method", "normalization", "ground_truth", "topics", "mean_tau", "std_tau",
    ].map(String::from));
    for f in &run.config.families {
        for m in &run.prompt_methods {
            for &n in &run.config.normalizations {
                for gt in &gts {
                    let mut taus = Vec::new();
                    for t in &run.config.topics {
                        let doc: EvalDoc = ws.read_json(&eval_path(t, f, m, n, gt), "eval")?;
                        let a = doc.agreement.as_ref();
                        if let Some(tau) = a.map(|a| a.mean_tau) {
                            taus.push(tau);
                        }
                        by_topic.push_str(&csv_line(&[
                            t.clone(),
                            f.clone(),
                            m.to_string(),
                            n.to_string(),
                            gt.clone(),
                            fmt_opt(a.map(|a| a.mean_tau)),
                            fmt_opt(a.map(|a| a.std_tau)),
                            a.map(|a| a.undefined.len()).unwrap_or(0).to_string(),
                            doc.instances.records.len().to_string(),
                        ]));
                    }
                    let (mean, std) = mean_std(&taus);
                    summary.push_str(&csv_line(&[
                        f.clone(),
                        m.to_string(),
                        n.to_string(),
                        gt.clone(),
                        taus.len().to_string(),
                        fmt_opt(mean),
                        fmt_opt(std),
                    ]));
                }
            }
        }
    }
    ws.write_bytes("report/by_topic.csv", by_topic.as_bytes())?;
    ws.write_bytes("report/agreement.csv", summary.as_bytes())?;

    let mut baselines = csv_line(&[
        "method", "family", "ground_truth", "topics", "mean_tau", "std_tau",
    ].map(String::from));
    for &method in run.baselines() {
        let families: Vec<Option<&String>> = match method {
            Method::Tfidf | Method::Lda => vec![None],
            Method::LmC | Method::LmM => run.config.families.iter().map(Some).collect(),
        };
        for family in families {
            let mut per_gt: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for t in &run.config.topics {
                let doc: BaselineDoc = ws.read_json(
                    &baseline_path(t, method, family.map(String::as_str)),
                    "baseline",
                )?;
                for gt in &gts {
                    let tau = doc
                        .agreement
                        .get(gt)
                        .and_then(|a| a.agreement.as_ref())
                        .map(|a| a.mean_tau);
                    per_gt.entry(gt).or_default().extend(tau);
                }
            }
            for gt in &gts {
                let taus = per_gt.get(gt.as_str()).cloned().unwrap_or_default();
                let (mean, std) = mean_std(&taus);
                baselines.push_str(&csv_line(&[
                    method.to_string(),
                    family.cloned().unwrap_or_default(),
                    gt.clone(),
                    taus.len().to_string(),
                    fmt_opt(mean),
                    fmt_opt(std),
                ]));
            }
        }
    }
    ws.write_bytes("report/baselines.csv", baselines.as_bytes())?;
    ws.commit("report", &run.config_sha256, run.config.seed)
}

/// Every stage in order. Ingest and baselines are skipped when the config
/// supplies fixed prompts and no corpus.
pub fn all(run: &Run) -> Result<()> {
    let has_corpus = run.config.corpus_dir.is_some();
    if has_corpus {
        ingest(run)?;
    }
    prompts(run)?;
    represent(run)?;
    measure(run)?;
    eval(run)?;
    cluster(run)?;
    if has_corpus {
        baseline(run)?;
    }
    report_with(run, has_corpus)
}

fn report_with(run: &Run, baselines: bool) -> Result<()> {
    if baselines || run.baselines().is_empty() {
        report(run)
    } else {
        let mut trimmed = run.clone();
        trimmed.config.baselines.clear();
        report(&trimmed)
    }
}
