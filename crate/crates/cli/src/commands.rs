use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use bactint::casestudy::{
    self, AssociationNetwork, CachedSource, LitSenseClient, LocalStore, SentenceSource, ValidationOptions,
};
use bactint::classify::{fit_baseline, repeated_runs, FitOptions, RemoteScorer, Scorer, Threshold};
use bactint::corpus::{self, load_corpus, AnnotatedDocument, Corpus, CorpusKind};
use bactint::eval::{aggregate, evaluate_instances, render_run_table, split};
use bactint::harmonize::{harmonize_descriptor, merge_corpora, write_harmonized, DropReport, SourceCorpusDescriptor};
use bactint::ner::{Gazetteer, RemoteTagger, Tagger};
use bactint::pipeline::{
    ablation_report, extract as run_pipeline, render_ablation, write_predictions, Components, Oracles, PipelineInput,
    PipelineMode, PlacedSentence,
};
use bactint::segment::{project_corpus, AbbreviationGuard, LineSegmenter, RuleSegmenter, Segmenter};
use bactint::transform::{make_dataset, make_instances, read_records, write_records, LabeledInstance};
use bactint::{synthetic, BaselineModel, Rational};

use crate::config::{ConfigError, Settings};

fn rule_segmenter(settings: &Settings) -> Result<RuleSegmenter> {
    let guard = match &settings.paths.abbreviations {
        Some(p) => AbbreviationGuard::from_file(p)?,
        None => AbbreviationGuard::default(),
    };
    Ok(RuleSegmenter::new(guard))
}

fn tagger(settings: &Settings) -> Result<Box<dyn Tagger>> {
    if let Some(url) = &settings.ner_endpoint {
        return Ok(Box::new(RemoteTagger::new(url, settings.timeout)));
    }
    Ok(Box::new(match &settings.paths.gazetteer {
        Some(p) => Gazetteer::from_file(p)?,
        None => Gazetteer::default(),
    }))
}

fn load_model(path: &Path) -> Result<BaselineModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{}: not a baseline model", path.display()))
}

fn scorer(settings: &Settings) -> Result<Box<dyn Scorer<f64>>> {
    if let Some(url) = &settings.score_endpoint {
        return Ok(Box::new(RemoteScorer::new(url, settings.timeout)));
    }
    Ok(Box::new(match &settings.paths.model {
        Some(p) => load_model(p)?,
        None => BaselineModel::default(),
    }))
}

fn threshold(settings: &Settings) -> Result<Threshold<f64>> {
    Ok(Threshold::new(settings.threshold)?)
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn corpus_validate(dir: &Path) -> Result<bool> {
    let summary = corpus::validate_dir(dir)?;
    println!(
        "{}: {} documents, {} entities, {} relations, {} invalid",
        dir.display(),
        summary.documents,
        summary.entities,
        summary.relations,
        summary.errors.len()
    );
    for (name, err) in &summary.errors {
        println!("  {name}: {err}");
    }
    Ok(summary.errors.is_empty())
}

pub fn harmonize(settings: &Settings, out: &Path, descriptors: &[PathBuf]) -> Result<bool> {
    let segmenter = rule_segmenter(settings)?;
    let mut parts = Vec::new();
    let mut report = DropReport::default();
    for path in descriptors {
        let descriptor = SourceCorpusDescriptor::from_file(path)?;
        let (corpus, drops) = harmonize_descriptor(&descriptor, &segmenter)?;
        report.merge(&drops);
        parts.push(corpus);
    }
    let merged = merge_corpora(parts)?;
    write_harmonized(out, &merged.corpus, &report)?;
    for (source, d) in &report.per_source {
        println!(
            "{source}: {} sentences, {} of {} relations kept ({} cross-sentence, {} orphaned), {} straddling entities",
            d.sentences, d.kept_relations, d.source_relations, d.cross_sentence, d.orphaned, d.straddling_entities
        );
    }
    println!("wrote {} sentences to {}", merged.corpus.len(), out.display());
    Ok(true)
}

/// Sentences from a BRAT directory. A segmenter marks the directory as
/// passage-level and splits it first.
fn sentence_corpus(dir: &Path, segmenter: Option<&dyn Segmenter>) -> Result<Corpus> {
    match segmenter {
        None => Ok(load_corpus(dir, CorpusKind::SentenceLevel)?),
        Some(seg) => {
            let Corpus::Documents(docs) = load_corpus(dir, CorpusKind::PassageLevel)? else { unreachable!() };
            let projection = project_corpus(&docs, seg);
            let d = projection.drops;
            if d.straddling_entities + d.dropped_relations() > 0 {
                log::warn!(
                    "segmentation dropped {} entities, {} cross-sentence and {} orphaned relations",
                    d.straddling_entities,
                    d.cross_sentence_relations,
                    d.orphaned_relations
                );
            }
            Ok(Corpus::Sentences(projection.sentences))
        }
    }
}

pub fn dataset_build(settings: &Settings, corpus: &Path, out: &Path, rule: Option<bool>) -> Result<bool> {
    let rules;
    let seg: Option<&dyn Segmenter> = match rule {
        None => None,
        Some(false) => Some(&LineSegmenter),
        Some(true) => {
            rules = rule_segmenter(settings)?;
            Some(&rules)
        }
    };
    let instances = make_dataset(&sentence_corpus(corpus, seg)?)?;
    let mut w = open_out(Some(out))?;
    write_records(&mut w, &instances)?;
    w.flush()?;
    let positives = instances.iter().filter(|i| i.label).count();
    println!("{} instances ({positives} positive) written to {}", instances.len(), out.display());
    Ok(true)
}

fn load_instances(data: Option<&Path>, synthetic_n: Option<usize>, seed: u64) -> Result<Vec<LabeledInstance>> {
    if let Some(n) = synthetic_n {
        return Ok(make_instances(&synthetic::template_corpus(n, seed))?);
    }
    let path = data.context("no dataset given")?;
    if path.is_dir() {
        return Ok(make_dataset(&load_corpus(path, CorpusKind::SentenceLevel)?)?);
    }
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_records(BufReader::new(file))?.into_iter().map(|r| r.into_instance()).collect())
}

pub fn baseline_train(
    settings: &Settings,
    data: Option<&Path>,
    synthetic_n: Option<usize>,
    save: Option<&Path>,
) -> Result<bool> {
    let instances = load_instances(data, synthetic_n, settings.seed)?;
    let opts = FitOptions::default();
    let report = repeated_runs::<f64>(&instances, settings.train_fraction, settings.seed, settings.runs, &opts)?;
    print!("{}", render_run_table(&[("Baseline".to_string(), report.aggregate)]));
    if let Some(path) = save {
        let model = fit_baseline::<f64>(&instances, &FitOptions { seed: settings.seed, ..opts })?;
        fs::write(path, serde_json::to_string_pretty(&model)?)
            .with_context(|| format!("writing {}", path.display()))?;
        println!("model fitted on all {} instances saved to {}", instances.len(), path.display());
    }
    Ok(true)
}

pub fn baseline_eval(
    settings: &Settings,
    data: Option<&Path>,
    synthetic_n: Option<usize>,
    model: &Path,
) -> Result<bool> {
    let instances = load_instances(data, synthetic_n, settings.seed)?;
    let model = load_model(model)?;
    let threshold = threshold(settings)?;
    let mut runs = Vec::with_capacity(settings.runs);
    for i in 0..settings.runs as u64 {
        let (_, test) = split(&instances, settings.train_fraction, settings.seed.wrapping_add(i))?;
        let predicted = test
            .iter()
            .map(|t| model.score_text(&t.tagged_text).map(|s| threshold.accepts(s)))
            .collect::<Result<Vec<_>, _>>()?;
        let gold: Vec<bool> = test.iter().map(|t| t.label).collect();
        runs.push(evaluate_instances::<f64>(&predicted, &gold)?);
    }
    print!("{}", render_run_table(&[("Baseline".to_string(), aggregate(&runs)?)]));
    Ok(true)
}

fn text_files(input: &Path) -> Result<Vec<(String, String)>> {
    let paths: Vec<PathBuf> = if input.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(input)?
            .map(|e| e.map(|e| e.path()))
            .collect::<io::Result<Vec<_>>>()?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e == "txt"))
            .collect();
        v.sort();
        v
    } else {
        vec![input.to_path_buf()]
    };
    paths
        .into_iter()
        .map(|p| {
            let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((id, text))
        })
        .collect()
}

/// Pipeline inputs for `mode`. Sentence input is one sentence per line.
fn inputs(mode: PipelineMode, input: &Path) -> Result<Vec<PipelineInput>> {
    match mode {
        PipelineMode::SsNerIe => {
            Ok(text_files(input)?.into_iter().map(|(doc_id, text)| PipelineInput::Passage { doc_id, text }).collect())
        }
        PipelineMode::NerIe => Ok(text_files(input)?
            .into_iter()
            .map(|(doc_id, text)| {
                let sentences = LineSegmenter
                    .segment(&text)
                    .into_iter()
                    .map(|b| PlacedSentence {
                        offset: b.span.start,
                        text: corpus::slice_chars(&text, b.span).unwrap_or_default().to_string(),
                    })
                    .collect();
                PipelineInput::Sentences { doc_id, sentences }
            })
            .collect()),
        PipelineMode::OnlyIe => {
            if !input.is_dir() {
                bail!("only-ie needs a BRAT directory with gold entities");
            }
            let Corpus::Documents(docs) = load_corpus(input, CorpusKind::PassageLevel)? else { unreachable!() };
            Ok(docs.iter().map(|d| PipelineInput::from_gold(d, mode, &LineSegmenter)).collect())
        }
    }
}

pub fn extract(settings: &Settings, mode: PipelineMode, input: &Path, out: Option<&Path>) -> Result<bool> {
    let segmenter = rule_segmenter(settings)?;
    let tagger = tagger(settings)?;
    let scorer = scorer(settings)?;
    let c = Components {
        segmenter: &segmenter,
        tagger: tagger.as_ref(),
        scorer: scorer.as_ref(),
        threshold: threshold(settings)?,
    };
    let mut w = open_out(out)?;
    let mut total = 0;
    for doc in inputs(mode, input)? {
        let predictions = run_pipeline(&doc, &c)?;
        total += predictions.len();
        write_predictions(&mut w, &predictions)?;
    }
    w.flush()?;
    log::info!("{total} interactions predicted");
    Ok(true)
}

#[derive(Debug, Clone, Copy)]
pub struct OracleChoice {
    pub ss: bool,
    pub ner: bool,
    pub ie: bool,
}

pub fn ablate(settings: &Settings, corpus: &Path, oracle: OracleChoice) -> Result<bool> {
    let Corpus::Documents(docs) = load_corpus(corpus, CorpusKind::PassageLevel)? else { unreachable!() };
    let docs: Vec<AnnotatedDocument> = docs;
    let oracles = Oracles::new(&docs, &LineSegmenter)?;
    let segmenter = rule_segmenter(settings)?;
    let tagger = tagger(settings)?;
    let scorer = scorer(settings)?;
    let c = Components {
        segmenter: if oracle.ss { &oracles.segmenter } else { &segmenter },
        tagger: if oracle.ner { &oracles.tagger } else { tagger.as_ref() },
        scorer: if oracle.ie { &oracles.scorer } else { scorer.as_ref() },
        threshold: threshold(settings)?,
    };
    let rows = ablation_report(&docs, &LineSegmenter, &c)?;
    print!("{}", render_ablation(&rows));
    Ok(true)
}

pub fn casestudy_run(settings: &Settings, network: &Path, store: Option<&Path>, json: Option<&Path>) -> Result<bool> {
    let network = AssociationNetwork::from_file(network)?;
    let base: Box<dyn SentenceSource> = match store {
        Some(dir) => Box::new(LocalStore::new(dir)),
        None if settings.online => {
            let endpoint = settings.search_endpoint.as_deref().unwrap_or(casestudy::DEFAULT_SEARCH_ENDPOINT);
            Box::new(LitSenseClient::new(endpoint, settings.timeout))
        }
        None => {
            return Err(ConfigError::Invalid {
                origin: "command line".into(),
                message: "no sentence source: pass --offline-store, or enable online search".into(),
            }
            .into())
        }
    };
    let source: Box<dyn SentenceSource> = match &settings.paths.cache_dir {
        Some(dir) => Box::new(CachedSource::new(base, dir)),
        None => base,
    };
    let segmenter = rule_segmenter(settings)?;
    let tagger = tagger(settings)?;
    let scorer = scorer(settings)?;
    let c = Components {
        segmenter: &segmenter,
        tagger: tagger.as_ref(),
        scorer: scorer.as_ref(),
        threshold: threshold(settings)?,
    };
    let opts = ValidationOptions { fetch_cap: settings.fetch_cap, workers: settings.workers };
    let report = casestudy::validate_network(&network, &c, source.as_ref(), opts);
    print!("{}", report.render());
    if let Some(path) = json {
        fs::write(path, report.to_json()).with_context(|| format!("writing {}", path.display()))?;
    }
    if report.failed_edges > 0 {
        log::warn!("{} of {} edges failed", report.failed_edges, report.total_edges);
    }
    Ok(report.total_edges == 0 || report.failed_edges < report.total_edges)
}

pub fn casestudy_audit(path: &Path) -> Result<bool> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let report: bactint::ValidationReport =
        serde_json::from_str(&text).with_context(|| format!("{}: not a case study report", path.display()))?;
    let flags = casestudy::flags_from_report(&report)?;
    let summary = casestudy::precision_audit::<f64, Rational>(&report, &flags)?;
    let p = summary.precision;
    println!("precision: {}/{} = {:.3}", summary.correct, summary.total, *p.numer() as f64 / *p.denom() as f64);
    println!("recall: unmeasured");
    if !summary.errors.is_empty() {
        print!("{}", casestudy::render_error_examples(&summary.errors));
    }
    Ok(true)
}
