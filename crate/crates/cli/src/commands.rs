use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use log::info;
use serde::Serialize;

use eventarg::augmentation::{augment as augment_context, neighbors, Neighborhood, TaggedRole};
use eventarg::corpus::{load_corpus, write_corpus, RoleAssignment};
use eventarg::evaluation::{consistency_report, gold_map, score, MatchMode, Task};
use eventarg::inference::{infer_corpus, prediction_records, read_predictions, ModelExtractor};
use eventarg::model::{checkpoint, train as train_model, ExtractorModel, Vocabulary};
use eventarg::ontology::{load_ontology, write_ontology};
use eventarg::synth::generate;

use crate::config::RunConfig;
use crate::{AugmentArgs, DataError, EvaluateArgs, PredictArgs, SynthArgs, TrainArgs, UsageError};

fn require(path: &Option<PathBuf>, flag: &str, key: &str) -> anyhow::Result<PathBuf> {
    path.clone()
        .ok_or_else(|| UsageError(format!("missing {flag} (or paths.{key} in the config)")).into())
}

fn override_with<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn override_path(slot: &mut Option<PathBuf>, value: Option<PathBuf>) {
    if value.is_some() {
        *slot = value;
    }
}

fn data_error(e: eventarg::Error) -> anyhow::Error {
    DataError(e.to_string()).into()
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> anyhow::Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n")?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

pub fn synth(config: &mut RunConfig, args: SynthArgs) -> anyhow::Result<()> {
    override_path(&mut config.paths.synth_dir, args.out);
    override_with(&mut config.synth.seed, args.seed);
    override_with(&mut config.synth.num_docs, args.num_docs);
    override_with(&mut config.synth.ambiguity_rate, args.ambiguity_rate);
    let dir = require(&config.paths.synth_dir, "--out", "synth_dir")?;

    let corpus = generate(&config.synth).map_err(data_error)?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_corpus(dir.join("corpus.jsonl"), &corpus.documents)?;
    write_ontology(dir.join("ontology.json"), &corpus.ontology)?;
    write_jsonl(&dir.join("answer_key.jsonl"), &corpus.answer_key)?;
    let flagged = corpus.answer_key.iter().filter(|e| e.requires_neighbor).count();
    info!(
        "wrote {} documents, {} events ({flagged} require a neighbor) to {}",
        corpus.documents.len(),
        corpus.answer_key.len(),
        dir.display()
    );
    Ok(())
}

pub fn train(config: &mut RunConfig, args: TrainArgs) -> anyhow::Result<()> {
    override_path(&mut config.paths.corpus, args.corpus);
    override_path(&mut config.paths.ontology, args.ontology);
    override_path(&mut config.paths.checkpoint, args.checkpoint);
    override_path(&mut config.paths.training_log, args.log);
    let t = &mut config.training;
    override_with(&mut t.epochs, args.epochs);
    override_with(&mut t.learning_rate, args.learning_rate);
    override_with(&mut t.alpha, args.alpha);
    override_with(&mut t.beta, args.beta);
    override_with(&mut t.seed, args.seed);
    let corpus_path = require(&config.paths.corpus, "--corpus", "corpus")?;
    let ontology_path = require(&config.paths.ontology, "--ontology", "ontology")?;
    let checkpoint_path = require(&config.paths.checkpoint, "--checkpoint", "checkpoint")?;
    config.training.validate().map_err(data_error)?;
    config.architecture.validate().map_err(data_error)?;

    let docs = load_corpus(&corpus_path)?;
    let ontology = load_ontology(&ontology_path)?;
    let vocab = Vocabulary::build(&docs, &ontology);
    let model = ExtractorModel::new(config.architecture, vocab, config.training.seed);
    info!("training {} parameters on {} documents", model.num_params(), docs.len());
    let run = train_model(model, &docs, &ontology, &config.training)?;
    if run.skipped_events > 0 {
        info!("skipped {} events of unknown type", run.skipped_events);
    }
    if let Some(last) = run.reports.last() {
        info!("final step {}: loss {:.4}", last.step, last.loss_total);
    }
    checkpoint::save(&run.model, &checkpoint_path)?;
    if let Some(log_path) = &config.paths.training_log {
        write_jsonl(log_path, &run.reports)?;
    }
    Ok(())
}

pub fn predict(config: &mut RunConfig, args: PredictArgs) -> anyhow::Result<()> {
    override_path(&mut config.paths.checkpoint, args.checkpoint);
    override_path(&mut config.paths.corpus, args.corpus);
    override_path(&mut config.paths.ontology, args.ontology);
    override_path(&mut config.paths.predictions, args.out);
    override_path(&mut config.paths.trace, args.trace);
    let inf = &mut config.inference;
    override_with(&mut inf.max_iterations, args.iterations);
    override_with(&mut inf.window, args.window);
    override_with(&mut inf.decode.beam_size, args.beam_size);
    let checkpoint_path = require(&config.paths.checkpoint, "--checkpoint", "checkpoint")?;
    let corpus_path = require(&config.paths.corpus, "--corpus", "corpus")?;
    let ontology_path = require(&config.paths.ontology, "--ontology", "ontology")?;
    let out = require(&config.paths.predictions, "--out", "predictions")?;
    config.inference.validate().map_err(data_error)?;
    if config.inference.decode.beam_size == 0 {
        return Err(DataError("beam_size must be at least 1".into()).into());
    }

    let model = checkpoint::load(&checkpoint_path)?;
    let docs = load_corpus(&corpus_path)?;
    let ontology = load_ontology(&ontology_path)?;
    let extractor = ModelExtractor {
        model: &model,
        decode: config.inference.decode,
    };
    let (preds, traces) = infer_corpus(&extractor, &docs, &ontology, &config.inference)?;
    write_jsonl(&out, prediction_records(&docs, &preds))?;
    if let Some(trace_path) = &config.paths.trace {
        write_jsonl(trace_path, &traces)?;
    }
    info!("predicted {} events in {} documents", preds.len(), docs.len());
    Ok(())
}

pub fn evaluate(config: &mut RunConfig, args: EvaluateArgs) -> anyhow::Result<()> {
    override_path(&mut config.paths.predictions, args.pred);
    override_path(&mut config.paths.corpus, args.gold);
    override_path(&mut config.paths.report, args.report);
    override_path(&mut config.paths.consistency, args.consistency);
    let pred_path = require(&config.paths.predictions, "--pred", "predictions")?;
    let gold_path = require(&config.paths.corpus, "--gold", "corpus")?;
    let report_path = require(&config.paths.report, "--report", "report")?;

    let docs = load_corpus(&gold_path)?;
    let file = File::open(&pred_path).with_context(|| format!("opening {}", pred_path.display()))?;
    let preds = read_predictions(BufReader::new(file))?;
    let report = score(&preds, &gold_map(&docs), &docs)?;
    write_json(&report_path, &report)?;
    if let Some(path) = &config.paths.consistency {
        write_json(path, &consistency_report(&preds, &docs, config.consistency_threshold))?;
    }

    println!("{:<16}{:>8}{:>8}{:>8}", "cell", "P", "R", "F1");
    for (task, t) in [(Task::Identification, "arg-i"), (Task::Classification, "arg-c")] {
        for (mode, m) in [(MatchMode::Head, "head"), (MatchMode::Coref, "coref")] {
            let c = report.cell(task, mode);
            println!(
                "{:<16}{:>8.2}{:>8.2}{:>8.2}",
                format!("{t} {m}"),
                100.0 * c.precision,
                100.0 * c.recall,
                100.0 * c.f1
            );
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct AugmentedRecord<'a> {
    doc_id: &'a str,
    event_id: &'a str,
    neighbors: Vec<String>,
    tokens: Vec<String>,
    tagged_roles: Vec<TaggedRole>,
}

pub fn augment(config: &mut RunConfig, args: AugmentArgs) -> anyhow::Result<()> {
    override_path(&mut config.paths.corpus, args.corpus);
    override_path(&mut config.paths.assignments, args.assignments);
    override_path(&mut config.paths.augmented, args.out);
    override_with(&mut config.inference.window, args.window);
    let corpus_path = require(&config.paths.corpus, "--corpus", "corpus")?;
    let out = require(&config.paths.augmented, "--out", "augmented")?;
    if config.inference.window == 0 {
        return Err(DataError("window must be positive".into()).into());
    }

    let docs = load_corpus(&corpus_path)?;
    let source = match &config.paths.assignments {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            read_predictions(BufReader::new(file))?
        }
        None => gold_map(&docs),
    };
    let mut records = Vec::new();
    for doc in &docs {
        let assigned: HashMap<String, Vec<RoleAssignment>> = doc
            .events
            .iter()
            .map(|e| {
                let key = eventarg::corpus::EventKey::new(&doc.doc_id, &e.event_id);
                (e.event_id.clone(), source.get(&key).cloned().unwrap_or_default())
            })
            .collect();
        for event in &doc.events {
            let hood: Neighborhood = neighbors(doc, &event.event_id, config.inference.window)?;
            let ctx = augment_context(doc, &event.event_id, &assigned, &hood)?;
            records.push(AugmentedRecord {
                doc_id: &doc.doc_id,
                event_id: &event.event_id,
                neighbors: hood.neighbor_ids,
                tokens: ctx.tokens,
                tagged_roles: ctx.tagged_roles,
            });
        }
    }
    write_jsonl(&out, &records)
}
