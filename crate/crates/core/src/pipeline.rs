//! Subcommand bodies. Each reads its inputs from the configured paths and
//! writes its artifacts atomically into the output directory; `run_pipeline`
//! chains them.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{artifacts, PipelineConfig};
use crate::error::{Error, Result};
use crate::fsio;
use crate::icl::{
    check_icl_identity, render_sweep_csv, sweep_softmax_vs_linear, IdentitySummary, SweepRow,
};
use crate::metrics::{evaluate_run, EvalReport};
use crate::miner::{build_tfidf, mine_triplets, TripletBatch};
use crate::projector::{
    load_checkpoint, render_loss_csv, save_checkpoint, train_projector, MlpParams, TrainOutcome,
};
use crate::prompt::{
    assemble_prompt, EchoGenerator, ExternalGenerator, GeneratedAnswer, Generator, PromptBundle,
};
use crate::retrieval::{build_index, retrieve_top_k, RetrievalMode, RetrievalResult, VectorIndex};
use crate::store::{load_records_with_dims, MemoryStore, ScenarioRecord};

/// Process exit status for an error: 1 for usage or configuration
/// problems, 2 for data problems.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::MissingTemplateField(_) | Error::KTooLarge { .. } => 1,
        _ => 2,
    }
}

pub const EXIT_IDENTITY_FAILURE: u8 = 3;

pub fn load_store(cfg: &PipelineConfig) -> Result<MemoryStore> {
    let store = load_records_with_dims(&cfg.data.records, cfg.dims())?;
    if store.is_empty() {
        return Err(Error::Empty(format!(
            "{} holds no records",
            cfg.data.records.display()
        )));
    }
    Ok(store)
}

pub fn cmd_mine(cfg: &PipelineConfig) -> Result<TripletBatch> {
    let store = load_store(cfg)?;
    let model = build_tfidf(&store)?;
    let batch = mine_triplets(&store, &model, &cfg.miner)?;
    batch.save(&cfg.artifact(artifacts::TRIPLETS))?;
    Ok(batch)
}

pub fn cmd_train(cfg: &PipelineConfig) -> Result<TrainOutcome> {
    let store = load_store(cfg)?;
    let triples = TripletBatch::load(&cfg.artifact(artifacts::TRIPLETS))?;
    let outcome = train_projector(&store, &triples, &cfg.train)?;
    save_checkpoint(&outcome.params, &cfg.artifact(artifacts::CHECKPOINT))?;
    fsio::write_atomic(
        &cfg.artifact(artifacts::LOSS),
        render_loss_csv(&outcome.loss_history).as_bytes(),
    )?;
    Ok(outcome)
}

fn projector_for(cfg: &PipelineConfig) -> Result<Option<MlpParams>> {
    match cfg.retrieval.mode {
        RetrievalMode::Hybrid => load_checkpoint(&cfg.artifact(artifacts::CHECKPOINT)).map(Some),
        RetrievalMode::Visual => Ok(None),
    }
}

pub fn cmd_index(cfg: &PipelineConfig) -> Result<VectorIndex> {
    let store = load_store(cfg)?;
    let params = projector_for(cfg)?;
    let index = build_index(&store, params.as_ref(), cfg.retrieval.mode)?;
    index.save(&cfg.artifact(artifacts::INDEX))?;
    Ok(index)
}

fn load_index(cfg: &PipelineConfig) -> Result<VectorIndex> {
    let index = VectorIndex::load(&cfg.artifact(artifacts::INDEX), projector_for(cfg)?)?;
    if index.mode != cfg.retrieval.mode {
        return Err(Error::Config(format!(
            "index was built in {} mode but retrieval.mode is {}; rerun `index`",
            index.mode, cfg.retrieval.mode
        )));
    }
    Ok(index)
}

fn find<'a>(store: &'a MemoryStore, id: &str) -> Result<&'a ScenarioRecord> {
    store
        .by_id(id)
        .ok_or_else(|| Error::UnknownId(id.to_string()))
}

fn neighbors_of<'a>(
    cfg: &PipelineConfig,
    index: &VectorIndex,
    store: &'a MemoryStore,
    query: &ScenarioRecord,
    k: usize,
) -> Result<(RetrievalResult, Vec<&'a ScenarioRecord>)> {
    let exclude = cfg.retrieval.exclude_self.then_some(query.id.as_str());
    let result = retrieve_top_k(index, query, k, exclude)?;
    let records = result
        .neighbors
        .iter()
        .map(|n| find(store, &n.id))
        .collect::<Result<Vec<_>>>()?;
    Ok((result, records))
}

pub fn cmd_retrieve(
    cfg: &PipelineConfig,
    query_id: &str,
    k: Option<usize>,
) -> Result<RetrievalResult> {
    let store = load_store(cfg)?;
    let index = load_index(cfg)?;
    let query = find(&store, query_id)?;
    Ok(neighbors_of(cfg, &index, &store, query, k.unwrap_or(cfg.retrieval.k))?.0)
}

pub fn cmd_assemble(cfg: &PipelineConfig, query_id: &str) -> Result<PromptBundle> {
    let store = load_store(cfg)?;
    let index = load_index(cfg)?;
    let query = find(&store, query_id)?;
    let (_, neighbors) = neighbors_of(cfg, &index, &store, query, cfg.retrieval.k)?;
    assemble_prompt(
        query,
        &neighbors,
        &cfg.template()?,
        &cfg.layout(),
        &cfg.prompt.tasks,
    )
}

/// One generated answer, tagged with the query it answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerLine {
    pub id: String,
    pub action: String,
    pub justification: String,
    pub speed: f64,
    pub course: f64,
}

impl AnswerLine {
    pub fn new(id: &str, a: &GeneratedAnswer) -> Self {
        Self {
            id: id.to_string(),
            action: a.action_text.clone(),
            justification: a.justification_text.clone(),
            speed: a.pred_speed,
            course: a.pred_course,
        }
    }

    pub fn answer(&self) -> GeneratedAnswer {
        GeneratedAnswer {
            action_text: self.action.clone(),
            justification_text: self.justification.clone(),
            pred_speed: self.speed,
            pred_course: self.course,
        }
    }
}

pub fn render_answers(lines: &[AnswerLine]) -> String {
    lines
        .iter()
        .map(|l| serde_json::to_string(l).expect("answer serializes") + "\n")
        .collect()
}

pub fn parse_answers(text: &str) -> Result<Vec<AnswerLine>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Scores answers against the store records with the same ids.
pub fn evaluate_answers(
    store: &MemoryStore,
    lines: &[AnswerLine],
    sigmas: &[f64],
) -> Result<EvalReport> {
    let truths = lines
        .iter()
        .map(|l| find(store, &l.id))
        .collect::<Result<Vec<_>>>()?;
    let answers: Vec<GeneratedAnswer> = lines.iter().map(AnswerLine::answer).collect();
    evaluate_run(&answers, &truths, sigmas)
}

pub fn cmd_evaluate(cfg: &PipelineConfig, answers: &Path) -> Result<EvalReport> {
    let store = load_store(cfg)?;
    let lines = parse_answers(&fsio::read_to_string(answers)?)?;
    let report = evaluate_answers(&store, &lines, &cfg.eval.sigmas)?;
    report.save(&cfg.artifact(artifacts::REPORT))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IclOutcome {
    pub identity: IdentitySummary,
    pub sweep: Vec<SweepRow>,
}

pub fn cmd_icl_verify(cfg: &PipelineConfig) -> Result<IclOutcome> {
    let identity = check_icl_identity(&cfg.icl.identity())?;
    let sweep = sweep_softmax_vs_linear(&cfg.icl.sweep())?;
    fsio::write_atomic(
        &cfg.artifact(artifacts::SWEEP),
        render_sweep_csv(&sweep).as_bytes(),
    )?;
    fsio::write_atomic(
        &cfg.artifact(artifacts::IDENTITY),
        identity.render().as_bytes(),
    )?;
    Ok(IclOutcome { identity, sweep })
}

/// Answers every query with a uniformly drawn record's annotations (never
/// the query itself when self-exclusion is on).
pub fn random_answers(
    store: &MemoryStore,
    seed: u64,
    exclude_self: bool,
) -> Result<Vec<AnswerLine>> {
    let n = store.len();
    if exclude_self && n < 2 {
        return Err(Error::Empty(
            "random baseline needs at least two records".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(store
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let j = if exclude_self {
                let j = rng.random_range(0..n - 1);
                if j >= i {
                    j + 1
                } else {
                    j
                }
            } else {
                rng.random_range(0..n)
            };
            let r = &store.records()[j];
            AnswerLine {
                id: q.id.clone(),
                action: r.action_text.clone(),
                justification: r.justification_text.clone(),
                speed: r.target_speed,
                course: r.target_course,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub triplets: usize,
    pub final_loss: Option<f64>,
    pub report: EvalReport,
    pub baseline: EvalReport,
}

pub fn render_summary(o: &PipelineOutcome) -> String {
    let mut s = format!("triplets: {}\n", o.triplets);
    if let Some(l) = o.final_loss {
        s.push_str(&format!("final training loss: {l:.6}\n"));
    }
    s.push_str("\nretrieval-augmented answers\n");
    s.push_str(&o.report.render_table());
    s.push_str("\nrandom-answer baseline\n");
    s.push_str(&o.baseline.render_table());
    s
}

/// mine → train → index → leave-one-out retrieve / assemble / generate →
/// evaluate, plus the random-answer baseline.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let store = load_store(cfg)?;
    let (triplets, final_loss) = match cfg.retrieval.mode {
        RetrievalMode::Hybrid => {
            let batch = cmd_mine(cfg)?;
            let outcome = cmd_train(cfg)?;
            (batch.len(), outcome.loss_history.last().copied())
        }
        RetrievalMode::Visual => (0, None),
    };
    cmd_index(cfg)?;
    let index = load_index(cfg)?;
    let template = cfg.template()?;
    let layout = cfg.layout();
    let generator: Box<dyn Generator> = match &cfg.generator {
        Some(endpoint) => Box::new(ExternalGenerator {
            endpoint: endpoint.clone(),
        }),
        None => Box::new(EchoGenerator),
    };

    let mut answers = Vec::with_capacity(store.len());
    for query in store.iter() {
        let (_, neighbors) = neighbors_of(cfg, &index, &store, query, cfg.retrieval.k)?;
        let bundle = assemble_prompt(query, &neighbors, &template, &layout, &cfg.prompt.tasks)?;
        let answer = generator.generate(&bundle, &neighbors)?;
        answers.push(AnswerLine::new(&query.id, &answer));
    }
    fsio::write_atomic(
        &cfg.artifact(artifacts::ANSWERS),
        render_answers(&answers).as_bytes(),
    )?;
    let report = evaluate_answers(&store, &answers, &cfg.eval.sigmas)?;
    report.save(&cfg.artifact(artifacts::REPORT))?;

    let baseline_answers =
        random_answers(&store, cfg.eval.baseline_seed, cfg.retrieval.exclude_self)?;
    fsio::write_atomic(
        &cfg.artifact(artifacts::BASELINE_ANSWERS),
        render_answers(&baseline_answers).as_bytes(),
    )?;
    let baseline = evaluate_answers(&store, &baseline_answers, &cfg.eval.sigmas)?;
    baseline.save(&cfg.artifact(artifacts::BASELINE_REPORT))?;

    let outcome = PipelineOutcome {
        triplets,
        final_loss,
        report,
        baseline,
    };
    fsio::write_atomic(
        &cfg.artifact(artifacts::SUMMARY),
        render_summary(&outcome).as_bytes(),
    )?;
    Ok(outcome)
}
