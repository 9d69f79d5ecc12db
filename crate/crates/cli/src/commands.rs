use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use log::info;

use actorgraph_core::analysis::{
    dbi, governor_label, pca_project, projection_svg, stance_scores, write_projection_csv,
    write_stance_csv, AnalysisError,
};
use actorgraph_core::hin::{EntityId, Hin, HinError, NodeKind, RelationKind};
use actorgraph_core::ingest::{
    community_class, labels_from_scores, load_features, load_graph, load_scores, split_scores,
    synth_hin, write_features, write_graph, write_scores, ExpertLabel, FeatureSource, IngestError,
    Part, SplitAssignment,
};
use actorgraph_core::model::{
    encode, load_checkpoint, save_checkpoint, stance_heads, ModelError, ModelParams,
};
use actorgraph_core::numkit::{Matrix, NumError};
use actorgraph_core::objectives::{LossCombination, ObjectiveError};
use actorgraph_core::trainer::{
    evaluate, gradcheck_full_loss, metrics_csv, train as fit, GradCheckSetup, TrainConfig,
    TrainError,
};
use actorgraph_core::vote::{
    check_votes, load_bills, load_vote_model, load_votes, majority_accuracy, save_vote_model,
    split_votes, synth_votes, train_vote_model, vote_accuracy, vote_inputs, write_bills,
    write_votes, BillFeatures, VoteError, VoteRecord, VoteSynthConfig,
};

use crate::config::{GroupBy, RunConfig};

/// Printed as `error: <module>: <message>` on one line.
#[derive(Debug)]
pub struct CliError {
    pub module: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(module: &'static str, message: impl ToString) -> Self {
        Self {
            module,
            message: message.to_string().replace('\n', " "),
        }
    }

    pub fn config(message: impl ToString) -> Self {
        Self::new("config", message)
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new("cli", format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error: {}: {}", self.module, self.message)
    }
}

impl From<HinError> for CliError {
    fn from(e: HinError) -> Self {
        Self::new("hin", e)
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Graph(g) => g.into(),
            other => Self::new("ingest", other),
        }
    }
}

impl From<NumError> for CliError {
    fn from(e: NumError) -> Self {
        Self::new("numkit", e)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Num(n) => n.into(),
            other => Self::new("model", other),
        }
    }
}

impl From<ObjectiveError> for CliError {
    fn from(e: ObjectiveError) -> Self {
        Self::new("objectives", e)
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        Self::new("analysis", e)
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Model(m) => m.into(),
            TrainError::Objective(o) => o.into(),
            TrainError::Num(n) => n.into(),
            TrainError::Analysis(a) => a.into(),
            other => Self::new("trainer", other),
        }
    }
}

impl From<VoteError> for CliError {
    fn from(e: VoteError) -> Self {
        Self::new("vote", e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn required(p: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    p.ok_or_else(|| {
        CliError::config(format!(
            "no {what} given; pass --data or set the {what} key"
        ))
    })
}

fn load_hin(cfg: &RunConfig) -> Result<Hin> {
    let nodes = required(cfg.nodes_path(), "nodes")?;
    let edges = required(cfg.edges_path(), "edges")?;
    let spec = cfg.features_spec().ok_or_else(|| {
        CliError::config("no features given; pass --data or set the features key")
    })?;
    let hin = load_graph(
        &nodes,
        &edges,
        &FeatureSource::parse(&spec, cfg.synthetic_dim)?,
    )?;
    if let Some(e) = hin.validate().into_iter().next() {
        return Err(e.into());
    }
    Ok(hin)
}

fn load_labels(cfg: &RunConfig, hin: &Hin) -> Result<(Vec<ExpertLabel>, SplitAssignment)> {
    let scores = load_scores(&required(cfg.scores_path(), "scores")?)?;
    if let Some(s) = scores.iter().find(|s| hin.node(s.entity).is_none()) {
        return Err(HinError::UnknownEntity(s.entity).into());
    }
    let labels = labels_from_scores(&scores, cfg.term_mode)?;
    let splits = split_scores(&labels, cfg.split, cfg.seed)?;
    Ok((labels, splits))
}

fn load_model(cfg: &RunConfig) -> Result<ModelParams> {
    let dir = cfg
        .model
        .clone()
        .ok_or_else(|| CliError::config("no model given; pass --model <dir>"))?;
    Ok(load_checkpoint(&dir)?)
}

/// Final-layer representations from `--model`, or from an `embeddings`
/// file when no model is given.
fn representations(cfg: &RunConfig, hin: &Hin) -> Result<Matrix> {
    if cfg.model.is_some() {
        let params = load_model(cfg)?;
        return Ok(encode(hin, &params)?.x_final);
    }
    match &cfg.embeddings {
        Some(p) => Ok(load_features(p, hin.node_count())?),
        None => Err(CliError::config(
            "no representations: pass --model or set the embeddings key",
        )),
    }
}

pub fn validate_graph(cfg: &RunConfig) -> Result<()> {
    let hin = load_hin(cfg)?;
    let mut s = String::from("item,count\n");
    for kind in NodeKind::ALL {
        let n = hin.nodes().iter().filter(|n| n.kind == kind).count();
        let _ = writeln!(s, "{kind},{n}");
    }
    for rel in RelationKind::ALL {
        let _ = writeln!(s, "{rel},{}", hin.edges(rel).len());
    }
    write_text(&cfg.out.join("graph_summary.csv"), &s)?;
    println!("ok: {} nodes, {} edges", hin.node_count(), hin.edge_count());
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let sc = cfg.synth_config();
    if sc.n_communities < 2 || !(0.0..0.5).contains(&sc.flip_prob) {
        return Err(CliError::config(
            "n_communities must be at least 2 and flip_prob in [0, 0.5)",
        ));
    }
    let g = synth_hin(&sc);
    write_graph(&g.hin, &cfg.out)?;
    write_scores(&cfg.out.join("scores.csv"), &g.scores)?;
    write_scores(&cfg.out.join("clean_scores.csv"), &g.clean_scores)?;
    let mut s = String::from("id,community\n");
    for (id, c) in g.community.iter().enumerate() {
        if let Some(c) = c {
            let _ = writeln!(s, "{id},{c}");
        }
    }
    write_text(&cfg.out.join("communities.csv"), &s)?;

    // Planted ideology: the community's liberal class, centred on neutral.
    let ideology: Vec<(EntityId, f64)> = g
        .community
        .iter()
        .enumerate()
        .filter(|&(id, _)| g.hin.kind(id) == NodeKind::Legislator)
        .filter_map(|(id, c)| c.map(|c| (id, community_class(c, sc.n_communities) as f64 - 2.0)))
        .collect();
    let (bills, votes) = synth_votes(
        &ideology,
        &VoteSynthConfig {
            seed: cfg.seed,
            ..cfg.vote_synth.clone()
        },
    );
    write_bills(&cfg.out.join("bills.csv"), &bills)?;
    write_votes(&cfg.out.join("votes.csv"), &votes)?;
    println!(
        "wrote {} nodes, {} edges, {} scores, {} votes on {} bills to {}",
        g.hin.node_count(),
        g.hin.edge_count(),
        g.scores.len(),
        votes.len(),
        bills.len(),
        cfg.out.display()
    );
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let hin = load_hin(cfg)?;
    let (labels, splits) = load_labels(cfg, &hin)?;
    let (params, history) = fit(&hin, &labels, &splits, &cfg.train_config())?;
    save_checkpoint(&params, &cfg.out.join("model"))?;
    write_text(&cfg.out.join("history.csv"), &history.to_csv())?;
    write_text(&cfg.out.join("training_log.csv"), &history.log_csv())?;
    let val = evaluate(&params, &hin, &labels, &splits, Part::Val)?;
    let test = evaluate(&params, &hin, &labels, &splits, Part::Test)?;
    write_text(
        &cfg.out.join("metrics.csv"),
        &metrics_csv(&[("val", &val), ("test", &test)]),
    )?;
    let best = history.best_epoch().map_or(0, |e| e.epoch);
    println!(
        "best epoch {best} of {}; test accuracy {:.4} (liberal {:.4}, conservative {:.4})",
        history.epochs.len(),
        test.combined.accuracy,
        test.liberal.accuracy,
        test.conservative.accuracy
    );
    Ok(())
}

pub fn eval(cfg: &RunConfig) -> Result<()> {
    let hin = load_hin(cfg)?;
    let (labels, splits) = load_labels(cfg, &hin)?;
    let params = load_model(cfg)?;
    let mut reports = Vec::new();
    for (name, part) in [
        ("train", Part::Train),
        ("val", Part::Val),
        ("test", Part::Test),
    ] {
        reports.push((name, evaluate(&params, &hin, &labels, &splits, part)?));
    }
    let rows: Vec<(&str, _)> = reports.iter().map(|(n, r)| (*n, r)).collect();
    write_text(&cfg.out.join("metrics.csv"), &metrics_csv(&rows))?;
    for (name, r) in &reports {
        println!(
            "{name}: accuracy {:.4} macro-F1 {:.4} micro-F1 {:.4}",
            r.combined.accuracy, r.combined.macro_f1, r.combined.micro_f1
        );
    }
    Ok(())
}

pub fn embed(cfg: &RunConfig) -> Result<()> {
    let hin = load_hin(cfg)?;
    let x = encode(&hin, &load_model(cfg)?)?.x_final;
    let path = cfg.out.join("embeddings.csv");
    write_features(&path, &x)?;
    println!(
        "wrote {} x {} representations to {}",
        x.rows(),
        x.cols(),
        path.display()
    );
    Ok(())
}

pub fn stance(cfg: &RunConfig) -> Result<()> {
    let hin = load_hin(cfg)?;
    let params = load_model(cfg)?;
    let x = encode(&hin, &params)?.x_final;
    let (l, c) = stance_heads(&x, &params)?;
    let scores = stance_scores(&l, &c, &hin.actor_ids());
    let path = cfg.out.join("stance.csv");
    write_stance_csv(&path, &hin, &scores)?;
    println!("wrote {} stance rows to {}", scores.len(), path.display());
    Ok(())
}

pub fn project(cfg: &RunConfig) -> Result<()> {
    let hin = load_hin(cfg)?;
    let (x, liberal) = match cfg.group_by {
        GroupBy::Party => (representations(cfg, &hin)?, None),
        GroupBy::Label => {
            let params = load_model(cfg)?;
            let x = encode(&hin, &params)?.x_final;
            let (l, _) = stance_heads(&x, &params)?;
            (x, Some(l))
        }
    };
    let mut entities = Vec::new();
    let mut groups = Vec::new();
    for a in hin.actor_ids() {
        let group = match &liberal {
            Some(l) => Some(governor_label(l.row(a)).to_string()),
            None => hin
                .neighbors(a, RelationKind::PartyAffiliation)
                .iter()
                .find(|&&n| hin.kind(n) == NodeKind::Party)
                .map(|&n| hin.nodes()[n].name.clone()),
        };
        if let Some(g) = group {
            entities.push(a);
            groups.push(g);
        }
    }
    let emb = x.select_rows(&entities);
    let proj = pca_project(&emb, 2)?;
    write_projection_csv(
        &cfg.out.join("projection.csv"),
        &hin,
        &entities,
        &proj,
        &groups,
    )?;
    write_text(
        &cfg.out.join("projection.svg"),
        &projection_svg(&proj, &groups),
    )?;

    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for g in &groups {
        let next = index.len();
        index.entry(g.as_str()).or_insert(next);
    }
    let ids: Vec<usize> = groups.iter().map(|g| index[g.as_str()]).collect();
    let full = dbi(&emb, &ids)?;
    let flat = dbi(&proj, &ids)?;
    write_text(
        &cfg.out.join("dbi.csv"),
        &format!("space,dbi\nfull,{full}\npca2,{flat}\n"),
    )?;
    println!(
        "{} actors in {} groups; DBI full {full:.4}, 2-D {flat:.4}",
        entities.len(),
        index.len()
    );
    Ok(())
}

fn test_row(
    hin: &Hin,
    labels: &[ExpertLabel],
    splits: &SplitAssignment,
    config: &TrainConfig,
) -> Result<actorgraph_core::analysis::Metrics> {
    let (params, _) = fit(hin, labels, splits, config)?;
    Ok(evaluate(&params, hin, labels, splits, Part::Test)?.combined)
}

pub fn ablate_relations(cfg: &RunConfig) -> Result<()> {
    let hin = load_hin(cfg)?;
    let (labels, splits) = load_labels(cfg, &hin)?;
    let tc = TrainConfig {
        checkpoint_dir: None,
        ..cfg.train_config()
    };
    let mut s = String::from("relation,keep,accuracy,macro_f1,micro_f1\n");
    for &rel in &cfg.ablate_relations {
        for k in 0..=10 {
            let keep = (10 - k) as f64 / 10.0;
            let g = hin.drop_relation_fraction(rel, keep, cfg.seed)?;
            let m = test_row(&g, &labels, &splits, &tc)?;
            info!("{rel} keep {keep:.1}: accuracy {:.4}", m.accuracy);
            let _ = writeln!(
                s,
                "{rel},{keep:.1},{},{},{}",
                m.accuracy, m.macro_f1, m.micro_f1
            );
        }
    }
    let path = cfg.out.join("ablate_relations.csv");
    write_text(&path, &s)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn ablate_losses(cfg: &RunConfig) -> Result<()> {
    let hin = load_hin(cfg)?;
    let (labels, splits) = load_labels(cfg, &hin)?;
    let base = cfg.train_config();
    let mut s = String::from("combination,accuracy,macro_f1,micro_f1\n");
    for combo in LossCombination::ALL {
        let tc = TrainConfig {
            weights: combo.apply(cfg.train.weights),
            checkpoint_dir: None,
            ..base.clone()
        };
        let m = test_row(&hin, &labels, &splits, &tc)?;
        println!(
            "{combo}: accuracy {:.4} macro-F1 {:.4} micro-F1 {:.4}",
            m.accuracy, m.macro_f1, m.micro_f1
        );
        let _ = writeln!(s, "{combo},{},{},{}", m.accuracy, m.macro_f1, m.micro_f1);
    }
    write_text(&cfg.out.join("ablate_losses.csv"), &s)
}

fn vote_inputs_for(cfg: &RunConfig) -> Result<(Matrix, BillFeatures, Vec<VoteRecord>)> {
    let hin = load_hin(cfg)?;
    let x = representations(cfg, &hin)?;
    let votes = load_votes(&required(cfg.votes_path(), "votes")?)?;
    let bills = load_bills(&required(cfg.bills_path(), "bills")?)?;
    check_votes(&votes, &hin, &bills)?;
    Ok((x, bills, votes))
}

pub fn vote_train(cfg: &RunConfig) -> Result<()> {
    let (x, bills, votes) = vote_inputs_for(cfg)?;
    let split = split_votes(&votes, cfg.vote_split, cfg.seed)?;
    let (model, history) = train_vote_model(&x, &bills, &votes, &split, &cfg.vote_config())?;
    save_vote_model(&model, &cfg.out.join("vote_model.txt"))?;

    let mut h = String::from("epoch,train_loss,val_accuracy\n");
    for (i, (l, a)) in history
        .train_loss
        .iter()
        .zip(&history.val_accuracy)
        .enumerate()
    {
        let _ = writeln!(h, "{},{l},{a}", i + 1);
    }
    write_text(&cfg.out.join("vote_history.csv"), &h)?;

    let mut m = String::from("part,accuracy,majority\n");
    for (name, idx) in [("val", &split.val), ("test", &split.test)] {
        let acc = vote_accuracy(&model, &x, &bills, &votes, idx)?;
        let maj = majority_accuracy(&votes, &split.train, idx);
        let _ = writeln!(m, "{name},{acc},{maj}");
        println!("{name}: accuracy {acc:.4} (majority {maj:.4})");
    }
    write_text(&cfg.out.join("vote_metrics.csv"), &m)
}

pub fn vote_eval(cfg: &RunConfig) -> Result<()> {
    let path = cfg
        .vote_model
        .clone()
        .ok_or_else(|| CliError::config("no vote model given; pass --vote-model <file>"))?;
    let model = load_vote_model(&path)?;
    let (x, bills, votes) = vote_inputs_for(cfg)?;
    let split = split_votes(&votes, cfg.vote_split, cfg.seed)?;
    let acc = vote_accuracy(&model, &x, &bills, &votes, &split.test)?;
    let maj = majority_accuracy(&votes, &split.train, &split.test);
    write_text(
        &cfg.out.join("vote_metrics.csv"),
        &format!("part,accuracy,majority\ntest,{acc},{maj}\n"),
    )?;

    let p = model.probabilities(&vote_inputs(&x, &bills, &votes, &split.test)?)?;
    let mut s = String::from("legislator_id,bill_id,congress,label,p_yea,p_nay\n");
    for (r, &i) in split.test.iter().enumerate() {
        let v = &votes[i];
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            v.legislator,
            v.bill_id,
            v.congress,
            v.label,
            p.get(r, 0),
            p.get(r, 1)
        );
    }
    write_text(&cfg.out.join("predictions.csv"), &s)?;
    println!(
        "test: accuracy {acc:.4} (majority {maj:.4}) over {} votes",
        split.test.len()
    );
    Ok(())
}

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

pub fn gradcheck(cfg: &RunConfig) -> Result<()> {
    let setup = GradCheckSetup {
        weights: cfg.losses.apply(cfg.train.weights),
        activation: cfg.train.activation,
        variant: cfg.train.variant,
        h: cfg.gradcheck_h,
        ..Default::default()
    };
    let r = gradcheck_full_loss(&setup, cfg.seed)?;
    write_text(
        &cfg.out.join("gradcheck.csv"),
        &format!(
            "seed,max_rel_error,coordinates\n{},{},{}\n",
            cfg.seed, r.max_rel_error, r.coordinates
        ),
    )?;
    println!(
        "max relative error {:.3e} over {} coordinates",
        r.max_rel_error, r.coordinates
    );
    if r.max_rel_error < GRADCHECK_TOLERANCE {
        Ok(())
    } else {
        Err(CliError::new(
            "numkit",
            format!(
                "gradient check failed: {} >= {GRADCHECK_TOLERANCE}",
                r.max_rel_error
            ),
        ))
    }
}
