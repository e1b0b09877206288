use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use claimscreen::corpus::{assign_labels, write_label_table, ClaimFilter, Class, Horizon};
use claimscreen::dataset::{EmbeddedPatent, Example};
use claimscreen::embed::{read_embeddings, CembEntry, CembFile, EmbeddingProvider, HashedEmbedder};
use claimscreen::eval::render_metrics_table;
use claimscreen::interpret::{explain, render_ttest_table, welch_ttest, ExplainReport, Normalization};
use claimscreen::model::Model;
use claimscreen::synthetic::generate_synthetic_corpus;
use claimscreen::train::{cross_validate, evaluate, evaluate_holdout};

use crate::config::Provider;
use crate::error::CliError;
use crate::svg::{histogram, Series};
use crate::workspace::{require, Workspace};

pub fn horizon_title(h: Horizon) -> &'static str {
    match h {
        Horizon::Short => "Short-term forecasting",
        Horizon::Mid => "Mid-term forecasting",
        Horizon::Long => "Long-term forecasting",
    }
}

fn table_letter(h: Horizon) -> char {
    match h {
        Horizon::Short => 'a',
        Horizon::Mid => 'b',
        Horizon::Long => 'c',
    }
}

fn horizons_or_all(list: &[Horizon]) -> Vec<Horizon> {
    if list.is_empty() {
        Horizon::ALL.to_vec()
    } else {
        list.to_vec()
    }
}

pub fn generate(ws: &Workspace, n: usize, fraction: f64, seed: u64, out: Option<PathBuf>, key: Option<PathBuf>) -> Result<(), CliError> {
    let out = out.unwrap_or_else(|| ws.config.paths.corpus.clone());
    let key = key.unwrap_or_else(|| out.with_extension("key.csv"));
    ws.check_output(&out)?;
    ws.check_output(&key)?;
    let corpus = generate_synthetic_corpus(n, fraction, seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut corpus_bytes = Vec::new();
    claimscreen::corpus::write_corpus(&mut corpus_bytes, &corpus.records)?;
    let mut key_bytes = Vec::new();
    corpus.write_key(&mut key_bytes)?;
    ws.write_output(&out, &corpus_bytes)?;
    ws.write_output(&key, &key_bytes)?;
    let pbt = corpus.key.iter().filter(|(_, c)| *c == Class::Pbt).count();
    println!("generated {n} patents ({pbt} PBT) -> {}", out.display());
    Ok(())
}

pub fn ingest(ws: &Workspace, corpus: Option<PathBuf>, out: Option<PathBuf>) -> Result<(), CliError> {
    let out = out.unwrap_or_else(|| ws.config.paths.labels.clone());
    ws.check_output(&out)?;
    let records = ws.records(corpus.as_deref())?;
    let pre = ws.preprocessor()?;
    let mut claims = 0;
    let mut empty = 0;
    for r in &records {
        for c in r.filtered_claims(ws.config.claim_filter) {
            claims += 1;
            if pre.process(c).is_empty() {
                empty += 1;
                log::warn!("patent {} claim {} has no tokens after preprocessing", r.patent_id, c.index);
            }
        }
    }
    let labeling = assign_labels(&records, &ws.config.labels)?;
    let mut table = Vec::new();
    write_label_table(&mut table, &labeling.patents)?;
    ws.write_output(&out, &table)?;
    println!("patents: {}", records.len());
    println!("claims kept: {claims} ({empty} empty after preprocessing)");
    for h in Horizon::ALL {
        let pbt = labeling.classes(h).iter().filter(|&&c| c == Class::Pbt).count();
        println!("{h}: threshold {} -> {pbt} PBT, {} MT", labeling.threshold(h), records.len() - pbt);
    }
    Ok(())
}

pub fn embed(ws: &Workspace, provider: Option<Provider>, input: Option<PathBuf>, out: Option<PathBuf>) -> Result<(), CliError> {
    let out = out.unwrap_or_else(|| ws.config.paths.embeddings.clone());
    ws.check_output(&out)?;
    let records = ws.records(None)?;
    let filter = ws.config.claim_filter;
    let dim = ws.config.model.dim;
    let bytes = match provider.unwrap_or(ws.config.embed.provider) {
        Provider::Hashed => {
            let pre = ws.preprocessor()?;
            let embedder = HashedEmbedder::new(dim, ws.config.embed.seed);
            let entries = records
                .iter()
                .map(|r| CembEntry {
                    patent_id: r.patent_id.clone(),
                    claims: r
                        .filtered_claims(filter)
                        .map(|c| embedder.embed_claim(&pre.process(c).tokens).into_iter().map(|v| v as f32).collect())
                        .collect(),
                })
                .collect();
            CembFile::new(dim, entries)?.to_bytes()?
        }
        Provider::Cemb => {
            let input = input.ok_or_else(|| CliError::Usage("--input is required with --provider cemb".into()))?;
            let cemb = read_embeddings(require(&input)?)?;
            if cemb.dim != dim {
                return Err(CliError::Shape(format!("{} has d_e = {} but model.dim = {dim}", input.display(), cemb.dim)));
            }
            claimscreen::dataset::attach_embeddings(&records, filter, &cemb, dim, ws.config.model.max_claims)?;
            cemb.to_bytes()?
        }
    };
    ws.write_output(&out, &bytes)?;
    println!("embedded {} patents (d_e = {dim}, {filter:?}) -> {}", records.len(), out.display());
    Ok(())
}

fn split_table(train: &[String], validation: &[String], test: &[String]) -> String {
    let mut out = String::from("patent_id,split\n");
    for (name, ids) in [("train", train), ("validation", validation), ("test", test)] {
        for id in ids {
            let _ = writeln!(out, "{id},{name}");
        }
    }
    out
}

fn read_test_ids(path: &Path) -> Result<HashSet<String>, CliError> {
    let mut reader = csv::Reader::from_path(require(path)?).map_err(|e| CliError::Data(e.to_string()))?;
    let mut ids = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if row.get(1) == Some("test") {
            ids.insert(row[0].to_string());
        }
    }
    Ok(ids)
}

pub fn train(ws: &Workspace, horizon: Option<Horizon>, checkpoint: Option<PathBuf>) -> Result<(), CliError> {
    let h = ws.horizon(horizon);
    let checkpoint = checkpoint.unwrap_or_else(|| ws.config.paths.checkpoint(h));
    let summary_path = ws.config.paths.report(format!("train-{h}.txt"));
    let loss_path = ws.config.paths.report(format!("train-{h}-loss.csv"));
    let split_path = ws.config.paths.report(format!("split-{h}.csv"));
    for p in [&checkpoint, &summary_path, &loss_path, &split_path] {
        ws.check_output(p)?;
    }
    let examples = ws.examples(h, &ws.config.model)?;
    let result = evaluate_holdout(&examples, ws.config.eval.train_fraction, &ws.config.model, &ws.config.train, ws.exec)?;
    let mut model = result.model;
    model.params.round_to_f32();
    ws.write_output(&checkpoint, &model.to_checkpoint_bytes()?)?;
    let summary = format!(
        "horizon: {h}\ntrain: {}\nvalidation: {}\ntest: {}\n{}\n{}",
        result.train_ids.len(),
        result.validation_ids.len(),
        result.test_ids.len(),
        result.report.summary(),
        render_metrics_table(&result.metrics, '\t')
    );
    ws.write_text(&summary_path, &summary)?;
    ws.write_text(&loss_path, &result.report.loss_table())?;
    ws.write_text(&split_path, &split_table(&result.train_ids, &result.validation_ids, &result.test_ids))?;
    print!("{summary}");
    Ok(())
}

pub fn cv(ws: &Workspace, horizon: Option<Horizon>, k: Option<usize>) -> Result<(), CliError> {
    let h = ws.horizon(horizon);
    let k = k.unwrap_or(ws.config.eval.k);
    if k < 2 {
        return Err(CliError::Usage(format!("--k must be at least 2, got {k}")));
    }
    let folds_path = ws.config.paths.report(format!("cv-{h}.csv"));
    let summary_path = ws.config.paths.report(format!("cv-{h}.txt"));
    ws.check_output(&folds_path)?;
    ws.check_output(&summary_path)?;
    let examples = ws.examples(h, &ws.config.model)?;
    let report = cross_validate(&examples, k, &ws.config.model, &ws.config.train, ws.exec)?;
    let summary = format!(
        "({}) {}, {k}-fold mean\n{}\n{k}-fold standard deviation\n{}",
        table_letter(h),
        horizon_title(h).to_lowercase(),
        render_metrics_table(&report.summary.mean, '\t'),
        render_metrics_table(&report.summary.std, '\t')
    );
    ws.write_text(&folds_path, &report.fold_table())?;
    ws.write_text(&summary_path, &summary)?;
    print!("{}", report.fold_table());
    print!("{summary}");
    Ok(())
}

fn restrict(examples: Vec<Example>, split: Option<&Path>) -> Result<Vec<Example>, CliError> {
    let Some(split) = split else { return Ok(examples) };
    let ids = read_test_ids(split)?;
    let kept: Vec<Example> = examples.into_iter().filter(|e| ids.contains(&e.patent_id)).collect();
    if kept.is_empty() {
        return Err(CliError::Data(format!("no labeled test patents listed in {}", split.display())));
    }
    Ok(kept)
}

pub fn evaluate_cmd(
    ws: &Workspace,
    horizon: Option<Horizon>,
    checkpoint: Option<PathBuf>,
    split: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let h = ws.horizon(horizon);
    let out = out.unwrap_or_else(|| ws.config.paths.report(format!("metrics-{h}.tsv")));
    ws.check_output(&out)?;
    let model = ws.model(checkpoint.as_deref(), h)?;
    let examples = restrict(ws.examples(h, &model.config)?, split.as_deref())?;
    let metrics = evaluate(&model, &examples, ws.exec)?;
    let table = render_metrics_table(&metrics, '\t');
    ws.write_text(&out, &table)?;
    println!("{} patents, horizon {h}", examples.len());
    print!("{table}");
    Ok(())
}

pub fn predict(ws: &Workspace, horizons: &[Horizon], out: Option<PathBuf>) -> Result<(), CliError> {
    let horizons = horizons_or_all(horizons);
    let out = out.unwrap_or_else(|| ws.config.paths.report("predictions.tsv"));
    ws.check_output(&out)?;
    let records = ws.records(None)?;
    let independent: HashMap<&str, usize> = records
        .iter()
        .map(|r| (r.patent_id.as_str(), r.filtered_claims(ClaimFilter::IndependentOnly).count()))
        .collect();
    let mut columns: Vec<HashMap<String, Class>> = Vec::new();
    let mut order: Vec<String> = Vec::new();
    for &h in &horizons {
        let model = ws.model(None, h)?;
        let patents = ws.embedded(model.config.dim, model.config.max_claims)?;
        if order.is_empty() {
            order = patents.iter().map(|p| p.patent_id.clone()).collect();
        }
        let classes = ws.exec.try_map(&patents, |_, p| model.predict(&p.matrix).map(|(pred, _)| (p.patent_id.clone(), pred.class)))?;
        columns.push(classes.into_iter().collect());
    }
    let mut table = String::from("Patent Number\tNumber of Independent claims");
    for &h in &horizons {
        let _ = write!(table, "\tCategory ({})", horizon_title(h));
    }
    table.push('\n');
    for id in &order {
        let _ = write!(table, "{id}\t{}", independent[id.as_str()]);
        for col in &columns {
            let _ = write!(table, "\t{}", col[id]);
        }
        table.push('\n');
    }
    ws.write_text(&out, &table)?;
    print!("{table}");
    Ok(())
}

fn explain_all(model: &Model, patents: &[EmbeddedPatent], normalization: Normalization, ws: &Workspace) -> Result<Vec<ExplainReport>, CliError> {
    Ok(ws
        .exec
        .try_map(patents, |_, p| explain(&p.patent_id, &p.claims, &p.matrix, model, normalization))?)
}

pub fn explain_cmd(
    ws: &Workspace,
    horizon: Option<Horizon>,
    checkpoint: Option<PathBuf>,
    patents: &[String],
    normalization: Option<Normalization>,
    out_dir: Option<PathBuf>,
) -> Result<(), CliError> {
    let h = ws.horizon(horizon);
    let normalization = normalization.unwrap_or(ws.config.eval.normalization);
    let out_dir = out_dir.unwrap_or_else(|| ws.config.paths.report("explain"));
    let model = ws.model(checkpoint.as_deref(), h)?;
    let mut embedded = ws.embedded(model.config.dim, model.config.max_claims)?;
    if !patents.is_empty() {
        let known: HashSet<&str> = embedded.iter().map(|p| p.patent_id.as_str()).collect();
        if let Some(missing) = patents.iter().find(|id| !known.contains(id.as_str())) {
            return Err(CliError::Data(format!("patent {missing:?} is not in the embedded corpus")));
        }
        let wanted: HashSet<&String> = patents.iter().collect();
        embedded.retain(|p| wanted.contains(&p.patent_id));
    }
    let reports = explain_all(&model, &embedded, normalization, ws)?;
    let paths: Vec<PathBuf> = reports.iter().map(|r| out_dir.join(format!("{}-{h}.txt", r.patent_id))).collect();
    for p in &paths {
        ws.check_output(p)?;
    }
    for (r, p) in reports.iter().zip(&paths) {
        ws.write_text(p, &r.to_text())?;
    }
    if let [single] = reports.as_slice() {
        print!("{}", single.to_text());
    } else {
        println!("wrote {} explain reports to {}", reports.len(), out_dir.display());
    }
    Ok(())
}

/// Normalized scores split into (independent, dependent) groups.
fn score_groups(reports: &[ExplainReport]) -> (Vec<f64>, Vec<f64>) {
    let mut groups = (Vec::new(), Vec::new());
    for row in reports.iter().flat_map(|r| &r.rows) {
        if row.claim_type.is_independent() {
            groups.0.push(row.normalized);
        } else {
            groups.1.push(row.normalized);
        }
    }
    groups
}

fn scores_csv(reports: &[ExplainReport]) -> String {
    let mut out = String::from("patent_id,claim_index,claim_type,score_raw,score_norm\n");
    for r in reports {
        let mut rows: Vec<_> = r.rows.iter().collect();
        rows.sort_by_key(|row| row.claim_index);
        for row in rows {
            let kind = if row.claim_type.is_independent() { "independent" } else { "dependent" };
            let _ = writeln!(out, "{},{},{kind},{},{}", r.patent_id, row.claim_index, row.raw, row.normalized);
        }
    }
    out
}

pub fn ttest(ws: &Workspace, horizons: &[Horizon], normalization: Option<Normalization>, out: Option<PathBuf>) -> Result<(), CliError> {
    let horizons = horizons_or_all(horizons);
    let normalization = normalization.unwrap_or(ws.config.eval.normalization);
    let out = out.unwrap_or_else(|| ws.config.paths.report("ttest.tsv"));
    let score_paths: Vec<PathBuf> = horizons.iter().map(|h| ws.config.paths.report(format!("scores-{h}.csv"))).collect();
    ws.check_output(&out)?;
    for p in &score_paths {
        ws.check_output(p)?;
    }
    let mut results = Vec::new();
    let mut csvs = Vec::new();
    for &h in &horizons {
        let model = ws.model(None, h)?;
        let patents = ws.embedded(model.config.dim, model.config.max_claims)?;
        let reports = explain_all(&model, &patents, normalization, ws)?;
        let (independent, dependent) = score_groups(&reports);
        let result = welch_ttest(&independent, &dependent)?;
        results.push((horizon_title(h), result));
        csvs.push(scores_csv(&reports));
    }
    let table = render_ttest_table(&results, '\t');
    ws.write_text(&out, &table)?;
    for (p, text) in score_paths.iter().zip(&csvs) {
        ws.write_text(p, text)?;
    }
    print!("{table}");
    Ok(())
}

pub fn report(ws: &Workspace, horizons: &[Horizon], test_only: bool, normalization: Option<Normalization>) -> Result<(), CliError> {
    let horizons = horizons_or_all(horizons);
    let normalization = normalization.unwrap_or(ws.config.eval.normalization);
    let table_path = ws.config.paths.report("metrics-by-horizon.tsv");
    let svg_paths: Vec<PathBuf> = horizons.iter().map(|h| ws.config.paths.report(format!("scores-{h}.svg"))).collect();
    ws.check_output(&table_path)?;
    for p in &svg_paths {
        ws.check_output(p)?;
    }
    let mut table = String::new();
    let mut svgs = Vec::new();
    for &h in &horizons {
        let model = ws.model(None, h)?;
        let split = test_only.then(|| ws.config.paths.report(format!("split-{h}.csv")));
        let examples = restrict(ws.examples(h, &model.config)?, split.as_deref())?;
        let metrics = evaluate(&model, &examples, ws.exec)?;
        let _ = writeln!(table, "({}) {}", table_letter(h), horizon_title(h).to_lowercase());
        table.push_str(&render_metrics_table(&metrics, '\t'));

        let patents = ws.embedded(model.config.dim, model.config.max_claims)?;
        let reports = explain_all(&model, &patents, normalization, ws)?;
        let (independent, dependent) = score_groups(&reports);
        let svg = histogram(
            &format!("Claim-wise attention scores, {}", horizon_title(h).to_lowercase()),
            &format!("normalized score ({normalization:?})").to_lowercase(),
            &[
                Series { name: "independent claims", color: "#1f77b4", values: &independent },
                Series { name: "dependent claims", color: "#ff7f0e", values: &dependent },
            ],
            20,
            0.0,
            if normalization == Normalization::Max { 1.0 } else { upper_edge(&independent, &dependent) },
        );
        svgs.push(svg);
    }
    ws.write_text(&table_path, &table)?;
    for (p, svg) in svg_paths.iter().zip(&svgs) {
        ws.write_text(p, svg)?;
    }
    print!("{table}");
    Ok(())
}

fn upper_edge(a: &[f64], b: &[f64]) -> f64 {
    a.iter().chain(b).cloned().fold(1.0, f64::max)
}
