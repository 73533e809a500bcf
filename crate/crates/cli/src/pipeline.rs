//! ingest -> train -> mitigate -> decide -> audit, one dataset at a time.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rankaudit::audit::{
    build_report, scatter_rows, write_scatter_csv, AuditReport, MethodOutput, ReportHeader, BASELINE,
};
use rankaudit::dataset::{Dataset, DatasetSpec, Split, SplitRole};
use rankaudit::decide::{decide, DecisionPolicy, DecisionSet};
use rankaudit::mitigate::{
    apply_mixing, apply_reject_option, apply_thresholds, disparate_impact_remove, fit_equalized_odds_post,
    fit_threshold_optimizer, reject_option_classify, GroupThresholds,
};
use rankaudit::scorer::{self, Scorer};
use rankaudit::{registry, synthetic, ScoreSet};
use serde::Serialize;

use crate::config::{Format, MethodConfig, PolicySpec, RunConfig};
use crate::error::{CliError, CliResult, InModule};
use crate::output::Sink;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Train,
    Mitigate,
    Decide,
    Audit,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Train => "train",
            Stage::Mitigate => "mitigate",
            Stage::Decide => "decide",
            Stage::Audit => "audit",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    /// Report files per dataset, in config order.
    pub reports: Vec<(String, Vec<PathBuf>)>,
}

#[derive(Serialize)]
struct DatasetSummary<'a> {
    dataset: &'a str,
    source: String,
    rows: usize,
    dropped_rows: usize,
    protected: usize,
    privileged: usize,
    base_rate: rankaudit::dataset::BaseRateCheck,
    split_seed: u64,
    partition_sizes: [usize; 3],
}

#[derive(Serialize)]
struct Provenance<'a> {
    config_hash: &'a str,
    stage: &'static str,
    seeds: &'a BTreeMap<String, u64>,
    partition_sizes: BTreeMap<String, [usize; 3]>,
    files: Vec<String>,
}

/// What a mitigation method leaves behind on the test partition.
enum Mitigated {
    /// New scores; labels come from the report policy.
    Scores(ScoreSet<f64>),
    /// Baseline scores with thresholds refit for every policy.
    PerPolicy(Vec<GroupThresholds<f64>>),
    /// Baseline scores with fixed labels.
    Labels(DecisionSet<f64>),
}

struct ResolvedPolicy {
    label: String,
    policy: DecisionPolicy<f64>,
    /// Rate the threshold optimizer targets; `None` equalizes the
    /// baseline positive rate.
    fit_rate: Option<f64>,
    note: Option<String>,
}

fn load_dataset(cfg: &RunConfig, i: usize) -> CliResult<(Dataset, String)> {
    let r = &cfg.datasets[i];
    let spec = match &r.spec {
        Some(p) => DatasetSpec::load(p).in_module("dataset")?,
        None => registry::get(&r.name).in_module("dataset")?,
    };
    match (&r.csv, &r.synthetic) {
        (Some(csv), _) => Ok((
            rankaudit::ingest(csv, &spec).in_module("dataset")?,
            format!("csv:{}", csv.display()),
        )),
        (None, Some(s)) => Ok((
            synthetic::generate(&spec, &s.into()).in_module("dataset")?,
            format!("synthetic:rows={},seed={}", s.rows, s.seed),
        )),
        (None, None) => Err(CliError::Config(format!("dataset `{}` has neither csv nor synthetic settings", r.name))),
    }
}

fn seeds(cfg: &RunConfig) -> BTreeMap<String, u64> {
    let mut s = BTreeMap::from([("split".to_string(), cfg.split.seed), ("scorer".to_string(), cfg.scorer.seed)]);
    for d in &cfg.datasets {
        if let (None, Some(syn)) = (&d.csv, &d.synthetic) {
            s.insert(format!("synthetic:{}", d.name), syn.seed);
        }
    }
    for m in &cfg.methods {
        if let MethodConfig::EqualizedOdds { name, seed } = m {
            s.insert(format!("mixing:{name}"), *seed);
        }
    }
    s
}

fn resolve_policies(cfg: &RunConfig, d: &Dataset, split: &Split, baseline: &ScoreSet<f64>) -> Vec<ResolvedPolicy> {
    cfg.audit
        .policies
        .iter()
        .map(|p| {
            let (policy, fit_rate, note) = match p {
                PolicySpec::FixedThreshold { t } => (DecisionPolicy::FixedThreshold { t: *t }, None, None),
                PolicySpec::GlobalTopRate { r } => (DecisionPolicy::GlobalTopRate { r: *r }, Some(*r), None),
                PolicySpec::GroupRate { r } => (
                    DecisionPolicy::PerGroupRates {
                        protected: *r,
                        privileged: *r,
                    },
                    Some(*r),
                    None,
                ),
                PolicySpec::BaselinePdr => {
                    let pos = baseline.scores.iter().filter(|&&s| s > 0.5).count();
                    let r = pos as f64 / baseline.len() as f64;
                    let note = format!("rate {r} is the baseline positive rate at threshold 0.5 on test");
                    (DecisionPolicy::GlobalTopRate { r }, Some(r), Some(note))
                }
                PolicySpec::BaseRate => {
                    let pos = split.train_ids.iter().filter(|&&id| d.labels()[id] == 1).count();
                    let r = pos as f64 / split.train_ids.len().max(1) as f64;
                    let note = format!("rate {r} is the base rate of the training partition");
                    (DecisionPolicy::GlobalTopRate { r }, Some(r), Some(note))
                }
            };
            ResolvedPolicy {
                label: p.label(),
                policy,
                fit_rate,
                note,
            }
        })
        .collect()
}

/// Run every stage up to and including `until`, writing each stage's
/// artifacts under the output directory.
pub fn execute(cfg: &RunConfig, until: Stage) -> CliResult<RunSummary> {
    let out_dir = cfg.output_dir();
    let mut sink = Sink::new(&out_dir)?;
    let hash = cfg.hash();
    let seeds = seeds(cfg);
    sink.log(format!("until stage {}", until.as_str()));
    sink.log(format!("config_hash {hash}"));
    for (k, v) in &seeds {
        sink.log(format!("seed {k} = {v}"));
    }
    for p in &cfg.audit.policies {
        sink.log(format!("policy {} = {}", p.label(), serde_json::to_string(p).unwrap_or_default()));
    }
    sink.write_text("config.resolved.toml", &cfg.to_toml())?;

    let mut summary = RunSummary {
        out_dir: out_dir.clone(),
        reports: Vec::new(),
    };
    let mut sizes = BTreeMap::new();
    for i in 0..cfg.datasets.len() {
        let (name, split_sizes, reports) = run_dataset(cfg, i, until, &hash, &seeds, &mut sink)?;
        sizes.insert(name.clone(), split_sizes);
        summary.reports.push((name, reports));
    }

    let mut files: Vec<String> = sink
        .written()
        .iter()
        .filter_map(|p| p.strip_prefix(&out_dir).ok())
        .map(|p| p.to_string_lossy().replace('\\', "/"))
        .collect();
    files.push("run.log".into());
    files.sort();
    let prov = Provenance {
        config_hash: &hash,
        stage: until.as_str(),
        seeds: &seeds,
        partition_sizes: sizes,
        files,
    };
    sink.write_json("provenance.json", &prov)?;
    sink.finish_log()?;
    Ok(summary)
}

fn run_dataset(
    cfg: &RunConfig,
    i: usize,
    until: Stage,
    hash: &str,
    seeds: &BTreeMap<String, u64>,
    sink: &mut Sink,
) -> CliResult<(String, [usize; 3], Vec<PathBuf>)> {
    let name = cfg.datasets[i].name.clone();
    let dir = PathBuf::from(&name);
    let (d, source) = load_dataset(cfg, i)?;
    let s = &cfg.split;
    let split = rankaudit::split(d.len(), (s.train, s.validation, s.test), s.seed).in_module("dataset")?;
    let (ntr, nva, nte) = split.sizes();
    let sizes = [ntr, nva, nte];
    let (protected, privileged) = d.group_sizes();
    sink.log(format!(
        "[{name}] ingest {source}: {} rows ({} dropped), protected {protected}, privileged {privileged}, split {ntr}/{nva}/{nte}",
        d.len(),
        d.dropped_rows()
    ));
    sink.write_json(
        dir.join("dataset_summary.json"),
        &DatasetSummary {
            dataset: &name,
            source,
            rows: d.len(),
            dropped_rows: d.dropped_rows(),
            protected,
            privileged,
            base_rate: rankaudit::verify_base_rate(&d),
            split_seed: split.seed,
            partition_sizes: sizes,
        },
    )?;
    if until == Stage::Ingest {
        return Ok((name, sizes, Vec::new()));
    }

    // train
    split.require(SplitRole::Test, BASELINE).in_module("dataset")?;
    let model = scorer::fit(&d, &split, &cfg.scorer).in_module("scorer")?;
    sink.log(format!(
        "[{name}] train {}: final loss {}",
        cfg.scorer.model_kind.as_str(),
        model.loss_history().last().copied().unwrap_or(f64::NAN)
    ));
    sink.write_text(dir.join("model.txt"), &model.to_text())?;
    let test_scores = model.score_split(&d, &split, SplitRole::Test, BASELINE).in_module("scorer")?;
    let val_scores = model
        .score_split(&d, &split, SplitRole::Validation, BASELINE)
        .in_module("scorer")?;
    sink.write_with(dir.join("scores").join("baseline.csv"), |w| test_scores.write_csv(w), "scorer")?;
    if until == Stage::Train {
        return Ok((name, sizes, Vec::new()));
    }

    // mitigate
    let policies = resolve_policies(cfg, &d, &split, &test_scores);
    for p in &policies {
        sink.log(format!("[{name}] policy {} -> {}", p.label, p.policy.describe()));
    }
    let mut mitigated: Vec<(String, ScoreSet<f64>, Mitigated)> = Vec::new();
    for m in &cfg.methods {
        let method = m.name().to_string();
        let art = dir.join("artifacts");
        let result = match m {
            MethodConfig::Dir {
                repair_level, columns, ..
            } => {
                let repaired = disparate_impact_remove(&d, *repair_level, columns).in_module("mitigate")?;
                sink.write_text(art.join(format!("{method}.json")), &repaired.summary_json())?;
                let m2: Scorer = scorer::fit(&repaired.dataset, &split, &cfg.scorer).in_module("scorer")?;
                sink.write_text(art.join(format!("{method}_model.txt")), &m2.to_text())?;
                let scores = m2
                    .score_split(&repaired.dataset, &split, SplitRole::Test, &method)
                    .in_module("scorer")?;
                sink.log(format!(
                    "[{name}] {method}: repair level {repair_level} on {} column(s), scorer refit",
                    repaired.repaired_columns.len()
                ));
                (scores.clone(), Mitigated::Scores(scores))
            }
            MethodConfig::ThresholdOptimizer { .. } => {
                let mut fits = Vec::new();
                for p in &policies {
                    let th = fit_threshold_optimizer(&val_scores, &d, &split.validation_ids, p.fit_rate)
                        .map_err(|e| e.in_method(&method))
                        .in_module("mitigate")?;
                    sink.log(format!(
                        "[{name}] {method} for {}: thresholds {} / {} at rate {}",
                        p.label, th.t_protected, th.t_privileged, th.rate
                    ));
                    sink.write_text(art.join(format!("{method}_{}.toml", p.label)), &th.to_text())?;
                    fits.push(th);
                }
                (test_scores.clone().renamed(&method), Mitigated::PerPolicy(fits))
            }
            MethodConfig::RejectOption { spd_bound, .. } => {
                let (fit, _) = reject_option_classify(&val_scores, &d, &split.validation_ids, *spd_bound)
                    .map_err(|e| e.in_method(&method))
                    .in_module("mitigate")?;
                sink.log(format!(
                    "[{name}] {method}: theta {} with validation SPD {} (bound met: {}, unchanged: {})",
                    fit.region.theta, fit.spd, fit.met_bound, fit.unchanged
                ));
                sink.write_text(art.join(format!("{method}.toml")), &fit.region.to_text())?;
                sink.write_json(art.join(format!("{method}_fit.json")), &fit)?;
                let dec = apply_reject_option(&fit.region, &test_scores, &d, &method).in_module("mitigate")?;
                (test_scores.clone().renamed(&method), Mitigated::Labels(dec))
            }
            MethodConfig::EqualizedOdds { seed, .. } => {
                let half = DecisionPolicy::FixedThreshold { t: 0.5 };
                let val_pred = decide(&val_scores, &d, &half).in_module("decide")?;
                let fit = fit_equalized_odds_post(&val_pred, &d, &split.validation_ids, *seed)
                    .map_err(|e| e.in_method(&method))
                    .in_module("mitigate")?;
                sink.log(format!(
                    "[{name}] {method}: mixing rates {:?} seed {seed}, expected validation errors {}",
                    [
                        fit.rates.protected_0,
                        fit.rates.protected_1,
                        fit.rates.privileged_0,
                        fit.rates.privileged_1
                    ],
                    fit.expected_errors
                ));
                sink.write_text(art.join(format!("{method}.toml")), &fit.rates.to_text())?;
                sink.write_json(art.join(format!("{method}_fit.json")), &fit)?;
                let test_pred = decide(&test_scores, &d, &half).in_module("decide")?;
                let dec = apply_mixing(&fit.rates, &test_pred, &d, &split.test_ids, &method).in_module("mitigate")?;
                (test_scores.clone().renamed(&method), Mitigated::Labels(dec))
            }
            MethodConfig::External { scores, .. } => {
                let all = rankaudit::ingest_external_scores(scores, &d, &method).in_module("scores")?;
                let s = all
                    .restrict(&split.test_ids)
                    .map_err(|e| e.in_method(&method))
                    .in_module("scores")?;
                sink.log(format!("[{name}] {method}: external scores from {}", scores.display()));
                (s.clone(), Mitigated::Scores(s))
            }
        };
        sink.write_with(
            dir.join("scores").join(format!("{method}.csv")),
            |w| result.0.write_csv(w),
            "scores",
        )?;
        mitigated.push((method, result.0, result.1));
    }
    if until == Stage::Mitigate {
        return Ok((name, sizes, Vec::new()));
    }

    // decide
    let mut per_policy: Vec<(DecisionSet<f64>, Vec<MethodOutput<f64>>)> = Vec::new();
    for (pi, p) in policies.iter().enumerate() {
        let ddir = dir.join("decisions").join(&p.label);
        let base = decide(&test_scores, &d, &p.policy)
            .map_err(|e| e.in_method(BASELINE))
            .in_module("decide")?;
        sink.write_with(ddir.join("baseline.csv"), |w| base.write_csv(&test_scores, &d, w), "decide")?;
        let mut outputs = Vec::new();
        for (method, scores, how) in &mitigated {
            let dec = match how {
                Mitigated::Scores(s) => decide(s, &d, &p.policy),
                Mitigated::PerPolicy(fits) => apply_thresholds(&fits[pi], scores, &d, method),
                Mitigated::Labels(dec) => Ok(dec.clone()),
            }
            .map_err(|e| e.in_method(method))
            .in_module("decide")?;
            sink.write_with(ddir.join(format!("{method}.csv")), |w| dec.write_csv(scores, &d, w), "decide")?;
            sink.log(format!("[{name}] {} {method}: realized PDR {}", p.label, dec.realized_pdr));
            outputs.push(MethodOutput::with_decisions(method.clone(), scores.clone(), dec));
        }
        per_policy.push((base, outputs));
    }
    if until == Stage::Decide {
        return Ok((name, sizes, Vec::new()));
    }

    // audit
    let mut reports = Vec::new();
    let mut tau_matrix_written = false;
    for (p, (base, outputs)) in policies.iter().zip(&per_policy) {
        let header = ReportHeader {
            dataset: name.clone(),
            fit_partition: SplitRole::Validation.as_str().into(),
            eval_partition: SplitRole::Test.as_str().into(),
            partition_sizes: Some(sizes),
            eval_group_sizes: [0, 0],
            seeds: seeds.clone(),
            config_hash: Some(hash.to_string()),
            notes: p.note.iter().cloned().collect(),
        };
        let mut report = build_report(&d, &test_scores, outputs, &p.policy, cfg.audit.tau_variant, header)
            .in_module("audit")?;
        report.policy_label = p.label.clone();
        if cfg.output.scatter {
            for o in outputs {
                let dec = o.decisions.as_ref().expect("decisions are always attached");
                let rows = scatter_rows(base, dec, &test_scores, &o.scores, &d).in_module("audit")?;
                let rel = PathBuf::from("scatter").join(&p.label).join(format!("{}.csv", o.name));
                sink.write_with(dir.join(&rel), |w| write_scatter_csv(&rows, w), "audit")?;
                report.scatter_dumps.push(rel.to_string_lossy().replace('\\', "/"));
            }
        }
        if !tau_matrix_written {
            sink.write_with(
                dir.join("correlation_matrix.csv"),
                |w| report.tau_matrix.write_csv(w),
                "audit",
            )?;
            tau_matrix_written = true;
        }
        reports.extend(write_report(cfg, &dir, &report, sink)?);
        for r in &report.rows {
            sink.log(format!(
                "[{name}] {} {}: auc {} spd {} eod {} pdr {}",
                p.label, r.method, r.auc, r.spd, r.eod, r.pdr
            ));
        }
    }
    Ok((name, sizes, reports))
}

fn write_report(cfg: &RunConfig, dir: &std::path::Path, report: &AuditReport<f64>, sink: &mut Sink) -> CliResult<Vec<PathBuf>> {
    let label = &report.policy_label;
    let mut written = Vec::new();
    for f in &cfg.output.formats {
        match f {
            Format::Json => {
                let mut text = report.to_json().in_module("audit")?;
                text.push('\n');
                written.push(sink.write_text(dir.join(format!("report_{label}.json")), &text)?);
            }
            Format::Csv => {
                written.push(sink.write_with(dir.join(format!("metrics_{label}.csv")), |w| metrics_csv(report, w), "audit")?);
                written.push(sink.write_with(dir.join(format!("tau_{label}.csv")), |w| tau_csv(report, w), "audit")?);
            }
        }
    }
    Ok(written)
}

fn csv_err(e: csv::Error) -> rankaudit::Error {
    rankaudit::Error::Csv(e)
}

fn metrics_csv(report: &AuditReport<f64>, w: &mut Vec<u8>) -> rankaudit::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "dataset",
        "policy",
        "method",
        "decision",
        "auc",
        "auc_protected",
        "auc_privileged",
        "acc",
        "spd",
        "eod",
        "pdr",
    ])
    .map_err(csv_err)?;
    for r in &report.rows {
        out.write_record([
            report.header.dataset.clone(),
            report.policy_label.clone(),
            r.method.clone(),
            r.decision.clone(),
            r.auc.to_string(),
            r.auc_protected.to_string(),
            r.auc_privileged.to_string(),
            r.acc.to_string(),
            r.spd.to_string(),
            r.eod.to_string(),
            r.pdr.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(|e| rankaudit::Error::Csv(e.into()))
}

fn tau_csv(report: &AuditReport<f64>, w: &mut Vec<u8>) -> rankaudit::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["dataset", "method", "tau_variant", "tau_overall", "tau_protected", "tau_privileged"])
        .map_err(csv_err)?;
    for r in &report.tau {
        out.write_record([
            report.header.dataset.clone(),
            r.method.clone(),
            report.tau_variant.as_str().to_string(),
            r.tau_overall.to_string(),
            r.tau_protected.to_string(),
            r.tau_privileged.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(|e| rankaudit::Error::Csv(e.into()))
}
