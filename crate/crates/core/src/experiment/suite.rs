//! The experiment matrix driver: trains every (model, ablation, seed) cell,
//! evaluates test and hard-subset metrics under both threshold policies,
//! and aggregates seeds into Table-style rows. Cells are independent and
//! run on a small thread pool; each cell is internally single-threaded and
//! deterministic, and results are assembled in a fixed order, so the
//! emitted reports are byte-identical across runs regardless of thread
//! count.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::data::Split;
use crate::error::Result;
use crate::model::{checkpoint, ExpertKind, ModelKind};

use super::config::{AblationKind, ExperimentConfig};
use super::dataset::Dataset;
use super::evaluate::{evaluate, evaluate_hard_subset, router_diagnostics, SplitEval};
use super::report::{mean_and_pop_std, text_table, JsonRecord};
use super::train::{train, EpochLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellKey {
    pub model: ModelKind,
    pub ablation: AblationKind,
    pub seed: u64,
}

impl CellKey {
    fn label(&self) -> String {
        if self.ablation == AblationKind::Full {
            self.model.name().to_string()
        } else {
            format!("{}:{}", self.model.name(), self.ablation.name())
        }
    }
}

#[derive(Debug)]
pub struct CellSuccess {
    pub best_epoch: usize,
    pub best_val_auroc: f64,
    pub epochs_run: usize,
    pub test: SplitEval,
    pub hard: Option<SplitEval>,
    pub router: Option<Vec<(ExpertKind, f64)>>,
    pub checkpoint: Vec<u8>,
    pub log: Vec<EpochLog>,
}

#[derive(Debug)]
pub struct CellResult {
    pub key: CellKey,
    pub outcome: std::result::Result<CellSuccess, String>,
}

#[derive(Debug)]
pub struct SuiteSpec {
    pub base: ExperimentConfig,
    /// Model variants; seeds come from `base.seeds`.
    pub variants: Vec<(ModelKind, AblationKind)>,
}

impl SuiteSpec {
    /// The four-model comparison matrix (Table-2 style).
    pub fn main_models(base: ExperimentConfig) -> Self {
        SuiteSpec {
            base,
            variants: vec![
                (ModelKind::MicroFuse, AblationKind::Full),
                (ModelKind::ProstT5Only, AblationKind::Full),
                (ModelKind::BacformerOnly, AblationKind::Full),
                (ModelKind::ConcatMlp, AblationKind::Full),
            ],
        }
    }

    /// The full ablation grid (Table-3 style).
    pub fn ablation_grid(base: ExperimentConfig) -> Self {
        SuiteSpec {
            base,
            variants: AblationKind::ALL
                .iter()
                .map(|&a| (ModelKind::MicroFuse, a))
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub model: ModelKind,
    pub ablation: AblationKind,
    pub seeds_used: usize,
    /// (mean, std) per metric name, default threshold on test.
    pub test_default: Vec<(&'static str, f64, f64)>,
    /// (mean, std) for the threshold-selected policy.
    pub test_selected: Vec<(&'static str, f64, f64)>,
    pub hard: Option<Vec<(&'static str, f64, f64)>>,
}

#[derive(Debug)]
pub struct SuiteOutput {
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<AggregateRow>,
    pub dataset_lines: Vec<JsonRecord>,
    pub failed: usize,
}

fn cell_config(base: &ExperimentConfig, model: ModelKind, ablation: AblationKind) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.model = model;
    cfg.ablation = if model == ModelKind::MicroFuse {
        ablation
    } else {
        AblationKind::Full
    };
    cfg
}

fn run_cell(base: &ExperimentConfig, dataset: &Dataset, key: CellKey) -> Result<CellSuccess> {
    let cfg = cell_config(base, key.model, key.ablation);
    let outcome = train(&cfg, dataset, key.seed)?;
    let mut model = outcome.model;
    let test = evaluate(&model, dataset, Split::Test, cfg.sweep_resolution)?;
    let hard = if dataset.view(Split::Test).identities.is_some() {
        Some(evaluate_hard_subset(&model, dataset, cfg.sweep_resolution)?)
    } else {
        None
    };
    let router = match &model {
        crate::model::AnyModel::Fusion(_) => {
            Some(router_diagnostics(&model, dataset, Split::Test)?)
        }
        _ => None,
    };
    Ok(CellSuccess {
        best_epoch: outcome.best_epoch,
        best_val_auroc: outcome.best_val_auroc,
        epochs_run: outcome.epochs_run,
        test,
        hard,
        router,
        checkpoint: checkpoint::checkpoint_bytes(&mut model),
        log: outcome.log,
    })
}

/// Run every cell of the matrix. `threads` caps the worker count; cells
/// that fail are recorded and do not stop the suite.
pub fn run_suite(spec: &SuiteSpec, threads: usize) -> Result<SuiteOutput> {
    spec.base.validate()?;
    let dataset = Dataset::from_source(&spec.base.data)?;
    let keys: Vec<CellKey> = spec
        .variants
        .iter()
        .flat_map(|&(model, ablation)| {
            spec.base.seeds.iter().map(move |&seed| CellKey {
                model,
                ablation,
                seed,
            })
        })
        .collect();

    let results: Mutex<Vec<Option<CellResult>>> = Mutex::new((0..keys.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = threads.max(1).min(keys.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= keys.len() {
                    break;
                }
                let key = keys[i];
                let outcome = run_cell(&spec.base, &dataset, key).map_err(|e| e.to_string());
                results.lock().unwrap()[i] = Some(CellResult { key, outcome });
            });
        }
    });
    let cells: Vec<CellResult> = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|c| c.expect("every cell ran"))
        .collect();
    let failed = cells.iter().filter(|c| c.outcome.is_err()).count();

    // Seed aggregation per variant.
    let mut aggregates = Vec::new();
    for &(model, ablation) in &spec.variants {
        let ok: Vec<&CellSuccess> = cells
            .iter()
            .filter(|c| c.key.model == model && c.key.ablation == ablation)
            .filter_map(|c| c.outcome.as_ref().ok())
            .collect();
        if ok.is_empty() {
            continue;
        }
        let collect = |f: &dyn Fn(&CellSuccess) -> f64| -> Vec<f64> { ok.iter().map(|c| f(c)).collect() };
        let stats = |f: &dyn Fn(&CellSuccess) -> f64| -> (f64, f64) { mean_and_pop_std(&collect(f)) };
        let default_metrics: Vec<(&'static str, f64, f64)> = vec![
            ("auroc", stats(&|c| c.test.default_report.auroc).0, stats(&|c| c.test.default_report.auroc).1),
            ("auprc", stats(&|c| c.test.default_report.auprc).0, stats(&|c| c.test.default_report.auprc).1),
            ("map", stats(&|c| c.test.default_report.map).0, stats(&|c| c.test.default_report.map).1),
            ("macro_f1", stats(&|c| c.test.default_report.macro_f1).0, stats(&|c| c.test.default_report.macro_f1).1),
            ("macro_recall", stats(&|c| c.test.default_report.macro_recall).0, stats(&|c| c.test.default_report.macro_recall).1),
            ("accuracy", stats(&|c| c.test.default_report.accuracy).0, stats(&|c| c.test.default_report.accuracy).1),
            ("brier", stats(&|c| c.test.default_report.brier).0, stats(&|c| c.test.default_report.brier).1),
        ];
        let selected_metrics: Vec<(&'static str, f64, f64)> = vec![
            ("macro_f1", stats(&|c| c.test.selected_report.macro_f1).0, stats(&|c| c.test.selected_report.macro_f1).1),
            ("accuracy", stats(&|c| c.test.selected_report.accuracy).0, stats(&|c| c.test.selected_report.accuracy).1),
            ("threshold", stats(&|c| c.test.selected_threshold).0, stats(&|c| c.test.selected_threshold).1),
        ];
        let hard = if ok.iter().all(|c| c.hard.is_some()) {
            let h = |f: &dyn Fn(&SplitEval) -> f64| -> (f64, f64) {
                mean_and_pop_std(&ok.iter().map(|c| f(c.hard.as_ref().unwrap())).collect::<Vec<_>>())
            };
            Some(vec![
                ("auroc", h(&|e| e.default_report.auroc).0, h(&|e| e.default_report.auroc).1),
                ("auprc", h(&|e| e.default_report.auprc).0, h(&|e| e.default_report.auprc).1),
                ("map", h(&|e| e.default_report.map).0, h(&|e| e.default_report.map).1),
            ])
        } else {
            None
        };
        aggregates.push(AggregateRow {
            model,
            ablation,
            seeds_used: ok.len(),
            test_default: default_metrics,
            test_selected: selected_metrics,
            hard,
        });
    }

    // Dataset summary records (Table-1 style).
    let mut dataset_lines = Vec::new();
    for split in Split::ALL {
        let view = dataset.view(split);
        let pos = view.labels.iter().filter(|&&y| y == 1).count();
        let pairs: Vec<&crate::data::GenePair> =
            dataset.pairs.iter().filter(|p| p.split == split).collect();
        let mean_igs = |label: u8| -> f64 {
            let v: Vec<f64> = pairs
                .iter()
                .filter(|p| p.label == label)
                .map(|p| p.igs as f64)
                .collect();
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        dataset_lines.push(
            JsonRecord::new()
                .push("record", "dataset")
                .push("split", split.name())
                .push("pairs", view.rows.len())
                .push("positives", pos)
                .push("negatives", view.rows.len() - pos)
                .push(
                    "positive_rate",
                    pos as f64 / view.rows.len().max(1) as f64,
                )
                .push("mean_igs_positive", mean_igs(1))
                .push("mean_igs_negative", mean_igs(0)),
        );
    }

    Ok(SuiteOutput {
        cells,
        aggregates,
        dataset_lines,
        failed,
    })
}

fn eval_record(key: &CellKey, split: &str, policy: &str, report: &crate::metrics::MetricReport<f64>, n: usize) -> JsonRecord {
    JsonRecord::new()
        .push("record", "evaluation")
        .push("model", key.model.name())
        .push("ablation", key.ablation.name())
        .push("seed", key.seed)
        .push("split", split)
        .push("policy", policy)
        .push("threshold", report.threshold)
        .push("n", n)
        .push("auroc", report.auroc)
        .push("auprc", report.auprc)
        .push("map", report.map)
        .push("macro_f1", report.macro_f1)
        .push("macro_recall", report.macro_recall)
        .push("accuracy", report.accuracy)
        .push("brier", report.brier)
}

/// All suite results as JSON lines, in a fixed order.
pub fn suite_jsonl(output: &SuiteOutput) -> String {
    let mut lines: Vec<String> = Vec::new();
    for rec in &output.dataset_lines {
        lines.push(rec.to_line());
    }
    for cell in &output.cells {
        match &cell.outcome {
            Ok(success) => {
                lines.push(
                    JsonRecord::new()
                        .push("record", "training")
                        .push("model", cell.key.model.name())
                        .push("ablation", cell.key.ablation.name())
                        .push("seed", cell.key.seed)
                        .push("best_epoch", success.best_epoch)
                        .push("best_val_auroc", success.best_val_auroc)
                        .push("epochs_run", success.epochs_run)
                        .to_line(),
                );
                lines.push(
                    eval_record(&cell.key, "test", "default", &success.test.default_report, success.test.n)
                        .to_line(),
                );
                lines.push(
                    eval_record(&cell.key, "test", "selected", &success.test.selected_report, success.test.n)
                        .to_line(),
                );
                if let Some(hard) = &success.hard {
                    lines.push(
                        eval_record(&cell.key, "hard", "default", &hard.default_report, hard.n).to_line(),
                    );
                    lines.push(
                        eval_record(&cell.key, "hard", "selected", &hard.selected_report, hard.n).to_line(),
                    );
                }
                if let Some(router) = &success.router {
                    let mut rec = JsonRecord::new()
                        .push("record", "router")
                        .push("model", cell.key.model.name())
                        .push("ablation", cell.key.ablation.name())
                        .push("seed", cell.key.seed)
                        .push("split", "test");
                    for (kind, mean) in router {
                        rec = rec.push(&format!("mean_weight_{}", kind.name()), *mean);
                    }
                    lines.push(rec.to_line());
                }
            }
            Err(message) => {
                lines.push(
                    JsonRecord::new()
                        .push("record", "failure")
                        .push("model", cell.key.model.name())
                        .push("ablation", cell.key.ablation.name())
                        .push("seed", cell.key.seed)
                        .push("error", message.as_str())
                        .to_line(),
                );
            }
        }
    }
    for agg in &output.aggregates {
        let mut rec = JsonRecord::new()
            .push("record", "aggregate")
            .push("model", agg.model.name())
            .push("ablation", agg.ablation.name())
            .push("seeds", agg.seeds_used)
            .push("split", "test")
            .push("policy", "default");
        for (name, mean, std) in &agg.test_default {
            rec = rec
                .push(&format!("{name}_mean"), *mean)
                .push(&format!("{name}_std"), *std);
        }
        lines.push(rec.to_line());
        let mut rec = JsonRecord::new()
            .push("record", "aggregate")
            .push("model", agg.model.name())
            .push("ablation", agg.ablation.name())
            .push("seeds", agg.seeds_used)
            .push("split", "test")
            .push("policy", "selected");
        for (name, mean, std) in &agg.test_selected {
            rec = rec
                .push(&format!("{name}_mean"), *mean)
                .push(&format!("{name}_std"), *std);
        }
        lines.push(rec.to_line());
        if let Some(hard) = &agg.hard {
            let mut rec = JsonRecord::new()
                .push("record", "aggregate")
                .push("model", agg.model.name())
                .push("ablation", agg.ablation.name())
                .push("seeds", agg.seeds_used)
                .push("split", "hard")
                .push("policy", "default");
            for (name, mean, std) in hard {
                rec = rec
                    .push(&format!("{name}_mean"), *mean)
                    .push(&format!("{name}_std"), *std);
            }
            lines.push(rec.to_line());
        }
    }
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

/// Human-readable aggregate table.
pub fn suite_summary(output: &SuiteOutput) -> String {
    let fmt = |mean: f64, std: f64| format!("{mean:.4} +/- {std:.4}");
    let find = |row: &[(&'static str, f64, f64)], name: &str| -> (f64, f64) {
        row.iter()
            .find(|(n, _, _)| *n == name)
            .map(|(_, m, s)| (*m, *s))
            .unwrap_or((f64::NAN, f64::NAN))
    };
    let mut rows = Vec::new();
    for agg in &output.aggregates {
        let label = CellKey {
            model: agg.model,
            ablation: agg.ablation,
            seed: 0,
        }
        .label();
        let (auroc, auroc_s) = find(&agg.test_default, "auroc");
        let (auprc, auprc_s) = find(&agg.test_default, "auprc");
        let (map, map_s) = find(&agg.test_default, "map");
        let (f1, f1_s) = find(&agg.test_default, "macro_f1");
        let (acc, acc_s) = find(&agg.test_default, "accuracy");
        let hard = agg
            .hard
            .as_ref()
            .map(|h| {
                let (m, s) = find(h, "auroc");
                fmt(m, s)
            })
            .unwrap_or_else(|| "-".to_string());
        rows.push(vec![
            label,
            format!("{}", agg.seeds_used),
            fmt(auroc, auroc_s),
            fmt(auprc, auprc_s),
            fmt(map, map_s),
            fmt(f1, f1_s),
            fmt(acc, acc_s),
            hard,
        ]);
    }
    let mut out = text_table(
        &["model", "seeds", "auroc", "auprc", "map", "macro_f1", "accuracy", "hard_auroc"],
        &rows,
    );
    if output.failed > 0 {
        out.push_str(&format!("\n{} cell(s) failed; see failure records.\n", output.failed));
    }
    out
}
