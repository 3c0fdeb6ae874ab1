//! Command-line driver: dataset construction, synthetic worlds, training,
//! evaluation, the ablation grid, the full suite, retrieval, and router
//! diagnostics.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::data::{
    build_dataset, read_gene_records, sequence_identity, write_pair_manifest, write_store,
    PairRules, Split, SplitFractions,
};
use crate::error::{Error, Result};
use crate::experiment::{
    evaluate, evaluate_hard_subset, retrieval_eval, router_diagnostics, run_suite, suite_jsonl,
    suite_summary, text_table, train, write_identity_file, AblationKind, DataSource, Dataset,
    ExperimentConfig, JsonRecord, SuiteSpec,
};
use crate::model::{checkpoint, ModelKind};

const USAGE: &str = "\
usage: microfuse <command> [flags]

commands:
  build-data   --genes <tsv> --out <manifest> [--identities <tsv>]
               [--pos-max <bp>] [--neg-min <bp>] [--fractions t,v,s] [--seed <n>]
  synth        --config <cfg> --out <prefix>
  train        --config <cfg> --out <ckpt> [--seed <n>] [--log <jsonl>]
  eval         --config <cfg> --checkpoint <ckpt> [--split train|val|test|hard]
               [--out <jsonl>]
  ablate       --config <cfg> [--out-dir <dir>] [--threads <n>]
  suite        --config <cfg> [--out-dir <dir>] [--threads <n>] [--models <list>]
  retrieve     --config <cfg> --checkpoint <ckpt> [--k 1,3,5,10] [--out <jsonl>]
  router-stats --config <cfg> --checkpoint <ckpt> [--split test]

Config files are flat `key = value` text; outputs are JSON lines plus a
plain-text summary table.";

struct Flags {
    command: String,
    values: HashMap<String, String>,
}

impl Flags {
    fn parse(args: &[String]) -> Result<Flags> {
        let command = args
            .first()
            .ok_or_else(|| Error::InvalidConfig("missing command".into()))?
            .clone();
        let mut values = HashMap::new();
        let mut i = 1;
        while i < args.len() {
            let key = args[i]
                .strip_prefix("--")
                .ok_or_else(|| Error::InvalidConfig(format!("expected --flag, got `{}`", args[i])))?;
            let value = args
                .get(i + 1)
                .ok_or_else(|| Error::InvalidConfig(format!("flag --{key} needs a value")))?;
            values.insert(key.to_string(), value.clone());
            i += 2;
        }
        Ok(Flags { command, values })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::InvalidConfig(format!("missing required flag --{key}")))
    }

    fn parse_num<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad value for --{key}: `{v}`"))),
        }
    }
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn cmd_build_data(flags: &Flags) -> Result<i32> {
    let genes = read_gene_records(Path::new(flags.require("genes")?))?;
    let out = PathBuf::from(flags.require("out")?);
    let rules = PairRules {
        pos_max_igs: flags.parse_num("pos-max", PairRules::default().pos_max_igs)?,
        neg_min_igs: flags.parse_num("neg-min", PairRules::default().neg_min_igs)?,
    };
    let fractions = match flags.get("fractions") {
        None => SplitFractions::default(),
        Some(v) => {
            let parts: Vec<f64> = v
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| Error::InvalidConfig(format!("bad fractions `{v}`"))))
                .collect::<Result<Vec<_>>>()?;
            if parts.len() != 3 {
                return Err(Error::InvalidConfig("fractions need three values".into()));
            }
            SplitFractions {
                train: parts[0],
                val: parts[1],
                test: parts[2],
            }
        }
    };
    let seed = flags.parse_num("seed", 1u64)?;
    let pairs = build_dataset(&genes, &rules, fractions, seed)?;
    write_pair_manifest(&out, &pairs)?;

    if let Some(identity_out) = flags.get("identities") {
        let by_id: HashMap<(&str, &str), &str> = genes
            .iter()
            .filter_map(|g| {
                g.sequence
                    .as_deref()
                    .map(|s| ((g.scaffold_id.as_str(), g.gene_id.as_str()), s))
            })
            .collect();
        let mut entries = Vec::new();
        for p in &pairs {
            let a = by_id.get(&(p.scaffold_id.as_str(), p.gene_a.as_str()));
            let b = by_id.get(&(p.scaffold_id.as_str(), p.gene_b.as_str()));
            if let (Some(a), Some(b)) = (a, b) {
                entries.push((p.pair_id.clone(), sequence_identity(a, b)?));
            }
        }
        if entries.is_empty() {
            return Err(Error::Domain(
                "--identities requested but no pair has sequences for both genes".into(),
            ));
        }
        write_identity_file(Path::new(identity_out), &entries)?;
    }

    let mut rows = Vec::new();
    for split in Split::ALL {
        let members: Vec<_> = pairs.iter().filter(|p| p.split == split).collect();
        let pos = members.iter().filter(|p| p.label == 1).count();
        rows.push(vec![
            split.name().to_string(),
            members.len().to_string(),
            pos.to_string(),
            (members.len() - pos).to_string(),
        ]);
    }
    println!("{}", text_table(&["split", "pairs", "positives", "negatives"], &rows));
    println!("wrote {} pairs to {}", pairs.len(), out.display());
    Ok(0)
}

fn cmd_synth(flags: &Flags) -> Result<i32> {
    let cfg = ExperimentConfig::from_file(Path::new(flags.require("config")?))?;
    let prefix = flags.require("out")?;
    let (world, n_pairs, fractions, split_seed) = match &cfg.data {
        DataSource::Synthetic {
            world,
            n_pairs,
            fractions,
            split_seed,
        } => (world, *n_pairs, *fractions, *split_seed),
        DataSource::Files { .. } => {
            return Err(Error::InvalidConfig("synth requires `data = synth` in the config".into()))
        }
    };
    let mut data = crate::data::synth_generate::<f64>(world, n_pairs)?;
    crate::data::scaffold_split(&mut data.pairs, fractions, split_seed)?;
    let pairs = crate::data::balance_splits(data.pairs, split_seed);

    let store_path = PathBuf::from(format!("{prefix}.embed"));
    let manifest_path = PathBuf::from(format!("{prefix}.pairs.tsv"));
    let identity_path = PathBuf::from(format!("{prefix}.identity.tsv"));
    write_store(&store_path, &data.store)?;
    write_pair_manifest(&manifest_path, &pairs)?;
    let entries: Vec<(String, f64)> = pairs
        .iter()
        .map(|p| {
            let row = data.store.row_of(&p.pair_id).expect("synth pair id");
            (p.pair_id.clone(), data.identities[row])
        })
        .collect();
    write_identity_file(&identity_path, &entries)?;
    println!(
        "wrote {} embeddings to {} (+.idx), {} pairs to {}, identities to {}",
        data.store.len(),
        store_path.display(),
        pairs.len(),
        manifest_path.display(),
        identity_path.display()
    );
    Ok(0)
}

fn cmd_train(flags: &Flags) -> Result<i32> {
    let cfg = ExperimentConfig::from_file(Path::new(flags.require("config")?))?;
    let out = PathBuf::from(flags.require("out")?);
    let seed = flags.parse_num("seed", cfg.seeds[0])?;
    let dataset = Dataset::from_source(&cfg.data)?;
    let outcome = train(&cfg, &dataset, seed)?;
    let mut model = outcome.model;
    checkpoint::save_checkpoint(&mut model, &out)?;
    if let Some(log_path) = flags.get("log") {
        let mut lines = String::new();
        for e in &outcome.log {
            lines.push_str(
                &JsonRecord::new()
                    .push("record", "epoch")
                    .push("model", cfg.model.name())
                    .push("ablation", cfg.ablation.name())
                    .push("seed", seed)
                    .push("epoch", e.epoch)
                    .push("bce", e.bce)
                    .push("xmod", e.xmod)
                    .push("supcon", e.supcon)
                    .push("total", e.total)
                    .push("val_auroc", e.val_auroc)
                    .to_line(),
            );
            lines.push('\n');
        }
        std::fs::write(log_path, lines)?;
    }
    println!(
        "trained {} seed {seed}: best val AUROC {:.4} at epoch {} ({} epochs run); checkpoint {}",
        cfg.model.name(),
        outcome.best_val_auroc,
        outcome.best_epoch,
        outcome.epochs_run,
        out.display()
    );
    Ok(0)
}

fn eval_lines(
    model_name: &str,
    seed: u64,
    split: &str,
    eval: &crate::experiment::SplitEval,
) -> Vec<String> {
    let rec = |policy: &str, report: &crate::metrics::MetricReport<f64>| {
        JsonRecord::new()
            .push("record", "evaluation")
            .push("model", model_name)
            .push("seed", seed)
            .push("split", split)
            .push("policy", policy)
            .push("threshold", report.threshold)
            .push("n", eval.n)
            .push("auroc", report.auroc)
            .push("auprc", report.auprc)
            .push("map", report.map)
            .push("macro_f1", report.macro_f1)
            .push("macro_recall", report.macro_recall)
            .push("accuracy", report.accuracy)
            .push("brier", report.brier)
            .to_line()
    };
    vec![
        rec("default", &eval.default_report),
        rec("selected", &eval.selected_report),
    ]
}

fn cmd_eval(flags: &Flags) -> Result<i32> {
    let cfg = ExperimentConfig::from_file(Path::new(flags.require("config")?))?;
    let model = checkpoint::load_checkpoint::<f64>(Path::new(flags.require("checkpoint")?))?;
    let dataset = Dataset::from_source(&cfg.data)?;
    let split_name = flags.get("split").unwrap_or("test");
    let eval = match split_name {
        "hard" => evaluate_hard_subset(&model, &dataset, cfg.sweep_resolution)?,
        other => evaluate(&model, &dataset, Split::parse(other)?, cfg.sweep_resolution)?,
    };
    let lines = eval_lines(model.kind().name(), model.seed(), split_name, &eval);
    for line in &lines {
        println!("{line}");
    }
    if let Some(out) = flags.get("out") {
        std::fs::write(out, format!("{}\n", lines.join("\n")))?;
    }
    Ok(0)
}

fn parse_variants(value: &str) -> Result<Vec<(ModelKind, AblationKind)>> {
    value
        .split(',')
        .map(|item| {
            let item = item.trim();
            match item.split_once(':') {
                Some((model, ablation)) => {
                    Ok((ModelKind::parse(model)?, AblationKind::parse(ablation)?))
                }
                None => Ok((ModelKind::parse(item)?, AblationKind::Full)),
            }
        })
        .collect()
}

fn run_matrix(flags: &Flags, spec: SuiteSpec) -> Result<i32> {
    let threads = flags.parse_num("threads", default_threads())?;
    let output = run_suite(&spec, threads)?;
    let jsonl = suite_jsonl(&output);
    let summary = suite_summary(&output);
    if let Some(dir) = flags.get("out-dir") {
        let dir = PathBuf::from(dir);
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("reports.jsonl"), &jsonl)?;
        std::fs::write(dir.join("summary.txt"), &summary)?;
        for cell in &output.cells {
            if let Ok(success) = &cell.outcome {
                let name = format!(
                    "{}_{}_seed{}.ckpt",
                    cell.key.model.name().replace('-', "_"),
                    cell.key.ablation.name(),
                    cell.key.seed
                );
                std::fs::write(dir.join(name), &success.checkpoint)?;
            }
        }
    }
    print!("{summary}");
    Ok(if output.failed > 0 { 1 } else { 0 })
}

fn cmd_suite(flags: &Flags) -> Result<i32> {
    let cfg = ExperimentConfig::from_file(Path::new(flags.require("config")?))?;
    let spec = match flags.get("models") {
        Some(value) => SuiteSpec {
            base: cfg,
            variants: parse_variants(value)?,
        },
        None => SuiteSpec::main_models(cfg),
    };
    run_matrix(flags, spec)
}

fn cmd_ablate(flags: &Flags) -> Result<i32> {
    let cfg = ExperimentConfig::from_file(Path::new(flags.require("config")?))?;
    run_matrix(flags, SuiteSpec::ablation_grid(cfg))
}

fn cmd_retrieve(flags: &Flags) -> Result<i32> {
    let cfg = ExperimentConfig::from_file(Path::new(flags.require("config")?))?;
    let model = checkpoint::load_checkpoint::<f64>(Path::new(flags.require("checkpoint")?))?;
    let dataset = Dataset::from_source(&cfg.data)?;
    let ks: Vec<usize> = match flags.get("k") {
        None => vec![1, 3, 5, 10],
        Some(v) => v
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| Error::InvalidConfig(format!("bad k list `{v}`"))))
            .collect::<Result<Vec<_>>>()?,
    };
    let report = retrieval_eval(&model, &dataset, &ks)?;
    let mut lines = Vec::new();
    let mut rows = Vec::new();
    for (i, &k) in report.k_values.iter().enumerate() {
        lines.push(
            JsonRecord::new()
                .push("record", "retrieval")
                .push("model", model.kind().name())
                .push("seed", model.seed())
                .push("k", k)
                .push("positive_precision", report.positive_precision[i])
                .push("negative_precision", report.negative_precision[i])
                .push("balanced_precision", report.balanced_precision[i])
                .push("enrichment", report.enrichment[i])
                .push("base_rate", report.base_rate)
                .to_line(),
        );
        rows.push(vec![
            k.to_string(),
            format!("{:.3}", report.positive_precision[i]),
            format!("{:.3}", report.negative_precision[i]),
            format!("{:.3}", report.balanced_precision[i]),
            format!("{:.3}", report.enrichment[i]),
        ]);
    }
    for line in &lines {
        println!("{line}");
    }
    print!(
        "{}",
        text_table(&["k", "pos@k", "neg@k", "balanced", "enrichment"], &rows)
    );
    if let Some(out) = flags.get("out") {
        std::fs::write(out, format!("{}\n", lines.join("\n")))?;
    }
    Ok(0)
}

fn cmd_router_stats(flags: &Flags) -> Result<i32> {
    let cfg = ExperimentConfig::from_file(Path::new(flags.require("config")?))?;
    let model = checkpoint::load_checkpoint::<f64>(Path::new(flags.require("checkpoint")?))?;
    let dataset = Dataset::from_source(&cfg.data)?;
    let split = Split::parse(flags.get("split").unwrap_or("test"))?;
    let stats = router_diagnostics(&model, &dataset, split)?;
    let mut rec = JsonRecord::new()
        .push("record", "router")
        .push("model", model.kind().name())
        .push("seed", model.seed())
        .push("split", split.name());
    let mut rows = Vec::new();
    for (kind, mean) in &stats {
        rec = rec.push(&format!("mean_weight_{}", kind.name()), *mean);
        rows.push(vec![kind.name().to_string(), format!("{mean:.3}")]);
    }
    println!("{}", rec.to_line());
    print!("{}", text_table(&["expert", "mean_weight"], &rows));
    Ok(0)
}

pub fn run(args: &[String]) -> i32 {
    let flags = match Flags::parse(args) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}\n\n{USAGE}");
            return 1;
        }
    };
    let result = match flags.command.as_str() {
        "build-data" => cmd_build_data(&flags),
        "synth" => cmd_synth(&flags),
        "train" => cmd_train(&flags),
        "eval" => cmd_eval(&flags),
        "ablate" => cmd_ablate(&flags),
        "suite" => cmd_suite(&flags),
        "retrieve" => cmd_retrieve(&flags),
        "router-stats" => cmd_router_stats(&flags),
        "help" | "--help" | "-h" => {
            println!("{USAGE}");
            return 0;
        }
        other => {
            eprintln!("error: unknown command `{other}`\n\n{USAGE}");
            return 1;
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
