//! Desk-scale calibration: trains the comparison matrix on a benchmark
//! world variant and prints the pattern checks plus timing.
//!
//! args: [seeds] [conflict] [alpha_p] [alpha_b] [context] [obs_noise]

use std::time::Instant;

use microfuse::data::{SplitFractions, SyntheticWorld};
use microfuse::experiment::{
    run_suite, suite_summary, AblationKind, DataSource, ExperimentConfig, SuiteSpec,
};
use microfuse::model::ModelKind;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seeds: Vec<u64> = args
        .first()
        .map(|s| s.split(',').map(|v| v.parse().unwrap()).collect())
        .unwrap_or_else(|| vec![1]);
    let get = |i: usize, d: f64| args.get(i).map(|s| s.parse().unwrap()).unwrap_or(d);
    let conflict = get(1, 0.3);

    let mut world = SyntheticWorld::benchmark(conflict, 2024);
    world.signal_strength_protein = get(2, world.signal_strength_protein);
    world.signal_strength_genome = get(3, world.signal_strength_genome);
    world.context_scale = get(4, world.context_scale);
    world.observation_noise_protein = get(5, world.observation_noise_protein);
    world.observation_noise_genome = get(5, world.observation_noise_genome);
    world.latent_dim = args.get(8).map(|s| s.parse().unwrap()).unwrap_or(world.latent_dim);
    world.conflict_context_retention = args
        .get(10)
        .map(|s| s.parse().unwrap())
        .unwrap_or(world.conflict_context_retention);
    println!("retention {}", world.conflict_context_retention);
    world.unreliable_attenuation = args
        .get(11)
        .map(|s| s.parse().unwrap())
        .unwrap_or(world.unreliable_attenuation);
    println!("attenuation {}", world.unreliable_attenuation);
    world.protein_dim = args.get(12).map(|s| s.parse().unwrap()).unwrap_or(world.protein_dim);
    world.genome_dim = args.get(13).map(|s| s.parse().unwrap()).unwrap_or(world.genome_dim);
    println!("dims {} / {}", world.protein_dim, world.genome_dim);
    println!(
        "world: conflict {} alpha_p {} alpha_b {} ctx {} obs {} latent {}",
        world.conflict_rate,
        world.signal_strength_protein,
        world.signal_strength_genome,
        world.context_scale,
        world.observation_noise_protein,
        world.latent_dim
    );

    let mut base = ExperimentConfig::desk_default();
    base.fusion = microfuse::model::FusionConfig::with_dims(
        world.protein_dim,
        world.genome_dim,
        base.fusion.latent_dim,
    );
    base.max_epochs = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(base.max_epochs);
    base.patience = args.get(7).map(|s| s.parse().unwrap()).unwrap_or(base.patience);
    if let Some(p) = args.get(9) {
        base.fusion.dropout = p.parse().unwrap();
    }
    println!("dropout {}", base.fusion.dropout);
    println!("schedule: max_epochs {} patience {}", base.max_epochs, base.patience);
    base.seeds = seeds.clone();
    base.data = DataSource::Synthetic {
        world,
        n_pairs: 29_400,
        fractions: SplitFractions::default(),
        split_seed: 7,
    };
    let spec = SuiteSpec {
        base,
        variants: vec![
            (ModelKind::MicroFuse, AblationKind::Full),
            (ModelKind::ConcatMlp, AblationKind::Full),
            (ModelKind::ProstT5Only, AblationKind::Full),
            (ModelKind::BacformerOnly, AblationKind::Full),
            (ModelKind::MicroFuse, AblationKind::NoXmod),
            (ModelKind::MicroFuse, AblationKind::NoSupcon),
        ],
    };
    let start = Instant::now();
    let output = run_suite(&spec, 1).unwrap();
    let elapsed = start.elapsed();
    print!("{}", suite_summary(&output));
    println!("\n-- per-cell --");
    for cell in &output.cells {
        match &cell.outcome {
            Ok(s) => println!(
                "{:24} seed {}  epochs {:2} best@{:2}  val {:.4}  test auroc {:.4}  hard auroc {:.4}",
                format!("{}:{}", cell.key.model.name(), cell.key.ablation.name()),
                cell.key.seed,
                s.epochs_run,
                s.best_epoch,
                s.best_val_auroc,
                s.test.default_report.auroc,
                s.hard.as_ref().map(|h| h.default_report.auroc).unwrap_or(f64::NAN),
            ),
            Err(e) => println!(
                "{}:{} seed {} FAILED: {e}",
                cell.key.model.name(),
                cell.key.ablation.name(),
                cell.key.seed
            ),
        }
    }
    let get_agg = |m: ModelKind, a: AblationKind| -> (f64, f64) {
        let agg = output
            .aggregates
            .iter()
            .find(|g| g.model == m && g.ablation == a)
            .unwrap();
        let auroc = agg.test_default.iter().find(|(n, _, _)| *n == "auroc").unwrap().1;
        let hard = agg
            .hard
            .as_ref()
            .map(|h| h.iter().find(|(n, _, _)| *n == "auroc").unwrap().1)
            .unwrap_or(f64::NAN);
        (auroc, hard)
    };
    let (mf, mf_hard) = get_agg(ModelKind::MicroFuse, AblationKind::Full);
    let (cm, cm_hard) = get_agg(ModelKind::ConcatMlp, AblationKind::Full);
    let (p5, _) = get_agg(ModelKind::ProstT5Only, AblationKind::Full);
    let (bf, _) = get_agg(ModelKind::BacformerOnly, AblationKind::Full);
    let (noxmod, _) = get_agg(ModelKind::MicroFuse, AblationKind::NoXmod);
    let (nosup, _) = get_agg(ModelKind::MicroFuse, AblationKind::NoSupcon);
    println!("\n-- pattern checks (conflict {conflict}, seeds {seeds:?}) --");
    println!(
        "(a) microfuse-prostt5 {:.4}  microfuse-bacformer {:.4}  concat-prostt5 {:.4}  concat-bacformer {:.4}  (need >= 0.05)",
        mf - p5,
        mf - bf,
        cm - p5,
        cm - bf
    );
    println!("(b) microfuse {mf:.4} >= concat {cm:.4} : {}", mf >= cm);
    println!(
        "(c) hard margin {:.4} > full margin {:.4} : {}",
        mf_hard - cm_hard,
        mf - cm,
        mf_hard - cm_hard > mf - cm
    );
    println!(
        "(d) no_xmod drop {:.4} > no_supcon drop {:.4} : {}",
        mf - noxmod,
        mf - nosup,
        mf - noxmod > mf - nosup
    );
    println!("\nelapsed: {:.1}s", elapsed.as_secs_f64());
}
