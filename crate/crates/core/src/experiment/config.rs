//! Experiment configuration: model/ablation selection, optimization
//! hyperparameters, data source, and the flat key-value config file format.

use std::path::PathBuf;

use crate::data::{SplitFractions, SyntheticWorld};
use crate::error::{Error, Result};
use crate::losses::LossConfig;
use crate::model::{ExpertKind, FusionConfig, ModelKind};

/// One structural or loss modification of the full model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationKind {
    Full,
    NoDisagreementWeighting,
    NoInteractionExperts,
    NoConflictExpert,
    NoSupcon,
    CeOnly,
    NoXmod,
}

impl AblationKind {
    pub const ALL: [AblationKind; 7] = [
        AblationKind::Full,
        AblationKind::NoDisagreementWeighting,
        AblationKind::NoInteractionExperts,
        AblationKind::NoConflictExpert,
        AblationKind::NoSupcon,
        AblationKind::CeOnly,
        AblationKind::NoXmod,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationKind::Full => "full",
            AblationKind::NoDisagreementWeighting => "no_disagreement_weighting",
            AblationKind::NoInteractionExperts => "no_interaction_experts",
            AblationKind::NoConflictExpert => "no_conflict_expert",
            AblationKind::NoSupcon => "no_supcon",
            AblationKind::CeOnly => "ce_only",
            AblationKind::NoXmod => "no_xmod",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        AblationKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown ablation kind `{s}`")))
    }
}

/// Resolve an ablation into the expert set and the adjusted loss config.
pub fn apply_ablation(
    kind: AblationKind,
    base: &LossConfig<f64>,
) -> (Vec<ExpertKind>, LossConfig<f64>) {
    let mut loss = *base;
    let experts: Vec<ExpertKind> = match kind {
        AblationKind::NoInteractionExperts => vec![ExpertKind::Protein, ExpertKind::Genome],
        AblationKind::NoConflictExpert => vec![
            ExpertKind::Protein,
            ExpertKind::Genome,
            ExpertKind::Agreement,
        ],
        _ => ExpertKind::ALL.to_vec(),
    };
    match kind {
        AblationKind::NoDisagreementWeighting => loss.disagreement_weighting = false,
        AblationKind::NoSupcon => loss.lambda_supcon = 0.0,
        AblationKind::NoXmod => loss.lambda_xmod = 0.0,
        AblationKind::CeOnly => {
            loss.lambda_supcon = 0.0;
            loss.lambda_xmod = 0.0;
        }
        AblationKind::Full | AblationKind::NoInteractionExperts | AblationKind::NoConflictExpert => {}
    }
    (experts, loss)
}

/// Where training data comes from.
#[derive(Debug, Clone)]
pub enum DataSource {
    Synthetic {
        world: SyntheticWorld,
        n_pairs: usize,
        fractions: SplitFractions,
        split_seed: u64,
    },
    Files {
        store: PathBuf,
        manifest: PathBuf,
        identities: Option<PathBuf>,
    },
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub ablation: AblationKind,
    pub fusion: FusionConfig,
    pub loss: LossConfig<f64>,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seeds: Vec<u64>,
    pub sweep_resolution: usize,
    pub data: DataSource,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelKind::MicroFuse,
            ablation: AblationKind::Full,
            fusion: FusionConfig::default(),
            loss: LossConfig::default(),
            learning_rate: 8e-4,
            weight_decay: 1e-4,
            batch_size: 4096,
            max_epochs: 70,
            patience: 14,
            seeds: vec![1, 2, 3],
            sweep_resolution: crate::metrics::DEFAULT_SWEEP_RESOLUTION,
            data: DataSource::Synthetic {
                world: SyntheticWorld::default(),
                n_pairs: 29_400,
                fractions: SplitFractions::default(),
                split_seed: 7,
            },
        }
    }
}

impl ExperimentConfig {
    /// Desk-scale preset: a small latent, the benchmark synthetic world,
    /// short schedule. The paper-scale defaults stay on `Default`.
    pub fn desk_default() -> Self {
        let world = SyntheticWorld::benchmark(0.3, 2024);
        let mut cfg = ExperimentConfig {
            fusion: FusionConfig::with_dims(world.protein_dim, world.genome_dim, 64),
            batch_size: 512,
            max_epochs: 24,
            patience: 5,
            ..ExperimentConfig::default()
        };
        cfg.data = DataSource::Synthetic {
            world,
            n_pairs: 29_400,
            fractions: SplitFractions::default(),
            split_seed: 7,
        };
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.fusion.validate()?;
        self.loss.validate()?;
        if self.patience >= self.max_epochs {
            return Err(Error::InvalidConfig(format!(
                "patience {} must be below max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("at least one seed required".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.ablation != AblationKind::Full && self.model != ModelKind::MicroFuse {
            return Err(Error::InvalidConfig(
                "ablations apply only to the microfuse model".into(),
            ));
        }
        if let DataSource::Synthetic { world, n_pairs, fractions, .. } = &self.data {
            world.validate()?;
            fractions.validate()?;
            if *n_pairs == 0 {
                return Err(Error::InvalidConfig("n_pairs must be positive".into()));
            }
        }
        Ok(())
    }

    /// Parse the flat `key = value` config format. Unknown keys error, so
    /// typos cannot silently fall back to defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut world = SyntheticWorld::default();
        let mut n_pairs = 29_400usize;
        let mut fractions = SplitFractions::default();
        let mut split_seed = 7u64;
        let mut data_kind = String::from("synth");
        let mut store_path: Option<PathBuf> = None;
        let mut manifest_path: Option<PathBuf> = None;
        let mut identity_path: Option<PathBuf> = None;
        let mut explicit_dims: (Option<usize>, Option<usize>) = (None, None);
        let mut latent: Option<usize> = None;
        let mut dropout: Option<f64> = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("config line {} is not `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad =
                |what: &str| Error::InvalidConfig(format!("bad {what} `{value}` on line {}", lineno + 1));
            macro_rules! num {
                ($t:ty, $what:expr) => {
                    value.parse::<$t>().map_err(|_| bad($what))?
                };
            }
            match key {
                "model" => cfg.model = ModelKind::parse(value)?,
                "ablation" => cfg.ablation = AblationKind::parse(value)?,
                "latent_dim" => latent = Some(num!(usize, "latent_dim")),
                "protein_dim" => explicit_dims.0 = Some(num!(usize, "protein_dim")),
                "genome_dim" => explicit_dims.1 = Some(num!(usize, "genome_dim")),
                "dropout" => dropout = Some(num!(f64, "dropout")),
                "lambda_xmod" => cfg.loss.lambda_xmod = num!(f64, "lambda_xmod"),
                "lambda_supcon" => cfg.loss.lambda_supcon = num!(f64, "lambda_supcon"),
                "tau_xmod" => cfg.loss.tau_xmod = num!(f64, "tau_xmod"),
                "tau_supcon" => cfg.loss.tau_supcon = num!(f64, "tau_supcon"),
                "learning_rate" => cfg.learning_rate = num!(f64, "learning_rate"),
                "weight_decay" => cfg.weight_decay = num!(f64, "weight_decay"),
                "batch_size" => cfg.batch_size = num!(usize, "batch_size"),
                "max_epochs" => cfg.max_epochs = num!(usize, "max_epochs"),
                "patience" => cfg.patience = num!(usize, "patience"),
                "sweep_resolution" => cfg.sweep_resolution = num!(usize, "sweep_resolution"),
                "seeds" => {
                    cfg.seeds = value
                        .split(',')
                        .map(|s| s.trim().parse::<u64>().map_err(|_| bad("seed list")))
                        .collect::<Result<Vec<_>>>()?;
                }
                "data" => data_kind = value.to_string(),
                "store" => store_path = Some(PathBuf::from(value)),
                "manifest" => manifest_path = Some(PathBuf::from(value)),
                "identities" => identity_path = Some(PathBuf::from(value)),
                "n_pairs" => n_pairs = num!(usize, "n_pairs"),
                "split_seed" => split_seed = num!(u64, "split_seed"),
                "fractions" => {
                    let parts: Vec<f64> = value
                        .split(',')
                        .map(|s| s.trim().parse::<f64>().map_err(|_| bad("fractions")))
                        .collect::<Result<Vec<_>>>()?;
                    if parts.len() != 3 {
                        return Err(bad("fractions (need train,val,test)"));
                    }
                    fractions = SplitFractions {
                        train: parts[0],
                        val: parts[1],
                        test: parts[2],
                    };
                }
                "world_seed" => world.seed = num!(u64, "world_seed"),
                "conflict_rate" => world.conflict_rate = num!(f64, "conflict_rate"),
                "world_latent_dim" => world.latent_dim = num!(usize, "world_latent_dim"),
                "world_protein_dim" => world.protein_dim = num!(usize, "world_protein_dim"),
                "world_genome_dim" => world.genome_dim = num!(usize, "world_genome_dim"),
                "world_signal_channels" => world.signal_channels = num!(usize, "world_signal_channels"),
                "world_positive_rate" => world.positive_rate = num!(f64, "world_positive_rate"),
                "world_scaffold_block" => world.scaffold_block = num!(usize, "world_scaffold_block"),
                "world_signal_strength_protein" => {
                    world.signal_strength_protein = num!(f64, "world_signal_strength_protein")
                }
                "world_signal_strength_genome" => {
                    world.signal_strength_genome = num!(f64, "world_signal_strength_genome")
                }
                "world_signal_noise_protein" => {
                    world.signal_noise_protein = num!(f64, "world_signal_noise_protein")
                }
                "world_signal_noise_genome" => {
                    world.signal_noise_genome = num!(f64, "world_signal_noise_genome")
                }
                "world_observation_noise_protein" => {
                    world.observation_noise_protein = num!(f64, "world_observation_noise_protein")
                }
                "world_observation_noise_genome" => {
                    world.observation_noise_genome = num!(f64, "world_observation_noise_genome")
                }
                "world_context_scale" => world.context_scale = num!(f64, "world_context_scale"),
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown config key `{other}` on line {}",
                        lineno + 1
                    )))
                }
            }
        }

        cfg.data = match data_kind.as_str() {
            "synth" => {
                if explicit_dims.0.is_none() {
                    explicit_dims.0 = Some(world.protein_dim);
                }
                if explicit_dims.1.is_none() {
                    explicit_dims.1 = Some(world.genome_dim);
                }
                DataSource::Synthetic {
                    world,
                    n_pairs,
                    fractions,
                    split_seed,
                }
            }
            "files" => DataSource::Files {
                store: store_path
                    .ok_or_else(|| Error::InvalidConfig("data = files requires `store`".into()))?,
                manifest: manifest_path
                    .ok_or_else(|| Error::InvalidConfig("data = files requires `manifest`".into()))?,
                identities: identity_path,
            },
            other => return Err(Error::InvalidConfig(format!("unknown data kind `{other}`"))),
        };

        let mut fusion = FusionConfig::with_dims(
            explicit_dims.0.unwrap_or(cfg.fusion.protein_dim),
            explicit_dims.1.unwrap_or(cfg.fusion.genome_dim),
            latent.unwrap_or(cfg.fusion.latent_dim),
        );
        if let Some(p) = dropout {
            fusion.dropout = p;
        }
        cfg.fusion = fusion;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ablations_map_to_the_expected_modifications() {
        let base = LossConfig::<f64>::default();
        let (experts, loss) = apply_ablation(AblationKind::CeOnly, &base);
        assert_eq!(experts.len(), 4);
        assert_eq!(loss.lambda_xmod, 0.0);
        assert_eq!(loss.lambda_supcon, 0.0);

        let (experts, loss) = apply_ablation(AblationKind::NoInteractionExperts, &base);
        assert_eq!(experts, vec![ExpertKind::Protein, ExpertKind::Genome]);
        assert_eq!(loss.lambda_xmod, base.lambda_xmod);

        let (experts, _) = apply_ablation(AblationKind::NoConflictExpert, &base);
        assert_eq!(experts.len(), 3);
        assert!(!experts.contains(&ExpertKind::Conflict));

        let (_, loss) = apply_ablation(AblationKind::NoDisagreementWeighting, &base);
        assert!(!loss.disagreement_weighting);

        let (_, loss) = apply_ablation(AblationKind::NoXmod, &base);
        assert_eq!(loss.lambda_xmod, 0.0);
        assert_eq!(loss.lambda_supcon, base.lambda_supcon);
    }

    #[test]
    fn paper_scale_defaults() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.learning_rate, 8e-4);
        assert_eq!(cfg.weight_decay, 1e-4);
        assert_eq!(cfg.batch_size, 4096);
        assert_eq!(cfg.max_epochs, 70);
        assert_eq!(cfg.patience, 14);
        assert_eq!(cfg.fusion.latent_dim, 512);
        assert_eq!(cfg.fusion.protein_dim, 3072);
        assert_eq!(cfg.fusion.genome_dim, 960);
        assert_eq!(cfg.loss.lambda_xmod, 0.02);
        assert_eq!(cfg.loss.lambda_supcon, 0.03);
        assert_eq!(cfg.loss.tau_xmod, 0.12);
        assert_eq!(cfg.loss.tau_supcon, 0.15);
        assert_eq!(cfg.fusion.dropout, 0.20);
        assert_eq!(cfg.seeds.len(), 3);
    }

    #[test]
    fn config_file_roundtrip() {
        let text = "\
# desk run
model = microfuse
ablation = no_xmod
latent_dim = 32
batch_size = 256
max_epochs = 10
patience = 3
seeds = 5, 6
data = synth
conflict_rate = 0.3
n_pairs = 2000
world_protein_dim = 48
world_genome_dim = 24
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.ablation, AblationKind::NoXmod);
        assert_eq!(cfg.fusion.latent_dim, 32);
        assert_eq!(cfg.fusion.protein_dim, 48);
        assert_eq!(cfg.fusion.genome_dim, 24);
        assert_eq!(cfg.seeds, vec![5, 6]);
        match cfg.data {
            DataSource::Synthetic { world, n_pairs, .. } => {
                assert_eq!(world.conflict_rate, 0.3);
                assert_eq!(n_pairs, 2000);
            }
            _ => panic!("expected synthetic data"),
        }
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(ExperimentConfig::parse("no_such_key = 5\n").is_err());
        assert!(ExperimentConfig::parse("batch_size = many\n").is_err());
        assert!(ExperimentConfig::parse("model = resnet\n").is_err());
        // patience >= max_epochs
        assert!(ExperimentConfig::parse("max_epochs = 5\npatience = 5\n").is_err());
        // ablation on a baseline
        assert!(ExperimentConfig::parse("model = concat-mlp\nablation = no_xmod\n").is_err());
        // files source requires paths
        assert!(ExperimentConfig::parse("data = files\n").is_err());
    }
}
