//! Everything upstream of the model: gene records, pair construction with
//! scaffold-level splits, embedding storage and normalization, sequence
//! identity and the hard conflict subset, and the synthetic world generator
//! used for desk-scale experiments.

pub mod genes;
pub mod identity;
pub mod pairs;
pub mod store;
pub mod synth;

pub use genes::{read_gene_records, write_gene_records, GeneRecord, Strand};
pub use identity::{hard_subset, sequence_identity};
pub use pairs::{
    balance_splits, build_dataset, build_pairs, compute_igs, read_pair_manifest, scaffold_split,
    write_pair_manifest, GenePair, PairRules, Split, SplitFractions,
};
pub use store::{read_store, write_store, EmbeddingStore, NormStats};
pub use synth::{generate_gene_records, synth_generate, GeneWorldConfig, SyntheticData, SyntheticWorld};
