//! Datasets and file formats: the four-cluster synthetic ensemble, PCA for
//! visual exports, ensemble files, and the molecule codec.

mod ensemble_io;
pub mod graph;
pub mod molecule;
mod multicluster;
mod pca;

pub use ensemble_io::Ensemble;
pub use graph::{
    complete_valences, infer_bonds, infer_bonds_with, max_matching, Adjacency, BondRules, CovalentRadii, MolecularGraph,
};
pub use molecule::{
    align_molecule, decode_state, detect_atom_count, encode_molecule, format_molecules, parse_molecule_records,
    parse_molecules, principal_state, Element, EncodeOptions, MoleculeRecord, NormalizationContext, ScaleMode,
};
pub use multicluster::{cluster_centers, gen_multicluster, gen_multicluster_scaled, ClusterSample, DEFAULT_SCALE};
pub use pca::{pca_project, Projection};
