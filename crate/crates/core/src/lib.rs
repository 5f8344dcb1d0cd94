//! Exhaustive generation of saturated planar maps assembled from a base of
//! colored motifs, with canonical deduplication and structural indices.

pub mod error;
pub mod folding;
pub mod indices;
pub mod metamotif;
pub mod backbone;
pub mod canonical;
pub mod catalog;
pub mod model;

pub use error::{Error, Result};
pub use model::{Attachment, Color, ColorAlphabet, Entry, MapOfMotifs, MolecularMap, Motif, MotifBase, PortRef};
