//! Deterministic ingestion and serialization for every pipeline artifact:
//! image sequences (PNG / binary PGM / PPM), Middlebury `.flo` flow fields,
//! 16-bit PGM boundary maps, JSON manifests, and JSON-lines proposals.

mod boundary;
mod flo;
mod manifest;
mod pnm;
mod proposals;

pub use boundary::{read_boundary_map, read_boundary_map_file, write_boundary_map, write_boundary_map_file};
pub use flo::{read_flow, read_flow_file, write_flow, write_flow_file};
pub use manifest::{load_frame, load_sequence, save_sequence, SequenceManifest};
pub use pnm::{read_pnm, write_frame_pnm};
pub use proposals::{read_proposals, write_proposals, ProposalRecord};
