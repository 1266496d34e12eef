pub mod error;
pub mod lattice;
pub mod linalg;
pub mod spectra;
pub mod commutators;
pub mod hartree_fock;
pub mod many_body;
pub mod experiments;
