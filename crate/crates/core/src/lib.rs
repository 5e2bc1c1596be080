pub mod clifford;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod lattice;
pub mod sections;
pub mod operators;
pub mod report;
pub mod spectral;
pub mod verify;
pub mod cli;
