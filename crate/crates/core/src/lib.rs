pub mod linalg;
pub mod scalars;
pub mod lattice;
pub mod rootsys;
pub mod report;
pub mod refsys;
pub mod gradedlie;
pub mod realizations;
pub mod derivations;
pub mod extensions;
pub mod eala;
pub mod registry;
