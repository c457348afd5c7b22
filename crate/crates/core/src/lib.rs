//! Miquel dynamics on bipartite surface graphs.
//!
//! The crate is `no_std` and only needs `alloc`. It covers the geometry of the
//! extended complex plane, combinatorial surface graphs with their 4-mutation,
//! circle patterns and their moves, Clifford configurations, brute-force dimer
//! statistics with urban renewal checks, and the octahedral lattice.
#![no_std]

extern crate alloc;

pub mod circle_pattern;
pub mod clifford;
pub mod dimer;
pub mod geometry;
pub mod lattice;
pub mod surface_graph;

pub use geometry::{Circle, Complex, ExtendedComplex, MobiusMap};
pub use surface_graph::{EdgeId, FaceId, SurfaceGraph, VertexId};
