//! Finite-level projective Fraïssé theory for graphs with quotient maps.
//!
//! Graphs are reflexive symmetric relations; arrows are quotient maps (surjective strict
//! homomorphisms). The crate builds finite prefixes of universal inverse sequences and answers
//! lifting questions against them by explicit search. Every witness it returns can be re-checked.

pub mod category;
pub mod error;
pub mod fraisse;
pub mod graph;
pub mod io;
pub mod kr;
pub mod limit;
pub mod maps;
pub mod par;
pub mod search;
pub mod solve;

pub use error::{Error, Result};
pub use graph::{are_isomorphic, enumerate_graphs, CanonicalCode, FiniteGraph, Vertex};
pub use maps::{compose, elementary_decompose, enumerate_quotients, merge_vertices, Classification, GraphMap};
