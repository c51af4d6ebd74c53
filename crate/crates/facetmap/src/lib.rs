//! Std side of facetmap: Overpass ingestion, snapshot files, reports, the
//! HTTP map service and the command line front end. The algorithms live in
//! [`facetmap_core`].

pub mod cli;
pub mod ingestion;
pub mod report;
pub mod service;
pub mod snapshot;

pub use facetmap_core as core;
