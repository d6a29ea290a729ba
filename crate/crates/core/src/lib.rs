//! Data layer for an interactive map of school physical-fitness-test results.
//!
//! * [`model`]: codes, enumerations and fitness records
//! * [`ingest`]: research-file cleaning and the immutable [`ingest::Snapshot`]
//! * [`geo`]: projection, point clustering, choropleth classes and GeoJSON assembly
//! * [`custom`]: user-uploaded district layers
//! * [`stats`]: OLS with inference and VIF diagnostics, plus the district case study
//! * [`synth`]: synthetic snapshots for demos and tests

pub mod custom;
pub mod geo;
pub mod ingest;
pub mod model;
pub mod stats;
pub mod synth;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/records.md")]
    mod records {}
    #[doc = include_str!("../../../book/src/snapshots.md")]
    mod snapshots {}
    #[doc = include_str!("../../../book/src/map.md")]
    mod map {}
    #[doc = include_str!("../../../book/src/custom-layers.md")]
    mod custom_layers {}
    #[doc = include_str!("../../../book/src/regression.md")]
    mod regression {}
    #[doc = include_str!("../../../book/src/http-api.md")]
    mod http_api {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
