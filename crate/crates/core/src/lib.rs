//! Lane-change cut-in mining, surrogate safety metrics and two-population
//! statistics for recorded driving scenarios.
//!
//! The pipeline runs [`trajmodel`] → [`detector`] → [`metrics`] → [`stats`],
//! with [`synth`] providing labelled corpora and [`report`] wiring the steps
//! into commands that write reproducible report files.

pub mod detector;
pub mod metrics;
pub mod report;
pub mod stats;
pub mod synth;
pub mod trajmodel;

#[cfg(test)]
mod testkit;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/interchange.md")]
    mod interchange {}
    #[doc = include_str!("../../../book/src/detection.md")]
    mod detection {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
