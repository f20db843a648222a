//! Scene-graph planning engine: scene and dataset model, KNN scene graph with
//! weight modulation, step-by-step plan generation, route language and
//! verification, and text metrics for plan evaluation.

pub mod dataset;
pub mod generators;
pub mod graph;
pub mod metrics;
pub mod plan;
pub mod route;
pub mod scene;
pub mod text;
