//! Rule-based split-and-rephrase with the evaluation tooling around it:
//! annotation readers, the three-handler rule engine, BLEU and rating
//! metrics, benchmark handling and the rewrite/rating task service.

pub mod annotation;
pub mod datasets;
pub mod manifest;
pub mod metrics;
pub mod patterns;
pub mod rules;
pub mod service;
