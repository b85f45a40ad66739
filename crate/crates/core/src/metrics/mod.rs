//! BLEU, rating aggregation, reliability fitting and rank correlation.

pub mod bleu;
pub mod correlation;
pub mod ratings;
pub mod reliability;
pub mod special;
