//! Binary text classification over embedding vectors.
//!
//! Text is cleaned and tokenized ([`textprep`]), turned into dense vectors
//! ([`embedio`]), and classified by either a two-layer MLP head
//! ([`mlphead`]) or a histogram gradient-boosted tree ensemble ([`gbdt`]).
//! [`hpo`] tunes the booster by seeded random search, [`metrics`] scores
//! predictions, and [`pipeline`] ties the stages together behind the
//! `clsboost` command-line tool.

pub mod embedio;
pub mod gbdt;
pub mod hpo;
pub mod metrics;
pub mod mlphead;
pub mod pipeline;
pub mod textprep;
