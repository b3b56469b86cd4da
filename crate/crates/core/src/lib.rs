//! Detecting AI-generated text with topic-grouped evaluation.
//!
//! Pipeline: load and clean a labelled corpus ([`corpus`]), split it by topic
//! so no topic crosses partitions ([`splitter`]), turn text into features
//! ([`textproc`], [`tfidf`]), train a TF-IDF logistic regression
//! ([`logreg`]) or a bidirectional LSTM ([`bilstm`]), then score and report
//! ([`metrics`], [`persist`]).

pub mod bilstm;
pub mod corpus;
pub mod error;
pub mod logreg;
pub mod metrics;
pub mod persist;
pub mod rng;
pub mod splitter;
pub mod textproc;
pub mod tfidf;

pub use error::{Error, Result};
