pub mod config;
pub mod designspace;
pub mod genai;
pub mod lexicon;
pub mod pipeline;
pub mod scoring;
pub mod session;
pub mod units;
