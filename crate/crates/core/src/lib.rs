//! Query obfuscation by category-pattern permutation, with a local search
//! simulator, relevance mining, a query-discrimination attack and an ad
//! exposure model for measuring what the obfuscation buys.

pub mod attack;
pub mod data;
pub mod harness;
pub mod lexicon;
pub mod obfuscator;
pub mod searchsim;
pub mod session;
pub mod synthetic;
pub mod textmine;
