//! Syntactically controlled paraphrase generation.
//!
//! A sentence is split into an order-free bag of words and its constituency
//! parse. A position-free semantic encoder reads the bag, a position-aware
//! syntactic encoder reads the linearized parse, and a decoder attending to
//! both is trained to reconstruct the sentence. Swapping in a different
//! parse at inference time yields a paraphrase following that parse.

pub mod evalkit;
pub mod numerics;
pub mod parsegen;
pub mod parsekit;
pub mod pipeline;
pub mod tokenizer;
pub mod synpg;
pub mod transformer;
