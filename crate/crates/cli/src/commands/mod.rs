pub mod augment;
pub mod eval;
pub mod gen_corpus;
pub mod generate;
pub mod parse_tools;
pub mod train;
