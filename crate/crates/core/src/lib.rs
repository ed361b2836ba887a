pub mod error;
pub mod eval;
pub mod featurize;
pub mod features;
pub mod index;
pub mod math;
pub mod neural;
pub mod ranker;
pub mod synth;
pub mod table;
pub mod tensorfile;
pub mod text;
pub mod pipeline;
