pub mod eval_cmd;
pub mod gen;
pub mod infer;
pub mod learn;
pub mod plot;
pub mod synth;
pub mod train;
