pub mod cli;
pub mod consensus;
pub mod dsp;
pub mod edf;
pub mod eval;
pub mod hypno;
pub mod stager;
pub mod uncertainty;
pub mod synth;
pub mod reportio;
pub mod review;
