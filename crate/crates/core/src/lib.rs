pub mod asymptotics;
pub mod cli;
pub mod cpd;
pub mod error;
pub mod expfam;
pub mod experiment;
pub mod mc;
pub mod nonparam;
pub mod simgen;
