pub mod corpus;
pub mod coverage;
pub mod difftest;
pub mod driver;
pub mod isa;
pub mod lm;
pub mod rl;
pub mod sim;
