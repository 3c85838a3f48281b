pub mod calculus;
pub mod curriculum;
pub mod decompose;
pub mod expr;
pub mod problem;
pub mod reward;
pub mod rl;
