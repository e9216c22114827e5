pub mod family;
pub mod kernel;
pub mod sequential;
pub mod decomposition;
pub mod montecarlo;
pub mod normal;
pub mod parallel;
pub mod random_env;
pub mod rng;
