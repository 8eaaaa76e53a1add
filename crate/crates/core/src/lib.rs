pub mod control;
pub mod eigenpath;
pub mod error;
pub mod linalg;
pub mod models;
pub mod propagate;
pub mod diagnostics;
pub mod scenario;
pub mod runner;
pub mod svg;
