pub mod config;
pub mod error;
pub mod expr;
pub mod formats;
pub mod plot;
pub mod report;
pub mod stages;
