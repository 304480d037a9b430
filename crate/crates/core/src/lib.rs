//! Two-stage short-term wind power forecasting.

mod binio;
pub mod data;
pub mod ensemble;
pub mod eval;
pub mod models;
pub mod pipeline;
pub mod report;
