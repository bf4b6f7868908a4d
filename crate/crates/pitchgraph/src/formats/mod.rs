//! On-disk formats: the upstream inputs and the pipeline's cached artifacts.

mod binio;
pub mod checkpoint;
pub mod features;
pub mod flow;
pub mod frames;
pub mod pgw;
pub mod records;
pub mod tables;
