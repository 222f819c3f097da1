//! Command line entry points and the HTTP service for the distill pipeline.

pub mod commands;
pub mod server;
