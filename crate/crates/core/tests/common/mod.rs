//! Generators and oracles shared by the integration test targets.
#![allow(dead_code)]
pub mod dag;
pub mod git;
pub mod http;
