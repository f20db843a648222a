//! Test support shared by the core integration tests and the acceptance
//! harness of the command-line crate.
#![allow(dead_code)]

pub mod checks;
pub mod oracles;
pub mod scripted;
pub mod stub_server;

use std::path::PathBuf;

/// The repository's `fixtures/` directory; every crate sits two levels below the root.
pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}
