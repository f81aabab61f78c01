#![allow(dead_code)]

pub mod naive_ts;

use cherry_core::parser::{parse_program, Program};

pub const CORPUS: [&str; 6] = ["vod_b", "vod_c", "vod_d", "producer_consumer", "producer_consumer_prime", "multiparty3"];
pub const BINARY: [&str; 5] = ["vod_b", "vod_c", "vod_d", "producer_consumer", "producer_consumer_prime"];

pub fn source(name: &str) -> String {
    let path = format!("{}/../cli/examples/{name}.chpi", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn load(name: &str) -> Program {
    parse_program(&source(name)).unwrap_or_else(|d| panic!("{name}: {d:?}"))
}
