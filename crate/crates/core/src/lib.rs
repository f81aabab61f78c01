//! Reversible session calculus with commit, roll and abort: syntax, parsing, typing,
//! compliance checking, rollback safety and executable semantics.

#![no_std]

extern crate alloc;

pub mod canon;
pub mod compliance;
pub mod gen;
pub mod multiparty;
pub mod parser;
pub mod render;
pub mod runtime;
pub mod syntax;
pub mod types;
pub mod typing;
