//! Library side of the `vidapprox` binary: argument types, the command
//! implementations and the JSON/CSV records they write.

pub mod args;
pub mod artifacts;
pub mod commands;
