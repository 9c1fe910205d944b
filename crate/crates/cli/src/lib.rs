//! HTTP service and JSON views behind the `ared` command.

pub mod server;
pub mod views;
