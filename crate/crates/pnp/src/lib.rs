//! Files, HTTP model backend, parallel benchmark, and the `pnp` command line
//! on top of `pnp-core`.

pub mod bench;
pub mod cli;
pub mod http;
pub mod io;
