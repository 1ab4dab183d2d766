//! Network front ends: line-delimited JSON environment sessions over TCP or
//! stdio, and an HTTP/JSON API over the high-level operations.

mod http;
mod ndjson;

pub use http::{router, serve_http, AppState, SessionCreated, MAX_SESSIONS};
pub use ndjson::{serve_lines, serve_stdio, serve_tcp, Transport};
