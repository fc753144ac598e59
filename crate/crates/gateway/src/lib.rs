//! Network gateway: socket servers in front of the per-stream pipeline,
//! plus episode recording and snapshot publishing.

pub mod config;
pub mod control;
pub mod emit;
pub mod handle_socket;
pub mod queue;
pub mod service;
pub mod status;
pub mod tls;
pub mod udp;

pub use config::GatewayConfig;
pub use service::{BoundAddrs, CommandEvent, Gateway, ShutdownReport};
pub use status::GatewayStatus;
