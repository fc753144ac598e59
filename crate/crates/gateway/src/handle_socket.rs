//! Handle channel: a persistent WebSocket carrying one JSON frame per text
//! message, optionally over TLS.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use futures_util::StreamExt;
use teleop_core::codec::parse_handle_frame_json;
use teleop_core::pipeline::RawFrame;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::watch;
use tokio_rustls::TlsAcceptor;
use tokio_tungstenite::tungstenite::Message;
use tracing::{debug, info, warn};

use crate::service::Core;
use crate::tls::BoxedStream;

pub(crate) async fn serve_handle_socket(
    listener: TcpListener,
    tls: Option<TlsAcceptor>,
    core: Arc<Core>,
    mut shutdown: watch::Receiver<bool>,
) {
    let mut clients = tokio::task::JoinSet::new();
    loop {
        let (tcp, peer) = tokio::select! {
            _ = shutdown.changed() => break,
            r = listener.accept() => match r {
                Ok(r) => r,
                Err(e) => {
                    warn!("handle socket accept failed: {e}");
                    continue;
                }
            },
        };
        let _ = tcp.set_nodelay(true);
        clients.spawn(serve_client(tcp, peer, tls.clone(), core.clone(), shutdown.clone()));
        // Reap finished clients so the set does not grow without bound.
        while clients.try_join_next().is_some() {}
    }
    clients.shutdown().await;
}

async fn serve_client(
    tcp: TcpStream,
    peer: SocketAddr,
    tls: Option<TlsAcceptor>,
    core: Arc<Core>,
    mut shutdown: watch::Receiver<bool>,
) {
    let stream: BoxedStream = match tls {
        None => Box::new(tcp),
        Some(acceptor) => match acceptor.accept(tcp).await {
            Ok(s) => Box::new(s),
            Err(e) => {
                core.metrics.reject("handle", "tls handshake");
                warn!(%peer, "TLS handshake failed: {e}");
                return;
            }
        },
    };
    let mut ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            core.metrics.reject("handle", "websocket handshake");
            warn!(%peer, "WebSocket handshake failed: {e}");
            return;
        }
    };
    core.metrics.handle(|h| h.connections += 1);
    info!(%peer, "handle client connected");
    loop {
        let msg = tokio::select! {
            _ = shutdown.changed() => break,
            msg = ws.next() => msg,
        };
        let arrival = Instant::now();
        let text = match msg {
            None => break,
            Some(Err(e)) => {
                debug!(%peer, "handle socket error: {e}");
                break;
            }
            Some(Ok(Message::Text(text))) => text,
            Some(Ok(Message::Close(_))) => break,
            Some(Ok(Message::Binary(_))) => {
                core.metrics.handle(|h| h.messages += 1);
                core.metrics.reject("handle", "binary message");
                continue;
            }
            Some(Ok(_)) => continue,
        };
        core.metrics.handle(|h| h.messages += 1);
        match parse_handle_frame_json(text.as_str()) {
            Ok(frame) => {
                core.metrics.handle(|h| h.delivered += 1);
                core.deliver(RawFrame::Handle(frame), None, arrival);
            }
            Err(rejection) => {
                core.metrics.reject("handle", rejection.reason());
                debug!(%peer, "handle frame rejected: {rejection}");
            }
        }
    }
    let _ = ws.close(None).await;
    info!(%peer, "handle client disconnected");
}
