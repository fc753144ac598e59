//! Operator control endpoint. Plain TCP clients send one command per line
//! and get one JSON document per line back. Browsers can open the same port
//! as a WebSocket and send one command per text message.
//!
//! Commands: `status`, `record start <label>`, `record stop`, `config get`.

use std::net::SocketAddr;
use std::sync::Arc;

use futures_util::{SinkExt, StreamExt};
use tokio::io::{AsyncBufReadExt, AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::watch;
use tokio_tungstenite::tungstenite::Message;
use tracing::{debug, warn};

use crate::service::Core;

/// Longest accepted command line.
const MAX_LINE: usize = 4096;

pub(crate) async fn serve_control(listener: TcpListener, core: Arc<Core>, mut shutdown: watch::Receiver<bool>) {
    let mut clients = tokio::task::JoinSet::new();
    loop {
        let (tcp, peer) = tokio::select! {
            _ = shutdown.changed() => break,
            r = listener.accept() => match r {
                Ok(r) => r,
                Err(e) => {
                    warn!("control accept failed: {e}");
                    continue;
                }
            },
        };
        clients.spawn(serve_client(tcp, peer, core.clone(), shutdown.clone()));
        while clients.try_join_next().is_some() {}
    }
    clients.shutdown().await;
}

async fn serve_client(tcp: TcpStream, peer: SocketAddr, core: Arc<Core>, shutdown: watch::Receiver<bool>) {
    let mut head = [0u8; 4];
    let is_http = matches!(tcp.peek(&mut head).await, Ok(4) if &head == b"GET ");
    let result = if is_http {
        serve_websocket(tcp, &core, shutdown).await
    } else {
        serve_lines(tcp, &core, shutdown).await
    };
    if let Err(e) = result {
        debug!(%peer, "control client ended: {e}");
    }
}

async fn serve_lines(tcp: TcpStream, core: &Core, mut shutdown: watch::Receiver<bool>) -> anyhow::Result<()> {
    let (read, mut write) = tcp.into_split();
    let mut reader = BufReader::new(read);
    let mut line = String::new();
    loop {
        line.clear();
        let mut limited = (&mut reader).take(MAX_LINE as u64 + 1);
        let n = tokio::select! {
            _ = shutdown.changed() => return Ok(()),
            n = limited.read_line(&mut line) => n?,
        };
        if n == 0 {
            return Ok(());
        }
        let response = if line.len() > MAX_LINE && !line.ends_with('\n') {
            // Discard the rest of an overlong line before answering.
            let mut rest = Vec::new();
            reader.read_until(b'\n', &mut rest).await?;
            serde_json::json!({ "ok": false, "error": "command too long" })
        } else if line.trim().is_empty() {
            continue;
        } else {
            core.control(&line).await
        };
        let mut out = serde_json::to_vec(&response)?;
        out.push(b'\n');
        write.write_all(&out).await?;
    }
}

async fn serve_websocket(tcp: TcpStream, core: &Core, mut shutdown: watch::Receiver<bool>) -> anyhow::Result<()> {
    let mut ws = tokio_tungstenite::accept_async(tcp).await?;
    loop {
        let msg = tokio::select! {
            _ = shutdown.changed() => break,
            msg = ws.next() => msg,
        };
        match msg {
            None | Some(Ok(Message::Close(_))) => break,
            Some(Err(e)) => return Err(e.into()),
            Some(Ok(Message::Text(text))) => {
                let response = core.control(text.as_str()).await;
                ws.send(Message::text(response.to_string())).await?;
            }
            Some(Ok(_)) => {}
        }
    }
    let _ = ws.close(None).await;
    Ok(())
}
