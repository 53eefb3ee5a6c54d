//! Length-delimited client for scripted play and probes.

use std::net::SocketAddr;
use std::time::Duration;

use bytes::Bytes;
use futures::{SinkExt, StreamExt};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio_util::codec::{Framed, LengthDelimitedCodec};

use ddz_core::session::{ClientMessage, ServerMessage};

use crate::MAX_FRAME_BYTES;

pub struct Client {
    io: Framed<TcpStream, LengthDelimitedCodec>,
}

impl Client {
    pub async fn connect(addr: SocketAddr) -> std::io::Result<Client> {
        let stream = TcpStream::connect(addr).await?;
        let codec = LengthDelimitedCodec::builder().max_frame_length(MAX_FRAME_BYTES).new_codec();
        Ok(Client {
            io: Framed::new(stream, codec),
        })
    }

    /// Sends a raw frame, valid JSON or not.
    pub async fn send_raw(&mut self, text: &str) -> std::io::Result<()> {
        self.io.send(Bytes::copy_from_slice(text.as_bytes())).await
    }

    pub async fn send(&mut self, msg: &ClientMessage) -> std::io::Result<()> {
        self.send_raw(&msg.to_json()).await
    }

    /// Next raw frame; `None` once the server hangs up.
    pub async fn recv_raw(&mut self) -> std::io::Result<Option<String>> {
        match self.io.next().await {
            Some(Ok(b)) => Ok(Some(String::from_utf8_lossy(&b).into_owned())),
            Some(Err(e)) => Err(e),
            None => Ok(None),
        }
    }

    pub async fn recv(&mut self) -> std::io::Result<Option<ServerMessage>> {
        match self.recv_raw().await? {
            Some(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e)),
            None => Ok(None),
        }
    }

    /// Like [`Client::recv`] but gives up after `limit`.
    pub async fn recv_within(&mut self, limit: Duration) -> std::io::Result<Option<ServerMessage>> {
        tokio::time::timeout(limit, self.recv())
            .await
            .map_err(|_| std::io::Error::from(std::io::ErrorKind::TimedOut))?
    }
}

/// Body of the `/health` probe.
pub async fn health(addr: SocketAddr) -> std::io::Result<serde_json::Value> {
    let mut stream = TcpStream::connect(addr).await?;
    stream
        .write_all(b"GET /health HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n")
        .await?;
    let mut resp = Vec::new();
    stream.read_to_end(&mut resp).await?;
    let text = String::from_utf8_lossy(&resp);
    let (head, body) = text
        .split_once("\r\n\r\n")
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidData, "no HTTP body"))?;
    if !head.starts_with("HTTP/1.1 200") {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, head.to_string()));
    }
    serde_json::from_str(body).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}
