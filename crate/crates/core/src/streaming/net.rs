/*
  Copyright 2026 The kt-core Authors

  Licensed under the Apache License, Version 2.0 (the "License");
  you may not use this file except in compliance with the License.
  You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

  Unless required by applicable law or agreed to in writing, software
  distributed under the License is distributed on an "AS IS" BASIS,
  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
  See the License for the specific language governing permissions and
  limitations under the License.
*/

//! Network endpoints over the broker.
//!
//! Two transports carry the same JSON messages: raw TCP with a 4-byte
//! big-endian length prefix per frame, and WebSocket with one text message
//! per frame. A client publishes by sending an [`Envelope`]; it reads a topic
//! by sending
//!
//! ```json
//! {"type":"subscribe","topic":"kt.states","from_seq":0}
//! ```
//!
//! after which every message on that topic from the given log offset is
//! forwarded. Rejected frames are answered with
//! `{"type":"error","message":"..."}`.

use std::io::{self, BufReader, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};
use tungstenite::{Message, WebSocket};

use super::broker::{Broker, Recv, Subscription};
use super::wire::{read_frame, write_frame, Envelope};

const POLL: Duration = Duration::from_millis(10);

/// Frames a client may send besides plain envelopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Control {
    Subscribe {
        topic: String,
        #[serde(default)]
        from_seq: u64,
    },
}

/// Anything a client can send.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum ClientFrame {
    Control(Control),
    Publish(Envelope),
}

impl ClientFrame {
    pub fn parse(bytes: &[u8]) -> Result<Self, String> {
        let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
        if value.get("type").and_then(|t| t.as_str()) == Some("subscribe") {
            return serde_json::from_value(value)
                .map(ClientFrame::Control)
                .map_err(|e| e.to_string());
        }
        serde_json::from_value(value)
            .map(ClientFrame::Publish)
            .map_err(|e| e.to_string())
    }
}

fn error_frame(message: &str) -> serde_json::Value {
    serde_json::json!({ "type": "error", "message": message })
}

/// Applies one client frame. A subscribe yields the new subscription.
fn dispatch(broker: &Broker, bytes: &[u8]) -> Result<Option<Subscription>, String> {
    match ClientFrame::parse(bytes)? {
        ClientFrame::Control(Control::Subscribe { topic, from_seq }) => {
            debug!("client subscribed to '{topic}' from {from_seq}");
            broker.subscribe(&topic, from_seq).map(Some).map_err(|e| e.to_string())
        }
        ClientFrame::Publish(msg) => {
            let topic = msg.topic.clone();
            broker.publish(&topic, msg).map(|_| None).map_err(|e| e.to_string())
        }
    }
}

/// Accept loop shared by both transports.
struct Acceptor {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl Acceptor {
    fn spawn<F>(listener: TcpListener, name: &str, on_client: F) -> io::Result<Self>
    where
        F: Fn(TcpStream, Arc<AtomicBool>) + Send + Sync + 'static,
    {
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let on_client = Arc::new(on_client);
        let handle = thread::Builder::new().name(name.to_owned()).spawn(move || {
            while !flag.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, peer)) => {
                        debug!("client connected from {peer}");
                        let _ = stream.set_nonblocking(false);
                        let on_client = on_client.clone();
                        let flag = flag.clone();
                        thread::spawn(move || on_client(stream, flag));
                    }
                    Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
                    Err(e) => {
                        warn!("accept failed: {e}");
                        thread::sleep(POLL);
                    }
                }
            }
        })?;
        Ok(Acceptor {
            addr,
            stop,
            handle: Some(handle),
        })
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Length-prefixed JSON over TCP.
pub struct TcpServer {
    acceptor: Acceptor,
}

impl TcpServer {
    /// Fails if the address is in use.
    pub fn bind(addr: impl ToSocketAddrs, broker: Broker) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let acceptor = Acceptor::spawn(listener, "kt-tcp", move |stream, stop| {
            if let Err(e) = serve_tcp_client(stream, &broker, &stop) {
                debug!("tcp client closed: {e}");
            }
        })?;
        info!("tcp endpoint listening on {}", acceptor.addr);
        Ok(TcpServer { acceptor })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.acceptor.addr
    }

    /// Stops accepting; open connections end when the broker shuts down or
    /// the peer disconnects.
    pub fn shutdown(mut self) {
        self.acceptor.shutdown();
    }
}

impl Drop for TcpServer {
    fn drop(&mut self) {
        self.acceptor.shutdown();
    }
}

fn serve_tcp_client(stream: TcpStream, broker: &Broker, stop: &Arc<AtomicBool>) -> io::Result<()> {
    let writer = Arc::new(Mutex::new(BufWriter::new(stream.try_clone()?)));
    let mut reader = BufReader::new(stream.try_clone()?);
    let alive = Arc::new(AtomicBool::new(true));

    while let Some(bytes) = read_frame(&mut reader)? {
        match dispatch(broker, &bytes) {
            Ok(Some(mut sub)) => {
                let writer = writer.clone();
                let alive = alive.clone();
                let stop = stop.clone();
                thread::spawn(move || {
                    while alive.load(Ordering::Relaxed) && !stop.load(Ordering::Relaxed) {
                        match sub.recv_timeout(Duration::from_millis(100)) {
                            Recv::Message(msg) => {
                                let mut w = writer.lock().unwrap_or_else(|p| p.into_inner());
                                if write_frame(&mut *w, &*msg).is_err() {
                                    break;
                                }
                            }
                            Recv::Timeout => {}
                            Recv::Closed => break,
                        }
                    }
                });
            }
            Ok(None) => {}
            Err(message) => {
                let mut w = writer.lock().unwrap_or_else(|p| p.into_inner());
                write_frame(&mut *w, &error_frame(&message))?;
            }
        }
    }
    alive.store(false, Ordering::Relaxed);
    let _ = stream.shutdown(Shutdown::Both);
    Ok(())
}

/// JSON text messages over WebSocket, for browser clients.
pub struct WsServer {
    acceptor: Acceptor,
}

impl WsServer {
    pub fn bind(addr: impl ToSocketAddrs, broker: Broker) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let acceptor = Acceptor::spawn(listener, "kt-ws", move |stream, stop| {
            if let Err(e) = serve_ws_client(stream, &broker, &stop) {
                debug!("websocket client closed: {e}");
            }
        })?;
        info!("websocket endpoint listening on {}", acceptor.addr);
        Ok(WsServer { acceptor })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.acceptor.addr
    }

    pub fn shutdown(mut self) {
        self.acceptor.shutdown();
    }
}

impl Drop for WsServer {
    fn drop(&mut self) {
        self.acceptor.shutdown();
    }
}

fn serve_ws_client(stream: TcpStream, broker: &Broker, stop: &AtomicBool) -> io::Result<()> {
    let mut ws = tungstenite::accept(stream).map_err(|e| io::Error::other(e.to_string()))?;
    ws.get_ref().set_read_timeout(Some(POLL))?;
    let mut subs: Vec<Subscription> = Vec::new();
    while !stop.load(Ordering::Relaxed) {
        match ws.read() {
            Ok(Message::Text(text)) => reply_ws(&mut ws, broker, text.as_bytes(), &mut subs)?,
            Ok(Message::Binary(bytes)) => reply_ws(&mut ws, broker, &bytes, &mut subs)?,
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(io::Error::other(e.to_string())),
        }
        for sub in subs.iter_mut() {
            while let Some(msg) = sub.try_recv() {
                ws.send(Message::text(msg.to_json()))
                    .map_err(|e| io::Error::other(e.to_string()))?;
            }
        }
    }
    let _ = ws.close(None);
    Ok(())
}

fn reply_ws(
    ws: &mut WebSocket<TcpStream>,
    broker: &Broker,
    bytes: &[u8],
    subs: &mut Vec<Subscription>,
) -> io::Result<()> {
    match dispatch(broker, bytes) {
        Ok(Some(sub)) => subs.push(sub),
        Ok(None) => {}
        Err(message) => ws
            .send(Message::text(error_frame(&message).to_string()))
            .map_err(|e| io::Error::other(e.to_string()))?,
    }
    Ok(())
}

/// Blocking client for the TCP endpoint.
pub struct TcpClient {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl TcpClient {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(TcpClient {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
        })
    }

    pub fn publish(&mut self, msg: &Envelope) -> io::Result<()> {
        write_frame(&mut self.writer, msg)
    }

    pub fn subscribe(&mut self, topic: &str, from_seq: u64) -> io::Result<()> {
        let control = Control::Subscribe {
            topic: topic.to_owned(),
            from_seq,
        };
        write_frame(&mut self.writer, &control)
    }

    pub fn set_read_timeout(&self, timeout: Option<Duration>) -> io::Result<()> {
        self.reader.get_ref().set_read_timeout(timeout)
    }

    /// Next frame from the server as raw JSON; `None` at end of stream.
    pub fn recv_value(&mut self) -> io::Result<Option<serde_json::Value>> {
        match read_frame(&mut self.reader)? {
            Some(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)),
            None => Ok(None),
        }
    }

    /// Next forwarded message; server error frames become errors.
    pub fn recv(&mut self) -> io::Result<Option<Envelope>> {
        let Some(value) = self.recv_value()? else {
            return Ok(None);
        };
        if value.get("type").and_then(|t| t.as_str()) == Some("error") {
            let message = value["message"].as_str().unwrap_or("unknown").to_owned();
            return Err(io::Error::other(message));
        }
        serde_json::from_value(value)
            .map(Some)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.writer.flush()
    }
}
