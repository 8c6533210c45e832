//! TCP transport for the wire protocol.
//!
//! Each connection carries a sequence of request frames, each answered by
//! exactly one reply frame. The server spawns a thread per connection.

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use skytrack_core::backend::OracleService;
use skytrack_core::orchestrator::{DetectionBackend, TransportError};
use skytrack_core::protocol::{decode, encode, LinkModel, WireMessage};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: String, source: io::Error },
    #[error("cannot reach {addr}: {source}")]
    Connect { addr: String, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Reads one frame and returns it with its length prefix. `None` on a clean
/// end of stream before the first prefix byte.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut prefix = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut prefix[got..])? {
            0 if got == 0 => return Ok(None),
            0 => return Err(io::ErrorKind::UnexpectedEof.into()),
            n => got += n,
        }
    }
    let len = u32::from_be_bytes(prefix) as u64;
    let mut frame = prefix.to_vec();
    let read = r.take(len).read_to_end(&mut frame)?;
    if (read as u64) < len {
        return Err(io::ErrorKind::UnexpectedEof.into());
    }
    Ok(Some(frame))
}

/// Turns one request payload (no prefix) into one framed reply.
pub trait FrameHandler: Send + Sync + 'static {
    fn handle_frame(&self, payload: &[u8]) -> Vec<u8>;
}

impl FrameHandler for OracleService {
    fn handle_frame(&self, payload: &[u8]) -> Vec<u8> {
        self.handle_payload(payload)
    }
}

/// Forwards every frame to an upstream service, one upstream connection per
/// downstream request.
#[derive(Debug, Clone)]
pub struct Proxy {
    pub upstream: String,
}

impl FrameHandler for Proxy {
    fn handle_frame(&self, payload: &[u8]) -> Vec<u8> {
        let mut framed = (payload.len() as u32).to_be_bytes().to_vec();
        framed.extend_from_slice(payload);
        let result = TcpBackend::connect(&self.upstream)
            .map_err(|e| TransportError(e.to_string()))
            .and_then(|mut b| b.exchange(&framed));
        result.unwrap_or_else(|e| {
            let request_id = skytrack_core::protocol::decode_payload(payload).map(|m| m.request_id()).unwrap_or(0);
            let reply = WireMessage::ErrorReply(skytrack_core::protocol::ErrorReply {
                request_id,
                code: "upstream_unavailable".into(),
                message: e.0,
            });
            encode(&reply).expect("small reply")
        })
    }
}

pub struct Server {
    listener: TcpListener,
    handler: Arc<dyn FrameHandler>,
}

pub struct ServerHandle {
    pub addr: SocketAddr,
    pub thread: JoinHandle<io::Result<()>>,
}

impl Server {
    pub fn bind(addr: &str, handler: Arc<dyn FrameHandler>) -> Result<Self, NetError> {
        let listener =
            TcpListener::bind(addr).map_err(|source| NetError::BindFailure { addr: addr.to_owned(), source })?;
        Ok(Self { listener, handler })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until the listener fails.
    pub fn serve(self) -> io::Result<()> {
        for stream in self.listener.incoming() {
            let stream = stream?;
            let handler = Arc::clone(&self.handler);
            thread::spawn(move || {
                // a broken connection only ends that connection
                let _ = handle_connection(stream, handler.as_ref());
            });
        }
        Ok(())
    }

    pub fn spawn(self) -> io::Result<ServerHandle> {
        let addr = self.local_addr()?;
        Ok(ServerHandle { addr, thread: thread::spawn(move || self.serve()) })
    }
}

fn handle_connection(mut stream: TcpStream, handler: &dyn FrameHandler) -> io::Result<()> {
    stream.set_nodelay(true)?;
    while let Some(frame) = read_frame(&mut stream)? {
        let reply = handler.handle_frame(&frame[4..]);
        stream.write_all(&reply)?;
    }
    Ok(())
}

/// Client side: one persistent connection, one exchange at a time.
#[derive(Debug)]
pub struct TcpBackend {
    stream: TcpStream,
}

impl TcpBackend {
    pub fn connect(addr: &str) -> Result<Self, NetError> {
        let connect = |source| NetError::Connect { addr: addr.to_owned(), source };
        let resolved = addr.to_socket_addrs().map_err(connect)?.next();
        let target = resolved.ok_or_else(|| connect(io::ErrorKind::AddrNotAvailable.into()))?;
        let stream = TcpStream::connect_timeout(&target, Duration::from_secs(10)).map_err(connect)?;
        stream.set_nodelay(true)?;
        Ok(Self { stream })
    }

    pub fn request(&mut self, msg: &WireMessage) -> Result<WireMessage, TransportError> {
        let bytes = encode(msg).map_err(|e| TransportError(e.to_string()))?;
        let reply = self.exchange(&bytes)?;
        decode(&reply).map_err(|e| TransportError(e.to_string()))
    }
}

impl DetectionBackend for TcpBackend {
    fn exchange(&mut self, request: &[u8]) -> Result<Vec<u8>, TransportError> {
        let t = |e: io::Error| TransportError(e.to_string());
        self.stream.write_all(request).map_err(t)?;
        read_frame(&mut self.stream).map_err(t)?.ok_or_else(|| TransportError("connection closed by peer".into()))
    }
}

/// Delays each exchange by the link's real transmission time, for live demos.
#[derive(Debug)]
pub struct Paced<B> {
    pub inner: B,
    pub link: LinkModel,
}

impl<B: DetectionBackend> DetectionBackend for Paced<B> {
    fn exchange(&mut self, request: &[u8]) -> Result<Vec<u8>, TransportError> {
        let wire = |bytes: usize, bw: f64| Duration::from_secs_f64(bytes as f64 * 8.0 / bw + self.link.latency);
        thread::sleep(wire(request.len(), self.link.bandwidth));
        let reply = self.inner.exchange(request)?;
        thread::sleep(wire(reply.len(), self.link.downlink()));
        Ok(reply)
    }
}
