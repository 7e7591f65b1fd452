//! VNS-TEXT/1 framing: newline-delimited UTF-8 frames made of `key:value`
//! header lines, a blank line, a body and a terminator line holding a
//! single `.`. Body lines starting with `.` are dot-stuffed.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use thiserror::Error;

pub const MAX_FRAME: usize = 64 * 1024;
pub const PROTOCOL: &str = "VNS-TEXT/1";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(3);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("timed out talking to {0}")]
    Timeout(String),
    #[error("cannot reach {endpoint}: {reason}")]
    Unreachable { endpoint: String, reason: String },
    #[error("connection closed")]
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Frame {
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Frame {
    pub fn new() -> Frame {
        Frame::default()
    }

    pub fn request(verb: &str) -> Frame {
        Frame::new().with("verb", verb)
    }

    pub fn ok() -> Frame {
        Frame::new().with("status", "ok")
    }

    pub fn error(code: &str, message: &str) -> Frame {
        Frame::new().with("status", &format!("error {code}")).body(message)
    }

    pub fn with(mut self, key: &str, value: &str) -> Frame {
        self.headers.push((key.to_string(), value.to_string()));
        self
    }

    pub fn body(mut self, body: &str) -> Frame {
        self.body = body.to_string();
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// `Ok(())` for `status:ok`, otherwise the error code and body.
    pub fn status(&self) -> Result<(), (String, String)> {
        match self.get("status") {
            Some("ok") => Ok(()),
            Some(s) => Err((s.strip_prefix("error").unwrap_or(s).trim().to_string(), self.body.clone())),
            None => Err(("protocol".into(), "missing status".into())),
        }
    }

    pub fn encode(&self) -> Result<String, WireError> {
        let mut out = String::new();
        for (k, v) in &self.headers {
            if k.is_empty() || k.contains([':', '\n']) || v.contains('\n') {
                return Err(WireError::Protocol(format!("bad header {k:?}")));
            }
            out.push_str(&format!("{k}:{v}\n"));
        }
        out.push('\n');
        for line in self.body.lines() {
            if line.starts_with('.') {
                out.push('.');
            }
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(".\n");
        if out.len() > MAX_FRAME {
            return Err(WireError::Protocol(format!("frame of {} bytes exceeds {MAX_FRAME}", out.len())));
        }
        Ok(out)
    }

    /// Read one frame. Returns `Closed` on a clean end of stream before
    /// any byte of a frame.
    pub fn read_from<R: BufRead>(r: &mut R) -> Result<Frame, WireError> {
        let mut frame = Frame::new();
        let mut total = 0usize;
        let mut in_body = false;
        let mut body_lines: Vec<String> = Vec::new();
        let mut started = false;
        loop {
            let mut line = String::new();
            let n = r.read_line(&mut line).map_err(|e| match e.kind() {
                std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut => WireError::Timeout("peer".into()),
                _ => WireError::Protocol(e.to_string()),
            })?;
            if n == 0 {
                return Err(if started { WireError::Protocol("truncated frame".into()) } else { WireError::Closed });
            }
            started = true;
            total += n;
            if total > MAX_FRAME {
                return Err(WireError::Protocol(format!("frame exceeds {MAX_FRAME} bytes")));
            }
            let line = line.strip_suffix('\n').unwrap_or(&line);
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line == "." {
                frame.body = body_lines.join("\n");
                return Ok(frame);
            }
            if in_body {
                body_lines.push(line.strip_prefix('.').unwrap_or(line).to_string());
            } else if line.is_empty() {
                in_body = true;
            } else {
                let (k, v) = line
                    .split_once(':')
                    .ok_or_else(|| WireError::Protocol(format!("malformed header line {line:?}")))?;
                frame.headers.push((k.trim().to_string(), v.trim().to_string()));
            }
        }
    }
}

/// One request/response round trip on a fresh connection.
pub fn round_trip(endpoint: &str, request: &Frame, timeout: Duration) -> Result<Frame, WireError> {
    let unreachable = |reason: String| WireError::Unreachable { endpoint: endpoint.to_string(), reason };
    let addrs: Vec<SocketAddr> =
        endpoint.to_socket_addrs().map_err(|e| unreachable(e.to_string()))?.collect();
    let addr = addrs.first().ok_or_else(|| unreachable("no address".into()))?;
    let mut stream = TcpStream::connect_timeout(addr, timeout).map_err(|e| match e.kind() {
        std::io::ErrorKind::TimedOut => WireError::Timeout(endpoint.to_string()),
        _ => unreachable(e.to_string()),
    })?;
    stream.set_read_timeout(Some(timeout)).map_err(|e| unreachable(e.to_string()))?;
    stream.set_write_timeout(Some(timeout)).map_err(|e| unreachable(e.to_string()))?;
    stream.write_all(request.encode()?.as_bytes()).map_err(|e| unreachable(e.to_string()))?;
    let mut reader = BufReader::new(stream);
    Frame::read_from(&mut reader).map_err(|e| match e {
        WireError::Timeout(_) => WireError::Timeout(endpoint.to_string()),
        WireError::Closed => WireError::Protocol("no response".into()),
        other => other,
    })
}

pub type Handler = Arc<dyn Fn(Frame) -> Frame + Send + Sync>;

/// Accept connections forever, one thread per connection. Each connection
/// may carry several frames.
pub fn serve(listener: TcpListener, handler: Handler) {
    for stream in listener.incoming() {
        let Ok(stream) = stream else { continue };
        let h = Arc::clone(&handler);
        thread::spawn(move || serve_connection(stream, h));
    }
}

/// Bind `addr` and serve on a background thread. Returns the bound address.
pub fn spawn(addr: &str, handler: Handler) -> std::io::Result<SocketAddr> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    thread::spawn(move || serve(listener, handler));
    Ok(local)
}

fn serve_connection(stream: TcpStream, handler: Handler) {
    let Ok(mut writer) = stream.try_clone() else { return };
    let mut reader = BufReader::new(stream);
    loop {
        let response = match Frame::read_from(&mut reader) {
            Ok(req) => handler(req),
            Err(WireError::Closed) => return,
            Err(e) => {
                let f = Frame::error("protocol", &e.to_string());
                let _ = f.encode().map(|t| writer.write_all(t.as_bytes()));
                return;
            }
        };
        let text = response.encode().unwrap_or_else(|e| {
            Frame::error("protocol", &e.to_string()).encode().expect("error frames encode")
        });
        if writer.write_all(text.as_bytes()).is_err() {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_with_dot_stuffing() {
        let f = Frame::request("route").with("session", "s1").body("hello\n.hidden\n..two");
        let text = f.encode().unwrap();
        assert!(text.contains("\n..hidden\n"));
        let back = Frame::read_from(&mut text.as_bytes()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn malformed_and_oversized() {
        assert!(matches!(Frame::read_from(&mut "nocolon\n\n.\n".as_bytes()), Err(WireError::Protocol(_))));
        assert!(matches!(Frame::read_from(&mut "verb:x\n\nbody".as_bytes()), Err(WireError::Protocol(_))));
        assert_eq!(Frame::read_from(&mut "".as_bytes()), Err(WireError::Closed));
        let big = Frame::request("route").body(&"x".repeat(MAX_FRAME));
        assert!(big.encode().is_err());
        let raw = format!("verb:x\n\n{}\n.\n", "y".repeat(MAX_FRAME));
        assert!(matches!(Frame::read_from(&mut raw.as_bytes()), Err(WireError::Protocol(_))));
    }

    #[test]
    fn status() {
        assert_eq!(Frame::ok().status(), Ok(()));
        assert_eq!(Frame::error("conflict", "dup").status(), Err(("conflict".into(), "dup".into())));
    }

    #[test]
    fn loopback() {
        let h: Handler = Arc::new(|f: Frame| Frame::ok().body(&f.body.to_uppercase()));
        let addr = spawn("127.0.0.1:0", h).unwrap();
        let r = round_trip(&addr.to_string(), &Frame::request("route").body("hi"), DEFAULT_TIMEOUT).unwrap();
        assert_eq!(r.body, "HI");
    }
}
