// SPDX-License-Identifier: Apache-2.0

use std::io::{self, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use tilesoc::debug::PipeEnd;

use crate::session::SessionError;

/// Where the chip's external interface is reachable.
pub enum TransportSpec {
    /// `host:port` of a simulator started with `--debug-listen`.
    Tcp(String),
    /// Host end of an in-process pipe whose other end the simulation owns.
    Loopback(PipeEnd),
}

impl std::fmt::Debug for TransportSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportSpec::Tcp(a) => write!(f, "Tcp({a})"),
            TransportSpec::Loopback(_) => write!(f, "Loopback"),
        }
    }
}

pub(crate) type Reader = Box<dyn Read + Send>;
pub(crate) type Writer = Box<dyn Write + Send>;

pub(crate) fn open(
    spec: TransportSpec,
    timeout: Duration,
) -> Result<(Reader, Writer), SessionError> {
    match spec {
        TransportSpec::Loopback(end) => {
            let (r, w) = end.split();
            Ok((Box::new(r), Box::new(w)))
        }
        TransportSpec::Tcp(addr) => {
            let addrs: Vec<_> = addr
                .to_socket_addrs()
                .map_err(|e| SessionError::ConnectionRefused(format!("{addr}: {e}")))?
                .collect();
            let mut last = io::Error::new(io::ErrorKind::NotFound, "no address");
            for a in addrs {
                match TcpStream::connect_timeout(&a, timeout) {
                    Ok(s) => {
                        s.set_nodelay(true)
                            .map_err(|e| SessionError::Io(e.to_string()))?;
                        let r = s.try_clone().map_err(|e| SessionError::Io(e.to_string()))?;
                        return Ok((Box::new(r), Box::new(s)));
                    }
                    Err(e) => last = e,
                }
            }
            Err(match last.kind() {
                io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock => {
                    SessionError::HandshakeTimeout
                }
                _ => SessionError::ConnectionRefused(format!("{addr}: {last}")),
            })
        }
    }
}
