// SPDX-License-Identifier: Apache-2.0

//! Byte-stream links between the external interface and a host.
//!
//! A [`ChipLink`] owns a reader thread that splits incoming bytes into
//! frames and a writer thread that drains outgoing frames, so the
//! simulation never blocks on the host.

use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::net::{Shutdown, TcpStream};
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::thread::JoinHandle;

use super::wire::{frame, FrameDecoder, FrameError};

enum Incoming {
    Packet(Vec<u16>),
    Error(FrameError),
    Eof,
}

pub struct ChipLink {
    incoming: Receiver<Incoming>,
    outgoing: Option<Sender<Vec<u8>>>,
    writer: Option<JoinHandle<()>>,
    peer_closed: bool,
    error: Option<FrameError>,
}

impl ChipLink {
    pub fn new<R, W>(reader: R, writer: W) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        Self::with_close(reader, writer, None)
    }

    pub fn tcp(stream: TcpStream) -> io::Result<Self> {
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        let closer = stream.try_clone()?;
        Ok(Self::with_close(
            reader,
            stream,
            Some(Box::new(move || {
                let _ = closer.shutdown(Shutdown::Write);
            })),
        ))
    }

    fn with_close<R, W>(
        mut reader: R,
        mut writer: W,
        on_close: Option<Box<dyn FnOnce() + Send>>,
    ) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (in_tx, in_rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut dec = FrameDecoder::new();
            let mut buf = [0u8; 4096];
            loop {
                let n = match reader.read(&mut buf) {
                    Ok(0) | Err(_) => {
                        let _ = in_tx.send(Incoming::Eof);
                        return;
                    }
                    Ok(n) => n,
                };
                dec.push(&buf[..n]);
                while let Some(f) = dec.next_frame() {
                    let msg = match f {
                        Ok(p) => Incoming::Packet(p),
                        Err(e) => {
                            let _ = in_tx.send(Incoming::Error(e));
                            return;
                        }
                    };
                    if in_tx.send(msg).is_err() {
                        return;
                    }
                }
            }
        });
        let (out_tx, out_rx) = mpsc::channel::<Vec<u8>>();
        let writer_thread = std::thread::spawn(move || {
            for bytes in out_rx {
                if writer.write_all(&bytes).is_err() {
                    break;
                }
            }
            let _ = writer.flush();
            drop(writer);
            if let Some(close) = on_close {
                close();
            }
        });
        ChipLink {
            incoming: in_rx,
            outgoing: Some(out_tx),
            writer: Some(writer_thread),
            peer_closed: false,
            error: None,
        }
    }

    /// Packets that have arrived since the last call. Never blocks.
    pub fn poll(&mut self) -> Vec<Vec<u16>> {
        let mut out = Vec::new();
        loop {
            match self.incoming.try_recv() {
                Ok(Incoming::Packet(p)) => out.push(p),
                Ok(Incoming::Error(e)) => {
                    self.error = Some(e);
                    self.peer_closed = true;
                }
                Ok(Incoming::Eof) | Err(TryRecvError::Disconnected) => {
                    self.peer_closed = true;
                    break;
                }
                Err(TryRecvError::Empty) => break,
            }
        }
        out
    }

    pub fn send(&mut self, flits: &[u16]) {
        if let Some(tx) = &self.outgoing {
            let _ = tx.send(frame(flits));
        }
    }

    /// The host closed its side or sent a malformed frame.
    pub fn peer_closed(&self) -> bool {
        self.peer_closed
    }

    pub fn error(&self) -> Option<&FrameError> {
        self.error.as_ref()
    }

    /// Flush everything sent so far and close the outgoing direction.
    pub fn close(&mut self) {
        self.outgoing = None;
        if let Some(w) = self.writer.take() {
            let _ = w.join();
        }
    }
}

impl Drop for ChipLink {
    fn drop(&mut self) {
        self.close();
    }
}

/// One end of an in-memory duplex byte stream.
pub struct PipeEnd {
    reader: PipeReader,
    writer: PipeWriter,
}

pub struct PipeReader {
    rx: Receiver<Vec<u8>>,
    buf: VecDeque<u8>,
}

pub struct PipeWriter {
    tx: Sender<Vec<u8>>,
}

/// A connected pair of in-memory stream ends.
pub fn pipe() -> (PipeEnd, PipeEnd) {
    let (a_tx, a_rx) = mpsc::channel();
    let (b_tx, b_rx) = mpsc::channel();
    let end = |tx, rx| PipeEnd {
        reader: PipeReader {
            rx,
            buf: VecDeque::new(),
        },
        writer: PipeWriter { tx },
    };
    (end(a_tx, b_rx), end(b_tx, a_rx))
}

impl PipeEnd {
    pub fn split(self) -> (PipeReader, PipeWriter) {
        (self.reader, self.writer)
    }
}

impl Read for PipeReader {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        if self.buf.is_empty() {
            match self.rx.recv() {
                Ok(bytes) => self.buf.extend(bytes),
                Err(_) => return Ok(0),
            }
        }
        let n = out.len().min(self.buf.len());
        for (o, b) in out.iter_mut().zip(self.buf.drain(..n)) {
            *o = b;
        }
        Ok(n)
    }
}

impl Write for PipeWriter {
    fn write(&mut self, bytes: &[u8]) -> io::Result<usize> {
        self.tx
            .send(bytes.to_vec())
            .map_err(|_| io::Error::from(io::ErrorKind::BrokenPipe))?;
        Ok(bytes.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl Read for PipeEnd {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        self.reader.read(out)
    }
}

impl Write for PipeEnd {
    fn write(&mut self, bytes: &[u8]) -> io::Result<usize> {
        self.writer.write(bytes)
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl ChipLink {
    /// Link over one end of an in-memory pipe.
    pub fn over_pipe(end: PipeEnd) -> Self {
        let (r, w) = end.split();
        Self::new(r, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::{Duration, Instant};

    fn poll_until(link: &mut ChipLink, n: usize) -> Vec<Vec<u16>> {
        let start = Instant::now();
        let mut out = Vec::new();
        while out.len() < n && start.elapsed() < Duration::from_secs(5) {
            out.extend(link.poll());
            std::thread::sleep(Duration::from_millis(1));
        }
        out
    }

    #[test]
    fn frames_cross_a_pipe() {
        let (chip, mut host) = pipe();
        let mut link = ChipLink::over_pipe(chip);
        host.write_all(&frame(&[1, 2, 3, 4])).unwrap();
        host.write_all(&frame(&[5, 6, 7, 8, 9])[..5]).unwrap();
        host.write_all(&frame(&[5, 6, 7, 8, 9])[5..]).unwrap();
        assert_eq!(
            poll_until(&mut link, 2),
            vec![vec![1, 2, 3, 4], vec![5, 6, 7, 8, 9]]
        );
        link.send(&[0, 3, 0, 1]);
        link.close();
        let mut bytes = Vec::new();
        host.read_to_end(&mut bytes).unwrap();
        assert_eq!(bytes, frame(&[0, 3, 0, 1]));
    }

    #[test]
    fn bad_count_closes_the_link() {
        let (chip, mut host) = pipe();
        let mut link = ChipLink::over_pipe(chip);
        host.write_all(&[1, 0, 0, 0]).unwrap();
        let start = Instant::now();
        while !link.peer_closed() && start.elapsed() < Duration::from_secs(5) {
            link.poll();
        }
        assert_eq!(
            link.error(),
            Some(&FrameError::FlitCountMismatch { count: 1 })
        );
    }
}
