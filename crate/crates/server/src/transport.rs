//! Newline-delimited framing over stdio or TCP.

use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use crate::rpc::Server;

/// Serves one stream until end of input. Blank lines are ignored.
pub fn serve_io<R: BufRead, W: Write>(
    server: &mut Server,
    mut reader: R,
    mut writer: W,
) -> io::Result<()> {
    let mut line = Vec::new();
    loop {
        line.clear();
        if reader.read_until(b'\n', &mut line)? == 0 {
            return Ok(());
        }
        let msg = line.strip_suffix(b"\n").unwrap_or(&line);
        let msg = msg.strip_suffix(b"\r").unwrap_or(msg);
        if msg.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        if let Some(resp) = server.handle_bytes(msg) {
            writer.write_all(resp.as_bytes())?;
            writer.write_all(b"\n")?;
            writer.flush()?;
        }
    }
}

pub fn serve_stdio(server: &mut Server) -> io::Result<()> {
    let stdin = io::stdin();
    let stdout = io::stdout();
    serve_io(server, stdin.lock(), BufWriter::new(stdout.lock()))
}

/// A TCP server running on a background thread.
pub struct ServerHandle {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Blocks until the accept loop ends.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    /// Stops accepting after the current connection closes.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.local_addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Binds `addr` and serves connections one after another.
pub fn serve_tcp(mut server: Server, addr: impl ToSocketAddrs) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    let local_addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let thread = std::thread::spawn(move || {
        for conn in listener.incoming() {
            if flag.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = conn else { continue };
            let Ok(read_half) = stream.try_clone() else {
                continue;
            };
            let _ = serve_io(
                &mut server,
                BufReader::new(read_half),
                BufWriter::new(stream),
            );
        }
    });
    Ok(ServerHandle {
        local_addr,
        stop,
        thread: Some(thread),
    })
}
