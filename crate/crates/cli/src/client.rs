//! Line-oriented JSON-RPC client over a child process or a TCP socket.

use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::Deserialize;
use serde_json::value::RawValue;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("cannot reach the server: {0}")]
    Io(#[from] io::Error),
    #[error("server closed the connection")]
    Closed,
    #[error("malformed reply from server: {0}")]
    Malformed(String),
    #[error("error {}: {}", .0.code, .0.message)]
    Rpc(RpcFailure),
}

/// An error object returned by the server.
#[derive(Debug, Deserialize)]
pub struct RpcFailure {
    pub code: i64,
    pub message: String,
    #[serde(default)]
    pub data: Option<Value>,
}

#[derive(Deserialize)]
struct Reply {
    id: Option<Value>,
    result: Option<Box<RawValue>>,
    error: Option<RpcFailure>,
}

enum Link {
    Child {
        child: Child,
        input: Option<BufWriter<ChildStdin>>,
        output: BufReader<ChildStdout>,
    },
    Tcp {
        input: BufWriter<TcpStream>,
        output: BufReader<TcpStream>,
    },
}

pub struct Client {
    link: Link,
    next_id: i64,
}

impl Client {
    /// Starts `<this executable> serve` and talks to it over stdio.
    pub fn spawn() -> Result<Self, ClientError> {
        let exe = std::env::current_exe()?;
        let mut child = Command::new(exe)
            .arg("serve")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let input = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let output = BufReader::new(child.stdout.take().expect("piped stdout"));
        Client::handshake(Link::Child {
            child,
            input: Some(input),
            output,
        })
    }

    pub fn connect(addr: &str) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr)?;
        let input = BufWriter::new(stream.try_clone()?);
        Client::handshake(Link::Tcp {
            input,
            output: BufReader::new(stream),
        })
    }

    fn handshake(link: Link) -> Result<Self, ClientError> {
        let mut c = Client { link, next_id: 1 };
        c.request(
            "initialize",
            json!({"clientInfo": {"name": "trafficmcp-cli"}}),
        )?;
        c.send(&json!({"jsonrpc": "2.0", "method": "notifications/initialized"}))?;
        Ok(c)
    }

    fn send(&mut self, msg: &Value) -> Result<(), ClientError> {
        let w: &mut dyn Write = match &mut self.link {
            Link::Child { input, .. } => input.as_mut().ok_or(ClientError::Closed)?,
            Link::Tcp { input, .. } => input,
        };
        writeln!(w, "{msg}")?;
        w.flush()?;
        Ok(())
    }

    fn read_line(&mut self) -> Result<String, ClientError> {
        let r: &mut dyn BufRead = match &mut self.link {
            Link::Child { output, .. } => output,
            Link::Tcp { output, .. } => output,
        };
        let mut line = String::new();
        if r.read_line(&mut line)? == 0 {
            return Err(ClientError::Closed);
        }
        Ok(line)
    }

    /// Sends one request and returns the raw `result` text, byte for byte
    /// as the server wrote it.
    pub fn request(&mut self, method: &str, params: Value) -> Result<String, ClientError> {
        let id = self.next_id;
        self.next_id += 1;
        self.send(&json!({"jsonrpc": "2.0", "id": id, "method": method, "params": params}))?;
        let line = self.read_line()?;
        let reply: Reply = serde_json::from_str(&line)
            .map_err(|e| ClientError::Malformed(format!("{e}: {}", line.trim_end())))?;
        if reply.id != Some(json!(id)) {
            return Err(ClientError::Malformed(format!(
                "reply id {:?} does not match {id}",
                reply.id
            )));
        }
        match (reply.result, reply.error) {
            (Some(r), None) => Ok(r.get().to_string()),
            (None, Some(e)) => Err(ClientError::Rpc(e)),
            _ => Err(ClientError::Malformed(
                "reply needs exactly one of result and error".into(),
            )),
        }
    }

    pub fn call_tool(&mut self, name: &str, arguments: Value) -> Result<String, ClientError> {
        self.request("tools/call", json!({"name": name, "arguments": arguments}))
    }
}

impl Drop for Client {
    fn drop(&mut self) {
        if let Link::Child { child, input, .. } = &mut self.link {
            // Closing stdin ends the server loop.
            drop(input.take());
            let _ = child.wait();
        }
    }
}
