//! Newline-delimited JSON transport shared by translator clients and parser
//! backends.
//!
//! A worker process prints a handshake line such as
//! `{"protocol":"woz-translate/1"}` on startup, then answers each request
//! line on standard input with exactly one response line on standard output.
//! The same request and response bodies can also be POSTed to an HTTP
//! endpoint.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TRANSLATE_PROTOCOL: &str = "woz-translate/1";
pub const PARSE_PROTOCOL: &str = "woz-parse/1";

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("cannot start `{command}`: {source}")]
    Spawn {
        command: String,
        source: std::io::Error,
    },
    #[error("empty worker command line")]
    EmptyCommand,
    #[error("worker I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("worker closed its output")]
    Closed,
    #[error("bad handshake: expected protocol {expected}, got {got:?}")]
    Handshake { expected: String, got: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("HTTP request failed: {0}")]
    Http(String),
}

impl TransportError {
    /// Whether the connection is unusable afterwards.
    pub fn is_connection_loss(&self) -> bool {
        !matches!(self, TransportError::Malformed(_))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Handshake {
    protocol: String,
}

/// Handshake line a worker must print before serving.
pub fn handshake_line(protocol: &str) -> String {
    serde_json::to_string(&Handshake {
        protocol: protocol.to_string(),
    })
    .expect("handshake serializes")
}

/// A spawned worker process. Requests and responses are strictly paired.
pub struct JsonLineProcess {
    command: String,
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    line: String,
}

impl JsonLineProcess {
    /// Spawn `command` (split with shell quoting rules) and wait for the
    /// handshake announcing `protocol`.
    pub fn spawn(command: &str, protocol: &str) -> Result<Self, TransportError> {
        let argv = shlex::split(command).ok_or(TransportError::EmptyCommand)?;
        let (program, args) = argv.split_first().ok_or(TransportError::EmptyCommand)?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| TransportError::Spawn {
                command: command.to_string(),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut process = JsonLineProcess {
            command: command.to_string(),
            child,
            stdin,
            stdout,
            line: String::new(),
        };
        let greeting = process.read_line()?;
        let ok = serde_json::from_str::<Handshake>(&greeting)
            .map(|h| h.protocol == protocol)
            .unwrap_or(false);
        if !ok {
            return Err(TransportError::Handshake {
                expected: protocol.to_string(),
                got: greeting.trim_end().to_string(),
            });
        }
        Ok(process)
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    fn read_line(&mut self) -> Result<String, TransportError> {
        self.line.clear();
        if self.stdout.read_line(&mut self.line)? == 0 {
            return Err(TransportError::Closed);
        }
        Ok(self.line.clone())
    }

    pub fn call<Req: Serialize, Resp: DeserializeOwned>(
        &mut self,
        request: &Req,
    ) -> Result<Resp, TransportError> {
        let mut line = serde_json::to_string(request).expect("request serializes");
        line.push('\n');
        self.stdin.write_all(line.as_bytes())?;
        self.stdin.flush()?;
        let reply = self.read_line()?;
        serde_json::from_str(&reply).map_err(|e| TransportError::Malformed(e.to_string()))
    }
}

impl Drop for JsonLineProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// HTTP endpoint accepting one JSON request body per POST.
#[derive(Debug, Clone)]
pub struct HttpEndpoint {
    url: String,
    agent: ureq::Agent,
}

impl HttpEndpoint {
    pub fn new(url: impl Into<String>) -> Self {
        HttpEndpoint {
            url: url.into(),
            agent: ureq::Agent::new_with_defaults(),
        }
    }

    pub fn call<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        request: &Req,
    ) -> Result<Resp, TransportError> {
        let mut response = self
            .agent
            .post(&self.url)
            .send_json(request)
            .map_err(|e| TransportError::Http(e.to_string()))?;
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Http(e.to_string()))?;
        serde_json::from_str(&body).map_err(|e| TransportError::Malformed(e.to_string()))
    }
}

/// Serve requests from `input` to `output` until end of input: print the
/// handshake, then one response line per request line. Lines that do not
/// parse as requests are answered with `{"error": ...}`.
pub fn serve<Req, Resp, R, W, F>(
    protocol: &str,
    input: R,
    mut output: W,
    mut handler: F,
) -> std::io::Result<()>
where
    Req: DeserializeOwned,
    Resp: Serialize,
    R: BufRead,
    W: Write,
    F: FnMut(Req) -> Resp,
{
    writeln!(output, "{}", handshake_line(protocol))?;
    output.flush()?;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Req>(&line) {
            Ok(request) => serde_json::to_string(&handler(request)),
            Err(e) => serde_json::to_string(&serde_json::json!({ "error": e.to_string() })),
        }
        .expect("response serializes");
        writeln!(output, "{reply}")?;
        output.flush()?;
    }
    Ok(())
}
