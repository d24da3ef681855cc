//! Answer generators.
//!
//! [`EchoGenerator`] copies the best-ranked exemplar's annotations, a
//! retrieval-only baseline. [`ExternalGenerator`] ships the rendered prompt
//! to a model process over one JSON line each way:
//!
//! ```text
//! request:  {"prompt": "...", "video_ref": "<query id>"}
//! response: {"action": "...", "justification": "...", "speed": 3.14, "course": -2.5}
//! ```
//!
//! `speed` and `course` may also arrive as strings (`"3.14"`), which are
//! read with the same number rules as rendered control signals. The line
//! travels either over a TCP connection or through the stdin/stdout of a
//! spawned command.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{parse_number, PromptBundle};
use crate::error::{Error, Result};
use crate::store::ScenarioRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedAnswer {
    pub action_text: String,
    pub justification_text: String,
    /// m/s
    pub pred_speed: f64,
    /// degrees
    pub pred_course: f64,
}

pub trait Generator {
    fn generate(
        &self,
        bundle: &PromptBundle,
        neighbors: &[&ScenarioRecord],
    ) -> Result<GeneratedAnswer>;
}

/// Answers with the rank-1 neighbor's ground truth.
pub fn echo_generate(
    _bundle: &PromptBundle,
    neighbors: &[&ScenarioRecord],
) -> Result<GeneratedAnswer> {
    let best = neighbors
        .first()
        .ok_or_else(|| Error::Empty("echo generator needs at least one neighbor".into()))?;
    Ok(GeneratedAnswer {
        action_text: best.action_text.clone(),
        justification_text: best.justification_text.clone(),
        pred_speed: best.target_speed,
        pred_course: best.target_course,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EchoGenerator;

impl Generator for EchoGenerator {
    fn generate(
        &self,
        bundle: &PromptBundle,
        neighbors: &[&ScenarioRecord],
    ) -> Result<GeneratedAnswer> {
        echo_generate(bundle, neighbors)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "transport", rename_all = "lowercase", deny_unknown_fields)]
pub enum Endpoint {
    /// Line-oriented TCP socket, e.g. `127.0.0.1:7070`.
    Tcp { addr: String, timeout_ms: u64 },
    /// A command reading the request on stdin and answering on stdout.
    Stdio {
        command: String,
        #[serde(default)]
        args: Vec<String>,
        timeout_ms: u64,
    },
}

impl Endpoint {
    fn timeout(&self) -> Duration {
        let ms = match self {
            Endpoint::Tcp { timeout_ms, .. } | Endpoint::Stdio { timeout_ms, .. } => *timeout_ms,
        };
        Duration::from_millis(ms.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorRequest {
    pub prompt: String,
    pub video_ref: String,
}

pub fn render_request(bundle: &PromptBundle) -> String {
    let req = GeneratorRequest {
        prompt: bundle.render(),
        video_ref: bundle.query_id.clone(),
    };
    let mut line = serde_json::to_string(&req).expect("request serializes");
    line.push('\n');
    line
}

fn field_error(field: &str, message: impl Into<String>, raw: &str) -> Error {
    Error::Response {
        field: field.to_string(),
        message: message.into(),
        raw: raw.to_string(),
    }
}

fn text_field(obj: &serde_json::Map<String, Value>, field: &str, raw: &str) -> Result<String> {
    match obj.get(field) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(other) => Err(field_error(
            field,
            format!("expected a string, found {other}"),
            raw,
        )),
        None => Err(field_error(field, "missing", raw)),
    }
}

fn number_field(obj: &serde_json::Map<String, Value>, field: &str, raw: &str) -> Result<f64> {
    match obj.get(field) {
        Some(Value::Number(n)) => n
            .as_f64()
            .filter(|v| v.is_finite())
            .ok_or_else(|| field_error(field, "number out of range", raw)),
        Some(Value::String(s)) => parse_number(s, field).map_err(|e| match e {
            Error::Response { message, .. } => field_error(field, message, raw),
            other => other,
        }),
        Some(other) => Err(field_error(
            field,
            format!("expected a number, found {other}"),
            raw,
        )),
        None => Err(field_error(field, "missing", raw)),
    }
}

/// Parses one response line; errors keep the raw text.
pub fn parse_response(raw: &str) -> Result<GeneratedAnswer> {
    let value: Value = serde_json::from_str(raw.trim())
        .map_err(|e| field_error("response", format!("invalid JSON: {e}"), raw))?;
    let obj = value
        .as_object()
        .ok_or_else(|| field_error("response", "expected a JSON object", raw))?;
    Ok(GeneratedAnswer {
        action_text: text_field(obj, "action", raw)?,
        justification_text: text_field(obj, "justification", raw)?,
        pred_speed: number_field(obj, "speed", raw)?,
        pred_course: number_field(obj, "course", raw)?,
    })
}

fn resolve(addr: &str) -> Result<SocketAddr> {
    addr.to_socket_addrs()
        .map_err(|e| Error::Transport(format!("cannot resolve {addr}: {e}")))?
        .next()
        .ok_or_else(|| Error::Transport(format!("no address for {addr}")))
}

fn exchange_tcp(addr: &str, request: &str, timeout: Duration) -> Result<String> {
    let sock = resolve(addr)?;
    let mut stream = TcpStream::connect_timeout(&sock, timeout)
        .map_err(|e| Error::Transport(format!("connect {addr}: {e}")))?;
    stream
        .set_read_timeout(Some(timeout))
        .and_then(|_| stream.set_write_timeout(Some(timeout)))
        .map_err(|e| Error::Transport(e.to_string()))?;
    stream
        .write_all(request.as_bytes())
        .and_then(|_| stream.flush())
        .map_err(|e| Error::Transport(format!("send to {addr}: {e}")))?;
    let mut line = String::new();
    BufReader::new(stream)
        .read_line(&mut line)
        .map_err(|e| Error::Transport(format!("read from {addr}: {e}")))?;
    if line.is_empty() {
        return Err(Error::Transport(format!(
            "{addr} closed without a response"
        )));
    }
    Ok(line)
}

fn exchange_stdio(
    command: &str,
    args: &[String],
    request: &str,
    timeout: Duration,
) -> Result<String> {
    let mut child = Command::new(command)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| Error::Transport(format!("spawn {command}: {e}")))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let stdout = child.stdout.take().expect("piped stdout");
    stdin
        .write_all(request.as_bytes())
        .map_err(|e| Error::Transport(format!("write to {command}: {e}")))?;
    drop(stdin);

    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let mut line = String::new();
        let res = BufReader::new(stdout).read_line(&mut line).map(|_| line);
        let _ = tx.send(res);
    });
    let outcome = rx.recv_timeout(timeout);
    let _ = child.kill();
    let _ = child.wait();
    match outcome {
        Ok(Ok(line)) if !line.is_empty() => Ok(line),
        Ok(Ok(_)) => Err(Error::Transport(format!(
            "{command} exited without a response"
        ))),
        Ok(Err(e)) => Err(Error::Transport(format!("read from {command}: {e}"))),
        Err(_) => Err(Error::Transport(format!(
            "{command} did not answer within {} ms",
            timeout.as_millis()
        ))),
    }
}

/// Sends the rendered prompt to `endpoint` and parses the reply. One request
/// in flight per call.
pub fn external_generate(bundle: &PromptBundle, endpoint: &Endpoint) -> Result<GeneratedAnswer> {
    let request = render_request(bundle);
    let raw = match endpoint {
        Endpoint::Tcp { addr, .. } => exchange_tcp(addr, &request, endpoint.timeout())?,
        Endpoint::Stdio { command, args, .. } => {
            exchange_stdio(command, args, &request, endpoint.timeout())?
        }
    };
    parse_response(&raw)
}

#[derive(Debug, Clone)]
pub struct ExternalGenerator {
    pub endpoint: Endpoint,
}

impl Generator for ExternalGenerator {
    fn generate(
        &self,
        bundle: &PromptBundle,
        _neighbors: &[&ScenarioRecord],
    ) -> Result<GeneratedAnswer> {
        external_generate(bundle, &self.endpoint)
    }
}
