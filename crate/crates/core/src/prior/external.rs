//! Client for priors served by another process over newline-delimited JSON.
//!
//! ```text
//! -> {"op":"hello","version":1,"alphabet":"ACDEFGHIKLMNPQRSTVWY"}
//! <- {"op":"hello_ok","model":"<name>"}
//! -> {"op":"logprobs","tokens":[0,-1,...],"position":2}
//! <- {"op":"logprobs_ok","values":[...20 floats...]}
//! <- {"op":"error","message":"..."}
//! ```
//!
//! Tokens are residue indices with -1 for a mask; positions are 1-based.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{logsumexp, validate_logprobs, LogProbs, PriorError, SequencePrior};
use crate::seq::{MaskedSequence, ALPHABET, ALPHABET_SIZE};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Request {
    Hello { version: u32, alphabet: String },
    Logprobs { tokens: Vec<i32>, position: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Response {
    HelloOk { model: String },
    LogprobsOk { values: Vec<f64> },
    Error { message: String },
}

struct Connection {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    child: Option<Child>,
}

impl Connection {
    fn round_trip(&mut self, req: &Request) -> Result<Response, PriorError> {
        let unavailable = |e: std::io::Error| PriorError::ExternalPriorUnavailable(e.to_string());
        let line = serde_json::to_string(req).expect("requests always serialise");
        self.writer.write_all(line.as_bytes()).map_err(unavailable)?;
        self.writer.write_all(b"\n").map_err(unavailable)?;
        self.writer.flush().map_err(unavailable)?;
        let mut buf = String::new();
        if self.reader.read_line(&mut buf).map_err(unavailable)? == 0 {
            return Err(PriorError::ExternalPriorUnavailable(
                "connection closed".into(),
            ));
        }
        serde_json::from_str(buf.trim_end())
            .map_err(|e| PriorError::Malformed(format!("bad response line: {e}")))
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// A prior answered by an external server. Requests on one connection are
/// serialised behind a mutex.
pub struct ExternalPrior {
    conn: Mutex<Connection>,
    model: String,
    queries: AtomicU64,
    rejected: AtomicU64,
}

impl ExternalPrior {
    /// Spawns `command` through `sh -c` and talks to it over stdio.
    pub fn spawn(command: &str) -> Result<Self, PriorError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| PriorError::ExternalPriorUnavailable(format!("{command}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Self::handshake(Connection {
            reader: Box::new(BufReader::new(stdout)),
            writer: Box::new(BufWriter::new(stdin)),
            child: Some(child),
        })
    }

    pub fn connect_tcp(addr: &str) -> Result<Self, PriorError> {
        let stream = TcpStream::connect(addr)
            .map_err(|e| PriorError::ExternalPriorUnavailable(format!("{addr}: {e}")))?;
        let read = stream
            .try_clone()
            .map_err(|e| PriorError::ExternalPriorUnavailable(e.to_string()))?;
        Self::handshake(Connection {
            reader: Box::new(BufReader::new(read)),
            writer: Box::new(BufWriter::new(stream)),
            child: None,
        })
    }

    /// Uses an already-open pair of streams.
    pub fn from_streams<R, W>(reader: R, writer: W) -> Result<Self, PriorError>
    where
        R: BufRead + Send + 'static,
        W: Write + Send + 'static,
    {
        Self::handshake(Connection {
            reader: Box::new(reader),
            writer: Box::new(writer),
            child: None,
        })
    }

    fn handshake(mut conn: Connection) -> Result<Self, PriorError> {
        let hello = Request::Hello {
            version: PROTOCOL_VERSION,
            alphabet: std::str::from_utf8(ALPHABET).unwrap().to_string(),
        };
        match conn.round_trip(&hello)? {
            Response::HelloOk { model } => Ok(ExternalPrior {
                conn: Mutex::new(conn),
                model,
                queries: AtomicU64::new(0),
                rejected: AtomicU64::new(0),
            }),
            Response::Error { message } => Err(PriorError::ExternalPriorUnavailable(message)),
            other => Err(PriorError::Malformed(format!("unexpected handshake reply {other:?}"))),
        }
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    /// Number of logprob queries sent.
    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    /// Number of responses that failed validation.
    pub fn rejected_count(&self) -> u64 {
        self.rejected.load(Ordering::Relaxed)
    }
}

impl SequencePrior for ExternalPrior {
    fn name(&self) -> String {
        format!("external:{}", self.model)
    }

    fn raw_logprobs(&self, context: &MaskedSequence, position: usize) -> Result<LogProbs, PriorError> {
        let req = Request::Logprobs {
            tokens: context.tokens(),
            position: position + 1,
        };
        self.queries.fetch_add(1, Ordering::Relaxed);
        let resp = self
            .conn
            .lock()
            .map_err(|_| PriorError::ExternalPriorUnavailable("connection poisoned".into()))?
            .round_trip(&req)?;
        let result = match resp {
            Response::LogprobsOk { values } => parse_values(&values),
            Response::Error { message } => Err(PriorError::ExternalPriorUnavailable(message)),
            other => Err(PriorError::Malformed(format!("unexpected reply {other:?}"))),
        };
        if matches!(result, Err(PriorError::Malformed(_))) {
            self.rejected.fetch_add(1, Ordering::Relaxed);
        }
        result
    }
}

/// Validates a payload and removes any residual normalisation offset.
fn parse_values(values: &[f64]) -> Result<LogProbs, PriorError> {
    validate_logprobs(values)?;
    let lse = logsumexp(values);
    let mut out = [0.0; ALPHABET_SIZE];
    for (o, v) in out.iter_mut().zip(values) {
        *o = v - lse;
    }
    Ok(out)
}

/// Answers protocol requests from `prior` until the reader closes.
///
/// This is the reference responder used by the test suite; it also makes a
/// built-in prior reachable through the wire format.
pub fn serve<R: BufRead, W: Write>(
    prior: &dyn SequencePrior,
    reader: R,
    mut writer: W,
) -> std::io::Result<()> {
    let mut ready = false;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match serde_json::from_str::<Request>(&line) {
            Ok(Request::Hello { version, alphabet }) => {
                if version != PROTOCOL_VERSION || alphabet.as_bytes() != ALPHABET {
                    let r = Response::Error {
                        message: format!("unsupported handshake version={version} alphabet={alphabet}"),
                    };
                    writeln!(writer, "{}", serde_json::to_string(&r).unwrap())?;
                    writer.flush()?;
                    return Ok(());
                }
                ready = true;
                Response::HelloOk { model: prior.name() }
            }
            Ok(Request::Logprobs { .. }) if !ready => Response::Error {
                message: "handshake required".into(),
            },
            Ok(Request::Logprobs { tokens, position }) => answer(prior, &tokens, position),
            Err(e) => Response::Error {
                message: format!("bad request: {e}"),
            },
        };
        writeln!(writer, "{}", serde_json::to_string(&resp).unwrap())?;
        writer.flush()?;
    }
    Ok(())
}

fn answer(prior: &dyn SequencePrior, tokens: &[i32], position: usize) -> Response {
    let slots: Option<Vec<_>> = tokens
        .iter()
        .map(|&t| match t {
            -1 => Some(None),
            t if (0..ALPHABET_SIZE as i32).contains(&t) => {
                Some(crate::seq::AminoAcid::from_index(t as usize))
            }
            _ => None,
        })
        .collect();
    let Some(ctx) = slots.and_then(|s| MaskedSequence::from_slots(s).ok()) else {
        return Response::Error {
            message: "invalid tokens".into(),
        };
    };
    if position == 0 {
        return Response::Error {
            message: "positions are 1-based".into(),
        };
    }
    match super::conditional_logprobs(prior, &ctx, position - 1) {
        // JSON has no infinities; zero-probability entries go out as a very
        // negative finite value.
        Ok(v) => Response::LogprobsOk {
            values: v.iter().map(|x| x.max(-1e30)).collect(),
        },
        Err(e) => Response::Error {
            message: e.to_string(),
        },
    }
}
