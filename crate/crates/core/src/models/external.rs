//! Client for a model served by a child process over line-delimited JSON.
//!
//! Request: `{"op":"predict","instances":[[f64,...],...]}`
//! Response: `{"labels":[0|1,...]}`
//!
//! One document per line. Requests are strictly sequential per handle.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BlackBoxModel, ModelError};

#[derive(Debug, Serialize, PartialEq)]
pub struct PredictRequest<'a> {
    pub op: &'a str,
    pub instances: &'a [Vec<f64>],
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PredictResponse {
    pub labels: Vec<i64>,
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct ExternalModel {
    command: Vec<String>,
    timeout: Duration,
    session: Mutex<Option<Session>>,
}

impl std::fmt::Debug for ExternalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalModel")
            .field("command", &self.command)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl ExternalModel {
    /// Launches `command[0]` with the remaining elements as arguments.
    pub fn spawn(command: &[String], timeout: Duration) -> Result<Self, ModelError> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| ModelError::Protocol("empty command line".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });
        Ok(Self {
            command: command.to_vec(),
            timeout,
            session: Mutex::new(Some(Session {
                child,
                stdin,
                lines: rx,
            })),
        })
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    /// Sends one request and waits for its response line. Any failure kills
    /// the process; later calls report [`ModelError::ProcessExited`].
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, ModelError> {
        if rows.is_empty() {
            return Ok(Vec::new());
        }
        let mut guard = self.session.lock().unwrap_or_else(|p| p.into_inner());
        let session = guard.as_mut().ok_or(ModelError::ProcessExited)?;
        let result = Self::round_trip(session, rows, self.timeout);
        if result.is_err() {
            *guard = None;
        }
        result
    }

    fn round_trip(session: &mut Session, rows: &[Vec<f64>], timeout: Duration) -> Result<Vec<usize>, ModelError> {
        let request = serde_json::to_string(&PredictRequest {
            op: "predict",
            instances: rows,
        })
        .map_err(|e| ModelError::Protocol(e.to_string()))?;
        let write = session
            .stdin
            .write_all(request.as_bytes())
            .and_then(|_| session.stdin.write_all(b"\n"))
            .and_then(|_| session.stdin.flush());
        if let Err(e) = write {
            return Err(match e.kind() {
                std::io::ErrorKind::BrokenPipe => ModelError::ProcessExited,
                _ => ModelError::Io(e),
            });
        }
        let line = match session.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(ModelError::Io(e)),
            Err(RecvTimeoutError::Timeout) => return Err(ModelError::Timeout(timeout.as_millis() as u64)),
            Err(RecvTimeoutError::Disconnected) => return Err(ModelError::ProcessExited),
        };
        parse_response(&line, rows.len())
    }
}

/// Decodes one response line and checks it answers a request of `expected` rows.
pub fn parse_response(line: &str, expected: usize) -> Result<Vec<usize>, ModelError> {
    let response: PredictResponse =
        serde_json::from_str(line.trim()).map_err(|e| ModelError::Protocol(format!("malformed response: {e}")))?;
    if response.labels.len() != expected {
        return Err(ModelError::Protocol(format!(
            "expected {expected} labels, got {}",
            response.labels.len()
        )));
    }
    response
        .labels
        .into_iter()
        .map(|l| match l {
            0 | 1 => Ok(l as usize),
            other => Err(ModelError::Protocol(format!("label {other} is not 0 or 1"))),
        })
        .collect()
}

impl BlackBoxModel for ExternalModel {
    fn predict_labels(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, ModelError> {
        self.predict(rows)
    }

    fn descriptor(&self) -> String {
        format!("external:{}", self.command.join(" "))
    }
}
