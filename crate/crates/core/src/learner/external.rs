//! Adapter for a trainer running as a child process.
//!
//! The child reads one JSON request per line on stdin and answers each with
//! one JSON line on stdout. A session opens with a version handshake:
//!
//! ```text
//! -> {"cmd":"hello","version":1}                      <- {"version":1}
//! -> {"cmd":"train","task":2,"batch_size":3,"ids":[..]} <- {"loss_before":1.2,"loss_after":1.1}
//! -> {"cmd":"eval","task":2,"batch_size":3,"ids":[..]}  <- {"loss":1.15}
//! -> {"cmd":"validate"}                               <- {"loss":0.9}
//! -> {"cmd":"shutdown"}                               (child exits)
//! ```
//!
//! Losses are means over the examples of the batch. A response of the form
//! `{"error":"..."}` aborts the run. Exactly one request is outstanding at a
//! time.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, ExitStatus, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{check_loss, Learner, LearnerReport};
use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_TIMEOUT_SECS: u64 = 600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "lowercase")]
pub enum Request {
    Hello {
        version: u32,
    },
    Train {
        task: usize,
        batch_size: usize,
        ids: Vec<String>,
    },
    Eval {
        task: usize,
        batch_size: usize,
        ids: Vec<String>,
    },
    Validate,
    Shutdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalLearnerConfig {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
    pub timeout_secs: f64,
}

impl ExternalLearnerConfig {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        ExternalLearnerConfig {
            program: program.into(),
            args,
            timeout_secs: DEFAULT_TIMEOUT_SECS as f64,
        }
    }

    pub fn timeout(&self) -> Result<Duration> {
        Duration::try_from_secs_f64(self.timeout_secs)
            .map_err(|_| Error::Config(format!("invalid learner timeout {}", self.timeout_secs)))
    }
}

#[derive(Deserialize)]
struct HelloResponse {
    version: u32,
}

#[derive(Deserialize)]
struct TrainResponse {
    loss_before: f64,
    loss_after: f64,
    step_cost: Option<f64>,
}

#[derive(Deserialize)]
struct LossResponse {
    loss: f64,
}

#[derive(Deserialize)]
struct ErrorResponse {
    error: String,
}

pub struct ExternalLearner {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    k: usize,
    last_request: String,
}

impl std::fmt::Debug for ExternalLearner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalLearner")
            .field("pid", &self.child.id())
            .field("k", &self.k)
            .field("last_request", &self.last_request)
            .finish()
    }
}

impl ExternalLearner {
    /// Spawns the trainer and performs the handshake.
    pub fn spawn(config: &ExternalLearnerConfig, k: usize) -> Result<Self> {
        let timeout = config.timeout()?;
        let mut child = Command::new(&config.program)
            .args(&config.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::LearnerProcess(format!("cannot start `{}`: {e}", config.program)))?;
        let stdin = child.stdin.take();
        let stdout = child
            .stdout
            .take()
            .ok_or_else(|| Error::LearnerProcess("child stdout unavailable".into()))?;

        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });

        let mut learner = ExternalLearner {
            child,
            stdin,
            lines: rx,
            timeout,
            k,
            last_request: String::new(),
        };
        let hello: HelloResponse = learner.roundtrip(&Request::Hello {
            version: PROTOCOL_VERSION,
        })?;
        if hello.version != PROTOCOL_VERSION {
            return Err(learner.protocol(format!(
                "trainer speaks protocol version {}, expected {PROTOCOL_VERSION}",
                hello.version
            )));
        }
        Ok(learner)
    }

    fn protocol(&self, reason: impl Into<String>) -> Error {
        Error::Protocol {
            request: self.last_request.clone(),
            reason: reason.into(),
        }
    }

    fn send(&mut self, request: &Request) -> Result<()> {
        let line = serde_json::to_string(request).map_err(|e| Error::json("encoding learner request", e))?;
        self.last_request = line.clone();
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Error::LearnerProcess("learner already shut down".into()))?;
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::Protocol {
                request: line,
                reason: format!("cannot write to trainer: {e}"),
            })
    }

    fn receive_line(&mut self) -> Result<String> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(self.protocol(format!("cannot read from trainer: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                Err(self.protocol(format!("no response within {:?}", self.timeout)))
            }
            Err(RecvTimeoutError::Disconnected) => {
                let status = self.child.try_wait().ok().flatten();
                Err(self.protocol(match status {
                    Some(s) => format!("trainer exited ({s}) before responding"),
                    None => "trainer closed its output".to_string(),
                }))
            }
        }
    }

    /// Sends `request` and decodes the single-line response.
    pub fn roundtrip<T: DeserializeOwned>(&mut self, request: &Request) -> Result<T> {
        self.send(request)?;
        let line = self.receive_line()?;
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| self.protocol(format!("malformed response {line:?}: {e}")))?;
        if let Ok(err) = serde_json::from_value::<ErrorResponse>(value.clone()) {
            return Err(self.protocol(format!("trainer reported error: {}", err.error)));
        }
        serde_json::from_value(value).map_err(|e| self.protocol(format!("invalid response {line:?}: {e}")))
    }

    fn check_task(&self, task: usize) -> Result<()> {
        if task < self.k {
            Ok(())
        } else {
            Err(Error::InvalidTask { task, k: self.k })
        }
    }

    fn check_loss(&self, loss: f64) -> Result<f64> {
        check_loss(loss).map_err(|_| self.protocol(format!("invalid loss {loss}")))
    }

    /// Sends `shutdown` and waits for the child to exit.
    pub fn shutdown(mut self) -> Result<ExitStatus> {
        self.send(&Request::Shutdown)?;
        self.stdin = None;
        let deadline = Instant::now() + self.timeout;
        loop {
            match self.child.try_wait() {
                Ok(Some(status)) => return Ok(status),
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
                Ok(None) => return Err(self.protocol("trainer did not exit after shutdown")),
                Err(e) => return Err(Error::LearnerProcess(e.to_string())),
            }
        }
    }
}

impl Drop for ExternalLearner {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

impl Learner for ExternalLearner {
    fn train(&mut self, task: usize, batch: &[String]) -> Result<LearnerReport> {
        self.check_task(task)?;
        let resp: TrainResponse = self.roundtrip(&Request::Train {
            task,
            batch_size: batch.len(),
            ids: batch.to_vec(),
        })?;
        Ok(LearnerReport {
            loss_before: self.check_loss(resp.loss_before)?,
            loss_after: self.check_loss(resp.loss_after)?,
            step_cost: resp.step_cost.unwrap_or(batch.len() as f64),
        })
    }

    fn eval(&mut self, task: usize, batch: &[String]) -> Result<f64> {
        self.check_task(task)?;
        let resp: LossResponse = self.roundtrip(&Request::Eval {
            task,
            batch_size: batch.len(),
            ids: batch.to_vec(),
        })?;
        self.check_loss(resp.loss)
    }

    fn validation_loss(&mut self) -> Result<f64> {
        let resp: LossResponse = self.roundtrip(&Request::Validate)?;
        self.check_loss(resp.loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_wire_format() {
        let line = serde_json::to_string(&Request::Train {
            task: 2,
            batch_size: 1,
            ids: vec!["a".into()],
        })
        .unwrap();
        assert_eq!(line, r#"{"cmd":"train","task":2,"batch_size":1,"ids":["a"]}"#);
        assert_eq!(serde_json::to_string(&Request::Validate).unwrap(), r#"{"cmd":"validate"}"#);
        assert_eq!(
            serde_json::to_string(&Request::Hello { version: 1 }).unwrap(),
            r#"{"cmd":"hello","version":1}"#
        );
        assert_eq!(serde_json::to_string(&Request::Shutdown).unwrap(), r#"{"cmd":"shutdown"}"#);
    }

    #[test]
    fn missing_program_is_a_process_error() {
        let cfg = ExternalLearnerConfig::new("/definitely/not/a/trainer", vec![]);
        assert!(matches!(ExternalLearner::spawn(&cfg, 2), Err(Error::LearnerProcess(_))));
    }

    #[test]
    fn bad_timeout_rejected() {
        let mut cfg = ExternalLearnerConfig::new("x", vec![]);
        cfg.timeout_secs = -1.0;
        assert!(cfg.timeout().is_err());
    }
}
