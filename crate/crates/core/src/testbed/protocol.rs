//! Line-delimited wire protocol for external evaluators.
//!
//! UTF-8, LF-terminated lines. The session opens with a handshake:
//!
//! ```text
//! -> HELLO m=<dim>
//! <- READY
//! ```
//!
//! then one strictly sequential request per evaluation:
//!
//! ```text
//! -> EVAL x0 x1 ... x{m-1}
//! <- <value>            (a single decimal number)
//! <- ERROR <text>       (evaluator-side failure)
//! ```
//!
//! Coordinates use shortest round-trip decimal formatting, so the evaluator
//! parses exactly the `f64` the engine queried.

use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("handshake failed, expected READY, got {got:?}")]
    Handshake { got: String },
    #[error("malformed response {raw:?}")]
    Malformed { raw: String },
    #[error("non-finite value in response {raw:?}")]
    NonFinite { raw: String },
    #[error("evaluator error: {0}")]
    Remote(String),
    #[error("channel closed by the evaluator")]
    Closed,
    #[error("no response within {0:?}")]
    Timeout(Duration),
    #[error("failed to spawn evaluator: {0}")]
    Spawn(String),
}

fn format_request(x: &[f64]) -> String {
    let mut line = String::from("EVAL");
    for v in x {
        line.push(' ');
        line.push_str(&v.to_string());
    }
    line.push('\n');
    line
}

fn parse_response(line: &str) -> Result<f64, ProtocolError> {
    let line = line.trim_end_matches(['\r', '\n']);
    if let Some(msg) = line.strip_prefix("ERROR") {
        return Err(ProtocolError::Remote(msg.trim().to_string()));
    }
    let value: f64 = line.trim().parse().map_err(|_| ProtocolError::Malformed {
        raw: line.to_string(),
    })?;
    if !value.is_finite() {
        return Err(ProtocolError::NonFinite {
            raw: line.to_string(),
        });
    }
    Ok(value)
}

/// Client end of the protocol over arbitrary reader/writer pairs.
pub struct LineChannel<R, W> {
    reader: R,
    writer: W,
}

impl<R: BufRead, W: Write> LineChannel<R, W> {
    /// Performs the handshake and returns the connected channel.
    pub fn connect(reader: R, mut writer: W, dim: usize) -> Result<Self, ProtocolError> {
        writeln!(writer, "HELLO m={dim}")?;
        writer.flush()?;
        let mut chan = Self { reader, writer };
        let line = chan.read_line()?;
        if line.trim() != "READY" {
            return Err(ProtocolError::Handshake { got: line });
        }
        Ok(chan)
    }

    /// One request, one blocking response.
    pub fn eval(&mut self, x: &[f64]) -> Result<f64, ProtocolError> {
        self.writer.write_all(format_request(x).as_bytes())?;
        self.writer.flush()?;
        let line = self.read_line()?;
        parse_response(&line)
    }

    fn read_line(&mut self) -> Result<String, ProtocolError> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(ProtocolError::Closed);
        }
        Ok(line)
    }
}

/// Evaluator side: answers `EVAL` requests with `f` until EOF. `dim` is
/// checked against the handshake when given.
pub fn serve<R, W, F>(
    reader: R,
    mut writer: W,
    dim: Option<usize>,
    mut f: F,
) -> Result<(), ProtocolError>
where
    R: BufRead,
    W: Write,
    F: FnMut(&[f64]) -> Result<f64, String>,
{
    let mut lines = reader.lines();
    let hello = lines.next().ok_or(ProtocolError::Closed)??;
    let announced: Option<usize> = hello
        .strip_prefix("HELLO m=")
        .and_then(|s| s.trim().parse().ok());
    match (announced, dim) {
        (Some(a), Some(d)) if a != d => {
            writeln!(
                writer,
                "ERROR dimension mismatch: serving {d}, requested {a}"
            )?;
            writer.flush()?;
            return Err(ProtocolError::Handshake { got: hello });
        }
        (None, _) => {
            return Err(ProtocolError::Handshake { got: hello });
        }
        _ => {}
    }
    writeln!(writer, "READY")?;
    writer.flush()?;

    for line in lines {
        let line = line?;
        let reply = match line.strip_prefix("EVAL ") {
            Some(rest) => {
                let coords: Result<Vec<f64>, _> =
                    rest.split_ascii_whitespace().map(str::parse).collect();
                match coords {
                    Ok(x) => match f(&x) {
                        Ok(v) => v.to_string(),
                        Err(msg) => format!("ERROR {msg}"),
                    },
                    Err(_) => format!("ERROR unparseable coordinates in {line:?}"),
                }
            }
            None => format!("ERROR unknown request {line:?}"),
        };
        writeln!(writer, "{reply}")?;
        writer.flush()?;
    }
    Ok(())
}

/// A spawned evaluator subprocess speaking the protocol on stdin/stdout,
/// with a response timeout. Exactly one request is in flight at a time.
pub struct ExternalProcess {
    child: Child,
    stdin: ChildStdin,
    lines: mpsc::Receiver<io::Result<String>>,
    timeout: Duration,
}

impl ExternalProcess {
    pub fn spawn(mut cmd: Command, dim: usize, timeout: Duration) -> Result<Self, ProtocolError> {
        cmd.stdin(Stdio::piped()).stdout(Stdio::piped());
        let mut child = cmd
            .spawn()
            .map_err(|e| ProtocolError::Spawn(e.to_string()))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut proc = Self {
            child,
            stdin,
            lines: rx,
            timeout,
        };
        writeln!(proc.stdin, "HELLO m={dim}")?;
        proc.stdin.flush()?;
        let line = proc.read_line()?;
        if line.trim() != "READY" {
            return Err(ProtocolError::Handshake { got: line });
        }
        Ok(proc)
    }

    pub fn eval(&mut self, x: &[f64]) -> Result<f64, ProtocolError> {
        self.stdin.write_all(format_request(x).as_bytes())?;
        self.stdin.flush()?;
        let line = self.read_line()?;
        parse_response(&line)
    }

    fn read_line(&mut self) -> Result<String, ProtocolError> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(e.into()),
            Err(mpsc::RecvTimeoutError::Timeout) => Err(ProtocolError::Timeout(self.timeout)),
            Err(mpsc::RecvTimeoutError::Disconnected) => Err(ProtocolError::Closed),
        }
    }
}

impl Drop for ExternalProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
