//! Newline-delimited JSON protocol for external black-box nonlinearities.
//!
//! On connect the server writes one [`Hello`] line. Each following line from
//! the client is either a single [`EvalRequest`] object or a JSON array of
//! them; the server answers on one line with an [`EvalResponse`] object or an
//! array of responses in the same order. Only real vectors are transmitted.
//! See `docs/protocol.md` for the schema.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Result, SsmError};
use crate::model::Nonlinearity;

pub const PROTOCOL_NAME: &str = "ssm-blackbox";
pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hello {
    pub protocol: String,
    pub version: u32,
    pub dofs: usize,
    pub serial: bool,
    pub name: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalKind {
    Full,
    /// `(f(z) + f(−z)) / 2`
    Even,
    /// `(f(z) − f(−z)) / 2`
    Odd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRequest {
    pub id: u64,
    pub kind: EvalKind,
    pub x: Vec<f64>,
    pub xdot: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResponse {
    pub id: Option<u64>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EvalResponse {
    fn error(id: Option<u64>, message: impl Into<String>) -> Self {
        Self {
            id,
            status: Status::Error,
            f: None,
            error: Some(message.into()),
        }
    }
}

fn evaluate(nl: &dyn Nonlinearity, req: &EvalRequest) -> Result<Vec<f64>> {
    let n = nl.dofs();
    if req.x.len() != n || req.xdot.len() != n {
        return Err(SsmError::Protocol(format!(
            "expected vectors of length {n}, got x: {}, xdot: {}",
            req.x.len(),
            req.xdot.len()
        )));
    }
    let plus = nl.eval(&req.x, &req.xdot)?;
    if req.kind == EvalKind::Full {
        return Ok(plus);
    }
    let neg = |v: &[f64]| v.iter().map(|a| -a).collect::<Vec<_>>();
    let minus = nl.eval(&neg(&req.x), &neg(&req.xdot))?;
    let sign = if req.kind == EvalKind::Even { 1.0 } else { -1.0 };
    Ok(plus.iter().zip(&minus).map(|(a, b)| 0.5 * (a + sign * b)).collect())
}

fn respond(nl: &dyn Nonlinearity, value: Value) -> EvalResponse {
    let id = value.get("id").and_then(Value::as_u64);
    match serde_json::from_value::<EvalRequest>(value) {
        Ok(req) => match evaluate(nl, &req) {
            Ok(f) => EvalResponse {
                id: Some(req.id),
                status: Status::Ok,
                f: Some(f),
                error: None,
            },
            Err(e) => EvalResponse::error(Some(req.id), e.to_string()),
        },
        Err(e) => EvalResponse::error(id, format!("malformed request: {e}")),
    }
}

/// Answer one protocol line.
pub fn handle_line(nl: &dyn Nonlinearity, line: &str) -> String {
    let out = match serde_json::from_str::<Value>(line) {
        Ok(Value::Array(items)) => {
            Value::Array(items.into_iter().map(|v| to_value(&respond(nl, v))).collect())
        }
        Ok(v) => to_value(&respond(nl, v)),
        Err(e) => to_value(&EvalResponse::error(None, format!("malformed message: {e}"))),
    };
    out.to_string()
}

fn to_value(r: &EvalResponse) -> Value {
    serde_json::to_value(r).expect("response serializes")
}

pub fn hello(nl: &dyn Nonlinearity) -> Hello {
    Hello {
        protocol: PROTOCOL_NAME.into(),
        version: PROTOCOL_VERSION,
        dofs: nl.dofs(),
        serial: true,
        name: nl.name(),
    }
}

/// Serve one connection until the peer closes it.
pub fn serve_connection(nl: &dyn Nonlinearity, reader: impl BufRead, mut writer: impl Write) -> Result<()> {
    writeln!(writer, "{}", serde_json::to_string(&hello(nl)).expect("hello serializes"))?;
    writer.flush()?;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        writeln!(writer, "{}", handle_line(nl, &line))?;
        writer.flush()?;
    }
    Ok(())
}

pub fn serve_stdio(nl: &dyn Nonlinearity) -> Result<()> {
    let stdin = std::io::stdin();
    serve_connection(nl, stdin.lock(), BufWriter::new(std::io::stdout().lock()))
}

/// Accept connections one at a time; stops after `max_connections` if given.
pub fn serve_tcp(nl: &dyn Nonlinearity, listener: TcpListener, max_connections: Option<usize>) -> Result<()> {
    let mut served = 0;
    for stream in listener.incoming() {
        let stream = stream?;
        let reader = BufReader::new(stream.try_clone()?);
        if let Err(e) = serve_connection(nl, reader, BufWriter::new(stream)) {
            log::warn!("connection ended with error: {e}");
        }
        served += 1;
        if max_connections.is_some_and(|m| served >= m) {
            break;
        }
    }
    Ok(())
}

struct Conn {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    child: Option<Child>,
}

impl Drop for Conn {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Client side: a [`Nonlinearity`] whose evaluations are served remotely.
pub struct RemoteNonlinearity {
    hello: Hello,
    conn: Mutex<Conn>,
    next_id: AtomicU64,
    /// Largest number of requests sent in one message.
    pub batch_limit: usize,
}

impl RemoteNonlinearity {
    fn handshake(mut conn: Conn) -> Result<Self> {
        let mut line = String::new();
        conn.reader.read_line(&mut line)?;
        let hello: Hello = serde_json::from_str(line.trim())
            .map_err(|e| SsmError::Protocol(format!("bad handshake `{}`: {e}", line.trim())))?;
        if hello.protocol != PROTOCOL_NAME || hello.version != PROTOCOL_VERSION {
            return Err(SsmError::Protocol(format!(
                "unsupported server {} v{}; expected {PROTOCOL_NAME} v{PROTOCOL_VERSION}",
                hello.protocol, hello.version
            )));
        }
        Ok(Self {
            hello,
            conn: Mutex::new(conn),
            next_id: AtomicU64::new(1),
            batch_limit: 4096,
        })
    }

    pub fn connect_tcp(addr: impl ToSocketAddrs) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let reader = BufReader::new(stream.try_clone()?);
        Self::handshake(Conn {
            reader: Box::new(reader),
            writer: Box::new(BufWriter::new(stream)),
            child: None,
        })
    }

    /// Start `program` and talk to it over its stdin/stdout.
    pub fn spawn(program: &str, args: &[String]) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Self::handshake(Conn {
            reader: Box::new(BufReader::new(stdout)),
            writer: Box::new(BufWriter::new(stdin)),
            child: Some(child),
        })
    }

    pub fn server(&self) -> &Hello {
        &self.hello
    }

    /// Send requests as one message and return the vectors in order.
    pub fn request(&self, kind: EvalKind, states: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let n = self.hello.dofs;
        let mut conn = self.conn.lock().expect("connection lock");
        let mut out = Vec::with_capacity(states.len());
        for chunk in states.chunks(self.batch_limit.max(1)) {
            let first = self.next_id.fetch_add(chunk.len() as u64, Ordering::Relaxed);
            let reqs: Vec<EvalRequest> = chunk
                .iter()
                .enumerate()
                .map(|(k, z)| EvalRequest {
                    id: first + k as u64,
                    kind,
                    x: z[..n].to_vec(),
                    xdot: z[n..].to_vec(),
                })
                .collect();
            let msg = if reqs.len() == 1 {
                serde_json::to_string(&reqs[0])
            } else {
                serde_json::to_string(&reqs)
            }
            .expect("request serializes");
            writeln!(conn.writer, "{msg}")?;
            conn.writer.flush()?;
            let mut line = String::new();
            if conn.reader.read_line(&mut line)? == 0 {
                return Err(SsmError::Protocol("server closed the connection".into()));
            }
            let responses: Vec<EvalResponse> = if reqs.len() == 1 {
                vec![serde_json::from_str(&line).map_err(|e| SsmError::Protocol(format!("bad response: {e}")))?]
            } else {
                serde_json::from_str(&line).map_err(|e| SsmError::Protocol(format!("bad response: {e}")))?
            };
            if responses.len() != reqs.len() {
                return Err(SsmError::Protocol(format!(
                    "sent {} requests, received {} responses",
                    reqs.len(),
                    responses.len()
                )));
            }
            for (req, resp) in reqs.iter().zip(responses) {
                if resp.id != Some(req.id) {
                    return Err(SsmError::Protocol(format!("response id {:?} for request {}", resp.id, req.id)));
                }
                match (resp.status, resp.f) {
                    (Status::Ok, Some(f)) if f.len() == n => out.push(f),
                    (Status::Ok, _) => {
                        return Err(SsmError::Protocol(format!("request {}: result has wrong length", req.id)))
                    }
                    (Status::Error, _) => {
                        return Err(SsmError::Evaluation {
                            message: resp.error.unwrap_or_default(),
                            input: req.x.iter().chain(&req.xdot).copied().collect(),
                        })
                    }
                }
            }
        }
        Ok(out)
    }
}

impl Nonlinearity for RemoteNonlinearity {
    fn dofs(&self) -> usize {
        self.hello.dofs
    }

    fn eval(&self, x: &[f64], xdot: &[f64]) -> Result<Vec<f64>> {
        let z: Vec<f64> = x.iter().chain(xdot).copied().collect();
        Ok(self.request(EvalKind::Full, &[z])?.remove(0))
    }

    fn eval_batch(&self, states: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.request(EvalKind::Full, states)
    }

    fn is_serial(&self) -> bool {
        self.hello.serial
    }

    fn name(&self) -> String {
        format!("remote:{}", self.hello.name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::make_duffing;

    #[test]
    fn full_even_odd() {
        let b = make_duffing(1.0, 0.0, 2.0).unwrap();
        let nl = b.model.nonlinearity().as_ref();
        let line = r#"[{"id":1,"kind":"full","x":[0.0],"xdot":[0.0]},{"id":2,"kind":"odd","x":[0.5],"xdot":[0.0]},{"id":3,"kind":"even","x":[0.5],"xdot":[0.0]}]"#;
        let out: Vec<EvalResponse> = serde_json::from_str(&handle_line(nl, line)).unwrap();
        assert_eq!(out[0].f, Some(vec![0.0]));
        assert_eq!(out[1].f, Some(vec![0.25]));
        assert_eq!(out[2].f, Some(vec![0.0]));
    }

    #[test]
    fn errors_echo_id() {
        let b = make_duffing(1.0, 0.0, 1.0).unwrap();
        let nl = b.model.nonlinearity().as_ref();
        let r: EvalResponse =
            serde_json::from_str(&handle_line(nl, r#"{"id":7,"kind":"full","x":[1,2],"xdot":[0]}"#)).unwrap();
        assert_eq!((r.id, r.status), (Some(7), Status::Error));
        let r: EvalResponse = serde_json::from_str(&handle_line(nl, r#"{"id":9,"kind":"sideways"}"#)).unwrap();
        assert_eq!((r.id, r.status), (Some(9), Status::Error));
        let r: EvalResponse = serde_json::from_str(&handle_line(nl, "not json")).unwrap();
        assert_eq!((r.id, r.status), (None, Status::Error));
    }

    #[test]
    fn complex_field_is_rejected() {
        let b = make_duffing(1.0, 0.0, 1.0).unwrap();
        let nl = b.model.nonlinearity().as_ref();
        let r: EvalResponse = serde_json::from_str(&handle_line(
            nl,
            r#"{"id":1,"kind":"full","x":[1],"xdot":[0],"x_im":[1]}"#,
        ))
        .unwrap();
        assert_eq!(r.status, Status::Error);
    }
}
