//! JSON wire protocol for out-of-process scorers, with stdio and HTTP clients.
//!
//! Every message carries `version`; a peer speaking any other version is
//! refused. Requests are tagged by `mode`:
//!
//! ```text
//! {"version":1,"mode":"rerank","items":[{"id":"0","sequence":"[CLS] ..."}]}
//!   -> {"version":1,"scores":[{"id":"0","p":0.93}]}
//! {"version":1,"mode":"span","sequence":"[CLS] ...","segment_two_start":24}
//!   -> {"version":1,"start":24,"end":43,"score":0.88}
//! {"version":1,"mode":"tag","tokens":["Blunting",":"]}
//!   -> {"version":1,"tags":["B","O"]}
//! {"version":1,"mode":"health"}
//!   -> {"version":1,"protocol_version":1,"model_size":"base","checkpoint":"..."}
//! ```
//!
//! A peer may answer any request with `{"version":1,"error":"..."}`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::instances::{RerankInstance, SpanInstance};
use super::{Scorer, ScorerError, SpanAnswer};
use crate::span_detection::Tag;
use crate::text::char_len;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankItem {
    pub id: String,
    pub sequence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Request {
    Rerank {
        items: Vec<RerankItem>,
    },
    Span {
        sequence: String,
        segment_two_start: usize,
    },
    Tag {
        tokens: Vec<String>,
    },
    Health,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub version: u32,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Envelope<T> {
    pub fn new(body: T) -> Self {
        Envelope {
            version: PROTOCOL_VERSION,
            body,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub id: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankResponse {
    pub scores: Vec<ItemScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanResponse {
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagResponse {
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub protocol_version: u32,
    #[serde(default)]
    pub model_size: Option<String>,
    #[serde(default)]
    pub checkpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

/// Checks the version, surfaces peer errors, then decodes the body.
pub fn decode_response<T: DeserializeOwned>(raw: &str) -> Result<T, ScorerError> {
    let value: Value = serde_json::from_str(raw.trim())
        .map_err(|e| ScorerError::Protocol(format!("invalid JSON: {e}")))?;
    let version = value
        .get("version")
        .ok_or_else(|| ScorerError::Protocol("response has no version".into()))?;
    if version.as_u64() != Some(u64::from(PROTOCOL_VERSION)) {
        return Err(ScorerError::VersionMismatch {
            expected: PROTOCOL_VERSION,
            found: version.to_string(),
        });
    }
    if let Some(err) = value.get("error") {
        return Err(ScorerError::Remote(
            err.as_str()
                .map(str::to_string)
                .unwrap_or_else(|| err.to_string()),
        ));
    }
    serde_json::from_value(value)
        .map_err(|e| ScorerError::Protocol(format!("unexpected response shape: {e}")))
}

/// Parses a request as a server would, refusing unknown versions.
pub fn decode_request(raw: &str) -> Result<Request, ScorerError> {
    let value: Value = serde_json::from_str(raw.trim())
        .map_err(|e| ScorerError::Protocol(format!("invalid JSON: {e}")))?;
    match value.get("version").map(Value::as_u64) {
        Some(Some(v)) if v == u64::from(PROTOCOL_VERSION) => {}
        Some(_) => {
            return Err(ScorerError::VersionMismatch {
                expected: PROTOCOL_VERSION,
                found: value["version"].to_string(),
            })
        }
        None => return Err(ScorerError::Protocol("request has no version".into())),
    }
    let env: Envelope<Request> = serde_json::from_value(value)
        .map_err(|e| ScorerError::Protocol(format!("unknown request: {e}")))?;
    Ok(env.body)
}

/// Request body for a batch of re-rank instances; ids are batch positions.
pub fn rerank_request(instances: &[RerankInstance]) -> Request {
    Request::Rerank {
        items: instances
            .iter()
            .enumerate()
            .map(|(i, inst)| RerankItem {
                id: i.to_string(),
                sequence: inst.sequence.clone(),
            })
            .collect(),
    }
}

/// Maps scores back to batch order; every id must be answered exactly once.
pub fn collect_rerank_scores(n: usize, response: RerankResponse) -> Result<Vec<f64>, ScorerError> {
    let mut out = vec![None; n];
    for s in response.scores {
        let idx: usize =
            s.id.parse()
                .ok()
                .filter(|&i| i < n)
                .ok_or_else(|| ScorerError::Protocol(format!("unknown item id {:?}", s.id)))?;
        if !s.p.is_finite() {
            return Err(ScorerError::Protocol(format!(
                "non-finite score for item {idx}"
            )));
        }
        if out[idx].replace(s.p).is_some() {
            return Err(ScorerError::Protocol(format!("item {idx} scored twice")));
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(i, p)| p.ok_or_else(|| ScorerError::Protocol(format!("item {i} not scored"))))
        .collect()
}

pub fn check_span_response(
    instance: &SpanInstance,
    r: SpanResponse,
) -> Result<SpanAnswer, ScorerError> {
    if r.start > r.end || r.end > char_len(&instance.sequence) {
        return Err(ScorerError::Protocol(format!(
            "span {}..{} outside a sequence of {} characters",
            r.start,
            r.end,
            char_len(&instance.sequence)
        )));
    }
    Ok(SpanAnswer {
        start: r.start,
        end: r.end,
        score: r.score,
    })
}

pub fn parse_tags(n: usize, r: TagResponse) -> Result<Vec<Tag>, ScorerError> {
    if r.tags.len() != n {
        return Err(ScorerError::Protocol(format!(
            "expected {n} tags, got {}",
            r.tags.len()
        )));
    }
    r.tags
        .iter()
        .map(|t| {
            t.parse::<Tag>()
                .map_err(|_| ScorerError::Protocol(format!("bad tag {t:?}")))
        })
        .collect()
}

/// How a remote scorer is reached.
pub trait Transport: Send + Sync {
    /// Sends one request and returns the raw response text.
    fn exchange(&self, request: &Envelope<Request>) -> Result<String, ScorerError>;
    fn describe(&self) -> String;
}

struct ChildIo {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// A child process speaking one JSON object per line on stdin/stdout.
pub struct StdioTransport {
    command: String,
    io: Mutex<ChildIo>,
}

impl StdioTransport {
    /// Runs `command` through `sh -c`.
    pub fn spawn(command: &str) -> Result<Self, ScorerError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ScorerError::Transport(format!("cannot start {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(StdioTransport {
            command: command.to_string(),
            io: Mutex::new(ChildIo {
                child,
                stdin,
                stdout,
            }),
        })
    }
}

impl Transport for StdioTransport {
    fn exchange(&self, request: &Envelope<Request>) -> Result<String, ScorerError> {
        let line = serde_json::to_string(request).expect("requests serialize");
        let mut io = self
            .io
            .lock()
            .map_err(|_| ScorerError::Transport("scorer pipe poisoned".into()))?;
        writeln!(io.stdin, "{line}")
            .and_then(|_| io.stdin.flush())
            .map_err(|e| ScorerError::Transport(format!("write to scorer: {e}")))?;
        let mut reply = String::new();
        let n = io
            .stdout
            .read_line(&mut reply)
            .map_err(|e| ScorerError::Transport(format!("read from scorer: {e}")))?;
        if n == 0 {
            return Err(ScorerError::Transport("scorer closed its output".into()));
        }
        Ok(reply)
    }

    fn describe(&self) -> String {
        format!("stdio:{}", self.command)
    }
}

impl Drop for StdioTransport {
    fn drop(&mut self) {
        if let Ok(io) = self.io.get_mut() {
            let _ = io.child.kill();
            let _ = io.child.wait();
        }
    }
}

/// `POST {base}/score` and `GET {base}/health`.
pub struct HttpTransport {
    base: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(base: &str, timeout: Duration) -> Self {
        HttpTransport {
            base: base.trim_end_matches('/').to_string(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    fn read(resp: Result<ureq::Response, ureq::Error>) -> Result<String, ScorerError> {
        match resp {
            Ok(r) => r
                .into_string()
                .map_err(|e| ScorerError::Transport(e.to_string())),
            // Error bodies still follow the protocol; let the decoder report them.
            Err(ureq::Error::Status(_, r)) => r
                .into_string()
                .map_err(|e| ScorerError::Transport(e.to_string())),
            Err(e) => Err(ScorerError::Transport(e.to_string())),
        }
    }
}

impl Transport for HttpTransport {
    fn exchange(&self, request: &Envelope<Request>) -> Result<String, ScorerError> {
        if matches!(request.body, Request::Health) {
            return Self::read(self.agent.get(&format!("{}/health", self.base)).call());
        }
        let body = serde_json::to_value(request).expect("requests serialize");
        Self::read(
            self.agent
                .post(&format!("{}/score", self.base))
                .send_json(body),
        )
    }

    fn describe(&self) -> String {
        self.base.clone()
    }
}

/// Scorer backed by a remote model.
pub struct RemoteScorer {
    transport: Box<dyn Transport>,
}

impl RemoteScorer {
    pub fn new(transport: Box<dyn Transport>) -> Self {
        RemoteScorer { transport }
    }

    /// `http://` and `https://` addresses use HTTP; `stdio:<command>` or any
    /// other string is run as a child process.
    pub fn connect(address: &str, timeout: Duration) -> Result<Self, ScorerError> {
        let transport: Box<dyn Transport> =
            if address.starts_with("http://") || address.starts_with("https://") {
                Box::new(HttpTransport::new(address, timeout))
            } else {
                Box::new(StdioTransport::spawn(
                    address.strip_prefix("stdio:").unwrap_or(address),
                )?)
            };
        Ok(RemoteScorer { transport })
    }

    fn call<T: DeserializeOwned>(&self, body: Request) -> Result<T, ScorerError> {
        let raw = self.transport.exchange(&Envelope::new(body))?;
        decode_response(&raw)
    }

    pub fn health(&self) -> Result<HealthResponse, ScorerError> {
        let h: HealthResponse = self.call(Request::Health)?;
        if h.protocol_version != PROTOCOL_VERSION {
            return Err(ScorerError::VersionMismatch {
                expected: PROTOCOL_VERSION,
                found: h.protocol_version.to_string(),
            });
        }
        Ok(h)
    }
}

impl Scorer for RemoteScorer {
    fn name(&self) -> String {
        format!("remote:{}", self.transport.describe())
    }

    fn score_rerank(&self, instances: &[RerankInstance]) -> Result<Vec<f64>, ScorerError> {
        if instances.is_empty() {
            return Ok(Vec::new());
        }
        let resp: RerankResponse = self.call(rerank_request(instances))?;
        collect_rerank_scores(instances.len(), resp)
    }

    fn score_span(&self, instance: &SpanInstance) -> Result<SpanAnswer, ScorerError> {
        let resp: SpanResponse = self.call(Request::Span {
            sequence: instance.sequence.clone(),
            segment_two_start: instance.segment_two_start,
        })?;
        check_span_response(instance, resp)
    }

    fn tag(&self, tokens: &[String]) -> Result<Vec<Tag>, ScorerError> {
        let resp: TagResponse = self.call(Request::Tag {
            tokens: tokens.to_vec(),
        })?;
        parse_tags(tokens.len(), resp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_wire_shape() {
        let env = Envelope::new(Request::Span {
            sequence: "[CLS] a [SEP] b [SEP]".into(),
            segment_two_start: 14,
        });
        let v: Value = serde_json::to_value(&env).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"version":1,"mode":"span","sequence":"[CLS] a [SEP] b [SEP]","segment_two_start":14})
        );
        let back = decode_request(&v.to_string()).unwrap();
        assert_eq!(back, env.body);
        let health = serde_json::to_value(Envelope::new(Request::Health)).unwrap();
        assert_eq!(health, serde_json::json!({"version":1,"mode":"health"}));
    }

    #[test]
    fn version_is_mandatory_and_checked() {
        assert!(matches!(
            decode_response::<RerankResponse>(r#"{"scores":[]}"#),
            Err(ScorerError::Protocol(_))
        ));
        assert!(matches!(
            decode_response::<RerankResponse>(r#"{"version":2,"scores":[]}"#),
            Err(ScorerError::VersionMismatch { .. })
        ));
        assert!(matches!(
            decode_request(r#"{"version":"1","mode":"tag","tokens":[]}"#),
            Err(ScorerError::VersionMismatch { .. })
        ));
        assert!(matches!(
            decode_request(r#"{"mode":"tag","tokens":[]}"#),
            Err(ScorerError::Protocol(_))
        ));
    }

    #[test]
    fn peer_error_surfaces() {
        assert_eq!(
            decode_response::<RerankResponse>(r#"{"version":1,"error":"model not loaded"}"#),
            Err(ScorerError::Remote("model not loaded".into()))
        );
    }

    #[test]
    fn rerank_scores_must_cover_batch() {
        let r = |pairs: &[(&str, f64)]| RerankResponse {
            scores: pairs
                .iter()
                .map(|&(id, p)| ItemScore { id: id.into(), p })
                .collect(),
        };
        assert_eq!(
            collect_rerank_scores(2, r(&[("1", 0.2), ("0", 0.9)])).unwrap(),
            vec![0.9, 0.2]
        );
        assert!(collect_rerank_scores(2, r(&[("0", 0.2)])).is_err());
        assert!(collect_rerank_scores(2, r(&[("0", 0.2), ("0", 0.3)])).is_err());
        assert!(collect_rerank_scores(1, r(&[("7", 0.2)])).is_err());
        assert!(collect_rerank_scores(1, r(&[("0", f64::NAN)])).is_err());
    }

    #[test]
    fn tags_must_align() {
        let t = |v: &[&str]| TagResponse {
            tags: v.iter().map(|s| s.to_string()).collect(),
        };
        assert_eq!(parse_tags(2, t(&["B", "O"])).unwrap(), vec![Tag::B, Tag::O]);
        assert!(parse_tags(3, t(&["B", "O"])).is_err());
        assert!(parse_tags(1, t(&["X"])).is_err());
    }
}
