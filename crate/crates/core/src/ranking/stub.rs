//! Server side of the scorer protocol with a deterministic stand-in model.
//!
//! Used by `radnorm stub-scorer` and by tests to exercise the remote clients
//! without a trained model.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};

use serde::Serialize;

use super::instances::{parse_segments, CONCEPT_JOINER};
use super::protocol::{
    decode_request, Envelope, ErrorResponse, HealthResponse, ItemScore, Request, RerankResponse,
    SpanResponse, TagResponse, PROTOCOL_VERSION,
};
use super::scorers::jaccard;
use super::ScorerError;
use crate::text::char_len;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StubModel {
    /// Every rerank item gets `p`; spans pick the first candidate.
    Constant(f64),
    /// Token overlap between the mention segment and each other segment.
    Lexical,
}

impl StubModel {
    fn rerank_score(&self, sequence: &str) -> Result<f64, ScorerError> {
        match *self {
            StubModel::Constant(p) => Ok(p),
            StubModel::Lexical => {
                let segs =
                    parse_segments(sequence).map_err(|e| ScorerError::Protocol(e.to_string()))?;
                Ok(segs[1..]
                    .iter()
                    .map(|s| jaccard(segs[0], s))
                    .fold(0.0, f64::max))
            }
        }
    }

    fn span(&self, sequence: &str, segment_two_start: usize) -> Result<SpanResponse, ScorerError> {
        let segs = parse_segments(sequence).map_err(|e| ScorerError::Protocol(e.to_string()))?;
        if segs.len() != 2 {
            return Err(ScorerError::Protocol(
                "span sequence needs exactly two segments".into(),
            ));
        }
        let mut best: Option<(f64, usize, usize)> = None;
        let mut cursor = segment_two_start;
        for name in segs[1].split(CONCEPT_JOINER) {
            let len = char_len(name);
            let s = match *self {
                StubModel::Constant(p) => p,
                StubModel::Lexical => jaccard(segs[0], name),
            };
            if best.is_none_or(|(b, _, _)| s > b) {
                best = Some((s, cursor, cursor + len));
            }
            cursor += len + CONCEPT_JOINER.len();
        }
        let (score, start, end) = best.unwrap_or((0.0, segment_two_start, segment_two_start));
        Ok(SpanResponse { start, end, score })
    }

    fn handle(&self, request: Request) -> Result<String, ScorerError> {
        fn reply<T: Serialize>(body: T) -> String {
            serde_json::to_string(&Envelope::new(body)).expect("responses serialize")
        }
        Ok(match request {
            Request::Rerank { items } => reply(RerankResponse {
                scores: items
                    .into_iter()
                    .map(|it| {
                        Ok(ItemScore {
                            p: self.rerank_score(&it.sequence)?,
                            id: it.id,
                        })
                    })
                    .collect::<Result<_, ScorerError>>()?,
            }),
            Request::Span {
                sequence,
                segment_two_start,
            } => reply(self.span(&sequence, segment_two_start)?),
            Request::Tag { tokens } => reply(TagResponse {
                tags: tokens.iter().map(|_| "O".to_string()).collect(),
            }),
            Request::Health => reply(HealthResponse {
                protocol_version: PROTOCOL_VERSION,
                model_size: Some("stub".into()),
                checkpoint: None,
            }),
        })
    }

    /// Answers one request line. Failures become protocol error responses.
    pub fn respond(&self, line: &str) -> String {
        match decode_request(line).and_then(|r| self.handle(r)) {
            Ok(s) => s,
            Err(e) => serde_json::to_string(&Envelope::new(ErrorResponse {
                error: e.to_string(),
            }))
            .expect("serializes"),
        }
    }

    /// Serves JSON lines until the input closes.
    pub fn serve(&self, input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            writeln!(output, "{}", self.respond(&line))?;
            output.flush()?;
        }
        Ok(())
    }

    /// Serves `GET /health` and `POST /score` over HTTP/1.1, one connection
    /// at a time, until `max_requests` requests were answered (forever when
    /// `None`).
    pub fn serve_http(
        &self,
        listener: TcpListener,
        max_requests: Option<usize>,
    ) -> std::io::Result<()> {
        let mut served = 0;
        for stream in listener.incoming() {
            if let Err(e) = self.answer_http(stream?) {
                eprintln!("stub-scorer: {e}");
            }
            served += 1;
            if max_requests.is_some_and(|m| served >= m) {
                break;
            }
        }
        Ok(())
    }

    fn answer_http(&self, stream: TcpStream) -> std::io::Result<()> {
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut request_line = String::new();
        reader.read_line(&mut request_line)?;
        let mut content_length = 0usize;
        loop {
            let mut header = String::new();
            if reader.read_line(&mut header)? == 0 || header.trim().is_empty() {
                break;
            }
            if let Some((k, v)) = header.split_once(':') {
                if k.trim().eq_ignore_ascii_case("content-length") {
                    content_length = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0u8; content_length];
        reader.read_exact(&mut body)?;
        let mut parts = request_line.split_whitespace();
        let (method, path) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
        let (status, reply) = match (method, path) {
            ("GET", "/health") => ("200 OK", self.respond(r#"{"version":1,"mode":"health"}"#)),
            ("POST", "/score") => {
                let reply = self.respond(&String::from_utf8_lossy(&body));
                let status = if reply.contains("\"error\"") {
                    "400 Bad Request"
                } else {
                    "200 OK"
                };
                (status, reply)
            }
            _ => (
                "404 Not Found",
                serde_json::to_string(&Envelope::new(ErrorResponse {
                    error: format!("no route for {method} {path}"),
                }))
                .expect("serializes"),
            ),
        };
        let mut stream = stream;
        write!(
            stream,
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
            reply.len()
        )?;
        stream.flush()
    }
}
