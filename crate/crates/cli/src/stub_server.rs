//! Minimal local HTTP server exposing the stub backends.
//!
//! Endpoints:
//!   POST /annotate  {"sentences": [str, ...]} -> {"tagged": [str, ...]}
//!   POST /embed     {"model": str, "input": [str, ...]}
//!                   -> {"data": [{"embedding": [f64, ...]}, ...]}
//!
//! One request per connection, HTTP/1.1 with Content-Length bodies. Enough
//! to stand in for the real endpoints in offline runs and tests.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};

use anyhow::{Context, Result};
use serde_json::{json, Value};

use factlens_core::annotate::stub_annotate;
use factlens_core::matcher::{Embedder, HashEmbedder};

pub fn serve(addr: &str) -> Result<()> {
    let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
    println!("stub server listening on http://{addr}");
    println!("endpoints: POST /annotate, POST /embed");
    for stream in listener.incoming() {
        match stream {
            Ok(stream) => {
                if let Err(err) = handle(stream) {
                    log::warn!("request failed: {err:#}");
                }
            }
            Err(err) => log::warn!("accept failed: {err}"),
        }
    }
    Ok(())
}

fn handle(mut stream: TcpStream) -> Result<()> {
    let (path, body) = read_request(&mut stream)?;
    let response = match path.as_str() {
        "/annotate" => annotate_response(&body),
        "/embed" => embed_response(&body),
        _ => Err(anyhow::anyhow!("no such endpoint: {path}")),
    };
    match response {
        Ok(json) => write_response(&mut stream, 200, "OK", &json.to_string()),
        Err(err) => write_response(
            &mut stream,
            400,
            "Bad Request",
            &json!({ "error": err.to_string() }).to_string(),
        ),
    }
}

fn annotate_response(body: &Value) -> Result<Value> {
    let sentences = body
        .get("sentences")
        .and_then(Value::as_array)
        .context("body must carry a `sentences` array")?;
    let tagged: Vec<String> = sentences
        .iter()
        .map(|s| s.as_str().map(stub_annotate).context("sentences must be strings"))
        .collect::<Result<_>>()?;
    Ok(json!({ "tagged": tagged }))
}

fn embed_response(body: &Value) -> Result<Value> {
    let input = body
        .get("input")
        .and_then(Value::as_array)
        .context("body must carry an `input` array")?;
    let texts: Vec<String> = input
        .iter()
        .map(|s| s.as_str().map(str::to_string).context("input must be strings"))
        .collect::<Result<_>>()?;
    let vectors = HashEmbedder::default().embed_batch(&texts)?;
    let data: Vec<Value> = vectors.into_iter().map(|v| json!({ "embedding": v })).collect();
    Ok(json!({ "data": data }))
}

fn read_request(stream: &mut TcpStream) -> Result<(String, Value)> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 4096];
    let header_end = loop {
        let n = stream.read(&mut chunk).context("reading request")?;
        if n == 0 {
            anyhow::bail!("connection closed mid-request");
        }
        buf.extend_from_slice(&chunk[..n]);
        if let Some(pos) = find_header_end(&buf) {
            break pos;
        }
        if buf.len() > 1 << 20 {
            anyhow::bail!("header too large");
        }
    };
    let header = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let mut lines = header.lines();
    let request_line = lines.next().context("empty request")?;
    let path = request_line.split_whitespace().nth(1).context("malformed request line")?;
    let content_length: usize = lines
        .filter_map(|line| line.split_once(':'))
        .find(|(name, _)| name.eq_ignore_ascii_case("content-length"))
        .and_then(|(_, v)| v.trim().parse().ok())
        .unwrap_or(0);

    let mut body = buf[header_end + 4..].to_vec();
    while body.len() < content_length {
        let n = stream.read(&mut chunk).context("reading body")?;
        if n == 0 {
            anyhow::bail!("connection closed mid-body");
        }
        body.extend_from_slice(&chunk[..n]);
    }
    body.truncate(content_length);
    let value: Value = if body.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&body).context("body is not valid JSON")?
    };
    Ok((path.to_string(), value))
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}

fn write_response(stream: &mut TcpStream, code: u16, reason: &str, body: &str) -> Result<()> {
    let response = format!(
        "HTTP/1.1 {code} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(response.as_bytes()).context("writing response")?;
    Ok(())
}
