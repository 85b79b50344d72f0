//! Remote annotation endpoint client.
//!
//! POSTs `{"sentences": [str, ...]}` and expects `{"tagged": [str, ...]}`
//! in input order. The API key comes from the `ANNOTATE_API_KEY`
//! environment variable; the base URL is configuration.

use serde::{Deserialize, Serialize};

use super::{AnnotateError, Annotator};

pub const ANNOTATE_API_KEY_VAR: &str = "ANNOTATE_API_KEY";

#[derive(Serialize)]
struct AnnotateHttpRequest<'a> {
    sentences: &'a [String],
}

#[derive(Deserialize)]
struct AnnotateHttpResponse {
    tagged: Vec<String>,
}

pub struct HttpAnnotator {
    endpoint: String,
    max_retries: u32,
    client: reqwest::blocking::Client,
}

impl HttpAnnotator {
    pub fn new(endpoint: &str, max_retries: u32) -> HttpAnnotator {
        HttpAnnotator {
            endpoint: endpoint.to_string(),
            max_retries: max_retries.max(1),
            client: reqwest::blocking::Client::new(),
        }
    }

    fn request(&self, texts: &[String]) -> Result<Vec<String>, String> {
        let mut req = self
            .client
            .post(&self.endpoint)
            .json(&AnnotateHttpRequest { sentences: texts });
        if let Ok(key) = std::env::var(ANNOTATE_API_KEY_VAR) {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("status {}", resp.status()));
        }
        let body: AnnotateHttpResponse = resp.json().map_err(|e| e.to_string())?;
        Ok(body.tagged)
    }
}

impl Annotator for HttpAnnotator {
    fn id(&self) -> &str {
        "http"
    }

    fn annotate_batch(&self, texts: &[String]) -> Result<Vec<String>, AnnotateError> {
        let mut last = String::new();
        for attempt in 0..self.max_retries {
            match self.request(texts) {
                Ok(tagged) => return Ok(tagged),
                Err(reason) => {
                    log::warn!("annotation request attempt {} failed: {reason}", attempt + 1);
                    last = reason;
                    std::thread::sleep(std::time::Duration::from_millis(100 << attempt));
                }
            }
        }
        Err(AnnotateError::Endpoint { attempts: self.max_retries, reason: last })
    }
}
