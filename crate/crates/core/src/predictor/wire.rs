//! HTTP client for an external model server.
//!
//! Request body: `{preamble, usees, main_code, users, marker_count,
//! max_output_tokens, beam_width, diversity_penalty}`. Response body:
//! `{raw_output, token_count}`.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{parse_raw_output, PredictError, PredictionRequest, PredictionResult, Predictor};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireConfig {
    pub url: String,
    pub timeout: Duration,
    /// Extra attempts after a retriable failure.
    pub retries: usize,
    pub max_in_flight: usize,
    /// First retry delay; doubles on each further attempt.
    pub backoff: Duration,
}

impl WireConfig {
    pub fn new(url: impl Into<String>) -> Self {
        WireConfig {
            url: url.into(),
            timeout: Duration::from_secs(120),
            retries: 2,
            max_in_flight: 4,
            backoff: Duration::from_millis(200),
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    preamble: &'a str,
    usees: &'a str,
    main_code: &'a str,
    users: &'a str,
    marker_count: usize,
    max_output_tokens: usize,
    beam_width: usize,
    diversity_penalty: f64,
}

#[derive(Deserialize)]
struct WireResponse {
    raw_output: String,
    #[serde(default)]
    token_count: Option<usize>,
}

pub struct WirePredictor {
    config: WireConfig,
    client: reqwest::blocking::Client,
    in_flight: Mutex<usize>,
    slot_freed: Condvar,
}

struct Permit<'a>(&'a WirePredictor);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        self.0.slot_freed.notify_one();
    }
}

impl WirePredictor {
    pub fn new(config: WireConfig) -> Result<Self, PredictError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| PredictError::Unreachable(e.to_string()))?;
        Ok(WirePredictor { config, client, in_flight: Mutex::new(0), slot_freed: Condvar::new() })
    }

    pub fn config(&self) -> &WireConfig {
        &self.config
    }

    fn acquire(&self) -> Permit<'_> {
        let limit = self.config.max_in_flight.max(1);
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= limit {
            n = self.slot_freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Permit(self)
    }

    fn attempt(&self, request: &PredictionRequest) -> Result<WireResponse, PredictError> {
        let body = WireRequest {
            preamble: &request.preamble,
            usees: &request.usees,
            main_code: &request.main_code,
            users: &request.users,
            marker_count: request.marker_count,
            max_output_tokens: request.max_output_tokens,
            beam_width: request.decode_params.beam_width,
            diversity_penalty: request.decode_params.diversity_penalty,
        };
        let transport = |e: reqwest::Error| {
            if e.is_timeout() {
                PredictError::Timeout(self.config.timeout)
            } else {
                PredictError::Unreachable(e.to_string())
            }
        };
        let response = self.client.post(&self.config.url).json(&body).send().map_err(transport)?;
        let status = response.status();
        if status.is_server_error() {
            return Err(PredictError::Unreachable(format!("server answered {status}")));
        }
        if !status.is_success() {
            return Err(PredictError::Protocol(format!("server answered {status}")));
        }
        let text = response.text().map_err(transport)?;
        serde_json::from_str(&text).map_err(|e| PredictError::Protocol(format!("malformed response: {e}")))
    }
}

impl Predictor for WirePredictor {
    fn name(&self) -> &str {
        "wire"
    }

    fn predict(&self, request: &PredictionRequest) -> Result<PredictionResult, PredictError> {
        let start = Instant::now();
        if request.marker_count == 0 {
            return Ok(PredictionResult {
                types: Vec::new(),
                raw_output: String::new(),
                latency: start.elapsed(),
                diagnostics: Vec::new(),
                token_count: None,
            });
        }
        let _permit = self.acquire();
        let mut delay = self.config.backoff;
        let mut attempt = 0;
        let response = loop {
            match self.attempt(request) {
                Ok(r) => break r,
                Err(e) if e.is_retriable() && attempt < self.config.retries => {
                    log::warn!("prediction attempt {} failed: {e}; retrying", attempt + 1);
                    thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };
        let (types, diagnostics) = parse_raw_output(&response.raw_output, request.marker_count, request.marker_base);
        Ok(PredictionResult {
            types,
            raw_output: response.raw_output,
            latency: start.elapsed(),
            diagnostics,
            token_count: response.token_count,
        })
    }
}
