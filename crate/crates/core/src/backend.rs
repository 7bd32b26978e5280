//! Pluggable rating backends: a remote multimodal-API client and a
//! deterministic mock oracle, plus the batch machinery (bounded concurrency,
//! request-rate limiting, per-item retry with exponential backoff).

use crate::imagery::Panorama;
use crate::prompt::{
    aggregate, format_response, parse_response, render_prompt, CriterionVector, Persona,
    PromptModel,
};
use base64::Engine;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;
use thiserror::Error;

/// Which backend implementation to instantiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Remote,
    Mock,
}

/// Backend configuration. Generation parameters are recorded here so every
/// rating is attributable to an exact configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendConfig {
    #[serde(default = "default_kind")]
    pub kind: BackendKind,
    /// Remote endpoint URL (remote only).
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Environment variable holding the API credential (remote only).
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    /// Provider model identifier (remote only).
    #[serde(default)]
    pub model: Option<String>,
    /// Sampling temperature passed through to the provider (remote only).
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_rpm")]
    pub requests_per_minute: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// Mock determinism seed (mock only).
    #[serde(default)]
    pub seed: u64,
}

fn default_api_key_env() -> String {
    "RATING_API_KEY".to_string()
}

fn default_kind() -> BackendKind {
    BackendKind::Mock
}

fn default_max_in_flight() -> usize {
    4
}

fn default_rpm() -> f64 {
    60.0
}

fn default_max_retries() -> u32 {
    3
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint: None,
            api_key_env: default_api_key_env(),
            model: None,
            temperature: None,
            max_in_flight: 4,
            requests_per_minute: 60.0,
            max_retries: 3,
            seed: 0,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_in_flight < 1 {
            return Err(BackendError::Config("max_in_flight must be >= 1".into()));
        }
        if !(self.requests_per_minute > 0.0) {
            return Err(BackendError::Config("requests_per_minute must be > 0".into()));
        }
        if self.kind == BackendKind::Remote && self.endpoint.is_none() {
            return Err(BackendError::Config("remote backend requires an endpoint".into()));
        }
        Ok(())
    }
}

/// One raw rating from the backend for one (panorama, prompt) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawModelRating {
    pub point_id: String,
    pub prompt: PromptModel,
    pub vector: CriterionVector,
    /// Unweighted mean of `vector`, in [1, 7].
    pub aggregate: f64,
    pub attempt_count: u32,
    pub raw_text: String,
}

#[derive(Debug, Error, Clone)]
pub enum BackendError {
    #[error("retries exhausted after {attempts} attempts; last response: {last_raw:?}")]
    Exhausted { attempts: u32, last_raw: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("backend configuration error: {0}")]
    Config(String),
}

/// Time source; injectable so rate-limiter and backoff arithmetic is testable
/// without wall-clock waits.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

/// Wall-clock time relative to process start.
pub struct SystemClock {
    start: std::time::Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self { start: std::time::Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.start.elapsed()
    }
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Token-bucket request limiter with one-token capacity: successive
/// acquisitions are spaced at least `60 / requests_per_minute` seconds apart,
/// shared across worker threads.
pub struct RateLimiter {
    clock: Arc<dyn Clock>,
    min_spacing: Duration,
    next_free: Mutex<Duration>,
}

impl RateLimiter {
    pub fn new(requests_per_minute: f64, clock: Arc<dyn Clock>) -> Self {
        let min_spacing = Duration::from_secs_f64(60.0 / requests_per_minute);
        Self { clock, min_spacing, next_free: Mutex::new(Duration::ZERO) }
    }

    /// Blocks until a request slot is available.
    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next_free.lock().expect("limiter poisoned");
            let now = self.clock.now();
            let at = (*next).max(now);
            *next = at + self.min_spacing;
            at.saturating_sub(now)
        };
        if !wait.is_zero() {
            self.clock.sleep(wait);
        }
    }
}

/// Turns one (panorama, prompt) pair into a raw rating.
pub trait RatingBackend: Send + Sync {
    fn rate(&self, pan: &Panorama, m: &PromptModel) -> Result<RawModelRating, BackendError>;
}

/// Deterministic offline oracle: a pure function of the panorama pixels, the
/// prompt tier/persona, and the configured seed. Greener panoramas score
/// higher.
pub struct MockBackend {
    pub seed: u64,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Mean over pixels of G/(R+G+B+1), rescaled so a neutral gray image maps
    /// to 0 and a pure-green image maps to ~1.
    pub fn green_fraction(pan: &Panorama) -> f64 {
        let mut sum = 0.0f64;
        let mut count = 0u64;
        for px in pan.image.pixels() {
            let (r, g, b) = (px[0] as f64, px[1] as f64, px[2] as f64);
            sum += g / (r + g + b + 1.0);
            count += 1;
        }
        let raw = sum / count as f64;
        ((raw - 1.0 / 3.0) * 1.5).clamp(0.0, 1.0)
    }
}

impl RatingBackend for MockBackend {
    fn rate(&self, pan: &Panorama, m: &PromptModel) -> Result<RawModelRating, BackendError> {
        let g = Self::green_fraction(pan);
        let persona_offset = match m.persona {
            Persona::LR => 0.0,
            Persona::NR => 1.0,
        };
        let scores: Vec<i32> = (1..=m.criteria_count())
            .map(|k| {
                let wobble = 0.3 * (self.seed as f64 + k as f64 + persona_offset).sin();
                (1.0 + 6.0 * g + wobble).round().clamp(1.0, 7.0) as i32
            })
            .collect();
        let vector = CriterionVector(scores);
        let raw_text = format_response(&vector);
        let aggregate = aggregate(&vector);
        Ok(RawModelRating {
            point_id: pan.point_id.clone(),
            prompt: *m,
            vector,
            aggregate,
            attempt_count: 1,
            raw_text,
        })
    }
}

/// Provider-facing client. All wire-schema specifics live here; the rest of
/// the pipeline sees only the `RatingBackend` contract.
pub struct RemoteBackend {
    endpoint: String,
    api_key: String,
    model: String,
    temperature: Option<f64>,
    max_retries: u32,
    clock: Arc<dyn Clock>,
    backoff_base: Duration,
}

enum AttemptError {
    /// Transport failure, HTTP 429, or HTTP 5xx: retryable.
    Retryable(String),
    /// Authentication failure: fail fast, no retry.
    Auth(String),
}

impl RemoteBackend {
    pub fn from_config(cfg: &BackendConfig, clock: Arc<dyn Clock>) -> Result<Self, BackendError> {
        cfg.validate()?;
        let endpoint = cfg
            .endpoint
            .clone()
            .ok_or_else(|| BackendError::Config("remote backend requires an endpoint".into()))?;
        let api_key = std::env::var(&cfg.api_key_env).map_err(|_| {
            BackendError::Auth(format!("credential env var {} is not set", cfg.api_key_env))
        })?;
        Ok(Self {
            endpoint,
            api_key,
            model: cfg.model.clone().unwrap_or_else(|| "gpt-4".to_string()),
            temperature: cfg.temperature,
            max_retries: cfg.max_retries,
            clock,
            backoff_base: Duration::from_secs(1),
        })
    }

    #[cfg(test)]
    fn with_fast_backoff(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    fn attempt(&self, pan: &Panorama, m: &PromptModel) -> Result<String, AttemptError> {
        let mut png = Vec::new();
        image::DynamicImage::ImageRgb8(pan.image.clone())
            .write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
            .map_err(|e| AttemptError::Retryable(format!("png encode: {e}")))?;
        let data_url = format!(
            "data:image/png;base64,{}",
            base64::engine::general_purpose::STANDARD.encode(&png)
        );
        let mut body = serde_json::json!({
            "model": self.model,
            "messages": [{
                "role": "user",
                "content": [
                    {"type": "text", "text": render_prompt(m)},
                    {"type": "image_url", "image_url": {"url": data_url}},
                ],
            }],
        });
        if let Some(t) = self.temperature {
            body["temperature"] = serde_json::json!(t);
        }
        let resp = ureq::post(&self.endpoint)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body);
        match resp {
            Ok(resp) => {
                let json: serde_json::Value = resp
                    .into_json()
                    .map_err(|e| AttemptError::Retryable(format!("response read: {e}")))?;
                let content = json["choices"][0]["message"]["content"]
                    .as_str()
                    .ok_or_else(|| AttemptError::Retryable(format!("unexpected response shape: {json}")))?;
                Ok(content.to_string())
            }
            Err(ureq::Error::Status(code, resp)) => {
                let body = resp.into_string().unwrap_or_default();
                if code == 401 || code == 403 {
                    Err(AttemptError::Auth(format!("HTTP {code}: {body}")))
                } else if code == 429 || code >= 500 {
                    Err(AttemptError::Retryable(format!("HTTP {code}: {body}")))
                } else {
                    // Other client errors will not improve on retry either,
                    // but they carry no credential signal; surface as
                    // retryable so the exhaustion error keeps the body.
                    Err(AttemptError::Retryable(format!("HTTP {code}: {body}")))
                }
            }
            Err(e) => Err(AttemptError::Retryable(format!("transport: {e}"))),
        }
    }
}

impl RatingBackend for RemoteBackend {
    fn rate(&self, pan: &Panorama, m: &PromptModel) -> Result<RawModelRating, BackendError> {
        let expected = m.criteria_count();
        let mut last_raw;
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            match self.attempt(pan, m) {
                Ok(raw) => {
                    last_raw = raw.clone();
                    match parse_response(&raw, expected) {
                        Ok(vector) => {
                            let aggregate = aggregate(&vector);
                            return Ok(RawModelRating {
                                point_id: pan.point_id.clone(),
                                prompt: *m,
                                vector,
                                aggregate,
                                attempt_count: attempts,
                                raw_text: raw,
                            });
                        }
                        // A well-formed HTTP response whose body fails strict
                        // parsing is retryable; keep the raw text for the
                        // exhaustion error.
                        Err(_) => {}
                    }
                }
                Err(AttemptError::Auth(msg)) => return Err(BackendError::Auth(msg)),
                Err(AttemptError::Retryable(msg)) => last_raw = msg,
            }
            if attempts > self.max_retries {
                return Err(BackendError::Exhausted { attempts, last_raw });
            }
            // exponential backoff: base 1 s, factor 2, plus jitter
            let backoff = self.backoff_base.mul_f64(2f64.powi(attempts as i32 - 1));
            let jitter = backoff.mul_f64(rand::random::<f64>() * 0.25);
            self.clock.sleep(backoff + jitter);
        }
    }
}

/// One item of a batch result: either the rating or the per-item failure.
#[derive(Debug, Clone)]
pub struct BatchItem {
    pub point_id: String,
    pub prompt: PromptModel,
    pub result: Result<RawModelRating, BackendError>,
    pub elapsed_ms: u64,
}

/// Rates the cross product of panoramas and prompt models.
///
/// At most `max_in_flight` requests run concurrently; dispatches are spaced
/// by the shared rate limiter. Output order is (point_id, tier, persona),
/// independent of completion order. Per-item failures are recorded, never
/// aborting the batch.
pub fn batch_rate(
    backend: &dyn RatingBackend,
    pans: &[Panorama],
    models: &[PromptModel],
    max_in_flight: usize,
    limiter: &RateLimiter,
    clock: &dyn Clock,
) -> Vec<BatchItem> {
    let work: Vec<(usize, usize)> = (0..pans.len())
        .flat_map(|p| (0..models.len()).map(move |m| (p, m)))
        .collect();
    let results: Vec<Mutex<Option<BatchItem>>> = work.iter().map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..max_in_flight.max(1) {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::SeqCst);
                if i >= work.len() {
                    break;
                }
                let (pi, mi) = work[i];
                limiter.acquire();
                let started = clock.now();
                let result = backend.rate(&pans[pi], &models[mi]);
                let elapsed_ms = clock.now().saturating_sub(started).as_millis() as u64;
                *results[i].lock().expect("result slot poisoned") = Some(BatchItem {
                    point_id: pans[pi].point_id.clone(),
                    prompt: models[mi],
                    result,
                    elapsed_ms,
                });
            });
        }
    });

    let mut items: Vec<BatchItem> = results
        .into_iter()
        .map(|m| m.into_inner().expect("slot poisoned").expect("slot filled"))
        .collect();
    items.sort_by(|a, b| {
        (&a.point_id, a.prompt.tier, a.prompt.persona).cmp(&(&b.point_id, b.prompt.tier, b.prompt.persona))
    });
    items
}

/// Builds the configured backend. Remote construction reads the credential
/// from the configured environment variable and fails fast when it is absent.
pub fn make_backend(cfg: &BackendConfig, clock: Arc<dyn Clock>) -> Result<Box<dyn RatingBackend>, BackendError> {
    cfg.validate()?;
    match cfg.kind {
        BackendKind::Mock => Ok(Box::new(MockBackend::new(cfg.seed))),
        BackendKind::Remote => Ok(Box::new(RemoteBackend::from_config(cfg, clock)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagery::{compose_panorama, HEADINGS, TILE_SIZE};
    use crate::prompt::PromptTier;
    use image::{Rgb, RgbImage};
    use std::collections::BTreeMap;

    fn uniform_panorama(id: &str, color: [u8; 3]) -> Panorama {
        let tiles: BTreeMap<u16, RgbImage> = HEADINGS
            .iter()
            .map(|&h| (h, RgbImage::from_pixel(TILE_SIZE, TILE_SIZE, Rgb(color))))
            .collect();
        compose_panorama(id, &tiles).unwrap()
    }

    /// Virtual clock: `sleep` advances time instantly.
    #[derive(Default)]
    struct FakeClock {
        now: Mutex<Duration>,
    }

    impl Clock for FakeClock {
        fn now(&self) -> Duration {
            *self.now.lock().unwrap()
        }
        fn sleep(&self, d: Duration) {
            *self.now.lock().unwrap() += d;
        }
    }

    #[test]
    fn mock_all_green_rates_sevens() {
        let pan = uniform_panorama("g", [0, 255, 0]);
        for m in PromptModel::all() {
            let r = MockBackend::new(42).rate(&pan, &m).unwrap();
            assert!(r.vector.scores().iter().all(|&s| s == 7), "{m:?}: {:?}", r.vector);
            assert_eq!(r.aggregate, 7.0);
        }
    }

    #[test]
    fn mock_all_gray_rates_ones() {
        let pan = uniform_panorama("gray", [128, 128, 128]);
        for m in PromptModel::all() {
            let r = MockBackend::new(42).rate(&pan, &m).unwrap();
            assert!(r.vector.scores().iter().all(|&s| s == 1), "{m:?}: {:?}", r.vector);
        }
    }

    #[test]
    fn mock_is_deterministic() {
        let pan = uniform_panorama("x", [40, 150, 60]);
        let m = PromptModel::new(PromptTier::Model2, Persona::NR);
        let a = MockBackend::new(7).rate(&pan, &m).unwrap();
        let b = MockBackend::new(7).rate(&pan, &m).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mock_aggregate_is_mean_of_vector() {
        let pan = uniform_panorama("x", [90, 170, 40]);
        let m = PromptModel::new(PromptTier::Model3, Persona::LR);
        let r = MockBackend::new(3).rate(&pan, &m).unwrap();
        let mean = r.vector.scores().iter().map(|&s| s as f64).sum::<f64>() / 14.0;
        assert!((r.aggregate - mean).abs() < 1e-12);
    }

    #[test]
    fn rate_limiter_spacing_arithmetic() {
        // 120 acquisitions at 60 requests/minute: the last one is scheduled
        // 119 s after the first.
        let clock = Arc::new(FakeClock::default());
        let limiter = RateLimiter::new(60.0, clock.clone());
        for _ in 0..120 {
            limiter.acquire();
        }
        let elapsed = clock.now();
        assert!(elapsed >= Duration::from_secs_f64(119.0), "elapsed {elapsed:?}");
        assert!(elapsed < Duration::from_secs_f64(120.0), "elapsed {elapsed:?}");
    }

    #[test]
    fn batch_rates_cross_product_sorted() {
        let pans = vec![
            uniform_panorama("c", [0, 200, 0]),
            uniform_panorama("a", [100, 100, 100]),
            uniform_panorama("b", [0, 255, 0]),
        ];
        let models = PromptModel::all();
        let clock = Arc::new(FakeClock::default());
        let limiter = RateLimiter::new(1e9, clock.clone());
        let backend = MockBackend::new(1);
        let items = batch_rate(&backend, &pans, &models, 3, &limiter, clock.as_ref());
        assert_eq!(items.len(), 18);
        let keys: Vec<_> = items
            .iter()
            .map(|i| (i.point_id.clone(), i.prompt.tier, i.prompt.persona))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(items.iter().all(|i| i.result.is_ok()));
    }

    #[test]
    fn batch_ordering_independent_of_concurrency() {
        let pans: Vec<Panorama> = (0..5)
            .map(|i| uniform_panorama(&format!("p{i}"), [10 * i as u8, 200, 30]))
            .collect();
        let models = PromptModel::all();
        let backend = MockBackend::new(9);
        let run = |workers: usize| {
            let clock = Arc::new(FakeClock::default());
            let limiter = RateLimiter::new(1e9, clock.clone());
            batch_rate(&backend, &pans, &models, workers, &limiter, clock.as_ref())
        };
        let serial = run(1);
        let parallel = run(8);
        let key = |items: &[BatchItem]| -> Vec<(String, PromptModel, String)> {
            items
                .iter()
                .map(|i| (i.point_id.clone(), i.prompt, i.result.as_ref().unwrap().raw_text.clone()))
                .collect()
        };
        assert_eq!(key(&serial), key(&parallel));
    }

    /// Minimal scripted HTTP server for exercising the remote client.
    fn scripted_server(responses: Vec<String>) -> (String, std::thread::JoinHandle<usize>) {
        use std::io::{Read, Write};
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut served = 0usize;
            for resp in responses {
                let (mut stream, _) = listener.accept().unwrap();
                // drain the request headers + body (best effort)
                let mut buf = [0u8; 65536];
                let _ = stream.read(&mut buf);
                stream.write_all(resp.as_bytes()).unwrap();
                served += 1;
            }
            served
        });
        (format!("http://{addr}/v1/chat/completions"), handle)
    }

    fn http_json(status: u16, reason: &str, body: &str) -> String {
        format!(
            "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
    }

    fn chat_body(content: &str) -> String {
        serde_json::json!({"choices": [{"message": {"content": content}}]}).to_string()
    }

    fn tiny_panorama(id: &str) -> Panorama {
        // Full-size panoramas make each HTTP request megabytes; the remote
        // client does not validate dimensions, so tests use a small raster.
        Panorama {
            point_id: id.into(),
            image: RgbImage::from_pixel(6, 1, Rgb([0, 200, 0])),
        }
    }

    fn remote_for(endpoint: &str, max_retries: u32) -> RemoteBackend {
        std::env::set_var("RATING_API_KEY_TEST", "test-key");
        let cfg = BackendConfig {
            kind: BackendKind::Remote,
            endpoint: Some(endpoint.to_string()),
            api_key_env: "RATING_API_KEY_TEST".to_string(),
            max_retries,
            ..BackendConfig::default()
        };
        RemoteBackend::from_config(&cfg, Arc::new(FakeClock::default()))
            .unwrap()
            .with_fast_backoff(Duration::from_millis(1))
    }

    #[test]
    fn remote_parses_successful_response() {
        let (url, h) = scripted_server(vec![http_json(200, "OK", &chat_body("5"))]);
        let backend = remote_for(&url, 0);
        let m = PromptModel::new(PromptTier::Model1, Persona::LR);
        let r = backend.rate(&tiny_panorama("p1"), &m).unwrap();
        assert_eq!(r.vector, CriterionVector(vec![5]));
        assert_eq!(r.attempt_count, 1);
        assert_eq!(h.join().unwrap(), 1);
    }

    #[test]
    fn remote_retries_on_429_then_succeeds() {
        let (url, h) = scripted_server(vec![
            http_json(429, "Too Many Requests", "{}"),
            http_json(200, "OK", &chat_body("[4, 5, 3, 6, 5]")),
        ]);
        let backend = remote_for(&url, 2);
        let m = PromptModel::new(PromptTier::Model2, Persona::NR);
        let r = backend.rate(&tiny_panorama("p1"), &m).unwrap();
        assert_eq!(r.attempt_count, 2);
        assert_eq!(r.aggregate, 4.6);
        h.join().unwrap();
    }

    #[test]
    fn remote_retries_on_unparseable_body() {
        let (url, h) = scripted_server(vec![
            http_json(200, "OK", &chat_body("I think it deserves a 5")),
            http_json(200, "OK", &chat_body("5")),
        ]);
        let backend = remote_for(&url, 1);
        let m = PromptModel::new(PromptTier::Model1, Persona::LR);
        let r = backend.rate(&tiny_panorama("p1"), &m).unwrap();
        assert_eq!(r.attempt_count, 2);
        h.join().unwrap();
    }

    #[test]
    fn remote_exhaustion_carries_last_raw_text() {
        let (url, h) = scripted_server(vec![
            http_json(200, "OK", &chat_body("no rating today")),
            http_json(200, "OK", &chat_body("still no rating")),
        ]);
        let backend = remote_for(&url, 1);
        let m = PromptModel::new(PromptTier::Model1, Persona::LR);
        match backend.rate(&tiny_panorama("p1"), &m) {
            Err(BackendError::Exhausted { attempts, last_raw }) => {
                assert_eq!(attempts, 2);
                assert_eq!(last_raw, "still no rating");
            }
            other => panic!("unexpected {other:?}"),
        }
        h.join().unwrap();
    }

    #[test]
    fn remote_auth_failure_fails_fast() {
        let (url, h) = scripted_server(vec![http_json(401, "Unauthorized", "{}")]);
        let backend = remote_for(&url, 5);
        let m = PromptModel::new(PromptTier::Model1, Persona::LR);
        assert!(matches!(
            backend.rate(&tiny_panorama("p1"), &m),
            Err(BackendError::Auth(_))
        ));
        assert_eq!(h.join().unwrap(), 1); // exactly one request, no retry
    }

    #[test]
    fn batch_isolates_failing_items() {
        struct Flaky;
        impl RatingBackend for Flaky {
            fn rate(&self, pan: &Panorama, m: &PromptModel) -> Result<RawModelRating, BackendError> {
                if pan.point_id == "bad" {
                    return Err(BackendError::Exhausted { attempts: 4, last_raw: "nope".into() });
                }
                MockBackend::new(0).rate(pan, m)
            }
        }
        let pans = vec![
            uniform_panorama("bad", [1, 2, 3]),
            uniform_panorama("ok1", [0, 255, 0]),
            uniform_panorama("ok2", [0, 255, 0]),
        ];
        let models = PromptModel::all();
        let clock = Arc::new(FakeClock::default());
        let limiter = RateLimiter::new(1e9, clock.clone());
        let items = batch_rate(&Flaky, &pans, &models, 2, &limiter, clock.as_ref());
        assert_eq!(items.len(), 18);
        let failures = items.iter().filter(|i| i.result.is_err()).count();
        assert_eq!(failures, 6); // the six prompts for the bad panorama
        assert!(items
            .iter()
            .filter(|i| i.result.is_err())
            .all(|i| i.point_id == "bad"));
    }

    #[test]
    fn config_validation() {
        let mut cfg = BackendConfig::default();
        cfg.max_in_flight = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = BackendConfig::default();
        cfg.requests_per_minute = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = BackendConfig::default();
        cfg.kind = BackendKind::Remote;
        cfg.endpoint = None;
        assert!(cfg.validate().is_err());
    }
}
