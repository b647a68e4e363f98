use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::{Mutex, Semaphore};
use tokio::time::Instant;
use url::Url;

use crate::model::HttpMethod;

use super::request::HttpRequestPlan;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchConfig {
    pub timeout: Duration,
    pub max_redirects: usize,
    pub user_agent: String,
    pub max_parallel: usize,
    /// Minimum spacing between requests to the same host; `None` disables it.
    pub politeness: Option<Duration>,
    /// Hosts never spaced, such as a local fixture server.
    #[serde(default)]
    pub politeness_exempt: Vec<String>,
}

impl Default for FetchConfig {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(10),
            max_redirects: 5,
            user_agent: concat!("searchsvc/", env!("CARGO_PKG_VERSION")).to_string(),
            max_parallel: 4,
            politeness: Some(Duration::from_millis(100)),
            politeness_exempt: Vec::new(),
        }
    }
}

impl FetchConfig {
    /// Defaults without politeness spacing, for local fixture servers.
    pub fn local() -> Self {
        Self {
            politeness: None,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchResponse {
    pub status: u16,
    pub final_url: Url,
    pub body: String,
    pub content_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FetchError {
    #[error("request to {url} timed out")]
    Timeout { url: String },
    #[error("too many redirects from {url}")]
    TooManyRedirects { url: String },
    #[error("request to {url} failed: {message}")]
    Transport { url: String, message: String },
}

/// Source of documents. Implementations never execute scripts.
#[async_trait]
pub trait Fetcher: Send + Sync {
    fn config(&self) -> &FetchConfig;
    async fn fetch(&self, plan: &HttpRequestPlan) -> Result<FetchResponse, FetchError>;
}

/// Fetcher over real HTTP.
pub struct HttpFetcher {
    config: FetchConfig,
    client: reqwest::Client,
    permits: Semaphore,
    last_request: Mutex<HashMap<String, Instant>>,
}

impl HttpFetcher {
    pub fn new(config: FetchConfig) -> Result<Self, FetchError> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .redirect(reqwest::redirect::Policy::limited(config.max_redirects))
            .user_agent(config.user_agent.clone())
            .build()
            .map_err(|e| FetchError::Transport {
                url: String::new(),
                message: e.to_string(),
            })?;
        Ok(Self {
            permits: Semaphore::new(config.max_parallel.max(1)),
            config,
            client,
            last_request: Mutex::new(HashMap::new()),
        })
    }

    pub fn shared(config: FetchConfig) -> Result<Arc<Self>, FetchError> {
        Self::new(config).map(Arc::new)
    }

    async fn wait_turn(&self, url: &Url) {
        let Some(spacing) = self.config.politeness else {
            return;
        };
        let host = url.host_str().unwrap_or_default().to_string();
        if self.config.politeness_exempt.contains(&host) {
            return;
        }
        let slot = {
            let mut last = self.last_request.lock().await;
            let now = Instant::now();
            let slot = match last.get(&host) {
                Some(prev) if *prev + spacing > now => *prev + spacing,
                _ => now,
            };
            last.insert(host, slot);
            slot
        };
        tokio::time::sleep_until(slot).await;
    }
}

#[async_trait]
impl Fetcher for HttpFetcher {
    fn config(&self) -> &FetchConfig {
        &self.config
    }

    async fn fetch(&self, plan: &HttpRequestPlan) -> Result<FetchResponse, FetchError> {
        let url = plan.request_url();
        let _permit = self.permits.acquire().await.expect("semaphore never closed");
        self.wait_turn(&url).await;
        let mut request = match plan.method {
            HttpMethod::Get => self.client.get(url.clone()),
            HttpMethod::Post => self.client.post(url.clone()),
        };
        for (k, v) in &plan.headers {
            request = request.header(k, v);
        }
        if let Some(body) = plan.body() {
            request = request
                .header("content-type", "application/x-www-form-urlencoded")
                .body(body);
        }
        let classify = |e: reqwest::Error| {
            if e.is_timeout() {
                FetchError::Timeout {
                    url: url.to_string(),
                }
            } else if e.is_redirect() {
                FetchError::TooManyRedirects {
                    url: url.to_string(),
                }
            } else {
                FetchError::Transport {
                    url: url.to_string(),
                    message: e.to_string(),
                }
            }
        };
        let response = request.send().await.map_err(classify)?;
        let status = response.status().as_u16();
        let final_url = response.url().clone();
        let content_type = response
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let body = response.text().await.map_err(classify)?;
        Ok(FetchResponse {
            status,
            final_url,
            body,
            content_type,
        })
    }
}
