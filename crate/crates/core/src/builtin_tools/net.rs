//! HTTP access for the search tools, with a fixture mode that replays
//! recorded exchanges so tests never open a socket.
//!
//! Fixtures live at `<root>/<tool_name>/<sha256(query) hex>.json`:
//!
//! ```json
//! {"tool": "...", "query": "...",
//!  "exchanges": [{"url": "...", "status": 200, "body": "..."},
//!                {"url": "...", "error": "connection refused"}]}
//! ```
//!
//! URLs are stored with credential parameters (`key`, `api_key`) removed.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use url::Url;

use crate::toolbox::ToolError;

const CREDENTIAL_PARAMS: &[&str] = &["key", "api_key", "cx"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// A GET-only transport. `tool` and `query` identify the fixture file in
/// replay mode; live transports ignore them.
pub trait Transport: Send + Sync {
    fn get(&self, tool: &str, query: &str, url: &Url) -> Result<HttpResponse, ToolError>;

    /// True when responses come from recordings, so credentials are not
    /// needed to build a request.
    fn replays(&self) -> bool {
        false
    }
}

/// Returns `url` without credential query parameters.
pub fn redact(url: &Url) -> String {
    let pairs: Vec<(String, String)> = url
        .query_pairs()
        .filter(|(k, _)| !CREDENTIAL_PARAMS.contains(&k.as_ref()))
        .map(|(k, v)| (k.into_owned(), v.into_owned()))
        .collect();
    let mut clean = url.clone();
    if pairs.is_empty() {
        clean.set_query(None);
    } else {
        clean.query_pairs_mut().clear().extend_pairs(pairs);
    }
    clean.to_string()
}

/// Whether a recorded URL names the same request as `url`: same origin and
/// path, same decoded query pairs in any order, credentials ignored.
pub fn same_request(recorded: &str, url: &Url) -> bool {
    fn key(url: &Url) -> (String, String, Vec<(String, String)>) {
        let mut pairs: Vec<(String, String)> = url
            .query_pairs()
            .filter(|(k, _)| !CREDENTIAL_PARAMS.contains(&k.as_ref()))
            .map(|(k, v)| (k.into_owned(), v.into_owned()))
            .collect();
        pairs.sort();
        (
            url.origin().ascii_serialization(),
            url.path().to_string(),
            pairs,
        )
    }
    Url::parse(recorded).is_ok_and(|r| key(&r) == key(url))
}

pub fn fixture_path(root: &Path, tool: &str, query: &str) -> PathBuf {
    let digest = hex::encode(Sha256::digest(query.as_bytes()));
    root.join(tool).join(format!("{digest}.json"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub tool: String,
    pub query: String,
    pub exchanges: Vec<Exchange>,
}

impl Fixture {
    pub fn load(path: &Path) -> Result<Self, ToolError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ToolError::Network(format!("no recorded fixture at {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| ToolError::Network(format!("malformed fixture {}: {e}", path.display())))
    }
}

/// Live HTTP over a blocking client.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self, ToolError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("toolcards/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| ToolError::Network(e.to_string()))?;
        Ok(Self { client })
    }
}

impl Transport for HttpTransport {
    fn get(&self, _tool: &str, _query: &str, url: &Url) -> Result<HttpResponse, ToolError> {
        let response = self
            .client
            .get(url.clone())
            .send()
            .map_err(|e| ToolError::Network(format!("{}: {e}", redact(url))))?;
        let status = response.status().as_u16();
        let body = response
            .text()
            .map_err(|e| ToolError::Network(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

/// Serves recorded exchanges byte-for-byte.
pub struct FixtureTransport {
    root: PathBuf,
}

impl FixtureTransport {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
}

impl Transport for FixtureTransport {
    fn get(&self, tool: &str, query: &str, url: &Url) -> Result<HttpResponse, ToolError> {
        let fixture = Fixture::load(&fixture_path(&self.root, tool, query))?;
        let wanted = redact(url);
        let exchange = fixture
            .exchanges
            .iter()
            .find(|e| same_request(&e.url, url))
            .ok_or_else(|| {
                ToolError::Network(format!(
                    "fixture for `{query}` has no exchange for {wanted}"
                ))
            })?;
        if let Some(error) = &exchange.error {
            return Err(ToolError::Network(error.clone()));
        }
        Ok(HttpResponse {
            status: exchange.status.unwrap_or(200),
            body: exchange.body.clone().unwrap_or_default(),
        })
    }

    fn replays(&self) -> bool {
        true
    }
}

/// Forwards to a live transport and appends every exchange to the fixture
/// tree, so a live run can be replayed later.
pub struct RecordingTransport<T> {
    inner: T,
    root: PathBuf,
    lock: Mutex<()>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T, root: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            root: root.into(),
            lock: Mutex::new(()),
        }
    }

    fn record(&self, tool: &str, query: &str, exchange: Exchange) -> Result<(), ToolError> {
        let _guard = self.lock.lock().expect("recording lock");
        let path = fixture_path(&self.root, tool, query);
        let mut fixture = Fixture::load(&path).unwrap_or_else(|_| Fixture {
            tool: tool.to_string(),
            query: query.to_string(),
            exchanges: Vec::new(),
        });
        fixture.exchanges.retain(|e| e.url != exchange.url);
        fixture.exchanges.push(exchange);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let text = serde_json::to_string_pretty(&fixture).expect("fixture serializes");
        std::fs::write(&path, text + "\n")?;
        Ok(())
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn get(&self, tool: &str, query: &str, url: &Url) -> Result<HttpResponse, ToolError> {
        let result = self.inner.get(tool, query, url);
        let exchange = match &result {
            Ok(r) => Exchange {
                url: redact(url),
                status: Some(r.status),
                body: Some(r.body.clone()),
                error: None,
            },
            Err(e) => Exchange {
                url: redact(url),
                status: None,
                body: None,
                error: Some(e.to_string()),
            },
        };
        self.record(tool, query, exchange)?;
        result
    }
}

/// Turns non-2xx responses into [`ToolError::HttpStatus`].
pub(crate) fn check_status(response: HttpResponse) -> Result<String, ToolError> {
    if (200..300).contains(&response.status) {
        Ok(response.body)
    } else {
        let mut message: String = response.body.chars().take(200).collect();
        if message.trim().is_empty() {
            message = "request failed".into();
        }
        Err(ToolError::HttpStatus {
            code: response.status,
            message,
        })
    }
}

pub(crate) fn parse_url(raw: &str) -> Result<Url, ToolError> {
    let url = Url::parse(raw).map_err(|e| ToolError::InvalidArgument {
        name: "url".into(),
        reason: format!("`{raw}` is not a valid URL: {e}"),
    })?;
    if !matches!(url.scheme(), "http" | "https") {
        return Err(ToolError::InvalidArgument {
            name: "url".into(),
            reason: format!("unsupported scheme `{}`", url.scheme()),
        });
    }
    Ok(url)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn redaction_drops_credentials_only() {
        let url = Url::parse("https://x.test/v1?q=a+b&key=SECRET&cx=1").unwrap();
        assert_eq!(redact(&url), "https://x.test/v1?q=a+b");
        let bare = Url::parse("https://x.test/v1?key=SECRET").unwrap();
        assert_eq!(redact(&bare), "https://x.test/v1");
    }

    #[test]
    fn recorded_urls_match_regardless_of_encoding_and_order() {
        let url = Url::parse_with_params(
            "https://x.test/v1",
            [("q", "a b~*"), ("num", "10"), ("key", "k")],
        )
        .unwrap();
        assert!(same_request("https://x.test/v1?num=10&q=a%20b%7E%2A", &url));
        assert!(!same_request("https://x.test/v1?num=5&q=a%20b%7E%2A", &url));
        assert!(!same_request(
            "https://y.test/v1?num=10&q=a%20b%7E%2A",
            &url
        ));
        assert!(!same_request("not a url", &url));
    }

    #[test]
    fn fixture_path_hashes_the_query() {
        let p = fixture_path(Path::new("/f"), "Tool", "abc");
        // sha256("abc")
        assert_eq!(
            p,
            Path::new(
                "/f/Tool/ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad.json"
            )
        );
    }

    #[test]
    fn record_then_replay() {
        struct Canned;
        impl Transport for Canned {
            fn get(&self, _: &str, _: &str, url: &Url) -> Result<HttpResponse, ToolError> {
                Ok(HttpResponse {
                    status: 200,
                    body: format!("body of {}", url.path()),
                })
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let url = Url::parse("https://x.test/page?key=s").unwrap();
        let recorder = RecordingTransport::new(Canned, dir.path());
        let live = recorder.get("T", "q", &url).unwrap();
        let replayed = FixtureTransport::new(dir.path())
            .get("T", "q", &url)
            .unwrap();
        assert_eq!(live, replayed);
        let text = std::fs::read_to_string(fixture_path(dir.path(), "T", "q")).unwrap();
        assert!(!text.contains("key=s"));
    }

    #[test]
    fn missing_fixture_is_a_network_error() {
        let dir = tempfile::tempdir().unwrap();
        let url = Url::parse("https://x.test/").unwrap();
        let err = FixtureTransport::new(dir.path())
            .get("T", "q", &url)
            .unwrap_err();
        assert!(matches!(err, ToolError::Network(_)));
    }
}
