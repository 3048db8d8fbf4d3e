//! HTTP expander client and transcript replay.
//!
//! One POST per query with a JSON body
//! `{"query", "min", "max", "max_words"}` (plus `"prompt"` when a template
//! is configured); the reply is `{"phrases": [...]}`. Retries resend the
//! identical body.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ExpansionError, ExpansionRequest, Expander, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WireRequest {
    pub query: String,
    pub min: usize,
    pub max: usize,
    pub max_words: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

impl WireRequest {
    pub fn new(req: &ExpansionRequest, prompt: Option<&str>) -> Self {
        Self {
            query: req.query_text.clone(),
            min: req.min_phrases,
            max: req.max_phrases,
            max_words: req.max_words,
            prompt: prompt.map(str::to_string),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireResponse {
    pub phrases: Vec<String>,
}

/// One logged exchange: the request as sent and the reply body verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub expander: String,
    pub request: WireRequest,
    pub response: String,
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub url: String,
    pub timeout: Duration,
    /// Extra attempts after the first failure.
    pub retries: u32,
    pub prompt_template: Option<String>,
    /// JSON-lines file every successful exchange is appended to.
    pub transcript: Option<PathBuf>,
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self { url: url.into(), timeout: Duration::from_secs(60), retries: 2, prompt_template: None, transcript: None }
    }
}

pub struct RemoteExpander {
    config: RemoteConfig,
    agent: ureq::Agent,
    transcript: Option<Mutex<File>>,
}

impl RemoteExpander {
    pub fn new(config: RemoteConfig) -> Result<Self> {
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        let transcript = match &config.transcript {
            Some(path) => Some(Mutex::new(OpenOptions::new().create(true).append(true).open(path)?)),
            None => None,
        };
        Ok(Self { config, agent, transcript })
    }

    fn send(&self, body: &WireRequest) -> std::result::Result<String, String> {
        let mut last = String::new();
        for _ in 0..=self.config.retries {
            match self.agent.post(&self.config.url).send_json(body) {
                Ok(resp) => match resp.into_string() {
                    Ok(text) => return Ok(text),
                    Err(e) => last = e.to_string(),
                },
                Err(e) => last = e.to_string(),
            }
        }
        Err(last)
    }

    fn log(&self, entry: &TranscriptEntry) -> Result<()> {
        if let Some(file) = &self.transcript {
            let mut line = serde_json::to_string(entry).expect("transcript entries serialize");
            line.push('\n');
            file.lock().expect("transcript lock poisoned").write_all(line.as_bytes())?;
        }
        Ok(())
    }
}

impl Expander for RemoteExpander {
    fn id(&self) -> String {
        format!("remote:{}", self.config.url)
    }

    fn raw_phrases(&self, req: &ExpansionRequest) -> Result<Vec<String>> {
        let request = WireRequest::new(req, self.config.prompt_template.as_deref());
        let response = self.send(&request).map_err(ExpansionError::ExpanderUnavailable)?;
        let parsed: WireResponse = serde_json::from_str(&response)
            .map_err(|e| ExpansionError::ExpanderUnavailable(format!("bad response body: {e}")))?;
        self.log(&TranscriptEntry { expander: self.id(), request, response })?;
        Ok(parsed.phrases)
    }
}

/// Answers from a recorded transcript instead of the network.
#[derive(Debug, Clone)]
pub struct ReplayExpander {
    id: String,
    prompt_template: Option<String>,
    responses: HashMap<WireRequest, Vec<String>>,
}

impl ReplayExpander {
    pub fn from_entries(entries: impl IntoIterator<Item = TranscriptEntry>, prompt_template: Option<String>) -> Result<Self> {
        let mut id = None;
        let mut responses = HashMap::new();
        for e in entries {
            let parsed: WireResponse = serde_json::from_str(&e.response)
                .map_err(|err| ExpansionError::Fixture(format!("transcript response: {err}")))?;
            id.get_or_insert(e.expander);
            responses.insert(e.request, parsed.phrases);
        }
        Ok(Self { id: id.unwrap_or_else(|| "replay".into()), prompt_template, responses })
    }

    pub fn load(path: &Path, prompt_template: Option<String>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let entries = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| ExpansionError::Fixture(format!("transcript line: {e}"))))
            .collect::<Result<Vec<TranscriptEntry>>>()?;
        Self::from_entries(entries, prompt_template)
    }
}

impl Expander for ReplayExpander {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn raw_phrases(&self, req: &ExpansionRequest) -> Result<Vec<String>> {
        let key = WireRequest::new(req, self.prompt_template.as_deref());
        self.responses
            .get(&key)
            .cloned()
            .ok_or_else(|| ExpansionError::ExpanderUnavailable(format!("no recorded response for {:?}", req.query_text)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::expand;
    use std::io::{BufRead, BufReader, Read};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;
    use std::thread;

    /// Serves `replies` in order, one connection each, recording request bodies.
    fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/expand", listener.local_addr().unwrap());
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let hits = Arc::new(AtomicUsize::new(0));
        let (b, h) = (bodies.clone(), hits.clone());
        thread::spawn(move || {
            for (status, reply) in replies {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                b.lock().unwrap().push(String::from_utf8(body).unwrap());
                h.fetch_add(1, Ordering::SeqCst);
                let mut stream = stream;
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                    reply.len()
                )
                .unwrap();
            }
        });
        (url, bodies, hits)
    }

    #[test]
    fn round_trip_retry_and_replay() {
        let reply = r#"{"phrases": ["Glioma", "vegf signalling"]}"#.to_string();
        let (url, bodies, hits) = serve(vec![(503, "{}".into()), (200, reply.clone())]);
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("transcript.jsonl");
        let mut cfg = RemoteConfig::new(&url);
        cfg.timeout = Duration::from_secs(5);
        cfg.transcript = Some(log.clone());
        let remote = RemoteExpander::new(cfg).unwrap();
        let req = ExpansionRequest::new("glioma vegf");
        let live = expand(&req, &remote).unwrap();
        assert_eq!(live.texts().collect::<Vec<_>>(), vec!["glioma", "vegf signalling"]);
        assert_eq!(hits.load(Ordering::SeqCst), 2);

        let sent = bodies.lock().unwrap().clone();
        assert_eq!(sent[0], sent[1]);
        let v: serde_json::Value = serde_json::from_str(&sent[0]).unwrap();
        assert_eq!(v, serde_json::json!({"query": "glioma vegf", "min": 20, "max": 60, "max_words": 4}));

        let replay = ReplayExpander::load(&log, None).unwrap();
        assert_eq!(expand(&req, &replay).unwrap(), live);
        let entry: TranscriptEntry = serde_json::from_str(fs::read_to_string(&log).unwrap().trim()).unwrap();
        assert_eq!(entry.response, reply);
        assert!(matches!(
            expand(&ExpansionRequest::new("other"), &replay),
            Err(ExpansionError::ExpanderUnavailable(_))
        ));
    }

    #[test]
    fn unreachable_server_is_unavailable() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/", listener.local_addr().unwrap());
        drop(listener);
        let mut cfg = RemoteConfig::new(url);
        cfg.retries = 1;
        cfg.timeout = Duration::from_millis(500);
        let remote = RemoteExpander::new(cfg).unwrap();
        assert!(matches!(
            remote.raw_phrases(&ExpansionRequest::new("q")),
            Err(ExpansionError::ExpanderUnavailable(_))
        ));
    }

    #[test]
    fn prompt_field_only_when_configured() {
        let req = ExpansionRequest::new("q");
        let plain = serde_json::to_value(WireRequest::new(&req, None)).unwrap();
        assert!(plain.get("prompt").is_none());
        let with = serde_json::to_value(WireRequest::new(&req, Some("T"))).unwrap();
        assert_eq!(with["prompt"], "T");
    }
}
