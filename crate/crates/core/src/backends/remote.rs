//! OpenAI-compatible chat-completions client with SSE streaming.

use std::io::{BufRead, BufReader};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{parse_model_output, BackendError, FinishReason, GenerationOutput, GeneratorConfig, TextGenerator};
use crate::prompting::PromptBundle;

const TRANSPORT_RETRIES: u32 = 2;
const BACKOFF_MS: u64 = 200;

pub struct RemoteChatGenerator {
    config: GeneratorConfig,
}

impl RemoteChatGenerator {
    pub fn new(config: GeneratorConfig) -> Self {
        Self { config }
    }

    fn url(&self) -> String {
        let base = self
            .config
            .endpoint
            .as_deref()
            .unwrap_or_default()
            .trim_end_matches('/');
        format!("{base}/chat/completions")
    }

    fn body(&self, prompt: &PromptBundle) -> Value {
        json!({
            "model": self.config.model_name.as_deref().unwrap_or_default(),
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
            "temperature": self.config.temperature,
            "stream": true,
        })
    }

    fn api_key(&self) -> Option<String> {
        self.config
            .api_key_env
            .as_deref()
            .and_then(|name| std::env::var(name).ok())
            .filter(|k| !k.is_empty())
    }

    fn attempt(
        &self,
        prompt: &PromptBundle,
        timeout: Duration,
        sink: &mut dyn FnMut(&str),
    ) -> Result<(String, FinishReason), BackendError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut req = agent.post(&self.url()).header("Accept", "text/event-stream");
        if let Some(key) = self.api_key() {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(self.body(prompt)).map_err(map_transport)?;
        let status = resp.status().as_u16();
        if status == 401 || status == 403 {
            return Err(BackendError::Auth(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            let snippet: String = text.chars().take(200).collect();
            return Err(BackendError::Protocol(format!("HTTP {status}: {snippet}")));
        }
        let is_sse = resp
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .is_some_and(|v| v.starts_with("text/event-stream"));
        if is_sse {
            read_sse(BufReader::new(resp.body_mut().as_reader()), sink)
        } else {
            let v: Value = resp
                .body_mut()
                .read_json()
                .map_err(|e| BackendError::Protocol(format!("bad JSON body: {e}")))?;
            let choice = &v["choices"][0];
            let text = choice["message"]["content"]
                .as_str()
                .ok_or_else(|| BackendError::Protocol("response has no message content".into()))?
                .to_string();
            sink(&text);
            Ok((text, finish(choice["finish_reason"].as_str())))
        }
    }
}

fn finish(reason: Option<&str>) -> FinishReason {
    match reason {
        Some("length") => FinishReason::Truncated,
        _ => FinishReason::Complete,
    }
}

fn map_transport(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::Timeout(_) => BackendError::Timeout(e.to_string()),
        ureq::Error::Io(ref io) if io.kind() == std::io::ErrorKind::TimedOut => BackendError::Timeout(e.to_string()),
        other => BackendError::Transport(other.to_string()),
    }
}

/// Reads `data:` events until `[DONE]` or end of stream, forwarding each
/// content delta.
pub fn read_sse(reader: impl BufRead, sink: &mut dyn FnMut(&str)) -> Result<(String, FinishReason), BackendError> {
    let mut text = String::new();
    let mut reason = FinishReason::Complete;
    let mut saw_event = false;
    for line in reader.lines() {
        let line = line.map_err(|e| {
            if e.kind() == std::io::ErrorKind::TimedOut {
                BackendError::Timeout(e.to_string())
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let Some(data) = line.strip_prefix("data:") else {
            continue;
        };
        let data = data.trim();
        if data == "[DONE]" {
            saw_event = true;
            break;
        }
        let v: Value =
            serde_json::from_str(data).map_err(|e| BackendError::Protocol(format!("bad stream event: {e}")))?;
        saw_event = true;
        let choice = &v["choices"][0];
        if let Some(delta) = choice["delta"]["content"].as_str() {
            if !delta.is_empty() {
                sink(delta);
                text.push_str(delta);
            }
        }
        if let Some(r) = choice["finish_reason"].as_str() {
            reason = finish(Some(r));
        }
    }
    if !saw_event {
        return Err(BackendError::Protocol("stream ended without events".into()));
    }
    Ok((text, reason))
}

impl TextGenerator for RemoteChatGenerator {
    fn label(&self) -> &str {
        &self.config.label
    }

    fn generate(
        &mut self,
        prompt: &PromptBundle,
        sink: &mut dyn FnMut(&str),
    ) -> Result<GenerationOutput, BackendError> {
        let deadline = Instant::now() + Duration::from_millis(self.config.timeout_ms);
        let mut tries = 0;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(BackendError::Timeout(format!(
                    "no reply within {} ms",
                    self.config.timeout_ms
                )));
            }
            // Once text has streamed out a retry would duplicate it.
            let mut streamed = false;
            let result = self.attempt(prompt, left, &mut |d| {
                streamed = true;
                sink(d)
            });
            match result {
                Ok((text, reason)) => {
                    let mut out = parse_model_output(&text);
                    out.finish_reason = reason;
                    return Ok(out);
                }
                Err(BackendError::Transport(msg)) if tries < TRANSPORT_RETRIES && !streamed => {
                    tries += 1;
                    tracing::warn!(label = %self.config.label, attempt = tries, error = %msg, "retrying backend");
                    let pause = Duration::from_millis(BACKOFF_MS << (tries - 1));
                    std::thread::sleep(pause.min(deadline.saturating_duration_since(Instant::now())));
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    use crate::prompting::build_expand_prompt;

    /// Serves `responses` in order, one per connection, and returns the
    /// captured request heads.
    fn mock(responses: Vec<String>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let h = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for resp in responses {
                let (mut s, _) = listener.accept().unwrap();
                let mut buf = vec![0u8; 65536];
                let mut got = Vec::new();
                // Read until the declared body has arrived.
                loop {
                    let n = s.read(&mut buf).unwrap();
                    got.extend_from_slice(&buf[..n]);
                    let text = String::from_utf8_lossy(&got).to_string();
                    if let Some(pos) = text.find("\r\n\r\n") {
                        let len = text
                            .lines()
                            .find_map(|l| {
                                l.to_ascii_lowercase()
                                    .strip_prefix("content-length:")
                                    .map(|v| v.trim().parse::<usize>().unwrap())
                            })
                            .unwrap_or(0);
                        if got.len() >= pos + 4 + len {
                            seen.push(text);
                            break;
                        }
                    }
                    if n == 0 {
                        break;
                    }
                }
                s.write_all(resp.as_bytes()).unwrap();
            }
            seen
        });
        (url, h)
    }

    fn http(status: &str, ctype: &str, body: &str) -> String {
        format!(
            "HTTP/1.1 {status}\r\nContent-Type: {ctype}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
    }

    fn sse(chunks: &[&str], reason: &str) -> String {
        let mut body = String::new();
        for c in chunks {
            body.push_str(&format!(
                "data: {}\n\n",
                json!({"choices": [{"delta": {"content": c}}]})
            ));
        }
        body.push_str(&format!(
            "data: {}\n\n",
            json!({"choices": [{"delta": {}, "finish_reason": reason}]})
        ));
        body.push_str("data: [DONE]\n\n");
        http("200 OK", "text/event-stream", &body)
    }

    fn gen(url: &str) -> RemoteChatGenerator {
        let mut c = GeneratorConfig::remote("r", url, "test-model", false);
        c.timeout_ms = 5_000;
        RemoteChatGenerator::new(c)
    }

    #[test]
    fn streams_and_parses_fenced_code() {
        let (url, h) = mock(vec![sse(
            &["Here:\n```st\nPROGRAM Main\n", "END_PROGRAM\n```\n", "Done."],
            "stop",
        )]);
        let mut deltas = Vec::new();
        let out = gen(&url)
            .generate(&build_expand_prompt("q"), &mut |d| deltas.push(d.to_string()))
            .unwrap();
        assert_eq!(deltas.len(), 3);
        assert_eq!(out.code.as_deref(), Some("PROGRAM Main\nEND_PROGRAM"));
        assert_eq!(out.finish_reason, FinishReason::Complete);
        let req = h.join().unwrap().remove(0);
        assert!(req.starts_with("POST /v1/chat/completions"));
        let body: Value = serde_json::from_str(&req[req.find("\r\n\r\n").unwrap() + 4..]).unwrap();
        assert_eq!(body["stream"], true);
        assert_eq!(body["model"], "test-model");
        assert_eq!(body["messages"][1]["role"], "user");
    }

    #[test]
    fn truncation_is_reported() {
        let (url, _h) = mock(vec![sse(&["partial"], "length")]);
        let out = gen(&url).generate(&build_expand_prompt("q"), &mut |_| {}).unwrap();
        assert_eq!(out.finish_reason, FinishReason::Truncated);
    }

    #[test]
    fn plain_json_fallback() {
        let body = json!({"choices": [{"message": {"content": "just prose"}, "finish_reason": "stop"}]}).to_string();
        let (url, _h) = mock(vec![http("200 OK", "application/json", &body)]);
        let out = gen(&url).generate(&build_expand_prompt("q"), &mut |_| {}).unwrap();
        assert_eq!(out.code, None);
        assert_eq!(out.raw_text, "just prose");
    }

    #[test]
    fn status_mapping() {
        let (url, _h) = mock(vec![http("401 Unauthorized", "text/plain", "no")]);
        assert!(matches!(
            gen(&url).generate(&build_expand_prompt("q"), &mut |_| {}),
            Err(BackendError::Auth(_))
        ));
        let (url, _h) = mock(vec![http("500 Internal Server Error", "text/plain", "boom")]);
        assert!(matches!(
            gen(&url).generate(&build_expand_prompt("q"), &mut |_| {}),
            Err(BackendError::Protocol(_))
        ));
    }

    #[test]
    fn bearer_token_from_env() {
        let (url, h) = mock(vec![sse(&["ok"], "stop")]);
        std::env::set_var("STFORGE_TEST_REMOTE_KEY", "sekret");
        let mut g = gen(&url);
        g.config.api_key_env = Some("STFORGE_TEST_REMOTE_KEY".into());
        g.generate(&build_expand_prompt("q"), &mut |_| {}).unwrap();
        let req = h.join().unwrap().remove(0).to_ascii_lowercase();
        assert!(req.contains("authorization: bearer sekret"));
    }

    #[test]
    fn unreachable_endpoint_is_transport_error() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        drop(listener);
        let r = gen(&url).generate(&build_expand_prompt("q"), &mut |_| {});
        assert!(matches!(r, Err(BackendError::Transport(_))), "{r:?}");
    }

    #[test]
    fn slow_server_times_out() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let _h = std::thread::spawn(move || {
            let (_s, _) = listener.accept().unwrap();
            std::thread::sleep(Duration::from_secs(3));
        });
        let mut g = gen(&url);
        g.config.timeout_ms = 300;
        let r = g.generate(&build_expand_prompt("q"), &mut |_| {});
        assert!(matches!(r, Err(BackendError::Timeout(_))), "{r:?}");
    }
}
