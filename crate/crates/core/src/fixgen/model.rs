use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::Duration;

use serde::Deserialize;
use serde_json::Value;

use super::Prompt;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("model request failed: {0}")]
    Transport(String),
    #[error("no scripted response for call {0}")]
    Exhausted(usize),
    #[error("model credential unavailable: {0}")]
    Credential(String),
    #[error("bad mock response script: {0}")]
    Script(String),
}

/// The code transformation model.
pub trait Model {
    fn complete(&mut self, prompt: &Prompt) -> Result<String, ModelError>;
}

impl<M: Model + ?Sized> Model for Box<M> {
    fn complete(&mut self, prompt: &Prompt) -> Result<String, ModelError> {
        (**self).complete(prompt)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptValue {
    Text(String),
    File { file: String },
}

#[derive(Deserialize)]
struct MockScript {
    #[serde(default)]
    responses: BTreeMap<String, ScriptValue>,
    #[serde(default)]
    default: Option<ScriptValue>,
}

/// Replays scripted responses keyed by 0-based call index, falling back to
/// `default`. Prompts are recorded.
#[derive(Debug, Clone, Default)]
pub struct MockModel {
    responses: BTreeMap<usize, String>,
    default: Option<String>,
    pub prompts: Vec<Prompt>,
}

impl MockModel {
    pub fn new(responses: impl IntoIterator<Item = (usize, String)>, default: Option<String>) -> Self {
        MockModel {
            responses: responses.into_iter().collect(),
            default,
            prompts: Vec::new(),
        }
    }

    /// Answers every call with `text`.
    pub fn always(text: impl Into<String>) -> Self {
        MockModel::new([], Some(text.into()))
    }

    /// Loads `{"responses": {"0": "...", "1": {"file": "fix.go"}}, "default": "..."}`.
    /// File references are relative to the script.
    pub fn from_file(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Script(format!("{}: {e}", path.display())))?;
        let script: MockScript =
            serde_json::from_str(&text).map_err(|e| ModelError::Script(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let load = |v: ScriptValue| -> Result<String, ModelError> {
            match v {
                ScriptValue::Text(t) => Ok(t),
                ScriptValue::File { file } => {
                    std::fs::read_to_string(base.join(&file)).map_err(|e| ModelError::Script(format!("{file}: {e}")))
                }
            }
        };
        let mut responses = BTreeMap::new();
        for (k, v) in script.responses {
            let idx: usize = k
                .parse()
                .map_err(|_| ModelError::Script(format!("response key {k:?} is not an index")))?;
            responses.insert(idx, load(v)?);
        }
        let default = script.default.map(load).transpose()?;
        Ok(MockModel::new(responses, default))
    }

    pub fn calls(&self) -> usize {
        self.prompts.len()
    }
}

impl Model for MockModel {
    fn complete(&mut self, prompt: &Prompt) -> Result<String, ModelError> {
        let idx = self.prompts.len();
        self.prompts.push(prompt.clone());
        self.responses
            .get(&idx)
            .or(self.default.as_ref())
            .cloned()
            .ok_or(ModelError::Exhausted(idx))
    }
}

/// Wraps a model and keeps every prompt it was sent.
pub struct RecordingModel<M> {
    pub inner: M,
    pub prompts: Vec<Prompt>,
}

impl<M: Model> RecordingModel<M> {
    pub fn new(inner: M) -> Self {
        RecordingModel {
            inner,
            prompts: Vec::new(),
        }
    }
}

impl<M: Model> Model for RecordingModel<M> {
    fn complete(&mut self, prompt: &Prompt) -> Result<String, ModelError> {
        self.prompts.push(prompt.clone());
        self.inner.complete(prompt)
    }
}

/// Chat-style model behind an HTTP endpoint. Sends
/// `{"system", "user", "temperature"[, "model"]}` and accepts a JSON body
/// with `text`, `completion` or `content`, an OpenAI-style `choices` list,
/// or a plain-text body.
pub struct HttpModel {
    endpoint: String,
    credential: Option<String>,
    pub temperature: f64,
    pub model_name: Option<String>,
    client: reqwest::blocking::Client,
}

impl fmt::Debug for HttpModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpModel")
            .field("endpoint", &self.endpoint)
            .field("credential", &self.credential.as_ref().map(|_| "<redacted>"))
            .field("temperature", &self.temperature)
            .field("model_name", &self.model_name)
            .finish()
    }
}

impl HttpModel {
    /// The credential, if any, is read from the environment variable
    /// `credential_env` and sent as a bearer token.
    pub fn new(
        endpoint: impl Into<String>,
        credential_env: Option<&str>,
        timeout: Duration,
    ) -> Result<Self, ModelError> {
        let credential = match credential_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| ModelError::Credential(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ModelError::Transport(e.to_string()))?;
        Ok(HttpModel {
            endpoint: endpoint.into(),
            credential,
            temperature: 0.0,
            model_name: None,
            client,
        })
    }
}

fn extract_text(body: &str) -> String {
    let Ok(v) = serde_json::from_str::<Value>(body) else {
        return body.to_string();
    };
    for key in ["text", "completion", "content"] {
        if let Some(s) = v.get(key).and_then(Value::as_str) {
            return s.to_string();
        }
    }
    if let Some(s) = v.pointer("/choices/0/message/content").and_then(Value::as_str) {
        return s.to_string();
    }
    if let Some(s) = v.as_str() {
        return s.to_string();
    }
    body.to_string()
}

impl Model for HttpModel {
    fn complete(&mut self, prompt: &Prompt) -> Result<String, ModelError> {
        let mut payload = serde_json::json!({
            "system": prompt.system_text,
            "user": prompt.user_text,
            "temperature": self.temperature,
        });
        if let Some(name) = &self.model_name {
            payload["model"] = Value::String(name.clone());
        }
        let mut req = self.client.post(&self.endpoint).json(&payload);
        if let Some(token) = &self.credential {
            req = req.bearer_auth(token);
        }
        let resp = req
            .send()
            .map_err(|e| ModelError::Transport(e.without_url().to_string()))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| ModelError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ModelError::Transport(format!("HTTP {status}")));
        }
        Ok(extract_text(&body))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_shapes() {
        assert_eq!(extract_text(r#"{"text": "a"}"#), "a");
        assert_eq!(extract_text(r#"{"completion": "b"}"#), "b");
        assert_eq!(extract_text(r#"{"choices": [{"message": {"content": "c"}}]}"#), "c");
        assert_eq!(extract_text("func f() {}"), "func f() {}");
    }

    #[test]
    fn credential_is_not_in_debug_output() {
        std::env::set_var("DRFIX_TEST_SECRET_TOKEN", "s3cr3t-value");
        let m = HttpModel::new(
            "http://127.0.0.1:9/v1",
            Some("DRFIX_TEST_SECRET_TOKEN"),
            Duration::from_secs(1),
        )
        .unwrap();
        assert!(!format!("{m:?}").contains("s3cr3t-value"));
        assert!(matches!(
            HttpModel::new("http://x", Some("DRFIX_TEST_UNSET_VAR_1234"), Duration::from_secs(1)),
            Err(ModelError::Credential(_))
        ));
    }

    #[test]
    fn mock_replays_by_index() {
        let mut m = MockModel::new([(1, "second".to_string())], None);
        let p = Prompt {
            system_text: String::new(),
            user_text: String::new(),
            truncated_example: false,
        };
        assert!(matches!(m.complete(&p), Err(ModelError::Exhausted(0))));
        assert_eq!(m.complete(&p).unwrap(), "second");
        assert_eq!(m.calls(), 2);
    }
}
