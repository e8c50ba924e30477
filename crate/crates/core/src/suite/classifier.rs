//! Role classifiers used by the prediction-accuracy test.
//!
//! The built-in classifier is logistic regression on embeddings. Anything else
//! (a fine-tuned transformer, say) plugs in as an external command or an HTTP
//! endpoint speaking the same JSON contract:
//!
//! request  `{"train": [{"id", "text", "label", "features"?}], "test": [{"id", "text", "features"?}]}`
//! response `{"predictions": ["target" | "retro", ...], "loss"?: number, "converged"?: bool}`

use std::io::Write;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dataset::Role;
use crate::http::{JsonClient, RetryPolicy};

use super::logreg::{train_logreg, LogRegConfig};
use super::SuiteError;

/// One entry as a classifier sees it. Labels of held-out examples are never passed.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub id: &'a str,
    pub text: &'a str,
    pub features: &'a [f64],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldFit {
    pub predictions: Vec<Role>,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
}

pub trait RoleClassifier: Send + Sync {
    fn name(&self) -> String;

    /// Trains on `train` (labelled by `labels`) and predicts a role for every `test` example.
    fn fit_predict(&self, train: &[Example], labels: &[Role], test: &[Example]) -> Result<FoldFit, SuiteError>;
}

#[derive(Debug, Clone, Default)]
pub struct LogisticClassifier {
    pub config: LogRegConfig,
}

impl RoleClassifier for LogisticClassifier {
    fn name(&self) -> String {
        format!("logreg(l2={}, epochs={})", self.config.l2, self.config.epochs)
    }

    fn fit_predict(&self, train: &[Example], labels: &[Role], test: &[Example]) -> Result<FoldFit, SuiteError> {
        let x: Vec<Vec<f64>> = train.iter().map(|e| e.features.to_vec()).collect();
        let y: Vec<bool> = labels.iter().map(|&r| r == Role::Retro).collect();
        let model = train_logreg(&x, &y, &self.config)?;
        let predictions = test
            .iter()
            .map(|e| {
                if e.features.len() != model.weights.len() {
                    return Err(SuiteError::Invalid(format!("{}: feature length differs from training", e.id)));
                }
                Ok(if model.predict(e.features) { Role::Retro } else { Role::Target })
            })
            .collect::<Result<_, _>>()?;
        Ok(FoldFit { predictions, converged: model.converged, final_loss: Some(model.final_loss()) })
    }
}

fn request_body(train: &[Example], labels: &[Role], test: &[Example], with_features: bool) -> Value {
    let item = |e: &Example, label: Option<Role>| {
        let mut v = json!({"id": e.id, "text": e.text});
        if let Some(l) = label {
            v["label"] = json!(l.as_str());
        }
        if with_features {
            v["features"] = json!(e.features);
        }
        v
    };
    json!({
        "train": train.iter().zip(labels).map(|(e, &l)| item(e, Some(l))).collect::<Vec<_>>(),
        "test": test.iter().map(|e| item(e, None)).collect::<Vec<_>>(),
    })
}

#[derive(Deserialize)]
struct Reply {
    predictions: Vec<String>,
    #[serde(default)]
    loss: Option<f64>,
    #[serde(default = "yes")]
    converged: bool,
}

fn yes() -> bool {
    true
}

fn parse_reply(value: Value, expected: usize) -> Result<FoldFit, SuiteError> {
    let reply: Reply = serde_json::from_value(value).map_err(|e| SuiteError::Classifier(format!("bad reply: {e}")))?;
    if reply.predictions.len() != expected {
        return Err(SuiteError::Classifier(format!(
            "expected {expected} predictions, got {}",
            reply.predictions.len()
        )));
    }
    let predictions = reply
        .predictions
        .iter()
        .map(|p| p.parse::<Role>().map_err(SuiteError::Classifier))
        .collect::<Result<_, _>>()?;
    Ok(FoldFit { predictions, converged: reply.converged, final_loss: reply.loss })
}

/// Runs a program once per fold with the request on stdin and reads the reply from stdout.
#[derive(Debug, Clone)]
pub struct ExternalCommandClassifier {
    pub program: String,
    pub args: Vec<String>,
    pub send_features: bool,
}

impl RoleClassifier for ExternalCommandClassifier {
    fn name(&self) -> String {
        format!("command({})", self.program)
    }

    fn fit_predict(&self, train: &[Example], labels: &[Role], test: &[Example]) -> Result<FoldFit, SuiteError> {
        let body = serde_json::to_vec(&request_body(train, labels, test, self.send_features))
            .map_err(|e| SuiteError::Classifier(e.to_string()))?;
        let fail = |e: std::io::Error| SuiteError::Classifier(format!("{}: {e}", self.program));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(fail)?;
        let mut stdin = child.stdin.take().expect("stdin is piped");
        // Write on a separate thread so a chatty child cannot deadlock on a full stdout pipe.
        let writer = std::thread::spawn(move || stdin.write_all(&body));
        let out = child.wait_with_output().map_err(fail)?;
        writer.join().map_err(|_| SuiteError::Classifier("stdin writer panicked".into()))?.map_err(fail)?;
        if !out.status.success() {
            return Err(SuiteError::Classifier(format!("{} exited with {}", self.program, out.status)));
        }
        let value: Value = serde_json::from_slice(&out.stdout)
            .map_err(|e| SuiteError::Classifier(format!("{} wrote invalid JSON: {e}", self.program)))?;
        parse_reply(value, test.len())
    }
}

/// POSTs the request to an endpoint, once per fold.
#[derive(Debug, Clone)]
pub struct HttpClassifier {
    client: JsonClient,
    send_features: bool,
}

impl HttpClassifier {
    pub fn new(endpoint: impl Into<String>, bearer: Option<String>, retry: RetryPolicy, send_features: bool) -> Self {
        HttpClassifier { client: JsonClient::new(endpoint, bearer, retry), send_features }
    }
}

impl RoleClassifier for HttpClassifier {
    fn name(&self) -> String {
        format!("http({})", self.client.endpoint())
    }

    fn fit_predict(&self, train: &[Example], labels: &[Role], test: &[Example]) -> Result<FoldFit, SuiteError> {
        let reply = self
            .client
            .post(&request_body(train, labels, test, self.send_features))
            .map_err(|e| SuiteError::Classifier(e.to_string()))?;
        parse_reply(reply, test.len())
    }
}
