use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::prompt::{displayed_order, index_label};
use super::{EvalError, Stage};
use crate::dataset::Entry;
use crate::http::{JsonClient, RetryPolicy};

/// Where a request sits in the protocol. Never sent over the wire; local
/// providers and transcript keys use it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RequestContext {
    pub entry_id: String,
    pub repeat: u32,
    pub attempt: u32,
    pub stage: Stage,
    pub rotation_offset: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    /// The user turn.
    pub body: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub context: RequestContext,
}

impl ChatRequest {
    /// Single-string layout for completion-style endpoints.
    pub fn completion_prompt(&self) -> String {
        format!("USER: {}\nASSISTANT:", self.body)
    }
}

pub trait ChatProvider: Send + Sync {
    fn model_id(&self) -> &str;
    fn complete(&self, request: &ChatRequest) -> Result<String, EvalError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderStyle {
    /// `{model, messages, temperature, max_tokens}` returning `choices[0].message.content`.
    #[default]
    Chat,
    /// `{model, prompt, temperature, max_tokens}` returning `choices[0].text`.
    Completion,
}

#[derive(Debug, Clone)]
pub struct HttpChatProvider {
    client: JsonClient,
    model_id: String,
    style: ProviderStyle,
}

impl HttpChatProvider {
    pub fn new(
        endpoint: impl Into<String>,
        model_id: impl Into<String>,
        api_key: Option<String>,
        style: ProviderStyle,
        retry: RetryPolicy,
    ) -> Self {
        HttpChatProvider {
            client: JsonClient::new(endpoint, api_key, retry),
            model_id: model_id.into(),
            style,
        }
    }
}

pub fn parse_chat_response(value: &Value) -> Result<String, EvalError> {
    let choice = value
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| EvalError::Response("response has no choices".into()))?;
    choice
        .get("message")
        .and_then(|m| m.get("content"))
        .or_else(|| choice.get("text"))
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| EvalError::Response("choice has no text content".into()))
}

impl ChatProvider for HttpChatProvider {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, EvalError> {
        let body = match self.style {
            ProviderStyle::Chat => json!({
                "model": self.model_id,
                "messages": [{"role": "user", "content": request.body}],
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
            }),
            ProviderStyle::Completion => json!({
                "model": self.model_id,
                "prompt": request.completion_prompt(),
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
            }),
        };
        parse_chat_response(&self.client.post(&body)?)
    }
}

type Script = dyn Fn(&ChatRequest) -> Result<String, EvalError> + Send + Sync;

/// Answers with an arbitrary closure; for tests and stubs.
pub struct ScriptedProvider {
    model_id: String,
    script: Box<Script>,
}

impl ScriptedProvider {
    pub fn new<F>(model_id: impl Into<String>, script: F) -> Self
    where
        F: Fn(&ChatRequest) -> Result<String, EvalError> + Send + Sync + 'static,
    {
        ScriptedProvider { model_id: model_id.into(), script: Box::new(script) }
    }
}

impl ChatProvider for ScriptedProvider {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, EvalError> {
        (self.script)(request)
    }
}

/// A synthetic model with a latent per-entry chance of knowing the answer.
///
/// For every (entry, repeat) the model settles on a favoured option, correct
/// with probability `p_e`, and then names it on each attempt with probability
/// `consistency`, otherwise a random option. With probability `noise` the
/// literal stage is answered with chatter that matches nothing, forcing the
/// index stages. `p_e` is drawn once per question text from
/// `skill ± spread/2`, so two datasets drawn from one pool see the same
/// difficulty distribution.
pub struct SimulatedProvider {
    model_id: String,
    entries: HashMap<String, Entry>,
    pub skill: f64,
    pub spread: f64,
    pub consistency: f64,
    pub noise: f64,
    seed: u64,
}

impl SimulatedProvider {
    pub fn new<'a>(model_id: impl Into<String>, entries: impl IntoIterator<Item = &'a Entry>, skill: f64, seed: u64) -> Self {
        SimulatedProvider {
            model_id: model_id.into(),
            entries: entries.into_iter().map(|e| (e.id.clone(), e.clone())).collect(),
            skill,
            spread: 0.6,
            consistency: 0.8,
            noise: 0.1,
            seed,
        }
    }

    fn unit(&self, parts: &[&[u8]]) -> rand_chacha::ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(self.model_id.as_bytes());
        for p in parts {
            h.update([0xff]);
            h.update(p);
        }
        rand_chacha::ChaCha8Rng::from_seed(h.finalize().into())
    }

    /// Latent probability that the model knows this entry.
    pub fn p_correct(&self, entry: &Entry) -> f64 {
        let u: f64 = self.unit(&[b"difficulty", entry.question.as_bytes()]).random();
        (self.skill + self.spread * (u - 0.5)).clamp(0.0, 1.0)
    }
}

impl ChatProvider for SimulatedProvider {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, EvalError> {
        let ctx = &request.context;
        let entry = self
            .entries
            .get(&ctx.entry_id)
            .ok_or_else(|| EvalError::Response(format!("simulated model has no entry {}", ctx.entry_id)))?;
        let n = entry.options.len();
        let p = self.p_correct(entry);
        let mut belief = self.unit(&[b"belief", entry.id.as_bytes(), &ctx.repeat.to_le_bytes()]);
        let favoured = if belief.random::<f64>() < p {
            entry.correct_index
        } else {
            let k = belief.random_range(0..n - 1);
            if k >= entry.correct_index { k + 1 } else { k }
        };
        let mut rng = self.unit(&[
            b"attempt",
            entry.id.as_bytes(),
            &ctx.repeat.to_le_bytes(),
            &ctx.attempt.to_le_bytes(),
            &[ctx.stage as u8],
        ]);
        if ctx.stage == Stage::Literal && rng.random::<f64>() < self.noise {
            return Ok("Let me think about this question.".into());
        }
        let choice = if rng.random::<f64>() < self.consistency { favoured } else { rng.random_range(0..n) };
        let order = displayed_order(entry, ctx.rotation_offset);
        let pos_of = |i: usize| order.iter().position(|&o| o == i).expect("displayed");
        match (ctx.stage, ctx.top_k) {
            (Stage::Literal, _) => Ok(format!("{}\n", entry.options[choice])),
            (stage, None) => Ok(format!("{}.", index_label(stage, pos_of(choice)))),
            (stage, Some(k)) => {
                let mut picks = vec![pos_of(choice)];
                let mut rest: Vec<usize> = (0..n).filter(|p| *p != picks[0]).collect();
                for _ in 1..k.min(n) {
                    let j = rng.random_range(0..rest.len());
                    picks.push(rest.swap_remove(j));
                }
                Ok(picks.iter().map(|&p| index_label(stage, p)).collect::<Vec<_>>().join(", "))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::testserver::{serve, Reply};

    fn ctx() -> RequestContext {
        RequestContext {
            entry_id: "e".into(),
            repeat: 0,
            attempt: 0,
            stage: Stage::Literal,
            rotation_offset: 0,
            top_k: None,
        }
    }

    #[test]
    fn parses_chat_and_completion_shapes() {
        let chat = json!({"choices": [{"message": {"role": "assistant", "content": "Blue"}}]});
        assert_eq!(parse_chat_response(&chat).unwrap(), "Blue");
        let completion = json!({"choices": [{"text": " Blue\n"}]});
        assert_eq!(parse_chat_response(&completion).unwrap(), " Blue\n");
        assert!(parse_chat_response(&json!({"choices": []})).is_err());
    }

    #[test]
    fn http_chat_round_trip() {
        let (url, hits) = serve(|_, body| {
            let req: Value = serde_json::from_str(body).unwrap();
            assert_eq!(req["temperature"], 0.5);
            assert_eq!(req["messages"][0]["role"], "user");
            Reply::json(json!({"choices": [{"message": {"content": "ok"}}]}).to_string())
        });
        let p = HttpChatProvider::new(url, "m", Some("k".into()), ProviderStyle::Chat, RetryPolicy::no_delay(0));
        let req = ChatRequest { body: "hi".into(), temperature: 0.5, max_tokens: 16, context: ctx() };
        assert_eq!(p.complete(&req).unwrap(), "ok");
        assert_eq!(hits.load(std::sync::atomic::Ordering::SeqCst), 1);
    }

    #[test]
    fn simulated_answers_are_reproducible_and_matchable() {
        let e = Entry::new("e", "Q?", vec!["x".into(), "y".into(), "z".into()], 2).unwrap();
        let sim = SimulatedProvider::new("sim", [&e], 0.7, 3);
        let mut c = ctx();
        for attempt in 0..20 {
            c.attempt = attempt;
            for stage in [Stage::Literal, Stage::NumericIndex, Stage::LetterIndex] {
                c.stage = stage;
                let req = ChatRequest { body: String::new(), temperature: 0.5, max_tokens: 8, context: c.clone() };
                let a = sim.complete(&req).unwrap();
                assert_eq!(a, sim.complete(&req).unwrap());
                let norm = super::super::normalize_response(&a);
                if stage != Stage::Literal || !a.starts_with("Let me") {
                    assert!(super::super::match_option(&norm, &e, stage, 0).is_some(), "{a}");
                }
            }
        }
    }
}
