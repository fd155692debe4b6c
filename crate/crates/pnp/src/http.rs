//! Chat-completions client used as planner, reflector, and selector.

use std::fmt;
use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use pnp_core::domain::{PrimitiveKind, Schema};
use pnp_core::planner::{
    fill_template, parse_index, parse_insight, parse_plan_reply, primitives_text, Backend, Observation, PlannerConfig,
    PromptTemplates, Reflection, ReflectionInput, TaskPlanner,
};
use pnp_core::subgoal::{CandidateSet, SelectionContext, Selector};
use pnp_core::{Error, Result};

pub const API_KEY_ENV: &str = "PNP_API_KEY";

#[derive(Clone)]
pub struct HttpClient {
    endpoint: String,
    model: String,
    temperature: f64,
    max_retries: u32,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl fmt::Debug for HttpClient {
    // the key must never reach logs
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpClient")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("max_retries", &self.max_retries)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

/// One failed call, kept so callers can report retries.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CallLog {
    pub call: String,
    pub attempt: u32,
    pub error: String,
}

pub fn svg_data_uri(svg: &str) -> String {
    format!("data:image/svg+xml;base64,{}", base64::engine::general_purpose::STANDARD.encode(svg))
}

impl HttpClient {
    pub fn from_config(cfg: &PlannerConfig) -> Result<Self> {
        cfg.validate()?;
        let Backend::Http { endpoint, model, timeout_secs, max_retries } = &cfg.backend else {
            return Err(Error::InvalidArgument("planner backend is not http".into()));
        };
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs((*timeout_secs).max(1))).build();
        Ok(Self {
            endpoint: endpoint.clone(),
            model: model.clone(),
            temperature: cfg.temperature,
            max_retries: *max_retries,
            agent,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        })
    }

    pub fn max_retries(&self) -> u32 {
        self.max_retries
    }

    /// One request: prompt text plus SVG images as data URIs; returns the reply text.
    pub fn complete(&self, text: &str, images: &[&str]) -> std::result::Result<String, String> {
        let mut content = vec![json!({"type": "text", "text": text})];
        for svg in images {
            content.push(json!({"type": "image_url", "image_url": {"url": svg_data_uri(svg)}}));
        }
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": content}],
            "temperature": self.temperature,
        });
        let mut req = self.agent.post(&self.endpoint);
        if let Some(k) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {k}"));
        }
        let resp = req.send_json(body).map_err(|e| match e {
            ureq::Error::Status(code, _) => format!("endpoint returned HTTP {code}"),
            ureq::Error::Transport(t) => format!("transport error: {}", t.kind()),
        })?;
        let v: Value = resp.into_json().map_err(|e| format!("reply is not JSON: {e}"))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| "reply has no choices[0].message.content".to_string())
    }

    /// Calls until `parse` accepts a reply, at most `max_retries + 1` times.
    fn with_retries<T>(
        &self,
        call: &str,
        text: &str,
        images: &[&str],
        log: &mut Vec<CallLog>,
        parse: impl Fn(&str) -> Result<T>,
    ) -> Result<T> {
        let mut last = String::new();
        for attempt in 0..=self.max_retries {
            let outcome = self.complete(text, images).and_then(|r| parse(&r).map_err(|e| e.to_string()));
            match outcome {
                Ok(v) => return Ok(v),
                Err(e) => {
                    log.push(CallLog { call: call.into(), attempt, error: e.clone() });
                    last = e;
                }
            }
        }
        Err(Error::PlannerUnavailable(format!("{call} failed after {} attempts: {last}", self.max_retries + 1)))
    }
}

#[derive(Debug)]
pub struct HttpPlanner {
    client: HttpClient,
    templates: PromptTemplates,
    regions: Vec<String>,
    pub log: Vec<CallLog>,
}

impl HttpPlanner {
    pub fn new(client: HttpClient, templates: PromptTemplates, regions: Vec<String>) -> Self {
        Self { client, templates, regions, log: Vec::new() }
    }
}

impl TaskPlanner for HttpPlanner {
    fn plan(&mut self, obs: &Observation, primitives: &[(PrimitiveKind, Schema)]) -> Result<pnp_core::domain::PlanSkeleton> {
        let prim = primitives_text(primitives);
        let summary = obs.summary_text();
        let regions = self.regions.join(", ");
        let text = fill_template(
            &self.templates.planner,
            &[("PRIMITIVES", &prim), ("SUMMARY", &summary), ("INSTRUCTION", &obs.instruction), ("REGIONS", &regions)],
        );
        let state = obs.state.clone();
        let client = self.client.clone();
        client.with_retries("plan", &text, &[&obs.rendering], &mut self.log, |r| parse_plan_reply(r, &state))
    }

    fn reflect(&mut self, input: &ReflectionInput) -> Result<Reflection> {
        let prim = primitives_text(&pnp_core::planner::all_schemas());
        let obs = &input.observation;
        let summary = obs.summary_text();
        let regions = self.regions.join(", ");
        let plan = input.failed_plan.to_json();
        let error = input.failure.error_text();
        let history = if input.history.is_empty() { "none".to_string() } else { input.history.join("\n") };
        let text = fill_template(
            &self.templates.reflector,
            &[
                ("PLAN", &plan),
                ("ERROR", &error),
                ("HISTORY", &history),
                ("SUMMARY", &summary),
                ("INSTRUCTION", &obs.instruction),
                ("PRIMITIVES", &prim),
                ("REGIONS", &regions),
            ],
        );
        let state = obs.state.clone();
        let revision = input.failed_plan.revision + 1;
        let client = self.client.clone();
        client.with_retries("reflect", &text, &[&obs.rendering], &mut self.log, |r| {
            let mut revised = parse_plan_reply(r, &state)?;
            revised.revision = revision;
            Ok(Reflection { insight: parse_insight(r), revised })
        })
    }
}

#[derive(Debug)]
pub struct HttpSelector {
    client: HttpClient,
    template: String,
    pub log: Vec<CallLog>,
}

impl HttpSelector {
    pub fn new(client: HttpClient, templates: &PromptTemplates) -> Self {
        Self { client, template: templates.selector.clone(), log: Vec::new() }
    }
}

impl Selector for HttpSelector {
    fn select(&mut self, set: &CandidateSet, ctx: &SelectionContext<'_>) -> Result<usize> {
        let n = set.candidates.len();
        let count = n.to_string();
        let max = (n - 1).to_string();
        let current = ctx.current.to_string();
        let next = ctx.next.map_or("none".to_string(), |s| s.to_string());
        let text = fill_template(
            &self.template,
            &[("COUNT", &count), ("MAX", &max), ("CURRENT", &current), ("NEXT", &next)],
        );
        let images: Vec<&str> = set.candidates.iter().map(|c| c.rendering.as_str()).collect();
        let client = self.client.clone();
        client
            .with_retries("select", &text, &images, &mut self.log, |r| parse_index(r, n))
            .map_err(|e| Error::Selection(e.to_string()))
    }
}
