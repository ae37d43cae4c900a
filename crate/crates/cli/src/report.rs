use std::io::Write;

macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

use serde_json::{json, Value};

use stormlet::checker::{CheckNumber, CheckResult, Extended, InitialSummary};
use stormlet::model::Model;
use stormlet::number::{format_rational, Field, Rational};
use stormlet::property::Property;

/// What gets reported for one property.
#[derive(Debug, Clone)]
pub enum Outcome {
    Value { text: String, json: Value },
    Range { text: String, json: Value },
    Truth(bool),
    Function(String),
    Bounds(Rational, Rational),
}

fn number_json<N: CheckNumber>(v: &Extended<N>) -> Value {
    match v {
        Extended::Infinity => json!("inf"),
        Extended::Finite(x) if N::is_exact() => json!(x.render()),
        Extended::Finite(x) => json!(x.as_f64()),
    }
}

impl Outcome {
    pub fn from_result<N: CheckNumber>(result: &CheckResult<N>) -> Outcome {
        match result.summary() {
            InitialSummary::Truth(b) => Outcome::Truth(b),
            InitialSummary::Value(v) => Outcome::Value {
                text: v.to_string(),
                json: number_json(&v),
            },
            InitialSummary::Range(lo, hi) => Outcome::Range {
                text: format!("[{lo}, {hi}]"),
                json: json!([number_json(&lo), number_json(&hi)]),
            },
        }
    }

    pub fn exact(value: Rational) -> Outcome {
        let text = format_rational(&value);
        Outcome::Value {
            json: json!(text),
            text,
        }
    }

    fn text(&self) -> String {
        match self {
            Outcome::Value { text, .. } | Outcome::Range { text, .. } | Outcome::Function(text) => text.clone(),
            Outcome::Truth(b) => b.to_string(),
            Outcome::Bounds(lo, hi) => format!("[{}, {}]", format_rational(lo), format_rational(hi)),
        }
    }

    fn json(&self) -> Value {
        match self {
            Outcome::Value { json, .. } => json!({ "kind": "value", "result": json }),
            Outcome::Range { json, .. } => json!({ "kind": "range", "result": json }),
            Outcome::Truth(b) => json!({ "kind": "truth", "result": b }),
            Outcome::Function(f) => json!({ "kind": "function", "result": f }),
            Outcome::Bounds(lo, hi) => json!({
                "kind": "bounds",
                "result": [format_rational(lo), format_rational(hi)],
            }),
        }
    }
}

/// Text report written as it goes, or a JSON document written at the end.
pub struct Report {
    json: Option<(Value, Vec<Value>)>,
}

impl Report {
    pub fn new(json: bool) -> Report {
        Report {
            json: json.then(|| (Value::Null, Vec::new())),
        }
    }

    pub fn model<N: Field>(&mut self, model: &Model<N>) {
        let summary = json!({
            "type": model.kind.keyword(),
            "states": model.state_count(),
            "transitions": model.transition_count(),
            "choices": model.row_count(),
            "initial_states": model.initial_states.iter().collect::<Vec<_>>(),
        });
        match &mut self.json {
            Some((m, _)) => *m = summary,
            None => {
                say!("Model type: {}", model.kind);
                say!("States: {}", model.state_count());
                say!("Transitions: {}", model.transition_count());
                if model.is_nondeterministic() {
                    say!("Choices: {}", model.row_count());
                }
                say!();
            }
        }
    }

    pub fn start(&mut self, property: &Property) {
        if self.json.is_none() {
            say!("Model checking property \"{}\" ...", property.display_name());
            let _ = std::io::stdout().flush();
        }
    }

    pub fn result(&mut self, property: &Property, outcome: Outcome) {
        match &mut self.json {
            Some((_, results)) => {
                let mut entry = outcome.json();
                entry["property"] = json!(property.display_name());
                entry["formula"] = json!(property.to_string());
                results.push(entry);
            }
            None => {
                say!("Result (for initial states): {}", outcome.text());
                say!();
            }
        }
    }

    pub fn flush(&mut self) {
        let _ = std::io::stdout().flush();
    }

    pub fn finish(self) {
        if let Some((model, results)) = self.json {
            let doc = json!({ "model": model, "results": results });
            say!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
        }
    }
}
