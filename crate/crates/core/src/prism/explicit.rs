//! The explicit `.tra` / `.lab` / `.rew` text formats.
//!
//! `.tra` starts with the model kind (`dtmc`, `ctmc` or `mdp`). Deterministic
//! lines are `src dst value`; MDP lines are `src choice dst prob` with choices
//! numbered from 0 per state. `.lab` opens with a `#DECLARATION` block listing
//! label names, closed by `#END`, followed by lines `state label...`. `.rew`
//! lines are `state value`. Fields are separated by single spaces and `#`
//! starts a comment everywhere except in the `.lab` header markers.

use std::collections::BTreeMap;

use crate::model::ModelKind;
use crate::number::{parse_rational, Field, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExplicitError {
    #[error("{file} line {line}: malformed line `{content}`: {reason}")]
    Malformed {
        file: &'static str,
        line: usize,
        content: String,
        reason: String,
    },
    #[error("{file} line {line}: probability {value} outside [0, 1]")]
    ProbabilityRange {
        file: &'static str,
        line: usize,
        value: String,
    },
    #[error(".lab line {line}: label `{label}` was not declared")]
    UndeclaredLabel { line: usize, label: String },
    #[error("{file} line {line}: state {state} does not exist (model has {state_count} states)")]
    UnknownState {
        file: &'static str,
        line: usize,
        state: usize,
        state_count: usize,
    },
    #[error("choices of state {state} are not numbered 0..{count}")]
    ChoiceGap { state: usize, count: usize },
}

/// One transition line of a `.tra` file. `choice` is 0 for deterministic kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitTransition {
    pub source: usize,
    pub choice: usize,
    pub target: usize,
    pub value: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitModel {
    pub kind: ModelKind,
    pub state_count: usize,
    /// In file order.
    pub transitions: Vec<ExplicitTransition>,
    pub labels: BTreeMap<String, Vec<usize>>,
    pub state_rewards: Option<Vec<Rational>>,
}

impl ExplicitModel {
    /// Number of choices per state, checking that choice numbers are dense.
    pub fn choice_counts(&self) -> Result<Vec<usize>, ExplicitError> {
        let mut seen: Vec<Vec<bool>> = vec![Vec::new(); self.state_count];
        for t in &self.transitions {
            let s = &mut seen[t.source];
            if s.len() <= t.choice {
                s.resize(t.choice + 1, false);
            }
            s[t.choice] = true;
        }
        seen.iter()
            .enumerate()
            .map(|(state, s)| {
                if s.iter().all(|&b| b) {
                    Ok(s.len())
                } else {
                    Err(ExplicitError::ChoiceGap {
                        state,
                        count: s.len(),
                    })
                }
            })
            .collect()
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn fields(file: &'static str, number: usize, raw: &str, line: &str) -> Result<Vec<String>, ExplicitError> {
    let parts: Vec<&str> = line.trim_end_matches(' ').split(' ').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ExplicitError::Malformed {
            file,
            line: number,
            content: raw.to_string(),
            reason: "fields must be separated by single spaces".into(),
        });
    }
    Ok(parts.into_iter().map(str::to_string).collect())
}

fn malformed(file: &'static str, line: usize, raw: &str, reason: impl Into<String>) -> ExplicitError {
    ExplicitError::Malformed {
        file,
        line,
        content: raw.to_string(),
        reason: reason.into(),
    }
}

fn index(file: &'static str, line: usize, raw: &str, text: &str) -> Result<usize, ExplicitError> {
    text.parse::<usize>()
        .map_err(|_| malformed(file, line, raw, format!("`{text}` is not a state or choice index")))
}

fn number(file: &'static str, line: usize, raw: &str, text: &str) -> Result<Rational, ExplicitError> {
    parse_rational(text).map_err(|_| malformed(file, line, raw, format!("`{text}` is not a number")))
}

pub fn parse_explicit(
    tra_text: &str,
    lab_text: &str,
    rew_text: Option<&str>,
) -> Result<ExplicitModel, ExplicitError> {
    const TRA: &str = ".tra";
    let mut kind = None;
    let mut transitions = Vec::new();
    let mut max_state = 0usize;
    for (i, raw) in tra_text.lines().enumerate() {
        let number_ = i + 1;
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            continue;
        }
        let Some(kind) = kind else {
            kind = Some(match line.trim() {
                "dtmc" => ModelKind::Dtmc,
                "ctmc" => ModelKind::Ctmc,
                "mdp" => ModelKind::Mdp,
                other => return Err(malformed(TRA, number_, raw, format!("unknown model kind `{other}`"))),
            });
            continue;
        };
        let parts = fields(TRA, number_, raw, line)?;
        let expected = if kind == ModelKind::Mdp { 4 } else { 3 };
        if parts.len() != expected {
            return Err(malformed(TRA, number_, raw, format!("expected {expected} fields, found {}", parts.len())));
        }
        let source = index(TRA, number_, raw, &parts[0])?;
        let (choice, target) = if kind == ModelKind::Mdp {
            (index(TRA, number_, raw, &parts[1])?, index(TRA, number_, raw, &parts[2])?)
        } else {
            (0, index(TRA, number_, raw, &parts[1])?)
        };
        let value = number(TRA, number_, raw, &parts[expected - 1])?;
        let out_of_range = if kind == ModelKind::Ctmc {
            value.sign() == Some(std::cmp::Ordering::Less)
        } else {
            value.sign() == Some(std::cmp::Ordering::Less) || value > Rational::one()
        };
        if out_of_range {
            if kind == ModelKind::Ctmc {
                return Err(malformed(TRA, number_, raw, "negative rate"));
            }
            return Err(ExplicitError::ProbabilityRange {
                file: TRA,
                line: number_,
                value: parts[expected - 1].clone(),
            });
        }
        max_state = max_state.max(source).max(target);
        transitions.push(ExplicitTransition {
            source,
            choice,
            target,
            value,
        });
    }
    let Some(kind) = kind else {
        return Err(malformed(TRA, 1, "", "missing model kind line"));
    };
    let state_count = if transitions.is_empty() { 0 } else { max_state + 1 };
    let labels = parse_labels(lab_text, state_count)?;
    let state_rewards = rew_text.map(|t| parse_state_rewards(t, state_count)).transpose()?;
    Ok(ExplicitModel {
        kind,
        state_count,
        transitions,
        labels,
        state_rewards,
    })
}

fn parse_labels(text: &str, state_count: usize) -> Result<BTreeMap<String, Vec<usize>>, ExplicitError> {
    const LAB: &str = ".lab";
    let mut labels: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut lines = text.lines().enumerate();
    let mut header_open = false;
    let mut header_done = false;
    for (i, raw) in lines.by_ref() {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if !header_open {
            if trimmed != "#DECLARATION" {
                return Err(malformed(LAB, i + 1, raw, "expected `#DECLARATION`"));
            }
            header_open = true;
            continue;
        }
        if trimmed == "#END" {
            header_done = true;
            break;
        }
        for name in strip_comment(raw).split_whitespace() {
            labels.insert(name.to_string(), Vec::new());
        }
    }
    if !header_done {
        return Err(malformed(LAB, text.lines().count().max(1), "", "missing `#END` after the declaration block"));
    }
    for (i, raw) in lines {
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            continue;
        }
        let parts = fields(LAB, i + 1, raw, line)?;
        let state = index(LAB, i + 1, raw, &parts[0])?;
        if state >= state_count {
            return Err(ExplicitError::UnknownState {
                file: LAB,
                line: i + 1,
                state,
                state_count,
            });
        }
        if parts.len() < 2 {
            return Err(malformed(LAB, i + 1, raw, "expected at least one label"));
        }
        for name in &parts[1..] {
            match labels.get_mut(name.as_str()) {
                Some(states) => {
                    if !states.contains(&state) {
                        states.push(state);
                    }
                }
                None => {
                    return Err(ExplicitError::UndeclaredLabel {
                        line: i + 1,
                        label: name.clone(),
                    })
                }
            }
        }
    }
    for states in labels.values_mut() {
        states.sort_unstable();
    }
    Ok(labels)
}

fn parse_state_rewards(text: &str, state_count: usize) -> Result<Vec<Rational>, ExplicitError> {
    const REW: &str = ".rew";
    let mut rewards = vec![Rational::zero(); state_count];
    for (i, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            continue;
        }
        let parts = fields(REW, i + 1, raw, line)?;
        if parts.len() != 2 {
            return Err(malformed(REW, i + 1, raw, format!("expected 2 fields, found {}", parts.len())));
        }
        let state = index(REW, i + 1, raw, &parts[0])?;
        if state >= state_count {
            return Err(ExplicitError::UnknownState {
                file: REW,
                line: i + 1,
                state,
                state_count,
            });
        }
        let value = number(REW, i + 1, raw, &parts[1])?;
        if value.sign() == Some(std::cmp::Ordering::Less) {
            return Err(malformed(REW, i + 1, raw, "negative reward"));
        }
        rewards[state] = value;
    }
    Ok(rewards)
}
