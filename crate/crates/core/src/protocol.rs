//! The tagged turn grammar agents emit and the engine parses.
//!
//! An agent turn is exactly one of:
//!
//! ```text
//! <Thought>...</Thought><Action_input>{"tool": ..., "arguments": {...}}</Action_input>
//! <Thought>...</Thought><Final_Answer>...</Final_Answer>
//! ```
//!
//! Leading/trailing whitespace is ignored. Anything else is a protocol
//! violation, surfaced as a recoverable error observation rather than an
//! episode abort.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tools::ToolCall;

pub const THOUGHT_OPEN: &str = "<Thought>";
pub const THOUGHT_CLOSE: &str = "</Thought>";
pub const ACTION_OPEN: &str = "<Action_input>";
pub const ACTION_CLOSE: &str = "</Action_input>";
pub const FINAL_OPEN: &str = "<Final_Answer>";
pub const FINAL_CLOSE: &str = "</Final_Answer>";
pub const QUESTION_OPEN: &str = "<Question>";
pub const QUESTION_CLOSE: &str = "</Question>";
pub const OBSERVATION_OPEN: &str = "<Observation>";
pub const OBSERVATION_CLOSE: &str = "</Observation>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TurnPayload {
    Call { call: ToolCall },
    FinalAnswer { text: String },
}

/// One parsed agent turn: a thought plus exactly one payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentTurn {
    pub thought: String,
    pub payload: TurnPayload,
}

impl AgentTurn {
    pub fn call(thought: &str, call: ToolCall) -> AgentTurn {
        AgentTurn {
            thought: thought.to_string(),
            payload: TurnPayload::Call { call },
        }
    }

    pub fn final_answer(thought: &str, text: &str) -> AgentTurn {
        AgentTurn {
            thought: thought.to_string(),
            payload: TurnPayload::FinalAnswer {
                text: text.to_string(),
            },
        }
    }

    pub fn as_call(&self) -> Option<&ToolCall> {
        match &self.payload {
            TurnPayload::Call { call } => Some(call),
            TurnPayload::FinalAnswer { .. } => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("output must start with {THOUGHT_OPEN}")]
    MissingThought,
    #[error("unclosed tag {0}")]
    UnclosedTag(&'static str),
    #[error("expected {ACTION_OPEN} or {FINAL_OPEN} after the thought")]
    MissingPayload,
    #[error("both {ACTION_OPEN} and {FINAL_OPEN} are present; emit exactly one")]
    BothPayloads,
    #[error("unexpected content after the closing tag")]
    TrailingContent,
    #[error("{ACTION_OPEN} body is not a JSON object with \"tool\" and \"arguments\": {0}")]
    BadActionBody(String),
}

/// Parse a raw completion into an agent turn.
pub fn parse_agent_output(text: &str) -> Result<AgentTurn, ProtocolError> {
    let text = text.trim();
    let rest = text
        .strip_prefix(THOUGHT_OPEN)
        .ok_or(ProtocolError::MissingThought)?;
    let close = rest
        .find(THOUGHT_CLOSE)
        .ok_or(ProtocolError::UnclosedTag(THOUGHT_CLOSE))?;
    let thought = rest[..close].to_string();
    let after = rest[close + THOUGHT_CLOSE.len()..].trim();

    if let Some(body_start) = after.strip_prefix(ACTION_OPEN) {
        let close = body_start
            .find(ACTION_CLOSE)
            .ok_or(ProtocolError::UnclosedTag(ACTION_CLOSE))?;
        let body = &body_start[..close];
        let tail = body_start[close + ACTION_CLOSE.len()..].trim();
        if !tail.is_empty() {
            return Err(if tail.contains(FINAL_OPEN) || tail.contains(ACTION_OPEN) {
                ProtocolError::BothPayloads
            } else {
                ProtocolError::TrailingContent
            });
        }
        let call = parse_action_body(body)?;
        return Ok(AgentTurn {
            thought,
            payload: TurnPayload::Call { call },
        });
    }
    if let Some(body_start) = after.strip_prefix(FINAL_OPEN) {
        let close = body_start
            .find(FINAL_CLOSE)
            .ok_or(ProtocolError::UnclosedTag(FINAL_CLOSE))?;
        let body = body_start[..close].to_string();
        let tail = body_start[close + FINAL_CLOSE.len()..].trim();
        if !tail.is_empty() {
            return Err(if tail.contains(ACTION_OPEN) || tail.contains(FINAL_OPEN) {
                ProtocolError::BothPayloads
            } else {
                ProtocolError::TrailingContent
            });
        }
        return Ok(AgentTurn {
            thought,
            payload: TurnPayload::FinalAnswer { text: body },
        });
    }
    Err(ProtocolError::MissingPayload)
}

fn parse_action_body(body: &str) -> Result<ToolCall, ProtocolError> {
    let value: serde_json::Value = serde_json::from_str(body.trim())
        .map_err(|e| ProtocolError::BadActionBody(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| ProtocolError::BadActionBody("body is not an object".into()))?;
    for key in obj.keys() {
        if key != "tool" && key != "arguments" {
            return Err(ProtocolError::BadActionBody(format!(
                "unexpected key {key:?}"
            )));
        }
    }
    let tool = obj
        .get("tool")
        .and_then(|v| v.as_str())
        .ok_or_else(|| ProtocolError::BadActionBody("missing string \"tool\"".into()))?;
    let arguments = match obj.get("arguments") {
        None => Default::default(),
        Some(serde_json::Value::Object(map)) => {
            map.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
        }
        Some(_) => {
            return Err(ProtocolError::BadActionBody(
                "\"arguments\" must be an object".into(),
            ))
        }
    };
    Ok(ToolCall {
        tool: tool.to_string(),
        arguments,
    })
}

/// Render a turn back into the tag grammar (inverse of parsing; used by
/// scripted backends and training-data export).
pub fn render_turn(turn: &AgentTurn) -> String {
    match &turn.payload {
        TurnPayload::Call { call } => format!(
            "{THOUGHT_OPEN}{}{THOUGHT_CLOSE}{ACTION_OPEN}{}{ACTION_CLOSE}",
            turn.thought,
            serde_json::to_string(call).expect("call serializes"),
        ),
        TurnPayload::FinalAnswer { text } => format!(
            "{THOUGHT_OPEN}{}{THOUGHT_CLOSE}{FINAL_OPEN}{text}{FINAL_CLOSE}",
            turn.thought,
        ),
    }
}

pub fn wrap_question(text: &str) -> String {
    format!("{QUESTION_OPEN}{text}{QUESTION_CLOSE}")
}

pub fn wrap_observation(text: &str) -> String {
    format!("{OBSERVATION_OPEN}{text}{OBSERVATION_CLOSE}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn parses_tool_call_turn() {
        let raw = r#"<Thought>check order</Thought><Action_input>{"tool":"get_order_detail","arguments":{"order_id":"O1"}}</Action_input>"#;
        let turn = parse_agent_output(raw).unwrap();
        assert_eq!(turn.thought, "check order");
        let call = turn.as_call().unwrap();
        assert_eq!(call.tool, "get_order_detail");
        assert_eq!(call.arguments["order_id"], json!("O1"));
    }

    #[test]
    fn parses_final_answer_turn() {
        let raw = "  <Thought>done</Thought><Final_Answer>All set!</Final_Answer>  ";
        let turn = parse_agent_output(raw).unwrap();
        assert_eq!(
            turn.payload,
            TurnPayload::FinalAnswer {
                text: "All set!".into()
            }
        );
    }

    #[test]
    fn rejects_unclosed_action_tag() {
        let raw = r#"<Thought>t</Thought><Action_input>{"tool":"end_conversation"}"#;
        assert_eq!(
            parse_agent_output(raw),
            Err(ProtocolError::UnclosedTag(ACTION_CLOSE))
        );
    }

    #[test]
    fn rejects_both_payloads() {
        let raw = r#"<Thought>t</Thought><Action_input>{"tool":"end_conversation"}</Action_input><Final_Answer>bye</Final_Answer>"#;
        assert_eq!(parse_agent_output(raw), Err(ProtocolError::BothPayloads));
    }

    #[test]
    fn rejects_untagged_prose() {
        assert_eq!(
            parse_agent_output("let me think..."),
            Err(ProtocolError::MissingThought)
        );
        assert_eq!(
            parse_agent_output("<Thought>only a thought</Thought>"),
            Err(ProtocolError::MissingPayload)
        );
    }

    #[test]
    fn rejects_malformed_action_json() {
        let raw = "<Thought>t</Thought><Action_input>not json</Action_input>";
        assert!(matches!(
            parse_agent_output(raw),
            Err(ProtocolError::BadActionBody(_))
        ));
        let raw = r#"<Thought>t</Thought><Action_input>{"tool":"x","extra":1}</Action_input>"#;
        assert!(matches!(
            parse_agent_output(raw),
            Err(ProtocolError::BadActionBody(_))
        ));
    }

    #[test]
    fn empty_thought_is_accepted() {
        let raw = "<Thought></Thought><Final_Answer>ok</Final_Answer>";
        let turn = parse_agent_output(raw).unwrap();
        assert!(turn.thought.is_empty());
    }

    #[test]
    fn render_parse_round_trip() {
        let turn = AgentTurn::call(
            "look up the order",
            crate::tools::ToolCall::new("get_order_detail", &[("order_id", json!("O1"))]),
        );
        let rendered = render_turn(&turn);
        assert_eq!(parse_agent_output(&rendered).unwrap(), turn);
        let fin = AgentTurn::final_answer("wrap up", "Anything else?");
        assert_eq!(parse_agent_output(&render_turn(&fin)).unwrap(), fin);
    }
}
