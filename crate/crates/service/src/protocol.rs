//! Wire format for `/session`: one JSON object per WebSocket text frame,
//! newline-terminated. Every server message carries `"v": 1`.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use steerbeam_core::geometry::{linear_boundaries, steered_boundaries, Roi};
use steerbeam_core::scene::Role;

pub const PROTOCOL_VERSION: u32 = 1;

/// Client requests. Unknown fields are ignored; unknown types rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientMessage {
    Steer { gamma_deg: f64 },
    /// A scene object, or a path to a scene file on the server.
    LoadScene { scene: Value },
    Start,
    Stop,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("message is not valid JSON: {0}")]
    Json(String),
    #[error("message must be a JSON object with a string \"type\"")]
    MissingType,
    #[error("unknown message type '{0}'")]
    UnknownType(String),
    #[error("unsupported protocol version {0}; expected {PROTOCOL_VERSION}")]
    Version(u64),
    #[error("invalid '{kind}' message: {msg}")]
    Field { kind: String, msg: String },
}

#[derive(Deserialize)]
struct SteerBody {
    gamma_deg: f64,
}

#[derive(Deserialize)]
struct LoadBody {
    scene: Value,
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self, ProtocolError> {
        let value: Value = serde_json::from_str(text).map_err(|e| ProtocolError::Json(e.to_string()))?;
        let kind = value
            .get("type")
            .and_then(Value::as_str)
            .ok_or(ProtocolError::MissingType)?
            .to_string();
        if let Some(v) = value.get("v") {
            match v.as_u64() {
                Some(n) if n == PROTOCOL_VERSION as u64 => {}
                Some(n) => return Err(ProtocolError::Version(n)),
                None => {
                    return Err(ProtocolError::Field {
                        kind,
                        msg: "\"v\" must be an integer".into(),
                    })
                }
            }
        }
        let field = |e: serde_json::Error| ProtocolError::Field {
            kind: kind.clone(),
            msg: e.to_string(),
        };
        match kind.as_str() {
            "steer" => {
                let b: SteerBody = serde_json::from_value(value.clone()).map_err(field)?;
                Ok(Self::Steer { gamma_deg: b.gamma_deg })
            }
            "load_scene" => {
                let b: LoadBody = serde_json::from_value(value.clone()).map_err(field)?;
                Ok(Self::LoadScene { scene: b.scene })
            }
            "start" => Ok(Self::Start),
            "stop" => Ok(Self::Stop),
            _ => Err(ProtocolError::UnknownType(kind)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Idle,
    Running,
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceInfo {
    pub name: String,
    pub angle_deg: f64,
    pub role: Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPair {
    pub phi_l: f64,
    pub phi_r: f64,
    /// Left and right boundary pinned at 180 / 0 degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturated: Option<[bool; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceMetric {
    pub angle_deg: f64,
    pub role: Role,
    pub pr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub gamma_deg: f64,
    pub start_s: f64,
    pub end_s: f64,
    /// Separated output against the target stem; absent for segments too
    /// short to score.
    pub si_sdr_db: Option<f64>,
}

/// Server messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State {
        v: u32,
        status: Status,
        gamma_deg: f64,
        theta1_deg: f64,
        theta2_deg: f64,
        half_width_deg: f64,
        scene_loaded: bool,
        sources: Vec<SourceInfo>,
    },
    Boundaries {
        v: u32,
        gamma_deg: f64,
        /// Exact steered boundaries (the wire name is fixed by the
        /// console).
        #[serde(rename = "eq12")]
        steered: BoundaryPair,
        /// Naive linear shift, for comparison.
        linear: BoundaryPair,
    },
    Metrics {
        v: u32,
        t_s: f64,
        gamma_deg: f64,
        per_source: Vec<SourceMetric>,
        delta_pr_db: Option<f64>,
    },
    Summary {
        v: u32,
        duration_s: f64,
        segments: Vec<SegmentSummary>,
    },
    Error {
        v: u32,
        msg: String,
    },
}

impl ServerMessage {
    pub fn error(msg: impl Into<String>) -> Self {
        Self::Error {
            v: PROTOCOL_VERSION,
            msg: msg.into(),
        }
    }

    pub fn boundaries(roi: &Roi, gamma_deg: f64) -> Self {
        let b = steered_boundaries(roi, gamma_deg);
        let (ll, lr) = linear_boundaries(roi, gamma_deg);
        Self::Boundaries {
            v: PROTOCOL_VERSION,
            gamma_deg,
            steered: BoundaryPair {
                phi_l: b.phi_left_deg,
                phi_r: b.phi_right_deg,
                saturated: Some([b.saturated_left, b.saturated_right]),
            },
            linear: BoundaryPair {
                phi_l: ll,
                phi_r: lr,
                saturated: None,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::State { .. } => "state",
            Self::Boundaries { .. } => "boundaries",
            Self::Metrics { .. } => "metrics",
            Self::Summary { .. } => "summary",
            Self::Error { .. } => "error",
        }
    }

    /// Newline-terminated JSON line.
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("server messages serialize");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn parses_client_messages() {
        assert_eq!(
            ClientMessage::parse(r#"{"v":1,"type":"steer","gamma_deg":25}"#).unwrap(),
            ClientMessage::Steer { gamma_deg: 25.0 }
        );
        assert_eq!(ClientMessage::parse(r#"{"type":"start","extra":true}"#).unwrap(), ClientMessage::Start);
        assert_eq!(ClientMessage::parse(r#"{"type":"stop"}"#).unwrap(), ClientMessage::Stop);
        assert_eq!(
            ClientMessage::parse(r#"{"type":"load_scene","scene":"a.json"}"#).unwrap(),
            ClientMessage::LoadScene { scene: json!("a.json") }
        );
    }

    #[test]
    fn rejects_bad_messages() {
        assert_eq!(
            ClientMessage::parse(r#"{"type":"dance"}"#),
            Err(ProtocolError::UnknownType("dance".into()))
        );
        assert_eq!(ClientMessage::parse(r#"{"gamma_deg":1}"#), Err(ProtocolError::MissingType));
        assert!(matches!(ClientMessage::parse("{"), Err(ProtocolError::Json(_))));
        assert_eq!(
            ClientMessage::parse(r#"{"v":2,"type":"start"}"#),
            Err(ProtocolError::Version(2))
        );
        assert!(matches!(
            ClientMessage::parse(r#"{"type":"steer","gamma_deg":"x"}"#),
            Err(ProtocolError::Field { .. })
        ));
    }

    #[test]
    fn boundary_messages() {
        let roi = Roi::default();
        let at0 = serde_json::to_value(ServerMessage::boundaries(&roi, 0.0)).unwrap();
        assert_eq!(at0["type"], "boundaries");
        assert_eq!(at0["eq12"]["phi_l"], 100.0);
        assert!((at0["eq12"]["phi_r"].as_f64().unwrap() - 80.0).abs() < 1e-9);
        assert_eq!(at0["eq12"]["saturated"], json!([false, false]));
        let at25 = serde_json::to_value(ServerMessage::boundaries(&roi, 25.0)).unwrap();
        assert!((at25["eq12"]["phi_l"].as_f64().unwrap() - 75.58).abs() < 0.01);
        assert!((at25["eq12"]["phi_r"].as_f64().unwrap() - 53.40).abs() < 0.01);
        assert_eq!(at25["linear"]["phi_l"], 75.0);
        assert!(at25["linear"].get("saturated").is_none());
    }

    #[test]
    fn lines_are_newline_terminated() {
        let line = ServerMessage::error("x").to_line();
        assert!(line.ends_with('\n'));
        let v: Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v, json!({"type": "error", "v": 1, "msg": "x"}));
    }
}
