use std::fmt;
use std::path::Path;

use riloss_core::Error as CoreError;
use serde::Serialize;

/// Failure of a harness command, serialisable for the CLI's error channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnessError {
    pub kind: String,
    /// Dotted config key the failure traces back to, when there is one.
    pub key: Option<String>,
    pub message: String,
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn new(kind: &str, key: Option<&str>, message: impl Into<String>) -> Self {
        HarnessError {
            kind: kind.to_string(),
            key: key.map(str::to_string),
            message: message.into(),
        }
    }

    pub fn config(key: &str, message: impl Into<String>) -> Self {
        Self::new("config", Some(key), message)
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        Self::new("io", None, format!("{}: {err}", path.display()))
    }

    /// Wraps a core error raised while handling config section `section`.
    pub fn from_core(section: &str, err: CoreError) -> Self {
        let key = match &err {
            CoreError::InvalidParameter { name, .. } => format!("{section}.{name}"),
            CoreError::Io { .. }
            | CoreError::MissingHeader { .. }
            | CoreError::RaggedRow { .. }
            | CoreError::EmptyCell { .. }
            | CoreError::NonNumeric { .. }
            | CoreError::Csv { .. }
            | CoreError::ZeroVariance(_) => "data.path".to_string(),
            CoreError::TooShort(_) => "data.lookback".to_string(),
            _ => section.to_string(),
        };
        HarnessError {
            kind: err.kind().to_string(),
            key: Some(key),
            message: err.to_string(),
        }
    }

    /// `{"error": {...}}`, one line.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(key) => write!(f, "{} ({key}): {}", self.kind, self.message),
            None => write!(f, "{}: {}", self.kind, self.message),
        }
    }
}

impl std::error::Error for HarnessError {}

/// `map_err` adapter: `.map_err(at("train"))`.
pub fn at(section: &'static str) -> impl Fn(CoreError) -> HarnessError {
    move |e| HarnessError::from_core(section, e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invalid_parameter_keeps_its_name() {
        let core = CoreError::InvalidParameter {
            name: "learning_rate",
            reason: "must be > 0".into(),
        };
        let e = HarnessError::from_core("train", core);
        assert_eq!(e.key.as_deref(), Some("train.learning_rate"));
        assert_eq!(e.kind, "invalid_parameter");
        let v: serde_json::Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(v["error"]["key"], "train.learning_rate");
    }

    #[test]
    fn data_errors_point_at_the_path() {
        let e = HarnessError::from_core("data", CoreError::ZeroVariance("x0".into()));
        assert_eq!(e.key.as_deref(), Some("data.path"));
    }
}
