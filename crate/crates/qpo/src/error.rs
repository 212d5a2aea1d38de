//! Crate-wide error type.
//!
//! Numerical routines fail loudly rather than propagating NaN: a non-finite
//! network output, importance ratio, or parameter vector is an error, not a
//! value. Harness code maps [`Error::Diverged`] onto a dedicated process exit
//! code so scripted runs can distinguish bad configs from blown-up training.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Vector or matrix length does not match what the operation requires.
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// A tape was replayed against parameters that changed since `forward`.
    StaleTape,
    /// A function evaluation produced a non-finite value.
    NonFinite { what: String },
    /// Finite differencing hit non-finite evaluations at these coordinates.
    NonFiniteEval { coords: Vec<usize> },
    /// An action fell outside the head's or environment's support.
    InvalidAction { reason: String },
    /// An operation that needs samples received none.
    EmptyBatch,
    /// Stored log-probabilities disagree with the policy they claim to come from.
    OffPolicy {
        episode: usize,
        step: usize,
        delta: f64,
    },
    /// An importance ratio came out non-finite at this step.
    NonFiniteRatio { step: usize },
    /// A failure occurred at a specific step inside an episode.
    InEpisode { step: usize, source: Box<Error> },
    /// Price data is malformed; message names the offending row.
    PriceData { message: String },
    /// A ticker is missing quotes for dates present elsewhere in the file.
    PriceGaps { gaps: Vec<(String, String)> },
    /// Configuration is invalid or inconsistent.
    Config { message: String },
    /// Learning curves do not share a checkpoint grid.
    GridMismatch,
    /// Training diverged (non-finite returns or parameters) at this episode.
    Diverged { episode: u64, message: String },
    Io(std::io::Error),
    /// Serialization or file-format failure (JSON, TOML, CSV).
    Format { message: String },
}

impl Error {
    pub fn config(message: impl Into<String>) -> Self {
        Error::Config {
            message: message.into(),
        }
    }

    pub fn format(message: impl Into<String>) -> Self {
        Error::Format {
            message: message.into(),
        }
    }

    pub fn non_finite(what: impl Into<String>) -> Self {
        Error::NonFinite { what: what.into() }
    }

    /// Wraps an error with the episode step it occurred at.
    pub fn at_step(step: usize, source: Error) -> Self {
        Error::InEpisode {
            step,
            source: Box::new(source),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch {
                what,
                expected,
                got,
            } => write!(f, "shape mismatch for {what}: expected {expected}, got {got}"),
            Error::StaleTape => write!(
                f,
                "tape is stale: parameters changed between forward and backward"
            ),
            Error::NonFinite { what } => write!(f, "non-finite value in {what}"),
            Error::NonFiniteEval { coords } => write!(
                f,
                "finite differencing produced non-finite evaluations at {} coordinate(s), first: {:?}",
                coords.len(),
                &coords[..coords.len().min(5)]
            ),
            Error::InvalidAction { reason } => write!(f, "invalid action: {reason}"),
            Error::EmptyBatch => write!(f, "empty batch"),
            Error::OffPolicy {
                episode,
                step,
                delta,
            } => write!(
                f,
                "batch is off-policy: episode {episode} step {step} log-prob differs by {delta:e}"
            ),
            Error::NonFiniteRatio { step } => {
                write!(f, "non-finite importance ratio at step {step}")
            }
            Error::InEpisode { step, source } => write!(f, "at step {step}: {source}"),
            Error::PriceData { message } => write!(f, "bad price data: {message}"),
            Error::PriceGaps { gaps } => {
                let shown: Vec<String> = gaps
                    .iter()
                    .take(8)
                    .map(|(t, d)| format!("{t} missing {d}"))
                    .collect();
                write!(
                    f,
                    "price series have {} gap(s): {}{}",
                    gaps.len(),
                    shown.join(", "),
                    if gaps.len() > 8 { ", ..." } else { "" }
                )
            }
            Error::Config { message } => write!(f, "config error: {message}"),
            Error::GridMismatch => write!(
                f,
                "learning curves do not share a checkpoint grid; cannot aggregate"
            ),
            Error::Diverged { episode, message } => {
                write!(f, "training diverged at episode {episode}: {message}")
            }
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Format { message } => write!(f, "format error: {message}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::InEpisode { source, .. } => Some(source),
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::format(format!("json: {e}"))
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::format(format!("csv: {e}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_includes_context() {
        let e = Error::ShapeMismatch {
            what: "input",
            expected: 3,
            got: 5,
        };
        assert_eq!(e.to_string(), "shape mismatch for input: expected 3, got 5");

        let nested = Error::at_step(7, Error::non_finite("network output"));
        assert_eq!(nested.to_string(), "at step 7: non-finite value in network output");
    }

    #[test]
    fn gap_display_caps_listing() {
        let gaps: Vec<(String, String)> = (0..20)
            .map(|i| ("TICK".to_string(), format!("2020-01-{:02}", i + 1)))
            .collect();
        let msg = Error::PriceGaps { gaps }.to_string();
        assert!(msg.contains("20 gap(s)"));
        assert!(msg.ends_with("..."));
    }
}
