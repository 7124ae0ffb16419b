//! Token estimation for chunk budgeting.
//!
//! The default estimator is a deterministic approximation, not a real
//! tokenizer: `ceil(utf8_bytes / 4) + words / 8`, where a word is a maximal
//! alphanumeric run. An exact tokenizer can be plugged in through the trait
//! for parity runs against external counters.

/// A deterministic text → token-count function.
pub trait TokenEstimator: Send + Sync {
    /// Identifier recorded in manifests so runs are reproducible.
    fn name(&self) -> &str;

    /// Non-negative token estimate; must be deterministic and return 0 for "".
    fn estimate(&self, text: &str) -> usize;
}

/// Approximate byte-pair-style estimator: `ceil(bytes/4) + words/8`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultEstimator;

impl TokenEstimator for DefaultEstimator {
    fn name(&self) -> &str {
        "approx-bytes-v1"
    }

    fn estimate(&self, text: &str) -> usize {
        let bytes = text.len();
        let mut words = 0usize;
        let mut in_word = false;
        for ch in text.chars() {
            if ch.is_alphanumeric() {
                if !in_word {
                    words += 1;
                    in_word = true;
                }
            } else {
                in_word = false;
            }
        }
        bytes.div_ceil(4) + words / 8
    }
}

/// One byte per token; handy for tests that need exact control over counts.
#[derive(Debug, Clone, Copy, Default)]
pub struct ByteEstimator;

impl TokenEstimator for ByteEstimator {
    fn name(&self) -> &str {
        "bytes"
    }

    fn estimate(&self, text: &str) -> usize {
        text.len()
    }
}

/// Look up a built-in estimator by its recorded name.
pub fn estimator_by_name(name: &str) -> Option<Box<dyn TokenEstimator>> {
    match name {
        "approx-bytes-v1" => Some(Box::new(DefaultEstimator)),
        "bytes" => Some(Box::new(ByteEstimator)),
        _ => None,
    }
}

/// The estimator used when a config names none.
pub fn default_estimator() -> Box<dyn TokenEstimator> {
    Box::new(DefaultEstimator)
}
