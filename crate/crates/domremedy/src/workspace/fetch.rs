//! Stage 1: retrieve a page (local file or URL) and parse its DOM.

use std::path::Path;

use thiserror::Error;
use ureq::ResponseExt;

use crate::dom::{parse_html, DomDocument, ParseError};

/// Browser-like user agent; some origins refuse unknown clients outright.
const USER_AGENT: &str =
    "Mozilla/5.0 (X11; Linux x86_64) AppleWebKit/537.36 (KHTML, like Gecko) domremedy/0.1";

const TIMEOUT: std::time::Duration = std::time::Duration::from_secs(30);
const MAX_REDIRECTS: u32 = 3;

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("fetch failed for {url}: {cause}")]
    FetchFailed { url: String, cause: String },
    #[error("{url} returned non-HTML content type {content_type:?}")]
    NotHtml { url: String, content_type: String },
    #[error("could not parse {url}: {source}")]
    Unparseable {
        url: String,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A fetched page: raw bytes plus the parsed document with provenance.
#[derive(Debug)]
pub struct FetchedPage {
    pub bytes: Vec<u8>,
    pub document: DomDocument,
    /// Final URL after redirects, or the local path.
    pub final_url: String,
    pub fetched_at: u64,
}

/// Retrieve `source` — an http(s) URL or a local file path — at `now`.
pub fn fetch_page(source: &str, now: u64) -> Result<FetchedPage, FetchError> {
    if source.starts_with("http://") || source.starts_with("https://") {
        fetch_url(source, now)
    } else {
        fetch_file(Path::new(source), now)
    }
}

fn fetch_file(path: &Path, now: u64) -> Result<FetchedPage, FetchError> {
    let bytes = std::fs::read(path)?;
    let url = path.display().to_string();
    let mut document =
        parse_html(&bytes, Some(&url)).map_err(|source| FetchError::Unparseable {
            url: url.clone(),
            source,
        })?;
    document.fetched_at = Some(now);
    Ok(FetchedPage {
        bytes,
        document,
        final_url: url,
        fetched_at: now,
    })
}

fn fetch_url(url: &str, now: u64) -> Result<FetchedPage, FetchError> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .max_redirects(MAX_REDIRECTS)
        .timeout_global(Some(TIMEOUT))
        .save_redirect_history(true)
        .user_agent(USER_AGENT)
        .build()
        .into();

    let mut response = agent.get(url).call().map_err(|e| FetchError::FetchFailed {
        url: url.to_owned(),
        cause: e.to_string(),
    })?;

    if response.status().as_u16() >= 400 {
        return Err(FetchError::FetchFailed {
            url: url.to_owned(),
            cause: format!("status {}", response.status()),
        });
    }

    let content_type = response
        .headers()
        .get("content-type")
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_owned();
    if !content_type.is_empty() && !content_type.to_ascii_lowercase().contains("html") {
        return Err(FetchError::NotHtml {
            url: url.to_owned(),
            content_type,
        });
    }

    let final_url = response.get_uri().to_string();
    let bytes = response
        .body_mut()
        .read_to_vec()
        .map_err(|e| FetchError::FetchFailed {
            url: url.to_owned(),
            cause: e.to_string(),
        })?;

    let mut document =
        parse_html(&bytes, Some(&final_url)).map_err(|source| FetchError::Unparseable {
            url: final_url.clone(),
            source,
        })?;
    document.fetched_at = Some(now);
    Ok(FetchedPage {
        bytes,
        document,
        final_url,
        fetched_at: now,
    })
}
