//! Invoke the external auditor (live) or replay a stored report fixture.
//!
//! Live runs shell out to a Lighthouse-compatible binary with exactly the
//! chrome flags headless, no-sandbox, and disable-gpu, reading the JSON
//! report from stdout. Local HTML targets are served over a loopback static
//! server first, since the auditor needs a URL. Replay mode reads a stored
//! report byte-identically so the whole pipeline runs without a browser.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::server::StaticServer;
use super::{parse_auditor_json, AuditReport, Variant};

/// Environment variable overriding the auditor binary path.
pub const AUDITOR_ENV: &str = "DOMREMEDY_AUDITOR";
/// Binary name used when neither config nor environment names one.
pub const DEFAULT_AUDITOR: &str = "lighthouse";
/// Chrome flags the auditor is always launched with.
pub const CHROME_FLAGS: &str = "--headless --no-sandbox --disable-gpu";

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(180);

#[derive(Debug, Clone)]
pub enum AuditorMode {
    /// Run the external auditor binary.
    Live,
    /// Read `<dir>/<page_id>/<variant>.json` instead of auditing.
    Replay(PathBuf),
}

#[derive(Debug, Clone)]
pub struct AuditRunConfig {
    pub auditor_path: Option<PathBuf>,
    pub timeout: Duration,
    pub mode: AuditorMode,
}

impl Default for AuditRunConfig {
    fn default() -> Self {
        AuditRunConfig {
            auditor_path: None,
            timeout: DEFAULT_TIMEOUT,
            mode: AuditorMode::Live,
        }
    }
}

impl AuditRunConfig {
    pub fn replay(dir: impl Into<PathBuf>) -> AuditRunConfig {
        AuditRunConfig {
            mode: AuditorMode::Replay(dir.into()),
            ..Default::default()
        }
    }

    /// Resolution order: explicit config, then `DOMREMEDY_AUDITOR`, then the
    /// conventional binary name.
    pub fn resolved_auditor(&self) -> PathBuf {
        if let Some(p) = &self.auditor_path {
            return p.clone();
        }
        if let Ok(env) = std::env::var(AUDITOR_ENV) {
            if !env.is_empty() {
                return PathBuf::from(env);
            }
        }
        PathBuf::from(DEFAULT_AUDITOR)
    }
}

/// What to audit.
#[derive(Debug, Clone)]
pub enum AuditTarget {
    Url(String),
    File(PathBuf),
}

/// A parsed report plus the raw bytes it came from, stored verbatim.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub report: AuditReport,
    pub raw: Vec<u8>,
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("auditor binary not found at {0}")]
    AuditorNotFound(PathBuf),
    #[error("auditor crashed (exit {code:?}): {stderr_tail}")]
    AuditorCrashed {
        code: Option<i32>,
        stderr_tail: String,
    },
    #[error("auditor timed out after {0:?}")]
    Timeout(Duration),
    #[error("replay fixture missing: {0}")]
    MissingFixture(PathBuf),
    #[error("could not parse auditor report: {0}")]
    BadReport(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Audit `target`, producing a normalized report for (`page_id`, `variant`).
pub fn run_audit(
    target: &AuditTarget,
    page_id: &str,
    variant: Variant,
    config: &AuditRunConfig,
    captured_at: u64,
) -> Result<ReportBundle, AuditError> {
    let raw = match &config.mode {
        AuditorMode::Replay(dir) => read_fixture(dir, page_id, &variant)?,
        AuditorMode::Live => run_live(target, config)?,
    };
    let mut report = parse_auditor_json(&raw, page_id, variant)
        .map_err(|e| AuditError::BadReport(e.to_string()))?;
    report.captured_at = captured_at;
    Ok(ReportBundle { report, raw })
}

fn read_fixture(dir: &Path, page_id: &str, variant: &Variant) -> Result<Vec<u8>, AuditError> {
    let path = dir
        .join(page_id)
        .join(format!("{}.json", variant.file_stem()));
    if !path.exists() {
        return Err(AuditError::MissingFixture(path));
    }
    Ok(std::fs::read(path)?)
}

fn run_live(target: &AuditTarget, config: &AuditRunConfig) -> Result<Vec<u8>, AuditError> {
    // Local files are served from their parent directory on loopback; the
    // server lives until the auditor finishes.
    let (_server, url) = match target {
        AuditTarget::Url(u) => (None, u.clone()),
        AuditTarget::File(path) => {
            let dir = path.parent().ok_or_else(|| {
                AuditError::Io(std::io::Error::other("target file has no parent directory"))
            })?;
            let file = path
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| AuditError::Io(std::io::Error::other("target has no file name")))?;
            let server = StaticServer::serve_dir(dir)?;
            let url = server.url_for(file);
            (Some(server), url)
        }
    };

    let binary = config.resolved_auditor();
    let mut child = Command::new(&binary)
        .arg(&url)
        .arg("--output=json")
        .arg("--output-path=stdout")
        .arg("--quiet")
        .arg(format!("--chrome-flags={CHROME_FLAGS}"))
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => AuditError::AuditorNotFound(binary.clone()),
            _ => AuditError::Io(e),
        })?;

    // Drain both pipes on threads; a multi-megabyte report would otherwise
    // deadlock against the pipe buffer while we poll for exit.
    let mut stdout_pipe = child.stdout.take().expect("piped stdout");
    let mut stderr_pipe = child.stderr.take().expect("piped stderr");
    let out_thread = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stdout_pipe.read_to_end(&mut buf);
        buf
    });
    let err_thread = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr_pipe.read_to_end(&mut buf);
        buf
    });

    let deadline = Instant::now() + config.timeout;
    let status = loop {
        match child.try_wait()? {
            Some(status) => break status,
            None if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(AuditError::Timeout(config.timeout));
            }
            None => std::thread::sleep(Duration::from_millis(50)),
        }
    };

    let stdout = out_thread.join().unwrap_or_default();
    let stderr = err_thread.join().unwrap_or_default();
    if !status.success() {
        let text = String::from_utf8_lossy(&stderr);
        let tail: String = text
            .chars()
            .rev()
            .take(500)
            .collect::<String>()
            .chars()
            .rev()
            .collect();
        return Err(AuditError::AuditorCrashed {
            code: status.code(),
            stderr_tail: tail,
        });
    }
    Ok(stdout)
}
