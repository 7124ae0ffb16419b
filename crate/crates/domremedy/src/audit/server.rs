//! Loopback static file server so the external auditor can measure local
//! HTML: the auditor needs a URL, and serving from 127.0.0.1 keeps the
//! measurement free of network confounds.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use tiny_http::{Header, Response, Server};

pub struct StaticServer {
    root: PathBuf,
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl StaticServer {
    /// Serve `root` on an ephemeral loopback port.
    pub fn serve_dir(root: &Path) -> std::io::Result<StaticServer> {
        let server = Server::http("127.0.0.1:0").map_err(std::io::Error::other)?;
        let addr = match server.server_addr() {
            tiny_http::ListenAddr::IP(a) => a,
            #[allow(unreachable_patterns)]
            _ => return Err(std::io::Error::other("expected an IP listen address")),
        };
        let stop = Arc::new(AtomicBool::new(false));
        let root_buf = root.to_path_buf();
        let thread_stop = stop.clone();
        let thread_root = root_buf.clone();
        let handle = std::thread::spawn(move || {
            while !thread_stop.load(Ordering::Relaxed) {
                match server.recv_timeout(Duration::from_millis(50)) {
                    Ok(Some(request)) => respond(&thread_root, request),
                    Ok(None) => {}
                    Err(_) => break,
                }
            }
        });
        Ok(StaticServer {
            root: root_buf,
            addr,
            stop,
            handle: Some(handle),
        })
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    /// URL for a path relative to the served root.
    pub fn url_for(&self, rel: &str) -> String {
        format!(
            "http://127.0.0.1:{}/{}",
            self.port(),
            rel.trim_start_matches('/')
        )
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

impl Drop for StaticServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn respond(root: &Path, request: tiny_http::Request) {
    let url_path = request.url().split('?').next().unwrap_or("/").to_owned();
    match resolve(root, &url_path) {
        Some(file) => match std::fs::read(&file) {
            Ok(bytes) => {
                let mime = mime_for(&file);
                let header = Header::from_bytes("Content-Type", mime).expect("static header");
                let _ = request.respond(Response::from_data(bytes).with_header(header));
            }
            Err(_) => {
                let _ = request.respond(Response::from_string("not found").with_status_code(404));
            }
        },
        None => {
            let _ = request.respond(Response::from_string("bad path").with_status_code(400));
        }
    }
}

/// Map a URL path onto a file under `root`, refusing traversal.
fn resolve(root: &Path, url_path: &str) -> Option<PathBuf> {
    let mut path = root.to_path_buf();
    for part in url_path.split('/') {
        match part {
            "" | "." => {}
            ".." => return None,
            p => path.push(p),
        }
    }
    if path.is_dir() {
        path.push("index.html");
    }
    Some(path)
}

fn mime_for(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "html" | "htm" => "text/html; charset=utf-8",
        "js" => "application/javascript",
        "css" => "text/css",
        "json" => "application/json",
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "svg" => "image/svg+xml",
        "ico" => "image/x-icon",
        "txt" => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}
