//! Exercises the end-of-day REST client against a local stub server.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::NaiveDate;
use spillover_core::{DateRange, EodClient, Error};

struct StubServer {
    addr: SocketAddr,
    requests: Arc<AtomicUsize>,
    paths: Arc<Mutex<Vec<String>>>,
}

impl StubServer {
    fn endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }

    fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    fn recorded_paths(&self) -> Vec<String> {
        self.paths.lock().unwrap().clone()
    }
}

/// Start a single-threaded HTTP stub. The handler maps
/// `(path_with_query, request_index)` to `(status, body)`.
fn start_stub<F>(handler: F) -> StubServer
where
    F: Fn(&str, usize) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub server");
    let addr = listener.local_addr().unwrap();
    let requests = Arc::new(AtomicUsize::new(0));
    let paths = Arc::new(Mutex::new(Vec::new()));
    let requests_bg = Arc::clone(&requests);
    let paths_bg = Arc::clone(&paths);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            if reader.read_line(&mut request_line).is_err() {
                continue;
            }
            // Drain headers.
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(_) if line.trim().is_empty() => break,
                    Ok(0) | Err(_) => break,
                    _ => {}
                }
            }
            let path = request_line
                .split_whitespace()
                .nth(1)
                .unwrap_or("")
                .to_string();
            let index = requests_bg.fetch_add(1, Ordering::SeqCst);
            paths_bg.lock().unwrap().push(path.clone());
            let (status, body) = handler(&path, index);
            let reason = match status {
                200 => "OK",
                404 => "Not Found",
                _ => "Error",
            };
            let response = format!(
                "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\n\
                 Content-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    StubServer {
        addr,
        requests,
        paths,
    }
}

fn bars_json(symbol_scale: f64) -> String {
    let days = ["2024-01-01", "2024-01-02", "2024-01-03", "2024-01-04", "2024-01-05"];
    let items: Vec<String> = days
        .iter()
        .enumerate()
        .map(|(i, d)| {
            format!(
                "{{\"date\":\"{d}\",\"close\":0,\"adjusted_close\":{}}}",
                symbol_scale + i as f64
            )
        })
        .collect();
    format!("[{}]", items.join(","))
}

fn range() -> DateRange {
    DateRange {
        from: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
        to: NaiveDate::from_ymd_opt(2024, 1, 5).unwrap(),
    }
}

fn symbols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

#[test]
fn two_symbols_merge_into_a_five_by_two_panel() {
    let server = start_stub(|path, _| {
        if path.starts_with("/eod/AAA") {
            (200, bars_json(100.0))
        } else if path.starts_with("/eod/BBB") {
            (200, bars_json(50.0))
        } else {
            (404, "{}".into())
        }
    });
    let client = EodClient::new(server.endpoint(), "secret");
    let fetched = client.fetch(&symbols(&["AAA", "BBB"]), range()).unwrap();
    assert!(fetched.warnings.is_empty());
    let panel = fetched.panel;
    assert_eq!(panel.values().nrows(), 5);
    assert_eq!(panel.values().ncols(), 2);
    assert_eq!(panel.assets(), &["AAA".to_string(), "BBB".to_string()]);
    assert_eq!(panel.values()[(0, 0)], 100.0);
    assert_eq!(panel.values()[(4, 1)], 54.0);

    for path in server.recorded_paths() {
        assert!(path.contains("from=2024-01-01"));
        assert!(path.contains("to=2024-01-05"));
        assert!(path.contains("api_token=secret"));
        assert!(path.contains("fmt=json"));
    }
}

#[test]
fn missing_symbol_is_skipped_with_a_warning() {
    let server = start_stub(|path, _| {
        if path.starts_with("/eod/GONE") {
            (404, "{}".into())
        } else {
            (200, bars_json(10.0))
        }
    });
    let client = EodClient::new(server.endpoint(), "secret");
    let fetched = client
        .fetch(&symbols(&["AAA", "GONE", "BBB"]), range())
        .unwrap();
    assert_eq!(fetched.warnings.len(), 1);
    assert!(fetched.warnings[0].contains("GONE"));
    assert_eq!(fetched.panel.values().ncols(), 2);
    assert_eq!(fetched.panel.values().nrows(), 5);
}

#[test]
fn all_missing_symbols_fail_the_fetch() {
    let server = start_stub(|_, _| (404, "{}".into()));
    let client = EodClient::new(server.endpoint(), "secret");
    assert!(matches!(
        client.fetch(&symbols(&["X", "Y"]), range()),
        Err(Error::AllSymbolsFailed(_))
    ));
}

#[test]
fn transient_server_error_is_retried() {
    let server = start_stub(|_, index| {
        if index == 0 {
            (500, "{}".into())
        } else {
            (200, bars_json(1.0))
        }
    });
    let client = EodClient::new(server.endpoint(), "secret")
        .with_retries(2, Duration::from_millis(5));
    let fetched = client.fetch(&symbols(&["AAA"]), range()).unwrap();
    assert_eq!(fetched.panel.values().nrows(), 5);
    assert_eq!(server.request_count(), 2);
}

#[test]
fn persistent_failure_errors_after_bounded_retries() {
    let server = start_stub(|_, _| (500, "{}".into()));
    let client = EodClient::new(server.endpoint(), "secret")
        .with_retries(2, Duration::from_millis(1));
    assert!(matches!(
        client.fetch(&symbols(&["AAA"]), range()),
        Err(Error::Http(_))
    ));
    assert_eq!(server.request_count(), 3);
}

#[test]
fn cache_makes_reruns_offline_and_identical() {
    let server = start_stub(|path, _| {
        if path.starts_with("/eod/AAA") {
            (200, bars_json(7.0))
        } else {
            (200, bars_json(3.0))
        }
    });
    let dir = tempfile::tempdir().unwrap();
    let client = EodClient::new(server.endpoint(), "secret").with_cache_dir(dir.path());
    let first = client.fetch(&symbols(&["AAA", "BBB"]), range()).unwrap();
    let after_first = server.request_count();
    let second = client.fetch(&symbols(&["AAA", "BBB"]), range()).unwrap();
    assert_eq!(server.request_count(), after_first);
    assert_eq!(first.panel, second.panel);
    let cached: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(cached.len(), 2);
}
