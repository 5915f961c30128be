//! Remote embedder wire-contract tests against a minimal in-process HTTP
//! server.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use dualmem::embedding::{EmbeddingError, RemoteEmbedder, TextEmbedder};

/// Serve a fixed number of connections, answering each with `body` after
/// `delay`. Returns the endpoint URL.
fn serve(body: &'static str, status: &'static str, delay: Duration, connections: usize) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let addr = listener.local_addr().expect("addr");
    thread::spawn(move || {
        for _ in 0..connections {
            let Ok((mut stream, _)) = listener.accept() else {
                return;
            };
            // Drain the request headers and body enough to respond.
            let mut buf = [0u8; 4096];
            let _ = stream.read(&mut buf);
            thread::sleep(delay);
            let response = format!(
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    format!("http://{addr}/embed")
}

#[test]
fn successful_response_is_parsed_and_normalized() {
    let endpoint = serve(
        r#"{"embedding": [3.0, 0.0, 4.0, 0.0]}"#,
        "200 OK",
        Duration::ZERO,
        1,
    );
    let embedder = RemoteEmbedder::new(endpoint, "test-model", 4, Duration::from_secs(2)).unwrap();
    let vector = embedder.embed("tomato on the table").unwrap();
    let values = vector.values();
    assert_eq!(values.len(), 4);
    assert!((values[0] - 0.6).abs() < 1e-6);
    assert!((values[2] - 0.8).abs() < 1e-6);
    assert!((vector.norm() - 1.0).abs() < 1e-5);
}

#[test]
fn dimension_drift_is_reported() {
    let endpoint = serve(
        r#"{"embedding": [1.0, 2.0]}"#,
        "200 OK",
        Duration::ZERO,
        1,
    );
    let embedder = RemoteEmbedder::new(endpoint, "test-model", 4, Duration::from_secs(2)).unwrap();
    match embedder.embed("tomato") {
        Err(EmbeddingError::DimensionDrift { expected: 4, got: 2 }) => {}
        other => panic!("expected dimension drift, got {other:?}"),
    }
}

#[test]
fn http_error_status_is_reported() {
    let endpoint = serve(
        r#"{"error": "overloaded"}"#,
        "503 Service Unavailable",
        Duration::ZERO,
        1,
    );
    let embedder = RemoteEmbedder::new(endpoint, "test-model", 4, Duration::from_secs(2)).unwrap();
    assert!(matches!(
        embedder.embed("tomato"),
        Err(EmbeddingError::Status(503))
    ));
}

#[test]
fn malformed_body_is_reported() {
    let endpoint = serve("not json at all", "200 OK", Duration::ZERO, 1);
    let embedder = RemoteEmbedder::new(endpoint, "test-model", 4, Duration::from_secs(2)).unwrap();
    assert!(matches!(
        embedder.embed("tomato"),
        Err(EmbeddingError::MalformedBody(_))
    ));
}

#[test]
fn slow_server_times_out() {
    let endpoint = serve(
        r#"{"embedding": [1.0, 0.0, 0.0, 0.0]}"#,
        "200 OK",
        Duration::from_millis(1500),
        1,
    );
    let embedder =
        RemoteEmbedder::new(endpoint, "test-model", 4, Duration::from_millis(100)).unwrap();
    assert!(matches!(embedder.embed("tomato"), Err(EmbeddingError::Timeout)));
}

#[test]
fn retry_once_recovers_after_a_single_failure() {
    // First connection answers 500, second succeeds.
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let addr = listener.local_addr().expect("addr");
    thread::spawn(move || {
        for (status, body) in [
            ("500 Internal Server Error", r#"{"error": "boom"}"#),
            ("200 OK", r#"{"embedding": [0.0, 1.0, 0.0, 0.0]}"#),
        ] {
            let Ok((mut stream, _)) = listener.accept() else {
                return;
            };
            let mut buf = [0u8; 4096];
            let _ = stream.read(&mut buf);
            let response = format!(
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    let endpoint = format!("http://{addr}/embed");

    let no_retry =
        RemoteEmbedder::new(endpoint.clone(), "test-model", 4, Duration::from_secs(2)).unwrap();
    assert!(matches!(
        no_retry.embed("tomato"),
        Err(EmbeddingError::Status(500))
    ));

    // Fresh server for the retrying client so it sees the same sequence.
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let addr = listener.local_addr().expect("addr");
    thread::spawn(move || {
        for (status, body) in [
            ("500 Internal Server Error", r#"{"error": "boom"}"#),
            ("200 OK", r#"{"embedding": [0.0, 1.0, 0.0, 0.0]}"#),
        ] {
            let Ok((mut stream, _)) = listener.accept() else {
                return;
            };
            let mut buf = [0u8; 4096];
            let _ = stream.read(&mut buf);
            let response = format!(
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    let retrying = RemoteEmbedder::new(
        format!("http://{addr}/embed"),
        "test-model",
        4,
        Duration::from_secs(2),
    )
    .unwrap()
    .with_retry_once(true);
    let vector = retrying.embed("tomato").unwrap();
    assert!((vector.values()[1] - 1.0).abs() < 1e-6);
}
