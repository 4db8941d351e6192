//! Remote embedder client against a canned single-connection HTTP stub.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener};
use std::thread;

use praxis_core::embed::{EmbedError, Embedder, HashEmbedder};
use praxis_core::remote::{FallbackEmbedder, RemoteEmbedder};

/// Serve one HTTP connection: consume the request, answer with `status` and
/// `body`. Returns the bound address.
fn stub_server(status: &'static str, body: String) -> SocketAddr {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub");
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        let (mut stream, _) = listener.accept().expect("accept");
        // Read headers, then the content-length body.
        let mut raw = Vec::new();
        let mut buf = [0u8; 4096];
        let header_end = loop {
            let n = stream.read(&mut buf).expect("read request");
            raw.extend_from_slice(&buf[..n]);
            if let Some(pos) = raw.windows(4).position(|w| w == b"\r\n\r\n") {
                break pos + 4;
            }
            if n == 0 {
                return;
            }
        };
        let headers = String::from_utf8_lossy(&raw[..header_end]).to_lowercase();
        let content_length: usize = headers
            .lines()
            .find_map(|l| l.strip_prefix("content-length:").map(|v| v.trim().parse().unwrap()))
            .unwrap_or(0);
        while raw.len() < header_end + content_length {
            let n = stream.read(&mut buf).expect("read body");
            if n == 0 {
                break;
            }
            raw.extend_from_slice(&buf[..n]);
        }
        let response = format!(
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        stream.write_all(response.as_bytes()).expect("write response");
    });
    addr
}

fn endpoint(addr: SocketAddr) -> String {
    format!("http://{addr}/embed")
}

#[test]
fn fixed_vector_comes_back_renormalized() {
    let addr = stub_server("200 OK", r#"{"embeddings": [[3.0, 4.0]]}"#.into());
    let remote = RemoteEmbedder::new(endpoint(addr), 2);
    let got: Vec<_> = Embedder::<f64>::embed_batch(&remote, &["go to checkout"]).unwrap();
    assert_eq!(got.len(), 1);
    let v = got[0].components();
    assert!((v[0] - 0.6).abs() < 1e-12);
    assert!((v[1] - 0.8).abs() < 1e-12);
}

#[test]
fn batch_order_is_preserved() {
    let addr = stub_server(
        "200 OK",
        r#"{"embeddings": [[1.0, 0.0], [0.0, 1.0]]}"#.into(),
    );
    let remote = RemoteEmbedder::new(endpoint(addr), 2);
    let got: Vec<_> = Embedder::<f64>::embed_batch(&remote, &["first", "second"]).unwrap();
    assert_eq!(got[0].components(), &[1.0, 0.0]);
    assert_eq!(got[1].components(), &[0.0, 1.0]);
}

#[test]
fn empty_batch_is_a_contract_violation() {
    let remote = RemoteEmbedder::new("http://127.0.0.1:9/embed", 2);
    assert!(matches!(
        Embedder::<f64>::embed_batch(&remote, &[]),
        Err(EmbedError::EmptyBatch)
    ));
}

#[test]
fn wrong_dimension_is_rejected() {
    let addr = stub_server("200 OK", r#"{"embeddings": [[1.0, 2.0, 3.0]]}"#.into());
    let remote = RemoteEmbedder::new(endpoint(addr), 2);
    assert!(matches!(
        Embedder::<f64>::embed_batch(&remote, &["text"]),
        Err(EmbedError::DimensionMismatch {
            expected: 2,
            got: 3
        })
    ));
}

#[test]
fn wrong_vector_count_is_malformed() {
    let addr = stub_server("200 OK", r#"{"embeddings": [[1.0, 0.0]]}"#.into());
    let remote = RemoteEmbedder::new(endpoint(addr), 2);
    assert!(matches!(
        Embedder::<f64>::embed_batch(&remote, &["a", "b"]),
        Err(EmbedError::MalformedResponse(_))
    ));
}

#[test]
fn garbage_body_is_malformed() {
    let addr = stub_server("200 OK", "this is not json".into());
    let remote = RemoteEmbedder::new(endpoint(addr), 2);
    assert!(matches!(
        Embedder::<f64>::embed_batch(&remote, &["text"]),
        Err(EmbedError::MalformedResponse(_))
    ));
}

#[test]
fn non_finite_component_is_malformed() {
    let addr = stub_server("200 OK", r#"{"embeddings": [[1.0, null]]}"#.into());
    let remote = RemoteEmbedder::new(endpoint(addr), 2);
    assert!(matches!(
        Embedder::<f64>::embed_batch(&remote, &["text"]),
        Err(EmbedError::MalformedResponse(_))
    ));
}

#[test]
fn http_error_status_is_transport() {
    let addr = stub_server("500 Internal Server Error", "{}".into());
    let remote = RemoteEmbedder::new(endpoint(addr), 2);
    assert!(matches!(
        Embedder::<f64>::embed_batch(&remote, &["text"]),
        Err(EmbedError::Transport(_))
    ));
}

#[test]
fn refused_connection_is_transport() {
    // Bind then drop, so the port is very likely closed.
    let addr = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let remote = RemoteEmbedder::new(endpoint(addr), 2);
    assert!(matches!(
        Embedder::<f64>::embed_batch(&remote, &["text"]),
        Err(EmbedError::Transport(_))
    ));
}

#[test]
fn fallback_uses_backup_on_remote_failure() {
    let addr = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let remote = RemoteEmbedder::new(endpoint(addr), 64);
    let backup = HashEmbedder::<f64>::new(64);
    let fallback = FallbackEmbedder::new(remote, HashEmbedder::<f64>::new(64));
    let via_fallback = fallback.embed_batch(&["go to checkout"]).unwrap();
    let direct = backup.embed_batch(&["go to checkout"]).unwrap();
    assert_eq!(via_fallback, direct);
    // Contract violations are not masked by the fallback.
    assert!(matches!(
        fallback.embed_batch(&[]),
        Err(EmbedError::EmptyBatch)
    ));
}
