use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use framegraph::embedding::{EmbedError, EmbeddingProvider, RemoteEmbedder, RemoteEmbedderConfig};
use framegraph::llm::{
    Completer, CompletionClient, CompletionRequest, HttpCompletionClient, HttpCompletionConfig,
    LlmError, RequestShape,
};

struct Seen {
    authorization: Option<String>,
    body: Value,
}

/// Serve the scripted `(status, body)` replies, one per connection.
fn serve(replies: Vec<(u16, String)>) -> (String, mpsc::Receiver<Seen>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/endpoint", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            let mut authorization = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap_or((line, ""));
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => length = value.trim().parse().unwrap(),
                    "authorization" => authorization = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            let _ = tx.send(Seen {
                authorization,
                body: serde_json::from_slice(&buf).unwrap_or(Value::Null),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, rx)
}

fn client(url: String, shape: RequestShape, token: Option<&str>) -> HttpCompletionClient {
    HttpCompletionClient::new(HttpCompletionConfig {
        url,
        model: "test-model".into(),
        token: token.map(str::to_string),
        timeout: Duration::from_secs(5),
        shape,
    })
}

fn request() -> CompletionRequest {
    CompletionRequest::new("Test\n[a; b; c; d]").unwrap()
}

#[test]
fn chat_shape_round_trip() {
    let reply = json!({"choices": [{"message": {"role": "assistant", "content": "[x; y; z; w]"}}]});
    let (url, seen) = serve(vec![(200, reply.to_string())]);
    let c = client(url, RequestShape::Chat, Some("secret"));
    assert_eq!(c.complete(&request()).unwrap().text, "[x; y; z; w]");
    let s = seen.recv().unwrap();
    assert_eq!(s.authorization.as_deref(), Some("Bearer secret"));
    assert_eq!(s.body["model"], "test-model");
    assert_eq!(s.body["messages"][0]["content"], "Test\n[a; b; c; d]");
    assert_eq!(s.body["temperature"], 0.0);
}

#[test]
fn completions_shape_round_trip() {
    let (url, seen) = serve(vec![(
        200,
        json!({"choices": [{"text": "done"}]}).to_string(),
    )]);
    let c = client(url, RequestShape::Completions, None);
    let r = request().with_model("other");
    assert_eq!(c.complete(&r).unwrap().text, "done");
    let s = seen.recv().unwrap();
    assert_eq!(s.authorization, None);
    assert_eq!(s.body["prompt"], "Test\n[a; b; c; d]");
    assert_eq!(s.body["model"], "other");
}

#[test]
fn status_codes_map_to_error_kinds() {
    let (url, _seen) = serve(vec![
        (401, "{}".into()),
        (429, "{}".into()),
        (503, "{}".into()),
        (400, "{}".into()),
        (200, "not json".into()),
        (200, "{}".into()),
    ]);
    let c = client(url, RequestShape::Chat, None);
    assert!(matches!(
        c.complete(&request()),
        Err(LlmError::Auth { status: 401, .. })
    ));
    assert!(matches!(
        c.complete(&request()),
        Err(LlmError::Transient {
            status: Some(429),
            ..
        })
    ));
    assert!(matches!(
        c.complete(&request()),
        Err(LlmError::Transient {
            status: Some(503),
            ..
        })
    ));
    assert!(matches!(
        c.complete(&request()),
        Err(LlmError::Remote { status: 400, .. })
    ));
    assert!(matches!(
        c.complete(&request()),
        Err(LlmError::Remote { status: 200, .. })
    ));
    assert!(matches!(
        c.complete(&request()),
        Err(LlmError::Remote { status: 200, .. })
    ));
}

#[test]
fn unreachable_host_is_transient() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let c = client(
        format!("http://127.0.0.1:{port}/x"),
        RequestShape::Chat,
        None,
    );
    let err = c.complete(&request()).unwrap_err();
    assert!(err.is_retryable(), "{err}");
}

#[test]
fn completer_retries_transient_failures() {
    let ok = json!({"choices": [{"message": {"content": "fine"}}]}).to_string();
    let (url, _seen) = serve(vec![(503, "{}".into()), (500, "{}".into()), (200, ok)]);
    let mut completer = Completer::new(Box::new(client(url, RequestShape::Chat, None)));
    completer.backoff = Duration::from_millis(1);
    assert_eq!(completer.complete(&request()).unwrap().text, "fine");
}

#[test]
fn completer_gives_up_after_three_attempts() {
    let (url, _seen) = serve(vec![
        (503, "{}".into()),
        (503, "{}".into()),
        (503, "{}".into()),
    ]);
    let mut completer = Completer::new(Box::new(client(url, RequestShape::Chat, None)));
    completer.backoff = Duration::from_millis(1);
    assert!(matches!(
        completer.complete(&request()),
        Err(LlmError::Exhausted { attempts: 3, .. })
    ));
}

#[test]
fn completer_does_not_retry_auth_errors() {
    let (url, _seen) = serve(vec![(403, "{}".into())]);
    let completer = Completer::new(Box::new(client(url, RequestShape::Chat, None)));
    assert!(matches!(
        completer.complete(&request()),
        Err(LlmError::Auth { status: 403, .. })
    ));
}

fn embedder(url: String) -> RemoteEmbedder {
    RemoteEmbedder::new(RemoteEmbedderConfig {
        url,
        model: "emb".into(),
        token: Some("t".into()),
        timeout: Duration::from_secs(5),
    })
}

#[test]
fn remote_embedder_round_trip() {
    let reply = json!({"data": [{"embedding": [1.0, 0.0, 0.0]}, {"embedding": [0.0, 2.0, 0.0]}]});
    let (url, seen) = serve(vec![(200, reply.to_string())]);
    let e = embedder(url);
    let v = e.embed_batch(&["a".into(), "b".into()]).unwrap();
    assert_eq!(v[1].values(), &[0.0, 2.0, 0.0]);
    assert_eq!(e.dimension(), Some(3));
    assert_eq!(e.id(), "remote:emb");
    let s = seen.recv().unwrap();
    assert_eq!(s.body["input"], json!(["a", "b"]));
    assert_eq!(s.authorization.as_deref(), Some("Bearer t"));
}

#[test]
fn remote_embedder_errors() {
    let one = json!({"data": [{"embedding": [1.0, 0.0]}]}).to_string();
    let (url, _seen) = serve(vec![(500, "boom".into()), (404, "nope".into()), (200, one)]);
    let e = embedder(url);
    let texts = vec!["a".to_string(), "b".to_string()];
    assert!(e.embed_batch(&texts).unwrap_err().is_retryable());
    let err = e.embed_batch(&texts).unwrap_err();
    assert!(matches!(
        err,
        EmbedError::Remote {
            retryable: false,
            status: Some(404),
            ..
        }
    ));
    let err = e.embed_batch(&texts).unwrap_err();
    assert!(
        matches!(
            err,
            EmbedError::Remote {
                retryable: false,
                ..
            }
        ),
        "{err}"
    );
    assert!(matches!(
        e.embed_batch(&["".into()]),
        Err(EmbedError::EmptyText)
    ));
}
