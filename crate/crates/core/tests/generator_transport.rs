#![allow(clippy::approx_constant)]

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::time::Instant;

use raicl::prompt::{external_generate, Endpoint, GeneratorRequest, PromptBundle};
use raicl::Error;

const REPLY: &str =
    r#"{"action":"slow down","justification":"red light ahead","speed":3.14,"course":-2.50}"#;

fn bundle() -> PromptBundle {
    PromptBundle {
        system_text: "system".into(),
        icl_blocks: vec!["Example 1:\nA: stop".into()],
        query_block: "Current query:\nQ: why?\nA:".into(),
        tasks: vec![],
        exemplar_ids: vec!["e1".into()],
        query_id: "q7".into(),
    }
}

fn stub_server(reply: &'static str) -> (String, std::thread::JoinHandle<GeneratorRequest>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let handle = std::thread::spawn(move || {
        let (mut sock, _) = listener.accept().unwrap();
        let mut line = String::new();
        BufReader::new(sock.try_clone().unwrap())
            .read_line(&mut line)
            .unwrap();
        sock.write_all(reply.as_bytes()).unwrap();
        sock.write_all(b"\n").unwrap();
        serde_json::from_str(&line).unwrap()
    });
    (addr, handle)
}

#[test]
fn tcp_round_trip() {
    let (addr, server) = stub_server(REPLY);
    let ep = Endpoint::Tcp {
        addr,
        timeout_ms: 5000,
    };
    let a = external_generate(&bundle(), &ep).unwrap();
    assert_eq!(a.action_text, "slow down");
    assert_eq!(a.justification_text, "red light ahead");
    assert_eq!((a.pred_speed, a.pred_course), (3.14, -2.5));
    let req = server.join().unwrap();
    assert_eq!(req.video_ref, "q7");
    assert_eq!(req.prompt, bundle().render());
}

#[test]
fn tcp_malformed_reply_names_field() {
    let (addr, server) =
        stub_server(r#"{"action":"a","justification":"b","speed":1.0,"course":"left"}"#);
    let ep = Endpoint::Tcp {
        addr,
        timeout_ms: 5000,
    };
    match external_generate(&bundle(), &ep).unwrap_err() {
        Error::Response { field, raw, .. } => {
            assert_eq!(field, "course");
            assert!(raw.contains("\"left\""));
        }
        other => panic!("{other:?}"),
    }
    server.join().unwrap();
}

#[test]
fn stdio_round_trip() {
    let ep = Endpoint::Stdio {
        command: "sh".into(),
        args: vec!["-c".into(), format!("read line; echo '{REPLY}'")],
        timeout_ms: 5000,
    };
    let a = external_generate(&bundle(), &ep).unwrap();
    assert_eq!((a.pred_speed, a.pred_course), (3.14, -2.5));
}

#[test]
fn stdio_timeout_is_transport_error() {
    let ep = Endpoint::Stdio {
        command: "sh".into(),
        args: vec!["-c".into(), "sleep 10".into()],
        timeout_ms: 200,
    };
    let t = Instant::now();
    assert!(matches!(
        external_generate(&bundle(), &ep),
        Err(Error::Transport(_))
    ));
    assert!(t.elapsed().as_secs() < 5);
}

#[test]
fn missing_command_is_transport_error() {
    let ep = Endpoint::Stdio {
        command: "/nonexistent/model-server".into(),
        args: vec![],
        timeout_ms: 200,
    };
    assert!(matches!(
        external_generate(&bundle(), &ep),
        Err(Error::Transport(_))
    ));
}
