use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::path::Path;
use std::thread;

use cdgain::io::{canonical_log, read_log, serve, SessionConfig, WireMessage};
use cdgain::session::run_samples;
use cdgain::stats::{analyze_records, DEFAULT_ALPHA};

const TRANSCRIPT: &str = include_str!("fixtures/golden_zm_transcript.jsonl");
const GOLDEN_LOG: &[u8] = include_bytes!("fixtures/golden_zm_log.jsonl");

fn transcript() -> Vec<WireMessage> {
    TRANSCRIPT.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn in_process_log(msgs: &[WireMessage]) -> Vec<u8> {
    let WireMessage::Hello { config: Some(cfg) } = &msgs[0] else { panic!("transcript must open with a configured hello") };
    let samples: Vec<_> = msgs
        .iter()
        .filter_map(|m| match m {
            WireMessage::Input(s) => Some(*s),
            _ => None,
        })
        .collect();
    let mut engine = cfg.build_engine().unwrap();
    canonical_log(&run_samples(&mut engine, &samples).unwrap())
}

fn start_server(log_dir: &Path) -> std::net::SocketAddr {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let dir = log_dir.to_path_buf();
    thread::spawn(move || serve(listener, SessionConfig::default(), Some(dir)));
    addr
}

/// Sends `text` and returns every reply line until the server closes.
fn exchange(addr: std::net::SocketAddr, text: &str) -> Vec<WireMessage> {
    let mut stream = TcpStream::connect(addr).unwrap();
    let reader = BufReader::new(stream.try_clone().unwrap());
    let sender = {
        let mut s = stream.try_clone().unwrap();
        let text = text.to_owned();
        thread::spawn(move || {
            let _ = s.write_all(text.as_bytes());
            let _ = s.shutdown(Shutdown::Write);
        })
    };
    let replies = reader.lines().map(|l| serde_json::from_str(&l.unwrap()).unwrap()).collect();
    sender.join().unwrap();
    let _ = stream.flush();
    replies
}

#[test]
fn golden_transcript_in_process_matches_committed_log() {
    let log = in_process_log(&transcript());
    assert_eq!(log, GOLDEN_LOG);
    let records = read_log(GOLDEN_LOG).unwrap();
    assert_eq!(records.len(), 10);
    analyze_records(&records, DEFAULT_ALPHA).unwrap();
}

#[test]
fn golden_transcript_over_socket_matches_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let addr = start_server(dir.path());
    let msgs = transcript();
    let replies = exchange(addr, TRANSCRIPT);

    let inputs: Vec<f64> = msgs.iter().filter_map(|m| if let WireMessage::Input(s) = m { Some(s.t) } else { None }).collect();
    let mapped: Vec<f64> = replies.iter().filter_map(|m| if let WireMessage::Mapped(o) = m { Some(o.t) } else { None }).collect();
    assert_eq!(inputs, mapped, "one mapped reply per input, same t");
    assert!(matches!(replies[0], WireMessage::Ack { trials: 10, .. }));

    let Some(WireMessage::SessionEnd { log_ref: Some(path) }) = replies.last() else { panic!("{:?}", replies.last()) };
    let served = std::fs::read(path).unwrap();
    assert_eq!(served, in_process_log(&msgs));
    assert_eq!(served, GOLDEN_LOG);
}

#[test]
fn concurrent_sessions_are_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let addr = start_server(dir.path());
    let handles: Vec<_> = (0..4).map(|_| thread::spawn(move || exchange(addr, TRANSCRIPT))).collect();
    let mut paths = Vec::new();
    for h in handles {
        let replies = h.join().unwrap();
        let Some(WireMessage::SessionEnd { log_ref: Some(p) }) = replies.last() else { panic!() };
        assert_eq!(std::fs::read(p).unwrap(), GOLDEN_LOG);
        paths.push(p.clone());
    }
    paths.sort();
    paths.dedup();
    assert_eq!(paths.len(), 4, "each session gets its own log file");
}

#[test]
fn protocol_errors_close_the_connection() {
    let dir = tempfile::tempdir().unwrap();
    let addr = start_server(dir.path());
    let text = concat!(
        "{\"type\":\"hello\"}\n",
        "{\"type\":\"input\",\"t\":1.0,\"x\":0,\"y\":0,\"z\":0.05,\"touch\":\"none\"}\n",
        "{\"type\":\"input\",\"t\":0.5,\"x\":0,\"y\":0,\"z\":0.05,\"touch\":\"none\"}\n",
        "{\"type\":\"input\",\"t\":2.0,\"x\":0,\"y\":0,\"z\":0.05,\"touch\":\"none\"}\n",
    );
    let replies = exchange(addr, text);
    assert_eq!(replies.len(), 3, "{replies:?}");
    assert!(matches!(&replies[2], WireMessage::Error { message } if message.contains("not after")));
}

#[test]
fn re_hello_switches_method() {
    let dir = tempfile::tempdir().unwrap();
    let addr = start_server(dir.path());
    let text = concat!(
        "{\"type\":\"hello\",\"config\":{\"method\":\"ST\"}}\n",
        "{\"type\":\"hello\",\"config\":{\"method\":\"ZM\",\"trials\":3}}\n",
        "{\"type\":\"session_end\",\"log_ref\":\"../switch\"}\n",
    );
    let replies = exchange(addr, text);
    match &replies[..] {
        [WireMessage::Ack { config: a, .. }, WireMessage::Ack { config: b, trials: 3 }, WireMessage::SessionEnd { log_ref: Some(p) }] => {
            assert_eq!(a.method.to_string(), "ST");
            assert_eq!(b.method.to_string(), "ZM");
            assert_eq!(Path::new(p), dir.path().join("switch.jsonl"));
        }
        other => panic!("{other:?}"),
    }
}
