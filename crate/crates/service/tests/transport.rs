use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use motion_stream::experiment::synthetic_motion;
use motion_stream_service::{
    serve_stream, ManualClock, Message, Server, Service, ServiceConfig, SystemClock,
};

fn script(frames: usize, end: bool) -> String {
    let seq = synthetic_motion(frames, 12, 20.0, 8).unwrap();
    let mut lines = vec![r#"{"type":"hello","config":{"style":"heavy"}}"#.to_string()];
    for (t, f) in seq.frames().enumerate() {
        lines.push(
            Message::Frame {
                t: t as u64,
                values: f.to_vec(),
            }
            .to_line(),
        );
    }
    if end {
        lines.push(r#"{"type":"end"}"#.into());
    }
    lines.join("\n") + "\n"
}

fn replies(text: &str) -> Vec<Message> {
    text.lines().map(|l| Message::parse(l).unwrap()).collect()
}

#[test]
fn in_memory_conversation() {
    let svc = Service::new(
        ServiceConfig::default(),
        Arc::new(ManualClock::new(Duration::from_millis(1))),
    )
    .unwrap();
    let mut out = Vec::new();
    let summary = serve_stream(&svc, script(68, true).as_bytes(), &mut out)
        .unwrap()
        .unwrap();
    let msgs = replies(std::str::from_utf8(&out).unwrap());
    let kinds: Vec<&str> = msgs
        .iter()
        .map(|m| match m {
            Message::Hello { .. } => "hello",
            Message::Joints { .. } => "joints",
            Message::Stats { .. } => "stats",
            Message::End { .. } => "end",
            _ => "other",
        })
        .collect();
    assert_eq!(
        kinds,
        ["hello", "joints", "stats", "joints", "stats", "joints", "stats", "end"]
    );
    assert_eq!(
        (summary.frames_in, summary.frames_out, summary.strides),
        (68, 68, 3)
    );
    assert_eq!(summary.max_stride_latency_ms, 1.0);
}

#[test]
fn input_ending_without_end_closes_the_session() {
    let svc = Service::new(ServiceConfig::default(), Arc::new(SystemClock::default())).unwrap();
    let mut out = Vec::new();
    let summary = serve_stream(&svc, script(64, false).as_bytes(), &mut out)
        .unwrap()
        .unwrap();
    assert_eq!(summary.frames_out, 64);
    assert!(svc.open_sessions().is_empty());
}

fn start() -> (
    std::net::SocketAddr,
    Arc<std::sync::atomic::AtomicBool>,
    thread::JoinHandle<Vec<motion_stream_service::Summary>>,
) {
    let svc =
        Arc::new(Service::new(ServiceConfig::default(), Arc::new(SystemClock::default())).unwrap());
    let server = Server::bind(svc, "127.0.0.1:0").unwrap();
    let addr = server.local_addr().unwrap();
    let stop = server.shutdown_handle();
    (addr, stop, thread::spawn(move || server.run().unwrap()))
}

#[test]
fn tcp_sessions_queue_without_loss() {
    let (addr, stop, handle) = start();
    let clients: Vec<_> = (0..3)
        .map(|_| {
            thread::spawn(move || {
                let mut stream = TcpStream::connect(addr).unwrap();
                stream
                    .write_all(script(60 + 4 * 40, true).as_bytes())
                    .unwrap();
                let reader = BufReader::new(stream);
                reader
                    .lines()
                    .map(|l| Message::parse(&l.unwrap()).unwrap())
                    .collect::<Vec<_>>()
            })
        })
        .collect();
    let outputs: Vec<Vec<Message>> = clients.into_iter().map(|c| c.join().unwrap()).collect();
    for msgs in &outputs {
        let mut next = 0;
        for m in msgs {
            if let Message::Joints { t0, frames } = m {
                assert_eq!(*t0, next);
                next += frames.len();
            }
        }
        assert_eq!(next, 220);
        assert!(
            matches!(msgs.last(), Some(Message::End { summary: Some(s) }) if s.frames_in == 220)
        );
    }
    let joints = |msgs: &[Message]| {
        msgs.iter()
            .filter(|m| matches!(m, Message::Joints { .. }))
            .cloned()
            .collect::<Vec<_>>()
    };
    assert_eq!(joints(&outputs[0]), joints(&outputs[1]));
    stop.store(true, Ordering::SeqCst);
    assert_eq!(handle.join().unwrap().len(), 3);
}

#[test]
fn shutdown_sends_final_summaries() {
    let (addr, stop, handle) = start();
    let mut stream = TcpStream::connect(addr).unwrap();
    stream.write_all(script(64, false).as_bytes()).unwrap();
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut seen = 0;
    let mut line = String::new();
    while seen < 64 {
        line.clear();
        reader.read_line(&mut line).unwrap();
        if let Message::Joints { frames, .. } = Message::parse(&line).unwrap() {
            seen += frames.len();
        }
    }
    stop.store(true, Ordering::SeqCst);
    let summaries = handle.join().unwrap();
    assert_eq!(summaries.len(), 1);
    assert_eq!(summaries[0].frames_out, 64);
    let rest: Vec<Message> = reader
        .lines()
        .map(|l| Message::parse(&l.unwrap()).unwrap())
        .collect();
    assert!(
        matches!(rest.last(), Some(Message::End { summary: Some(s) }) if s.frames_in == 64),
        "{rest:?}"
    );
}
