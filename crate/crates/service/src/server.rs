use std::io::{self, BufRead, BufReader, BufWriter, ErrorKind};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use crate::connection::{write_messages, Connection};
use crate::protocol::{Message, Summary};
use crate::service::Service;

const POLL: Duration = Duration::from_millis(50);

/// Threaded TCP front end: one reader and one worker thread per connection.
///
/// The reader timestamps and queues incoming lines; the worker drains the
/// queue in order, so a fast client builds up queue depth instead of losing
/// frames.
#[derive(Debug)]
pub struct Server {
    service: Arc<Service>,
    listener: TcpListener,
    shutdown: Arc<AtomicBool>,
}

impl Server {
    pub fn bind(service: Arc<Service>, addr: impl ToSocketAddrs) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        Ok(Self {
            service,
            listener,
            shutdown: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Setting the flag stops the accept loop; open sessions are closed and
    /// their clients receive a final `end` with the summary.
    pub fn shutdown_handle(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.shutdown)
    }

    /// Serves until shut down and returns the summary of every session that
    /// was opened.
    pub fn run(self) -> io::Result<Vec<Summary>> {
        let mut workers = Vec::new();
        while !self.shutdown.load(Ordering::SeqCst) {
            match self.listener.accept() {
                Ok((stream, _)) => {
                    let service = Arc::clone(&self.service);
                    let shutdown = Arc::clone(&self.shutdown);
                    workers.push(thread::spawn(move || {
                        handle_client(&service, stream, &shutdown)
                    }));
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
                Err(e) => return Err(e),
            }
        }
        let mut summaries = Vec::new();
        for w in workers {
            if let Ok(Ok(Some(s))) = w.join() {
                summaries.push(s);
            }
        }
        summaries.sort_by_key(|s| s.session);
        Ok(summaries)
    }
}

fn spawn_reader(
    stream: TcpStream,
    service: Arc<Service>,
    shutdown: Arc<AtomicBool>,
    depth: Arc<AtomicUsize>,
) -> mpsc::Receiver<(String, Duration)> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut reader = BufReader::new(stream);
        let mut buf = Vec::new();
        loop {
            match reader.read_until(b'\n', &mut buf) {
                Ok(0) => break,
                Ok(_) if buf.ends_with(b"\n") => {
                    let line = String::from_utf8_lossy(&buf).into_owned();
                    buf.clear();
                    depth.fetch_add(1, Ordering::SeqCst);
                    if tx.send((line, service.clock().now())).is_err() {
                        break;
                    }
                }
                Ok(_) => {}
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                    if shutdown.load(Ordering::SeqCst) {
                        break;
                    }
                }
                Err(_) => break,
            }
        }
        if !buf.is_empty() {
            depth.fetch_add(1, Ordering::SeqCst);
            let _ = tx.send((
                String::from_utf8_lossy(&buf).into_owned(),
                service.clock().now(),
            ));
        }
    });
    rx
}

fn handle_client(
    service: &Arc<Service>,
    stream: TcpStream,
    shutdown: &Arc<AtomicBool>,
) -> io::Result<Option<Summary>> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(POLL))?;
    let depth = Arc::new(AtomicUsize::new(0));
    let rx = spawn_reader(
        stream.try_clone()?,
        Arc::clone(service),
        Arc::clone(shutdown),
        Arc::clone(&depth),
    );
    let mut writer = BufWriter::new(stream.try_clone()?);
    let mut conn = Connection::new(service);
    let result = loop {
        match rx.recv_timeout(POLL) {
            Ok((line, arrival)) => {
                let queued = depth.fetch_sub(1, Ordering::SeqCst) - 1;
                let (replies, done) = conn.handle_line(&line, arrival, queued);
                if let Err(e) = write_messages(&mut writer, &replies) {
                    conn.abort();
                    break Err(e);
                }
                if done {
                    break Ok(replies.into_iter().find_map(|m| match m {
                        Message::End { summary } => summary,
                        _ => None,
                    }));
                }
            }
            Err(RecvTimeoutError::Timeout) if !shutdown.load(Ordering::SeqCst) => {}
            Err(_) => {
                let summary = conn.abort();
                if summary.is_some() {
                    let _ = write_messages(
                        &mut writer,
                        &[Message::End {
                            summary: summary.clone(),
                        }],
                    );
                }
                break Ok(summary);
            }
        }
    };
    let _ = stream.shutdown(Shutdown::Both);
    result
}
