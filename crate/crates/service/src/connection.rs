use std::io::{self, BufRead, Write};
use std::time::Duration;

use crate::error::ServiceError;
use crate::protocol::{Message, Summary};
use crate::service::{Service, SessionId};

/// Protocol state of one client connection: at most one session at a time.
#[derive(Debug)]
pub struct Connection<'a> {
    service: &'a Service,
    session: Option<SessionId>,
}

impl<'a> Connection<'a> {
    pub fn new(service: &'a Service) -> Self {
        Self {
            service,
            session: None,
        }
    }

    pub fn session(&self) -> Option<SessionId> {
        self.session
    }

    /// Handles one received line. Returns the replies and whether the client
    /// ended the conversation.
    pub fn handle_line(
        &mut self,
        line: &str,
        arrival: Duration,
        queue_depth: usize,
    ) -> (Vec<Message>, bool) {
        if line.trim().is_empty() {
            return (Vec::new(), false);
        }
        match Message::parse(line) {
            Ok(msg) => self.handle(msg, arrival, queue_depth),
            Err(e) => (vec![Message::error(&e)], false),
        }
    }

    pub fn handle(
        &mut self,
        msg: Message,
        arrival: Duration,
        queue_depth: usize,
    ) -> (Vec<Message>, bool) {
        match self.dispatch(msg, arrival, queue_depth) {
            Ok(out) => out,
            Err(e) => (vec![Message::error(&e)], false),
        }
    }

    fn open(&self) -> Result<SessionId, ServiceError> {
        self.session.ok_or(ServiceError::NoSession)
    }

    fn dispatch(
        &mut self,
        msg: Message,
        arrival: Duration,
        queue_depth: usize,
    ) -> Result<(Vec<Message>, bool), ServiceError> {
        match msg {
            Message::Hello { config } => {
                if self.session.is_some() {
                    return Err(ServiceError::SessionOpen);
                }
                let (id, ack) = self.service.open_hello(&config)?;
                self.session = Some(id);
                Ok((vec![Message::Hello { config: ack }], false))
            }
            Message::Frame { t, values } => {
                let id = self.open()?;
                Ok((
                    self.service
                        .handle_frame(id, t, &values, arrival, queue_depth)?,
                    false,
                ))
            }
            Message::Style { name, vec } => {
                let id = self.open()?;
                let ack =
                    self.service
                        .handle_style(id, name.as_deref(), vec.as_deref(), queue_depth)?;
                Ok((vec![ack], false))
            }
            Message::End { .. } => {
                let summary = match self.session.take() {
                    Some(id) => Some(self.service.close_session(id)?),
                    None => None,
                };
                Ok((vec![Message::End { summary }], true))
            }
            other => Err(ServiceError::BadMessage(format!(
                "`{}` messages are sent by the server only",
                message_type(&other)
            ))),
        }
    }

    /// Closes the session without a client `end` (disconnect or shutdown).
    pub fn abort(&mut self) -> Option<Summary> {
        let id = self.session.take()?;
        self.service.close_session(id).ok()
    }
}

fn message_type(m: &Message) -> &'static str {
    match m {
        Message::Hello { .. } => "hello",
        Message::Frame { .. } => "frame",
        Message::Style { .. } => "style",
        Message::Joints { .. } => "joints",
        Message::Stats { .. } => "stats",
        Message::Error { .. } => "error",
        Message::End { .. } => "end",
    }
}

pub(crate) fn write_messages<W: Write>(out: &mut W, msgs: &[Message]) -> io::Result<()> {
    for m in msgs {
        out.write_all(m.to_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Runs one conversation synchronously over any byte stream until the client
/// sends `end` or the input ends. Returns the session summary, if a session
/// was open.
pub fn serve_stream<R: BufRead, W: Write>(
    service: &Service,
    reader: R,
    mut writer: W,
) -> io::Result<Option<Summary>> {
    let mut conn = Connection::new(service);
    for line in reader.lines() {
        let line = line?;
        let arrival = service.clock().now();
        let (replies, done) = conn.handle_line(&line, arrival, 0);
        write_messages(&mut writer, &replies)?;
        if done {
            let summary = replies.iter().find_map(|m| match m {
                Message::End { summary } => summary.clone(),
                _ => None,
            });
            return Ok(summary);
        }
    }
    Ok(conn.abort())
}
