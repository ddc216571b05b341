//! NDJSON over raw TCP: one thread per connection, one live session each.

use crate::error::ServerError;
use crate::live::{LiveConfig, LiveSession};
use crate::protocol::ServerMessage;
use crate::store::SessionStore;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};
use wayfind_core::sim::World;

pub const POLL_INTERVAL_MS: u64 = 20;
const MAX_LINE_BYTES: usize = 64 * 1024;

#[derive(Clone)]
pub struct ServerContext {
    pub world: Arc<World>,
    pub store: Arc<SessionStore>,
    pub live: LiveConfig,
}

/// Accept connections until `max_sessions` have been served (forever if `None`).
pub fn serve(listener: TcpListener, ctx: ServerContext, max_sessions: Option<usize>) -> Result<(), ServerError> {
    let mut handles = Vec::new();
    let mut served = 0usize;
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) if e.kind() == ErrorKind::Interrupted => continue,
            Err(e) => return Err(ServerError::io(std::path::Path::new("<listener>"), e)),
        };
        let ctx = ctx.clone();
        handles.push(thread::spawn(move || handle_connection(stream, ctx)));
        served += 1;
        if max_sessions.is_some_and(|m| served >= m) {
            break;
        }
    }
    for h in handles {
        let _ = h.join();
    }
    Ok(())
}

fn send(stream: &mut TcpStream, msgs: &[ServerMessage]) -> bool {
    let mut buf = String::new();
    for m in msgs {
        buf.push_str(&m.to_line());
    }
    buf.is_empty() || stream.write_all(buf.as_bytes()).and_then(|_| stream.flush()).is_ok()
}

/// Drive one connection to completion.
pub fn handle_connection(stream: TcpStream, ctx: ServerContext) {
    let start = Instant::now();
    let now = || start.elapsed().as_millis() as u64;
    let mut session = LiveSession::new(ctx.world, ctx.store, ctx.live);
    let _ = stream.set_nodelay(true);
    if stream.set_read_timeout(Some(Duration::from_millis(POLL_INTERVAL_MS))).is_err() {
        return;
    }
    let Ok(mut out) = stream.try_clone() else { return };
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    while !session.is_closed() {
        let msgs = match reader.read_line(&mut line) {
            Ok(0) => {
                session.disconnect();
                break;
            }
            Ok(_) if line.ends_with('\n') => {
                let text = std::mem::take(&mut line);
                let text = text.trim();
                if text.is_empty() {
                    continue;
                }
                session.handle_line(text, now())
            }
            Ok(_) => continue,
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                if line.len() > MAX_LINE_BYTES {
                    line.clear();
                    session.handle_line("<oversized line>", now())
                } else {
                    session.poll(now())
                }
            }
            Err(_) => {
                session.disconnect();
                break;
            }
        };
        if !send(&mut out, &msgs) {
            session.disconnect();
            break;
        }
    }
    let _ = out.shutdown(std::net::Shutdown::Both);
}
