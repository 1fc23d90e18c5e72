//! Minimal RESP2 client covering the handful of commands the store needs.

use std::time::Duration;

use async_trait::async_trait;
use tokio::io::{AsyncBufReadExt, AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::net::TcpStream;
use tokio::sync::Mutex;

use super::{Backend, StoreError};

const CONNECT_TIMEOUT: Duration = Duration::from_secs(5);
const IO_TIMEOUT: Duration = Duration::from_secs(30);
const POOL_SIZE: usize = 8;
const SCAN_COUNT: &str = "500";
const MGET_CHUNK: usize = 200;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RespValue {
    Simple(String),
    Error(String),
    Integer(i64),
    Bulk(Option<Vec<u8>>),
    Array(Option<Vec<RespValue>>),
}

impl RespValue {
    fn into_string(self) -> Option<String> {
        match self {
            RespValue::Simple(s) => Some(s),
            RespValue::Bulk(Some(b)) => String::from_utf8(b).ok(),
            _ => None,
        }
    }
}

/// Connection parameters parsed from `redis://[[user]:password@]host[:port][/db]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RespConfig {
    pub addr: String,
    pub username: Option<String>,
    pub password: Option<String>,
    pub db: u32,
}

impl RespConfig {
    pub fn parse(url: &str) -> Result<Self, StoreError> {
        let bad = |why: &str| StoreError::Unavailable(format!("bad store url `{url}`: {why}"));
        let rest = url.strip_prefix("redis://").ok_or_else(|| bad("expected redis:// scheme"))?;
        let (auth, rest) = match rest.rsplit_once('@') {
            Some((auth, rest)) => (Some(auth), rest),
            None => (None, rest),
        };
        let (hostport, db) = match rest.split_once('/') {
            Some((h, "")) => (h, 0),
            Some((h, db)) => (h, db.parse().map_err(|_| bad("database must be a number"))?),
            None => (rest, 0),
        };
        if hostport.is_empty() {
            return Err(bad("missing host"));
        }
        let addr = if hostport.rsplit_once(':').is_some_and(|(_, p)| p.parse::<u16>().is_ok()) {
            hostport.to_owned()
        } else {
            format!("{hostport}:6379")
        };
        let (username, password) = match auth {
            None => (None, None),
            Some(a) => match a.split_once(':') {
                Some((u, p)) => ((!u.is_empty()).then(|| u.to_owned()), Some(p.to_owned())),
                None => (None, Some(a.to_owned())),
            },
        };
        Ok(Self { addr, username, password, db })
    }
}

struct Connection {
    reader: BufReader<TcpStream>,
}

impl Connection {
    async fn open(config: &RespConfig) -> Result<Self, StoreError> {
        let stream = tokio::time::timeout(CONNECT_TIMEOUT, TcpStream::connect(&config.addr))
            .await
            .map_err(|_| StoreError::Unavailable(format!("connect to {} timed out", config.addr)))?
            .map_err(|e| StoreError::Unavailable(format!("connect to {}: {e}", config.addr)))?;
        stream.set_nodelay(true).ok();
        let mut conn = Self { reader: BufReader::new(stream) };
        if let Some(password) = &config.password {
            let reply = match &config.username {
                Some(user) => conn.call(&["AUTH", user, password]).await?,
                None => conn.call(&["AUTH", password]).await?,
            };
            expect_ok(reply)?;
        }
        if config.db != 0 {
            expect_ok(conn.call(&["SELECT", &config.db.to_string()]).await?)?;
        }
        Ok(conn)
    }

    async fn call(&mut self, args: &[&str]) -> Result<RespValue, StoreError> {
        tokio::time::timeout(IO_TIMEOUT, self.call_inner(args))
            .await
            .map_err(|_| StoreError::Unavailable("store request timed out".into()))?
    }

    async fn call_inner(&mut self, args: &[&str]) -> Result<RespValue, StoreError> {
        let frame = encode_command(args);
        self.reader.get_mut().write_all(&frame).await.map_err(io_err)?;
        let reply = read_value(&mut self.reader).await?;
        if let RespValue::Error(msg) = &reply {
            return Err(StoreError::Unavailable(format!("store replied with error: {msg}")));
        }
        Ok(reply)
    }
}

fn io_err(e: std::io::Error) -> StoreError {
    StoreError::Unavailable(format!("store connection: {e}"))
}

fn expect_ok(reply: RespValue) -> Result<(), StoreError> {
    match reply {
        RespValue::Simple(s) if s == "OK" => Ok(()),
        other => Err(StoreError::Unavailable(format!("unexpected reply {other:?}"))),
    }
}

pub fn encode_command(args: &[&str]) -> Vec<u8> {
    let mut out = format!("*{}\r\n", args.len()).into_bytes();
    for a in args {
        out.extend_from_slice(format!("${}\r\n", a.len()).as_bytes());
        out.extend_from_slice(a.as_bytes());
        out.extend_from_slice(b"\r\n");
    }
    out
}

async fn read_line<R: AsyncBufReadExt + Unpin>(reader: &mut R) -> Result<String, StoreError> {
    let mut line = String::new();
    let n = reader.read_line(&mut line).await.map_err(io_err)?;
    if n == 0 {
        return Err(StoreError::Unavailable("store closed the connection".into()));
    }
    Ok(line.trim_end_matches(['\r', '\n']).to_owned())
}

fn protocol(what: impl std::fmt::Display) -> StoreError {
    StoreError::Unavailable(format!("protocol error: {what}"))
}

/// Reads one RESP2 value.
pub async fn read_value<R: AsyncBufReadExt + Unpin + Send>(reader: &mut R) -> Result<RespValue, StoreError> {
    // Arrays nest, so keep an explicit stack instead of recursing in async code.
    enum Frame {
        Array { remaining: usize, items: Vec<RespValue> },
    }
    let mut stack: Vec<Frame> = Vec::new();
    loop {
        let line = read_line(reader).await?;
        let (tag, body) = line.split_at(line.len().min(1));
        let mut value = match tag {
            "+" => RespValue::Simple(body.to_owned()),
            "-" => RespValue::Error(body.to_owned()),
            ":" => RespValue::Integer(body.parse().map_err(|_| protocol(&line))?),
            "$" => {
                let len: i64 = body.parse().map_err(|_| protocol(&line))?;
                if len < 0 {
                    RespValue::Bulk(None)
                } else {
                    let mut buf = vec![0u8; len as usize + 2];
                    reader.read_exact(&mut buf).await.map_err(io_err)?;
                    buf.truncate(len as usize);
                    RespValue::Bulk(Some(buf))
                }
            }
            "*" => {
                let len: i64 = body.parse().map_err(|_| protocol(&line))?;
                if len < 0 {
                    RespValue::Array(None)
                } else if len == 0 {
                    RespValue::Array(Some(Vec::new()))
                } else {
                    stack.push(Frame::Array { remaining: len as usize, items: Vec::with_capacity(len as usize) });
                    continue;
                }
            }
            _ => return Err(protocol(format!("unexpected line `{line}`"))),
        };
        loop {
            match stack.last_mut() {
                None => return Ok(value),
                Some(Frame::Array { remaining, items }) => {
                    items.push(value);
                    *remaining -= 1;
                    if *remaining > 0 {
                        break;
                    }
                    let Some(Frame::Array { items, .. }) = stack.pop() else { unreachable!() };
                    value = RespValue::Array(Some(items));
                }
            }
        }
    }
}

/// Backend speaking the Redis wire protocol, with a small connection pool.
/// A connection that errors is dropped and replaced on the next call.
pub struct RespBackend {
    config: RespConfig,
    idle: Mutex<Vec<Connection>>,
}

impl RespBackend {
    pub async fn connect(url: &str) -> Result<Self, StoreError> {
        let config = RespConfig::parse(url)?;
        let backend = Self { config, idle: Mutex::new(Vec::new()) };
        backend.ping().await?;
        Ok(backend)
    }

    async fn call(&self, args: &[&str]) -> Result<RespValue, StoreError> {
        let pooled = self.idle.lock().await.pop();
        let mut conn = match pooled {
            Some(c) => c,
            None => Connection::open(&self.config).await?,
        };
        let reply = conn.call(args).await?;
        let mut idle = self.idle.lock().await;
        if idle.len() < POOL_SIZE {
            idle.push(conn);
        }
        Ok(reply)
    }
}

/// Escapes glob metacharacters for use in a SCAN MATCH pattern.
fn glob_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if matches!(c, '*' | '?' | '[' | ']' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

#[async_trait]
impl Backend for RespBackend {
    async fn set(&self, key: &str, value: &str) -> Result<(), StoreError> {
        expect_ok(self.call(&["SET", key, value]).await?)
    }

    async fn get(&self, key: &str) -> Result<Option<String>, StoreError> {
        match self.call(&["GET", key]).await? {
            RespValue::Bulk(None) => Ok(None),
            other => other.into_string().map(Some).ok_or_else(|| protocol("GET reply is not a string")),
        }
    }

    async fn del(&self, key: &str) -> Result<bool, StoreError> {
        match self.call(&["DEL", key]).await? {
            RespValue::Integer(n) => Ok(n > 0),
            other => Err(protocol(format!("DEL reply {other:?}"))),
        }
    }

    async fn scan_prefix(&self, prefix: &str) -> Result<Vec<(String, String)>, StoreError> {
        let pattern = format!("{}*", glob_escape(prefix));
        let mut cursor = "0".to_owned();
        let mut keys = Vec::new();
        loop {
            let reply = self.call(&["SCAN", &cursor, "MATCH", &pattern, "COUNT", SCAN_COUNT]).await?;
            let RespValue::Array(Some(mut parts)) = reply else {
                return Err(protocol("SCAN reply is not an array"));
            };
            if parts.len() != 2 {
                return Err(protocol("SCAN reply needs two elements"));
            }
            let batch = parts.pop().expect("len checked");
            cursor = parts.pop().and_then(RespValue::into_string).ok_or_else(|| protocol("SCAN cursor"))?;
            if let RespValue::Array(Some(items)) = batch {
                keys.extend(items.into_iter().filter_map(RespValue::into_string));
            }
            if cursor == "0" {
                break;
            }
        }
        keys.retain(|k| k.starts_with(prefix));
        keys.sort();
        keys.dedup();

        let mut out = Vec::with_capacity(keys.len());
        for chunk in keys.chunks(MGET_CHUNK) {
            let mut args = vec!["MGET"];
            args.extend(chunk.iter().map(String::as_str));
            let RespValue::Array(Some(values)) = self.call(&args).await? else {
                return Err(protocol("MGET reply is not an array"));
            };
            // A key deleted between SCAN and MGET comes back as nil; skip it.
            for (key, value) in chunk.iter().zip(values) {
                if let Some(v) = value.into_string() {
                    out.push((key.clone(), v));
                }
            }
        }
        Ok(out)
    }

    async fn ping(&self) -> Result<(), StoreError> {
        match self.call(&["PING"]).await? {
            RespValue::Simple(s) if s == "PONG" => Ok(()),
            other => Err(protocol(format!("PING reply {other:?}"))),
        }
    }
}
