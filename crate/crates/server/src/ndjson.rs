use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use moralgrid_core::protocol::{Session, SessionDefaults};
use moralgrid_core::scenario::Catalogue;
use tokio::io::{AsyncBufRead, AsyncBufReadExt, AsyncWrite, AsyncWriteExt, BufReader};
use tokio::net::TcpListener;

/// Where the line protocol listens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transport {
    Stdio,
    /// Port 0 picks a free port.
    Tcp(u16),
}

impl FromStr for Transport {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "stdio" {
            return Ok(Transport::Stdio);
        }
        match s.strip_prefix("tcp:") {
            Some(port) => port
                .parse()
                .map(Transport::Tcp)
                .map_err(|_| format!("bad port in '{s}'")),
            None => Err(format!("unknown transport '{s}'; use stdio or tcp:PORT")),
        }
    }
}

impl fmt::Display for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transport::Stdio => f.write_str("stdio"),
            Transport::Tcp(p) => write!(f, "tcp:{p}"),
        }
    }
}

/// Answers every request line with one response line until EOF or `close`.
pub async fn serve_lines<R, W>(reader: R, mut writer: W, mut session: Session) -> std::io::Result<()>
where
    R: AsyncBufRead + Unpin,
    W: AsyncWrite + Unpin,
{
    let mut lines = reader.lines();
    while let Some(line) = lines.next_line().await? {
        if line.trim().is_empty() {
            continue;
        }
        let mut out = session.handle_line(&line);
        out.push('\n');
        writer.write_all(out.as_bytes()).await?;
        writer.flush().await?;
        if session.is_closed() {
            break;
        }
    }
    Ok(())
}

pub async fn serve_stdio(catalogue: Arc<Catalogue>, defaults: SessionDefaults) -> std::io::Result<()> {
    let session = Session::new(catalogue, defaults);
    serve_lines(BufReader::new(tokio::io::stdin()), tokio::io::stdout(), session).await
}

/// Accepts connections forever; each gets its own session.
pub async fn serve_tcp(listener: TcpListener, catalogue: Arc<Catalogue>, defaults: SessionDefaults) -> std::io::Result<()> {
    loop {
        let (stream, peer) = listener.accept().await?;
        let session = Session::new(Arc::clone(&catalogue), defaults.clone());
        tokio::spawn(async move {
            tracing::debug!(%peer, "session opened");
            let (r, w) = stream.into_split();
            if let Err(e) = serve_lines(BufReader::new(r), w, session).await {
                tracing::warn!(%peer, error = %e, "session ended with an error");
            }
            tracing::debug!(%peer, "session closed");
        });
    }
}
