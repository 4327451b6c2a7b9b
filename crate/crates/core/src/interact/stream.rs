use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::{Deserialize, Serialize};

use super::{Candidate, GeneratorAdapter, InteractError};

#[derive(Serialize)]
struct Request<'a> {
    x: &'a str,
    prefix: &'a [String],
    beam_size: usize,
}

#[derive(Deserialize)]
struct Response {
    candidates: Vec<Candidate>,
}

/// Generator reached over a line-delimited JSON protocol: one request
/// `{x, prefix, beam_size}` per line, answered by one
/// `{candidates: [{actions, final_query}]}` line.
pub struct StreamGenerator<R, W> {
    reader: R,
    writer: W,
    child: Option<Child>,
}

impl<R: BufRead, W: Write> StreamGenerator<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self {
            reader,
            writer,
            child: None,
        }
    }
}

impl StreamGenerator<BufReader<ChildStdout>, ChildStdin> {
    /// Starts `program` and talks to it over its standard streams.
    pub fn spawn(program: &str, args: &[String]) -> Result<Self, InteractError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(Self {
            reader: BufReader::new(stdout),
            writer: stdin,
            child: Some(child),
        })
    }
}

impl StreamGenerator<BufReader<TcpStream>, TcpStream> {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, InteractError> {
        let stream = TcpStream::connect(addr)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(Self::new(reader, stream))
    }
}

impl<R, W> Drop for StreamGenerator<R, W> {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl<R: BufRead, W: Write> GeneratorAdapter for StreamGenerator<R, W> {
    fn propose(&mut self, x: &str, prefix: &[String], beam_size: usize) -> Result<Vec<Candidate>, InteractError> {
        let req = serde_json::to_string(&Request { x, prefix, beam_size })
            .map_err(|e| InteractError::Protocol(e.to_string()))?;
        writeln!(self.writer, "{req}")?;
        self.writer.flush()?;
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(InteractError::Generator("generator closed the stream".into()));
        }
        let resp: Response = serde_json::from_str(&line).map_err(|e| InteractError::Protocol(e.to_string()))?;
        Ok(resp.candidates)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::net::TcpListener;

    #[test]
    fn tcp_round_trip() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut writer = stream;
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let req: serde_json::Value = serde_json::from_str(&line).unwrap();
            assert_eq!(req["beam_size"], 2);
            writeln!(
                writer,
                r#"{{"candidates": [{{"actions": ["<Insert> limit 1 <InsertEnd>"], "final_query": "q"}}]}}"#
            )
            .unwrap();
        });
        let mut g = StreamGenerator::connect(addr).unwrap();
        let c = g.propose("x", &[], 2).unwrap();
        assert_eq!(c[0].actions, ["<Insert> limit 1 <InsertEnd>"]);
        server.join().unwrap();
        assert!(g.propose("x", &[], 2).is_err());
    }
}
