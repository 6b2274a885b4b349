use std::io::{BufReader, BufWriter, ErrorKind, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::time::Duration;

use crate::error::{Error, Result};

use super::cluster::{CommStats, DEFAULT_TIMEOUT};
use super::{decode, encode, read_frame, Cluster, Message, Worker};

/// Serve one coordinator connection accepted on `listener`, until
/// `Shutdown` or end of stream.
pub fn serve_worker(listener: &TcpListener, worker: &mut Worker) -> Result<()> {
    let (stream, _) = listener.accept()?;
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    while let Some(frame) = read_frame(&mut reader)? {
        let msg = decode(&frame)?;
        match worker.handle(&msg)? {
            Some(reply) => {
                writer.write_all(&encode(&reply))?;
                writer.flush()?;
            }
            None => break,
        }
    }
    Ok(())
}

struct Link {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

/// Coordinator side of the socket transport. Connection `k` must reach the
/// worker holding shard `k`.
pub struct TcpCluster {
    links: Vec<Link>,
    sizes: Vec<usize>,
    p: usize,
    n_total: u64,
    stats: CommStats,
}

impl TcpCluster {
    pub fn connect<A: ToSocketAddrs>(
        addrs: &[A],
        shard_sizes: Vec<usize>,
        p: usize,
    ) -> Result<Self> {
        Self::connect_with_timeout(addrs, shard_sizes, p, DEFAULT_TIMEOUT)
    }

    pub fn connect_with_timeout<A: ToSocketAddrs>(
        addrs: &[A],
        shard_sizes: Vec<usize>,
        p: usize,
        timeout: Duration,
    ) -> Result<Self> {
        if addrs.is_empty() || addrs.len() != shard_sizes.len() {
            return Err(Error::InvalidConfiguration(format!(
                "{} worker addresses for {} shards",
                addrs.len(),
                shard_sizes.len()
            )));
        }
        let mut links = Vec::with_capacity(addrs.len());
        for (k, addr) in addrs.iter().enumerate() {
            let stream = TcpStream::connect(addr).map_err(|_| Error::WorkerCrashed(k))?;
            stream.set_nodelay(true)?;
            stream.set_read_timeout(Some(timeout))?;
            links.push(Link {
                reader: BufReader::new(stream.try_clone()?),
                writer: BufWriter::new(stream),
            });
        }
        let n_total = shard_sizes.iter().sum::<usize>() as u64;
        Ok(Self {
            links,
            sizes: shard_sizes,
            p,
            n_total,
            stats: CommStats::default(),
        })
    }

    fn send(&mut self, worker: usize, frame: &[u8]) -> Result<()> {
        let link = self
            .links
            .get_mut(worker)
            .ok_or(Error::WorkerCrashed(worker))?;
        link.writer
            .write_all(frame)
            .and_then(|_| link.writer.flush())
            .map_err(|_| Error::WorkerCrashed(worker))?;
        self.stats.messages += 1;
        self.stats.bytes += frame.len() as u64;
        Ok(())
    }

    fn receive(&mut self, worker: usize) -> Result<Message> {
        let link = &mut self.links[worker];
        let frame = match read_frame(&mut link.reader) {
            Ok(Some(frame)) => frame,
            Ok(None) | Err(Error::Truncated) => return Err(Error::WorkerCrashed(worker)),
            Err(Error::Io(e))
                if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) =>
            {
                return Err(Error::WorkerTimeout(worker))
            }
            Err(Error::Io(_)) => return Err(Error::WorkerCrashed(worker)),
            Err(e) => return Err(e),
        };
        let reply = decode(&frame)?;
        if let Some(id) = reply.shard_id() {
            if id as usize != worker {
                return Err(Error::UnexpectedReply {
                    worker,
                    detail: format!("reply carries shard id {id}"),
                });
            }
        }
        self.stats.messages += 1;
        self.stats.bytes += frame.len() as u64;
        Ok(reply)
    }
}

impl Cluster for TcpCluster {
    fn size(&self) -> usize {
        self.links.len()
    }

    fn shard_sizes(&self) -> &[usize] {
        &self.sizes
    }

    fn p(&self) -> usize {
        self.p
    }

    fn n_total(&self) -> u64 {
        self.n_total
    }

    fn request(&mut self, worker: usize, msg: &Message) -> Result<Message> {
        let frame = encode(msg);
        self.send(worker, &frame)?;
        self.receive(worker)
    }

    fn broadcast_gather(&mut self, msg: &Message) -> Result<Vec<Message>> {
        let frame = encode(msg);
        for k in 0..self.links.len() {
            self.send(k, &frame)?;
        }
        (0..self.links.len()).map(|k| self.receive(k)).collect()
    }

    fn stats(&self) -> CommStats {
        self.stats
    }

    fn shutdown(&mut self) -> Result<()> {
        let frame = encode(&Message::Shutdown);
        for link in &mut self.links {
            let _ = link
                .writer
                .write_all(&frame)
                .and_then(|_| link.writer.flush());
        }
        self.links.clear();
        Ok(())
    }
}

impl Drop for TcpCluster {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}
