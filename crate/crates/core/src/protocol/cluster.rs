use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crate::data::Shard;
use crate::error::{Error, Result};

use super::{decode, encode, encoded_len, Message, Worker, WorkerConfig};

/// Message and byte counters; every frame sent in either direction counts
/// once. Shutdown frames are not counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CommStats {
    pub messages: u64,
    pub bytes: u64,
}

impl CommStats {
    fn record(&mut self, msg: &Message) {
        self.messages += 1;
        self.bytes += encoded_len(msg) as u64;
    }
}

/// The coordinator's view of a set of workers, one shard each.
///
/// Worker `k` holds the shard with id `k`.
pub trait Cluster {
    fn size(&self) -> usize;
    fn shard_sizes(&self) -> &[usize];
    fn p(&self) -> usize;
    fn n_total(&self) -> u64;
    /// Send `msg` to one worker and wait for its reply.
    fn request(&mut self, worker: usize, msg: &Message) -> Result<Message>;
    /// Send `msg` to every worker; replies are returned in worker order.
    fn broadcast_gather(&mut self, msg: &Message) -> Result<Vec<Message>>;
    fn stats(&self) -> CommStats;
    fn shutdown(&mut self) -> Result<()>;
}

fn check_reply(worker: usize, reply: &Message) -> Result<()> {
    match reply.shard_id() {
        Some(id) if id as usize != worker => Err(Error::UnexpectedReply {
            worker,
            detail: format!("reply carries shard id {id}"),
        }),
        _ => Ok(()),
    }
}

fn shard_layout(shards: &[Shard]) -> Result<(Vec<usize>, usize, u64)> {
    let first = shards
        .first()
        .ok_or_else(|| Error::InvalidConfiguration("a cluster needs at least one shard".into()))?;
    for (k, s) in shards.iter().enumerate() {
        if s.id as usize != k {
            return Err(Error::InvalidConfiguration(format!(
                "shard at position {k} has id {}",
                s.id
            )));
        }
        if s.p() != first.p() || s.n_total != first.n_total {
            return Err(Error::InvalidConfiguration(
                "shards disagree on p or n_total".into(),
            ));
        }
    }
    let sizes: Vec<usize> = shards.iter().map(|s| s.len()).collect();
    if sizes.iter().sum::<usize>() as u64 != first.n_total {
        return Err(Error::InvalidConfiguration(
            "shard sizes do not add up to n_total".into(),
        ));
    }
    Ok((sizes, first.p(), first.n_total))
}

/// Workers called synchronously in the coordinator's thread. Messages are
/// accounted at their encoded size but never serialized.
#[derive(Debug)]
pub struct DirectCluster {
    workers: Vec<Worker>,
    sizes: Vec<usize>,
    p: usize,
    n_total: u64,
    stats: CommStats,
}

impl DirectCluster {
    pub fn new(shards: Vec<Shard>, config: WorkerConfig) -> Result<Self> {
        let (sizes, p, n_total) = shard_layout(&shards)?;
        Ok(Self {
            workers: shards
                .into_iter()
                .map(|s| Worker::new(s, config.clone()))
                .collect(),
            sizes,
            p,
            n_total,
            stats: CommStats::default(),
        })
    }
}

impl Cluster for DirectCluster {
    fn size(&self) -> usize {
        self.workers.len()
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
        let w = self
            .workers
            .get_mut(worker)
            .ok_or(Error::WorkerCrashed(worker))?;
        self.stats.record(msg);
        let reply = w.handle(msg)?.ok_or(Error::WorkerCrashed(worker))?;
        check_reply(worker, &reply)?;
        self.stats.record(&reply);
        Ok(reply)
    }

    fn broadcast_gather(&mut self, msg: &Message) -> Result<Vec<Message>> {
        (0..self.workers.len())
            .map(|k| self.request(k, msg))
            .collect()
    }

    fn stats(&self) -> CommStats {
        self.stats
    }

    fn shutdown(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Default per-round reply deadline.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// One thread per worker, exchanging encoded frames over in-process
/// channels. Replies share one channel and may arrive in any order.
pub struct ChannelCluster {
    senders: Vec<Sender<Vec<u8>>>,
    replies: Receiver<(usize, Vec<u8>)>,
    handles: Vec<Option<JoinHandle<()>>>,
    sizes: Vec<usize>,
    p: usize,
    n_total: u64,
    stats: CommStats,
    timeout: Duration,
}

impl ChannelCluster {
    pub fn spawn(shards: Vec<Shard>, config: WorkerConfig) -> Result<Self> {
        Self::spawn_with_delays(shards, config, &[])
    }

    /// Like [`ChannelCluster::spawn`], with worker `k` sleeping `delays[k]`
    /// before every reply.
    pub fn spawn_with_delays(
        shards: Vec<Shard>,
        config: WorkerConfig,
        delays: &[Duration],
    ) -> Result<Self> {
        let (sizes, p, n_total) = shard_layout(&shards)?;
        let (reply_tx, replies) = mpsc::channel();
        let mut senders = Vec::new();
        let mut handles = Vec::new();
        for (k, shard) in shards.into_iter().enumerate() {
            let (tx, rx) = mpsc::channel::<Vec<u8>>();
            let reply_tx = reply_tx.clone();
            let delay = delays.get(k).copied().unwrap_or_default();
            let mut worker = Worker::new(shard, config.clone());
            let handle = thread::Builder::new()
                .name(format!("mdl-worker-{k}"))
                .spawn(move || {
                    for frame in rx {
                        let Ok(msg) = decode(&frame) else { return };
                        let Ok(reply) = worker.handle(&msg) else {
                            return;
                        };
                        let Some(reply) = reply else { return };
                        if !delay.is_zero() {
                            thread::sleep(delay);
                        }
                        if reply_tx.send((k, encode(&reply))).is_err() {
                            return;
                        }
                    }
                })?;
            senders.push(tx);
            handles.push(Some(handle));
        }
        Ok(Self {
            senders,
            replies,
            handles,
            sizes,
            p,
            n_total,
            stats: CommStats::default(),
            timeout: DEFAULT_TIMEOUT,
        })
    }

    pub fn set_timeout(&mut self, timeout: Duration) {
        self.timeout = timeout;
    }

    fn send(&mut self, worker: usize, msg: &Message, frame: &[u8]) -> Result<()> {
        let tx = self
            .senders
            .get(worker)
            .ok_or(Error::WorkerCrashed(worker))?;
        tx.send(frame.to_vec())
            .map_err(|_| Error::WorkerCrashed(worker))?;
        self.stats.record(msg);
        Ok(())
    }

    fn gather(&mut self, expected: &[usize]) -> Result<Vec<Message>> {
        let mut slots: Vec<Option<Message>> = vec![None; self.senders.len()];
        let mut pending = expected.len();
        let deadline = Instant::now() + self.timeout;
        while pending > 0 {
            let now = Instant::now();
            if now >= deadline {
                let k = expected.iter().find(|&&k| slots[k].is_none()).unwrap();
                return Err(Error::WorkerTimeout(*k));
            }
            let slice = (deadline - now).min(Duration::from_millis(50));
            match self.replies.recv_timeout(slice) {
                Ok((k, frame)) => {
                    let reply = decode(&frame)?;
                    if !expected.contains(&k) || slots[k].is_some() {
                        return Err(Error::UnexpectedReply {
                            worker: k,
                            detail: "reply without a pending request".into(),
                        });
                    }
                    check_reply(k, &reply)?;
                    self.stats.record(&reply);
                    slots[k] = Some(reply);
                    pending -= 1;
                }
                Err(RecvTimeoutError::Timeout) => {
                    for &k in expected {
                        let dead = self.handles[k].as_ref().is_none_or(|h| h.is_finished());
                        if slots[k].is_none() && dead {
                            return Err(Error::WorkerCrashed(k));
                        }
                    }
                }
                Err(RecvTimeoutError::Disconnected) => {
                    let k = expected.iter().find(|&&k| slots[k].is_none()).unwrap();
                    return Err(Error::WorkerCrashed(*k));
                }
            }
        }
        Ok(expected.iter().map(|&k| slots[k].take().unwrap()).collect())
    }
}

impl Cluster for ChannelCluster {
    fn size(&self) -> usize {
        self.senders.len()
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
        self.send(worker, msg, &frame)?;
        Ok(self.gather(&[worker])?.pop().unwrap())
    }

    fn broadcast_gather(&mut self, msg: &Message) -> Result<Vec<Message>> {
        let frame = encode(msg);
        for k in 0..self.senders.len() {
            self.send(k, msg, &frame)?;
        }
        let all: Vec<usize> = (0..self.senders.len()).collect();
        self.gather(&all)
    }

    fn stats(&self) -> CommStats {
        self.stats
    }

    fn shutdown(&mut self) -> Result<()> {
        let frame = encode(&Message::Shutdown);
        for tx in &self.senders {
            let _ = tx.send(frame.clone());
        }
        self.senders.clear();
        for h in self.handles.iter_mut() {
            if let Some(h) = h.take() {
                let _ = h.join();
            }
        }
        Ok(())
    }
}

impl Drop for ChannelCluster {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}
