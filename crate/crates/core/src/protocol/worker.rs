use crate::data::Shard;
use crate::error::{Error, Result};
use crate::mdl::{indicator_gram, worker_summary, WorkerSummary};
use crate::solver::{solve_hinge, SolverOptions, SvmProblem};
use crate::Vector;

use super::{Message, MODE_GRADIENT, MODE_INDICATOR_GRAM, MODE_SUMMARY};

/// Settings a worker needs beyond its shard.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkerConfig {
    /// Penalty used when the worker computes a local SVM fit.
    pub init_lambda: f64,
    pub solver: SolverOptions,
}

impl Default for WorkerConfig {
    fn default() -> Self {
        Self {
            init_lambda: 0.0,
            solver: SolverOptions::default(),
        }
    }
}

/// Holds one shard and answers coordinator messages.
#[derive(Debug)]
pub struct Worker {
    shard: Shard,
    config: WorkerConfig,
    local_fit: Option<Vector>,
    // (round, h bits, summary) of the last mode-1 reference point
    cached: Option<(u32, u64, WorkerSummary)>,
}

impl Worker {
    pub fn new(shard: Shard, config: WorkerConfig) -> Self {
        Self {
            shard,
            config,
            local_fit: None,
            cached: None,
        }
    }

    pub fn shard(&self) -> &Shard {
        &self.shard
    }

    /// Handle one message; `Ok(None)` for `Shutdown`.
    pub fn handle(&mut self, msg: &Message) -> Result<Option<Message>> {
        let shard_id = self.shard.id;
        let count = self.shard.len() as u64;
        match msg {
            Message::InitRequest => {
                if self.local_fit.is_none() {
                    let problem = SvmProblem::from_shard(&self.shard, self.config.init_lambda)?;
                    self.local_fit = Some(solve_hinge(&problem, &self.config.solver)?);
                }
                Ok(Some(Message::InitReply {
                    beta0: self.local_fit.clone().unwrap(),
                }))
            }
            Message::BetaBroadcast {
                round,
                h,
                beta,
                mode,
                ..
            } => {
                if beta.len() != self.shard.p() + 1 {
                    return Err(Error::DimMismatch {
                        expected: self.shard.p() + 1,
                        found: beta.len(),
                    });
                }
                match *mode {
                    MODE_SUMMARY => {
                        let s = worker_summary(&self.shard, beta, *h)?;
                        Ok(Some(Message::SummaryReply {
                            shard_id,
                            u: s.u,
                            v: s.v,
                            count,
                        }))
                    }
                    MODE_GRADIENT => {
                        let key = (*round, h.to_bits());
                        let fresh = !matches!(&self.cached, Some((r, hb, _)) if (*r, *hb) == key);
                        if fresh {
                            // first inner step of a round: β is the round's reference
                            let s = worker_summary(&self.shard, beta, *h)?;
                            self.cached = Some((key.0, key.1, s));
                        }
                        let s = &self.cached.as_ref().unwrap().2;
                        let w = s.v.mul_vec(beta).sub(&s.u);
                        Ok(Some(Message::GradReply { shard_id, w, count }))
                    }
                    MODE_INDICATOR_GRAM => {
                        let v = indicator_gram(&self.shard, beta);
                        Ok(Some(Message::SummaryReply {
                            shard_id,
                            u: Vector::zeros(beta.len()),
                            v,
                            count,
                        }))
                    }
                    other => Err(Error::BadMode(other)),
                }
            }
            Message::Shutdown => Ok(None),
            other => Err(Error::UnexpectedReply {
                worker: shard_id as usize,
                detail: format!("worker cannot handle message type {}", other.type_code()),
            }),
        }
    }
}
