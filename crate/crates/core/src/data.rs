//! Labeled datasets, their partition into machine-local shards, and the
//! `.mdls` shard file format.
//!
//! # Shard file layout
//!
//! All integers and floats little-endian:
//!
//! | field    | type            |
//! |----------|-----------------|
//! | magic    | `b"MDLS"`       |
//! | version  | u32 = 1         |
//! | shard_id | u32             |
//! | n_total  | u64             |
//! | rows     | u64             |
//! | p        | u32             |
//! | body     | rows × (label f64, p × feature f64) |
//! | crc      | u32, CRC32 (IEEE) of every byte between magic and crc |

use std::path::Path;

use crate::error::{Error, Result};

/// Rows `(y, x)` with `y ∈ {−1, +1}` and `x ∈ R^p`, features row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    p: usize,
    labels: Vec<f64>,
    features: Vec<f64>,
}

fn validate_rows(p: usize, labels: &[f64], features: &[f64]) -> Result<()> {
    if p == 0 {
        return Err(Error::InvalidConfiguration("p must be positive".into()));
    }
    if features.len() != labels.len() * p {
        return Err(Error::DimMismatch {
            expected: labels.len() * p,
            found: features.len(),
        });
    }
    if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(Error::InvalidConfiguration(format!(
            "labels must be ±1, found {bad}"
        )));
    }
    if !features.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

impl Dataset {
    pub fn new(p: usize, labels: Vec<f64>, features: Vec<f64>) -> Result<Self> {
        validate_rows(p, &labels, &features)?;
        Ok(Self {
            p,
            labels,
            features,
        })
    }

    pub fn from_rows(p: usize, rows: &[(f64, Vec<f64>)]) -> Result<Self> {
        let labels = rows.iter().map(|r| r.0).collect();
        let mut features = Vec::with_capacity(rows.len() * p);
        for (_, x) in rows {
            if x.len() != p {
                return Err(Error::DimMismatch {
                    expected: p,
                    found: x.len(),
                });
            }
            features.extend_from_slice(x);
        }
        Self::new(p, labels, features)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> (f64, &[f64]) {
        (self.labels[i], &self.features[i * self.p..(i + 1) * self.p])
    }

    /// The first `n` rows.
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.n());
        Dataset {
            p: self.p,
            labels: self.labels[..n].to_vec(),
            features: self.features[..n * self.p].to_vec(),
        }
    }

    /// View the whole dataset as a single shard.
    pub fn as_single_shard(&self) -> Shard {
        Shard {
            id: 0,
            n_total: self.n() as u64,
            p: self.p,
            labels: self.labels.clone(),
            features: self.features.clone(),
        }
    }
}

/// Rows held by one worker; `n_total` is the global sample size used for the
/// `1/n` scaling of worker summaries.
#[derive(Clone, Debug, PartialEq)]
pub struct Shard {
    pub id: u32,
    pub n_total: u64,
    p: usize,
    labels: Vec<f64>,
    features: Vec<f64>,
}

impl Shard {
    pub fn new(
        id: u32,
        n_total: u64,
        p: usize,
        labels: Vec<f64>,
        features: Vec<f64>,
    ) -> Result<Self> {
        validate_rows(p, &labels, &features)?;
        if labels.is_empty() {
            return Err(Error::InvalidConfiguration(
                "shard must be non-empty".into(),
            ));
        }
        if (labels.len() as u64) > n_total {
            return Err(Error::InvalidConfiguration(format!(
                "shard has {} rows but n_total is {n_total}",
                labels.len()
            )));
        }
        Ok(Self {
            id,
            n_total,
            p,
            labels,
            features,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> (f64, &[f64]) {
        (self.labels[i], &self.features[i * self.p..(i + 1) * self.p])
    }

    /// The shard's rows as a standalone dataset.
    pub fn to_dataset(&self) -> Dataset {
        Dataset {
            p: self.p,
            labels: self.labels.clone(),
            features: self.features.clone(),
        }
    }
}

/// How rows are assigned to shards. All policies use contiguous blocks in
/// row order, so shard 0 always holds the first rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PartitionPolicy {
    /// Equal sizes; the shard count must divide n.
    Equal,
    /// Equal sizes with the remainder added to the last shard.
    RemainderLast,
    /// Explicit sizes, which must sum to n.
    Sizes(Vec<usize>),
}

pub fn partition(data: &Dataset, shards: usize, policy: &PartitionPolicy) -> Result<Vec<Shard>> {
    let n = data.n();
    if shards == 0 || shards > n {
        return Err(Error::InvalidConfiguration(format!(
            "cannot split {n} rows into {shards} shards"
        )));
    }
    let sizes: Vec<usize> = match policy {
        PartitionPolicy::Equal => {
            if !n.is_multiple_of(shards) {
                return Err(Error::IndivisibleN { n, shards });
            }
            vec![n / shards; shards]
        }
        PartitionPolicy::RemainderLast => {
            let base = n / shards;
            let mut sizes = vec![base; shards];
            sizes[shards - 1] += n % shards;
            sizes
        }
        PartitionPolicy::Sizes(sizes) => {
            if sizes.len() != shards {
                return Err(Error::DimMismatch {
                    expected: shards,
                    found: sizes.len(),
                });
            }
            if sizes.iter().sum::<usize>() != n || sizes.contains(&0) {
                return Err(Error::InvalidConfiguration(
                    "explicit shard sizes must be positive and sum to n".into(),
                ));
            }
            sizes.clone()
        }
    };
    let p = data.p();
    let mut out = Vec::with_capacity(shards);
    let mut start = 0;
    for (k, &size) in sizes.iter().enumerate() {
        let end = start + size;
        out.push(Shard {
            id: k as u32,
            n_total: n as u64,
            p,
            labels: data.labels[start..end].to_vec(),
            features: data.features[start * p..end * p].to_vec(),
        });
        start = end;
    }
    Ok(out)
}

const SHARD_MAGIC: &[u8; 4] = b"MDLS";
const SHARD_VERSION: u32 = 1;
const SHARD_HEADER: usize = 4 + 4 + 4 + 8 + 8 + 4;

pub fn write_shard(shard: &Shard) -> Vec<u8> {
    let body_len = shard.len() * (shard.p + 1) * 8;
    let mut out = Vec::with_capacity(SHARD_HEADER + body_len + 4);
    out.extend_from_slice(SHARD_MAGIC);
    out.extend_from_slice(&SHARD_VERSION.to_le_bytes());
    out.extend_from_slice(&shard.id.to_le_bytes());
    out.extend_from_slice(&shard.n_total.to_le_bytes());
    out.extend_from_slice(&(shard.len() as u64).to_le_bytes());
    out.extend_from_slice(&(shard.p as u32).to_le_bytes());
    for i in 0..shard.len() {
        let (y, x) = shard.row(i);
        out.extend_from_slice(&y.to_le_bytes());
        for v in x {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out[4..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b[..4].try_into().unwrap())
}

fn le_u64(b: &[u8]) -> u64 {
    u64::from_le_bytes(b[..8].try_into().unwrap())
}

pub fn read_shard(bytes: &[u8]) -> Result<Shard> {
    if bytes.len() < 4 {
        return Err(Error::Truncated);
    }
    if &bytes[..4] != SHARD_MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < SHARD_HEADER + 4 {
        return Err(Error::Truncated);
    }
    let version = le_u32(&bytes[4..]);
    if version != SHARD_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let id = le_u32(&bytes[8..]);
    let n_total = le_u64(&bytes[12..]);
    let rows = le_u64(&bytes[20..]);
    let p = le_u32(&bytes[28..]) as usize;
    let body_len = (rows as u128) * (p as u128 + 1) * 8;
    let expected = SHARD_HEADER as u128 + body_len + 4;
    if (bytes.len() as u128) < expected {
        return Err(Error::Truncated);
    }
    if (bytes.len() as u128) > expected {
        return Err(Error::InvalidConfiguration(
            "trailing bytes after shard checksum".into(),
        ));
    }
    let crc_at = bytes.len() - 4;
    if crc32fast::hash(&bytes[4..crc_at]) != le_u32(&bytes[crc_at..]) {
        return Err(Error::BadChecksum);
    }
    let rows = rows as usize;
    let mut labels = Vec::with_capacity(rows);
    let mut features = Vec::with_capacity(rows * p);
    let mut at = SHARD_HEADER;
    for _ in 0..rows {
        labels.push(f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()));
        at += 8;
        for _ in 0..p {
            features.push(f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()));
            at += 8;
        }
    }
    Shard::new(id, n_total, p, labels, features)
}

pub fn save_shard(shard: &Shard, path: &Path) -> Result<()> {
    std::fs::write(path, write_shard(shard))?;
    Ok(())
}

pub fn load_shard(path: &Path) -> Result<Shard> {
    read_shard(&std::fs::read(path)?)
}

/// Conventional file name for shard `k` inside a shard directory.
pub fn shard_file_name(k: u32) -> String {
    format!("shard-{k:05}.mdls")
}
