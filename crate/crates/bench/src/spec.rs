use std::fmt;
use std::str::FromStr;

use crate::config::{parse_list, parse_value, Config};
use crate::error::{BenchError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    LossCurve,
    L2VsQ,
    L2VsN,
    L2VsM,
    BiasVariance,
    Coverage,
    C0Sensitivity,
    LargeP,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::LossCurve,
        Kind::L2VsQ,
        Kind::L2VsN,
        Kind::L2VsM,
        Kind::BiasVariance,
        Kind::Coverage,
        Kind::C0Sensitivity,
        Kind::LargeP,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::LossCurve => "loss-curve",
            Kind::L2VsQ => "l2-vs-q",
            Kind::L2VsN => "l2-vs-n",
            Kind::L2VsM => "l2-vs-m",
            Kind::BiasVariance => "bias-variance",
            Kind::Coverage => "coverage",
            Kind::C0Sensitivity => "c0-sensitivity",
            Kind::LargeP => "large-p",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment kind `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Full summaries every round.
    Mdl,
    /// Preconditioned inner iterations with gradient-only replies.
    MdlCe,
    NaiveDc,
    /// Hinge fit on the pooled data.
    Oracle,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mdl, Method::MdlCe, Method::NaiveDc, Method::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mdl => "mdl",
            Method::MdlCe => "mdl-ce",
            Method::NaiveDc => "naive-dc",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

/// One point of the experiment grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub q: u32,
    pub c0: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub kind: Kind,
    pub n: Vec<usize>,
    pub p: Vec<usize>,
    pub m: Vec<usize>,
    pub q: Vec<u32>,
    pub c0: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub level: f64,
    pub lambda: f64,
    pub inner_iters: u32,
    /// Bandwidths for the loss-curve kind.
    pub h: Vec<f64>,
}

impl ExperimentSpec {
    /// Desk-scale defaults for each kind.
    pub fn defaults(kind: Kind) -> Self {
        use Method::*;
        let base = Self {
            kind,
            n: vec![10_000],
            p: vec![4],
            m: vec![100],
            q: vec![10],
            c0: vec![1.0],
            reps: 200,
            seed: 20_240_601,
            methods: vec![Mdl, NaiveDc, Oracle],
            level: 0.95,
            lambda: 0.0,
            inner_iters: 10,
            h: vec![0.5, 1.0, 2.0],
        };
        match kind {
            Kind::LossCurve => base,
            Kind::L2VsQ => Self {
                q: (1..=10).collect(),
                methods: vec![Mdl, MdlCe, NaiveDc, Oracle],
                ..base
            },
            Kind::L2VsN => Self {
                n: vec![2_000, 10_000, 30_000],
                q: vec![6],
                ..base
            },
            Kind::L2VsM => Self {
                n: vec![20_000],
                m: vec![50, 100, 200, 500],
                ..base
            },
            Kind::BiasVariance => Self {
                q: vec![6],
                reps: 500,
                ..base
            },
            Kind::Coverage => Self { reps: 500, ..base },
            Kind::C0Sensitivity => Self {
                c0: vec![0.5, 1.0, 2.0, 5.0, 10.0],
                methods: vec![Mdl],
                ..base
            },
            Kind::LargeP => Self {
                n: vec![20_000],
                p: vec![10, 20],
                m: vec![200, 500],
                reps: 100,
                ..base
            },
        }
    }

    /// Overlay every assignment in `cfg`. `kind` is fixed by the caller and
    /// may not be changed here.
    pub fn apply(&mut self, cfg: &Config) -> Result<()> {
        for (key, value) in cfg.resolved() {
            match key {
                "kind" => {
                    let kind: Kind = value.parse().map_err(|e: String| BenchError::BadValue {
                        key: key.into(),
                        detail: e,
                    })?;
                    if kind != self.kind {
                        return Err(BenchError::BadValue {
                            key: key.into(),
                            detail: format!("config is for `{kind}`, running `{}`", self.kind),
                        });
                    }
                }
                "n" => self.n = parse_list(key, value)?,
                "p" => self.p = parse_list(key, value)?,
                "m" => self.m = parse_list(key, value)?,
                "q" => self.q = parse_list(key, value)?,
                "c0" => self.c0 = parse_list(key, value)?,
                "h" => self.h = parse_list(key, value)?,
                "reps" => self.reps = parse_value(key, value)?,
                "seed" => self.seed = parse_value(key, value)?,
                "level" => self.level = parse_value(key, value)?,
                "lambda" => self.lambda = parse_value(key, value)?,
                "inner_iters" => self.inner_iters = parse_value(key, value)?,
                "methods" => self.methods = parse_list(key, value)?,
                other => return Err(BenchError::UnknownKey(other.into())),
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BenchError::InvalidSpec(msg));
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.n.is_empty()
            || self.p.is_empty()
            || self.m.is_empty()
            || self.q.is_empty()
            || self.c0.is_empty()
            || self.methods.is_empty()
            || self.h.is_empty()
        {
            return bad("every grid list must be non-empty".into());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("level must lie in (0, 1), got {}", self.level));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be nonnegative".into());
        }
        if self.q.contains(&0) || self.inner_iters == 0 {
            return bad("q and inner_iters must be at least 1".into());
        }
        if self.p.contains(&0) {
            return bad("p must be at least 1".into());
        }
        if !self
            .c0
            .iter()
            .chain(&self.h)
            .all(|v| *v > 0.0 && v.is_finite())
        {
            return bad("c0 and h values must be positive".into());
        }
        for &n in &self.n {
            for &m in &self.m {
                if m == 0 || n % m != 0 {
                    return bad(format!("batch size {m} must divide n = {n}"));
                }
            }
        }
        Ok(())
    }

    /// Grid points in row-major order over `(n, p, m, q, c0)`.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &p in &self.p {
                for &m in &self.m {
                    for &q in &self.q {
                        for &c0 in &self.c0 {
                            out.push(Cell { n, p, m, q, c0 });
                        }
                    }
                }
            }
        }
        out
    }

    /// A config that reproduces this experiment.
    pub fn to_config(&self) -> Config {
        fn join<T: fmt::Display>(v: &[T]) -> String {
            v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
        }
        let mut cfg = Config::default();
        cfg.set("kind", self.kind);
        cfg.set("n", join(&self.n));
        cfg.set("p", join(&self.p));
        cfg.set("m", join(&self.m));
        cfg.set("q", join(&self.q));
        cfg.set("c0", join(&self.c0));
        cfg.set("reps", self.reps);
        cfg.set("seed", self.seed);
        cfg.set("methods", join(&self.methods));
        cfg.set("level", self.level);
        cfg.set("lambda", self.lambda);
        cfg.set("inner_iters", self.inner_iters);
        cfg.set("h", join(&self.h));
        cfg
    }
}
