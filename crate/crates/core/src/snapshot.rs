//! Binary engine snapshots.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "FALASNAP"
//! version      u16      currently 1
//! lambda       f64      IEEE-754 bits
//! delta tag    u8       0 = finite, 1 = infinite
//! delta ms     u64      0 when infinite
//! k            u64
//! reward scope u8       0 = in-ktop, 1 = always-actual
//! app count    u64      n
//! names        n × (u32 byte length, UTF-8 bytes), registration order
//! rows         n × n f64, row-major
//! last tag     u8       0 = no previous launch, 1 = present
//! last app     u64
//! last time    u64
//! ```
//!
//! Floats are stored as raw bits so a restore is bit-exact. Trailing bytes
//! are rejected.

use thiserror::Error;

use crate::automaton::{ActionProbabilityVector, LearningRate};
use crate::engine::{DeltaThreshold, Engine, EngineConfig, LastLaunch, RewardScope};
use crate::registry::{AppId, AppRegistry};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"FALASNAP";
pub const SNAPSHOT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SnapshotError {
    #[error("corrupt snapshot at byte {offset}: {reason}")]
    Corrupt { offset: usize, reason: String },
    #[error("unsupported snapshot version {0}")]
    UnsupportedVersion(u16),
}

impl Engine {
    pub fn snapshot(&self) -> Vec<u8> {
        let n = self.registry.len();
        let mut out = Vec::with_capacity(64 + n * (16 + 8 * n));
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.config.lambda.get().to_bits().to_le_bytes());
        match self.config.delta {
            DeltaThreshold::Millis(ms) => {
                out.push(0);
                out.extend_from_slice(&ms.to_le_bytes());
            }
            DeltaThreshold::Infinite => {
                out.push(1);
                out.extend_from_slice(&0u64.to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.config.k as u64).to_le_bytes());
        out.push(match self.config.reward_scope {
            RewardScope::InKtop => 0,
            RewardScope::AlwaysActual => 1,
        });
        out.extend_from_slice(&(n as u64).to_le_bytes());
        for name in self.registry.names() {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
        }
        for row in &self.rows {
            for q in row.as_slice() {
                out.extend_from_slice(&q.to_bits().to_le_bytes());
            }
        }
        match self.last {
            None => {
                out.push(0);
                out.extend_from_slice(&[0u8; 16]);
            }
            Some(last) => {
                out.push(1);
                out.extend_from_slice(&(last.app.index() as u64).to_le_bytes());
                out.extend_from_slice(&last.timestamp_ms.to_le_bytes());
            }
        }
        out
    }

    /// Rebuilds an engine from [`snapshot`](Self::snapshot) bytes. Nothing is
    /// returned unless the whole blob validates.
    pub fn restore(bytes: &[u8]) -> Result<Engine, SnapshotError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != SNAPSHOT_MAGIC {
            return Err(r.corrupt_at(0, "bad magic"));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != SNAPSHOT_VERSION {
            return Err(SnapshotError::UnsupportedVersion(version));
        }

        let at = r.pos;
        let lambda = LearningRate::new(f64::from_bits(r.u64()?))
            .map_err(|e| r.corrupt_at(at, &e.to_string()))?;
        let at = r.pos;
        let delta = match (r.u8()?, r.u64()?) {
            (0, 0) => return Err(r.corrupt_at(at, "zero delta")),
            (0, ms) => DeltaThreshold::Millis(ms),
            (1, _) => DeltaThreshold::Infinite,
            (tag, _) => return Err(r.corrupt_at(at, &format!("unknown delta tag {tag}"))),
        };
        let at = r.pos;
        let k = r.u64()?;
        if k == 0 || k > usize::MAX as u64 {
            return Err(r.corrupt_at(at, "invalid k"));
        }
        let at = r.pos;
        let reward_scope = match r.u8()? {
            0 => RewardScope::InKtop,
            1 => RewardScope::AlwaysActual,
            tag => return Err(r.corrupt_at(at, &format!("unknown reward scope tag {tag}"))),
        };
        let config = EngineConfig {
            lambda,
            delta,
            k: k as usize,
            reward_scope,
        };

        let at = r.pos;
        let n = r.u64()?;
        // Each name needs at least 4 length bytes plus one row of n floats.
        if n > (r.remaining() as u64) / 4 {
            return Err(r.corrupt_at(at, &format!("app count {n} exceeds payload")));
        }
        let n = n as usize;
        let mut registry = AppRegistry::new();
        for _ in 0..n {
            let at = r.pos;
            let len = u32::from_le_bytes(r.array()?) as usize;
            let raw = r.take(len)?;
            let name = std::str::from_utf8(raw).map_err(|_| r.corrupt_at(at, "app name is not UTF-8"))?;
            if name.is_empty() {
                return Err(r.corrupt_at(at, "empty app name"));
            }
            if !registry.intern(name).1 {
                return Err(r.corrupt_at(at, &format!("duplicate app name {name:?}")));
            }
        }

        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let at = r.pos;
            let mut probs = Vec::with_capacity(n);
            for _ in 0..n {
                probs.push(f64::from_bits(r.u64()?));
            }
            let row = ActionProbabilityVector::from_probs(probs)
                .map_err(|e| r.corrupt_at(at, &format!("row {i}: {e}")))?;
            rows.push(row);
        }

        let at = r.pos;
        let tag = r.u8()?;
        let app = r.u64()?;
        let timestamp_ms = r.u64()?;
        let last = match tag {
            0 => None,
            1 if (app as usize) < n && app <= usize::MAX as u64 => Some(LastLaunch {
                app: AppId(app as usize),
                timestamp_ms,
            }),
            1 => return Err(r.corrupt_at(at, &format!("previous app {app} is not registered"))),
            other => return Err(r.corrupt_at(at, &format!("unknown previous-launch tag {other}"))),
        };

        if r.remaining() != 0 {
            return Err(r.corrupt_at(r.pos, &format!("{} trailing bytes", r.remaining())));
        }

        Ok(Engine {
            config,
            registry,
            rows,
            last,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn corrupt_at(&self, offset: usize, reason: &str) -> SnapshotError {
        SnapshotError::Corrupt {
            offset,
            reason: reason.to_owned(),
        }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8], SnapshotError> {
        if self.remaining() < len {
            return Err(self.corrupt_at(
                self.pos,
                &format!("truncated: need {len} bytes, {} left", self.remaining()),
            ));
        }
        let slice = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], SnapshotError> {
        let mut buf = [0u8; N];
        buf.copy_from_slice(self.take(N)?);
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8, SnapshotError> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64, SnapshotError> {
        Ok(u64::from_le_bytes(self.array()?))
    }
}
