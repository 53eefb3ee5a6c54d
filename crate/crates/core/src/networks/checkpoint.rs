//! Binary checkpoint container. All integers and floats are little-endian:
//!
//! ```text
//! magic      8 bytes  "DDZCKPT\0"
//! version    u32
//! descriptor u32 length + UTF-8
//! rng state  4 × u64
//! step       u64
//! metadata   u32 length + UTF-8 (JSON, may be empty)
//! count      u32
//! tensor*    u32 name length + UTF-8 name, u32 rank, rank × u64 dims,
//!            product(dims) × f32
//! crc32      u32 over every preceding byte
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{BidNetConfig, BidNetwork, NetError, OptimizerState, QNetConfig, QNetwork, Scalar, Sequential};

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"DDZCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, PartialEq, Debug)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Clone, PartialEq, Debug, Default)]
pub struct Checkpoint {
    pub descriptor: String,
    pub rng_state: [u64; 4],
    pub step: u64,
    pub metadata: String,
    pub tensors: Vec<NamedTensor>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NetError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| NetError::CorruptCheckpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NetError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, NetError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| NetError::CorruptCheckpoint("invalid UTF-8".into()))
    }
}

fn put_string(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

impl Checkpoint {
    pub fn new(descriptor: impl Into<String>) -> Checkpoint {
        Checkpoint {
            descriptor: descriptor.into(),
            ..Checkpoint::default()
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        put_string(&mut out, &self.descriptor);
        for w in self.rng_state {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.extend_from_slice(&self.step.to_le_bytes());
        put_string(&mut out, &self.metadata);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            put_string(&mut out, &t.name);
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint, NetError> {
        let corrupt = |m: &str| NetError::CorruptCheckpoint(m.to_string());
        if bytes.len() < CHECKPOINT_MAGIC.len() + 8 {
            return Err(corrupt("file too short"));
        }
        if bytes[..8] != CHECKPOINT_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(corrupt("checksum mismatch"));
        }
        let mut r = Reader { bytes: body, pos: 8 };
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(NetError::CorruptCheckpoint(format!("unsupported version {version}")));
        }
        let descriptor = r.string()?;
        let mut rng_state = [0u64; 4];
        for w in &mut rng_state {
            *w = r.u64()?;
        }
        let step = r.u64()?;
        let metadata = r.string()?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let name = r.string()?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
            let len = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| corrupt("tensor size overflow"))?;
            let raw = r.take(len.checked_mul(4).ok_or_else(|| corrupt("tensor size overflow"))?)?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            tensors.push(NamedTensor { name, shape, data });
        }
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(Checkpoint {
            descriptor,
            rng_state,
            step,
            metadata,
            tensors,
        })
    }

    /// Writes through a temporary sibling and renames, so readers never see a partial file.
    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint, NetError> {
        Checkpoint::from_bytes(&fs::read(path)?)
    }

    pub fn tensor(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Appends every parameter of `seq` under `prefix`.
    pub fn put_seq<F: Scalar>(&mut self, prefix: &str, seq: &Sequential<F>) {
        seq.visit(&mut |name, shape, values| {
            self.tensors.push(NamedTensor {
                name: format!("{prefix}{name}"),
                shape: shape.to_vec(),
                data: values.iter().map(|v| v.to_f32().expect("finite parameter")).collect(),
            });
        });
    }

    /// Overwrites every parameter of `seq` from tensors under `prefix`.
    pub fn get_seq<F: Scalar>(&self, prefix: &str, seq: &mut Sequential<F>) -> Result<(), NetError> {
        let mut names = Vec::new();
        seq.visit(&mut |name, shape, _| names.push((format!("{prefix}{name}"), shape.to_vec())));
        let mut found = Vec::with_capacity(names.len());
        for (name, shape) in &names {
            let t = self
                .tensor(name)
                .ok_or_else(|| NetError::CorruptCheckpoint(format!("missing tensor `{name}`")))?;
            if &t.shape != shape {
                return Err(NetError::CorruptCheckpoint(format!(
                    "tensor `{name}` has shape {:?}, expected {:?}",
                    t.shape, shape
                )));
            }
            found.push(t);
        }
        seq.visit_mut(&mut |i, values| {
            for (dst, &src) in values.iter_mut().zip(&found[i].data) {
                *dst = F::from(src).expect("finite parameter");
            }
        });
        Ok(())
    }

    pub fn put_optimizer<F: Scalar>(&mut self, prefix: &str, seq: &Sequential<F>, state: &OptimizerState<F>) {
        let mut i = 0;
        seq.visit(&mut |name, shape, _| {
            self.tensors.push(NamedTensor {
                name: format!("{prefix}{name}"),
                shape: shape.to_vec(),
                data: state.square_avg[i].iter().map(|v| v.to_f32().unwrap()).collect(),
            });
            i += 1;
        });
    }

    pub fn get_optimizer<F: Scalar>(
        &self,
        prefix: &str,
        seq: &Sequential<F>,
        steps: u64,
    ) -> Result<OptimizerState<F>, NetError> {
        let mut shadow = seq.zeros_like();
        self.get_seq(prefix, &mut shadow)?;
        let mut square_avg = Vec::new();
        shadow.visit(&mut |_, _, v| square_avg.push(v.to_vec()));
        Ok(OptimizerState { square_avg, steps })
    }

    fn expect_descriptor(&self, expected: &str) -> Result<(), NetError> {
        if self.descriptor != expected {
            return Err(NetError::ArchMismatch {
                expected: expected.to_string(),
                found: self.descriptor.clone(),
            });
        }
        Ok(())
    }
}

impl<F: Scalar> QNetwork<F> {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new(self.descriptor());
        c.put_seq("", self.seq());
        c
    }

    /// Builds the network the checkpoint describes.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<QNetwork<F>, NetError> {
        let mut net = QNetwork::zeros(QNetConfig::from_descriptor(&ckpt.descriptor)?);
        ckpt.get_seq("", net.seq_mut())?;
        Ok(net)
    }

    /// Loads into an existing network, refusing a different architecture.
    pub fn load_from(&mut self, ckpt: &Checkpoint) -> Result<(), NetError> {
        ckpt.expect_descriptor(&self.descriptor())?;
        ckpt.get_seq("", self.seq_mut())
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<QNetwork<F>, NetError> {
        QNetwork::from_checkpoint(&Checkpoint::load(path)?)
    }
}

impl<F: Scalar> BidNetwork<F> {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new(self.descriptor());
        c.put_seq("", self.seq());
        c
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<BidNetwork<F>, NetError> {
        let config = BidNetConfig::from_descriptor(&ckpt.descriptor)?;
        let mut net = BidNetwork::new(config, &mut crate::rng::GameRng::new(0));
        ckpt.get_seq("", net.seq_mut())?;
        Ok(net)
    }

    pub fn load_from(&mut self, ckpt: &Checkpoint) -> Result<(), NetError> {
        ckpt.expect_descriptor(&self.descriptor())?;
        ckpt.get_seq("", self.seq_mut())
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<BidNetwork<F>, NetError> {
        BidNetwork::from_checkpoint(&Checkpoint::load(path)?)
    }
}
