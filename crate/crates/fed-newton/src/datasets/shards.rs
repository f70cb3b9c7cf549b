//! Binary persistence for partitioned datasets.
//!
//! Freezing shards to disk makes experiment reruns independent of RNG
//! library behavior. The layout is documented in `docs/formats.md`:
//! little-endian, magic "FNSH", version 1.

use std::path::Path;

use super::{FederatedDataset, TaskKind, WorkerShard};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::glm::Sample;

const MAGIC: &[u8; 4] = b"FNSH";
const VERSION: u32 = 1;

pub fn write_shards(dataset: &FederatedDataset, path: &Path) -> Result<()> {
    dataset.validate()?;
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    match dataset.task {
        TaskKind::Regression => out.push(0),
        TaskKind::BinaryClassification => out.push(1),
        TaskKind::MultiClass(classes) => {
            out.push(2);
            out.extend_from_slice(&(classes as u32).to_le_bytes());
        }
    }
    out.extend_from_slice(&(dataset.n_workers() as u32).to_le_bytes());
    out.extend_from_slice(&(dataset.dim as u32).to_le_bytes());
    let prov = dataset.provenance.as_bytes();
    out.extend_from_slice(&(prov.len() as u64).to_le_bytes());
    out.extend_from_slice(prov);
    for shard in &dataset.shards {
        write_block(&mut out, &shard.train);
        write_block(&mut out, &shard.validation);
    }
    fsutil::atomic_write(path, &out)
}

fn write_block(out: &mut Vec<u8>, samples: &[Sample]) {
    out.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    for s in samples {
        out.extend_from_slice(&s.label.to_le_bytes());
        for f in &s.features {
            out.extend_from_slice(&f.to_le_bytes());
        }
    }
}

pub fn read_shards(path: &Path) -> Result<FederatedDataset> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = Reader { buf: &buf, off: 0, path };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(r.bad("bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.bad(&format!("unsupported version {version}")));
    }
    let task = match r.u8()? {
        0 => TaskKind::Regression,
        1 => TaskKind::BinaryClassification,
        2 => TaskKind::MultiClass(r.u32()? as usize),
        t => return Err(r.bad(&format!("unknown task tag {t}"))),
    };
    let workers = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let prov_len = r.u64()? as usize;
    let prov_bytes = r.take(prov_len)?.to_vec();
    let provenance = String::from_utf8(prov_bytes).map_err(|_| r.bad("provenance is not UTF-8"))?;

    let mut shards = Vec::with_capacity(workers);
    for _ in 0..workers {
        let train = r.block(dim)?;
        let validation = r.block(dim)?;
        shards.push(WorkerShard { train, validation });
    }
    if r.off != buf.len() {
        return Err(r.bad("trailing bytes after final shard"));
    }
    let dataset = FederatedDataset { shards, dim, task, provenance };
    dataset.validate()?;
    Ok(dataset)
}

struct Reader<'a> {
    buf: &'a [u8],
    off: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn bad(&self, why: &str) -> Error {
        Error::ShardFormat {
            path: self.path.display().to_string(),
            why: format!("{why} (at byte {})", self.off),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let slice = self
            .buf
            .get(self.off..self.off + n)
            .ok_or_else(|| self.bad("truncated"))?;
        self.off += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn block(&mut self, dim: usize) -> Result<Vec<Sample>> {
        let count = self.u64()? as usize;
        let mut samples = Vec::with_capacity(count);
        for _ in 0..count {
            let label = self.f64()?;
            let mut features = Vec::with_capacity(dim);
            for _ in 0..dim {
                features.push(self.f64()?);
            }
            samples.push(Sample::new(features, label));
        }
        Ok(samples)
    }
}
