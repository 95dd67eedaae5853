//! `TGCK` files: magic, version, 32-byte fingerprint, epoch, running loss,
//! then the `TGEN` parameter block.

use std::path::Path;

use crate::binio::{Reader, Writer};
use crate::config::Fingerprint;
use crate::encoder::EncoderParams;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TGCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: EncoderParams,
    pub epoch: u32,
    pub loss: f64,
    pub fingerprint: Fingerprint,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.bytes(&self.fingerprint.0);
        w.u32(self.epoch);
        w.f64(self.loss);
        self.params.write_block(&mut w);
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported TGCK version {version}")));
        }
        let fingerprint = Fingerprint(r.take(32)?.try_into().expect("32 bytes"));
        let epoch = r.u32()?;
        let loss = r.f64()?;
        let params = EncoderParams::read_block(&mut r)?;
        r.finish()?;
        Ok(Checkpoint {
            params,
            epoch,
            loss,
            fingerprint,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}
