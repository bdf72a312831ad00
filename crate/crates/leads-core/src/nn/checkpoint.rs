//! Binary checkpoints for networks.
//!
//! Little-endian, fixed layout: a 4-byte magic, format version, a kind tag,
//! then shape-prefixed f64 sections. Loads validate every header field and
//! fail with the offending path rather than panicking.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::nn::dense::{Activation, DenseNet, Layer};
use crate::nn::policy::PolicyModel;

const MAGIC: &[u8; 4] = b"LNCK";
const VERSION: u32 = 1;

pub(crate) const KIND_POLICY: u8 = 1;
pub(crate) const KIND_CLASSIFIER: u8 = 2;

pub(crate) struct CkptWriter {
    w: BufWriter<File>,
    path: PathBuf,
}

impl CkptWriter {
    pub(crate) fn create(path: &Path, kind: u8) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = CkptWriter {
            w: BufWriter::new(file),
            path: path.to_path_buf(),
        };
        w.bytes(MAGIC)?;
        w.u32(VERSION)?;
        w.bytes(&[kind])?;
        Ok(w)
    }

    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.w.write_all(b).map_err(|e| Error::io(&self.path, e))
    }

    pub(crate) fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub(crate) fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub(crate) fn matrix(&mut self, m: &Array2<f64>) -> Result<()> {
        self.u32(m.nrows() as u32)?;
        self.u32(m.ncols() as u32)?;
        for v in m.iter() {
            self.f64(*v)?;
        }
        Ok(())
    }

    pub(crate) fn layer(&mut self, layer: &Layer) -> Result<()> {
        self.bytes(&[layer.act.code()])?;
        self.matrix(&layer.w)?;
        self.matrix(&layer.b)
    }

    pub(crate) fn dense(&mut self, net: &DenseNet) -> Result<()> {
        self.u32(net.layers.len() as u32)?;
        for layer in &net.layers {
            self.layer(layer)?;
        }
        Ok(())
    }

    pub(crate) fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub(crate) struct CkptReader {
    r: BufReader<File>,
    path: PathBuf,
}

impl CkptReader {
    pub(crate) fn open(path: &Path, expect_kind: u8) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = CkptReader {
            r: BufReader::new(file),
            path: path.to_path_buf(),
        };
        let mut magic = [0u8; 4];
        r.fill(&mut magic)?;
        if &magic != MAGIC {
            return Err(r.corrupt("bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.corrupt(&format!("unsupported version {version}")));
        }
        let mut kind = [0u8; 1];
        r.fill(&mut kind)?;
        if kind[0] != expect_kind {
            return Err(r.corrupt(&format!(
                "kind {} where {} expected",
                kind[0], expect_kind
            )));
        }
        Ok(r)
    }

    pub(crate) fn corrupt(&self, reason: &str) -> Error {
        Error::Checkpoint {
            path: self.path.clone(),
            reason: reason.into(),
        }
    }

    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.r.read_exact(buf).map_err(|_| self.corrupt("truncated"))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.fill(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    pub(crate) fn matrix(&mut self) -> Result<Array2<f64>> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        if rows.saturating_mul(cols) > 64 * 1024 * 1024 {
            return Err(self.corrupt("implausible matrix shape"));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(self.f64()?);
        }
        Array2::from_shape_vec((rows, cols), data).map_err(|e| self.corrupt(&format!("{e}")))
    }

    pub(crate) fn layer(&mut self) -> Result<Layer> {
        let mut code = [0u8; 1];
        self.fill(&mut code)?;
        let act = Activation::from_code(code[0])
            .ok_or_else(|| self.corrupt(&format!("unknown activation {}", code[0])))?;
        let w = self.matrix()?;
        let b = self.matrix()?;
        if b.nrows() != 1 || b.ncols() != w.ncols() {
            return Err(self.corrupt("bias shape does not match weights"));
        }
        Ok(Layer { w, b, act })
    }

    pub(crate) fn dense(&mut self) -> Result<DenseNet> {
        let n = self.u32()? as usize;
        if n == 0 || n > 64 {
            return Err(self.corrupt("implausible layer count"));
        }
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            layers.push(self.layer()?);
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(self.corrupt("layer dimensions do not chain"));
            }
        }
        Ok(DenseNet { layers })
    }

    /// Asserts the whole file has been consumed.
    pub(crate) fn finish(mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.r.read(&mut probe) {
            Ok(0) => Ok(()),
            Ok(_) => Err(self.corrupt("trailing bytes")),
            Err(e) => Err(Error::io(&self.path, e)),
        }
    }
}

pub fn save_policy(path: &Path, policy: &PolicyModel) -> Result<()> {
    let mut w = CkptWriter::create(path, KIND_POLICY)?;
    w.dense(&policy.trunk)?;
    w.layer(&policy.mean)?;
    w.layer(&policy.logstd)?;
    w.finish()
}

pub fn load_policy(path: &Path) -> Result<PolicyModel> {
    let mut r = CkptReader::open(path, KIND_POLICY)?;
    let trunk = r.dense()?;
    let mean = r.layer()?;
    let logstd = r.layer()?;
    if mean.in_dim() != trunk.out_dim() || logstd.in_dim() != trunk.out_dim() {
        return Err(r.corrupt("head dimensions do not match the trunk"));
    }
    if mean.out_dim() != logstd.out_dim() {
        return Err(r.corrupt("heads disagree on the action dimension"));
    }
    r.finish()?;
    Ok(PolicyModel {
        trunk,
        mean,
        logstd,
    })
}
