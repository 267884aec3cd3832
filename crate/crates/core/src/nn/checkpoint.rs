//! Versioned binary checkpoints.
//!
//! Byte layout (all integers and floats little-endian):
//!
//! ```text
//! magic            8 bytes   b"STRIDRCK"
//! version          u32       currently 1
//! iteration        u64       training iterations completed
//! actor            MLP block
//! critic           MLP block
//! normalizer       u32 dim, dim×f64 mean, dim×f64 std, u64 count, f64 floor
//! adam (actor)     ADAM block
//! adam (critic)    ADAM block
//!
//! MLP block:
//!   n_layers       u32       number of weight matrices
//!   dims           (n_layers+1)×u32, input dimension first
//!   output kind    u8        0 = identity, 1 = tanh
//!   per layer:     rows×cols×f64 weights in row-major order, rows×f64 bias
//!
//! ADAM block:
//!   step           u64
//!   per layer:     m_w, v_w (row-major f64), m_b, v_b (f64)
//! ```

use super::{AdamState, Layer, Mlp, Normalizer, OutputActivation};
use nalgebra::{DMatrix, DVector};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 8] = b"STRIDRCK";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found}, this build reads version {supported}")]
    Version { found: u32, supported: u32 },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

/// Everything needed to resume or evaluate a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub iteration: u64,
    pub actor: Mlp,
    pub critic: Mlp,
    pub normalizer: Normalizer,
    pub adam_actor: AdamState,
    pub adam_critic: AdamState,
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn matrix_row_major(&mut self, m: &DMatrix<f64>) {
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                self.f64(m[(r, c)]);
            }
        }
    }
    fn vector(&mut self, v: &DVector<f64>) {
        for x in v.iter() {
            self.f64(*x);
        }
    }
    fn mlp(&mut self, net: &Mlp) {
        let dims = net.dims();
        self.u32(net.layers().len() as u32);
        for d in &dims {
            self.u32(*d as u32);
        }
        self.buf.push(match net.output_activation() {
            OutputActivation::Identity => 0,
            OutputActivation::Tanh => 1,
        });
        for layer in net.layers() {
            self.matrix_row_major(&layer.w);
            self.vector(&layer.b);
        }
    }
    fn adam(&mut self, s: &AdamState) {
        self.u64(s.step);
        for i in 0..s.m_w.len() {
            self.matrix_row_major(&s.m_w[i]);
            self.matrix_row_major(&s.v_w[i]);
            self.vector(&s.m_b[i]);
            self.vector(&s.v_b[i]);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.buf.len() {
            return Err(CheckpointError::Corrupt(format!(
                "unexpected end of file at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn matrix_row_major(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>, CheckpointError> {
        let mut m = DMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = self.f64()?;
            }
        }
        Ok(m)
    }
    fn vector(&mut self, n: usize) -> Result<DVector<f64>, CheckpointError> {
        let mut v = DVector::zeros(n);
        for i in 0..n {
            v[i] = self.f64()?;
        }
        Ok(v)
    }
    fn mlp(&mut self) -> Result<Mlp, CheckpointError> {
        let n_layers = self.u32()? as usize;
        if n_layers == 0 || n_layers > 64 {
            return Err(CheckpointError::Corrupt(format!("implausible layer count {n_layers}")));
        }
        let mut dims = Vec::with_capacity(n_layers + 1);
        for _ in 0..=n_layers {
            dims.push(self.u32()? as usize);
        }
        let output = match self.take(1)?[0] {
            0 => OutputActivation::Identity,
            1 => OutputActivation::Tanh,
            k => return Err(CheckpointError::Corrupt(format!("unknown output activation tag {k}"))),
        };
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let w = self.matrix_row_major(dims[l + 1], dims[l])?;
            let b = self.vector(dims[l + 1])?;
            layers.push(Layer { w, b });
        }
        Mlp::from_layers(layers, output).map_err(|e| CheckpointError::Corrupt(e.to_string()))
    }
    fn adam(&mut self, net: &Mlp) -> Result<AdamState, CheckpointError> {
        let mut s = AdamState::new(net);
        s.step = self.u64()?;
        for i in 0..net.layers().len() {
            let (rows, cols) = (net.layers()[i].w.nrows(), net.layers()[i].w.ncols());
            s.m_w[i] = self.matrix_row_major(rows, cols)?;
            s.v_w[i] = self.matrix_row_major(rows, cols)?;
            s.m_b[i] = self.vector(net.layers()[i].b.len())?;
            s.v_b[i] = self.vector(net.layers()[i].b.len())?;
        }
        Ok(s)
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    let io_err = |source| CheckpointError::Io { path: path.display().to_string(), source };
    let mut w = Writer { buf: Vec::new() };
    w.buf.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.u64(checkpoint.iteration);
    w.mlp(&checkpoint.actor);
    w.mlp(&checkpoint.critic);
    let n = &checkpoint.normalizer;
    w.u32(n.dim() as u32);
    w.vector(&n.mean);
    w.vector(&n.std);
    w.u64(n.count);
    w.f64(n.floor);
    w.adam(&checkpoint.adam_actor);
    w.adam(&checkpoint.adam_critic);
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(&w.buf).map_err(io_err)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let io_err = |source| CheckpointError::Io { path: path.display().to_string(), source };
    let mut buf = Vec::new();
    fs::File::open(path).map_err(io_err)?.read_to_end(&mut buf).map_err(io_err)?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::Version { found: version, supported: VERSION });
    }
    let iteration = r.u64()?;
    let actor = r.mlp()?;
    let critic = r.mlp()?;
    let dim = r.u32()? as usize;
    let mean = r.vector(dim)?;
    let std = r.vector(dim)?;
    let count = r.u64()?;
    let floor = r.f64()?;
    let normalizer = Normalizer { mean, std, count, floor };
    let adam_actor = r.adam(&actor)?;
    let adam_critic = r.adam(&critic)?;
    if r.pos != buf.len() {
        return Err(CheckpointError::Corrupt(format!(
            "{} trailing bytes after checkpoint payload",
            buf.len() - r.pos
        )));
    }
    Ok(Checkpoint { iteration, actor, critic, normalizer, adam_actor, adam_critic })
}
