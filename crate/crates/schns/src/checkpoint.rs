//! Binary checkpoints for bit-exact restarts.
//!
//! Little-endian layout: magic `SCHNS1`, version u32, 32-byte physics hash
//! of the config, grid dims (nx, ny as u32, lx, ly as f64), step index u64,
//! time f64, field arrays row-major (ux, uy, phi, mu, psi/kpsi wall lines),
//! then the RNG state (seed, stream, word position). Reads validate magic,
//! version, hash, and exact length before touching any field data.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::io::{Read, Write};
use std::path::Path;

use crate::config::RunConfig;
use crate::dynamics::State;
use crate::error::{Result, SchnsError};
use crate::grid::{BoundaryField, Grid, ScalarField, VectorField};

pub const MAGIC: &[u8; 6] = b"SCHNS1";
pub const VERSION: u32 = 1;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Self { buf: Vec::new() }
    }
    fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    fn u128(&mut self, v: u128) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.f64(*v);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(SchnsError::CheckpointFormat(format!(
                "truncated: wanted {n} bytes at offset {}, file has {}",
                self.pos,
                self.buf.len()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(8 * n)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn encode(state: &State, rng: &ChaCha12Rng, step: u64, config: &RunConfig) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.bytes(&config.physics_hash());
    w.u32(config.grid.nx as u32);
    w.u32(config.grid.ny as u32);
    w.f64(config.grid.lx);
    w.f64(config.grid.ly);
    w.u64(step);
    w.f64(state.t);
    w.f64s(&state.u.ux);
    w.f64s(&state.u.uy);
    w.f64s(&state.phi.data);
    w.f64s(&state.mu.data);
    w.f64s(&state.psi.bottom);
    w.f64s(&state.psi.top);
    w.f64s(&state.kpsi.bottom);
    w.f64s(&state.kpsi.top);
    w.bytes(&rng.get_seed());
    w.u64(rng.get_stream());
    w.u128(rng.get_word_pos());
    w.buf
}

pub fn decode(bytes: &[u8], config: &RunConfig) -> Result<(State, ChaCha12Rng, u64)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.take(MAGIC.len())?;
    if magic != MAGIC {
        return Err(SchnsError::CheckpointFormat("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(SchnsError::CheckpointFormat(format!(
            "unsupported version {version}"
        )));
    }
    let hash = r.take(32)?;
    if hash != config.physics_hash() {
        return Err(SchnsError::CheckpointRefused(
            "config hash mismatch: checkpoint belongs to a different physics setup".into(),
        ));
    }
    let nx = r.u32()? as usize;
    let ny = r.u32()? as usize;
    let lx = r.f64()?;
    let ly = r.f64()?;
    if nx != config.grid.nx || ny != config.grid.ny {
        return Err(SchnsError::CheckpointRefused(format!(
            "grid mismatch: checkpoint {nx}x{ny}, config {}x{}",
            config.grid.nx, config.grid.ny
        )));
    }
    let _ = Grid::new(nx, ny, lx, ly)?;
    let step = r.u64()?;
    let t = r.f64()?;
    let n = nx * ny;
    let ux = r.f64s(n)?;
    let uy = r.f64s(n)?;
    let phi = r.f64s(n)?;
    let mu = r.f64s(n)?;
    let psi_b = r.f64s(nx)?;
    let psi_t = r.f64s(nx)?;
    let kpsi_b = r.f64s(nx)?;
    let kpsi_t = r.f64s(nx)?;
    let seed: [u8; 32] = r.take(32)?.try_into().unwrap();
    let stream = r.u64()?;
    let word_pos = r.u128()?;
    if r.pos != bytes.len() {
        return Err(SchnsError::CheckpointFormat(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    let mut rng = ChaCha12Rng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);
    let state = State {
        u: VectorField { ux, uy },
        phi: ScalarField { data: phi },
        psi: BoundaryField {
            bottom: psi_b,
            top: psi_t,
        },
        mu: ScalarField { data: mu },
        kpsi: BoundaryField {
            bottom: kpsi_b,
            top: kpsi_t,
        },
        t,
    };
    Ok((state, rng, step))
}

pub fn write_file(
    path: &Path,
    state: &State,
    rng: &ChaCha12Rng,
    step: u64,
    config: &RunConfig,
) -> Result<()> {
    let bytes = encode(state, rng, step, config);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_file(path: &Path, config: &RunConfig) -> Result<(State, ChaCha12Rng, u64)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes, config)
}
