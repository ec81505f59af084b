//! Binary checkpoint layout, all integers and floats little-endian:
//!
//! ```text
//! MLP:   b"IRSMLP01" | u32 layer_count | u32 × layer_count sizes
//!        | u8 output (0 identity, 1 tanh) | u64 n | f64 × n params (row-major)
//! Adam:  b"IRSADAM1" | f64 lr | f64 beta1 | f64 beta2 | f64 eps | u64 step
//!        | u64 n | f64 × n first moments | f64 × n second moments
//! ```

use std::io::{Read, Write};

use super::{AdamState, Mlp, OutputActivation};
use crate::error::{Error, Result};

const MLP_MAGIC: &[u8; 8] = b"IRSMLP01";
const ADAM_MAGIC: &[u8; 8] = b"IRSADAM1";

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact(r)?))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact(r)?))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact(r)?))
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| read_f64(r)).collect()
}

fn write_f64s(w: &mut impl Write, xs: &[f64]) -> Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn expect_magic(r: &mut impl Read, magic: &[u8; 8]) -> Result<()> {
    let got: [u8; 8] = read_exact(r)?;
    if &got != magic {
        return Err(Error::Checkpoint(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&got)
        )));
    }
    Ok(())
}

impl Mlp {
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MLP_MAGIC)?;
        w.write_all(&(self.sizes().len() as u32).to_le_bytes())?;
        for &s in self.sizes() {
            w.write_all(&(s as u32).to_le_bytes())?;
        }
        let act = match self.output_activation() {
            OutputActivation::Identity => 0u8,
            OutputActivation::Tanh => 1u8,
        };
        w.write_all(&[act])?;
        w.write_all(&(self.num_params() as u64).to_le_bytes())?;
        write_f64s(w, self.params())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        expect_magic(r, MLP_MAGIC)?;
        let layers = read_u32(r)? as usize;
        if !(2..=64).contains(&layers) {
            return Err(Error::Checkpoint(format!("implausible layer count {layers}")));
        }
        let sizes = (0..layers).map(|_| read_u32(r).map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
        let output = match read_exact::<1>(r)?[0] {
            0 => OutputActivation::Identity,
            1 => OutputActivation::Tanh,
            other => return Err(Error::Checkpoint(format!("unknown output activation {other}"))),
        };
        let n = read_u64(r)? as usize;
        let expected: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        if n != expected {
            return Err(Error::Checkpoint(format!("parameter count {n} does not match sizes {sizes:?}")));
        }
        let params = read_f64s(r, n)?;
        Mlp::from_params(&sizes, output, params).ok_or_else(|| Error::Checkpoint("invalid layer sizes".into()))
    }
}

impl AdamState {
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(ADAM_MAGIC)?;
        write_f64s(w, &[self.lr, self.beta1, self.beta2, self.epsilon])?;
        w.write_all(&self.step.to_le_bytes())?;
        w.write_all(&(self.m.len() as u64).to_le_bytes())?;
        write_f64s(w, &self.m)?;
        write_f64s(w, &self.v)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        expect_magic(r, ADAM_MAGIC)?;
        let lr = read_f64(r)?;
        let beta1 = read_f64(r)?;
        let beta2 = read_f64(r)?;
        let epsilon = read_f64(r)?;
        let step = read_u64(r)?;
        let n = read_u64(r)? as usize;
        let m = read_f64s(r, n)?;
        let v = read_f64s(r, n)?;
        Ok(Self { lr, beta1, beta2, epsilon, step, m, v })
    }
}
