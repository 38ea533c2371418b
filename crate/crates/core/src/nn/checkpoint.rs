//! Little-endian binary checkpoints.
//!
//! Layout:
//!
//! | field            | type                          |
//! |------------------|-------------------------------|
//! | magic            | 8 bytes, `CMPABCNN`           |
//! | version          | u32                           |
//! | n_sizes          | u32                           |
//! | layer sizes      | n_sizes × u32                 |
//! | encoder depth    | u32                           |
//! | learning rate    | f64                           |
//! | momentum         | f64                           |
//! | per layer        | weights (row-major, out × in) then biases, f64 |
//! | per layer        | weight velocities then bias velocities, f64    |

use std::io::{Read, Write};

use super::Network;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CMPABCNN";
pub const CHECKPOINT_VERSION: u32 = 1;

fn io_err(e: std::io::Error) -> Error {
    Error::io("<checkpoint>", e)
}

fn put_f64s(out: &mut impl Write, xs: &[f64]) -> Result<()> {
    for x in xs {
        out.write_all(&x.to_le_bytes()).map_err(io_err)?;
    }
    Ok(())
}

pub fn write_checkpoint(net: &Network, mut out: impl Write) -> Result<()> {
    out.write_all(CHECKPOINT_MAGIC).map_err(io_err)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io_err)?;
    let sizes = net.layer_sizes();
    out.write_all(&(sizes.len() as u32).to_le_bytes()).map_err(io_err)?;
    for s in &sizes {
        out.write_all(&(*s as u32).to_le_bytes()).map_err(io_err)?;
    }
    out.write_all(&(net.encoder_depth() as u32).to_le_bytes())
        .map_err(io_err)?;
    put_f64s(&mut out, &[net.learning_rate(), net.momentum()])?;
    for layer in net.layers() {
        put_f64s(&mut out, layer.weights())?;
        put_f64s(&mut out, layer.biases())?;
    }
    for layer in net.layers() {
        put_f64s(&mut out, layer.velocity_weights())?;
        put_f64s(&mut out, layer.velocity_biases())?;
    }
    Ok(())
}

struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|_| {
            Error::Format(format!(
                "checkpoint truncated at byte {} while reading {what}",
                self.offset
            ))
        })?;
        self.offset += N as u64;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(what)?))
    }

    fn f64s(&mut self, dst: &mut [f64], what: &str) -> Result<()> {
        for d in dst {
            *d = f64::from_le_bytes(self.bytes(what)?);
        }
        Ok(())
    }
}

pub fn read_checkpoint(input: impl Read) -> Result<Network> {
    let mut cur = Cursor {
        inner: input,
        offset: 0,
    };
    if &cur.bytes::<8>("magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a network checkpoint (bad magic)".into()));
    }
    let version = cur.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let n_sizes = cur.u32("size count")? as usize;
    if !(2..=64).contains(&n_sizes) {
        return Err(Error::Format(format!("implausible layer count {n_sizes}")));
    }
    let sizes = (0..n_sizes)
        .map(|_| cur.u32("layer size").map(|s| s as usize))
        .collect::<Result<Vec<_>>>()?;
    if sizes.iter().any(|s| *s == 0 || *s > 1 << 20) {
        return Err(Error::Format(format!("implausible layer sizes {sizes:?}")));
    }
    let depth = cur.u32("encoder depth")? as usize;
    let mut net = Network::from_sizes(&sizes, depth).map_err(|e| Error::Format(e.to_string()))?;
    let mut hyper = [0.0; 2];
    cur.f64s(&mut hyper, "hyperparameters")?;
    net.learning_rate = hyper[0];
    net.momentum = hyper[1];
    for layer in net.layers.iter_mut() {
        cur.f64s(&mut layer.weights, "weights")?;
        cur.f64s(&mut layer.biases, "biases")?;
    }
    for layer in net.layers.iter_mut() {
        cur.f64s(&mut layer.velocity_weights, "weight velocities")?;
        cur.f64s(&mut layer.velocity_biases, "bias velocities")?;
    }
    let mut extra = [0u8; 1];
    if cur.inner.read(&mut extra).map_err(io_err)? != 0 {
        return Err(Error::Format(format!("trailing bytes after offset {}", cur.offset)));
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_network, sgd_momentum_step, Gradients};

    #[test]
    fn round_trip_preserves_every_bit() {
        let mut net = init_network(&[7, 5, 3], 11)
            .unwrap()
            .with_hyperparameters(0.03, 0.9)
            .unwrap();
        let mut g = Gradients::zeros_like(&net);
        g.weights[1][2] = 0.25;
        g.biases[3][0] = -1.5;
        sgd_momentum_step(&mut net, &g, 0.1, 0.9).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&net, &mut buf).unwrap();
        assert_eq!(&buf[..8], CHECKPOINT_MAGIC);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn header_layout() {
        let net = crate::nn::Network::zeros(&[3, 2]).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&net, &mut buf).unwrap();
        // magic + version + count + 3 sizes + depth + 2 hyper
        let header = 8 + 4 + 4 + 3 * 4 + 4 + 16;
        let params = (6 + 2) + (6 + 3);
        assert_eq!(buf.len(), header + 2 * params * 8);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[16..20].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[20..24].try_into().unwrap()), 2);
    }

    #[test]
    fn corrupt_inputs() {
        let net = init_network(&[4, 2], 1).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&net, &mut buf).unwrap();
        assert!(read_checkpoint(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(bad.as_slice()).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_checkpoint(long.as_slice()).is_err());
    }
}
