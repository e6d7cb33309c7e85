//! Binary checkpoint layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "DUELNET\0"
//! version    u16      = 1
//! shape      4 x u32  obs_len, hidden, skills, moves
//! blocks     u16      number of entries in the shape table
//! per block  u8 name length, name bytes (ASCII), u8 rank, rank x u32 dims
//! payload    f32 values of every block in table order, row-major
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::params::{Block, NetShape, NetworkParams};
use crate::error::CheckpointError;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DUELNET\0";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn write_checkpoint<W: Write>(params: &NetworkParams<f32>, mut out: W) -> Result<(), CheckpointError> {
    let s = params.shape();
    let mut buf = Vec::with_capacity(64 + params.len() * 4);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [s.obs_len, s.hidden, s.skills, s.moves] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(Block::ALL.len() as u16).to_le_bytes());
    for b in Block::ALL {
        let name = b.name().as_bytes();
        buf.push(name.len() as u8);
        buf.extend_from_slice(name);
        let dims = b.dims(s);
        buf.push(dims.len() as u8);
        for d in dims {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    for v in params.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

fn take<'a>(data: &mut &'a [u8], n: usize) -> Result<&'a [u8], CheckpointError> {
    if data.len() < n {
        return Err(CheckpointError::Shape("truncated checkpoint".into()));
    }
    let (head, rest) = data.split_at(n);
    *data = rest;
    Ok(head)
}

fn read_u32(data: &mut &[u8]) -> Result<u32, CheckpointError> {
    Ok(u32::from_le_bytes(take(data, 4)?.try_into().expect("4 bytes")))
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<NetworkParams<f32>, CheckpointError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut data = bytes.as_slice();
    if take(&mut data, 8)? != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u16::from_le_bytes(take(&mut data, 2)?.try_into().expect("2 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let shape = NetShape {
        obs_len: read_u32(&mut data)? as usize,
        hidden: read_u32(&mut data)? as usize,
        skills: read_u32(&mut data)? as usize,
        moves: read_u32(&mut data)? as usize,
    };
    let count = u16::from_le_bytes(take(&mut data, 2)?.try_into().expect("2 bytes")) as usize;
    if count != Block::ALL.len() {
        return Err(CheckpointError::Shape(format!("expected {} blocks, found {count}", Block::ALL.len())));
    }
    for b in Block::ALL {
        let len = take(&mut data, 1)?[0] as usize;
        let name = take(&mut data, len)?;
        if name != b.name().as_bytes() {
            return Err(CheckpointError::Shape(format!(
                "expected block `{}`, found `{}`",
                b.name(),
                String::from_utf8_lossy(name)
            )));
        }
        let rank = take(&mut data, 1)?[0] as usize;
        let dims = (0..rank).map(|_| read_u32(&mut data).map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        if dims != b.dims(&shape) {
            return Err(CheckpointError::Shape(format!("block `{}` has dims {dims:?}", b.name())));
        }
    }
    let n = NetworkParams::<f32>::zeros(shape).len();
    if data.len() != n * 4 {
        return Err(CheckpointError::Shape(format!("expected {} payload bytes, found {}", n * 4, data.len())));
    }
    let values = data
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    NetworkParams::from_vec(shape, values).map_err(|e| CheckpointError::Shape(e.to_string()))
}

pub fn save_checkpoint(params: &NetworkParams<f32>, path: &Path) -> Result<(), CheckpointError> {
    let mut buf = Vec::new();
    write_checkpoint(params, &mut buf)?;
    // Write-then-rename so readers never see a partial file.
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, &buf)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<NetworkParams<f32>, CheckpointError> {
    let file = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shape() -> NetShape {
        NetShape { obs_len: 6, hidden: 4, skills: 3, moves: 18 }
    }

    #[test]
    fn header_layout() {
        let p = NetworkParams::<f32>::init(shape(), 1);
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        assert_eq!(&buf[..8], CHECKPOINT_MAGIC);
        assert_eq!(u16::from_le_bytes([buf[8], buf[9]]), 1);
        assert_eq!(u32::from_le_bytes(buf[10..14].try_into().unwrap()), 6);
        let last = f32::from_le_bytes(buf[buf.len() - 4..].try_into().unwrap());
        assert_eq!(last, *p.as_slice().last().unwrap());
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let p = NetworkParams::<f32>::init(shape(), 1);
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(&bad[..]), Err(CheckpointError::BadMagic)));
        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(matches!(read_checkpoint(&bad[..]), Err(CheckpointError::Version(9))));
        assert!(matches!(read_checkpoint(&buf[..buf.len() - 1]), Err(CheckpointError::Shape(_))));
    }

    proptest! {
        #[test]
        fn bit_exact_round_trip(seed in any::<u64>(), bits in proptest::collection::vec(any::<u32>(), 8)) {
            let mut p = NetworkParams::<f32>::init(shape(), seed);
            // Include arbitrary bit patterns, NaN payloads included.
            for (i, b) in bits.iter().enumerate() {
                p.as_mut_slice()[i * 7] = f32::from_bits(*b);
            }
            let mut buf = Vec::new();
            write_checkpoint(&p, &mut buf).unwrap();
            let back = read_checkpoint(&buf[..]).unwrap();
            let mut again = Vec::new();
            write_checkpoint(&back, &mut again).unwrap();
            prop_assert_eq!(buf, again);
            let same = p.as_slice().iter().zip(back.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
        }
    }
}
