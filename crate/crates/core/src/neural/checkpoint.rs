//! Binary tensor serialization. Values travel as f64 little-endian bit
//! patterns, so an f64 round trip is exact.

use super::{NeuralError, Tensor};
use crate::scalar::{cast, to_f64, Scalar};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"EFNT";
const VERSION: u32 = 1;

/// Writes a tensor list: magic, version, count, then per tensor the rank,
/// the dimensions and the values.
pub fn write_tensors<T: Scalar, W: Write>(
    mut w: W,
    tensors: &[&Tensor<T>],
) -> Result<(), NeuralError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for t in tensors {
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for d in t.shape() {
            w.write_all(&(*d as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&to_f64(*v).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_tensors<T: Scalar, R: Read>(mut r: R) -> Result<Vec<Tensor<T>>, NeuralError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NeuralError::BadCheckpoint(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(NeuralError::BadCheckpoint(format!(
            "unsupported version {version}"
        )));
    }
    let count = read_u32(&mut r)? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let rank = read_u32(&mut r)? as usize;
        if rank > 8 {
            return Err(NeuralError::BadCheckpoint(format!(
                "implausible tensor rank {rank}"
            )));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut len = 1usize;
        for _ in 0..rank {
            let mut buf = [0u8; 8];
            r.read_exact(&mut buf)?;
            let d = u64::from_le_bytes(buf) as usize;
            len = len
                .checked_mul(d)
                .filter(|n| *n <= (1 << 32))
                .ok_or_else(|| NeuralError::BadCheckpoint("tensor too large".into()))?;
            shape.push(d);
        }
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            let mut buf = [0u8; 8];
            r.read_exact(&mut buf)?;
            data.push(cast::<T>(f64::from_le_bytes(buf)));
        }
        tensors.push(Tensor::new(shape, data)?);
    }
    Ok(tensors)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NeuralError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn save_tensors<T: Scalar>(path: &Path, tensors: &[&Tensor<T>]) -> Result<(), NeuralError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_tensors(&mut w, tensors)?;
    w.flush()?;
    Ok(())
}

pub fn load_tensors<T: Scalar>(path: &Path) -> Result<Vec<Tensor<T>>, NeuralError> {
    let file = std::fs::File::open(path)?;
    read_tensors(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Tensor::new(
            vec![3, 4],
            (0..12).map(|_| rng.gen_range(-10.0..10.0)).collect(),
        )
        .unwrap();
        let b = Tensor::new(vec![2, 1, 3, 3], (0..18).map(|i| (i as f64).exp()).collect())
            .unwrap();
        let c = Tensor::<f64>::zeros(&[5]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        save_tensors(&path, &[&a, &b, &c]).unwrap();
        let loaded = load_tensors::<f64>(&path).unwrap();
        assert_eq!(loaded.len(), 3);
        for (orig, back) in [&a, &b, &c].iter().zip(&loaded) {
            assert_eq!(orig.shape(), back.shape());
            for (x, y) in orig.data().iter().zip(back.data()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn garbage_and_truncation_are_rejected() {
        assert!(read_tensors::<f64, _>(&b"not a checkpoint"[..]).is_err());
        let t = Tensor::new(vec![2], vec![1.0f64, 2.0]).unwrap();
        let mut bytes = Vec::new();
        write_tensors(&mut bytes, &[&t]).unwrap();
        for cut in [3, 8, 12, bytes.len() - 1] {
            assert!(read_tensors::<f64, _>(&bytes[..cut]).is_err(), "cut {cut}");
        }
        // Wrong version byte.
        let mut wrong = bytes.clone();
        wrong[4] = 9;
        assert!(read_tensors::<f64, _>(&wrong[..]).is_err());
    }

    #[test]
    fn f32_tensors_roundtrip_through_f64_encoding() {
        let t = Tensor::new(vec![3], vec![0.25f32, -1.5, 3.75]).unwrap();
        let mut bytes = Vec::new();
        write_tensors(&mut bytes, &[&t]).unwrap();
        let back = read_tensors::<f32, _>(&bytes[..]).unwrap();
        assert_eq!(back[0].data(), t.data());
    }
}
