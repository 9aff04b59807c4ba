//! Self-describing binary container for named tensors.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  b"PHALIGN\0"
//! version u32      1
//! count   u32
//! count × entry:
//!   name_len u32, name (UTF-8)
//!   ndim u32, ndim × u64 extents
//!   product(extents) × f64
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PHALIGN\0";
pub const VERSION: u32 = 1;

pub fn write_entries<W: Write>(mut w: W, entries: &[(String, Tensor)]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, t) in entries {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.ndim() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.len() * 8);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| Error::Container(format!("truncated header: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_entries<R: Read>(mut r: R) -> Result<Vec<(String, Tensor)>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Container("missing magic".into()))?;
    if &magic != MAGIC {
        return Err(Error::Container("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)
            .map_err(|e| Error::Container(format!("truncated name: {e}")))?;
        let name = String::from_utf8(name).map_err(|_| Error::Container("name is not UTF-8".into()))?;
        let ndim = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)
                .map_err(|e| Error::Container(format!("truncated shape: {e}")))?;
            shape.push(u64::from_le_bytes(b) as usize);
        }
        let n: usize = shape.iter().product();
        let mut raw = vec![0u8; n * 8];
        r.read_exact(&mut raw)
            .map_err(|e| Error::Container(format!("truncated data for `{name}`: {e}")))?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}

pub fn save(path: &Path, entries: &[(String, Tensor)]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_entries(std::io::BufWriter::new(f), entries)
}

pub fn load(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_entries(std::io::BufReader::new(f))
}

/// Looks up an entry by name.
pub fn find<'a>(entries: &'a [(String, Tensor)], name: &str) -> Result<&'a Tensor> {
    entries
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, t)| t)
        .ok_or_else(|| Error::Container(format!("missing entry `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(vals in proptest::collection::vec(any::<f64>(), 1..40), name in "[a-z.]{1,12}") {
            let t = Tensor::new([vals.len()], vals.clone()).unwrap();
            let mut buf = Vec::new();
            write_entries(&mut buf, &[(name.clone(), t)]).unwrap();
            let back = read_entries(buf.as_slice()).unwrap();
            prop_assert_eq!(&back[0].0, &name);
            let bits: Vec<u64> = back[0].1.data().iter().map(|v| v.to_bits()).collect();
            let want: Vec<u64> = vals.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(bits, want);
        }
    }

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        write_entries(&mut buf, &[("w".into(), Tensor::new([1, 2], vec![1.0, 2.0]).unwrap())]).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(buf.len(), 8 + 4 + 4 + 4 + 1 + 4 + 16 + 16);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_entries(&b"NOTMAGIC"[..]).is_err());
        let mut buf = Vec::new();
        write_entries(&mut buf, &[("w".into(), Tensor::zeros([4]))]).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_entries(buf.as_slice()).is_err());
    }
}
