//! Binary container for named tensors.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic      8 bytes  "TGCKPT\0\0"
//! version    u32
//! header     u64 length + UTF-8 bytes (free-form, JSON by convention)
//! count      u64
//! records    count x { u32 name length, name bytes, u32 rank, rank x u64 dims, f64 values }
//! ```
//!
//! Values are stored as raw IEEE-754 bits so a round-trip is bit-exact.

use std::io::{Read, Write};

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TGCKPT\0\0";
pub const FORMAT_VERSION: u32 = 1;

fn corrupt(e: std::io::Error) -> Error {
    Error::Corrupt(e.to_string())
}

pub fn write_container<W: Write>(
    w: &mut W,
    header: &str,
    records: &[(String, Tensor)],
) -> std::io::Result<()> {
    write_container_versioned(w, FORMAT_VERSION, header, records)
}

/// Same as [`write_container`] with an explicit version number.
pub fn write_container_versioned<W: Write>(
    w: &mut W,
    version: u32,
    header: &str,
    records: &[(String, Tensor)],
) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&version.to_le_bytes())?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(header.as_bytes())?;
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    for (name, t) in records {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_bits().to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(corrupt)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(corrupt)?;
    Ok(u64::from_le_bytes(b))
}

// Upper bound on any length field; guards allocations on corrupt input.
const MAX_LEN: u64 = 1 << 32;

fn read_len<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let n = read_u64(r)?;
    if n > MAX_LEN {
        return Err(Error::Corrupt(format!("{what} length {n} is implausible")));
    }
    Ok(n as usize)
}

pub fn read_container<R: Read>(r: &mut R) -> Result<(String, Vec<(String, Tensor)>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(corrupt)?;
    if &magic != MAGIC {
        return Err(Error::Corrupt("bad magic bytes".into()));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let hlen = read_len(r, "header")?;
    let mut hbytes = vec![0u8; hlen];
    r.read_exact(&mut hbytes).map_err(corrupt)?;
    let header = String::from_utf8(hbytes).map_err(|e| Error::Corrupt(e.to_string()))?;

    let count = read_len(r, "record count")?;
    let mut records = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let nlen = read_u32(r)? as usize;
        let mut nb = vec![0u8; nlen];
        r.read_exact(&mut nb).map_err(corrupt)?;
        let name = String::from_utf8(nb).map_err(|e| Error::Corrupt(e.to_string()))?;
        let rank = read_u32(r)? as usize;
        if rank > 8 {
            return Err(Error::Corrupt(format!("record {name}: rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_len(r, "dimension")?);
        }
        let n: usize = shape.iter().product();
        if n as u64 > MAX_LEN {
            return Err(Error::Corrupt(format!("record {name}: {n} values")));
        }
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f64::from_bits(read_u64(r)?));
        }
        records.push((name, Tensor::new(shape, data)?));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(corrupt)? != 0 {
        return Err(Error::Corrupt("trailing bytes after last record".into()));
    }
    Ok((header, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            vals in proptest::collection::vec(any::<f64>(), 0..40),
            header in ".{0,20}",
        ) {
            let t = Tensor::new(vec![vals.len()], vals).unwrap();
            let recs = vec![("w".to_string(), t.clone()), ("empty".to_string(), Tensor::zeros(&[0, 3]))];
            let mut buf = Vec::new();
            write_container(&mut buf, &header, &recs).unwrap();
            let (h, back) = read_container(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(h, header);
            prop_assert_eq!(back.len(), 2);
            prop_assert!(back[0].1.bit_eq(&t));
            prop_assert_eq!(back[1].1.shape(), &[0, 3]);
        }
    }

    #[test]
    fn wrong_version_is_reported() {
        let mut buf = Vec::new();
        write_container_versioned(&mut buf, 99, "{}", &[]).unwrap();
        match read_container(&mut buf.as_slice()) {
            Err(Error::Version {
                found: 99,
                expected,
            }) => assert_eq!(expected, FORMAT_VERSION),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let mut buf = Vec::new();
        let recs = vec![("w".to_string(), Tensor::filled(&[2, 2], 1.5))];
        write_container(&mut buf, "{}", &recs).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(
            read_container(&mut buf.as_slice()),
            Err(Error::Corrupt(_))
        ));
    }
}
