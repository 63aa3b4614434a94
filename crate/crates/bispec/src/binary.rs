//! Versioned little-endian binary files: the Clebsch–Gordan table cache
//! and MRA sample dumps.
//!
//! Both start with an 8-byte magic and a `u32` format version.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use bispec_core::mra::MraSample;
use bispec_core::signal::{RepSpec, Signal};
use bispec_core::su2::CgTable;
use bispec_core::{c64, CMat};

use crate::error::{CliError, Result};

pub const CG_MAGIC: &[u8; 8] = b"BSPECCG\0";
pub const SAMPLE_MAGIC: &[u8; 8] = b"BSPECMRA";
pub const BINARY_VERSION: u32 = 1;
pub const CACHE_ENV: &str = "BISPEC_CG_CACHE";

fn bad(path: &Path, detail: impl Into<String>) -> CliError {
    CliError::Format {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

struct Reader<'a, R> {
    inner: R,
    path: &'a Path,
}

impl<R: Read> Reader<'_, R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner
            .read_exact(&mut b)
            .map_err(|e| bad(self.path, format!("truncated: {e}")))?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn header(&mut self, magic: &[u8; 8]) -> Result<()> {
        if &self.bytes::<8>()? != magic {
            return Err(bad(self.path, "wrong magic"));
        }
        let v = self.u32()?;
        if v != BINARY_VERSION {
            return Err(bad(self.path, format!("unsupported format version {v}")));
        }
        Ok(())
    }
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

/// Layout: magic, version, `max_l: u32`, `count: u64`, then `count`
/// coefficients as `f64`.
pub fn write_cg_table(path: &Path, table: &CgTable) -> Result<()> {
    let flat = table.to_flat();
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(io(path))?);
    w.write_all(CG_MAGIC).map_err(io(path))?;
    w.write_all(&BINARY_VERSION.to_le_bytes())
        .map_err(io(path))?;
    w.write_all(&(table.max_l() as u32).to_le_bytes())
        .map_err(io(path))?;
    w.write_all(&(flat.len() as u64).to_le_bytes())
        .map_err(io(path))?;
    for x in flat {
        w.write_all(&x.to_le_bytes()).map_err(io(path))?;
    }
    w.flush().map_err(io(path))
}

pub fn read_cg_table(path: &Path) -> Result<CgTable> {
    let file = std::fs::File::open(path).map_err(io(path))?;
    let mut r = Reader {
        inner: BufReader::new(file),
        path,
    };
    r.header(CG_MAGIC)?;
    let max_l = r.u32()? as usize;
    let count = r.u64()? as usize;
    let expected: usize = (0..=max_l)
        .flat_map(|a| (0..=max_l).map(move |b| ((2 * a + 1) * (2 * b + 1)).pow(2)))
        .sum();
    if count != expected {
        return Err(bad(
            path,
            format!("max_l {max_l} needs {expected} entries, header says {count}"),
        ));
    }
    let data = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let mut rest = Vec::new();
    r.inner.read_to_end(&mut rest).map_err(io(path))?;
    if !rest.is_empty() {
        return Err(bad(path, "trailing bytes"));
    }
    Ok(CgTable::from_flat(max_l, &data)?)
}

/// Coupling table covering `max_l`. When `BISPEC_CG_CACHE` names a file,
/// a cached table with a large enough `max_l` is reused; otherwise the
/// table is built and written there. Unreadable caches are an error.
pub fn cg_table(max_l: usize) -> Result<CgTable> {
    match std::env::var_os(CACHE_ENV) {
        Some(p) if !p.is_empty() => cg_table_cached(max_l, Path::new(&p)),
        _ => Ok(CgTable::new(max_l)),
    }
}

pub fn cg_table_cached(max_l: usize, path: &Path) -> Result<CgTable> {
    if path.exists() {
        let cached = read_cg_table(path)?;
        if cached.max_l() >= max_l {
            return Ok(cached);
        }
    }
    let table = CgTable::new(max_l);
    write_cg_table(path, &table)?;
    Ok(table)
}

/// Layout: magic, version, `bands: u32`, `(l: u32, R: u32)` per band,
/// `count: u64`, then every sample's blocks in band order, row-major,
/// as `(re, im)` pairs.
pub fn write_samples(path: &Path, spec: &RepSpec, samples: &[MraSample]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(io(path))?);
    let mut put = |b: &[u8]| w.write_all(b).map_err(io(path));
    put(SAMPLE_MAGIC)?;
    put(&BINARY_VERSION.to_le_bytes())?;
    put(&(spec.bands().len() as u32).to_le_bytes())?;
    for &(l, r) in spec.bands() {
        put(&(l as u32).to_le_bytes())?;
        put(&(r as u32).to_le_bytes())?;
    }
    put(&(samples.len() as u64).to_le_bytes())?;
    for s in samples {
        for (_, a) in s.y.iter() {
            for i in 0..a.nrows() {
                for j in 0..a.ncols() {
                    put(&a[(i, j)].re.to_le_bytes())?;
                    put(&a[(i, j)].im.to_le_bytes())?;
                }
            }
        }
    }
    w.flush().map_err(io(path))
}

pub fn read_samples(path: &Path) -> Result<(RepSpec, Vec<Signal>)> {
    let file = std::fs::File::open(path).map_err(io(path))?;
    let mut r = Reader {
        inner: BufReader::new(file),
        path,
    };
    r.header(SAMPLE_MAGIC)?;
    let nb = r.u32()? as usize;
    let bands = (0..nb)
        .map(|_| Ok((r.u32()? as usize, r.u32()? as usize)))
        .collect::<Result<Vec<_>>>()?;
    let spec = RepSpec::new(bands)?;
    let count = r.u64()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let mut blocks = Vec::with_capacity(nb);
        for &(l, rr) in spec.bands() {
            let mut m = CMat::zeros(2 * l + 1, rr);
            for i in 0..m.nrows() {
                for j in 0..rr {
                    m[(i, j)] = c64(r.f64()?, r.f64()?);
                }
            }
            blocks.push(m);
        }
        out.push(Signal::new(spec.clone(), blocks)?);
    }
    Ok((spec, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use bispec_core::mra::sample_mra;
    use bispec_core::signal::{random_signal, RealStructure};

    #[test]
    fn cg_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cg.bin");
        let table = CgTable::new(3);
        write_cg_table(&path, &table).unwrap();
        let back = read_cg_table(&path).unwrap();
        assert_eq!(back.to_flat(), table.to_flat());
        // a smaller request reuses the file, a larger one rebuilds it
        assert_eq!(cg_table_cached(2, &path).unwrap().max_l(), 3);
        assert_eq!(cg_table_cached(4, &path).unwrap().max_l(), 4);
        assert_eq!(read_cg_table(&path).unwrap().max_l(), 4);
    }

    #[test]
    fn corrupt_cache_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cg.bin");
        write_cg_table(&path, &CgTable::new(1)).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_cg_table(&path), Err(CliError::Format { .. })));
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(read_cg_table(&path)
            .unwrap_err()
            .to_string()
            .contains("magic"));
    }

    #[test]
    fn sample_dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.bin");
        let spec = RepSpec::uniform(2, 2).unwrap();
        let f = random_signal(&spec, RealStructure::CryoReal, 3);
        let samples = sample_mra(&f, 0.5, 7, RealStructure::CryoReal, 1).unwrap();
        write_samples(&path, &spec, &samples).unwrap();
        let (spec2, back) = read_samples(&path).unwrap();
        assert_eq!(spec2, spec);
        assert_eq!(back.len(), 7);
        for (a, b) in samples.iter().zip(&back) {
            assert_eq!(&a.y, b);
        }
    }
}
