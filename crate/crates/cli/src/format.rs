//! Binary stream and sketch files.
//!
//! Stream (`CMSTRM01`): 8-byte magic, little-endian `u64` item count, then
//! the items as little-endian `u32`.
//!
//! Sketch (`CMSKCH01`), all integers little-endian:
//!
//! | field          | type                                  |
//! |----------------|---------------------------------------|
//! | magic          | 8 bytes                               |
//! | version        | `u16`                                 |
//! | counter bits   | `u8` (32 or 64)                       |
//! | flags          | `u8`, bit 0 = saturated               |
//! | depth, width   | `u32`, `u32`                          |
//! | PRNG id        | `u8` length + ASCII                   |
//! | epsilon, delta | `f64`, `f64`                          |
//! | width mode     | `u8` tag + `u64` (explicit width)     |
//! | depth mode     | `u8` tag + `u64` (explicit depth)     |
//! | seeds          | `depth` x `u64`                       |
//! | items          | `u64`                                 |
//! | counters       | `depth * width` cells, row-major      |

use std::io::{self, Read, Write};

use tabsketch::hashing::TABLE_PRNG;
use tabsketch::{CountMinSketch, Counter, DepthMode, SketchParams, WidthMode};
use thiserror::Error;

pub const STREAM_MAGIC: &[u8; 8] = b"CMSTRM01";
pub const SKETCH_MAGIC: &[u8; 8] = b"CMSKCH01";
pub const SKETCH_VERSION: u16 = 1;

const FLAG_SATURATED: u8 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a {expected} file (magic {found:?})")]
    BadMagic { expected: &'static str, found: String },
    #[error("file ends early")]
    Truncated,
    #[error("{0} unexpected bytes after the end of the data")]
    TrailingData(u64),
    #[error("unsupported sketch file version {0}")]
    Version(u16),
    #[error("{0}")]
    Invalid(String),
    #[error("sketch has {stored}-bit counters; loading them as {requested}-bit would narrow them")]
    Narrowing { stored: u32, requested: u32 },
}

pub type FormatResult<T> = std::result::Result<T, FormatError>;

fn read_exact_or_truncated(r: &mut impl Read, buf: &mut [u8]) -> FormatResult<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FormatError::Truncated,
        _ => FormatError::Io(e),
    })
}

fn read_array<const N: usize>(r: &mut impl Read) -> FormatResult<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact_or_truncated(r, &mut buf)?;
    Ok(buf)
}

fn read_u8(r: &mut impl Read) -> FormatResult<u8> {
    Ok(read_array::<1>(r)?[0])
}

fn read_u16(r: &mut impl Read) -> FormatResult<u16> {
    Ok(u16::from_le_bytes(read_array(r)?))
}

fn read_u32(r: &mut impl Read) -> FormatResult<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64(r: &mut impl Read) -> FormatResult<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_f64(r: &mut impl Read) -> FormatResult<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

fn check_magic(r: &mut impl Read, magic: &[u8; 8], expected: &'static str) -> FormatResult<()> {
    let found = read_array::<8>(r)?;
    if &found != magic {
        return Err(FormatError::BadMagic {
            expected,
            found: String::from_utf8_lossy(&found).into_owned(),
        });
    }
    Ok(())
}

fn expect_end(r: &mut impl Read) -> FormatResult<()> {
    let extra = io::copy(r, &mut io::sink())?;
    if extra > 0 {
        return Err(FormatError::TrailingData(extra));
    }
    Ok(())
}

/// Writes a stream whose length is known up front. Fails if `items` yields
/// a different number of items than `count`.
pub fn write_stream_iter(w: &mut impl Write, count: u64, items: impl IntoIterator<Item = u32>) -> io::Result<()> {
    w.write_all(STREAM_MAGIC)?;
    w.write_all(&count.to_le_bytes())?;
    let mut written = 0u64;
    for x in items {
        w.write_all(&x.to_le_bytes())?;
        written += 1;
    }
    if written != count {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("stream header announces {count} items but {written} were written"),
        ));
    }
    Ok(())
}

pub fn write_stream(w: &mut impl Write, items: &[u32]) -> io::Result<()> {
    write_stream_iter(w, items.len() as u64, items.iter().copied())
}

pub fn read_stream(r: &mut impl Read) -> FormatResult<Vec<u32>> {
    check_magic(r, STREAM_MAGIC, "stream")?;
    read_stream_body(r)
}

/// Reads what follows the magic of a stream file.
pub(crate) fn read_stream_body(r: &mut impl Read) -> FormatResult<Vec<u32>> {
    let count = read_u64(r)?;
    let count = usize::try_from(count).map_err(|_| FormatError::Invalid(format!("{count} items do not fit in memory")))?;
    let mut items = Vec::new();
    items
        .try_reserve_exact(count)
        .map_err(|_| FormatError::Invalid(format!("{count} items do not fit in memory")))?;
    let mut chunk = vec![0u8; 4 * 65_536];
    let mut left = count;
    while left > 0 {
        let take = left.min(65_536);
        let bytes = &mut chunk[..4 * take];
        read_exact_or_truncated(r, bytes)?;
        items.extend(bytes.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())));
        left -= take;
    }
    expect_end(r)?;
    Ok(items)
}

/// A sketch loaded from disk, with whichever counter width it was saved in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnySketch {
    U32(CountMinSketch<u32>),
    U64(CountMinSketch<u64>),
}

impl AnySketch {
    pub fn counter_bits(&self) -> u32 {
        match self {
            AnySketch::U32(_) => 32,
            AnySketch::U64(_) => 64,
        }
    }

    pub fn params(&self) -> &SketchParams {
        match self {
            AnySketch::U32(s) => s.params(),
            AnySketch::U64(s) => s.params(),
        }
    }

    pub fn items_processed(&self) -> u64 {
        match self {
            AnySketch::U32(s) => s.items_processed(),
            AnySketch::U64(s) => s.items_processed(),
        }
    }

    pub fn query(&self, x: u32) -> u64 {
        match self {
            AnySketch::U32(s) => s.query(x).to_u64(),
            AnySketch::U64(s) => s.query(x),
        }
    }

    /// Counters as 32-bit; 64-bit sketches are refused.
    pub fn into_u32(self) -> FormatResult<CountMinSketch<u32>> {
        match self {
            AnySketch::U32(s) => Ok(s),
            AnySketch::U64(_) => Err(FormatError::Narrowing {
                stored: 64,
                requested: 32,
            }),
        }
    }

    /// Counters as 64-bit, widening if needed.
    pub fn into_u64(self) -> CountMinSketch<u64> {
        match self {
            AnySketch::U32(s) => s.convert().expect("widening cannot overflow"),
            AnySketch::U64(s) => s,
        }
    }

    pub fn write(&self, w: &mut impl Write) -> io::Result<()> {
        match self {
            AnySketch::U32(s) => write_sketch(w, s),
            AnySketch::U64(s) => write_sketch(w, s),
        }
    }
}

impl From<CountMinSketch<u32>> for AnySketch {
    fn from(s: CountMinSketch<u32>) -> Self {
        AnySketch::U32(s)
    }
}

impl From<CountMinSketch<u64>> for AnySketch {
    fn from(s: CountMinSketch<u64>) -> Self {
        AnySketch::U64(s)
    }
}

fn mode_fields(width: WidthMode, depth: DepthMode) -> [(u8, u64); 2] {
    let w = match width {
        WidthMode::CeilEOverEps => (0, 0),
        WidthMode::PrimeAfterTwoOverEps => (1, 0),
        WidthMode::Explicit(w) => (2, w as u64),
    };
    let d = match depth {
        DepthMode::CeilLnInvDelta => (0, 0),
        DepthMode::Explicit(d) => (1, d as u64),
    };
    [w, d]
}

pub fn write_sketch<C: Counter>(w: &mut impl Write, cms: &CountMinSketch<C>) -> io::Result<()> {
    let p = cms.params();
    let dim = |v: usize| {
        u32::try_from(v).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "sketch dimension exceeds u32"))
    };
    w.write_all(SKETCH_MAGIC)?;
    w.write_all(&SKETCH_VERSION.to_le_bytes())?;
    w.write_all(&[C::BITS as u8, if cms.is_saturated() { FLAG_SATURATED } else { 0 }])?;
    w.write_all(&dim(p.depth)?.to_le_bytes())?;
    w.write_all(&dim(p.width)?.to_le_bytes())?;
    w.write_all(&[TABLE_PRNG.len() as u8])?;
    w.write_all(TABLE_PRNG.as_bytes())?;
    w.write_all(&p.epsilon.to_le_bytes())?;
    w.write_all(&p.delta.to_le_bytes())?;
    for (tag, value) in mode_fields(p.width_mode, p.depth_mode) {
        w.write_all(&[tag])?;
        w.write_all(&value.to_le_bytes())?;
    }
    for seed in cms.seeds() {
        w.write_all(&seed.to_le_bytes())?;
    }
    w.write_all(&cms.items_processed().to_le_bytes())?;
    let bytes = C::BITS as usize / 8;
    let mut out = Vec::with_capacity(p.width * bytes);
    for row in cms.rows() {
        out.clear();
        for c in row {
            out.extend_from_slice(&c.to_u64().to_le_bytes()[..bytes]);
        }
        w.write_all(&out)?;
    }
    Ok(())
}

fn read_counters<C: Counter>(r: &mut impl Read, cells: usize) -> FormatResult<Vec<C>> {
    let bytes = C::BITS as usize / 8;
    let mut raw = Vec::new();
    raw.try_reserve_exact(cells * bytes)
        .map_err(|_| FormatError::Invalid(format!("{cells} counters do not fit in memory")))?;
    raw.resize(cells * bytes, 0);
    read_exact_or_truncated(r, &mut raw)?;
    Ok(raw
        .chunks_exact(bytes)
        .map(|c| {
            let mut v = [0u8; 8];
            v[..bytes].copy_from_slice(c);
            C::from_u64(u64::from_le_bytes(v)).expect("cell fits its own width")
        })
        .collect())
}

pub fn read_sketch(r: &mut impl Read) -> FormatResult<AnySketch> {
    check_magic(r, SKETCH_MAGIC, "sketch")?;
    let version = read_u16(r)?;
    if version != SKETCH_VERSION {
        return Err(FormatError::Version(version));
    }
    let bits = read_u8(r)?;
    let flags = read_u8(r)?;
    if flags & !FLAG_SATURATED != 0 {
        return Err(FormatError::Invalid(format!("unknown flags {flags:#04x}")));
    }
    let depth = read_u32(r)? as usize;
    let width = read_u32(r)? as usize;
    let mut prng = vec![0u8; read_u8(r)? as usize];
    read_exact_or_truncated(r, &mut prng)?;
    if prng != TABLE_PRNG.as_bytes() {
        return Err(FormatError::Invalid(format!(
            "tables generated with {:?}, expected {TABLE_PRNG:?}",
            String::from_utf8_lossy(&prng)
        )));
    }
    let epsilon = read_f64(r)?;
    let delta = read_f64(r)?;
    let width_mode = match (read_u8(r)?, read_u64(r)?) {
        (0, _) => WidthMode::CeilEOverEps,
        (1, _) => WidthMode::PrimeAfterTwoOverEps,
        (2, w) => WidthMode::Explicit(w as usize),
        (tag, _) => return Err(FormatError::Invalid(format!("unknown width mode {tag}"))),
    };
    let depth_mode = match (read_u8(r)?, read_u64(r)?) {
        (0, _) => DepthMode::CeilLnInvDelta,
        (1, d) => DepthMode::Explicit(d as usize),
        (tag, _) => return Err(FormatError::Invalid(format!("unknown depth mode {tag}"))),
    };
    let params = SketchParams {
        epsilon,
        delta,
        depth,
        width,
        width_mode,
        depth_mode,
    };
    params.validate().map_err(|e| FormatError::Invalid(e.to_string()))?;
    let seeds = (0..depth).map(|_| read_u64(r)).collect::<FormatResult<Vec<_>>>()?;
    let items = read_u64(r)?;
    let saturated = flags & FLAG_SATURATED != 0;
    let cells = depth
        .checked_mul(width)
        .ok_or_else(|| FormatError::Invalid("sketch dimensions overflow".into()))?;
    let invalid = |e: tabsketch::Error| FormatError::Invalid(e.to_string());
    let sketch = match bits {
        32 => AnySketch::U32(
            CountMinSketch::from_parts(params, &seeds, items, saturated, &read_counters(r, cells)?).map_err(invalid)?,
        ),
        64 => AnySketch::U64(
            CountMinSketch::from_parts(params, &seeds, items, saturated, &read_counters(r, cells)?).map_err(invalid)?,
        ),
        other => return Err(FormatError::Invalid(format!("unsupported counter width {other}"))),
    };
    expect_end(r)?;
    Ok(sketch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn built<C: Counter>(seed: u64, items: &[u32]) -> CountMinSketch<C> {
        let params = SketchParams::from_error(1e-2, 0.01, WidthMode::PrimeAfterTwoOverEps, DepthMode::CeilLnInvDelta)
            .unwrap();
        let mut s = CountMinSketch::<C>::new(params, seed).unwrap();
        s.extend_from_slice(items);
        s
    }

    fn bytes_of<C: Counter>(s: &CountMinSketch<C>) -> Vec<u8> {
        let mut v = Vec::new();
        write_sketch(&mut v, s).unwrap();
        v
    }

    #[test]
    fn stream_layout() {
        let mut v = Vec::new();
        write_stream(&mut v, &[1, 0xAABBCCDD]).unwrap();
        assert_eq!(&v[..8], b"CMSTRM01");
        assert_eq!(&v[8..16], &2u64.to_le_bytes());
        assert_eq!(&v[16..20], &[1, 0, 0, 0]);
        assert_eq!(&v[20..24], &[0xDD, 0xCC, 0xBB, 0xAA]);
        assert_eq!(v.len(), 16 + 4 * 2);
    }

    #[test]
    fn empty_stream_is_header_only() {
        let mut v = Vec::new();
        write_stream(&mut v, &[]).unwrap();
        assert_eq!(v.len(), 16);
        assert!(read_stream(&mut v.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn stream_errors() {
        let mut v = Vec::new();
        write_stream(&mut v, &[1, 2, 3]).unwrap();
        assert!(matches!(read_stream(&mut &v[..v.len() - 1]), Err(FormatError::Truncated)));
        let mut extra = v.clone();
        extra.push(0);
        assert!(matches!(read_stream(&mut extra.as_slice()), Err(FormatError::TrailingData(1))));
        let mut bad = v.clone();
        bad[0] = b'X';
        assert!(matches!(read_stream(&mut bad.as_slice()), Err(FormatError::BadMagic { .. })));
        assert!(write_stream_iter(&mut Vec::new(), 5, [1u32, 2]).is_err());
    }

    #[test]
    fn sketch_header_layout() {
        let s = built::<u32>(3, &[1, 2, 3]);
        let v = bytes_of(&s);
        assert_eq!(&v[..8], b"CMSKCH01");
        assert_eq!(u16::from_le_bytes([v[8], v[9]]), SKETCH_VERSION);
        assert_eq!(v[10], 32);
        assert_eq!(v[11], 0);
        let (d, w) = (s.depth(), s.width());
        assert_eq!(u32::from_le_bytes(v[12..16].try_into().unwrap()) as usize, d);
        assert_eq!(u32::from_le_bytes(v[16..20].try_into().unwrap()) as usize, w);
        assert_eq!(v[20] as usize, TABLE_PRNG.len());
        let header = 21 + TABLE_PRNG.len() + 16 + 18;
        assert_eq!(v.len(), header + 8 * d + 8 + 4 * d * w);
    }

    #[test]
    fn sketch_round_trip_both_widths() {
        let items: Vec<u32> = (0..5000).map(|i| i * 7919 % 1000).collect();
        let a = built::<u32>(9, &items);
        assert_eq!(read_sketch(&mut bytes_of(&a).as_slice()).unwrap(), AnySketch::U32(a.clone()));
        let b = built::<u64>(9, &items);
        assert_eq!(read_sketch(&mut bytes_of(&b).as_slice()).unwrap(), AnySketch::U64(b.clone()));
        assert_eq!(AnySketch::U32(a.clone()).into_u64(), b);
        assert!(matches!(
            AnySketch::U64(b).into_u32(),
            Err(FormatError::Narrowing { stored: 64, requested: 32 })
        ));
    }

    #[test]
    fn saturated_flag_survives() {
        let params = SketchParams::with_dims(1, 1).unwrap();
        let s = CountMinSketch::<u32>::from_parts(params, &[5], 7, true, &[u32::MAX]).unwrap();
        let back = read_sketch(&mut bytes_of(&s).as_slice()).unwrap().into_u32().unwrap();
        assert!(back.is_saturated());
        assert_eq!(back, s);
    }

    #[test]
    fn corrupt_sketches_rejected() {
        let v = bytes_of(&built::<u32>(1, &[4, 5]));
        assert!(matches!(read_sketch(&mut &v[..v.len() - 3]), Err(FormatError::Truncated)));
        let mut bad = v.clone();
        bad[8] = 9;
        assert!(matches!(read_sketch(&mut bad.as_slice()), Err(FormatError::Version(9))));
        let mut bad = v.clone();
        bad[10] = 16;
        assert!(matches!(read_sketch(&mut bad.as_slice()), Err(FormatError::Invalid(_))));
        let mut bad = v.clone();
        bad[21] = b'X';
        assert!(matches!(read_sketch(&mut bad.as_slice()), Err(FormatError::Invalid(_))));
        let mut bad = v;
        bad[12..16].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(read_sketch(&mut bad.as_slice()), Err(FormatError::Invalid(_))));
        assert!(matches!(read_sketch(&mut &b"CMSTRM01"[..]), Err(FormatError::BadMagic { .. })));
    }

    proptest! {
        #[test]
        fn streams_round_trip(items in proptest::collection::vec(any::<u32>(), 0..2000)) {
            let mut v = Vec::new();
            write_stream(&mut v, &items).unwrap();
            prop_assert_eq!(v.len(), 16 + 4 * items.len());
            prop_assert_eq!(read_stream(&mut v.as_slice()).unwrap(), items);
        }

        #[test]
        fn sketches_round_trip(
            seed in any::<u64>(),
            depth in 1usize..6,
            width in 1usize..300,
            items in proptest::collection::vec(any::<u32>(), 0..500),
        ) {
            let mut s = CountMinSketch::<u32>::new(SketchParams::with_dims(depth, width).unwrap(), seed).unwrap();
            s.extend_from_slice(&items);
            let v = bytes_of(&s);
            let back = read_sketch(&mut v.as_slice()).unwrap();
            prop_assert_eq!(&back, &AnySketch::U32(s));
            let mut again = Vec::new();
            back.write(&mut again).unwrap();
            prop_assert_eq!(again, v);
        }
    }
}
