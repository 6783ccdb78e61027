//! Tabulation hashing for 32-bit keys.
//!
//! A key is split into four 8-bit characters (character `c` is the `c`-th least
//! significant byte). Each character indexes its own row of a 4 x 256 table of
//! random 32-bit words and the four words are XOR-ed together.
//!
//! A Count-Min Sketch needs `d` such functions per item. [`MergedTabulationTable`]
//! stores the `d` tables interleaved column-wise, so the `d` words selected by one
//! character sit next to each other in memory and one cache line serves every
//! row of the sketch.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};

/// Number of 8-bit characters in a key.
pub const CHARS: usize = 4;
/// Number of distinct character values.
pub const CHAR_VALUES: usize = 256;

/// Identifier of the generator used to fill tables and derive seeds.
///
/// Table entries are the upper 32 bits of successive SplitMix64 outputs, filled
/// character-major (all 256 values of character 0 first).
pub const TABLE_PRNG: &str = "splitmix64";

fn fill_entries(seed: u64) -> Box<[[u32; CHAR_VALUES]; CHARS]> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut entries = Box::new([[0u32; CHAR_VALUES]; CHARS]);
    for row in entries.iter_mut() {
        for e in row.iter_mut() {
            *e = (rng.next_u64() >> 32) as u32;
        }
    }
    entries
}

/// Derives `count` 64-bit seeds from a master seed with the table generator.
pub fn derive_seeds(master_seed: u64, count: usize) -> Vec<u64> {
    let mut rng = SplitMix64::seed_from_u64(master_seed);
    (0..count).map(|_| rng.next_u64()).collect()
}

#[inline(always)]
fn chars(x: u32) -> [usize; CHARS] {
    let b = x.to_le_bytes();
    [b[0] as usize, b[1] as usize, b[2] as usize, b[3] as usize]
}

/// One tabulation hash function: a 4 x 256 table of random words.
#[derive(Clone, PartialEq, Eq)]
pub struct TabulationTable {
    seed: u64,
    entries: Box<[[u32; CHAR_VALUES]; CHARS]>,
}

impl TabulationTable {
    pub fn new(seed: u64) -> Self {
        TabulationTable {
            seed,
            entries: fill_entries(seed),
        }
    }

    /// Builds a table from explicit entries. The recorded seed is 0 and carries
    /// no meaning; this exists for tests that need a known hash function.
    pub fn from_entries(entries: [[u32; CHAR_VALUES]; CHARS]) -> Self {
        TabulationTable {
            seed: 0,
            entries: Box::new(entries),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entries(&self) -> &[[u32; CHAR_VALUES]; CHARS] {
        &self.entries
    }

    #[inline]
    pub fn hash32(&self, x: u32) -> u32 {
        let [b0, b1, b2, b3] = chars(x);
        self.entries[0][b0] ^ self.entries[1][b1] ^ self.entries[2][b2] ^ self.entries[3][b3]
    }
}

impl std::fmt::Debug for TabulationTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TabulationTable")
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

/// `d` tabulation tables stored as one 4 x (256·d) table.
///
/// The entry for character position `c`, character value `v` and function `j`
/// lives at row `c`, column `v·d + j`.
#[derive(Clone, PartialEq, Eq)]
pub struct MergedTabulationTable {
    seeds: Vec<u64>,
    depth: usize,
    entries: Box<[u32]>,
}

impl MergedTabulationTable {
    pub fn new(seeds: &[u64]) -> Result<Self> {
        if seeds.is_empty() {
            return Err(Error::EmptySeeds);
        }
        let tables: Vec<_> = seeds.iter().map(|&s| fill_entries(s)).collect();
        Ok(Self::interleave(seeds.to_vec(), &tables))
    }

    /// Merges already-built tables, keeping their recorded seeds.
    pub fn from_tables(tables: &[TabulationTable]) -> Result<Self> {
        if tables.is_empty() {
            return Err(Error::EmptySeeds);
        }
        let seeds = tables.iter().map(|t| t.seed).collect();
        let entries: Vec<_> = tables.iter().map(|t| t.entries.clone()).collect();
        Ok(Self::interleave(seeds, &entries))
    }

    fn interleave(seeds: Vec<u64>, tables: &[Box<[[u32; CHAR_VALUES]; CHARS]>]) -> Self {
        let depth = tables.len();
        let mut entries = vec![0u32; CHARS * CHAR_VALUES * depth].into_boxed_slice();
        for c in 0..CHARS {
            for v in 0..CHAR_VALUES {
                let base = (c * CHAR_VALUES + v) * depth;
                for (j, t) in tables.iter().enumerate() {
                    entries[base + j] = t[c][v];
                }
            }
        }
        MergedTabulationTable {
            seeds,
            depth,
            entries,
        }
    }

    /// Number of hash functions merged into this table.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn entry(&self, c: usize, v: usize, j: usize) -> u32 {
        self.entries[(c * CHAR_VALUES + v) * self.depth + j]
    }

    /// The `d` contiguous words selected by character value `v` at position `c`.
    #[inline(always)]
    pub fn run(&self, c: usize, v: usize) -> &[u32] {
        let start = (c * CHAR_VALUES + v) * self.depth;
        &self.entries[start..start + self.depth]
    }

    /// Writes all `d` hashes of `x` into `out`, which must have length `d`.
    #[inline]
    pub fn hash_into(&self, x: u32, out: &mut [u32]) {
        assert_eq!(out.len(), self.depth, "output length must equal depth");
        let [b0, b1, b2, b3] = chars(x);
        let (r0, r1, r2, r3) = (self.run(0, b0), self.run(1, b1), self.run(2, b2), self.run(3, b3));
        for (j, o) in out.iter_mut().enumerate() {
            *o = r0[j] ^ r1[j] ^ r2[j] ^ r3[j];
        }
    }

    pub fn hash(&self, x: u32) -> Vec<u32> {
        let mut out = vec![0; self.depth];
        self.hash_into(x, &mut out);
        out
    }

    /// Hashes `x` and reduces every hash to a column in `[0, width)`.
    /// `width` must be non-zero.
    #[inline]
    pub fn columns_into(&self, x: u32, width: u32, out: &mut [u32]) {
        self.hash_into(x, out);
        for o in out.iter_mut() {
            *o = reduce(*o, width);
        }
    }

    /// Calls `f(row, column)` for each of the `d` hashes of `x`.
    #[inline]
    pub fn for_each_column(&self, x: u32, width: u32, mut f: impl FnMut(usize, u32)) {
        let [b0, b1, b2, b3] = chars(x);
        let (r0, r1, r2, r3) = (self.run(0, b0), self.run(1, b1), self.run(2, b2), self.run(3, b3));
        for j in 0..self.depth {
            f(j, reduce(r0[j] ^ r1[j] ^ r2[j] ^ r3[j], width));
        }
    }
}

impl std::fmt::Debug for MergedTabulationTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MergedTabulationTable")
            .field("depth", &self.depth)
            .field("seeds", &self.seeds)
            .finish_non_exhaustive()
    }
}

#[inline(always)]
pub(crate) fn reduce(h: u32, width: u32) -> u32 {
    h % width
}

/// Maps a 32-bit hash onto a column index in `[0, width)` by reduction modulo `width`.
pub fn to_column(h: u32, width: u32) -> Result<u32> {
    if width == 0 {
        return Err(Error::invalid("width", "column count must be at least 1"));
    }
    Ok(reduce(h, width))
}
