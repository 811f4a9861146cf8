//! Multi-index hashing over binary codes: exact r-neighbor retrieval through
//! `t` substring hash tables, an early-exit variant, and substring-balance
//! diagnostics.
//!
//! Each enrolled code is indexed `t` times, once per disjoint substring. A
//! query probes every table within substring radius `floor(r/t)`; by
//! pigeonhole, any code within full distance `r` matches at least one table,
//! so verifying the pulled candidates against the full code returns the exact
//! r-neighbor set.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::bitcode::{enumerate_ball, substring_bits, BitCode, CodeSet};
use crate::byteio;
use crate::error::{Error, Result};

const INDEX_MAGIC: &[u8; 4] = b"HVMI";

/// Per-query accounting used by the evaluation harness.
///
/// `candidates_examined` counts ids pulled from table buckets with
/// multiplicity; `full_verifications` counts distinct codes whose full
/// Hamming distance was computed; `true_neighbors` counts verified codes
/// within the radius.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryStats {
    pub candidates_examined: u64,
    pub full_verifications: u64,
    pub tables_probed: u64,
    pub true_neighbors: u64,
}

/// A verified neighbor: code id plus its full Hamming distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Neighbor {
    pub id: u32,
    pub distance: u32,
}

/// Multi-index hash over a code collection.
pub struct MihIndex {
    width: u32,
    t: u32,
    s: u32,
    tables: Vec<HashMap<u32, Vec<u32>>>,
    codes: Vec<BitCode>,
    labels: Vec<u32>,
}

impl MihIndex {
    /// Empty index for codes of the given width split into `t` substrings.
    pub fn new(width: u32, t: u32) -> Result<Self> {
        let s = substring_bits(width, t)?;
        Ok(Self {
            width,
            t,
            s,
            tables: vec![HashMap::new(); t as usize],
            codes: Vec::new(),
            labels: Vec::new(),
        })
    }

    /// Builds an index over a whole code set. Empty sets are allowed.
    pub fn build(codes: &CodeSet, t: u32) -> Result<Self> {
        let mut index = Self::new(codes.width(), t)?;
        for id in 0..codes.len() as u32 {
            index.insert(codes.code(id), codes.label(id))?;
        }
        Ok(index)
    }

    /// Enrolls one code under every substring table; returns its id.
    pub fn insert(&mut self, code: &BitCode, label: u32) -> Result<u32> {
        if code.width() != self.width {
            return Err(Error::WidthMismatch {
                left: self.width,
                right: code.width(),
            });
        }
        let id = self.codes.len() as u32;
        for m in 0..self.t {
            let sub = code.substring(m, self.t)?;
            self.tables[m as usize]
                .entry(sub.value)
                .or_default()
                .push(id);
        }
        self.codes.push(code.clone());
        self.labels.push(label);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn table_count(&self) -> u32 {
        self.t
    }

    pub fn substring_len(&self) -> u32 {
        self.s
    }

    pub fn code(&self, id: u32) -> &BitCode {
        &self.codes[id as usize]
    }

    pub fn label(&self, id: u32) -> u32 {
        self.labels[id as usize]
    }

    fn check_query(&self, q: &BitCode, r: u32) -> Result<()> {
        if q.width() != self.width {
            return Err(Error::WidthMismatch {
                left: self.width,
                right: q.width(),
            });
        }
        if r > self.width {
            return Err(Error::RadiusTooLarge {
                radius: r,
                bits: self.width,
            });
        }
        Ok(())
    }

    /// Exact r-neighbor search: returns every enrolled id within Hamming
    /// distance `r` of `q` (ascending id order) plus query statistics.
    pub fn query_rneighbors(&self, q: &BitCode, r: u32) -> Result<(Vec<u32>, QueryStats)> {
        self.check_query(q, r)?;
        let sub_radius = r / self.t;
        let mut stats = QueryStats {
            tables_probed: self.t as u64,
            ..Default::default()
        };
        let mut visited = vec![false; self.codes.len()];
        let mut result = Vec::new();
        for m in 0..self.t {
            let center = q.substring(m, self.t)?;
            for value in enumerate_ball(&center, sub_radius)? {
                let Some(bucket) = self.tables[m as usize].get(&value) else {
                    continue;
                };
                for &id in bucket {
                    stats.candidates_examined += 1;
                    if visited[id as usize] {
                        continue;
                    }
                    visited[id as usize] = true;
                    stats.full_verifications += 1;
                    if self.codes[id as usize].hamming_unchecked(q) <= r {
                        stats.true_neighbors += 1;
                        result.push(id);
                    }
                }
            }
        }
        result.sort_unstable();
        Ok((result, stats))
    }

    /// Early-exit search: probes tables in order and stops at the first table
    /// whose verified candidate list is nonempty, returning the verified
    /// candidate with the smallest full distance (ties broken by id).
    ///
    /// Returns `None` only when no enrolled code lies within `r`; by
    /// pigeonhole this scans all `t` tables first. Candidate pulls are a
    /// prefix of what [`query_rneighbors`](Self::query_rneighbors) examines,
    /// so `candidates_examined` never exceeds the exhaustive query's count on
    /// the same input.
    pub fn query_optimized(&self, q: &BitCode, r: u32) -> Result<(Option<Neighbor>, QueryStats)> {
        self.check_query(q, r)?;
        let sub_radius = r / self.t;
        let mut stats = QueryStats::default();
        let mut visited = vec![false; self.codes.len()];
        for m in 0..self.t {
            stats.tables_probed += 1;
            let center = q.substring(m, self.t)?;
            let mut best: Option<Neighbor> = None;
            for value in enumerate_ball(&center, sub_radius)? {
                let Some(bucket) = self.tables[m as usize].get(&value) else {
                    continue;
                };
                for &id in bucket {
                    stats.candidates_examined += 1;
                    if visited[id as usize] {
                        continue;
                    }
                    visited[id as usize] = true;
                    stats.full_verifications += 1;
                    let dist = self.codes[id as usize].hamming_unchecked(q);
                    if dist <= r {
                        stats.true_neighbors += 1;
                        let better = match best {
                            None => true,
                            Some(b) => dist < b.distance || (dist == b.distance && id < b.id),
                        };
                        if better {
                            best = Some(Neighbor { id, distance: dist });
                        }
                    }
                }
            }
            if best.is_some() {
                return Ok((best, stats));
            }
        }
        Ok((None, stats))
    }

    /// Persists the index: magic "HVMI", u32 width, u32 t, u32 size, then the
    /// enrolled codes as an embedded codes file (labels included). Tables are
    /// rebuilt on load.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        byteio::write_magic(w, INDEX_MAGIC)?;
        byteio::write_u32(w, self.width)?;
        byteio::write_u32(w, self.t)?;
        byteio::write_u32(w, self.codes.len() as u32)?;
        let set = CodeSet::from_parts(self.width, self.codes.clone(), self.labels.clone())?;
        set.write_to(w, true)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        byteio::expect_magic(r, INDEX_MAGIC)?;
        let width = byteio::read_u32(r)?;
        let t = byteio::read_u32(r)?;
        let size = byteio::read_u32(r)?;
        let set = CodeSet::read_from(r)?;
        if set.width() != width {
            return Err(Error::Format(format!(
                "index width {width} disagrees with embedded codes width {}",
                set.width()
            )));
        }
        if set.len() as u32 != size {
            return Err(Error::Format(format!(
                "index size {size} disagrees with embedded code count {}",
                set.len()
            )));
        }
        Self::build(&set, t)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

/// Header of a persisted index.
pub struct IndexHeader {
    pub width: u32,
    pub t: u32,
    pub size: u32,
}

pub fn read_index_header<R: Read>(r: &mut R) -> Result<IndexHeader> {
    byteio::expect_magic(r, INDEX_MAGIC)?;
    Ok(IndexHeader {
        width: byteio::read_u32(r)?,
        t: byteio::read_u32(r)?,
        size: byteio::read_u32(r)?,
    })
}

/// Per-substring Hamming distances of a code pair plus the RMS deviation of
/// those distances from the uniform share `r/t`.
///
/// A deviation of zero means the pair's disagreement is spread evenly across
/// all `t` substrings, the regime in which substring tables pull the fewest
/// false candidates.
#[derive(Clone, Debug)]
pub struct SubstringBalance {
    pub distances: Vec<u32>,
    pub deviation: f64,
}

pub fn substring_balance(a: &BitCode, b: &BitCode, t: u32) -> Result<SubstringBalance> {
    if a.width() != b.width() {
        return Err(Error::WidthMismatch {
            left: a.width(),
            right: b.width(),
        });
    }
    if t == 0 || !a.width().is_multiple_of(t) {
        return Err(Error::NotDivisible {
            width: a.width(),
            t,
        });
    }
    let s = a.width() / t;
    let distances: Vec<u32> = (0..t).map(|m| a.hamming_range(b, m * s, s)).collect();
    let total: u32 = distances.iter().sum();
    let share = total as f64 / t as f64;
    let deviation = (distances
        .iter()
        .map(|&d| (d as f64 - share).powi(2))
        .sum::<f64>()
        / t as f64)
        .sqrt();
    Ok(SubstringBalance {
        distances,
        deviation,
    })
}
