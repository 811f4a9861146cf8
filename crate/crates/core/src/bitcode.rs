//! Fixed-width packed binary codes, Hamming arithmetic, substring extraction,
//! and Hamming-ball enumeration.
//!
//! Bit `j` of word `w` holds code bit `64*w + j`; trailing bits of the final
//! word are always zero. The same little-endian bit order is used on disk:
//! bit `j` of byte `b` is code bit `8*b + j`.

use std::io::{Read, Write};

use rand_core::RngCore;

use crate::byteio;
use crate::error::{Error, Result};

/// Largest supported code width in bits.
pub const MAX_WIDTH: u32 = 4096;

/// Largest supported substring length. Substring values are used directly as
/// hash keys, so they must fit a single word.
pub const MAX_SUBSTRING_BITS: u32 = 32;

/// A fixed-width binary code packed into 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitCode {
    width: u32,
    words: Vec<u64>,
}

impl std::fmt::Debug for BitCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitCode({}b,", self.width)?;
        for w in &self.words {
            write!(f, " {w:016x}")?;
        }
        write!(f, ")")
    }
}

fn check_width(width: u32) -> Result<()> {
    if width == 0 || width > MAX_WIDTH {
        return Err(Error::InvalidWidth {
            width,
            max: MAX_WIDTH,
        });
    }
    Ok(())
}

fn words_for(width: u32) -> usize {
    width.div_ceil(64) as usize
}

impl BitCode {
    /// All-zero code of the given width.
    pub fn zeros(width: u32) -> Result<Self> {
        check_width(width)?;
        Ok(Self {
            width,
            words: vec![0; words_for(width)],
        })
    }

    /// All-one code of the given width.
    pub fn ones(width: u32) -> Result<Self> {
        let mut code = Self::zeros(width)?;
        for w in &mut code.words {
            *w = u64::MAX;
        }
        code.mask_tail();
        Ok(code)
    }

    /// Builds a code from packed words; bits at positions >= `width` are
    /// cleared.
    pub fn from_words(width: u32, mut words: Vec<u64>) -> Result<Self> {
        check_width(width)?;
        if words.len() != words_for(width) {
            return Err(Error::InvalidParam(format!(
                "expected {} words for width {width}, got {}",
                words_for(width),
                words.len()
            )));
        }
        words.shrink_to_fit();
        let mut code = Self { width, words };
        code.mask_tail();
        Ok(code)
    }

    /// Builds a code of width `bits.len()` from individual bits.
    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let mut code = Self::zeros(bits.len() as u32)?;
        for (i, &b) in bits.iter().enumerate() {
            if b {
                code.words[i / 64] |= 1u64 << (i % 64);
            }
        }
        Ok(code)
    }

    /// Unpacks a code from its on-disk byte form (little-endian bit order).
    pub fn from_bytes(width: u32, bytes: &[u8]) -> Result<Self> {
        check_width(width)?;
        let expect = width.div_ceil(8) as usize;
        if bytes.len() != expect {
            return Err(Error::Format(format!(
                "code record has {} bytes, expected {expect} for width {width}",
                bytes.len()
            )));
        }
        let mut code = Self::zeros(width)?;
        for (i, &b) in bytes.iter().enumerate() {
            code.words[i / 8] |= (b as u64) << (8 * (i % 8));
        }
        code.mask_tail();
        Ok(code)
    }

    /// Packs the code into `ceil(width/8)` bytes, little-endian bit order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.width.div_ceil(8) as usize;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push((self.words[i / 8] >> (8 * (i % 8))) as u8);
        }
        out
    }

    /// Uniform random code.
    pub fn random<R: RngCore>(width: u32, rng: &mut R) -> Result<Self> {
        let mut code = Self::zeros(width)?;
        for w in &mut code.words {
            *w = rng.next_u64();
        }
        code.mask_tail();
        Ok(code)
    }

    fn mask_tail(&mut self) {
        let tail = self.width % 64;
        if tail != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << tail) - 1;
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// Bit at position `i`. Panics if `i >= width`.
    pub fn bit(&self, i: u32) -> bool {
        assert!(
            i < self.width,
            "bit index {i} out of range for width {}",
            self.width
        );
        self.words[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    /// Sets bit `i`. Panics if `i >= width`.
    pub fn set_bit(&mut self, i: u32, value: bool) {
        assert!(
            i < self.width,
            "bit index {i} out of range for width {}",
            self.width
        );
        let mask = 1u64 << (i % 64);
        if value {
            self.words[(i / 64) as usize] |= mask;
        } else {
            self.words[(i / 64) as usize] &= !mask;
        }
    }

    /// Flips bit `i`. Panics if `i >= width`.
    pub fn flip_bit(&mut self, i: u32) {
        assert!(
            i < self.width,
            "bit index {i} out of range for width {}",
            self.width
        );
        self.words[(i / 64) as usize] ^= 1u64 << (i % 64);
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Hamming distance to `other`.
    pub fn hamming(&self, other: &Self) -> Result<u32> {
        if self.width != other.width {
            return Err(Error::WidthMismatch {
                left: self.width,
                right: other.width,
            });
        }
        Ok(self.hamming_unchecked(other))
    }

    /// Hamming distance without the width check; callers must have validated
    /// widths at the boundary.
    #[inline]
    pub(crate) fn hamming_unchecked(&self, other: &Self) -> u32 {
        debug_assert_eq!(self.width, other.width);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    /// Hamming distance restricted to the bit range `[start, start+len)`.
    pub(crate) fn hamming_range(&self, other: &Self, start: u32, len: u32) -> u32 {
        debug_assert_eq!(self.width, other.width);
        debug_assert!(start + len <= self.width);
        let end = start + len;
        let mut dist = 0;
        let mut w = (start / 64) as usize;
        let mut bit = start;
        while bit < end {
            let word_end = ((bit / 64) + 1) * 64;
            let chunk_end = word_end.min(end);
            let lo = bit % 64;
            let n = chunk_end - bit;
            let mask = if n == 64 {
                u64::MAX
            } else {
                ((1u64 << n) - 1) << lo
            };
            dist += ((self.words[w] ^ other.words[w]) & mask).count_ones();
            bit = chunk_end;
            w += 1;
        }
        dist
    }

    /// Extracts substring `index` of `t` equal disjoint substrings.
    ///
    /// The width must be divisible by `t` and the substring length `k/t` may
    /// not exceed [`MAX_SUBSTRING_BITS`]. Concatenating all `t` substrings in
    /// order reconstructs the code.
    pub fn substring(&self, index: u32, t: u32) -> Result<Substring> {
        let s = substring_bits(self.width, t)?;
        if index >= t {
            return Err(Error::SubstringIndex { index, t });
        }
        let start = index * s;
        Ok(Substring {
            value: self.extract(start, s),
            index,
            bits: s,
        })
    }

    /// Reads `len <= 32` bits starting at `start` as an integer.
    fn extract(&self, start: u32, len: u32) -> u32 {
        debug_assert!(len <= 32 && start + len <= self.width);
        let w = (start / 64) as usize;
        let off = start % 64;
        let mut value = self.words[w] >> off;
        if off + len > 64 {
            value |= self.words[w + 1] << (64 - off);
        }
        let mask = if len == 32 {
            u32::MAX
        } else {
            (1u32 << len) - 1
        };
        (value as u32) & mask
    }
}

/// Validates the `(width, t)` pair and returns the substring length `s`.
pub(crate) fn substring_bits(width: u32, t: u32) -> Result<u32> {
    if t == 0 || !width.is_multiple_of(t) {
        return Err(Error::NotDivisible { width, t });
    }
    let s = width / t;
    if s > MAX_SUBSTRING_BITS {
        return Err(Error::SubstringTooLong {
            s,
            max: MAX_SUBSTRING_BITS,
        });
    }
    Ok(s)
}

/// One of the `t` disjoint substrings of a code: an `s`-bit value plus the
/// table position it belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Substring {
    /// The `s`-bit substring value.
    pub value: u32,
    /// Table position in `0..t`.
    pub index: u32,
    /// Substring length `s` in bits.
    pub bits: u32,
}

/// Iterates every `s`-bit value within Hamming distance `radius` of a center,
/// in non-decreasing distance order, each value exactly once.
///
/// Within one distance level values appear in increasing mask order, so the
/// full sequence is deterministic. The total count is `sum_{d=0..=radius}
/// C(s, d)`.
pub fn enumerate_ball(center: &Substring, radius: u32) -> Result<HammingBall> {
    if radius > center.bits {
        return Err(Error::RadiusTooLarge {
            radius,
            bits: center.bits,
        });
    }
    Ok(HammingBall {
        center: center.value,
        bits: center.bits,
        radius,
        distance: 0,
        mask: 0,
        exhausted: false,
    })
}

/// Iterator over a Hamming ball; see [`enumerate_ball`].
pub struct HammingBall {
    center: u32,
    bits: u32,
    radius: u32,
    distance: u32,
    mask: u64,
    exhausted: bool,
}

impl Iterator for HammingBall {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        if self.exhausted {
            return None;
        }
        if self.distance == 0 {
            self.advance_distance();
            return Some(self.center);
        }
        let out = self.center ^ self.mask as u32;
        // Gosper's hack: next mask with the same popcount, in u64 so the
        // final step cannot overflow.
        let v = self.mask;
        let c = v & v.wrapping_neg();
        let r = v + c;
        let next = (((r ^ v) >> 2) / c) | r;
        if next < (1u64 << self.bits) {
            self.mask = next;
        } else {
            self.advance_distance();
        }
        Some(out)
    }
}

impl HammingBall {
    fn advance_distance(&mut self) {
        self.distance += 1;
        if self.distance > self.radius {
            self.exhausted = true;
        } else {
            self.mask = (1u64 << self.distance) - 1;
        }
    }
}

/// An ordered collection of equal-width codes with per-code class labels.
#[derive(Clone, Debug)]
pub struct CodeSet {
    width: u32,
    codes: Vec<BitCode>,
    labels: Vec<u32>,
}

const CODES_MAGIC: &[u8; 4] = b"HVC1";

impl CodeSet {
    pub fn new(width: u32) -> Result<Self> {
        check_width(width)?;
        Ok(Self {
            width,
            codes: Vec::new(),
            labels: Vec::new(),
        })
    }

    pub fn from_parts(width: u32, codes: Vec<BitCode>, labels: Vec<u32>) -> Result<Self> {
        check_width(width)?;
        if codes.len() != labels.len() {
            return Err(Error::DimMismatch {
                left: codes.len(),
                right: labels.len(),
            });
        }
        for c in &codes {
            if c.width() != width {
                return Err(Error::WidthMismatch {
                    left: width,
                    right: c.width(),
                });
            }
        }
        Ok(Self {
            width,
            codes,
            labels,
        })
    }

    /// Appends a code; returns its id (position).
    pub fn push(&mut self, code: BitCode, label: u32) -> Result<u32> {
        if code.width() != self.width {
            return Err(Error::WidthMismatch {
                left: self.width,
                right: code.width(),
            });
        }
        self.codes.push(code);
        self.labels.push(label);
        Ok((self.codes.len() - 1) as u32)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn code(&self, id: u32) -> &BitCode {
        &self.codes[id as usize]
    }

    pub fn label(&self, id: u32) -> u32 {
        self.labels[id as usize]
    }

    pub fn codes(&self) -> &[BitCode] {
        &self.codes
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Writes the codes file: magic "HVC1", u32 count, u32 width, u32 label
    /// flag, then per code `ceil(width/8)` bytes plus the label when flagged.
    pub fn write_to<W: Write>(&self, w: &mut W, with_labels: bool) -> Result<()> {
        byteio::write_magic(w, CODES_MAGIC)?;
        byteio::write_u32(w, self.codes.len() as u32)?;
        byteio::write_u32(w, self.width)?;
        byteio::write_u32(w, with_labels as u32)?;
        for (code, &label) in self.codes.iter().zip(&self.labels) {
            w.write_all(&code.to_bytes())?;
            if with_labels {
                byteio::write_u32(w, label)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        byteio::expect_magic(r, CODES_MAGIC)?;
        let count = byteio::read_u32(r)?;
        let width = byteio::read_u32(r)?;
        check_width(width)?;
        let flag = byteio::read_u32(r)?;
        if flag > 1 {
            return Err(Error::Format(format!(
                "label flag must be 0 or 1, found {flag}"
            )));
        }
        let bytes_per_code = width.div_ceil(8) as usize;
        // Don't trust the declared count for preallocation; a truncated read
        // fails below either way.
        let reserve = (count as usize).min(1 << 20);
        let mut codes = Vec::with_capacity(reserve);
        let mut labels = Vec::with_capacity(reserve);
        let mut buf = vec![0u8; bytes_per_code];
        for _ in 0..count {
            r.read_exact(&mut buf)?;
            codes.push(BitCode::from_bytes(width, &buf)?);
            labels.push(if flag == 1 { byteio::read_u32(r)? } else { 0 });
        }
        Ok(Self {
            width,
            codes,
            labels,
        })
    }

    pub fn save(&self, path: &std::path::Path, with_labels: bool) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f, with_labels)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

/// Header of a codes file, for inspection without loading the payload.
pub struct CodesHeader {
    pub count: u32,
    pub width: u32,
    pub labeled: bool,
}

pub fn read_codes_header<R: Read>(r: &mut R) -> Result<CodesHeader> {
    byteio::expect_magic(r, CODES_MAGIC)?;
    let count = byteio::read_u32(r)?;
    let width = byteio::read_u32(r)?;
    let flag = byteio::read_u32(r)?;
    Ok(CodesHeader {
        count,
        width,
        labeled: flag == 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn binomial(n: u64, k: u64) -> u64 {
        if k > n {
            return 0;
        }
        let mut out = 1u64;
        for i in 0..k {
            out = out * (n - i) / (i + 1);
        }
        out
    }

    #[test]
    fn hamming_identity() {
        let mut rng = seeded(1);
        for width in [1, 7, 64, 65, 256, 4096] {
            let a = BitCode::random(width, &mut rng).unwrap();
            assert_eq!(a.hamming(&a).unwrap(), 0);
        }
    }

    #[test]
    fn hamming_complement_8bit() {
        let a = BitCode::zeros(8).unwrap();
        let b = BitCode::ones(8).unwrap();
        assert_eq!(a.hamming(&b).unwrap(), 8);
    }

    #[test]
    fn hamming_width_mismatch() {
        let a = BitCode::zeros(8).unwrap();
        let b = BitCode::zeros(16).unwrap();
        assert!(matches!(a.hamming(&b), Err(Error::WidthMismatch { .. })));
    }

    #[test]
    fn hamming_matches_bitwise_oracle() {
        // Oracle: count differing bits one position at a time.
        let mut rng = seeded(2);
        for _ in 0..1000 {
            let a = BitCode::random(256, &mut rng).unwrap();
            let b = BitCode::random(256, &mut rng).unwrap();
            let expected = (0..256).filter(|&i| a.bit(i) != b.bit(i)).count() as u32;
            assert_eq!(a.hamming(&b).unwrap(), expected);
        }
    }

    #[test]
    fn width_bounds_rejected() {
        assert!(matches!(BitCode::zeros(0), Err(Error::InvalidWidth { .. })));
        assert!(matches!(
            BitCode::zeros(4097),
            Err(Error::InvalidWidth { .. })
        ));
        assert!(BitCode::zeros(4096).is_ok());
    }

    #[test]
    fn from_words_masks_tail() {
        let c = BitCode::from_words(8, vec![u64::MAX]).unwrap();
        assert_eq!(c.count_ones(), 8);
    }

    #[test]
    fn substring_512_16_is_32_bits() {
        let mut rng = seeded(3);
        let c = BitCode::random(512, &mut rng).unwrap();
        for m in 0..16 {
            let sub = c.substring(m, 16).unwrap();
            assert_eq!(sub.bits, 32);
            assert_eq!(sub.index, m);
        }
    }

    #[test]
    fn substring_t1_is_whole_code() {
        let mut rng = seeded(4);
        let c = BitCode::random(32, &mut rng).unwrap();
        let sub = c.substring(0, 1).unwrap();
        assert_eq!(sub.bits, 32);
        let expected = (0..32).fold(0u32, |acc, i| acc | ((c.bit(i) as u32) << i));
        assert_eq!(sub.value, expected);
    }

    #[test]
    fn substring_reconcatenation_roundtrip() {
        let mut rng = seeded(5);
        for _ in 0..50 {
            let c = BitCode::random(64, &mut rng).unwrap();
            let mut rebuilt = BitCode::zeros(64).unwrap();
            for m in 0..4 {
                let sub = c.substring(m, 4).unwrap();
                for j in 0..16 {
                    rebuilt.set_bit(m * 16 + j, sub.value >> j & 1 == 1);
                }
            }
            assert_eq!(rebuilt, c);
        }
    }

    #[test]
    fn substring_crossing_word_boundary() {
        // width 96, t = 4 -> s = 24; substring 2 spans bits 48..72.
        let mut c = BitCode::zeros(96).unwrap();
        c.set_bit(48, true);
        c.set_bit(63, true);
        c.set_bit(64, true);
        c.set_bit(71, true);
        let sub = c.substring(2, 4).unwrap();
        assert_eq!(sub.value, 1 | 1 << 15 | 1 << 16 | 1 << 23);
    }

    #[test]
    fn substring_errors() {
        let c = BitCode::zeros(64).unwrap();
        assert!(matches!(c.substring(0, 3), Err(Error::NotDivisible { .. })));
        assert!(matches!(
            c.substring(0, 1),
            Err(Error::SubstringTooLong { .. })
        ));
        assert!(matches!(
            c.substring(4, 4),
            Err(Error::SubstringIndex { .. })
        ));
    }

    #[test]
    fn ball_radius_zero() {
        let center = Substring {
            value: 0xAB,
            index: 0,
            bits: 8,
        };
        let values: Vec<u32> = enumerate_ball(&center, 0).unwrap().collect();
        assert_eq!(values, vec![0xAB]);
    }

    #[test]
    fn ball_s8_r1_has_9_values() {
        let center = Substring {
            value: 0x5A,
            index: 0,
            bits: 8,
        };
        let values: Vec<u32> = enumerate_ball(&center, 1).unwrap().collect();
        assert_eq!(values.len(), 9);
    }

    #[test]
    fn ball_s16_r3_has_697_values() {
        // 1 + C(16,1) + C(16,2) + C(16,3) = 1 + 16 + 120 + 560 = 697.
        let center = Substring {
            value: 0x1234,
            index: 0,
            bits: 16,
        };
        let values: Vec<u32> = enumerate_ball(&center, 3).unwrap().collect();
        assert_eq!(values.len(), 697);
        let expected: u64 = (0..=3).map(|d| binomial(16, d)).sum();
        assert_eq!(values.len() as u64, expected);
    }

    #[test]
    fn ball_order_and_uniqueness() {
        let center = Substring {
            value: 0x0F,
            index: 0,
            bits: 12,
        };
        let values: Vec<u32> = enumerate_ball(&center, 4).unwrap().collect();
        let mut last = 0;
        let mut seen = std::collections::HashSet::new();
        for v in &values {
            let d = (v ^ center.value).count_ones();
            assert!(d >= last, "distances must be non-decreasing");
            assert!(d <= 4);
            last = d;
            assert!(seen.insert(*v), "duplicate value {v:#x}");
        }
    }

    #[test]
    fn ball_full_width_32() {
        let center = Substring {
            value: u32::MAX,
            index: 0,
            bits: 32,
        };
        let values: Vec<u32> = enumerate_ball(&center, 1).unwrap().collect();
        assert_eq!(values.len(), 33);
    }

    #[test]
    fn ball_radius_equals_bits() {
        // radius == s enumerates the entire space.
        let center = Substring {
            value: 2,
            index: 0,
            bits: 3,
        };
        let mut values: Vec<u32> = enumerate_ball(&center, 3).unwrap().collect();
        values.sort_unstable();
        assert_eq!(values, vec![0, 1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn ball_radius_too_large() {
        let center = Substring {
            value: 0,
            index: 0,
            bits: 8,
        };
        assert!(matches!(
            enumerate_ball(&center, 9),
            Err(Error::RadiusTooLarge { .. })
        ));
    }

    #[test]
    fn codeset_rejects_mixed_width() {
        let mut set = CodeSet::new(8).unwrap();
        set.push(BitCode::zeros(8).unwrap(), 0).unwrap();
        assert!(set.push(BitCode::zeros(16).unwrap(), 1).is_err());
    }

    #[test]
    fn codes_file_roundtrip() {
        let mut rng = seeded(6);
        let mut set = CodeSet::new(96).unwrap();
        for i in 0..17 {
            set.push(BitCode::random(96, &mut rng).unwrap(), i * 3)
                .unwrap();
        }
        for with_labels in [true, false] {
            let mut buf = Vec::new();
            set.write_to(&mut buf, with_labels).unwrap();
            let back = CodeSet::read_from(&mut buf.as_slice()).unwrap();
            assert_eq!(back.width(), 96);
            assert_eq!(back.codes(), set.codes());
            if with_labels {
                assert_eq!(back.labels(), set.labels());
            } else {
                assert!(back.labels().iter().all(|&l| l == 0));
            }
        }
    }

    #[test]
    fn codes_file_bad_magic() {
        let buf = b"NOPE\x00\x00\x00\x00".to_vec();
        assert!(matches!(
            CodeSet::read_from(&mut buf.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn codes_file_truncated() {
        let mut set = CodeSet::new(64).unwrap();
        set.push(BitCode::ones(64).unwrap(), 1).unwrap();
        let mut buf = Vec::new();
        set.write_to(&mut buf, true).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(CodeSet::read_from(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn hamming_range_matches_per_bit() {
        let mut rng = seeded(7);
        for _ in 0..100 {
            let a = BitCode::random(200, &mut rng).unwrap();
            let b = BitCode::random(200, &mut rng).unwrap();
            for &(start, len) in &[
                (0u32, 200u32),
                (3, 61),
                (60, 10),
                (64, 64),
                (199, 1),
                (0, 64),
            ] {
                let expected = (start..start + len)
                    .filter(|&i| a.bit(i) != b.bit(i))
                    .count() as u32;
                assert_eq!(a.hamming_range(&b, start, len), expected);
            }
        }
    }
}
