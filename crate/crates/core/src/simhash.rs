//! Sign-random-projection binarization of real feature vectors, plus the
//! cosine estimator recovered from Hamming distance.
//!
//! Each output bit is the sign of an inner product with a random vector drawn
//! from {-1, +1}^n with equal probability. Two codes then agree on a given
//! bit with probability `1 - theta/pi`, where `theta` is the angle between
//! the input vectors, so `cos(pi * Ham / k)` estimates their cosine
//! similarity.

use std::io::{Read, Write};

use crate::bitcode::BitCode;
use crate::byteio;
use crate::error::{Error, Result};
use crate::rng;

const BANK_MAGIC: &[u8; 4] = b"HVP1";
const EMBEDDINGS_MAGIC: &[u8; 4] = b"HVE1";

/// A real-valued feature vector. Values are finite by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct RealFeature {
    values: Vec<f32>,
}

impl RealFeature {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("feature vector"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Bank of `output_bits` random {-1,+1} projection vectors over
/// `input_dim`-dimensional inputs.
///
/// The matrix is a pure function of `(input_dim, output_bits, seed)`: entries
/// are drawn row-major from the crate's documented ChaCha12 stream layout,
/// so a persisted bank regenerates bit-identically on any platform. That
/// stream layout is versioned by the file magic "HVP1".
pub struct ProjectionBank {
    input_dim: u32,
    output_bits: u32,
    seed: u64,
    matrix: Vec<i8>,
}

impl ProjectionBank {
    pub fn new(input_dim: u32, output_bits: u32, seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Empty("projection input dimension"));
        }
        if output_bits == 0 || output_bits > crate::bitcode::MAX_WIDTH {
            return Err(Error::InvalidWidth {
                width: output_bits,
                max: crate::bitcode::MAX_WIDTH,
            });
        }
        let matrix = rng::rademacher_matrix(output_bits as usize, input_dim as usize, seed);
        Ok(Self {
            input_dim,
            output_bits,
            seed,
            matrix,
        })
    }

    pub fn input_dim(&self) -> u32 {
        self.input_dim
    }

    pub fn output_bits(&self) -> u32 {
        self.output_bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn row(&self, i: usize) -> &[i8] {
        let n = self.input_dim as usize;
        &self.matrix[i * n..(i + 1) * n]
    }

    fn project(&self, v: &RealFeature, row: usize) -> f64 {
        self.row(row)
            .iter()
            .zip(v.values())
            .map(|(&s, &x)| if s > 0 { x as f64 } else { -(x as f64) })
            .sum()
    }

    /// Maps a real vector to a binary code: bit `i` is 1 iff the projection
    /// onto row `i` is >= 0 (ties map to 1).
    pub fn binarize(&self, v: &RealFeature) -> Result<BitCode> {
        if v.dim() != self.input_dim as usize {
            return Err(Error::DimMismatch {
                left: v.dim(),
                right: self.input_dim as usize,
            });
        }
        let mut code = BitCode::zeros(self.output_bits)?;
        for i in 0..self.output_bits {
            if self.project(v, i as usize) >= 0.0 {
                code.set_bit(i, true);
            }
        }
        Ok(code)
    }

    /// Relaxed binarization: `tanh` of each projection, giving values in
    /// (-1, 1) whose signs match [`binarize`](Self::binarize). Feeds the
    /// substring-balance loss, which needs real-valued code surrogates.
    pub fn binarize_soft(&self, v: &RealFeature) -> Result<Vec<f64>> {
        if v.dim() != self.input_dim as usize {
            return Err(Error::DimMismatch {
                left: v.dim(),
                right: self.input_dim as usize,
            });
        }
        Ok((0..self.output_bits)
            .map(|i| self.project(v, i as usize).tanh())
            .collect())
    }

    /// Writes the bank header: magic "HVP1", u32 input dim, u32 output bits,
    /// u64 seed. The matrix regenerates from the seed on load.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        byteio::write_magic(w, BANK_MAGIC)?;
        byteio::write_u32(w, self.input_dim)?;
        byteio::write_u32(w, self.output_bits)?;
        byteio::write_u64(w, self.seed)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        byteio::expect_magic(r, BANK_MAGIC)?;
        let input_dim = byteio::read_u32(r)?;
        let output_bits = byteio::read_u32(r)?;
        let seed = byteio::read_u64(r)?;
        Self::new(input_dim, output_bits, seed)
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

/// Estimates the cosine similarity of the original vectors from the Hamming
/// distance of their codes: `cos(pi * Ham(a, b) / k)`.
pub fn estimate_cosine(a: &BitCode, b: &BitCode) -> Result<f64> {
    let dist = a.hamming(b)?;
    Ok((std::f64::consts::PI * dist as f64 / a.width() as f64).cos())
}

/// Probability that one projection bit agrees for two vectors at angle
/// `theta` (radians, in `[0, pi]`): `1 - theta/pi`.
pub fn collision_probability(theta: f64) -> Result<f64> {
    if !theta.is_finite() || !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::OutOfRange {
            what: "angle",
            value: theta,
        });
    }
    Ok(1.0 - theta / std::f64::consts::PI)
}

/// Writes an embeddings file: magic "HVE1", u32 count, u32 dim, u32 label
/// flag, then per row `dim` little-endian f32 values plus the label when
/// flagged.
pub fn write_embeddings<W: Write>(
    w: &mut W,
    rows: &[RealFeature],
    labels: Option<&[u32]>,
) -> Result<()> {
    let dim = rows.first().map(|r| r.dim()).unwrap_or(0);
    for row in rows {
        if row.dim() != dim {
            return Err(Error::DimMismatch {
                left: row.dim(),
                right: dim,
            });
        }
    }
    if let Some(labels) = labels {
        if labels.len() != rows.len() {
            return Err(Error::DimMismatch {
                left: labels.len(),
                right: rows.len(),
            });
        }
    }
    byteio::write_magic(w, EMBEDDINGS_MAGIC)?;
    byteio::write_u32(w, rows.len() as u32)?;
    byteio::write_u32(w, dim as u32)?;
    byteio::write_u32(w, labels.is_some() as u32)?;
    for (i, row) in rows.iter().enumerate() {
        for &v in row.values() {
            byteio::write_f32(w, v)?;
        }
        if let Some(labels) = labels {
            byteio::write_u32(w, labels[i])?;
        }
    }
    Ok(())
}

pub fn read_embeddings<R: Read>(r: &mut R) -> Result<(Vec<RealFeature>, Option<Vec<u32>>)> {
    byteio::expect_magic(r, EMBEDDINGS_MAGIC)?;
    let count = byteio::read_u32(r)?;
    let dim = byteio::read_u32(r)?;
    if count > 0 && dim == 0 {
        return Err(Error::Format("embeddings file with zero dimension".into()));
    }
    let flag = byteio::read_u32(r)?;
    if flag > 1 {
        return Err(Error::Format(format!(
            "label flag must be 0 or 1, found {flag}"
        )));
    }
    // Preallocation capped; a short read fails below regardless of the
    // declared count.
    let reserve = (count as usize).min(1 << 20);
    let mut rows = Vec::with_capacity(reserve);
    let mut labels = if flag == 1 {
        Some(Vec::with_capacity(reserve))
    } else {
        None
    };
    for _ in 0..count {
        let mut values = Vec::with_capacity((dim as usize).min(1 << 16));
        for _ in 0..dim {
            values.push(byteio::read_f32(r)?);
        }
        rows.push(RealFeature::new(values)?);
        if let Some(labels) = labels.as_mut() {
            labels.push(byteio::read_u32(r)?);
        }
    }
    Ok((rows, labels))
}

/// Header of an embeddings file.
pub struct EmbeddingsHeader {
    pub count: u32,
    pub dim: u32,
    pub labeled: bool,
}

pub fn read_embeddings_header<R: Read>(r: &mut R) -> Result<EmbeddingsHeader> {
    byteio::expect_magic(r, EMBEDDINGS_MAGIC)?;
    let count = byteio::read_u32(r)?;
    let dim = byteio::read_u32(r)?;
    let flag = byteio::read_u32(r)?;
    Ok(EmbeddingsHeader {
        count,
        dim,
        labeled: flag == 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{next_unit_f64, seeded};
    use rand_core::RngCore;

    fn random_feature(dim: usize, rng: &mut impl RngCore) -> RealFeature {
        RealFeature::new(
            (0..dim)
                .map(|_| (next_unit_f64(rng) * 2.0 - 1.0) as f32)
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_vector_maps_to_all_ones() {
        let bank = ProjectionBank::new(16, 64, 9).unwrap();
        let v = RealFeature::new(vec![0.0; 16]).unwrap();
        let code = bank.binarize(&v).unwrap();
        assert_eq!(code.count_ones(), 64);
    }

    #[test]
    fn binarize_is_scale_invariant() {
        let bank = ProjectionBank::new(24, 128, 10).unwrap();
        let mut rng = seeded(11);
        let v = random_feature(24, &mut rng);
        let doubled = RealFeature::new(v.values().iter().map(|&x| 2.0 * x).collect()).unwrap();
        assert_eq!(bank.binarize(&v).unwrap(), bank.binarize(&doubled).unwrap());
    }

    #[test]
    fn negation_flips_bits_off_ties() {
        // Oracle: recompute each projection directly; skip exact-zero dots
        // where the >= 0 tie rule breaks the symmetry.
        let bank = ProjectionBank::new(24, 128, 12);
        let bank = bank.unwrap();
        let mut rng = seeded(13);
        let v = random_feature(24, &mut rng);
        let neg = RealFeature::new(v.values().iter().map(|&x| -x).collect()).unwrap();
        let a = bank.binarize(&v).unwrap();
        let b = bank.binarize(&neg).unwrap();
        for i in 0..128u32 {
            let dot: f64 = bank
                .row(i as usize)
                .iter()
                .zip(v.values())
                .map(|(&s, &x)| s as f64 * x as f64)
                .sum();
            if dot != 0.0 {
                assert_ne!(a.bit(i), b.bit(i), "bit {i} should flip (dot = {dot})");
            }
        }
    }

    #[test]
    fn binarize_deterministic_per_seed() {
        let mut rng = seeded(14);
        let v = random_feature(32, &mut rng);
        let a = ProjectionBank::new(32, 256, 77)
            .unwrap()
            .binarize(&v)
            .unwrap();
        let b = ProjectionBank::new(32, 256, 77)
            .unwrap()
            .binarize(&v)
            .unwrap();
        let c = ProjectionBank::new(32, 256, 78)
            .unwrap()
            .binarize(&v)
            .unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn binarize_dim_mismatch() {
        let bank = ProjectionBank::new(8, 16, 0).unwrap();
        let v = RealFeature::new(vec![1.0; 9]).unwrap();
        assert!(matches!(bank.binarize(&v), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn feature_rejects_non_finite() {
        assert!(matches!(
            RealFeature::new(vec![1.0, f32::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(matches!(
            RealFeature::new(vec![f32::INFINITY]),
            Err(Error::NonFinite { index: 0 })
        ));
    }

    #[test]
    fn estimate_cosine_endpoints() {
        let mut rng = seeded(15);
        let a = BitCode::random(64, &mut rng).unwrap();
        assert!((estimate_cosine(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let zero = BitCode::zeros(64).unwrap();
        let ones = BitCode::ones(64).unwrap();
        assert!((estimate_cosine(&zero, &ones).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn collision_probability_range() {
        assert_eq!(collision_probability(0.0).unwrap(), 1.0);
        assert!((collision_probability(std::f64::consts::PI).unwrap()).abs() < 1e-15);
        assert!((collision_probability(std::f64::consts::FRAC_PI_2).unwrap() - 0.5).abs() < 1e-15);
        assert!(collision_probability(-0.1).is_err());
        assert!(collision_probability(3.15).is_err());
        assert!(collision_probability(f64::NAN).is_err());
    }

    #[test]
    fn soft_binarize_sign_matches_hard() {
        let bank = ProjectionBank::new(16, 96, 21).unwrap();
        let mut rng = seeded(22);
        let v = random_feature(16, &mut rng);
        let hard = bank.binarize(&v).unwrap();
        let soft = bank.binarize_soft(&v).unwrap();
        assert_eq!(soft.len(), 96);
        for (i, &x) in soft.iter().enumerate() {
            assert!((-1.0..=1.0).contains(&x));
            if x != 0.0 {
                assert_eq!(hard.bit(i as u32), x > 0.0);
            }
        }
    }

    #[test]
    fn bank_roundtrip_regenerates_matrix() {
        let bank = ProjectionBank::new(48, 512, 0xDEAD_BEEF).unwrap();
        let mut buf = Vec::new();
        bank.write_to(&mut buf).unwrap();
        let back = ProjectionBank::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.matrix, bank.matrix);
        assert_eq!(back.seed(), bank.seed());
    }

    #[test]
    fn embeddings_roundtrip() {
        let mut rng = seeded(23);
        let rows: Vec<RealFeature> = (0..5).map(|_| random_feature(7, &mut rng)).collect();
        let labels = vec![3, 1, 4, 1, 5];
        let mut buf = Vec::new();
        write_embeddings(&mut buf, &rows, Some(&labels)).unwrap();
        let (back, back_labels) = read_embeddings(&mut buf.as_slice()).unwrap();
        assert_eq!(back, rows);
        assert_eq!(back_labels.unwrap(), labels);

        let mut buf = Vec::new();
        write_embeddings(&mut buf, &rows, None).unwrap();
        let (_, none_labels) = read_embeddings(&mut buf.as_slice()).unwrap();
        assert!(none_labels.is_none());
    }

    #[test]
    fn mean_cosine_estimate_tracks_60_degrees() {
        // Monte-Carlo oracle: pairs constructed at exactly 60 degrees, one
        // fresh bank per trial; the mean of cos(pi*Ham/k) must fall within
        // 3 propagated-binomial sigma of cos(60deg).
        let k = 512u32;
        let dim = 48usize;
        let theta = 60f64.to_radians();
        let trials = 1000;
        let mut rng = seeded(24);
        let mut sum = 0.0;
        for trial in 0..trials {
            let (a, b) = pair_at_angle(dim, theta, &mut rng);
            let bank = ProjectionBank::new(dim as u32, k, 40_000 + trial).unwrap();
            let ca = bank.binarize(&a).unwrap();
            let cb = bank.binarize(&b).unwrap();
            sum += estimate_cosine(&ca, &cb).unwrap();
        }
        let mean = sum / trials as f64;
        let p = 1.0 - theta / std::f64::consts::PI;
        let sigma_rate = (p * (1.0 - p) / k as f64).sqrt();
        let sigma_single = std::f64::consts::PI * theta.sin() * sigma_rate;
        let tol = 3.0 * sigma_single / (trials as f64).sqrt();
        assert!(
            (mean - theta.cos()).abs() <= tol,
            "mean {mean} vs cos60 {} (tol {tol})",
            theta.cos()
        );
    }

    // Builds a unit-norm pair with exact angle theta via Gram-Schmidt.
    pub(crate) fn pair_at_angle(
        dim: usize,
        theta: f64,
        rng: &mut impl RngCore,
    ) -> (RealFeature, RealFeature) {
        let gauss = |rng: &mut dyn FnMut() -> f64| {
            // Box-Muller from two uniforms.
            let u1: f64 = rng();
            let u2: f64 = rng();
            (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let mut draw = || next_unit_f64(rng);
        let u: Vec<f64> = (0..dim).map(|_| gauss(&mut draw)).collect();
        let w: Vec<f64> = (0..dim).map(|_| gauss(&mut draw)).collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nu = norm(&u);
        let u: Vec<f64> = u.iter().map(|x| x / nu).collect();
        let dot: f64 = u.iter().zip(&w).map(|(a, b)| a * b).sum();
        let mut perp: Vec<f64> = w.iter().zip(&u).map(|(w, u)| w - dot * u).collect();
        let np = norm(&perp);
        perp.iter_mut().for_each(|x| *x /= np);
        let b: Vec<f64> = u
            .iter()
            .zip(&perp)
            .map(|(u, p)| theta.cos() * u + theta.sin() * p)
            .collect();
        (
            RealFeature::new(u.iter().map(|&x| x as f32).collect()).unwrap(),
            RealFeature::new(b.iter().map(|&x| x as f32).collect()).unwrap(),
        )
    }

    #[test]
    fn closer_angles_give_smaller_mean_hamming() {
        // Order preservation in expectation: theta 0.5 vs 0.9 rad separated
        // by >= 0.3 must order the mean Hamming distances.
        let dim = 32;
        let k = 512;
        let mut rng = seeded(25);
        let (mut sum_near, mut sum_far) = (0u64, 0u64);
        for trial in 0..200u64 {
            let (a, b) = pair_at_angle(dim, 0.5, &mut rng);
            let (c, d) = pair_at_angle(dim, 0.9, &mut rng);
            let bank = ProjectionBank::new(dim as u32, k, 90_000 + trial).unwrap();
            sum_near += bank
                .binarize(&a)
                .unwrap()
                .hamming(&bank.binarize(&b).unwrap())
                .unwrap() as u64;
            sum_far += bank
                .binarize(&c)
                .unwrap()
                .hamming(&bank.binarize(&d).unwrap())
                .unwrap() as u64;
        }
        assert!(sum_near < sum_far, "near {sum_near} !< far {sum_far}");
    }
}
