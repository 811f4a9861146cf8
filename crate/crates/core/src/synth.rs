//! Synthetic genuine/imposter code generation for reproducible indexing
//! benchmarks.
//!
//! Each class gets a uniform random center; every sample flips each center
//! bit independently with the genuine flip probability. Genuine pairs then
//! concentrate near `2 p (1-p) k` while imposter pairs sit near `k/2`, so
//! the class structure separates cleanly for small `p`.

use crate::bitcode::{BitCode, CodeSet};
use crate::error::{Error, Result};
use crate::rng::{next_unit_f64, seeded};

/// Generation parameters. `gallery_fraction` controls the split: the first
/// `round(fraction * total)` samples (distributed evenly over classes,
/// clamped so both sides stay nonempty) enroll in the gallery, the rest
/// become probes.
#[derive(Clone, Copy, Debug)]
pub struct SynthSpec {
    pub classes: u32,
    pub samples_per_class: u32,
    pub width: u32,
    pub genuine_flip_prob: f64,
    pub seed: u64,
    pub gallery_fraction: f64,
}

impl SynthSpec {
    pub fn new(classes: u32, samples_per_class: u32, width: u32, p: f64, seed: u64) -> Self {
        Self {
            classes,
            samples_per_class,
            width,
            genuine_flip_prob: p,
            seed,
            gallery_fraction: 0.4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::InvalidParam(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        if self.samples_per_class == 0 {
            return Err(Error::InvalidParam(
                "samples_per_class must be positive".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.genuine_flip_prob) {
            return Err(Error::OutOfRange {
                what: "genuine flip probability",
                value: self.genuine_flip_prob,
            });
        }
        if !(self.gallery_fraction > 0.0 && self.gallery_fraction < 1.0) {
            return Err(Error::OutOfRange {
                what: "gallery fraction",
                value: self.gallery_fraction,
            });
        }
        crate::bitcode::BitCode::zeros(self.width)?;
        Ok(())
    }

    /// Named dataset-scale presets (512-bit codes, flip probability 0.05).
    /// Gallery/probe totals mirror the published database sizes: iitk is
    /// 8,168 / 12,252, interval 1,022 / 1,533, iitd 450 / 670, lamp
    /// 6,264 / 9,396.
    pub fn preset(name: &str, seed: u64) -> Result<SynthSpec> {
        let (classes, spc, fraction) = match name {
            "iitd" => (224, 5, 450.0 / 1120.0),
            "interval" => (511, 5, 0.4),
            "lamp" => (783, 20, 0.4),
            "iitk" => (2042, 10, 0.4),
            other => {
                return Err(Error::InvalidParam(format!("unknown preset '{other}'")));
            }
        };
        Ok(SynthSpec {
            classes,
            samples_per_class: spc,
            width: 512,
            genuine_flip_prob: 0.05,
            seed,
            gallery_fraction: fraction,
        })
    }

    /// Expected genuine-pair distance `2 p (1-p) k`.
    pub fn expected_genuine_distance(&self) -> f64 {
        2.0 * self.genuine_flip_prob * (1.0 - self.genuine_flip_prob) * self.width as f64
    }

    /// Expected imposter-pair distance `k/2`.
    pub fn expected_imposter_distance(&self) -> f64 {
        self.width as f64 / 2.0
    }
}

/// Generates `(gallery, probes)` deterministically from the spec's seed.
/// Output order is canonical: class-major, sample-minor.
pub fn generate(spec: &SynthSpec) -> Result<(CodeSet, CodeSet)> {
    spec.validate()?;
    let total = spec.classes as u64 * spec.samples_per_class as u64;
    let gallery_total = (spec.gallery_fraction * total as f64).round() as u64;
    let gallery_total = gallery_total.clamp(1, total - 1);
    let base = (gallery_total / spec.classes as u64) as u32;
    let remainder = (gallery_total % spec.classes as u64) as u32;

    let mut rng = seeded(spec.seed);
    let mut gallery = CodeSet::new(spec.width)?;
    let mut probes = CodeSet::new(spec.width)?;
    for class in 0..spec.classes {
        let center = BitCode::random(spec.width, &mut rng)?;
        let gallery_count = base + (class < remainder) as u32;
        for sample in 0..spec.samples_per_class {
            let mut code = center.clone();
            for bit in 0..spec.width {
                if next_unit_f64(&mut rng) < spec.genuine_flip_prob {
                    code.flip_bit(bit);
                }
            }
            if sample < gallery_count {
                gallery.push(code, class)?;
            } else {
                probes.push(code, class)?;
            }
        }
    }
    Ok((gallery, probes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_flip_prob_reproduces_centers() {
        let spec = SynthSpec::new(5, 4, 128, 0.0, 90);
        let (gallery, probes) = generate(&spec).unwrap();
        // All samples of a class are identical, so genuine distance is 0.
        for class in 0..5 {
            let in_gallery: Vec<_> = (0..gallery.len() as u32)
                .filter(|&i| gallery.label(i) == class)
                .collect();
            let in_probes: Vec<_> = (0..probes.len() as u32)
                .filter(|&i| probes.label(i) == class)
                .collect();
            let reference = gallery.code(in_gallery[0]);
            for &i in &in_gallery {
                assert_eq!(gallery.code(i), reference);
            }
            for &i in &in_probes {
                assert_eq!(probes.code(i), reference);
            }
        }
    }

    #[test]
    fn two_class_centers_near_half_width() {
        // Uniform centers: distance is Binomial(k, 1/2), so within
        // 4*sqrt(k)/2 of k/2 (seeded draw, deterministic).
        let spec = SynthSpec::new(2, 2, 512, 0.0, 91);
        let (gallery, _) = generate(&spec).unwrap();
        let d = gallery.code(0).hamming(gallery.code(1)).unwrap() as f64;
        assert!((d - 256.0).abs() <= 4.0 * (512f64).sqrt() / 2.0, "d = {d}");
    }

    #[test]
    fn genuine_mean_tracks_binomial_oracle() {
        // Binomial oracle: each genuine pair differs per bit with
        // probability q = 2 p (1-p); the mean over many pairs must sit
        // within a few sigma of q*k.
        let spec = SynthSpec::new(50, 10, 512, 0.05, 92);
        let (gallery, probes) = generate(&spec).unwrap();
        let mut sum = 0u64;
        let mut count = 0u64;
        for class in 0..50 {
            let mut members: Vec<&BitCode> = Vec::new();
            for i in 0..gallery.len() as u32 {
                if gallery.label(i) == class {
                    members.push(gallery.code(i));
                }
            }
            for i in 0..probes.len() as u32 {
                if probes.label(i) == class {
                    members.push(probes.code(i));
                }
            }
            for i in 0..members.len() {
                for j in i + 1..members.len() {
                    sum += members[i].hamming(members[j]).unwrap() as u64;
                    count += 1;
                }
            }
        }
        let mean = sum as f64 / count as f64;
        let expected = spec.expected_genuine_distance();
        let q: f64 = 2.0 * 0.05 * 0.95;
        let sigma_pair = (512.0 * q * (1.0 - q)).sqrt();
        // Pairs within a class are correlated; classes are independent.
        let tol = 3.0 * sigma_pair / (50f64).sqrt();
        assert!(
            (mean - expected).abs() <= tol,
            "mean {mean} vs {expected} (tol {tol})"
        );
    }

    #[test]
    fn same_seed_same_output() {
        let spec = SynthSpec::new(10, 5, 256, 0.1, 93);
        let (g1, p1) = generate(&spec).unwrap();
        let (g2, p2) = generate(&spec).unwrap();
        assert_eq!(g1.codes(), g2.codes());
        assert_eq!(p1.codes(), p2.codes());
        assert_eq!(g1.labels(), g2.labels());
        let other = SynthSpec { seed: 94, ..spec };
        let (g3, _) = generate(&other).unwrap();
        assert_ne!(g1.codes(), g3.codes());
    }

    #[test]
    fn preset_sizes_match_published_scales() {
        for (name, gallery_n, probe_n) in [
            ("iitk", 8168, 12252),
            ("interval", 1022, 1533),
            ("iitd", 450, 670),
            ("lamp", 6264, 9396),
        ] {
            let spec = SynthSpec::preset(name, 1).unwrap();
            let total = spec.classes as u64 * spec.samples_per_class as u64;
            let gallery_total = (spec.gallery_fraction * total as f64).round() as u64;
            assert_eq!(gallery_total, gallery_n, "{name}");
            assert_eq!(total - gallery_total, probe_n, "{name}");
        }
        assert!(SynthSpec::preset("nope", 1).is_err());
    }

    #[test]
    fn iitd_preset_generates_exact_split() {
        let spec = SynthSpec::preset("iitd", 7).unwrap();
        let (gallery, probes) = generate(&spec).unwrap();
        assert_eq!(gallery.len(), 450);
        assert_eq!(probes.len(), 670);
        // Every class appears in both sides.
        for class in 0..spec.classes {
            assert!(gallery.labels().contains(&class));
            assert!(probes.labels().contains(&class));
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(generate(&SynthSpec::new(1, 4, 64, 0.1, 0)).is_err());
        assert!(generate(&SynthSpec::new(4, 0, 64, 0.1, 0)).is_err());
        assert!(generate(&SynthSpec::new(4, 4, 64, 0.5, 0)).is_err());
        assert!(generate(&SynthSpec::new(4, 4, 64, -0.01, 0)).is_err());
        assert!(generate(&SynthSpec::new(4, 4, 0, 0.1, 0)).is_err());
        let bad_fraction = SynthSpec {
            gallery_fraction: 0.0,
            ..SynthSpec::new(4, 4, 64, 0.1, 0)
        };
        assert!(generate(&bad_fraction).is_err());
    }

    #[test]
    fn single_sample_classes_split_across_sides() {
        // Degenerate but legal: one sample per class lands on one side only.
        let spec = SynthSpec::new(2, 1, 512, 0.0, 95);
        let (gallery, probes) = generate(&spec).unwrap();
        assert_eq!(gallery.len(), 1);
        assert_eq!(probes.len(), 1);
        let d = gallery.code(0).hamming(probes.code(0)).unwrap() as f64;
        assert!((d - 256.0).abs() <= 4.0 * (512f64).sqrt() / 2.0, "d = {d}");
    }
}
