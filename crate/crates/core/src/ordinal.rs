//! Ordinal filtering building blocks and metric-learning numerics as pure
//! functions: two-lobe (dilobe) zero-sum Gaussian kernels, a fixed-weight
//! convolutional feature extractor over grayscale strips, the triplet
//! objective with hard-triplet selection and a stepped margin schedule, and
//! the substring-balance (mcom) loss.

use std::io::{BufRead, Read, Write};

use crate::bitcode::BitCode;
use crate::byteio;
use crate::error::{Error, Result};
use crate::rng;
use crate::simhash::RealFeature;

const WEIGHTS_MAGIC: &[u8; 4] = b"HVW1";

// ---------------------------------------------------------------------------
// Dilobe kernels

/// Parameters of a dilobe kernel: a positive and a negative 2-D Gaussian lobe
/// sampled on a small pixel grid.
#[derive(Clone, Copy, Debug)]
pub struct DilobeSpec {
    pub height: usize,
    pub width: usize,
    /// Positive lobe center, (row, col) in pixels.
    pub mu_p: (f64, f64),
    /// Negative lobe center, (row, col) in pixels.
    pub mu_n: (f64, f64),
    pub delta_p: f64,
    pub delta_n: f64,
    /// Positive lobe coefficient in (0, 1].
    pub c_p: f64,
}

/// A discrete zero-sum two-lobe kernel.
///
/// Weights are `c_p * N(mu_p, delta_p) - c_n * N(mu_n, delta_n)` sampled at
/// integer pixel centers, with `c_n` rescaled so the discrete sum is exactly
/// zero; the response to any constant input is therefore zero.
#[derive(Clone, Debug)]
pub struct DilobeKernel {
    pub height: usize,
    pub width: usize,
    pub mu_p: (f64, f64),
    pub mu_n: (f64, f64),
    pub delta_p: f64,
    pub delta_n: f64,
    pub c_p: f64,
    pub c_n: f64,
    weights: Vec<f64>,
}

fn gaussian_2d(y: f64, x: f64, mu: (f64, f64), delta: f64) -> f64 {
    let d2 = (y - mu.0).powi(2) + (x - mu.1).powi(2);
    (1.0 / ((2.0 * std::f64::consts::PI).sqrt() * delta)) * (-d2 / (2.0 * delta * delta)).exp()
}

pub fn make_dilobe(spec: &DilobeSpec) -> Result<DilobeKernel> {
    if spec.height == 0 || spec.width == 0 {
        return Err(Error::InvalidParam("kernel extent must be positive".into()));
    }
    if spec.delta_p <= 0.0 || spec.delta_n <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "lobe scales must be positive, got {} and {}",
            spec.delta_p, spec.delta_n
        )));
    }
    let (h, w) = (spec.height as f64 - 1.0, spec.width as f64 - 1.0);
    for (name, mu) in [("positive", spec.mu_p), ("negative", spec.mu_n)] {
        if !(0.0..=h).contains(&mu.0) || !(0.0..=w).contains(&mu.1) {
            return Err(Error::InvalidParam(format!(
                "{name} lobe center {mu:?} outside kernel extent {}x{}",
                spec.height, spec.width
            )));
        }
    }
    if !(0.0 < spec.c_p && spec.c_p <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "c_p must be in (0, 1], got {}",
            spec.c_p
        )));
    }
    let mut pos = vec![0.0; spec.height * spec.width];
    let mut neg = vec![0.0; spec.height * spec.width];
    for y in 0..spec.height {
        for x in 0..spec.width {
            pos[y * spec.width + x] = gaussian_2d(y as f64, x as f64, spec.mu_p, spec.delta_p);
            neg[y * spec.width + x] = gaussian_2d(y as f64, x as f64, spec.mu_n, spec.delta_n);
        }
    }
    let sum_p: f64 = pos.iter().sum();
    let sum_n: f64 = neg.iter().sum();
    let c_n = spec.c_p * sum_p / sum_n;
    let weights: Vec<f64> = pos
        .iter()
        .zip(&neg)
        .map(|(p, n)| spec.c_p * p - c_n * n)
        .collect();
    Ok(DilobeKernel {
        height: spec.height,
        width: spec.width,
        mu_p: spec.mu_p,
        mu_n: spec.mu_n,
        delta_p: spec.delta_p,
        delta_n: spec.delta_n,
        c_p: spec.c_p,
        c_n,
        weights,
    })
}

impl DilobeKernel {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn at(&self, y: usize, x: usize) -> f64 {
        self.weights[y * self.width + x]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Same-size convolution with edge replication, so constant inputs stay
    /// constant under padding and the zero-sum property holds at the borders
    /// too.
    pub fn convolve_same(&self, input: &Strip) -> Strip {
        let (ih, iw) = (input.height as isize, input.width as isize);
        let (kh, kw) = (self.height as isize, self.width as isize);
        let (cy, cx) = ((kh - 1) / 2, (kw - 1) / 2);
        let mut out = vec![0.0; input.height * input.width];
        for y in 0..ih {
            for x in 0..iw {
                let mut acc = 0.0;
                for ky in 0..kh {
                    for kx in 0..kw {
                        let sy = (y + ky - cy).clamp(0, ih - 1);
                        let sx = (x + kx - cx).clamp(0, iw - 1);
                        acc += self.weights[(ky * kw + kx) as usize]
                            * input.data[(sy * iw + sx) as usize];
                    }
                }
                out[(y * iw + x) as usize] = acc;
            }
        }
        Strip {
            height: input.height,
            width: input.width,
            data: out,
        }
    }
}

// ---------------------------------------------------------------------------
// Strips (2-D real images)

/// A 2-D grayscale image with finite values, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Strip {
    pub height: usize,
    pub width: usize,
    data: Vec<f64>,
}

impl Strip {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Empty("strip"));
        }
        if data.len() != height * width {
            return Err(Error::DimMismatch {
                left: data.len(),
                right: height * width,
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn at(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Reads a binary PGM (P5) image with maxval <= 255 into a strip scaled to
/// [0, 1].
pub fn read_pgm<R: BufRead>(r: &mut R) -> Result<Strip> {
    fn next_token<R: BufRead>(r: &mut R) -> Result<String> {
        let mut tok = String::new();
        loop {
            let mut byte = [0u8; 1];
            if r.read(&mut byte)? == 0 {
                if tok.is_empty() {
                    return Err(Error::Format("unexpected end of PGM header".into()));
                }
                return Ok(tok);
            }
            let c = byte[0] as char;
            if c == '#' {
                let mut comment = String::new();
                r.read_line(&mut comment)?;
                continue;
            }
            if c.is_ascii_whitespace() {
                if tok.is_empty() {
                    continue;
                }
                return Ok(tok);
            }
            tok.push(c);
        }
    }
    let magic = next_token(r)?;
    if magic != "P5" {
        return Err(Error::Format(format!(
            "expected PGM magic P5, found '{magic}'"
        )));
    }
    let parse = |tok: String, what: &str| {
        tok.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PGM {what}: '{tok}'")))
    };
    let width = parse(next_token(r)?, "width")?;
    let height = parse(next_token(r)?, "height")?;
    let maxval = parse(next_token(r)?, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Format("PGM with zero dimension".into()));
    }
    if width.saturating_mul(height) > 1 << 26 {
        return Err(Error::Format(format!(
            "PGM of {width}x{height} exceeds the size limit"
        )));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
    }
    let mut bytes = vec![0u8; width * height];
    r.read_exact(&mut bytes)?;
    let scale = 1.0 / maxval as f64;
    Strip::new(
        height,
        width,
        bytes.iter().map(|&b| b as f64 * scale).collect(),
    )
}

// ---------------------------------------------------------------------------
// Fixed-weight feature extractor

/// One convolutional stage: a bank of dilobe filters followed by a 1x1
/// channel combination, optional 2x2 max-pooling, and per-map
/// standardization.
#[derive(Clone, Debug)]
pub struct LayerSpec {
    pub filters: usize,
    /// Lobe-pair axis orientations, radians.
    pub orientations: Vec<f64>,
    /// Gaussian lobe scales (pixels).
    pub scales: Vec<f64>,
    pub pool: bool,
}

/// Full extractor configuration. The default (three stages of 8/16/32
/// filters over 48x432 strips, projected to 512 dimensions) matches the
/// supported strip geometry end to end.
#[derive(Clone, Debug)]
pub struct FilterBankSpec {
    pub input_height: usize,
    pub input_width: usize,
    pub kernel_height: usize,
    pub kernel_width: usize,
    pub layers: Vec<LayerSpec>,
    pub output_dim: usize,
    pub projection_seed: u64,
}

impl Default for FilterBankSpec {
    fn default() -> Self {
        let orientations = vec![
            0.0,
            std::f64::consts::FRAC_PI_4,
            std::f64::consts::FRAC_PI_2,
            3.0 * std::f64::consts::FRAC_PI_4,
        ];
        Self {
            input_height: 48,
            input_width: 432,
            kernel_height: 3,
            kernel_width: 5,
            layers: vec![
                LayerSpec {
                    filters: 8,
                    orientations: orientations.clone(),
                    scales: vec![0.8, 1.2],
                    pool: false,
                },
                LayerSpec {
                    filters: 16,
                    orientations: orientations.clone(),
                    scales: vec![0.8, 1.2],
                    pool: true,
                },
                LayerSpec {
                    filters: 32,
                    orientations,
                    scales: vec![0.8, 1.2],
                    pool: true,
                },
            ],
            output_dim: 512,
            projection_seed: 0x0F17_BA2C,
        }
    }
}

impl FilterBankSpec {
    /// Generates the dilobe filters of one layer: the cross product of
    /// orientations, scales, and as many lobe separations as needed to reach
    /// the layer's filter count. Lobe centers are placed symmetrically about
    /// the kernel center along the orientation axis and clamped into the
    /// extent.
    pub fn layer_filters(&self, layer: &LayerSpec) -> Result<Vec<DilobeKernel>> {
        let base = layer.orientations.len() * layer.scales.len();
        if base == 0 || layer.filters == 0 || !layer.filters.is_multiple_of(base) {
            return Err(Error::InvalidParam(format!(
                "filter count {} is not a multiple of orientations x scales = {base}",
                layer.filters
            )));
        }
        let separations = [2.0, 1.2, 2.8, 1.6, 3.2, 1.0, 2.4, 0.8];
        let variants = layer.filters / base;
        if variants > separations.len() {
            return Err(Error::InvalidParam(format!(
                "filter count {} needs {variants} separations, only {} available",
                layer.filters,
                separations.len()
            )));
        }
        let cy = (self.kernel_height as f64 - 1.0) / 2.0;
        let cx = (self.kernel_width as f64 - 1.0) / 2.0;
        let clamp = |v: f64, hi: f64| v.clamp(0.0, hi);
        let mut kernels = Vec::with_capacity(layer.filters);
        for &sep in &separations[..variants] {
            for &scale in &layer.scales {
                for &phi in &layer.orientations {
                    let dy = sep / 2.0 * phi.sin();
                    let dx = sep / 2.0 * phi.cos();
                    let mu_p = (
                        clamp(cy + dy, self.kernel_height as f64 - 1.0),
                        clamp(cx + dx, self.kernel_width as f64 - 1.0),
                    );
                    let mu_n = (
                        clamp(cy - dy, self.kernel_height as f64 - 1.0),
                        clamp(cx - dx, self.kernel_width as f64 - 1.0),
                    );
                    kernels.push(make_dilobe(&DilobeSpec {
                        height: self.kernel_height,
                        width: self.kernel_width,
                        mu_p,
                        mu_n,
                        delta_p: scale,
                        delta_n: scale,
                        c_p: 1.0,
                    })?);
                }
            }
        }
        Ok(kernels)
    }
}

/// Per-layer 1x1 channel-combination weights.
#[derive(Clone, Debug, PartialEq)]
pub struct CombinerWeights {
    pub layers: Vec<Vec<f32>>,
}

impl CombinerWeights {
    /// Uniform averaging weights matching a spec's layer filter counts.
    pub fn uniform(spec: &FilterBankSpec) -> Self {
        Self {
            layers: spec
                .layers
                .iter()
                .map(|l| vec![1.0 / l.filters as f32; l.filters])
                .collect(),
        }
    }

    pub fn matches(&self, spec: &FilterBankSpec) -> bool {
        self.layers.len() == spec.layers.len()
            && self
                .layers
                .iter()
                .zip(&spec.layers)
                .all(|(w, l)| w.len() == l.filters)
    }

    /// Writes the weights file: magic "HVW1", u32 layer count, then per layer
    /// a u32 filter count followed by that many little-endian f32 weights.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        byteio::write_magic(w, WEIGHTS_MAGIC)?;
        byteio::write_u32(w, self.layers.len() as u32)?;
        for layer in &self.layers {
            byteio::write_u32(w, layer.len() as u32)?;
            for &v in layer {
                byteio::write_f32(w, v)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        byteio::expect_magic(r, WEIGHTS_MAGIC)?;
        let layer_count = byteio::read_u32(r)?;
        let mut layers = Vec::with_capacity(layer_count as usize);
        for _ in 0..layer_count {
            let filters = byteio::read_u32(r)?;
            let mut weights = Vec::with_capacity(filters as usize);
            for _ in 0..filters {
                let v = byteio::read_f32(r)?;
                if !v.is_finite() {
                    return Err(Error::Format("non-finite combiner weight".into()));
                }
                weights.push(v);
            }
            layers.push(weights);
        }
        Ok(Self { layers })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)
    }
}

/// Shape of one stage's output, `(height, width, channels)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageShape {
    pub name: String,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

fn relu_inplace(map: &mut [f64]) {
    for v in map {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zero mean, unit variance over one map; constant maps standardize to zero.
fn standardize_inplace(map: &mut [f64]) {
    let n = map.len() as f64;
    let mean = map.iter().sum::<f64>() / n;
    let var = map.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var < 1e-24 {
        map.iter_mut().for_each(|v| *v = 0.0);
    } else {
        let inv = 1.0 / var.sqrt();
        map.iter_mut().for_each(|v| *v = (*v - mean) * inv);
    }
}

fn max_pool_2x2(input: &Strip) -> Result<Strip> {
    if !input.height.is_multiple_of(2) || !input.width.is_multiple_of(2) {
        return Err(Error::InvalidParam(format!(
            "map of {}x{} cannot be 2x2 max-pooled",
            input.height, input.width
        )));
    }
    let (oh, ow) = (input.height / 2, input.width / 2);
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut m = f64::NEG_INFINITY;
            for dy in 0..2 {
                for dx in 0..2 {
                    m = m.max(input.at(2 * y + dy, 2 * x + dx));
                }
            }
            out[y * ow + x] = m;
        }
    }
    Strip::new(oh, ow, out)
}

/// Runs the fixed-weight extractor: per stage, dilobe convolutions with
/// rectification, a 1x1 weighted channel combination with rectification,
/// optional 2x2 max-pooling (stride 2), and per-map standardization; then a
/// flatten and a seeded {-1,+1} projection down to `output_dim` values.
pub fn extract_features(
    strip: &Strip,
    spec: &FilterBankSpec,
    weights: &CombinerWeights,
) -> Result<RealFeature> {
    Ok(extract_features_traced(strip, spec, weights)?.0)
}

/// Like [`extract_features`] but also reports each stage's output shape.
pub fn extract_features_traced(
    strip: &Strip,
    spec: &FilterBankSpec,
    weights: &CombinerWeights,
) -> Result<(RealFeature, Vec<StageShape>)> {
    if strip.height != spec.input_height || strip.width != spec.input_width {
        return Err(Error::InvalidParam(format!(
            "strip is {}x{}, extractor expects {}x{}",
            strip.height, strip.width, spec.input_height, spec.input_width
        )));
    }
    if !weights.matches(spec) {
        return Err(Error::InvalidParam(
            "combiner weights do not match the layer filter counts".into(),
        ));
    }
    fn record(shapes: &mut Vec<StageShape>, name: String, h: usize, w: usize, c: usize) {
        shapes.push(StageShape {
            name,
            height: h,
            width: w,
            channels: c,
        });
    }
    let mut shapes = Vec::new();
    let mut current = strip.clone();
    record(
        &mut shapes,
        "input".into(),
        current.height,
        current.width,
        1,
    );
    for (li, layer) in spec.layers.iter().enumerate() {
        let kernels = spec.layer_filters(layer)?;
        let mut maps: Vec<Strip> = kernels.iter().map(|k| k.convolve_same(&current)).collect();
        for map in &mut maps {
            relu_inplace(&mut map.data);
        }
        record(
            &mut shapes,
            format!("dilobe_conv{}", li + 1),
            maps[0].height,
            maps[0].width,
            maps.len(),
        );
        let w = &weights.layers[li];
        let mut combined = vec![0.0; maps[0].data.len()];
        for (map, &wv) in maps.iter().zip(w) {
            for (acc, &v) in combined.iter_mut().zip(&map.data) {
                *acc += wv as f64 * v;
            }
        }
        relu_inplace(&mut combined);
        current = Strip::new(maps[0].height, maps[0].width, combined)?;
        record(
            &mut shapes,
            format!("combine{}", li + 1),
            current.height,
            current.width,
            1,
        );
        if layer.pool {
            current = max_pool_2x2(&current)?;
            record(
                &mut shapes,
                format!("pool{}", li + 1),
                current.height,
                current.width,
                1,
            );
        }
        standardize_inplace(&mut current.data);
        record(
            &mut shapes,
            format!("standardize{}", li + 1),
            current.height,
            current.width,
            1,
        );
    }
    let flat = &current.data;
    record(&mut shapes, "flatten".into(), 1, flat.len(), 1);
    let matrix = rng::rademacher_matrix(spec.output_dim, flat.len(), spec.projection_seed);
    let norm = 1.0 / (flat.len() as f64).sqrt();
    let out: Vec<f32> = (0..spec.output_dim)
        .map(|i| {
            let row = &matrix[i * flat.len()..(i + 1) * flat.len()];
            let dot: f64 = row
                .iter()
                .zip(flat)
                .map(|(&s, &x)| if s > 0 { x } else { -x })
                .sum();
            (dot * norm) as f32
        })
        .collect();
    let feature = RealFeature::new(out)?;
    record(&mut shapes, "project".into(), 1, spec.output_dim, 1);
    Ok((feature, shapes))
}

// ---------------------------------------------------------------------------
// Triplet objective and margin schedule

/// Anchor/positive/negative embedding triple of equal dimension.
#[derive(Clone, Debug)]
pub struct EmbeddingTriplet {
    pub anchor: RealFeature,
    pub positive: RealFeature,
    pub negative: RealFeature,
}

impl EmbeddingTriplet {
    pub fn new(anchor: RealFeature, positive: RealFeature, negative: RealFeature) -> Result<Self> {
        if anchor.dim() != positive.dim() {
            return Err(Error::DimMismatch {
                left: anchor.dim(),
                right: positive.dim(),
            });
        }
        if anchor.dim() != negative.dim() {
            return Err(Error::DimMismatch {
                left: anchor.dim(),
                right: negative.dim(),
            });
        }
        Ok(Self {
            anchor,
            positive,
            negative,
        })
    }
}

fn squared_l2(a: &RealFeature, b: &RealFeature) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

/// Hinge triplet loss for one triple:
/// `max(0, ||a-p||^2 - ||a-n||^2 + alpha)`.
pub fn triplet_loss(trip: &EmbeddingTriplet, alpha: f64) -> f64 {
    let d_p = squared_l2(&trip.anchor, &trip.positive);
    let d_n = squared_l2(&trip.anchor, &trip.negative);
    (d_p - d_n + alpha).max(0.0)
}

/// Sum of per-triple losses over a batch.
pub fn triplet_loss_batch(trips: &[EmbeddingTriplet], alpha: f64) -> f64 {
    trips.iter().map(|t| triplet_loss(t, alpha)).sum()
}

/// A triple is hard when `d_n - d_p <= alpha`, with both distances squared
/// L2 as in the loss.
pub fn is_hard_triplet(trip: &EmbeddingTriplet, alpha: f64) -> bool {
    let d_p = squared_l2(&trip.anchor, &trip.positive);
    let d_n = squared_l2(&trip.anchor, &trip.negative);
    d_n - d_p <= alpha
}

/// Stepped margin schedule: the margin grows by `step` whenever hard triples
/// fall below `hard_fraction_threshold` of the mined total, and never
/// decreases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarginState {
    pub alpha: f64,
    pub step: f64,
    pub hard_fraction_threshold: f64,
}

impl MarginState {
    /// Schedule with the stock step (0.05) and threshold (10%).
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(Error::OutOfRange {
                what: "margin",
                value: alpha,
            });
        }
        Ok(Self {
            alpha,
            step: 0.05,
            hard_fraction_threshold: 0.10,
        })
    }

    /// One schedule step given a mining round's counts.
    pub fn update(&self, hard_count: u64, mined_total: u64) -> Result<MarginState> {
        if mined_total == 0 {
            return Err(Error::Degenerate("margin update with zero mined triplets"));
        }
        let mut next = *self;
        // Compare as a ratio: hard/total rounds to exactly the threshold at
        // the boundary (e.g. 100/1000 == 0.10), which must not trigger.
        if (hard_count as f64) / (mined_total as f64) < self.hard_fraction_threshold {
            next.alpha += self.step;
        }
        Ok(next)
    }
}

// ---------------------------------------------------------------------------
// Substring-balance (mcom) loss

/// RMS deviation of per-substring cosine distances from the target `r_prime`.
///
/// Splits both vectors into `t` equal substrings and measures how far each
/// pair's cosine distance (`1 - cos similarity`) sits from `r_prime`; the
/// result is zero iff every substring pair sits exactly at the target.
/// Driving this to zero spreads disagreement evenly across index substrings.
pub fn mcom_loss(h_i: &[f64], h_j: &[f64], t: usize, r_prime: f64) -> Result<f64> {
    if h_i.len() != h_j.len() {
        return Err(Error::DimMismatch {
            left: h_i.len(),
            right: h_j.len(),
        });
    }
    if t == 0 || h_i.is_empty() || !h_i.len().is_multiple_of(t) {
        return Err(Error::NotDivisible {
            width: h_i.len() as u32,
            t: t as u32,
        });
    }
    let s = h_i.len() / t;
    let mut acc = 0.0;
    for m in 0..t {
        let a = &h_i[m * s..(m + 1) * s];
        let b = &h_j[m * s..(m + 1) * s];
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return Err(Error::Degenerate("zero-norm substring in cosine distance"));
        }
        let cosine_distance = 1.0 - dot / (na * nb);
        acc += (cosine_distance - r_prime).powi(2);
    }
    Ok((acc / t as f64).sqrt())
}

/// Binary-code variant: per-substring Hamming distance as a proportion of the
/// substring length stands in for the cosine distance.
pub fn mcom_loss_binary(a: &BitCode, b: &BitCode, t: u32, r_prime: f64) -> Result<f64> {
    let balance = crate::mih::substring_balance(a, b, t)?;
    let s = (a.width() / t) as f64;
    let acc: f64 = balance
        .distances
        .iter()
        .map(|&d| (d as f64 / s - r_prime).powi(2))
        .sum();
    Ok((acc / t as f64).sqrt())
}
