//! Numerical model of the SLM → lens → camera chain.
//!
//! Inputs are tiled into constant square blocks on the modulator, combined
//! with the fed-back camera image, mapped affinely onto [0, 2π) phases,
//! propagated to the focal plane by a centered unitary 2-D DFT, and read
//! out as saturated, quantized intensities. The squared-magnitude
//! detection together with saturation clipping and quantization supplies
//! the reservoir nonlinearity.

use std::f64::consts::TAU;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Modulator geometry: a square `grid`×`grid` pixel array divided into
/// square blocks of `block`×`block` pixels, one block per tiled value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlmGeometry {
    pub grid: usize,
    pub block: usize,
}

impl Default for SlmGeometry {
    fn default() -> Self {
        SlmGeometry {
            grid: 400,
            block: 20,
        }
    }
}

impl SlmGeometry {
    pub fn new(grid: usize, block: usize) -> Result<Self> {
        if grid == 0 || block == 0 || !grid.is_multiple_of(block) {
            return Err(Error::Geometry(format!(
                "grid {grid} must be a positive multiple of block {block}"
            )));
        }
        Ok(SlmGeometry { grid, block })
    }

    pub fn blocks_per_side(&self) -> usize {
        self.grid / self.block
    }

    /// Total number of modulation blocks, the input capacity.
    pub fn block_count(&self) -> usize {
        self.blocks_per_side() * self.blocks_per_side()
    }
}

/// A `grid`×`grid` matrix of phases, each in [0, 2π).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFrame {
    data: Array2<f64>,
}

impl PhaseFrame {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (r, c) = data.dim();
        if r != c || r == 0 {
            return Err(Error::Geometry(format!(
                "phase frame must be square and non-empty, got {r}x{c}"
            )));
        }
        for &v in &data {
            if !v.is_finite() || !(0.0..TAU).contains(&v) {
                return Err(Error::Numeric(format!("phase {v} outside [0, 2pi)")));
            }
        }
        Ok(PhaseFrame { data })
    }

    pub fn grid(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    /// Debug dump as a binary 8-bit PGM, phases scaled onto [0, 255].
    pub fn write_pgm<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        write_pgm(path, &self.data, TAU)
    }
}

/// A quantized intensity image: every entry is `k/(2^bits − 1)` for some
/// integer `k`, so values lie in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct CameraImage {
    data: Array2<f64>,
    bits: u8,
}

impl CameraImage {
    pub fn new(data: Array2<f64>, bits: u8) -> Result<Self> {
        validate_bits(bits)?;
        let levels = ((1u64 << bits) - 1) as f64;
        let (r, c) = data.dim();
        if r != c || r == 0 {
            return Err(Error::Geometry(format!(
                "camera image must be square and non-empty, got {r}x{c}"
            )));
        }
        for &v in &data {
            if !(0.0..=1.0).contains(&v) || (v * levels - (v * levels).round()).abs() > 1e-9 {
                return Err(Error::Numeric(format!(
                    "intensity {v} is not a {bits}-bit quantization level"
                )));
            }
        }
        Ok(CameraImage { data, bits })
    }

    /// Uniform image at `value`, which must itself be a quantization level
    /// (0.0 and 1.0 always are).
    pub fn constant(grid: usize, value: f64, bits: u8) -> Result<Self> {
        Self::new(Array2::from_elem((grid, grid), value), bits)
    }

    pub fn zeros(grid: usize, bits: u8) -> Self {
        CameraImage {
            data: Array2::zeros((grid, grid)),
            bits,
        }
    }

    pub fn grid(&self) -> usize {
        self.data.nrows()
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    /// Debug dump as a binary 8-bit PGM.
    pub fn write_pgm<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        write_pgm(path, &self.data, 1.0)
    }
}

fn validate_bits(bits: u8) -> Result<()> {
    if !(1..=24).contains(&bits) {
        return Err(Error::Config(format!(
            "camera bit depth must be in 1..=24, got {bits}"
        )));
    }
    Ok(())
}

/// Tiles `values` onto the modulator: blocks are filled row-major with
/// `values[0], values[1], …`, cycling through the vector until every block
/// is filled. Each block is a constant `block`×`block` patch.
pub fn tile_inputs(values: &[f64], geom: &SlmGeometry) -> Result<Array2<f64>> {
    let n = values.len();
    if n == 0 {
        return Err(Error::Config("tile_inputs needs at least one value".into()));
    }
    if n > geom.block_count() {
        return Err(Error::Capacity(format!(
            "{n} inputs exceed the {} modulation blocks",
            geom.block_count()
        )));
    }
    let per_side = geom.blocks_per_side();
    let mut out = Array2::zeros((geom.grid, geom.grid));
    for br in 0..per_side {
        for bc in 0..per_side {
            let v = values[(br * per_side + bc) % n];
            let r0 = br * geom.block;
            let c0 = bc * geom.block;
            out.slice_mut(ndarray::s![r0..r0 + geom.block, c0..c0 + geom.block])
                .fill(v);
        }
    }
    Ok(out)
}

/// Number of blocks assigned to each of `n` cycled values; counts differ
/// by at most one.
pub fn block_occupancy(geom: &SlmGeometry, n: usize) -> Vec<usize> {
    let total = geom.block_count();
    (0..n)
        .map(|i| total / n + usize::from(i < total % n))
        .collect()
}

/// Combines the fed-back camera image with the tiled, weighted input and
/// maps the result onto [0, 2π) phases through a fixed affine map:
/// `phase = 2π · clamp((α·prev + β·w⊙u − lo)/(hi − lo), 0, 1)`, with the
/// top of the range pulled just below 2π. The bounds are part of the
/// reservoir configuration and do not change between steps.
pub fn compose_phase(
    prev: &CameraImage,
    tiled_input: &Array2<f64>,
    in_weights: &Array2<f64>,
    alpha: f64,
    beta: f64,
    bounds: (f64, f64),
) -> Result<PhaseFrame> {
    let (lo, hi) = bounds;
    if !lo.is_finite() || !hi.is_finite() || hi <= lo {
        return Err(Error::Config(format!(
            "phase bounds must satisfy hi > lo, got ({lo}, {hi})"
        )));
    }
    let dim = prev.data().dim();
    if tiled_input.dim() != dim || in_weights.dim() != dim {
        return Err(Error::Shape(format!(
            "compose_phase shapes differ: prev {:?}, input {:?}, weights {:?}",
            dim,
            tiled_input.dim(),
            in_weights.dim()
        )));
    }

    let span = hi - lo;
    let top = 1.0 - f64::EPSILON;
    let mut phase = Array2::zeros(dim);
    for ((p, (&x, &w)), &s) in phase
        .iter_mut()
        .zip(tiled_input.iter().zip(in_weights.iter()))
        .zip(prev.data().iter())
    {
        let combined = alpha * s + beta * w * x;
        if !combined.is_finite() {
            return Err(Error::Numeric(
                "non-finite value in phase composition".into(),
            ));
        }
        *p = TAU * ((combined - lo) / span).clamp(0.0, top);
    }
    PhaseFrame::new(phase)
}

/// Centered unitary 2-D DFT plan for one grid size. Reusable across steps;
/// a single plan is cheap to share between trajectories.
pub struct Dft2 {
    size: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl Dft2 {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Dft2 {
            size,
            fft: planner.plan_fft_forward(size),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Transforms `exp(i·phase)` to the focal plane: unitary 2-D DFT with
    /// the DC component shifted to the image center.
    pub fn apply(&self, frame: &PhaseFrame) -> Array2<Complex64> {
        let g = self.size;
        assert_eq!(frame.grid(), g, "phase frame does not match the DFT plan");

        let mut buf: Vec<Complex64> = frame
            .data()
            .iter()
            .map(|&p| Complex64::from_polar(1.0, p))
            .collect();
        self.fft.process(&mut buf); // g row transforms

        // Transpose, transform the former columns, then write the result
        // back transposed, shifted, and scaled to unitary normalization.
        let mut t = vec![Complex64::default(); g * g];
        for r in 0..g {
            for c in 0..g {
                t[c * g + r] = buf[r * g + c];
            }
        }
        self.fft.process(&mut t);

        let scale = 1.0 / g as f64;
        let half = g / 2;
        let mut out = Array2::default((g, g));
        for kc in 0..g {
            for kr in 0..g {
                let v = t[kc * g + kr] * scale;
                out[[(kr + half) % g, (kc + half) % g]] = v;
            }
        }
        out
    }
}

/// One-shot convenience wrapper around [`Dft2`].
pub fn propagate(frame: &PhaseFrame) -> Array2<Complex64> {
    Dft2::new(frame.grid()).apply(frame)
}

/// Converts a focal-plane field to a camera image: intensity |field|²
/// divided by the saturation level, clamped to [0, 1], and quantized to
/// `2^bits` uniform levels (round to nearest).
pub fn camera_read(field: &Array2<Complex64>, saturation: f64, bits: u8) -> Result<CameraImage> {
    if !saturation.is_finite() || saturation <= 0.0 {
        return Err(Error::Config(format!(
            "saturation must be positive, got {saturation}"
        )));
    }
    validate_bits(bits)?;
    let levels = ((1u64 << bits) - 1) as f64;
    let data = field.mapv(|z| {
        let i = (z.norm_sqr() / saturation).clamp(0.0, 1.0);
        (i * levels).round() / levels
    });
    Ok(CameraImage { data, bits })
}

/// Pools a camera image into `nodes` super-block means, row-major.
/// `nodes` must be a perfect square whose side divides the grid.
pub fn pool_state(image: &CameraImage, nodes: usize) -> Result<Array1<f64>> {
    let g = image.grid();
    let side = (nodes as f64).sqrt().round() as usize;
    if side * side != nodes || nodes == 0 {
        return Err(Error::Geometry(format!(
            "nodes {nodes} is not a perfect square"
        )));
    }
    if !g.is_multiple_of(side) {
        return Err(Error::Geometry(format!(
            "pooling side {side} does not divide grid {g}"
        )));
    }
    let sb = g / side;
    let norm = 1.0 / (sb * sb) as f64;
    let mut out = Array1::zeros(nodes);
    for br in 0..side {
        for bc in 0..side {
            let mut acc = 0.0;
            for r in br * sb..(br + 1) * sb {
                for c in bc * sb..(bc + 1) * sb {
                    acc += image.data[[r, c]];
                }
            }
            out[br * side + bc] = acc * norm;
        }
    }
    Ok(out)
}

/// Mean focal-plane intensity of a uniformly random phase frame. Power
/// conservation pins this at 1.0 for any frame; the default saturation is
/// four times this level, clipping only the bright speckle tail.
pub fn calibrated_mean_intensity(grid: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases = Array2::from_shape_fn((grid, grid), |_| rng.random::<f64>() * TAU);
    let frame = PhaseFrame::new(phases).expect("random phases are valid");
    let field = propagate(&frame);
    field.iter().map(|z| z.norm_sqr()).sum::<f64>() / (grid * grid) as f64
}

fn write_pgm<P: AsRef<Path>>(path: P, data: &Array2<f64>, max: f64) -> Result<()> {
    let (rows, cols) = data.dim();
    let mut f = std::fs::File::create(path)?;
    write!(f, "P5\n{cols} {rows}\n255\n")?;
    let bytes: Vec<u8> = data
        .iter()
        .map(|&v| ((v / max).clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    f.write_all(&bytes)?;
    Ok(())
}
