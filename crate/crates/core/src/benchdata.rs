//! Self-contained synthetic datasets for benchmarks and end-to-end tests.
//!
//! Three flavors cover the shapes the distillation pipeline cares about: a
//! smooth 10-feature tabular regression, 8x8 grayscale digit images with
//! the digit value as the regression target, and simplex-constrained
//! composition vectors with a nonlinear response. All are fully seeded.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::tensor::Tensor2;

/// Standard-normal features with a smooth mixed-interaction response,
/// standardized to zero mean and unit variance.
pub fn make_tabular(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("need at least one row"));
    }
    let d = 10;
    let mut rng = rng_from_seed(seed);
    let mut x = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        x.push(StandardNormal.sample(&mut rng));
    }
    let features = Tensor2::from_vec(n, d, x)?;
    let mut y: Vec<f64> = features
        .data()
        .chunks(d)
        .map(|r| {
            r[0].sin() * r[1] + 0.5 * r[2] * r[2] - r[3] * r[4]
                + r[5].tanh()
                + 0.3 * r[6] * (2.0 * r[7]).sin()
                - 0.7 * r[8]
                + 0.2 * r[9].powi(3)
        })
        .collect();
    let mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    if std == 0.0 {
        return Err(Error::numeric("degenerate target variance"));
    }
    for v in &mut y {
        *v = (*v - mean) / std;
    }
    let names = (0..d).map(|i| format!("x{i}")).collect();
    Dataset::new(features, Tensor2::column(&y)?, names)
}

const GLYPHS: [&str; 10] = [
    "..####..\n.##..##.\n.##..##.\n.##..##.\n.##..##.\n.##..##.\n..####..\n........",
    "...##...\n..###...\n...##...\n...##...\n...##...\n...##...\n..####..\n........",
    "..####..\n.##..##.\n.....##.\n....##..\n...##...\n..##....\n.######.\n........",
    "..####..\n.##..##.\n.....##.\n...###..\n.....##.\n.##..##.\n..####..\n........",
    "....##..\n...###..\n..####..\n.##.##..\n.######.\n....##..\n....##..\n........",
    ".######.\n.##.....\n.#####..\n.....##.\n.....##.\n.##..##.\n..####..\n........",
    "..####..\n.##.....\n.##.....\n.#####..\n.##..##.\n.##..##.\n..####..\n........",
    ".######.\n.....##.\n....##..\n...##...\n..##....\n..##....\n..##....\n........",
    "..####..\n.##..##.\n.##..##.\n..####..\n.##..##.\n.##..##.\n..####..\n........",
    "..####..\n.##..##.\n.##..##.\n..#####.\n.....##.\n.....##.\n..####..\n........",
];

fn glyph_pixels(glyph: &str) -> [[f64; 8]; 8] {
    let mut out = [[0.0; 8]; 8];
    for (r, line) in glyph.lines().enumerate() {
        for (c, ch) in line.chars().enumerate() {
            if ch == '#' {
                out[r][c] = 1.0;
            }
        }
    }
    out
}

/// 8x8 digit images flattened to 64 pixel features in [0, 1], with the
/// digit value (0 through 9) as the target. Each image is a fixed glyph
/// randomly shifted by up to one pixel with wraparound, dimmed by a random
/// contrast factor, and perturbed with Gaussian pixel noise.
pub fn make_digits(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("need at least one row"));
    }
    let templates: Vec<[[f64; 8]; 8]> = GLYPHS.iter().map(|g| glyph_pixels(g)).collect();
    let mut rng = rng_from_seed(seed);
    let mut x = Vec::with_capacity(n * 64);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.random_range(0..10usize);
        let img = &templates[k];
        let sx = rng.random_range(-1i64..2);
        let sy = rng.random_range(-1i64..2);
        let contrast: f64 = rng.random_range(0.7..1.0);
        for r in 0..8usize {
            for c in 0..8usize {
                // Wraparound shift: the source pixel lands sx rows down
                // and sy columns right.
                let src_r = (r as i64 - sx).rem_euclid(8) as usize;
                let src_c = (c as i64 - sy).rem_euclid(8) as usize;
                let noise: f64 = StandardNormal.sample(&mut rng);
                let v = img[src_r][src_c] * contrast + 0.1 * noise;
                x.push(v.clamp(0.0, 1.0));
            }
        }
        y.push(k as f64);
    }
    let names = (0..64).map(|i| format!("px{i}")).collect();
    Dataset::new(
        Tensor2::from_vec(n, 64, x)?,
        Tensor2::column(&y)?,
        names,
    )
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Composition vectors: 20 nonnegative proportions per row summing to 1,
/// with a sigmoid-squashed nonlinear response in (0, 1). Rows are noisy
/// perturbations of a run-specific base composition, mirroring how amino
/// acid profiles cluster around a family prototype.
pub fn make_compositions(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("need at least one row"));
    }
    let d = 20;
    let mut rng = rng_from_seed(seed);
    let mut base: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..1.5)).collect();
    let base_sum: f64 = base.iter().sum();
    for b in &mut base {
        *b /= base_sum;
    }
    let mut x = Vec::with_capacity(n * d);
    for _ in 0..n {
        let row_start = x.len();
        for &b in &base {
            let z: f64 = StandardNormal.sample(&mut rng);
            x.push((b + 0.6 * b * z).clamp(0.0, 1.0));
        }
        let s: f64 = x[row_start..].iter().sum();
        if s <= 0.0 {
            return Err(Error::numeric("composition row collapsed to zero"));
        }
        for v in &mut x[row_start..] {
            *v /= s;
        }
    }
    let sample_vec = |rng: &mut _| -> Vec<f64> {
        (0..d).map(|_| StandardNormal.sample(rng)).collect()
    };
    let w = sample_vec(&mut rng);
    let u = sample_vec(&mut rng);
    let v = sample_vec(&mut rng);
    let dot = |row: &[f64], c: &[f64]| -> f64 { row.iter().zip(c).map(|(a, b)| a * b).sum() };
    let xw: Vec<f64> = x.chunks(d).map(|row| dot(row, &w)).collect();
    let mean_xw = xw.iter().sum::<f64>() / n as f64;
    let z: Vec<f64> = x
        .chunks(d)
        .zip(&xw)
        .map(|(row, &xw_i)| {
            30.0 * (xw_i - mean_xw)
                + 8.0 * (60.0 * dot(row, &u)).sin()
                + 40.0 * dot(row, &v).powi(2)
        })
        .collect();
    let mut sorted = z.clone();
    let med = median(&mut sorted);
    let mean_z = z.iter().sum::<f64>() / n as f64;
    let std_z = (z.iter().map(|v| (v - mean_z).powi(2)).sum::<f64>() / n as f64).sqrt();
    if std_z == 0.0 {
        return Err(Error::numeric("degenerate response variance"));
    }
    let y: Vec<f64> = z
        .iter()
        .map(|v| 1.0 / (1.0 + (-0.8 * (v - med) / std_z).exp()))
        .collect();
    let names = (0..d).map(|i| format!("aa{i}")).collect();
    Dataset::new(
        Tensor2::from_vec(n, d, x)?,
        Tensor2::column(&y)?,
        names,
    )
}
