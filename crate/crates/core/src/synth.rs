//! Deterministic synthetic stereo road scenes with exact ground truth.
//!
//! The road disparity follows the roll-aware plane model; potholes subtract
//! an elliptic paraboloid. The left view is a seeded value-noise texture and
//! the right view samples that texture where each right pixel's left
//! correspondence lies, so the pair is consistent by construction.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::config::StereoRig;
use crate::error::{Error, Result};
use crate::io;
use crate::raster::{DisparityMap, GrayImage, LabelMap};
use crate::road::RoadModel;

/// Potholes must clear the image border by more than this many pixels.
pub const SCENE_MARGIN: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pothole {
    pub cu: f64,
    pub cv: f64,
    pub ru: f64,
    pub rv: f64,
    /// Disparity deficit at the center, pixels.
    pub depth: f64,
}

impl Pothole {
    /// Disparity deficit at `(u, v)`: `depth (1 - r^2)` inside the ellipse.
    pub fn deficit(&self, u: f64, v: f64) -> f64 {
        let r2 = ((u - self.cu) / self.ru).powi(2) + ((v - self.cv) / self.rv).powi(2);
        if r2 < 1.0 {
            self.depth * (1.0 - r2)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub rig: StereoRig,
    pub a0: f64,
    pub a1: f64,
    pub phi: f64,
    pub potholes: Vec<Pothole>,
    pub seed: u64,
    /// Standard deviation of additive intensity noise.
    pub noise_sigma: f64,
}

impl SceneSpec {
    /// Pothole-free 640x480 scene.
    pub fn plane(a0: f64, a1: f64, phi: f64, seed: u64) -> Self {
        Self {
            width: 640,
            height: 480,
            rig: StereoRig {
                focal: 700.0,
                baseline: 0.12,
                cu: 319.5,
                cv: 239.5,
            },
            a0,
            a1,
            phi,
            potholes: Vec::new(),
            seed,
            noise_sigma: 0.0,
        }
    }

    pub fn model(&self) -> RoadModel {
        RoadModel::new(self.a0, self.a1, self.phi)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::ImageTooSmall {
                width: self.width,
                height: self.height,
            });
        }
        self.rig.validate()?;
        if !self.model().is_finite() || !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidParameter(
                "scene model and noise must be finite".into(),
            ));
        }
        for (k, p) in self.potholes.iter().enumerate() {
            if !(p.ru >= 4.0 && p.rv >= 4.0) {
                return Err(Error::InvalidParameter(format!(
                    "pothole {k}: radii must be >= 4 px"
                )));
            }
            if !(p.depth >= 0.0 && p.depth.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "pothole {k}: depth must be >= 0"
                )));
            }
            let inside = p.cu - p.ru > SCENE_MARGIN
                && p.cv - p.rv > SCENE_MARGIN
                && p.cu + p.ru < self.width as f64 - 1.0 - SCENE_MARGIN
                && p.cv + p.rv < self.height as f64 - 1.0 - SCENE_MARGIN;
            if !inside {
                return Err(Error::InvalidParameter(format!(
                    "pothole {k} must clear the border by more than {SCENE_MARGIN} px"
                )));
            }
        }
        Ok(())
    }

    /// Ground-truth disparity at real position `(x, v)` and the 1-based
    /// index of the pothole that shapes it (0 for road).
    pub fn disparity_at(&self, x: f64, v: f64) -> (f64, u32) {
        let mut deficit = 0.0;
        let mut label = 0;
        for (k, p) in self.potholes.iter().enumerate() {
            let d = p.deficit(x, v);
            if d > deficit {
                deficit = d;
                label = k as u32 + 1;
            }
        }
        (self.model().disparity_at(x, v) - deficit, label)
    }

    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "width={}", self.width);
        let _ = writeln!(s, "height={}", self.height);
        let _ = writeln!(s, "focal={}", self.rig.focal);
        let _ = writeln!(s, "baseline={}", self.rig.baseline);
        let _ = writeln!(s, "cu={}", self.rig.cu);
        let _ = writeln!(s, "cv={}", self.rig.cv);
        let _ = writeln!(s, "a0={}", self.a0);
        let _ = writeln!(s, "a1={}", self.a1);
        let _ = writeln!(s, "phi={}", self.phi);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "noise_sigma={}", self.noise_sigma);
        let _ = writeln!(s, "potholes={}", self.potholes.len());
        for (k, p) in self.potholes.iter().enumerate() {
            let _ = writeln!(
                s,
                "pothole_{}={},{},{},{},{}",
                k + 1,
                p.cu,
                p.cv,
                p.ru,
                p.rv,
                p.depth
            );
        }
        s
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut kv = std::collections::HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                message: format!("expected key=value, got {line:?}"),
            })?;
            kv.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
        }
        fn get<T: std::str::FromStr>(
            kv: &std::collections::HashMap<String, (usize, String)>,
            key: &str,
        ) -> Result<T> {
            let (line, v) = kv.get(key).ok_or_else(|| Error::Config {
                line: 0,
                message: format!("missing key {key}"),
            })?;
            v.parse().map_err(|_| Error::Config {
                line: *line,
                message: format!("cannot parse {v:?} for key {key}"),
            })
        }
        let n: usize = get(&kv, "potholes")?;
        let mut potholes = Vec::with_capacity(n);
        for k in 1..=n {
            let key = format!("pothole_{k}");
            let (line, v) = kv.get(&key).ok_or_else(|| Error::Config {
                line: 0,
                message: format!("missing key {key}"),
            })?;
            let f: Vec<f64> = v
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config {
                    line: *line,
                    message: format!("{key} needs five numbers"),
                })?;
            if f.len() != 5 {
                return Err(Error::Config {
                    line: *line,
                    message: format!("{key} needs five numbers"),
                });
            }
            potholes.push(Pothole {
                cu: f[0],
                cv: f[1],
                ru: f[2],
                rv: f[3],
                depth: f[4],
            });
        }
        Ok(Self {
            width: get(&kv, "width")?,
            height: get(&kv, "height")?,
            rig: StereoRig {
                focal: get(&kv, "focal")?,
                baseline: get(&kv, "baseline")?,
                cu: get(&kv, "cu")?,
                cv: get(&kv, "cv")?,
            },
            a0: get(&kv, "a0")?,
            a1: get(&kv, "a1")?,
            phi: get(&kv, "phi")?,
            potholes,
            seed: get(&kv, "seed")?,
            noise_sigma: get(&kv, "noise_sigma")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneTruth {
    pub left: GrayImage,
    pub right: GrayImage,
    pub gt_disparity: DisparityMap,
    /// Pothole index per pixel, 0 on the road.
    pub gt_mask: LabelMap,
    pub spec: SceneSpec,
}

const OCTAVES: [(f64, f64); 3] = [(12.0, 0.45), (6.0, 0.35), (3.0, 0.2)];

/// Smoothed value-noise texture of `width x height` samples, stretched to
/// `[30, 220]`.
fn texture(width: usize, height: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut field = vec![0.0; width * height];
    for &(cell, amp) in &OCTAVES {
        let lw = (width as f64 / cell).ceil() as usize + 2;
        let lh = (height as f64 / cell).ceil() as usize + 2;
        let lattice: Vec<f64> = (0..lw * lh).map(|_| rng.random::<f64>()).collect();
        for v in 0..height {
            let y = v as f64 / cell;
            let (j, ty) = (y.floor() as usize, y.fract());
            for u in 0..width {
                let x = u as f64 / cell;
                let (i, tx) = (x.floor() as usize, x.fract());
                let at = |a: usize, b: usize| lattice[b * lw + a];
                let top = at(i, j) + tx * (at(i + 1, j) - at(i, j));
                let bot = at(i, j + 1) + tx * (at(i + 1, j + 1) - at(i, j + 1));
                field[v * width + u] += amp * (top + ty * (bot - top));
            }
        }
    }
    // Separable 5x5 binomial smoothing, edges clamped.
    const K: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; width * height];
    for v in 0..height {
        for u in 0..width {
            tmp[v * width + u] = (0..5)
                .map(|k| K[k] * field[v * width + clamp(u as isize + k as isize - 2, width)])
                .sum::<f64>()
                / 16.0;
        }
    }
    for v in 0..height {
        for u in 0..width {
            field[v * width + u] = (0..5)
                .map(|k| K[k] * tmp[clamp(v as isize + k as isize - 2, height) * width + u])
                .sum::<f64>()
                / 16.0;
        }
    }
    let lo = field.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = if hi > lo { 190.0 / (hi - lo) } else { 0.0 };
    field.iter().map(|&x| 30.0 + (x - lo) * scale).collect()
}

/// Left-view position `x` whose correspondence lands on right pixel `u`,
/// i.e. the root of `x - d(x, v) = u`.
fn left_source(spec: &SceneSpec, u: f64, v: f64, lo: f64, hi: f64) -> f64 {
    let mut x = u + spec.disparity_at(u, v).0;
    for _ in 0..60 {
        let next = u + spec.disparity_at(x, v).0;
        if (next - x).abs() < 1e-12 {
            return next;
        }
        x = next;
    }
    // No contraction: bisect the monotone residual instead.
    let (mut a, mut b) = (u + lo, u + hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m - spec.disparity_at(m, v).0 < u {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Renders a scene from its spec.
pub fn generate_scene(spec: &SceneSpec) -> Result<SceneTruth> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut disp = Vec::with_capacity(w * h);
    let mut mask = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let (d, l) = spec.disparity_at(u as f64, v as f64);
            if d < 0.0 {
                return Err(Error::NegativeDisparity { value: d, u, v });
            }
            disp.push(d);
            mask.push(l);
        }
    }
    let d_lo = disp.iter().copied().fold(f64::INFINITY, f64::min);
    let d_hi = disp.iter().copied().fold(0.0, f64::max);
    // The texture extends past the right edge so every right pixel has a
    // left-view source.
    let tw = w + d_hi.ceil() as usize + 4;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tex = texture(tw, h, &mut rng);

    let right: Vec<f64> = (0..h)
        .into_par_iter()
        .flat_map_iter(|v| {
            let tex = &tex;
            (0..w).map(move |u| {
                let x = left_source(spec, u as f64, v as f64, d_lo - 1.0, d_hi + 1.0)
                    .clamp(0.0, (tw - 1) as f64);
                let i = (x.floor() as usize).min(tw - 2);
                let t = x - i as f64;
                let row = &tex[v * tw..(v + 1) * tw];
                row[i] + t * (row[i + 1] - row[i])
            })
        })
        .collect();
    let mut left: Vec<f64> = (0..h)
        .flat_map(|v| tex[v * tw..v * tw + w].iter().copied())
        .collect();
    let mut right = right;
    if spec.noise_sigma > 0.0 {
        rng.set_stream(1);
        let normal = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for x in left.iter_mut().chain(right.iter_mut()) {
            *x += normal.sample(&mut rng);
        }
    }
    let to_img = |px: Vec<f64>| {
        GrayImage::new(
            w,
            h,
            px.into_iter().map(|x| x.clamp(0.0, 255.0) as f32).collect(),
        )
    };
    Ok(SceneTruth {
        left: to_img(left)?,
        right: to_img(right)?,
        gt_disparity: DisparityMap::new(w, h, disp)?,
        gt_mask: LabelMap::new(w, h, mask)?,
        spec: spec.clone(),
    })
}

/// Ranges that [`scene_batch`] draws scene parameters from.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRanges {
    pub width: usize,
    pub height: usize,
    pub rig: StereoRig,
    pub a0: (f64, f64),
    pub a1: (f64, f64),
    /// Roll range, degrees.
    pub phi_deg: (f64, f64),
    /// Pothole count range, inclusive.
    pub potholes: (usize, usize),
    pub depth: (f64, f64),
    pub radius: (f64, f64),
    pub noise_sigma: f64,
}

impl Default for BatchRanges {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            rig: StereoRig {
                focal: 700.0,
                baseline: 0.12,
                cu: 319.5,
                cv: 239.5,
            },
            a0: (15.0, 25.0),
            a1: (0.06, 0.12),
            phi_deg: (-3.0, 3.0),
            potholes: (1, 3),
            depth: (1.5, 4.0),
            radius: (15.0, 40.0),
            noise_sigma: 1.0,
        }
    }
}

/// Clearance of batch potholes from the border and the left-only band: the
/// detection border margin plus one default superpixel spacing, so that a
/// detected region never reaches the discard zone.
const PLACEMENT_PAD: f64 = SCENE_MARGIN + 19.0;

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Draws the [`SceneSpec`] of scene `seed`: non-overlapping potholes whose bounding
/// boxes stay clear of each other, of the border and of the band seen only
/// by the left camera.
pub fn random_spec(seed: u64, ranges: &BatchRanges) -> Result<SceneSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let (w, h) = (ranges.width as f64, ranges.height as f64);
    let a0 = uniform(&mut rng, ranges.a0);
    let a1 = uniform(&mut rng, ranges.a1);
    let phi = uniform(&mut rng, ranges.phi_deg).to_radians();
    let model = RoadModel::new(a0, a1, phi);
    let count = rng.random_range(ranges.potholes.0..=ranges.potholes.1);
    let mut potholes: Vec<Pothole> = Vec::with_capacity(count);
    let mut attempts = 0;
    while potholes.len() < count {
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::InvalidParameter(
                "cannot place non-overlapping potholes".into(),
            ));
        }
        let ru = uniform(&mut rng, ranges.radius);
        let rv = uniform(&mut rng, ranges.radius);
        let pad = PLACEMENT_PAD;
        let (ulo, uhi) = (ru + pad, w - 1.0 - ru - pad);
        let (vlo, vhi) = (rv + pad, h - 1.0 - rv - pad);
        if uhi <= ulo || vhi <= vlo {
            continue;
        }
        let p = Pothole {
            cu: rng.random_range(ulo..uhi),
            cv: rng.random_range(vlo..vhi),
            ru,
            rv,
            depth: uniform(&mut rng, ranges.depth),
        };
        let gap = 4.0;
        // Keep the pothole where both views see it: its left edge must lie
        // right of the band whose correspondences leave the right image.
        let left_edge = p.cu - p.ru - pad;
        let band = model
            .disparity_at(left_edge, p.cv - p.rv)
            .max(model.disparity_at(left_edge, p.cv + p.rv));
        let clear = left_edge > band
            && potholes.iter().all(|q| {
                (p.cu - q.cu).abs() > p.ru + q.ru + gap || (p.cv - q.cv).abs() > p.rv + q.rv + gap
            });
        if clear {
            potholes.push(p);
        }
    }
    Ok(SceneSpec {
        width: ranges.width,
        height: ranges.height,
        rig: ranges.rig,
        a0,
        a1,
        phi,
        potholes,
        seed,
        noise_sigma: ranges.noise_sigma,
    })
}

/// `count` scenes with seeds `base_seed + i`, rendered in parallel.
pub fn scene_batch(count: usize, base_seed: u64, ranges: &BatchRanges) -> Result<Vec<SceneTruth>> {
    if count == 0 {
        return Err(Error::InvalidParameter("count must be >= 1".into()));
    }
    (0..count as u64)
        .into_par_iter()
        .map(|i| generate_scene(&random_spec(base_seed.wrapping_add(i), ranges)?))
        .collect()
}

/// Writes `left.png`, `right.png`, `disp_gt.png`, `mask_gt.png` and
/// `spec.txt` into `dir`.
pub fn write_scene(scene: &SceneTruth, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    io::save_gray_image(&scene.left, &dir.join("left.png"))?;
    io::save_gray_image(&scene.right, &dir.join("right.png"))?;
    io::save_disparity(&scene.gt_disparity, &dir.join("disp_gt.png"))?;
    io::save_labels(&scene.gt_mask, &dir.join("mask_gt.png"))?;
    let spec = dir.join("spec.txt");
    std::fs::write(&spec, scene.spec.to_kv_string()).map_err(|e| Error::io(&spec, e))
}

/// Reads a scene directory written by [`write_scene`].
pub fn read_scene(dir: &Path) -> Result<SceneTruth> {
    let spec_path = dir.join("spec.txt");
    let text = std::fs::read_to_string(&spec_path).map_err(|e| Error::io(&spec_path, e))?;
    Ok(SceneTruth {
        left: io::load_gray_image(&dir.join("left.png"))?,
        right: io::load_gray_image(&dir.join("right.png"))?,
        gt_disparity: io::load_disparity(&dir.join("disp_gt.png"))?,
        gt_mask: io::load_labels(&dir.join("mask_gt.png"))?,
        spec: SceneSpec::from_kv_str(&text)?,
    })
}
