//! Synthetic test material: procedural "natural" images and single-rectangle
//! splices with a known compression history.

use std::path::Path;

use super::Label;
use crate::ela::{recompress, QualityLevel, RasterImage};
use crate::rng::SplitMix64;
use crate::{Error, Result};

/// Smallest side of a spliced rectangle.
pub const MIN_RECT_SIDE: u32 = 16;

/// Largest per-axis misalignment of the pasted content.
pub const MAX_OFFSET: i32 = 2;

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    fn check(&self, width: u32, height: u32) -> Result<()> {
        let fits = self.w >= MIN_RECT_SIDE
            && self.h >= MIN_RECT_SIDE
            && self.x as u64 + self.w as u64 <= width as u64
            && self.y as u64 + self.h as u64 <= height as u64;
        if fits {
            Ok(())
        } else {
            Err(Error::RectOutOfBounds {
                x: self.x,
                y: self.y,
                w: self.w,
                h: self.h,
                width,
                height,
            })
        }
    }
}

/// Draws the paste offset for a seeded splice: each axis uniform in
/// `-2..=2`, redrawn while both are zero so the content is always misaligned.
pub fn draw_offset(rng: &mut SplitMix64) -> (i32, i32) {
    loop {
        let dx = rng.range_inclusive(-MAX_OFFSET as i64, MAX_OFFSET as i64) as i32;
        let dy = rng.range_inclusive(-MAX_OFFSET as i64, MAX_OFFSET as i64) as i32;
        if (dx, dy) != (0, 0) {
            return (dx, dy);
        }
    }
}

/// Splice with an explicit offset.
///
/// The whole image is recompressed at `base_quality`; inside `rect`, pixels are
/// taken from the `donor_quality` recompression of the same base, read from
/// `(x + dx, y + dy)` with coordinates clamped to the image.
pub fn splice_with_offset(
    base: &RasterImage,
    rect: Rect,
    donor_quality: QualityLevel,
    base_quality: QualityLevel,
    offset: (i32, i32),
) -> Result<RasterImage> {
    rect.check(base.width(), base.height())?;
    let mut out = recompress(base, base_quality)?;
    let donor = recompress(base, donor_quality)?;
    let (max_x, max_y) = (base.width() as i64 - 1, base.height() as i64 - 1);
    for y in rect.y..rect.y + rect.h {
        for x in rect.x..rect.x + rect.w {
            let sx = (x as i64 + offset.0 as i64).clamp(0, max_x) as u32;
            let sy = (y as i64 + offset.1 as i64).clamp(0, max_y) as u32;
            out.set_pixel(x, y, donor.pixel(sx, sy));
        }
    }
    Ok(out)
}

/// Seeded splice: like [`splice_with_offset`] with the offset from
/// [`draw_offset`].
pub fn synth_splice(
    base: &RasterImage,
    rect: Rect,
    donor_quality: QualityLevel,
    base_quality: QualityLevel,
    seed: u64,
) -> Result<RasterImage> {
    let offset = draw_offset(&mut SplitMix64::new(seed));
    splice_with_offset(base, rect, donor_quality, base_quality, offset)
}

/// Procedural textured image: layered value noise, a few hard-edged shapes
/// and fine grain. Deterministic in `seed`.
pub fn natural_image(width: u32, height: u32, seed: u64) -> Result<RasterImage> {
    let mut rng = SplitMix64::new(seed);
    let (w, h) = (width as usize, height as usize);
    let mut planes = vec![[0f64; 3]; w * h];

    // Smooth color field: three octaves of bilinear value noise per channel,
    // mixed so the channels stay correlated like real photographs.
    let base_color = [rng.uniform(60.0, 190.0), rng.uniform(60.0, 190.0), rng.uniform(60.0, 190.0)];
    for (octave, cell) in [(0, 32.0), (1, 12.0), (2, 5.0)] {
        let amp = [45.0, 25.0, 15.0][octave];
        let gw = (width as f64 / cell).ceil() as usize + 2;
        let gh = (height as f64 / cell).ceil() as usize + 2;
        let lum: Vec<f64> = (0..gw * gh).map(|_| rng.uniform(-1.0, 1.0)).collect();
        // Photographs carry far less chroma detail than luma detail.
        let chroma_amp = if octave == 0 { 0.4 } else { 0.0 };
        let chroma: Vec<[f64; 3]> = (0..gw * gh)
            .map(|_| [0; 3].map(|_| rng.uniform(-chroma_amp, chroma_amp)))
            .collect();
        for y in 0..h {
            let gy = y as f64 / cell;
            let (y0, ty) = (gy.floor() as usize, smooth(gy.fract()));
            for x in 0..w {
                let gx = x as f64 / cell;
                let (x0, tx) = (gx.floor() as usize, smooth(gx.fract()));
                let idx = [y0 * gw + x0, y0 * gw + x0 + 1, (y0 + 1) * gw + x0, (y0 + 1) * gw + x0 + 1];
                let wts = [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty];
                let l: f64 = idx.iter().zip(&wts).map(|(&i, &k)| lum[i] * k).sum();
                for c in 0..3 {
                    let ch: f64 = idx.iter().zip(&wts).map(|(&i, &k)| chroma[i][c] * k).sum();
                    planes[y * w + x][c] += amp * (l + ch);
                }
            }
        }
    }

    // Hard-edged shapes.
    let shapes = 3 + rng.below(4) as usize;
    let mut shape_list = Vec::with_capacity(shapes);
    for _ in 0..shapes {
        let cx = rng.uniform(0.0, width as f64);
        let cy = rng.uniform(0.0, height as f64);
        let r = rng.uniform(4.0, width.min(height) as f64 / 4.0);
        let delta = [0; 3].map(|_| rng.uniform(-45.0, 45.0));
        let round = rng.below(2) == 0;
        shape_list.push((cx, cy, r, delta, round));
    }
    let grain = rng.uniform(4.0, 10.0);
    for y in 0..h {
        for x in 0..w {
            let px = &mut planes[y * w + x];
            for &(cx, cy, r, delta, round) in &shape_list {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let inside = if round {
                    dx * dx + dy * dy <= r * r
                } else {
                    dx.abs() <= r && dy.abs() <= r * 0.6
                };
                if inside {
                    for c in 0..3 {
                        px[c] += delta[c];
                    }
                }
            }
            let g = rng.uniform(-grain, grain);
            px.iter_mut().for_each(|v| *v += g);
        }
    }

    RasterImage::from_fn(width, height, |x, y| {
        let p = planes[y as usize * w + x as usize];
        [0, 1, 2].map(|c| (base_color[c] + p[c]).round().clamp(0.0, 255.0) as u8)
    })
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Parameters of a generated two-class toy corpus.
#[derive(Clone, Debug)]
pub struct ToyCorpusSpec {
    pub authentic: usize,
    pub tampered: usize,
    pub size: (u32, u32),
    /// Quality of the single JPEG history of every image.
    pub base_quality: QualityLevel,
    /// Donor qualities are drawn uniformly from this inclusive range.
    pub donor_quality: (u8, u8),
    /// Rectangle sides are drawn uniformly from this inclusive range.
    pub rect_side: (u32, u32),
    pub seed: u64,
}

impl Default for ToyCorpusSpec {
    fn default() -> Self {
        Self {
            authentic: 100,
            tampered: 100,
            size: (128, 128),
            base_quality: QualityLevel::DEFAULT,
            donor_quality: (55, 75),
            rect_side: (48, 96),
            seed: 42,
        }
    }
}

/// Writes an `Au/` + `Tp/` corpus of lossless PNGs under `root`.
///
/// Authentic images carry a single JPEG round trip at `base_quality`;
/// tampered images are seeded splices of fresh textures. Returns the written
/// paths, relative to `root`, with their labels.
pub fn write_toy_corpus(root: &Path, spec: &ToyCorpusSpec) -> Result<Vec<(std::path::PathBuf, Label)>> {
    use rayon::prelude::*;

    let mut rng = SplitMix64::new(spec.seed);
    let jobs: Vec<(Label, usize, u64)> = (0..spec.authentic)
        .map(|i| (Label::Authentic, i))
        .chain((0..spec.tampered).map(|i| (Label::Tampered, i)))
        .map(|(l, i)| (l, i, rng.next_u64()))
        .collect();
    std::fs::create_dir_all(root.join("Au"))?;
    std::fs::create_dir_all(root.join("Tp"))?;
    jobs.into_par_iter()
        .map(|(label, i, job_seed)| {
            let (w, h) = spec.size;
            let mut rng = SplitMix64::new(job_seed);
            let base = natural_image(w, h, rng.next_u64())?;
            let (img, rel) = match label {
                Label::Authentic => (recompress(&base, spec.base_quality)?, format!("Au/au_{i:05}.png")),
                Label::Tampered => {
                    let (lo, hi) = spec.rect_side;
                    let rw = rng.range_inclusive(lo.min(w) as i64, hi.min(w) as i64) as u32;
                    let rh = rng.range_inclusive(lo.min(h) as i64, hi.min(h) as i64) as u32;
                    let rect = Rect::new(
                        rng.below((w - rw + 1) as u64) as u32,
                        rng.below((h - rh + 1) as u64) as u32,
                        rw,
                        rh,
                    );
                    let dq = rng.range_inclusive(spec.donor_quality.0 as i64, spec.donor_quality.1 as i64);
                    let img = synth_splice(&base, rect, QualityLevel::new(dq)?, spec.base_quality, rng.next_u64())?;
                    (img, format!("Tp/tp_{i:05}.png"))
                }
            };
            img.save_png(&root.join(&rel))?;
            Ok((rel.into(), label))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ela::compute_ela;

    fn q(v: i64) -> QualityLevel {
        QualityLevel::new(v).unwrap()
    }

    #[test]
    fn rect_bounds_checked() {
        let img = natural_image(64, 64, 1).unwrap();
        let err = synth_splice(&img, Rect::new(50, 0, 20, 20), q(60), q(95), 0).unwrap_err();
        assert!(matches!(err, Error::RectOutOfBounds { .. }));
        let err = synth_splice(&img, Rect::new(0, 0, 8, 20), q(60), q(95), 0).unwrap_err();
        assert!(matches!(err, Error::RectOutOfBounds { .. }));
    }

    #[test]
    fn degenerate_splice_is_plain_recompression() {
        let img = natural_image(64, 64, 2).unwrap();
        let out = splice_with_offset(&img, Rect::new(8, 8, 32, 32), q(95), q(95), (0, 0)).unwrap();
        assert_eq!(out, recompress(&img, q(95)).unwrap());
    }

    #[test]
    fn offset_is_never_zero_and_bounded() {
        let mut rng = SplitMix64::new(5);
        for _ in 0..500 {
            let (dx, dy) = draw_offset(&mut rng);
            assert!((dx, dy) != (0, 0));
            assert!(dx.abs() <= MAX_OFFSET && dy.abs() <= MAX_OFFSET);
        }
    }

    #[test]
    fn natural_image_is_deterministic_and_textured() {
        let a = natural_image(48, 40, 11).unwrap();
        assert_eq!(a, natural_image(48, 40, 11).unwrap());
        assert_ne!(a, natural_image(48, 40, 12).unwrap());
        let distinct: std::collections::BTreeSet<_> = a.data().iter().collect();
        assert!(distinct.len() > 50);
    }

    #[test]
    fn splice_region_glows() {
        let img = natural_image(128, 128, 3).unwrap();
        let rect = Rect::new(40, 40, 48, 40);
        let spliced = synth_splice(&img, rect, q(60), q(95), 3).unwrap();
        let ela = compute_ela(&spliced, q(95)).unwrap();
        let inside = ela.region_mean(rect.x, rect.y, rect.x + rect.w, rect.y + rect.h);
        let whole = ela.region_mean(0, 0, 128, 128) * (128.0 * 128.0);
        let outside = (whole - inside * (rect.w * rect.h) as f64) / (128.0 * 128.0 - (rect.w * rect.h) as f64);
        assert!(inside >= 2.0 * outside, "inside {inside} outside {outside}");
    }
}
