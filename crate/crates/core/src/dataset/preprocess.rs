use std::path::Path;

use super::{ImageRecord, Label, ManifestSettings};
use crate::ela::{compute_ela, ela_as_image, enhance_ela, load_image, ElaMap, RasterImage};
use crate::Result;

/// A network input: an `(height, width, 3)` ELA tensor scaled to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleTensor {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
    pub label: Label,
}

impl ExampleTensor {
    pub fn one_hot(&self) -> [f64; 2] {
        self.label.one_hot()
    }
}

/// Bilinear resize of an interleaved `channels`-plane image.
///
/// Pixel centers sit at half-integer coordinates and out-of-range taps are
/// clamped to the border.
pub fn resize_bilinear(
    src: &[f32],
    src_w: usize,
    src_h: usize,
    channels: usize,
    dst_w: usize,
    dst_h: usize,
) -> Vec<f32> {
    assert_eq!(src.len(), src_w * src_h * channels);
    if src_w == dst_w && src_h == dst_h {
        return src.to_vec();
    }
    let taps = |dst: usize, src_len: usize, i: usize| {
        let pos = ((i as f64 + 0.5) * src_len as f64 / dst as f64 - 0.5).clamp(0.0, (src_len - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(src_len - 1);
        (lo, hi, (pos - lo as f64) as f32)
    };
    let xs: Vec<_> = (0..dst_w).map(|x| taps(dst_w, src_w, x)).collect();
    let mut out = Vec::with_capacity(dst_w * dst_h * channels);
    for y in 0..dst_h {
        let (y0, y1, fy) = taps(dst_h, src_h, y);
        for &(x0, x1, fx) in &xs {
            for c in 0..channels {
                let at = |yy: usize, xx: usize| src[(yy * src_w + xx) * channels + c];
                let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    out
}

/// ELA at `settings.quality`, optional enhancement, bilinear resize to
/// `settings.target_size`, then division by 255.
pub fn preprocess_image(img: &RasterImage, label: Label, settings: &ManifestSettings) -> Result<ExampleTensor> {
    let ela = compute_ela(img, settings.quality)?;
    Ok(ela_to_tensor(&ela, label, settings))
}

/// Enhancement (if enabled), resize and scaling of an existing map.
pub fn ela_to_tensor(ela: &ElaMap, label: Label, settings: &ManifestSettings) -> ExampleTensor {
    let map = if settings.enhance {
        enhance_ela(ela)
    } else {
        ela_as_image(ela)
    };
    let samples: Vec<f32> = map.data().iter().map(|&v| v as f32).collect();
    let (tw, th) = settings.target_size;
    let resized = resize_bilinear(
        &samples,
        map.width() as usize,
        map.height() as usize,
        3,
        tw as usize,
        th as usize,
    );
    let data = resized
        .into_iter()
        .map(|v| (v / 255.0).clamp(0.0, 1.0))
        .collect();
    ExampleTensor {
        height: th as usize,
        width: tw as usize,
        data,
        label,
    }
}

/// Loads `record.path` (relative paths resolve against `base_dir`) and
/// preprocesses it.
pub fn preprocess(record: &ImageRecord, base_dir: &Path, settings: &ManifestSettings) -> Result<ExampleTensor> {
    let img = load_image(&base_dir.join(&record.path))?;
    preprocess_image(&img, record.label, settings)
}
