use ela_forensics::dataset::synth::natural_image;
use ela_forensics::ela::{compute_ela, decode_image, enhance_ela, recompress, QualityLevel, RasterImage};
use ela_forensics::Error;
use image::{ImageBuffer, ImageFormat, Luma, Rgb};
use proptest::prelude::*;

fn q95() -> QualityLevel {
    QualityLevel::DEFAULT
}

/// Ten procedurally generated natural-looking images of mixed sizes.
fn corpus() -> Vec<RasterImage> {
    (0..10u64)
        .map(|i| natural_image(64 + 16 * (i as u32 % 4), 48 + 8 * (i as u32 % 5), 1000 + i).unwrap())
        .collect()
}

#[test]
fn recompression_is_nearly_idempotent() {
    for img in corpus() {
        let once = recompress(&img, q95()).unwrap();
        let twice = recompress(&once, q95()).unwrap();
        let mad = once
            .data()
            .iter()
            .zip(twice.data())
            .map(|(a, b)| a.abs_diff(*b) as f64)
            .sum::<f64>()
            / once.data().len() as f64;
        assert!(mad <= 2.0, "mean absolute change {mad}");
    }
}

#[test]
fn recompressed_error_does_not_grow() {
    for img in corpus() {
        let first = compute_ela(&img, q95()).unwrap().max_error();
        let again = compute_ela(&recompress(&img, q95()).unwrap(), q95()).unwrap().max_error();
        assert!(again <= first + 2, "{again} > {first} + 2");
    }
}

#[test]
fn ela_shape_and_determinism() {
    for img in corpus() {
        let a = compute_ela(&img, q95()).unwrap();
        assert_eq!((a.width(), a.height()), (img.width(), img.height()));
        assert_eq!(a.max_error(), a.data().iter().copied().max().unwrap());
        assert_eq!(a, compute_ela(&img, q95()).unwrap());
    }
}

#[test]
fn enhancement_preserves_order_and_argmax() {
    for img in corpus() {
        let ela = compute_ela(&img, q95()).unwrap();
        let enhanced = enhance_ela(&ela);
        let mut pairs: Vec<(u8, u8)> = ela.data().iter().copied().zip(enhanced.data().iter().copied()).collect();
        pairs.sort_unstable();
        assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
        let argmax = ela.data().iter().position(|&v| v == ela.max_error()).unwrap();
        assert_eq!(enhanced.data()[argmax], 255);
    }
}

fn encode(img: image::DynamicImage, format: ImageFormat) -> Vec<u8> {
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, format).unwrap();
    out.into_inner()
}

#[test]
fn single_color_png_decodes_exactly() {
    let png = encode(ImageBuffer::from_pixel(8, 8, Rgb([12u8, 200, 77])).into(), ImageFormat::Png);
    let img = decode_image(&png).unwrap();
    assert_eq!((img.width(), img.height()), (8, 8));
    assert!(img.data().chunks_exact(3).all(|p| p == [12, 200, 77]));
}

#[test]
fn sixteen_bit_gray_tiff_expands_to_rgb() {
    let gray = ImageBuffer::from_fn(16, 12, |x, y| Luma([(x * 4000 + y * 300) as u16]));
    let tiff = encode(gray.clone().into(), ImageFormat::Tiff);
    let img = decode_image(&tiff).unwrap();
    for (px, src) in img.data().chunks_exact(3).zip(gray.pixels()) {
        assert!(px[0] == px[1] && px[1] == px[2]);
        // 16 → 8 bit reduction divides by 257 and rounds.
        let expected = (src.0[0] as f64 / 257.0).round() as i32;
        assert!((px[0] as i32 - expected).abs() <= 1, "{} vs {expected}", px[0]);
    }
}

#[test]
fn tiny_and_unsupported_inputs_rejected() {
    let png = encode(ImageBuffer::from_pixel(7, 30, Rgb([0u8, 0, 0])).into(), ImageFormat::Png);
    assert!(matches!(decode_image(&png), Err(Error::ImageTooSmall { .. })));
    let gif = b"GIF89a\x01\x00\x01\x00\x00\x00\x00;";
    assert!(matches!(decode_image(gif), Err(Error::UnsupportedFormat)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ela_samples_are_absolute_differences(w in 8u32..40, h in 8u32..40, seed in any::<u64>()) {
        let img = natural_image(w, h, seed).unwrap();
        let ela = compute_ela(&img, q95()).unwrap();
        let rec = recompress(&img, q95()).unwrap();
        for ((&e, &a), &b) in ela.data().iter().zip(img.data()).zip(rec.data()) {
            prop_assert_eq!(e, a.abs_diff(b));
        }
    }
}
