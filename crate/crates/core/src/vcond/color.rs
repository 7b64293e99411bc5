use super::CondError;
use crate::raster::{Image, Mask};

fn rgb_to_hsv_px(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let c = max - min;
    let v = max;
    let s = if max > 0.0 { c / max } else { 0.0 };
    let h = if c == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / c).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / c + 2.0) / 6.0
    } else {
        ((r - g) / c + 4.0) / 6.0
    };
    (if h >= 1.0 { h - 1.0 } else { h }, s, v)
}

fn hsv_to_rgb_px(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    if s == 0.0 {
        return (v, v, v);
    }
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector as u32 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

fn map3(img: &Image, f: impl Fn(f64, f64, f64) -> (f64, f64, f64)) -> Result<Image, CondError> {
    if img.channels() != 3 {
        return Err(CondError::BadChannelCount(img.channels()));
    }
    let mut out = img.clone();
    for px in out.data_mut().chunks_exact_mut(3) {
        let (a, b, c) = f(px[0] as f64, px[1] as f64, px[2] as f64);
        px[0] = a as f32;
        px[1] = b as f32;
        px[2] = c as f32;
    }
    Ok(out)
}

/// RGB to HSV with hue stored as a fraction of a turn in `[0, 1)`.
pub fn rgb_to_hsv(img: &Image) -> Result<Image, CondError> {
    map3(img, rgb_to_hsv_px)
}

pub fn hsv_to_rgb(img: &Image) -> Result<Image, CondError> {
    map3(img, hsv_to_rgb_px)
}

/// Scales the HSV value channel of `corrupted`, window by window, so its mean
/// brightness matches `reference`. Hue and saturation are kept.
pub fn brightness_align(
    corrupted: &Image,
    reference: &Image,
    window: (usize, usize),
) -> Result<Image, CondError> {
    brightness_align_masked(corrupted, reference, window, None)
}

/// As [`brightness_align`], but only pixels where `valid` is true are
/// measured and adjusted.
pub fn brightness_align_masked(
    corrupted: &Image,
    reference: &Image,
    window: (usize, usize),
    valid: Option<&Mask>,
) -> Result<Image, CondError> {
    corrupted.check_same_shape(reference)?;
    if corrupted.channels() != 3 {
        return Err(CondError::BadChannelCount(corrupted.channels()));
    }
    let (ww, wh) = window;
    if ww == 0 || wh == 0 {
        return Err(CondError::InvalidParameter("window must be non-empty".into()));
    }
    let (w, h) = (corrupted.width(), corrupted.height());
    if let Some(m) = valid {
        if m.width() != w || m.height() != h {
            return Err(CondError::ShapeMismatch("mask size differs from image".into()));
        }
    }
    let use_px = |x: usize, y: usize| valid.is_none_or(|m| m.get(x, y));
    let value = |img: &Image, x: usize, y: usize| {
        let p = img.pixel(x, y);
        (p[0].max(p[1]).max(p[2])) as f64
    };
    let mut out = corrupted.clone();
    for y0 in (0..h).step_by(wh) {
        for x0 in (0..w).step_by(ww) {
            let (x1, y1) = ((x0 + ww).min(w), (y0 + wh).min(h));
            let (mut sr, mut sc, mut n) = (0.0, 0.0, 0usize);
            for y in y0..y1 {
                for x in x0..x1 {
                    if use_px(x, y) {
                        sr += value(reference, x, y);
                        sc += value(corrupted, x, y);
                        n += 1;
                    }
                }
            }
            if n == 0 {
                continue;
            }
            let (mr, mc) = (sr / n as f64, sc / n as f64);
            if mc < 1e-6 {
                continue;
            }
            let scale = (mr / mc).clamp(0.25, 4.0);
            if scale == 1.0 {
                continue;
            }
            for y in y0..y1 {
                for x in x0..x1 {
                    if !use_px(x, y) {
                        continue;
                    }
                    let p = out.pixel_mut(x, y);
                    let (hh, s, v) = rgb_to_hsv_px(p[0] as f64, p[1] as f64, p[2] as f64);
                    let (r, g, b) = hsv_to_rgb_px(hh, s, (v * scale).min(1.0));
                    p[0] = r as f32;
                    p[1] = g as f32;
                    p[2] = b as f32;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Purpose};
    use rand::Rng;

    #[test]
    fn hsv_examples() {
        let red = Image::new(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(rgb_to_hsv(&red).unwrap().data(), &[0.0, 1.0, 1.0]);
        let gray = Image::new(1, 1, 3, vec![0.5, 0.5, 0.5]).unwrap();
        assert_eq!(rgb_to_hsv(&gray).unwrap().data(), &[0.0, 0.0, 0.5]);
        assert!(matches!(
            rgb_to_hsv(&Image::zeros(1, 1, 1)),
            Err(CondError::BadChannelCount(1))
        ));
    }

    #[test]
    fn hsv_round_trip() {
        let mut rng = rng::stream(1, Purpose::Generic, 0);
        let data: Vec<f32> = (0..30_000).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let img = Image::new(100, 100, 3, data).unwrap();
        let back = hsv_to_rgb(&rgb_to_hsv(&img).unwrap()).unwrap();
        let err = img
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(err < 1e-6, "max err {err}");
    }

    #[test]
    fn identical_images_unchanged() {
        let img = Image::from_fn(16, 16, 3, |x, y, c| ((x * 3 + y * 5 + c) % 13) as f32 / 13.0);
        let out = brightness_align(&img, &img, (8, 8)).unwrap();
        for (a, b) in img.data().iter().zip(out.data()) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn half_brightness_restored() {
        let reference = Image::from_fn(16, 16, 3, |x, _, _| 0.2 + 0.6 * x as f32 / 15.0);
        let dark = Image::from_fn(16, 16, 3, |x, y, c| 0.5 * reference.get(x, y, c));
        let out = brightness_align(&dark, &reference, (4, 4)).unwrap();
        for y0 in (0..16).step_by(4) {
            for x0 in (0..16).step_by(4) {
                let mean = |img: &Image| {
                    let mut s = 0.0;
                    for y in y0..y0 + 4 {
                        for x in x0..x0 + 4 {
                            s += img.get(x, y, 0) as f64;
                        }
                    }
                    s / 16.0
                };
                assert!((mean(&out) - mean(&reference)).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn hue_and_saturation_kept() {
        let dark_red = Image::filled(8, 8, 3, 0.0);
        let mut dark_red = dark_red;
        let mut bright_red = Image::filled(8, 8, 3, 0.0);
        for y in 0..8 {
            for x in 0..8 {
                dark_red.set(x, y, 0, 0.3);
                bright_red.set(x, y, 0, 0.9);
            }
        }
        let out = brightness_align(&dark_red, &bright_red, (8, 8)).unwrap();
        let hsv = rgb_to_hsv(&out).unwrap();
        for px in hsv.data().chunks_exact(3) {
            assert_eq!(px[0], 0.0);
            assert_eq!(px[1], 1.0);
            assert!((px[2] - 0.9).abs() < 1e-6);
        }
    }

    #[test]
    fn masked_alignment_leaves_uncovered_pixels() {
        let reference = Image::filled(8, 8, 3, 0.8);
        let cor = Image::filled(8, 8, 3, 0.4);
        let m = Mask::from_fn(8, 8, |x, _| x < 4);
        let out = brightness_align_masked(&cor, &reference, (8, 8), Some(&m)).unwrap();
        assert!((out.get(0, 0, 0) - 0.8).abs() < 1e-6);
        assert_eq!(out.get(7, 0, 0), 0.4);
    }
}
