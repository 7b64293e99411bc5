use rand::Rng;
use rand_distr::StandardNormal;

use super::{CondError, Schedule};
use crate::raster::{Image, Mask};
use crate::rng::{self, Purpose};

/// A multi-view sample split into clean references and masked targets.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    frames: Vec<Image>,
    is_reference: Vec<bool>,
    masks: Vec<Mask>,
}

impl ViewSet {
    /// `masks[i]` marks the hidden pixels of frame `i`; masks of reference
    /// frames must be empty.
    pub fn new(frames: Vec<Image>, references: &[usize], masks: Vec<Mask>) -> Result<Self, CondError> {
        let first = frames
            .first()
            .ok_or_else(|| CondError::InvalidViews("no frames".into()))?;
        if frames.iter().any(|f| !f.same_shape(first)) {
            return Err(CondError::ShapeMismatch("frames differ in shape".into()));
        }
        if masks.len() != frames.len() {
            return Err(CondError::InvalidViews(format!(
                "{} masks for {} frames",
                masks.len(),
                frames.len()
            )));
        }
        if masks
            .iter()
            .any(|m| m.width() != first.width() || m.height() != first.height())
        {
            return Err(CondError::ShapeMismatch("mask size differs from frames".into()));
        }
        let mut is_reference = vec![false; frames.len()];
        for &r in references {
            if r >= frames.len() {
                return Err(CondError::InvalidViews(format!("reference index {r} out of range")));
            }
            if is_reference[r] {
                return Err(CondError::InvalidViews(format!("duplicate reference index {r}")));
            }
            if masks[r].any() {
                return Err(CondError::InvalidViews(format!(
                    "reference frame {r} has a non-empty mask"
                )));
            }
            is_reference[r] = true;
        }
        Ok(Self {
            frames,
            is_reference,
            masks,
        })
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }

    pub fn is_reference(&self, i: usize) -> bool {
        self.is_reference[i]
    }

    pub fn reference_indices(&self) -> Vec<usize> {
        (0..self.frames.len()).filter(|&i| self.is_reference[i]).collect()
    }

    pub fn target_indices(&self) -> Vec<usize> {
        (0..self.frames.len()).filter(|&i| !self.is_reference[i]).collect()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Standard-normal raster drawn from the `(seed, purpose, index)` stream.
pub fn standard_normal(
    seed: u64,
    purpose: Purpose,
    index: u64,
    width: usize,
    height: usize,
    channels: usize,
) -> Image {
    let mut rng = rng::stream(seed, purpose, index);
    let data = (0..width * height * channels)
        .map(|_| rng.sample::<f64, _>(StandardNormal) as f32)
        .collect();
    Image::new(width, height, channels, data).expect("length matches")
}

fn check_noise(frames: &[Image], noise: &[Image]) -> Result<(), CondError> {
    if noise.len() != frames.len() {
        return Err(CondError::ShapeMismatch(format!(
            "{} noise rasters for {} frames",
            noise.len(),
            frames.len()
        )));
    }
    for (f, n) in frames.iter().zip(noise) {
        f.check_same_shape(n)?;
    }
    Ok(())
}

/// Forward diffusion: `sqrt(ab_t) * x0 + sqrt(1 - ab_t) * noise`.
pub fn add_noise(x0: &Image, t: u32, noise: &Image, sched: &Schedule) -> Result<Image, CondError> {
    x0.check_same_shape(noise)?;
    let ab = sched.alpha_bar(t)?;
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    let data = x0
        .data()
        .iter()
        .zip(noise.data())
        .map(|(&x, &n)| (a * x as f64 + b * n as f64) as f32)
        .collect();
    Ok(Image::new(x0.width(), x0.height(), x0.channels(), data)?)
}

/// Corrupted views: hidden target pixels are zeroed, then every frame is
/// noised at the reduced timestep `f(t)`.
pub fn corrupt(
    views: &ViewSet,
    t: u32,
    noise: &[Image],
    sched: &Schedule,
) -> Result<Vec<Image>, CondError> {
    sched.check_t(t, 1)?;
    check_noise(views.frames(), noise)?;
    let ab = sched.alpha_bar(sched.f_of_t(t))?;
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(views
        .frames()
        .iter()
        .zip(views.masks())
        .zip(noise)
        .map(|((x0, m), n)| {
            let ch = x0.channels();
            let data = x0
                .data()
                .iter()
                .zip(n.data())
                .enumerate()
                .map(|(i, (&x, &e))| {
                    let keep = if m.data()[i / ch] { 0.0 } else { x as f64 };
                    (a * keep + b * e as f64) as f32
                })
                .collect();
            Image::new(x0.width(), x0.height(), ch, data).expect("shape preserved")
        })
        .collect())
}

/// Visual condition for every frame plus the mask channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub frames: Vec<Image>,
    pub masks: Vec<Mask>,
    pub t: u32,
    pub t_prime: u32,
    pub w: f64,
}

impl Condition {
    /// Frame `i` with the mask appended as a final 0/1 channel.
    pub fn stacked(&self, i: usize) -> Image {
        let f = &self.frames[i];
        let m = &self.masks[i];
        let ch = f.channels();
        Image::from_fn(f.width(), f.height(), ch + 1, |x, y, c| {
            if c < ch {
                f.get(x, y, c)
            } else if m.get(x, y) {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// Mixes corrupted views with the noisy latents using `W_t`; reference
/// frames are replaced by the clean references.
pub fn build_condition(
    views: &ViewSet,
    x_t: &[Image],
    t: u32,
    noise: &[Image],
    sched: &Schedule,
) -> Result<Condition, CondError> {
    sched.check_t(t, 1)?;
    check_noise(views.frames(), x_t)?;
    let c_t = corrupt(views, t, noise, sched)?;
    let w = sched.w_of_t(t);
    let frames = c_t
        .into_iter()
        .zip(x_t)
        .enumerate()
        .map(|(i, (c, x))| {
            if views.is_reference(i) {
                views.frames()[i].clone()
            } else if w == 1.0 {
                c
            } else if w == 0.0 {
                x.clone()
            } else {
                let data = c
                    .data()
                    .iter()
                    .zip(x.data())
                    .map(|(&cv, &xv)| (w * cv as f64 + (1.0 - w) * xv as f64) as f32)
                    .collect();
                Image::new(c.width(), c.height(), c.channels(), data).expect("shape preserved")
            }
        })
        .collect();
    Ok(Condition {
        frames,
        masks: views.masks().to_vec(),
        t,
        t_prime: sched.f_of_t(t),
        w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vcond::ScheduleParams;

    fn sched() -> Schedule {
        Schedule::new(ScheduleParams::default()).unwrap()
    }

    fn views(n: usize, w: usize, h: usize, masks_on: bool) -> ViewSet {
        let frames: Vec<Image> = (0..n)
            .map(|i| Image::from_fn(w, h, 3, |x, y, c| ((x + 2 * y + 3 * c + i) % 11) as f32 / 11.0))
            .collect();
        let masks = (0..n)
            .map(|i| Mask::from_fn(w, h, |x, _| masks_on && i > 0 && x < w / 2))
            .collect();
        ViewSet::new(frames, &[0], masks).unwrap()
    }

    fn noise(v: &ViewSet, seed: u64) -> Vec<Image> {
        v.frames()
            .iter()
            .enumerate()
            .map(|(i, f)| standard_normal(seed, Purpose::ConditionNoise, i as u64, f.width(), f.height(), 3))
            .collect()
    }

    #[test]
    fn add_noise_examples() {
        let s = sched();
        let x0 = Image::filled(8, 8, 3, 0.3);
        let n = standard_normal(1, Purpose::LatentNoise, 0, 8, 8, 3);
        assert_eq!(add_noise(&x0, 0, &n, &s).unwrap(), x0);
        let zero = Image::zeros(8, 8, 3);
        let out = add_noise(&zero, 400, &n, &s).unwrap();
        let b = (1.0 - s.alpha_bar(400).unwrap()).sqrt();
        for (o, e) in out.data().iter().zip(n.data()) {
            assert_eq!(*o, (b * *e as f64) as f32);
        }
        assert!(add_noise(&x0, 1, &zero.resize_bilinear(4, 4), &s).is_err());
    }

    #[test]
    fn add_noise_sample_mean() {
        let s = sched();
        let c = 0.7f32;
        let x0 = Image::filled(64, 64, 1, c);
        let n = standard_normal(9, Purpose::LatentNoise, 0, 64, 64, 1);
        let out = add_noise(&x0, 500, &n, &s).unwrap();
        let ab = s.alpha_bar(500).unwrap();
        let mean = out.data().iter().map(|&v| v as f64).sum::<f64>() / 4096.0;
        let sigma = ((1.0 - ab) / 4096.0).sqrt();
        assert!((mean - ab.sqrt() * c as f64).abs() < 4.0 * sigma);
    }

    #[test]
    fn corrupt_without_noise_or_mask_is_identity() {
        // beta_f small enough that t=1 maps to t'=0.
        let s = sched();
        assert_eq!(s.f_of_t(2), 0);
        let v = views(3, 6, 5, false);
        let n = noise(&v, 3);
        let c = corrupt(&v, 2, &n, &s).unwrap();
        assert_eq!(c, v.frames());
    }

    #[test]
    fn fully_masked_target_is_scaled_noise() {
        let s = sched();
        let frames = vec![Image::filled(4, 4, 3, 0.5); 2];
        let masks = vec![Mask::filled(4, 4, false), Mask::filled(4, 4, true)];
        let v = ViewSet::new(frames, &[0], masks).unwrap();
        let n = noise(&v, 4);
        let c = corrupt(&v, 700, &n, &s).unwrap();
        let b = (1.0 - s.alpha_bar(s.f_of_t(700)).unwrap()).sqrt();
        for (o, e) in c[1].data().iter().zip(n[1].data()) {
            assert_eq!(*o, (b * *e as f64) as f32);
        }
    }

    #[test]
    fn corrupted_noise_variance() {
        let s = sched();
        let v = views(1, 64, 64, false);
        let n = noise(&v, 5);
        let c = corrupt(&v, 1000, &n, &s).unwrap();
        let ab = s.alpha_bar(200).unwrap();
        let resid: Vec<f64> = c[0]
            .data()
            .iter()
            .zip(v.frames()[0].data())
            .map(|(&cv, &x)| cv as f64 - ab.sqrt() * x as f64)
            .collect();
        let n_s = resid.len() as f64;
        let var = resid.iter().map(|r| r * r).sum::<f64>() / n_s;
        let target = 1.0 - ab;
        // Var of the sample second moment of N(0, s2) is 2 s2^2 / n.
        let sd = (2.0 * target * target / n_s).sqrt();
        assert!((var - target).abs() < 3.0 * sd, "var {var} target {target}");
    }

    #[test]
    fn condition_endpoints_and_references() {
        let s = sched();
        let v = views(4, 8, 6, true);
        let n = noise(&v, 6);
        let lat: Vec<Image> = v
            .frames()
            .iter()
            .enumerate()
            .map(|(i, f)| standard_normal(6, Purpose::LatentNoise, i as u64, f.width(), f.height(), 3))
            .collect();
        let x_t: Vec<Image> = v
            .frames()
            .iter()
            .zip(&lat)
            .map(|(f, e)| add_noise(f, 1000, e, &s).unwrap())
            .collect();
        let cond = build_condition(&v, &x_t, 1000, &n, &s).unwrap();
        let c_t = corrupt(&v, 1000, &n, &s).unwrap();
        assert_eq!(cond.w, 1.0);
        assert_eq!(cond.frames[1..], c_t[1..]);
        assert_eq!(cond.frames[0], v.frames()[0]);
        assert_eq!(cond.masks, v.masks());
        let stacked = cond.stacked(1);
        assert_eq!(stacked.channels(), 4);
        assert_eq!(stacked.get(0, 0, 3), 1.0);
        assert_eq!(stacked.get(7, 0, 3), 0.0);

        let s0 = Schedule::new(ScheduleParams {
            v_decay_end: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(s0.w_of_t(100), 0.0);
        let cond = build_condition(&v, &x_t, 100, &n, &s0).unwrap();
        assert_eq!(cond.frames[1..], x_t[1..]);
        assert!(matches!(
            build_condition(&v, &x_t, 0, &n, &s),
            Err(CondError::TimestepOutOfRange { .. })
        ));
    }

    #[test]
    fn viewset_rejects_masked_reference() {
        let frames = vec![Image::zeros(4, 4, 3); 2];
        let masks = vec![Mask::filled(4, 4, true), Mask::filled(4, 4, false)];
        assert!(matches!(
            ViewSet::new(frames, &[0], masks),
            Err(CondError::InvalidViews(_))
        ));
    }
}
