//! Procedural sample data: cartoon faces on cluttered backgrounds for
//! detector training and tests, synthetic video frames, and a default emoji
//! set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::emotion::EmotionLabel;
use crate::error::Result;
use crate::facedetect::{
    detect_faces, hog_descriptor, train_linear_svm, DetectorParams, FaceBox, HogParams, LinearSvm,
    SvmTrainParams,
};
use crate::geometry::{CoordSpace, KeypointSet, LandmarkRatios};
use crate::imagecore::{crop, resize_bilinear, Channels, Image};

/// Float grayscale drawing surface.
#[derive(Debug, Clone)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl Canvas {
    pub fn new(width: u32, height: u32, value: f32) -> Self {
        Canvas {
            width,
            height,
            data: vec![value; (width * height) as usize],
        }
    }

    /// Blends `value` into an axis-aligned ellipse with anti-aliased edges.
    pub fn ellipse(&mut self, cx: f32, cy: f32, rx: f32, ry: f32, value: f32) {
        let x0 = (cx - rx - 1.0).floor().max(0.0) as u32;
        let x1 = ((cx + rx + 2.0).ceil().max(0.0) as u32).min(self.width);
        let y0 = (cy - ry - 1.0).floor().max(0.0) as u32;
        let y1 = ((cy + ry + 2.0).ceil().max(0.0) as u32).min(self.height);
        let r = rx.min(ry).max(1e-3);
        for y in y0..y1 {
            for x in x0..x1 {
                let (dx, dy) = ((x as f32 + 0.5 - cx) / rx, (y as f32 + 0.5 - cy) / ry);
                let d = ((dx * dx + dy * dy).sqrt() - 1.0) * r;
                let cov = (0.5 - d).clamp(0.0, 1.0);
                if cov > 0.0 {
                    let p = &mut self.data[(y * self.width + x) as usize];
                    *p += (value - *p) * cov;
                }
            }
        }
    }

    pub fn rect(&mut self, x: f32, y: f32, w: f32, h: f32, value: f32) {
        let x0 = x.max(0.0) as u32;
        let y0 = y.max(0.0) as u32;
        let x1 = ((x + w).max(0.0) as u32).min(self.width);
        let y1 = ((y + h).max(0.0) as u32).min(self.height);
        for yy in y0..y1 {
            for xx in x0..x1 {
                self.data[(yy * self.width + xx) as usize] = value;
            }
        }
    }

    pub fn add_noise(&mut self, rng: &mut impl Rng, amplitude: f32) {
        for v in &mut self.data {
            *v += rng.random_range(-amplitude..=amplitude);
        }
    }

    pub fn to_gray(&self) -> Image {
        let data = self
            .data
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect();
        Image::from_raw(self.width, self.height, Channels::Gray1, data).expect("sized buffer")
    }

    /// RGB image with per-channel gains applied to the gray values.
    pub fn to_rgb(&self, tint: [f32; 3]) -> Image {
        let data = self
            .data
            .iter()
            .flat_map(|v| tint.map(|t| (v * t).round().clamp(0.0, 255.0) as u8))
            .collect();
        Image::from_raw(self.width, self.height, Channels::Rgb3, data).expect("sized buffer")
    }
}

/// Random appearance of one cartoon face.
#[derive(Debug, Clone, Copy)]
pub struct FaceStyle {
    pub skin: f32,
    pub feature: f32,
    pub aspect: f32,
    pub eye_dx: f32,
    pub eye_y: f32,
    pub mouth_y: f32,
    pub mouth_w: f32,
    pub mouth_h: f32,
}

impl FaceStyle {
    pub fn random(rng: &mut impl Rng) -> Self {
        FaceStyle {
            skin: rng.random_range(165.0..235.0),
            feature: rng.random_range(10.0..60.0),
            aspect: rng.random_range(1.12..1.32),
            eye_dx: rng.random_range(0.14..0.18),
            eye_y: rng.random_range(0.38..0.44),
            mouth_y: rng.random_range(0.70..0.76),
            mouth_w: rng.random_range(0.10..0.17),
            mouth_h: rng.random_range(0.02..0.06),
        }
    }
}

/// Draws a face filling the square `(x, y, size, size)`.
pub fn draw_face(canvas: &mut Canvas, x: f32, y: f32, size: f32, s: &FaceStyle) {
    let at = |fx: f32, fy: f32| (x + fx * size, y + fy * size);
    let rx = 0.38 * size;
    let ry = (rx * s.aspect).min(0.48 * size);
    let (cx, cy) = at(0.5, 0.52);
    canvas.ellipse(cx, cy, rx, ry, s.skin);
    for side in [-1.0f32, 1.0] {
        let (ex, ey) = at(0.5 + side * s.eye_dx, s.eye_y);
        canvas.ellipse(ex, ey, 0.06 * size, 0.035 * size, s.feature);
        let (bx, by) = at(0.5 + side * s.eye_dx, s.eye_y - 0.08);
        canvas.ellipse(bx, by, 0.08 * size, 0.014 * size, s.feature + 20.0);
    }
    let (nx, ny) = at(0.5, 0.58);
    canvas.ellipse(nx, ny, 0.03 * size, 0.06 * size, s.skin - 35.0);
    let (mx, my) = at(0.5, s.mouth_y);
    canvas.ellipse(mx, my, s.mouth_w * size, s.mouth_h * size, s.feature);
}

/// Cluttered background: a gradient, soft rectangles, featureless blobs and
/// pixel noise.
pub fn background(width: u32, height: u32, rng: &mut impl Rng) -> Canvas {
    let base = rng.random_range(40.0..160.0);
    let gx = rng.random_range(-60.0..60.0) / width as f32;
    let gy = rng.random_range(-60.0..60.0) / height as f32;
    let mut c = Canvas::new(width, height, 0.0);
    for y in 0..height {
        for x in 0..width {
            c.data[(y * width + x) as usize] = base + gx * x as f32 + gy * y as f32;
        }
    }
    let (w, h) = (width as f32, height as f32);
    for _ in 0..rng.random_range(3..9) {
        let rw = rng.random_range(0.05..0.5) * w;
        let rh = rng.random_range(0.05..0.5) * h;
        c.rect(
            rng.random_range(-0.1..1.0) * w,
            rng.random_range(-0.1..1.0) * h,
            rw,
            rh,
            rng.random_range(20.0..235.0),
        );
    }
    for _ in 0..rng.random_range(1..4) {
        let r = rng.random_range(0.03..0.2) * w.min(h);
        c.ellipse(
            rng.random_range(0.0..w),
            rng.random_range(0.0..h),
            r,
            r * rng.random_range(0.7..1.4),
            rng.random_range(20.0..235.0),
        );
    }
    c.add_noise(rng, 6.0);
    c
}

/// Gray frame with one face in the square `truth`.
pub fn face_frame(width: u32, height: u32, truth: FaceBox, rng: &mut impl Rng) -> Image {
    let mut c = background(width, height, rng);
    let style = FaceStyle::random(rng);
    draw_face(&mut c, truth.x, truth.y, truth.w, &style);
    c.to_gray()
}

/// Positive and negative HoG descriptors.
pub type WindowSets = (Vec<Vec<f32>>, Vec<Vec<f32>>);

/// Detector training windows: jittered faces as positives; clutter, offset
/// faces and wrongly scaled faces as negatives.
pub fn detector_windows(
    hog: &HogParams,
    positives: usize,
    negatives: usize,
    seed: u64,
) -> Result<WindowSets> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let win = hog.window;
    let wf = win as f32;
    let mut pos = Vec::with_capacity(positives);
    for _ in 0..positives {
        let mut c = background(win * 2, win * 2, &mut rng);
        let size = wf * rng.random_range(0.9..1.1);
        let off = wf / 2.0 + (wf - size) / 2.0;
        let (jx, jy) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        draw_face(
            &mut c,
            off + jx,
            off + jy,
            size,
            &FaceStyle::random(&mut rng),
        );
        let img = crop(&c.to_gray(), win as i64 / 2, win as i64 / 2, win, win)?;
        pos.push(hog_descriptor(&img, hog)?);
    }
    let mut neg = Vec::with_capacity(negatives);
    for i in 0..negatives {
        let mut c = background(win * 3, win * 3, &mut rng);
        let style = FaceStyle::random(&mut rng);
        let (wx, wy) = (win as i64, win as i64);
        let window_origin = match i % 4 {
            // plain clutter
            0 | 1 => (
                rng.random_range(0..2 * win) as i64,
                rng.random_range(0..2 * win) as i64,
            ),
            // face displaced by 35–80 % of the window
            2 => {
                let ang = rng.random_range(0.0..std::f32::consts::TAU);
                let d = wf * rng.random_range(0.35..0.8);
                draw_face(&mut c, wf, wf, wf, &style);
                (
                    (wf + d * ang.cos()).round() as i64,
                    (wf + d * ang.sin()).round() as i64,
                )
            }
            // face far too small or far too large for the window
            _ => {
                let scale = if rng.random_bool(0.5) {
                    rng.random_range(0.3..0.55)
                } else {
                    rng.random_range(1.9..2.8)
                };
                let size = wf * scale;
                let centre = 1.5 * wf;
                draw_face(
                    &mut c,
                    centre - size / 2.0,
                    centre - size / 2.0,
                    size,
                    &style,
                );
                // parts of an oversized face, anywhere inside it
                let slack = ((size - wf) / 2.0).max(0.0) as i64;
                (
                    wx + rng.random_range(-slack..=slack),
                    wy + rng.random_range(-slack..=slack),
                )
            }
        };
        let img = crop(&c.to_gray(), window_origin.0, window_origin.1, win, win)?;
        neg.push(hog_descriptor(&img, hog)?);
    }
    Ok((pos, neg))
}

/// Trains a detector on synthetic windows, then runs two rounds of hard
/// negatives mined from synthetic frames and retrains.
pub fn train_synthetic_detector(hog: &HogParams, seed: u64) -> Result<LinearSvm> {
    let (pos, mut neg) = detector_windows(hog, 500, 1500, seed)?;
    let params = SvmTrainParams {
        seed,
        ..Default::default()
    };
    let mut svm = train_linear_svm(&pos, &neg, &params)?;

    let det = DetectorParams {
        min_size: hog.window,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let win = hog.window;
    for _round in 0..2 {
        for _ in 0..40 {
            let size = win as f32 * [1.0, 1.5, 2.0][rng.random_range(0..3)];
            let truth = FaceBox::new(
                rng.random_range(0.0..(320.0 - size)).round(),
                rng.random_range(0.0..(240.0 - size)).round(),
                size,
                size,
                0.0,
            );
            let frame = face_frame(320, 240, truth, &mut rng);
            for b in detect_faces(&frame, &svm, hog, &det)? {
                if b.iou(&truth) < 0.3 {
                    let patch = crop(
                        &frame,
                        b.x.round() as i64,
                        b.y.round() as i64,
                        b.w as u32,
                        b.h as u32,
                    )?;
                    let patch = resize_bilinear(&patch, win, win)?;
                    neg.push(hog_descriptor(&patch, hog)?);
                }
            }
        }
        svm = train_linear_svm(&pos, &neg, &params)?;
    }
    Ok(svm)
}

const EMOJI_YELLOW: [u8; 3] = [255, 204, 51];
const EMOJI_INK: [u8; 3] = [70, 40, 20];

fn emoji_tint(label: EmotionLabel) -> [u8; 3] {
    match label {
        EmotionLabel::Angry => [235, 90, 60],
        EmotionLabel::Disgust => [150, 200, 80],
        EmotionLabel::Fear => [170, 190, 235],
        _ => EMOJI_YELLOW,
    }
}

/// Distance from `p` to the polyline through `pts`.
fn polyline_distance(p: (f32, f32), pts: &[(f32, f32)]) -> f32 {
    pts.windows(2)
        .map(|s| {
            let ((ax, ay), (bx, by)) = (s[0], s[1]);
            let (dx, dy) = (bx - ax, by - ay);
            let len2 = (dx * dx + dy * dy).max(1e-9);
            let t = (((p.0 - ax) * dx + (p.1 - ay) * dy) / len2).clamp(0.0, 1.0);
            ((p.0 - ax - t * dx).powi(2) + (p.1 - ay - t * dy).powi(2)).sqrt()
        })
        .fold(f32::INFINITY, f32::min)
}

/// Mouth curve from `left` to `right`; `v` grows downwards, so a positive
/// bump is a smile.
fn mouth_curve(label: EmotionLabel, left: [f64; 2], right: [f64; 2]) -> Vec<(f32, f32)> {
    let width = (right[0] - left[0]) as f32;
    (0..=24)
        .map(|i| {
            let t = i as f32 / 24.0;
            let x = left[0] as f32 + width * t;
            let base = left[1] as f32 + (right[1] - left[1]) as f32 * t;
            let bump = 1.0 - (2.0 * t - 1.0).powi(2);
            let y = match label {
                EmotionLabel::Happy => base + 0.3 * width * bump,
                EmotionLabel::Sad | EmotionLabel::Angry => base - 0.2 * width * bump,
                EmotionLabel::Disgust => {
                    base + 0.08 * width * (t * std::f32::consts::TAU * 1.5).sin()
                }
                _ => base,
            };
            (x, y)
        })
        .collect()
}

/// Unit-space keypoints of the synthetic emoji. They coincide with the
/// default face-box landmark ratios, so the fitted homography reduces to a
/// scale and translation onto the face box.
pub fn emoji_keypoints() -> KeypointSet {
    let r = LandmarkRatios::default();
    KeypointSet::from_points(
        [
            r.left_eye_outer,
            r.right_eye_outer,
            r.mouth_left,
            r.mouth_right,
            r.philtrum,
            r.chin,
        ],
        CoordSpace::EmojiUnit,
    )
}

/// RGBA emoji for `label` drawn with [`emoji_keypoints`].
pub fn render_emoji(label: EmotionLabel, size: u32) -> Image {
    render_emoji_with(label, size, &emoji_keypoints())
}

/// RGBA emoji for `label` with eyes, mouth and chin placed at `kp` (unit
/// coordinates). The disc is centred between the eyes and the chin.
pub fn render_emoji_with(label: EmotionLabel, size: u32, kp: &KeypointSet) -> Image {
    let s = size as f32;
    let f = |p: [f64; 2]| (p[0] as f32, p[1] as f32);
    let (le, re) = (f(kp.left_eye_outer), f(kp.right_eye_outer));
    let (ml, mr) = (f(kp.mouth_left), f(kp.mouth_right));
    let span = re.0 - le.0;
    let eye_rx = 0.15 * span;
    let eyes = [(le.0 + eye_rx, le.1), (re.0 - eye_rx, re.1)];
    let mouth_w = mr.0 - ml.0;
    let mouth_mid = ((ml.0 + mr.0) / 2.0, (ml.1 + mr.1) / 2.0);
    let chin = f(kp.chin);
    let centre = (0.5f32, 0.5f32);
    let radius = ((chin.1 - centre.1).abs() + 0.01).clamp(0.3, 0.5);

    let face = emoji_tint(label);
    let mouth = mouth_curve(label, kp.mouth_left, kp.mouth_right);
    let open_mouth = matches!(label, EmotionLabel::Surprise | EmotionLabel::Fear);
    // (inner-end drop, lift) of the brows, as fractions of the eye span
    let brows = match label {
        EmotionLabel::Angry => Some((0.12, 0.0)),
        EmotionLabel::Sad => Some((-0.1, 0.0)),
        EmotionLabel::Surprise | EmotionLabel::Fear => Some((0.0, 0.12)),
        _ => None,
    };
    Image::from_fn(size, size, Channels::Rgba4, |x, y| {
        let (u, v) = ((x as f32 + 0.5) / s, (y as f32 + 0.5) / s);
        let r = ((u - centre.0).powi(2) + (v - centre.1).powi(2)).sqrt();
        let alpha = ((radius - r) * s + 0.5).clamp(0.0, 1.0);
        if alpha == 0.0 {
            return [0, 0, 0, 0];
        }
        let px = 1.0 / s;
        let mut ink = 0f32;
        let ry = eye_rx * 0.8;
        for (ex, ey) in eyes {
            let d = (((u - ex) / eye_rx).powi(2) + ((v - ey) / ry).powi(2)).sqrt();
            ink = ink.max(((1.0 - d) * ry / px + 0.5).clamp(0.0, 1.0));
        }
        if open_mouth {
            let (rx, ry) = (0.27 * mouth_w, 0.23 * mouth_w);
            let d = (((u - mouth_mid.0) / rx).powi(2) + ((v - mouth_mid.1) / ry).powi(2)).sqrt();
            ink = ink.max(((1.0 - d) * ry / px + 0.5).clamp(0.0, 1.0));
        } else {
            let d = polyline_distance((u, v), &mouth);
            ink = ink.max(((0.07 * mouth_w - d) / px + 0.5).clamp(0.0, 1.0));
        }
        if let Some((drop, lift)) = brows {
            for (i, (ex, ey)) in eyes.into_iter().enumerate() {
                let by = ey - 0.25 * span - lift * span;
                let inward = if i == 0 { 1.0 } else { -1.0 };
                let outer = (ex - inward * 0.18 * span, by);
                let inner = (ex + inward * 0.18 * span, by + drop * span);
                let d = polyline_distance((u, v), &[outer, inner]);
                ink = ink.max(((0.035 * span - d) / px + 0.5).clamp(0.0, 1.0));
            }
        }
        let mut out = [0u8; 4];
        for c in 0..3 {
            out[c] = (face[c] as f32 * (1.0 - ink) + EMOJI_INK[c] as f32 * ink).round() as u8;
        }
        out[3] = (alpha * 255.0).round() as u8;
        out
    })
    .expect("positive size")
}

/// 1280x720-style RGB frame with one face; returns the frame and face box.
pub fn video_frame(width: u32, height: u32, seed: u64) -> (Image, FaceBox) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = background(width, height, &mut rng);
    let min_side = width.min(height) as f32;
    let size = rng.random_range(0.25..0.45) * min_side;
    let truth = FaceBox::new(
        rng.random_range(0.0..(width as f32 - size)).round(),
        rng.random_range(0.0..(height as f32 - size)).round(),
        size.round(),
        size.round(),
        0.0,
    );
    draw_face(
        &mut c,
        truth.x,
        truth.y,
        truth.w,
        &FaceStyle::random(&mut rng),
    );
    (c.to_rgb([1.0, 0.86, 0.74]), truth)
}
