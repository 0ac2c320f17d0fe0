mod common;

use emomask::emotion::{EmotionLabel, Smoother};
use emomask::facedetect::{hog_descriptor, nms, FaceBox, HogParams, LinearSvm};
use emomask::geometry::{
    estimate_homography_f64, proportional_landmarks, warp_composite, CoordSpace, Homography,
    KeypointSet, LandmarkRatios, Sampling,
};
use emomask::imagecore::{
    crop, decode_image, encode_image, resize_bilinear, to_grayscale, Channels, Image, ImageFormat,
};
use emomask::nn::{conv2d, parse_parity, serialize_parity, softmax, ParityCase, Tensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn channels() -> impl Strategy<Value = Channels> {
    prop_oneof![
        Just(Channels::Gray1),
        Just(Channels::Rgb3),
        Just(Channels::Rgba4)
    ]
}

fn image(max: u32) -> impl Strategy<Value = Image> {
    (1..=max, 1..=max, channels()).prop_flat_map(|(w, h, c)| {
        proptest::collection::vec(any::<u8>(), (w * h) as usize * c.count())
            .prop_map(move |data| Image::from_raw(w, h, c, data).unwrap())
    })
}

fn face_box() -> impl Strategy<Value = FaceBox> {
    (0f32..200.0, 0f32..200.0, 4f32..80.0, -2f32..4.0)
        .prop_map(|(x, y, s, score)| FaceBox::new(x, y, s, s, score))
}

fn label() -> impl Strategy<Value = EmotionLabel> {
    (0usize..7).prop_map(|i| EmotionLabel::from_index(i).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn resize_stays_within_input_range(img in image(24), w in 1u32..40, h in 1u32..40) {
        let out = resize_bilinear(&img, w, h).unwrap();
        prop_assert_eq!((out.width(), out.height(), out.channels()), (w, h, img.channels()));
        let n = img.channels().count();
        for c in 0..n {
            let vals = img.data().iter().skip(c).step_by(n);
            let (lo, hi) = vals.fold((255u8, 0u8), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            prop_assert!(out.data().iter().skip(c).step_by(n).all(|&v| (lo..=hi).contains(&v)));
        }
    }

    #[test]
    fn grayscale_is_idempotent(img in image(16)) {
        let g = to_grayscale(&img);
        prop_assert_eq!(to_grayscale(&g), g.clone());
        // a gray image expanded to RGB converts back unchanged
        prop_assert_eq!(to_grayscale(&g.to_rgb()), g);
    }

    #[test]
    fn codecs_round_trip(img in image(20)) {
        let png = encode_image(&img, ImageFormat::Png).unwrap();
        prop_assert_eq!(&decode_image(&png, ImageFormat::Png).unwrap(), &img);
        let (fmt, plain) = match img.channels() {
            Channels::Gray1 => (ImageFormat::Pgm, img.clone()),
            _ => (ImageFormat::Ppm, img.to_rgb()),
        };
        let bytes = encode_image(&plain, fmt).unwrap();
        prop_assert_eq!(decode_image(&bytes, fmt).unwrap(), plain);
    }

    #[test]
    fn crop_inside_matches_pixels(img in image(20), x in 0i64..10, y in 0i64..10) {
        let (w, h) = (img.width().saturating_sub(x as u32).max(1), img.height().saturating_sub(y as u32).max(1));
        prop_assume!((x as u32) < img.width() && (y as u32) < img.height());
        let c = crop(&img, x, y, w, h).unwrap();
        prop_assert_eq!(c.pixel(0, 0), img.pixel(x as u32, y as u32));
        prop_assert_eq!(c.pixel(w - 1, h - 1), img.pixel(x as u32 + w - 1, y as u32 + h - 1));
    }

    #[test]
    fn conv_is_linear(seed in any::<u64>(), a in -2f32..2.0, b in -2f32..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x1 = common::random_tensor(&mut rng, [1, 2, 5, 6], 1.0);
        let x2 = common::random_tensor(&mut rng, [1, 2, 5, 6], 1.0);
        let w = common::random_tensor(&mut rng, [3, 2, 3, 3], 0.5);
        let zero = [0.0; 3];
        let mix: Vec<f32> = x1.data().iter().zip(x2.data()).map(|(p, q)| a * p + b * q).collect();
        let lhs = conv2d(&Tensor::from_vec([1, 2, 5, 6], mix).unwrap(), &w, &zero).unwrap();
        let (y1, y2) = (conv2d(&x1, &w, &zero).unwrap(), conv2d(&x2, &w, &zero).unwrap());
        for ((l, p), q) in lhs.data().iter().zip(y1.data()).zip(y2.data()) {
            prop_assert!((l - (a * p + b * q)).abs() <= 1e-4);
        }
    }

    #[test]
    fn conv_commutes_with_translation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, w) = (7, 8);
        let x = common::random_tensor(&mut rng, [1, 1, h, w], 1.0);
        let k = common::random_tensor(&mut rng, [2, 1, 3, 3], 0.5);
        // shift right by one column, zero fill
        let mut shifted = vec![0f32; h * w];
        for r in 0..h {
            for c in 1..w {
                shifted[r * w + c] = x.at(0, 0, r, c - 1);
            }
        }
        let y = conv2d(&x, &k, &[0.1, -0.2]).unwrap();
        let ys = conv2d(&Tensor::from_vec([1, 1, h, w], shifted).unwrap(), &k, &[0.1, -0.2]).unwrap();
        // away from the borders the response shifts with the input
        for o in 0..2 {
            for r in 0..h {
                for c in 2..w - 1 {
                    prop_assert!((ys.at(0, o, r, c) - y.at(0, o, r, c - 1)).abs() <= 1e-5);
                }
            }
        }
    }

    #[test]
    fn softmax_preserves_order(z in proptest::collection::vec(-40f32..40.0, 1..16)) {
        let p = softmax(&z);
        prop_assert!((p.iter().sum::<f32>() - 1.0).abs() <= 1e-5);
        for i in 0..z.len() {
            for j in 0..z.len() {
                if z[i] > z[j] {
                    prop_assert!(p[i] >= p[j]);
                }
            }
        }
    }

    #[test]
    fn hog_ignores_brightness_offset(data in proptest::collection::vec(0u8..200, 64 * 64), off in 0u8..55) {
        let hog = HogParams::default();
        let a = Image::from_raw(64, 64, Channels::Gray1, data.clone()).unwrap();
        let b = Image::from_raw(64, 64, Channels::Gray1, data.iter().map(|v| v + off).collect()).unwrap();
        prop_assert_eq!(hog_descriptor(&a, &hog).unwrap(), hog_descriptor(&b, &hog).unwrap());
    }

    #[test]
    fn hog_descriptor_is_bounded(data in proptest::collection::vec(any::<u8>(), 64 * 64)) {
        let img = Image::from_raw(64, 64, Channels::Gray1, data).unwrap();
        let d = hog_descriptor(&img, &HogParams::default()).unwrap();
        prop_assert!(d.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
    }

    #[test]
    fn nms_is_idempotent(boxes in proptest::collection::vec(face_box(), 0..25), t in 0.1f32..0.7) {
        let once = nms(&boxes, t);
        prop_assert_eq!(nms(&once, t), once.clone());
        for (i, a) in once.iter().enumerate() {
            for b in &once[i + 1..] {
                prop_assert!(a.iou(b) <= t);
            }
        }
    }

    #[test]
    fn iou_is_symmetric_and_bounded(a in face_box(), b in face_box()) {
        let (ab, ba) = (a.iou(&b), b.iou(&a));
        prop_assert!((ab - ba).abs() <= 1e-6 && (0.0..=1.0).contains(&ab));
        prop_assert!((a.iou(&a) - 1.0).abs() <= 1e-5);
    }

    #[test]
    fn homography_inverse_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = Homography::from_rows(common::random_homography(&mut rng)).unwrap();
        let inv = h.inverse().unwrap();
        for p in common::general_position_points(&mut rng, 100.0) {
            let q = inv.apply(h.apply(p).unwrap()).unwrap();
            prop_assert!((q[0] - p[0]).abs() <= 1e-8 && (q[1] - p[1]).abs() <= 1e-8);
        }
    }

    #[test]
    fn estimated_homography_is_scale_normalized(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h0 = common::random_homography(&mut rng);
        let src = common::general_position_points(&mut rng, 200.0);
        let dst = src.map(|p| common::project(&h0, p));
        let h = estimate_homography_f64(&src, &dst).unwrap();
        prop_assert!((h.rows()[2][2] - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn warp_output_is_convex_blend(seed in any::<u64>(), fx in 0f32..40.0, fy in 0f32..40.0, s in 8f32..40.0, lab in label()) {
        let (frame, _) = emomask::synth::video_frame(96, 80, seed);
        let emoji = emomask::synth::render_emoji(lab, 32);
        let face = FaceBox::new(fx, fy, s, s, 0.0);
        let src = emomask::synth::emoji_keypoints().scaled(32.0, 32.0);
        let dst = proportional_landmarks(&face, &LandmarkRatios::default());
        let h = emomask::geometry::estimate_homography(&src, &dst).unwrap();
        let out = warp_composite(&frame, &emoji, &h, Sampling::Bilinear).unwrap();
        let (mut emin, mut emax) = ([255u8; 3], [0u8; 3]);
        for p in emoji.data().chunks_exact(4).filter(|p| p[3] > 0) {
            for c in 0..3 {
                emin[c] = emin[c].min(p[c]);
                emax[c] = emax[c].max(p[c]);
            }
        }
        for y in 0..frame.height() {
            for x in 0..frame.width() {
                let (f, o) = (frame.pixel(x, y), out.pixel(x, y));
                for c in 0..3 {
                    let lo = f[c].min(emin[c]);
                    let hi = f[c].max(emax[c]);
                    prop_assert!((lo..=hi).contains(&o[c]), "pixel ({x},{y}) ch {c}: {} not in [{lo},{hi}]", o[c]);
                }
            }
        }
    }

    #[test]
    fn opaque_warp_is_idempotent(seed in any::<u64>(), tx in -10f64..60.0, ty in -10f64..60.0) {
        let (frame, _) = emomask::synth::video_frame(64, 64, seed);
        let emoji = Image::from_fn(16, 16, Channels::Rgba4, |x, y| [(x * 16) as u8, (y * 16) as u8, 90, 255]).unwrap();
        let h = Homography::from_rows([[1.3, 0.2, tx], [-0.1, 1.1, ty], [0.0, 0.0, 1.0]]).unwrap();
        for sampling in [Sampling::Nearest, Sampling::Bilinear] {
            let once = warp_composite(&frame, &emoji, &h, sampling).unwrap();
            let twice = warp_composite(&once, &emoji, &h, sampling).unwrap();
            // interior pixels are fully covered, so compositing again changes nothing there
            let inv = h.inverse().unwrap();
            for y in 0..64 {
                for x in 0..64 {
                    let [u, v] = inv.apply([x as f64, y as f64]).unwrap();
                    if (1.0..14.0).contains(&u) && (1.0..14.0).contains(&v) {
                        prop_assert_eq!(once.pixel(x, y), twice.pixel(x, y));
                    }
                }
            }
        }
    }

    #[test]
    fn svm_bytes_round_trip(w in proptest::collection::vec(-1f32..1.0, 1..64), b in -1f32..1.0, t in -1f32..1.0) {
        let svm = LinearSvm { weights: w, bias: b, threshold: t };
        prop_assert_eq!(LinearSvm::from_bytes(&svm.to_bytes()).unwrap(), svm);
    }

    #[test]
    fn parity_bytes_round_trip(seed in any::<u64>(), cases in 1usize..4, n in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cases: Vec<ParityCase> = (0..cases)
            .map(|_| ParityCase {
                input: common::random_tensor(&mut rng, [n, 1, 4, 4], 1.0),
                logits: (0..n * 7).map(|i| i as f32 * 0.25 - 1.0).collect(),
            })
            .collect();
        let bytes = serialize_parity(&cases);
        prop_assert_eq!(parse_parity(&bytes, 7).unwrap(), cases);
        prop_assert!(parse_parity(&bytes[..bytes.len() - 1], 7).is_err());
    }

    #[test]
    fn smoother_output_is_window_mode(seq in proptest::collection::vec(label(), 1..40), k in 1usize..8) {
        let mut s = Smoother::new(k);
        for (i, &l) in seq.iter().enumerate() {
            let out = s.push(l);
            let window = &seq[i.saturating_sub(k - 1)..=i];
            prop_assert!(window.contains(&out));
            prop_assert_eq!(out, common::modal(window));
        }
    }
}

#[test]
fn keypoint_sidecar_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.json");
    let k = KeypointSet::from_points(
        [
            [0.3, 0.4],
            [0.7, 0.4],
            [0.35, 0.75],
            [0.65, 0.75],
            [0.5, 0.68],
            [0.5, 0.95],
        ],
        CoordSpace::EmojiUnit,
    );
    k.save_sidecar(&path).unwrap();
    assert_eq!(KeypointSet::load_sidecar(&path).unwrap(), k);
}
