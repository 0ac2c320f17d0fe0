use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::facedetect::FaceBox;

/// The six correspondences used for masking. The philtrum stands in for the
/// nose tip, which sits off the facial plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keypoint {
    LeftEyeOuter,
    RightEyeOuter,
    MouthLeft,
    MouthRight,
    Philtrum,
    Chin,
}

impl Keypoint {
    pub const ALL: [Keypoint; 6] = [
        Keypoint::LeftEyeOuter,
        Keypoint::RightEyeOuter,
        Keypoint::MouthLeft,
        Keypoint::MouthRight,
        Keypoint::Philtrum,
        Keypoint::Chin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Keypoint::LeftEyeOuter => "left_eye_outer",
            Keypoint::RightEyeOuter => "right_eye_outer",
            Keypoint::MouthLeft => "mouth_left",
            Keypoint::MouthRight => "mouth_right",
            Keypoint::Philtrum => "philtrum",
            Keypoint::Chin => "chin",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoordSpace {
    /// Unit square over the emoji image.
    EmojiUnit,
    FramePixels,
}

/// Six named points, stored in [`Keypoint::ALL`] order. Field names double
/// as the sidecar JSON keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeypointSet {
    pub left_eye_outer: [f64; 2],
    pub right_eye_outer: [f64; 2],
    pub mouth_left: [f64; 2],
    pub mouth_right: [f64; 2],
    pub philtrum: [f64; 2],
    pub chin: [f64; 2],
    #[serde(skip, default = "unit_space")]
    pub space: CoordSpace,
}

fn unit_space() -> CoordSpace {
    CoordSpace::EmojiUnit
}

impl KeypointSet {
    pub fn from_points(points: [[f64; 2]; 6], space: CoordSpace) -> Self {
        KeypointSet {
            left_eye_outer: points[0],
            right_eye_outer: points[1],
            mouth_left: points[2],
            mouth_right: points[3],
            philtrum: points[4],
            chin: points[5],
            space,
        }
    }

    pub fn points(&self) -> [[f64; 2]; 6] {
        [
            self.left_eye_outer,
            self.right_eye_outer,
            self.mouth_left,
            self.mouth_right,
            self.philtrum,
            self.chin,
        ]
    }

    pub fn get(&self, k: Keypoint) -> [f64; 2] {
        self.points()[Keypoint::ALL.iter().position(|&p| p == k).unwrap()]
    }

    /// Default emoji keypoints for a circular face, in unit coordinates.
    pub fn default_emoji() -> Self {
        Self::from_points(
            [
                [0.30, 0.42],
                [0.70, 0.42],
                [0.35, 0.70],
                [0.65, 0.70],
                [0.50, 0.62],
                [0.50, 0.95],
            ],
            CoordSpace::EmojiUnit,
        )
    }

    /// Unit-space points scaled to an emoji of `width`x`height` pixels.
    pub fn scaled(&self, width: f64, height: f64) -> Self {
        let mut pts = self.points();
        for p in &mut pts {
            p[0] *= width;
            p[1] *= height;
        }
        Self::from_points(pts, CoordSpace::FramePixels)
    }

    /// Rejects non-finite, coincident, or (near-)collinear triples. Tolerances
    /// scale with the spread of the points.
    pub fn validate(&self) -> Result<()> {
        let pts = self.points();
        if pts.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateConfiguration("non-finite keypoint".into()));
        }
        let spread = pts
            .iter()
            .flat_map(|a| {
                pts.iter()
                    .map(move |b| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
            })
            .fold(0.0, f64::max);
        if spread == 0.0 {
            return Err(Error::DegenerateConfiguration(
                "all keypoints coincide".into(),
            ));
        }
        let names = Keypoint::ALL;
        for i in 0..6 {
            for j in i + 1..6 {
                let d = ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
                if d <= 1e-9 * spread {
                    return Err(Error::DegenerateConfiguration(format!(
                        "{} and {} coincide",
                        names[i].name(),
                        names[j].name()
                    )));
                }
                for k in j + 1..6 {
                    let cross = (pts[j][0] - pts[i][0]) * (pts[k][1] - pts[i][1])
                        - (pts[j][1] - pts[i][1]) * (pts[k][0] - pts[i][0]);
                    if cross.abs() <= 1e-9 * spread * spread {
                        return Err(Error::DegenerateConfiguration(format!(
                            "{}, {} and {} are collinear",
                            names[i].name(),
                            names[j].name(),
                            names[k].name()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn load_sidecar(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let set: KeypointSet = serde_json::from_str(&text)?;
        set.validate()?;
        Ok(set)
    }

    pub fn save_sidecar(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Keypoint positions as fractions of the face box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LandmarkRatios {
    pub left_eye_outer: [f64; 2],
    pub right_eye_outer: [f64; 2],
    pub mouth_left: [f64; 2],
    pub mouth_right: [f64; 2],
    pub philtrum: [f64; 2],
    pub chin: [f64; 2],
}

impl Default for LandmarkRatios {
    fn default() -> Self {
        LandmarkRatios {
            left_eye_outer: [0.18, 0.38],
            right_eye_outer: [0.82, 0.38],
            mouth_left: [0.30, 0.78],
            mouth_right: [0.70, 0.78],
            philtrum: [0.50, 0.72],
            chin: [0.50, 0.98],
        }
    }
}

impl LandmarkRatios {
    fn points(&self) -> [[f64; 2]; 6] {
        [
            self.left_eye_outer,
            self.right_eye_outer,
            self.mouth_left,
            self.mouth_right,
            self.philtrum,
            self.chin,
        ]
    }
}

/// Places each keypoint at `(x + rx·w, y + ry·h)` within the face box.
pub fn proportional_landmarks(face: &FaceBox, ratios: &LandmarkRatios) -> KeypointSet {
    let mut pts = ratios.points();
    for p in &mut pts {
        let (x, y, w, h) = (face.x as f64, face.y as f64, face.w as f64, face.h as f64);
        *p = [x + p[0] * w, y + p[1] * h];
    }
    KeypointSet::from_points(pts, CoordSpace::FramePixels)
}
