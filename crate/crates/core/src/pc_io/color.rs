//! RGB ↔ YUV conversion.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Linear RGB → YUV transform with 8-bit offsets, plus its exact inverse.
///
/// Luma uses the preset's `kr`/`kb` weights (`kg = 1 − kr − kb`). Chroma is
/// `(B − Y)` and `(R − Y)` scaled into ±127 and offset by 128, so every RGB
/// triple in `[0, 255]³` lands inside `[1, 255]` and the clamp never fires on
/// valid input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColorMatrix {
    rgb_to_yuv: [[f64; 3]; 3],
    yuv_to_rgb: [[f64; 3]; 3],
    offset: [f64; 3],
    preset: ColorPreset,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum ColorPreset {
    /// Full-range ITU-R BT.709.
    #[default]
    Bt709,
    /// Full-range ITU-R BT.601.
    Bt601,
}

const CHROMA_OFFSET: f64 = 128.0;
const CHROMA_EXCURSION: f64 = 127.0;

impl ColorMatrix {
    pub fn bt709() -> Self {
        Self::from_luma_weights(0.2126, 0.0722, ColorPreset::Bt709)
    }

    pub fn bt601() -> Self {
        Self::from_luma_weights(0.299, 0.114, ColorPreset::Bt601)
    }

    pub fn from_preset(preset: ColorPreset) -> Self {
        match preset {
            ColorPreset::Bt709 => Self::bt709(),
            ColorPreset::Bt601 => Self::bt601(),
        }
    }

    fn from_luma_weights(kr: f64, kb: f64, preset: ColorPreset) -> Self {
        let kg = 1.0 - kr - kb;
        // B − Y spans ±255·(1 − kb); R − Y spans ±255·(1 − kr).
        let su = CHROMA_EXCURSION / (255.0 * (1.0 - kb));
        let sv = CHROMA_EXCURSION / (255.0 * (1.0 - kr));
        let fwd = [[kr, kg, kb], [-kr * su, -kg * su, (1.0 - kb) * su], [(1.0 - kr) * sv, -kg * sv, -kb * sv]];
        // R = Y + V'/sv, B = Y + U'/su, G = (Y − kr R − kb B)/kg.
        let r = [1.0, 0.0, 1.0 / sv];
        let b = [1.0, 1.0 / su, 0.0];
        let g = [(1.0 - kr * r[0] - kb * b[0]) / kg, (-kr * r[1] - kb * b[1]) / kg, (-kr * r[2] - kb * b[2]) / kg];
        Self { rgb_to_yuv: fwd, yuv_to_rgb: [r, g, b], offset: [0.0, CHROMA_OFFSET, CHROMA_OFFSET], preset }
    }

    pub fn preset(&self) -> ColorPreset {
        self.preset
    }

    pub fn forward_matrix(&self) -> [[f64; 3]; 3] {
        self.rgb_to_yuv
    }

    pub fn rgb_to_yuv(&self, rgb: [f64; 3]) -> [f64; 3] {
        let m = &self.rgb_to_yuv;
        std::array::from_fn(|i| {
            let v = m[i][0] * rgb[0] + m[i][1] * rgb[1] + m[i][2] * rgb[2] + self.offset[i];
            v.clamp(0.0, 255.0)
        })
    }

    pub fn yuv_to_rgb(&self, yuv: [f64; 3]) -> [f64; 3] {
        let d = [yuv[0] - self.offset[0], yuv[1] - self.offset[1], yuv[2] - self.offset[2]];
        let m = &self.yuv_to_rgb;
        std::array::from_fn(|i| (m[i][0] * d[0] + m[i][1] * d[1] + m[i][2] * d[2]).clamp(0.0, 255.0))
    }
}

impl Default for ColorMatrix {
    fn default() -> Self {
        Self::bt709()
    }
}

/// Converts with the default (BT.709) matrix.
pub fn rgb_to_yuv(rgb: [f64; 3]) -> [f64; 3] {
    ColorMatrix::bt709().rgb_to_yuv(rgb)
}

/// Converts with the default (BT.709) matrix.
pub fn yuv_to_rgb(yuv: [f64; 3]) -> [f64; 3] {
    ColorMatrix::bt709().yuv_to_rgb(yuv)
}

impl fmt::Display for ColorPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColorPreset::Bt709 => "bt709",
            ColorPreset::Bt601 => "bt601",
        })
    }
}

impl FromStr for ColorPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bt709" | "709" => Ok(ColorPreset::Bt709),
            "bt601" | "601" => Ok(ColorPreset::Bt601),
            other => Err(Error::Config(format!("unknown color matrix `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn black_and_white() {
        assert!(close(rgb_to_yuv([0.0; 3]), [0.0, 128.0, 128.0], 1e-9));
        assert!(close(rgb_to_yuv([255.0; 3]), [255.0, 128.0, 128.0], 1e-9));
    }

    #[test]
    fn pure_red_matches_hand_evaluation() {
        // Y = 0.2126·255, U = 128 − 127·0.2126/0.9278, V = 128 + 127.
        let yuv = rgb_to_yuv([255.0, 0.0, 0.0]);
        let expected = [54.213, 128.0 - 127.0 * 0.2126 / 0.9278, 255.0];
        assert!(close(yuv, expected, 1e-9), "{yuv:?}");
        assert!(close(yuv_to_rgb(yuv), [255.0, 0.0, 0.0], 1e-9));
    }

    #[test]
    fn presets_parse() {
        assert_eq!("BT601".parse::<ColorPreset>().unwrap(), ColorPreset::Bt601);
        assert!("srgb".parse::<ColorPreset>().is_err());
    }

    proptest! {
        #[test]
        fn forward_then_inverse_within_half(r in 0.0f64..=255.0, g in 0.0f64..=255.0, b in 0.0f64..=255.0) {
            for m in [ColorMatrix::bt709(), ColorMatrix::bt601()] {
                let yuv = m.rgb_to_yuv([r, g, b]);
                prop_assert!(yuv.iter().all(|v| (0.0..=255.0).contains(v)));
                let back = m.yuv_to_rgb(yuv);
                prop_assert!(close(back, [r, g, b], 0.5), "{:?} -> {:?}", [r, g, b], back);
            }
        }

        #[test]
        fn integer_rgb_survives_rounding(r in 0u8..=255, g in 0u8..=255, b in 0u8..=255) {
            let rgb = [r as f64, g as f64, b as f64];
            let back = yuv_to_rgb(rgb_to_yuv(rgb));
            prop_assert_eq!(back.map(f64::round), rgb);
        }
    }
}
