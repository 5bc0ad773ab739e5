use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::frame::ParsingFrame;

/// Label -> RGB color map.
pub type Palette = BTreeMap<u8, [u8; 3]>;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("palette has no entry for label {0}")]
    MissingPaletteEntry(u8),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The palette used by the CLI: black background plus one saturated color
/// per part.
pub fn default_palette() -> Palette {
    let colors: [[u8; 3]; 12] = [
        [0, 0, 0],       // background
        [255, 0, 0],     // head
        [0, 128, 255],   // torso
        [0, 255, 0],     // left-arm
        [0, 160, 0],     // right-arm
        [255, 255, 0],   // left-hand
        [200, 200, 0],   // right-hand
        [255, 0, 255],   // left-leg
        [160, 0, 160],   // right-leg
        [0, 255, 255],   // left-foot
        [0, 170, 170],   // right-foot
        [255, 128, 0],   // dress
    ];
    colors.iter().enumerate().map(|(i, &c)| (i as u8, c)).collect()
}

/// Writes `frame` as a binary PPM (P6) image, one palette color per label.
pub fn render_ppm(frame: &ParsingFrame, palette: &Palette, path: &Path) -> Result<(), RenderError> {
    let bytes = render_ppm_bytes(frame, palette)?;
    std::fs::write(path, bytes).map_err(|source| RenderError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn render_ppm_bytes(frame: &ParsingFrame, palette: &Palette) -> Result<Vec<u8>, RenderError> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.reserve(frame.labels().len() * 3);
    for &l in frame.labels() {
        let rgb = palette.get(&l).ok_or(RenderError::MissingPaletteEntry(l))?;
        out.extend_from_slice(rgb);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_background_renders_black() {
        let frame = ParsingFrame::background(2, 3).unwrap();
        let mut palette = Palette::new();
        palette.insert(0, [0, 0, 0]);
        let bytes = render_ppm_bytes(&frame, &palette).unwrap();
        let header_end = bytes.iter().filter(|&&b| b == b'\n').count();
        assert!(header_end >= 3);
        let pixels = &bytes[bytes.len() - 18..];
        assert!(pixels.iter().all(|&b| b == 0));
    }

    #[test]
    fn payload_is_row_major_rgb() {
        let frame = ParsingFrame::new(2, 2, vec![0, 1, 1, 0]).unwrap();
        let mut palette = Palette::new();
        palette.insert(0, [1, 2, 3]);
        palette.insert(1, [9, 8, 7]);
        let bytes = render_ppm_bytes(&frame, &palette).unwrap();
        let payload = &bytes[bytes.len() - 12..];
        assert_eq!(payload, &[1, 2, 3, 9, 8, 7, 9, 8, 7, 1, 2, 3]);
    }

    #[test]
    fn missing_palette_entry_is_error() {
        let frame = ParsingFrame::new(1, 1, vec![5]).unwrap();
        let palette = Palette::new();
        assert!(matches!(
            render_ppm_bytes(&frame, &palette),
            Err(RenderError::MissingPaletteEntry(5))
        ));
    }

    #[test]
    fn rendering_is_deterministic() {
        let frame = ParsingFrame::new(3, 3, vec![0, 1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        let palette = default_palette();
        let a = render_ppm_bytes(&frame, &palette).unwrap();
        let b = render_ppm_bytes(&frame, &palette).unwrap();
        assert_eq!(a, b);
    }
}
