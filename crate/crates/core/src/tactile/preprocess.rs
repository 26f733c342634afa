use super::frame::TactileFrame;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Intensity above which a pixel counts as marker (0..255 scale).
pub const DEFAULT_THRESHOLD: u8 = 180;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Rect { x, y, width, height }
    }

    pub fn full(frame: &TactileFrame) -> Self {
        Rect::new(0, 0, frame.width, frame.height)
    }
}

/// Thresholded crop of a frame. `origin` is the crop's top-left corner in
/// frame pixels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryImage {
    pub origin: (usize, usize),
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryImage {
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Crops `frame` to `crop` and marks pixels strictly brighter than `threshold`.
pub fn preprocess(frame: &TactileFrame, crop: Rect, threshold: u8) -> Result<BinaryImage> {
    if crop.width == 0
        || crop.height == 0
        || crop.x + crop.width > frame.width
        || crop.y + crop.height > frame.height
    {
        return Err(Error::EmptyCrop {
            width: frame.width,
            height: frame.height,
        });
    }
    let mut data = Vec::with_capacity(crop.width * crop.height);
    for y in crop.y..crop.y + crop.height {
        let row = &frame.pixels[y * frame.width + crop.x..y * frame.width + crop.x + crop.width];
        data.extend(row.iter().map(|&p| p > threshold));
    }
    Ok(BinaryImage {
        origin: (crop.x, crop.y),
        width: crop.width,
        height: crop.height,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dark_frame_is_all_false() {
        let f = TactileFrame::new(16, 16);
        let b = preprocess(&f, Rect::full(&f), DEFAULT_THRESHOLD).unwrap();
        assert_eq!(b.count(), 0);
    }

    #[test]
    fn threshold_is_strict() {
        let mut f = TactileFrame::new(4, 1);
        f.set(0, 0, 181);
        f.set(1, 0, 180);
        f.set(2, 0, 255);
        let b = preprocess(&f, Rect::full(&f), DEFAULT_THRESHOLD).unwrap();
        assert_eq!(b.data, vec![true, false, true, false]);
    }

    #[test]
    fn crop_offsets_and_errors() {
        let mut f = TactileFrame::new(10, 10);
        f.set(5, 6, 200);
        let b = preprocess(&f, Rect::new(4, 4, 3, 3), DEFAULT_THRESHOLD).unwrap();
        assert_eq!(b.origin, (4, 4));
        assert!(b.get(1, 2));
        assert_eq!(b.count(), 1);
        assert!(preprocess(&f, Rect::new(0, 0, 0, 5), 180).is_err());
        assert!(preprocess(&f, Rect::new(8, 0, 5, 5), 180).is_err());
    }
}
