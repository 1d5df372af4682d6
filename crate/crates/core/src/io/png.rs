//! PNG conversion for the retargeting pipeline.

use std::path::Path;

use image::{ImageReader, RgbImage};

use crate::apps::{Grid, RgbGrid};
use crate::error::Result;

pub fn load_png(path: &Path) -> Result<RgbGrid> {
    let img = ImageReader::open(path)?.decode()?.to_rgb8();
    let (w, h) = img.dimensions();
    Ok(Grid::from_fn(w as usize, h as usize, |x, y| {
        img.get_pixel(x as u32, y as u32).0
    }))
}

pub fn save_png(path: &Path, grid: &RgbGrid) -> Result<()> {
    let img = RgbImage::from_fn(grid.width() as u32, grid.height() as u32, |x, y| {
        image::Rgb(grid.get(x as usize, y as usize))
    });
    img.save(path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let grid = Grid::from_fn(7, 5, |x, y| [(x * 30) as u8, (y * 40) as u8, 200]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        save_png(&path, &grid).unwrap();
        assert_eq!(load_png(&path).unwrap(), grid);
    }
}
