//! Interactee-aware seam carving.
//!
//! Retargeting removes minimal-energy 8-connected seams, recomputing the
//! luminance gradient energy after every removal. Pixels inside protected
//! boxes (person and predicted interactee) have their gradient energy g
//! rescaled to (g + 5) * 5, which makes seams route around them. Protected
//! box coordinates are tracked through removals so protection stays aligned
//! as the image shrinks.

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// Row-major 2-D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

pub type EnergyMap = Grid<f64>;
pub type RgbGrid = Grid<[u8; 3]>;

impl<T: Copy> Grid<T> {
    pub fn new(width: usize, height: usize, fill: T) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let height = rows.len();
        let width = rows.first().map(|r| r.len()).unwrap_or(0);
        assert!(rows.iter().all(|r| r.len() == width), "ragged rows");
        Self {
            width,
            height,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn transposed(&self) -> Self {
        Grid::from_fn(self.height, self.width, |x, y| self.get(y, x))
    }

    /// Removes one pixel per row; `seam[y]` is the column dropped from row y.
    pub fn remove_vertical_seam(&self, seam: &[usize]) -> Self {
        assert_eq!(seam.len(), self.height, "seam length must equal height");
        assert!(self.width >= 2, "cannot remove a seam from width < 2");
        let mut data = Vec::with_capacity((self.width - 1) * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                if x != seam[y] {
                    data.push(self.get(x, y));
                }
            }
        }
        Self {
            width: self.width - 1,
            height: self.height,
            data,
        }
    }
}

/// Rec. 601 luma of an RGB grid, in [0, 255].
pub fn luminance(image: &RgbGrid) -> Grid<f64> {
    Grid::from_fn(image.width(), image.height(), |x, y| {
        let [r, g, b] = image.get(x, y);
        0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64
    })
}

/// Gradient-magnitude energy: halved absolute central differences in x and
/// y with replicated borders (one-sided differences at the edges).
pub fn gradient_energy(gray: &Grid<f64>) -> EnergyMap {
    assert!(
        gray.width() >= 2 && gray.height() >= 2,
        "energy needs at least a 2x2 image"
    );
    let (w, h) = (gray.width(), gray.height());
    Grid::from_fn(w, h, |x, y| {
        let left = gray.get(x.saturating_sub(1), y);
        let right = gray.get((x + 1).min(w - 1), y);
        let up = gray.get(x, y.saturating_sub(1));
        let down = gray.get(x, (y + 1).min(h - 1));
        (right - left).abs() / 2.0 + (down - up).abs() / 2.0
    })
}

/// Applies the protection transform g -> (g + 5) * 5 once to every pixel
/// whose center lies inside any of the boxes.
pub fn boost_energy(e: &EnergyMap, boxes: &[BoundingBox]) -> EnergyMap {
    Grid::from_fn(e.width(), e.height(), |x, y| {
        let g = e.get(x, y);
        let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
        if boxes.iter().any(|b| b.contains_point(cx, cy)) {
            (g + 5.0) * 5.0
        } else {
            g
        }
    })
}

/// Minimal-energy 8-connected top-to-bottom seam and its total energy.
///
/// Cumulative energy M(x, y) = e(x, y) + min over the three upper
/// neighbors; argmin ties resolve leftmost, both per cell and at the
/// bottom-row selection.
pub fn vertical_seam_with_total(e: &EnergyMap) -> (Vec<usize>, f64) {
    let (w, h) = (e.width(), e.height());
    assert!(w >= 2, "seam search needs width >= 2");

    let mut cost = vec![0.0f64; w * h];
    let mut parent = vec![0usize; w * h];
    for x in 0..w {
        cost[x] = e.get(x, 0);
    }
    for y in 1..h {
        for x in 0..w {
            let lo = x.saturating_sub(1);
            let hi = (x + 1).min(w - 1);
            let mut best = lo;
            for cand in lo + 1..=hi {
                if cost[(y - 1) * w + cand] < cost[(y - 1) * w + best] {
                    best = cand;
                }
            }
            parent[y * w + x] = best;
            cost[y * w + x] = e.get(x, y) + cost[(y - 1) * w + best];
        }
    }

    let mut end = 0;
    for x in 1..w {
        if cost[(h - 1) * w + x] < cost[(h - 1) * w + end] {
            end = x;
        }
    }
    let total = cost[(h - 1) * w + end];

    let mut seam = vec![0usize; h];
    let mut x = end;
    for y in (0..h).rev() {
        seam[y] = x;
        if y > 0 {
            x = parent[y * w + x];
        }
    }
    (seam, total)
}

/// Column index per row of the minimal vertical seam.
pub fn find_min_vertical_seam(e: &EnergyMap) -> Vec<usize> {
    vertical_seam_with_total(e).0
}

/// Tracks a protected box across one vertical seam removal.
///
/// Within the box's row span: a seam passing entirely left of the box
/// shifts it left by one column; a seam touching the box shrinks its width
/// by one (floored at one column); a seam entirely to the right leaves it
/// unchanged.
fn shift_box_for_seam(b: &BoundingBox, seam: &[usize]) -> BoundingBox {
    let rows: Vec<usize> = (0..seam.len())
        .filter(|&y| {
            let cy = y as f64 + 0.5;
            cy >= b.y_min && cy <= b.y_max()
        })
        .collect();
    // A box with no covered rows interacts with the whole seam.
    let cols: Vec<f64> = if rows.is_empty() {
        seam.iter().map(|&c| c as f64 + 0.5).collect()
    } else {
        rows.iter().map(|&y| seam[y] as f64 + 0.5).collect()
    };
    let all_left = cols.iter().all(|&c| c < b.x_min);
    let any_touch = cols.iter().any(|&c| c >= b.x_min && c <= b.x_max());
    if all_left {
        BoundingBox::new(b.x_min - 1.0, b.y_min, b.width, b.height)
    } else if any_touch {
        BoundingBox::new(b.x_min, b.y_min, (b.width - 1.0).max(1.0), b.height)
    } else {
        *b
    }
}

fn carve_width(
    mut image: RgbGrid,
    target_w: usize,
    mut protected: Vec<BoundingBox>,
) -> (RgbGrid, Vec<BoundingBox>) {
    while image.width() > target_w {
        let energy = boost_energy(&gradient_energy(&luminance(&image)), &protected);
        let (seam, total) = vertical_seam_with_total(&energy);
        let removed: f64 = seam
            .iter()
            .enumerate()
            .map(|(y, &x)| energy.get(x, y))
            .sum();
        debug_assert!(
            (removed - total).abs() <= 1e-9 * total.abs().max(1.0),
            "seam DP total must equal the energy removed"
        );
        image = image.remove_vertical_seam(&seam);
        for b in protected.iter_mut() {
            *b = shift_box_for_seam(b, &seam);
        }
    }
    (image, protected)
}

fn transpose_box(b: &BoundingBox) -> BoundingBox {
    BoundingBox::new(b.y_min, b.x_min, b.height, b.width)
}

/// Shrinks an image to exactly (target_w, target_h), removing vertical
/// seams first and then horizontal seams via transposition. Protected
/// boxes keep their energy boost aligned throughout.
pub fn retarget(
    image: &RgbGrid,
    target_w: usize,
    target_h: usize,
    protected: &[BoundingBox],
) -> Result<RgbGrid> {
    if target_w > image.width() || target_h > image.height() {
        return Err(Error::TargetLargerThanSource {
            target_w,
            target_h,
            source_w: image.width(),
            source_h: image.height(),
        });
    }
    let (image, boxes) = carve_width(image.clone(), target_w, protected.to_vec());
    let transposed_boxes: Vec<BoundingBox> = boxes.iter().map(transpose_box).collect();
    let (flipped, _) = carve_width(image.transposed(), target_h, transposed_boxes);
    Ok(flipped.transposed())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn energy_from_rows(rows: Vec<Vec<f64>>) -> EnergyMap {
        Grid::from_rows(rows)
    }

    #[test]
    fn constant_image_zero_energy() {
        let gray = Grid::new(5, 4, 42.0);
        let e = gradient_energy(&gray);
        assert!((0..4).all(|y| (0..5).all(|x| e.get(x, y) == 0.0)));
    }

    #[test]
    fn vertical_step_edge_energy() {
        // Columns 0..2 at 0, columns 3..5 at 10: interior energy h/2 at the edge.
        let gray = Grid::from_fn(6, 4, |x, _| if x < 3 { 0.0 } else { 10.0 });
        let e = gradient_energy(&gray);
        for y in 0..4 {
            assert_eq!(e.get(2, y), 5.0);
            assert_eq!(e.get(3, y), 5.0);
            assert_eq!(e.get(0, y), 0.0);
            assert_eq!(e.get(5, y), 0.0);
        }
    }

    #[test]
    fn energy_transpose_symmetry() {
        let gray = Grid::from_fn(5, 7, |x, y| ((x * 31 + y * 17) % 13) as f64);
        let e = gradient_energy(&gray);
        let et = gradient_energy(&gray.transposed());
        assert_eq!(e.transposed(), et);
    }

    #[test]
    fn boost_formula_values() {
        let e = energy_from_rows(vec![vec![0.0, 1.0, 7.0], vec![0.0, 1.0, 7.0]]);
        let b = BoundingBox::new(0.0, 0.0, 2.0, 2.0);
        let boosted = boost_energy(&e, &[b]);
        assert_eq!(boosted.get(0, 0), 25.0);
        assert_eq!(boosted.get(1, 0), 30.0);
        assert_eq!(boosted.get(2, 0), 7.0);
    }

    #[test]
    fn overlapping_boxes_boost_once() {
        let e = energy_from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        let b = BoundingBox::new(0.0, 0.0, 2.0, 2.0);
        let boosted = boost_energy(&e, &[b, b]);
        assert_eq!(boosted.get(0, 0), 30.0);
    }

    #[test]
    fn planted_zero_column_seam() {
        let e = energy_from_rows(vec![
            vec![9.0, 0.0, 9.0],
            vec![9.0, 0.0, 9.0],
            vec![9.0, 0.0, 9.0],
        ]);
        let (seam, total) = vertical_seam_with_total(&e);
        assert_eq!(seam, vec![1, 1, 1]);
        assert_eq!(total, 0.0);
    }

    #[test]
    fn uniform_map_leftmost_seam() {
        let e = Grid::new(4, 3, 2.0);
        let (seam, total) = vertical_seam_with_total(&e);
        assert_eq!(seam, vec![0, 0, 0]);
        assert_eq!(total, 6.0);
    }

    /// Every 8-connected top-to-bottom path, by recursive enumeration.
    fn brute_force_min_total(e: &EnergyMap) -> f64 {
        fn descend(e: &EnergyMap, x: usize, y: usize, acc: f64, best: &mut f64) {
            let acc = acc + e.get(x, y);
            if y + 1 == e.height() {
                *best = best.min(acc);
                return;
            }
            let lo = x.saturating_sub(1);
            let hi = (x + 1).min(e.width() - 1);
            for nx in lo..=hi {
                descend(e, nx, y + 1, acc, best);
            }
        }
        let mut best = f64::INFINITY;
        for x in 0..e.width() {
            descend(e, x, 0, 0.0, &mut best);
        }
        best
    }

    #[test]
    fn random_grid_matches_exhaustive_minimum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let w = rng.random_range(2..=5);
            let h = rng.random_range(2..=5);
            let e = Grid::from_fn(w, h, |_, _| rng.random_range(0..20) as f64);
            let (_, total) = vertical_seam_with_total(&e);
            assert_eq!(total, brute_force_min_total(&e));
        }
    }

    #[test]
    fn retarget_identity_and_exact_dims() {
        let img = Grid::from_fn(8, 6, |x, y| [(x * 20) as u8, (y * 30) as u8, 7]);
        let same = retarget(&img, 8, 6, &[]).unwrap();
        assert_eq!(same, img);

        let small = retarget(&img, 5, 3, &[]).unwrap();
        assert_eq!((small.width(), small.height()), (5, 3));

        assert!(matches!(
            retarget(&img, 9, 6, &[]),
            Err(Error::TargetLargerThanSource { .. })
        ));
    }

    #[test]
    fn protected_box_survives_carving() {
        // High-contrast content in the protected box, flat elsewhere: the
        // zero-energy stripe outside the box is where the seams must go.
        let marker = [255u8, 0, 0];
        let img = Grid::from_fn(10, 10, |x, y| {
            if (4..7).contains(&x) && (3..7).contains(&y) {
                if (x + y) % 2 == 0 {
                    marker
                } else {
                    [0, 255, 0]
                }
            } else {
                [50, 50, 50]
            }
        });
        let protected = vec![BoundingBox::new(4.0, 3.0, 3.0, 4.0)];
        let marker_count = |g: &RgbGrid| {
            let mut n = 0;
            for y in 0..g.height() {
                for x in 0..g.width() {
                    if g.get(x, y) == marker {
                        n += 1;
                    }
                }
            }
            n
        };
        let before = marker_count(&img);
        let out = retarget(&img, 8, 10, &protected).unwrap();
        assert_eq!((out.width(), out.height()), (8, 10));
        assert_eq!(marker_count(&out), before);
    }

    #[test]
    fn box_tracking_shift_and_shrink() {
        let b = BoundingBox::new(4.0, 0.0, 3.0, 5.0);
        // Seam entirely left: box shifts.
        let left = shift_box_for_seam(&b, &[0, 1, 0, 1, 0]);
        assert_eq!(left, BoundingBox::new(3.0, 0.0, 3.0, 5.0));
        // Seam through the box: width shrinks.
        let through = shift_box_for_seam(&b, &[5, 5, 5, 5, 5]);
        assert_eq!(through, BoundingBox::new(4.0, 0.0, 2.0, 5.0));
        // Seam entirely right: unchanged.
        let right = shift_box_for_seam(&b, &[8, 8, 8, 8, 8]);
        assert_eq!(right, b);
    }
}
