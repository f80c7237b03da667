//! Small synthetic scenes with known class layout, for tests and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{HsiCube, LabelMap};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockScene {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub classes: usize,
    /// Standard deviation of the additive Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for BlockScene {
    fn default() -> Self {
        Self {
            height: 30,
            width: 30,
            bands: 20,
            classes: 3,
            noise: 0.02,
            seed: 7,
        }
    }
}

impl BlockScene {
    /// Class of a pixel: the image is cut into `classes` vertical stripes.
    pub fn class_at(&self, _row: usize, col: usize) -> u16 {
        (col * self.classes / self.width) as u16 + 1
    }

    /// One random signature per class, entries in `[0.1, 1)`.
    pub fn signatures(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.classes)
            .map(|_| (0..self.bands).map(|_| rng.random_range(0.1..1.0)).collect())
            .collect()
    }

    /// Every pixel is its class signature plus noise; every pixel is labeled.
    pub fn generate(&self) -> (HsiCube, LabelMap) {
        assert!(self.classes >= 1 && self.classes <= self.width);
        let sigs = self.signatures();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(1));
        let normal = Normal::new(0.0, self.noise).expect("noise must be finite and >= 0");
        let mut values = Vec::with_capacity(self.height * self.width * self.bands);
        let mut labels = Vec::with_capacity(self.height * self.width);
        for r in 0..self.height {
            for c in 0..self.width {
                let class = self.class_at(r, c);
                labels.push(class);
                for &s in &sigs[class as usize - 1] {
                    values.push(s + normal.sample(&mut rng));
                }
            }
        }
        let cube = HsiCube::from_pixels(self.height, self.width, self.bands, values)
            .expect("generated cube is consistent");
        let labels = LabelMap::new(self.height, self.width, labels).expect("labels are contiguous");
        (cube, labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_determinism() {
        let s = BlockScene::default();
        let (cube, labels) = s.generate();
        assert_eq!((cube.height(), cube.width(), cube.bands()), (30, 30, 20));
        assert_eq!(labels.class_sizes(), vec![300, 300, 300]);
        assert_eq!(labels.get(0, 9), 1);
        assert_eq!(labels.get(0, 10), 2);
        assert_eq!(labels.get(29, 29), 3);
        let (again, _) = s.generate();
        assert_eq!(cube, again);
    }

    #[test]
    fn noise_free_pixels_equal_signatures() {
        let s = BlockScene { noise: 0.0, ..BlockScene::default() };
        let (cube, labels) = s.generate();
        let sigs = s.signatures();
        let (r, c) = (4, 17);
        assert_eq!(cube.pixel(r, c), &sigs[labels.get(r, c) as usize - 1][..]);
    }
}
