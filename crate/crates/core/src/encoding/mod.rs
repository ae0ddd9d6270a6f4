//! Datasets and input encodings.
//!
//! Static images enter the network either as Bernoulli rate-coded spike
//! frames (the default) or, in analog mode, as normalized real-valued
//! currents repeated over every timestep.
//!
//! Randomness uses `ChaCha8Rng` seeded with the run seed; each
//! `(epoch, batch)` pair selects its own ChaCha stream
//! (`stream = epoch << 32 | batch`), so encoding a batch never depends on the
//! batches before it and produces the same bits on every platform.

mod idx;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub use idx::{load_idx, load_mnist, read_idx, IdxData, Split};

pub const MNIST_MEAN: f64 = 0.1307;
pub const MNIST_STD: f64 = 0.3081;
pub const DEFAULT_GAIN: f64 = 0.5;

/// Images as rows of `[0, 1]` intensities plus class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `[N, n]`.
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
    /// Normalization used by the analog input mode.
    pub mean: f64,
    pub std: f64,
}

impl Dataset {
    pub fn new(images: Tensor, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if images.ndim() != 2 || images.shape()[0] != labels.len() {
            return Err(Error::Input(format!(
                "{} labels for images of shape {:?}",
                labels.len(),
                images.shape()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Input(format!("label {bad} outside 0..{classes}")));
        }
        Ok(Dataset {
            images,
            labels,
            classes,
            mean: MNIST_MEAN,
            std: MNIST_STD,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.images.shape()[1]
    }

    /// The first `n` samples (all of them if `n` is larger).
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        self.select(&(0..n).collect::<Vec<_>>())
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let w = self.width();
        let mut data = Vec::with_capacity(indices.len() * w);
        for &i in indices {
            data.extend_from_slice(self.images.row(i));
        }
        Dataset {
            images: Tensor::new(vec![indices.len(), w], data).expect("row-major copy"),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ..*self
        }
    }
}

/// How images become per-timestep input frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum InputEncoding {
    /// Bernoulli spikes with `P(spike) = gain · x`.
    Rate { gain: f64 },
    /// `(x − mean) / std` presented unchanged at every step.
    Analog,
}

impl Default for InputEncoding {
    fn default() -> Self {
        InputEncoding::Rate { gain: DEFAULT_GAIN }
    }
}

impl InputEncoding {
    /// `T` frames of shape `[batch, n]` for the rows of `images`.
    pub fn frames(
        &self,
        data: &Dataset,
        images: &Tensor,
        timesteps: usize,
        stream: Stream,
    ) -> Result<Vec<Tensor>> {
        match *self {
            InputEncoding::Rate { gain } => rate_encode(images, timesteps, gain, stream),
            InputEncoding::Analog => Ok(analog_frames(images, timesteps, data.mean, data.std)),
        }
    }
}

/// Position of a batch in the run's random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stream {
    pub seed: u64,
    pub epoch: u32,
    pub batch: u32,
}

impl Stream {
    pub fn new(seed: u64, epoch: u32, batch: u32) -> Self {
        Stream { seed, epoch, batch }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((u64::from(self.epoch) << 32) | u64::from(self.batch));
        rng
    }
}

/// Independent Bernoulli draws: `frames[t][b, j] = 1` with probability
/// `gain · images[b, j]`, sampled in `(t, b, j)` row-major order.
pub fn rate_encode(
    images: &Tensor,
    timesteps: usize,
    gain: f64,
    stream: Stream,
) -> Result<Vec<Tensor>> {
    if !(gain > 0.0) {
        return Err(Error::Parameter(format!(
            "gain must be positive, got {gain}"
        )));
    }
    if let Some(&x) = images.data().iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::Input(format!("pixel {x} outside [0, 1]")));
    }
    let max = images.data().iter().copied().fold(0.0, f64::max);
    if gain * max > 1.0 {
        return Err(Error::Parameter(format!(
            "gain {gain} times pixel {max} is not a probability"
        )));
    }
    let mut rng = stream.rng();
    (0..timesteps)
        .map(|_| {
            // One draw per entry regardless of x keeps streams aligned.
            let data = images
                .data()
                .iter()
                .map(|&x| {
                    if rng.gen::<f64>() < gain * x {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            Tensor::new(images.shape().to_vec(), data)
        })
        .collect()
}

pub fn analog_frames(images: &Tensor, timesteps: usize, mean: f64, std: f64) -> Vec<Tensor> {
    let frame = images.map(|x| (x - mean) / std);
    vec![frame; timesteps]
}

/// Isotropic Gaussian clusters.
///
/// Class `c` is centred on `(−1)^c · e_{⌊c/2⌋ mod dim}`: two classes in two
/// dimensions sit at `(±1, 0)`. Points are drawn class by class from
/// `ChaCha8Rng::seed_from_u64(seed)`.
pub fn make_blobs(
    classes: usize,
    per_class: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if dim == 0 || classes == 0 {
        return Err(Error::Parameter(
            "make_blobs needs dim >= 1 and classes >= 1".into(),
        ));
    }
    let normal =
        Normal::new(0.0, spread).map_err(|e| Error::Parameter(format!("spread {spread}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(classes * per_class * dim);
    let mut labels = Vec::with_capacity(classes * per_class);
    for c in 0..classes {
        let axis = (c / 2) % dim;
        let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
        for _ in 0..per_class {
            for j in 0..dim {
                let centre = if j == axis { sign } else { 0.0 };
                data.push(centre + normal.sample(&mut rng));
            }
            labels.push(c);
        }
    }
    Dataset::new(Tensor::new(vec![labels.len(), dim], data)?, labels, classes)
}

/// Deterministic permutation of `0..n` for one epoch.
pub fn epoch_order(n: usize, seed: u64, epoch: u32) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(u64::from(epoch));
    order.shuffle(&mut rng);
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_pixels_never_spike() {
        let images = Tensor::zeros(&[3, 5]);
        for f in rate_encode(&images, 7, 0.5, Stream::new(1, 0, 0)).unwrap() {
            assert!(f.data().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn saturated_pixel_fires_at_half_rate() {
        let images = Tensor::ones(&[1, 1]);
        let frames = rate_encode(&images, 10_000, 0.5, Stream::new(42, 0, 0)).unwrap();
        let rate = frames.iter().map(|f| f.data()[0]).sum::<f64>() / 1e4;
        assert!((rate - 0.5).abs() < 0.02, "{rate}");
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let images = Tensor::full(&[4, 8], 0.9);
        let a = rate_encode(&images, 3, 0.5, Stream::new(42, 1, 2)).unwrap();
        let b = rate_encode(&images, 3, 0.5, Stream::new(42, 1, 2)).unwrap();
        let c = rate_encode(&images, 3, 0.5, Stream::new(42, 1, 3)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn encoding_rejects_improper_probabilities() {
        let images = Tensor::ones(&[1, 2]);
        assert!(matches!(
            rate_encode(&images, 1, 1.5, Stream::new(0, 0, 0)),
            Err(Error::Parameter(_))
        ));
        assert!(rate_encode(&images, 1, 1.0, Stream::new(0, 0, 0)).is_ok());
    }

    #[test]
    fn analog_mode_normalizes() {
        let images = Tensor::vector(vec![MNIST_MEAN, 1.0])
            .reshape(&[1, 2])
            .unwrap();
        let f = analog_frames(&images, 2, MNIST_MEAN, MNIST_STD);
        assert_eq!(f.len(), 2);
        assert_eq!(f[1].data()[0], 0.0);
        assert!((f[0].data()[1] - (1.0 - 0.1307) / 0.3081).abs() < 1e-15);
    }

    #[test]
    fn blobs_are_deterministic_and_separable() {
        let a = make_blobs(2, 50, 2, 0.1, 3).unwrap();
        assert_eq!(a, make_blobs(2, 50, 2, 0.1, 3).unwrap());
        // Sign of the first coordinate is a perfect classifier.
        for (i, &l) in a.labels.iter().enumerate() {
            let x = a.images.at2(i, 0);
            assert_eq!(l, usize::from(x < 0.0));
        }
        let empty = make_blobs(3, 0, 4, 0.1, 0).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.images.shape(), &[0, 4]);
    }

    #[test]
    fn epoch_order_is_a_permutation() {
        let mut o = epoch_order(100, 42, 3);
        assert_eq!(o, epoch_order(100, 42, 3));
        assert_ne!(o, epoch_order(100, 42, 4));
        o.sort_unstable();
        assert_eq!(o, (0..100).collect::<Vec<_>>());
    }
}
