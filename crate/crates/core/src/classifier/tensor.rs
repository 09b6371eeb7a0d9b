use super::Scalar;
use crate::dataset::ExampleTensor;
use crate::{Error, Result};

/// Dense NHWC tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4<F> {
    shape: [usize; 4],
    data: Vec<F>,
}

impl<F: Scalar> Tensor4<F> {
    pub fn new(shape: [usize; 4], data: Vec<F>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            shape,
            data: vec![F::zero(); shape.iter().product()],
        }
    }

    /// Stacks preprocessed examples into one batch.
    pub fn from_examples<'a>(examples: impl IntoIterator<Item = &'a ExampleTensor>) -> Result<Self> {
        let mut data = Vec::new();
        let mut n = 0;
        let mut hw = None;
        for ex in examples {
            match hw {
                None => hw = Some((ex.height, ex.width)),
                Some(s) if s != (ex.height, ex.width) => {
                    return Err(Error::ShapeMismatch(format!(
                        "example of {}x{} in a batch of {}x{}",
                        ex.height, ex.width, s.0, s.1
                    )))
                }
                _ => {}
            }
            data.extend(ex.data.iter().map(|&v| F::of(v as f64)));
            n += 1;
        }
        let (h, w) = hw.unwrap_or((0, 0));
        Self::new([n, h, w, 3], data)
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    /// Values of sample `i`, shape `(h, w, c)`.
    pub fn sample(&self, i: usize) -> &[F] {
        let len = self.shape[1] * self.shape[2] * self.shape[3];
        &self.data[i * len..(i + 1) * len]
    }

    /// Reorders the batch dimension: sample `k` of the result is sample
    /// `order[k]` of `self`.
    pub fn permute_batch(&self, order: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for &i in order {
            data.extend_from_slice(self.sample(i));
        }
        Self {
            shape: [order.len(), self.shape[1], self.shape[2], self.shape[3]],
            data,
        }
    }
}
