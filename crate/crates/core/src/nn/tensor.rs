use crate::error::{Error, Result};

/// Rank-4 `f32` tensor in (batch, channel, height, width) order, width fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: [usize; 4],
    data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(dims: [usize; 4]) -> Result<Self> {
        Self::check_dims(dims)?;
        Ok(Tensor {
            dims,
            data: vec![0.0; dims.iter().product()],
        })
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<f32>) -> Result<Self> {
        Self::check_dims(dims)?;
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "dims {dims:?} need {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    fn check_dims(dims: [usize; 4]) -> Result<()> {
        if dims.contains(&0) {
            return Err(Error::ShapeMismatch(format!("zero-sized dims {dims:?}")));
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    pub fn channels(&self) -> usize {
        self.dims[1]
    }

    pub fn height(&self) -> usize {
        self.dims[2]
    }

    pub fn width(&self) -> usize {
        self.dims[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, y: usize, x: usize) -> f32 {
        let [_, cc, h, w] = self.dims;
        self.data[((b * cc + c) * h + y) * w + x]
    }

    /// One (channel, height, width) plane block for batch item `b`.
    pub fn item(&self, b: usize) -> &[f32] {
        let n = self.dims[1] * self.dims[2] * self.dims[3];
        &self.data[b * n..(b + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
