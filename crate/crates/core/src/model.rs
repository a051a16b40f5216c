use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Mat;

/// Linear cost predictor `c = z theta` with `theta` of shape `d x m`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub theta: Mat,
}

impl LinearModel {
    pub fn new(theta: Mat) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidInput("model parameters must be finite".into()));
        }
        Ok(Self { theta })
    }

    pub fn zeros(d: usize, m: usize) -> Self {
        Self {
            theta: Mat::zeros(d, m),
        }
    }

    pub fn features(&self) -> usize {
        self.theta.rows()
    }

    pub fn outputs(&self) -> usize {
        self.theta.cols()
    }

    /// Predicted cost for one context row.
    pub fn predict(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.theta.tr_matvec(z)
    }

    /// `Z theta` for a feature matrix with one context per row.
    pub fn predict_all(&self, z: &Mat) -> Result<Mat> {
        z.matmul(&self.theta)
    }
}

/// On-disk model: parameters plus the feature scale the training data used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub theta: Vec<Vec<f64>>,
    pub feature_scale: f64,
}

impl ModelFile {
    pub fn new(model: &LinearModel, feature_scale: f64) -> Self {
        Self {
            theta: model.theta.to_rows(),
            feature_scale,
        }
    }

    pub fn model(&self) -> Result<LinearModel> {
        LinearModel::new(Mat::from_rows(&self.theta)?)
    }
}
