//! Deterministic maps applied to a noisy release, with the exact output
//! density of the composed mechanism.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::mechanisms::{ConditionalDensity, Mechanism, MipMechanism};
use crate::noise::CoordinateMarginal;
use crate::rng::StreamRng;
use crate::subset::SubsetMask;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PostProcess {
    /// Keeps one coordinate.
    Projection { coord: usize },
    /// Level 0, 1 or 2 of one coordinate by two increasing cut points.
    Quantize { coord: usize, cuts: [f64; 2] },
    /// `y = B x + b` with `B` invertible, row-major.
    Affine { matrix: Vec<f64>, offset: Vec<f64> },
}

impl PostProcess {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            PostProcess::Projection { coord } => vec![x[*coord]],
            PostProcess::Quantize { coord, cuts } => {
                let v = x[*coord];
                let level = if v < cuts[0] {
                    0.0
                } else if v < cuts[1] {
                    1.0
                } else {
                    2.0
                };
                vec![level]
            }
            PostProcess::Affine { matrix, offset } => {
                let d = offset.len();
                (0..d)
                    .map(|r| offset[r] + (0..d).map(|c| matrix[r * d + c] * x[c]).sum::<f64>())
                    .collect()
            }
        }
    }

    fn label(&self) -> &'static str {
        match self {
            PostProcess::Projection { .. } => "projection",
            PostProcess::Quantize { .. } => "quantize",
            PostProcess::Affine { .. } => "affine",
        }
    }
}

enum Inverse {
    Marginal(CoordinateMarginal),
    Affine(DMatrix<f64>),
}

/// `f(M(train))` for a two-dimensional density-exact MIP mechanism `M`.
pub struct PostProcessed {
    inner: MipMechanism,
    f: PostProcess,
    inverse: Inverse,
    id: String,
}

impl PostProcessed {
    pub fn new(inner: MipMechanism, f: PostProcess) -> Result<Self> {
        let d = inner.spec().dim();
        let inverse = match &f {
            PostProcess::Projection { coord } | PostProcess::Quantize { coord, .. } => {
                if let PostProcess::Quantize { cuts, .. } = &f {
                    if !(cuts[0] < cuts[1]) {
                        return Err(Error::validation("quantization cuts must increase"));
                    }
                }
                Inverse::Marginal(CoordinateMarginal::new(inner.spec(), *coord)?)
            }
            PostProcess::Affine { matrix, offset } => {
                if offset.len() != d || matrix.len() != d * d {
                    return Err(Error::validation("affine map dimensions differ from the release"));
                }
                let b = DMatrix::from_row_slice(d, d, matrix);
                let inv = b
                    .try_inverse()
                    .ok_or_else(|| Error::validation("affine map must be invertible"))?;
                Inverse::Affine(inv)
            }
        };
        let id = format!("{}/{}", f.label(), inner.id());
        Ok(Self { inner, f, inverse, id })
    }

    pub fn inner(&self) -> &MipMechanism {
        &self.inner
    }
}

impl Mechanism for PostProcessed {
    type Output = Vec<f64>;

    fn id(&self) -> &str {
        &self.id
    }

    fn data(&self) -> &DatasetTable {
        self.inner.data()
    }

    fn budget(&self) -> Option<crate::budget::PrivacyBudget> {
        self.inner.budget()
    }

    fn release(&self, train: &SubsetMask, rng: &mut StreamRng) -> Vec<f64> {
        self.f.apply(&self.inner.release(train, rng))
    }
}

impl ConditionalDensity for PostProcessed {
    fn log_density(&self, output: &Vec<f64>, train: &SubsetMask) -> f64 {
        match (&self.f, &self.inverse) {
            (PostProcess::Projection { coord }, Inverse::Marginal(m)) => {
                m.log_pdf(output[0] - self.inner.base_output(train)[*coord])
            }
            (PostProcess::Quantize { coord, cuts }, Inverse::Marginal(m)) => {
                let theta = self.inner.base_output(train)[*coord];
                let lo = m.cdf(cuts[0] - theta);
                let hi = m.cdf(cuts[1] - theta);
                let p = match output[0] as i64 {
                    0 => lo,
                    1 => hi - lo,
                    _ => 1.0 - hi,
                };
                p.max(0.0).ln()
            }
            (PostProcess::Affine { offset, .. }, Inverse::Affine(inv)) => {
                // The Jacobian |det B|^-1 is shared by every mask.
                let y = DVector::from_iterator(offset.len(), output.iter().zip(offset).map(|(o, b)| o - b));
                let x = inv * y;
                self.inner.log_density(&x.iter().copied().collect(), train)
            }
            _ => unreachable!("inverse built to match the map"),
        }
    }
}
