use serde::{Deserialize, Serialize};

use crate::error::{Result, SaddleError};
use crate::linalg::Vector;
use crate::potentials::Surface;

/// Coefficients `(α_s, β_s)` for one subset `s` of direction indices (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetCoefficient {
    pub subset: Vec<usize>,
    pub alpha: f64,
    pub beta: f64,
}

/// Subset-indexed coefficients; subsets not listed have `α_s = β_s = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMCoefficients {
    pub terms: Vec<SubsetCoefficient>,
}

impl IndexMCoefficients {
    /// `β = 2` on the full set, everything else zero.
    pub fn minimal(m: usize) -> Self {
        IndexMCoefficients {
            terms: vec![SubsetCoefficient { subset: (0..m).collect(), alpha: 0.0, beta: 2.0 }],
        }
    }

    /// The index-1 pair `(α, β)` on the single subset `{0}`.
    pub fn single(alpha: f64, beta: f64) -> Self {
        IndexMCoefficients { terms: vec![SubsetCoefficient { subset: vec![0], alpha, beta }] }
    }

    pub fn sum(&self) -> f64 {
        self.terms.iter().map(|t| t.alpha + t.beta).sum()
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let mut seen: Vec<Vec<usize>> = Vec::new();
        for t in &self.terms {
            let mut s = t.subset.clone();
            s.sort_unstable();
            s.dedup();
            if s.is_empty() || s.len() != t.subset.len() || s.iter().any(|&i| i >= m) {
                return Err(SaddleError::InvalidParameter(format!(
                    "subset {:?} is not a nonempty subset of 0..{m}",
                    t.subset
                )));
            }
            if seen.contains(&s) {
                return Err(SaddleError::InvalidParameter(format!("subset {s:?} listed twice")));
            }
            if !(t.alpha.is_finite() && t.beta.is_finite()) {
                return Err(SaddleError::InvalidParameter("non-finite coefficient".into()));
            }
            seen.push(s);
        }
        let sum = self.sum();
        if sum > 1.0 {
            Ok(())
        } else {
            Err(SaddleError::CoefficientCondition { sum })
        }
    }
}

#[derive(Debug, Clone)]
pub(super) struct IndexM {
    dirs: Vec<Vector>,
    terms: Vec<SubsetCoefficient>,
    alpha_total: f64,
}

impl IndexM {
    pub fn new(dirs: Vec<Vector>, c: &IndexMCoefficients) -> Self {
        let terms: Vec<_> = c
            .terms
            .iter()
            .filter(|t| t.alpha != 0.0 || t.beta != 0.0)
            .cloned()
            .collect();
        let alpha_total = terms.iter().map(|t| t.alpha).sum();
        IndexM { dirs, terms, alpha_total }
    }

    /// `Π_s w`.
    fn project(&self, subset: &[usize], w: &Vector) -> Vector {
        let mut out = Vector::zeros(w.len());
        for &i in subset {
            let v = &self.dirs[i];
            out.axpy(v.dot(w), v, 1.0);
        }
        out
    }

    pub fn value(&self, pot: &dyn Surface, x: &Vector, y: &Vector) -> f64 {
        let dy = y - x;
        let mut l = 0.0;
        if self.alpha_total != 1.0 {
            l += (1.0 - self.alpha_total) * pot.energy(y);
        }
        for t in &self.terms {
            let p = self.project(&t.subset, &dy);
            if t.alpha != 0.0 {
                l += t.alpha * pot.energy(&(y - &p));
            }
            if t.beta != 0.0 {
                l -= t.beta * pot.energy(&(x + &p));
            }
        }
        l
    }

    pub fn gradient(&self, pot: &dyn Surface, x: &Vector, y: &Vector) -> Vector {
        let dy = y - x;
        let mut g = Vector::zeros(y.len());
        if self.alpha_total != 1.0 {
            g.axpy(1.0 - self.alpha_total, &pot.gradient(y), 1.0);
        }
        for t in &self.terms {
            let p = self.project(&t.subset, &dy);
            if t.alpha != 0.0 {
                let g1 = pot.gradient(&(y - &p));
                let proj = self.project(&t.subset, &g1);
                g.axpy(t.alpha, &(g1 - proj), 1.0);
            }
            if t.beta != 0.0 {
                let g2 = pot.gradient(&(x + &p));
                g.axpy(-t.beta, &self.project(&t.subset, &g2), 1.0);
            }
        }
        g
    }

    pub fn hessian_vec(&self, pot: &dyn Surface, x: &Vector, y: &Vector, u: &Vector) -> Vector {
        let dy = y - x;
        let mut out = Vector::zeros(y.len());
        if self.alpha_total != 1.0 {
            out.axpy(1.0 - self.alpha_total, &pot.hessian_vec(y, u), 1.0);
        }
        for t in &self.terms {
            let p = self.project(&t.subset, &dy);
            let pu = self.project(&t.subset, u);
            if t.alpha != 0.0 {
                let w = u - &pu;
                let hw = pot.hessian_vec(&(y - &p), &w);
                let proj = self.project(&t.subset, &hw);
                out.axpy(t.alpha, &(hw - proj), 1.0);
            }
            if t.beta != 0.0 {
                let hw = pot.hessian_vec(&(x + &p), &pu);
                out.axpy(-t.beta, &self.project(&t.subset, &hw), 1.0);
            }
        }
        out
    }
}
