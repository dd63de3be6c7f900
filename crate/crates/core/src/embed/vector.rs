use serde::{Deserialize, Serialize};

/// A dense embedding. Providers emit unit-norm vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(pub Vec<f32>);

impl EmbeddingVector {
    pub fn zeros(dim: usize) -> Self {
        EmbeddingVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Unit-norm copy; the zero vector stays zero.
    pub fn normalized(&self) -> Self {
        EmbeddingVector(normalized(&self.0))
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        dot(&self.0, &other.0)
    }

    /// Cosine similarity; 0 when either side is the zero vector.
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        cosine(&self.0, &other.0)
    }
}

impl From<Vec<f32>> for EmbeddingVector {
    fn from(v: Vec<f32>) -> Self {
        EmbeddingVector(v)
    }
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

pub fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalized(a: &[f32]) -> Vec<f32> {
    let n = norm(a);
    if n == 0.0 {
        return a.to_vec();
    }
    a.iter().map(|&x| (x as f64 / n) as f32).collect()
}

pub fn normalized_f64(a: &[f64]) -> Vec<f32> {
    let n = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return a.iter().map(|&x| x as f32).collect();
    }
    a.iter().map(|&x| (x / n) as f32).collect()
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}
