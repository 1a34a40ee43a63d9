use std::fmt::{Debug, Display};

use num_traits::Float;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar usable for embeddings (`f32`, `f64`).
pub trait Scalar: Float + Debug + Display + Default + Send + Sync + Serialize + DeserializeOwned + 'static {
    fn from_f64(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("finite f64 converts to a float type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where T: Float + Debug + Display + Default + Send + Sync + Serialize + DeserializeOwned + 'static {}
