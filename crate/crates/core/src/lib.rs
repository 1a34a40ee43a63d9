pub mod fixgen;
pub mod golang;
pub mod patch;
pub mod report;
pub mod retrieval;
pub mod skeleton;
pub mod validate;

pub type EmbeddingVector = retrieval::Embedding<f64>;
pub type ExampleEntry = retrieval::Entry<f64>;
pub type ExampleStore = retrieval::Store<f64>;
