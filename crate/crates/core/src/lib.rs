pub mod eval;
pub mod learners;
pub mod stattests;
pub mod stream;
pub mod drift;
pub mod ensemble;
pub mod ingest;
pub mod experiment;
