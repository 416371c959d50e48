pub mod graph;
pub mod runtime;
pub mod bfs;
pub mod compose;
pub mod kgrouping;
pub mod oracle;
pub mod generate;
pub mod experiment;
