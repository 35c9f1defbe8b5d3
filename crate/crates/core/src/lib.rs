pub mod cli;
pub mod complexes;
pub mod derham;
pub mod hochschild;
pub mod limits;
pub mod linalg;
pub mod par;
pub mod presentations;
pub mod rees;
