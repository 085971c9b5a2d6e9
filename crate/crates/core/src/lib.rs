pub mod adapt;
pub mod dfn;
pub mod driver;
pub mod estimator;
pub mod geometry;
pub mod mesh;
pub mod minimal_mesh;
pub mod solver;
pub mod vem;
