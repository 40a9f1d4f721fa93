pub mod nodal;
pub mod teacher;
