pub mod image;
pub mod noise;
pub mod sequence;
pub mod spin;
pub mod verify;
