pub mod diagnose;
pub mod factor;
pub mod fit;
pub mod forecast;
pub mod replicate;
pub mod simulate;
