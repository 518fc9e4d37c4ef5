pub mod episode;
pub mod scenario;
pub mod sim;
pub mod studies;
pub mod sweep;
pub mod task;
