//! Ground-truth homographies, greedy matching, repeatability and matching score.

mod homography;
mod matching;
mod metrics;
mod report;

pub use homography::{warp_points, Homography};
pub use matching::{greedy_match, greedy_match_by, Match, MatchSet};
pub use metrics::{
    evaluate_pair, image_space_matches, matching_score, repeatability, warp_visible, ImageSize,
    PairScores, VisibleWarp, DEFAULT_EPS,
};
pub use report::{EvalReport, PairReport};
