use serde::{Deserialize, Serialize};

use super::Keypoint;

/// Distance used to decide which neighbours a selected maximum suppresses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NmsMetric {
    /// Square `(2w + 1)²` window.
    #[default]
    Chebyshev,
    /// Disk of radius `w`.
    Euclidean,
}

/// Greedy non-maximum suppression on a row-major `width × height` map.
///
/// Repeatedly emits the largest positive, unsuppressed pixel outside the
/// `border` band (ties: lowest row-major index) and suppresses every pixel
/// within distance `window` of it, until `max_keypoints` are emitted.
pub fn nms(
    map: &[f64],
    width: usize,
    height: usize,
    window: usize,
    border: usize,
    max_keypoints: usize,
    metric: NmsMetric,
) -> Vec<Keypoint> {
    assert_eq!(map.len(), width * height);
    let mut out = Vec::new();
    if max_keypoints == 0 || width <= 2 * border || height <= 2 * border {
        return out;
    }
    let mut candidates: Vec<usize> = (border..height - border)
        .flat_map(|y| (border..width - border).map(move |x| y * width + x))
        .filter(|&i| map[i] > 0.0)
        .collect();
    candidates.sort_by(|&a, &b| map[b].total_cmp(&map[a]).then(a.cmp(&b)));

    let mut suppressed = vec![false; width * height];
    let w = window as isize;
    for idx in candidates {
        if suppressed[idx] {
            continue;
        }
        let (x, y) = (idx % width, idx / width);
        out.push(Keypoint {
            x,
            y,
            score: map[idx],
        });
        if out.len() == max_keypoints {
            break;
        }
        let y0 = (y as isize - w).max(0) as usize;
        let y1 = ((y as isize + w) as usize).min(height - 1);
        let x0 = (x as isize - w).max(0) as usize;
        let x1 = ((x as isize + w) as usize).min(width - 1);
        for yy in y0..=y1 {
            for xx in x0..=x1 {
                let inside = match metric {
                    NmsMetric::Chebyshev => true,
                    NmsMetric::Euclidean => {
                        let dx = xx as isize - x as isize;
                        let dy = yy as isize - y as isize;
                        dx * dx + dy * dy <= w * w
                    }
                };
                if inside {
                    suppressed[yy * width + xx] = true;
                }
            }
        }
    }
    out
}
