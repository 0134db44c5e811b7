//! Keypoint text files: `# elf-keypoints v1 W H`, then `x y score` per line.

use std::fmt::Write as _;
use std::path::Path;

use super::Keypoint;
use crate::error::{Error, Result};

const HEADER: &str = "# elf-keypoints v1";

#[derive(Clone, Debug, PartialEq)]
pub struct KeypointFile {
    pub width: usize,
    pub height: usize,
    pub keypoints: Vec<Keypoint>,
}

pub fn format_keypoints(width: usize, height: usize, keypoints: &[Keypoint]) -> String {
    let mut out = format!("{HEADER} {width} {height}\n");
    for k in keypoints {
        let _ = writeln!(out, "{} {} {:.6}", k.x, k.y, k.score);
    }
    out
}

pub fn parse_keypoints(text: &str) -> Result<KeypointFile> {
    let bad = |line: usize, msg: String| Error::Parse { line, msg };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| bad(1, "empty keypoint file".into()))?;
    let rest = header
        .strip_prefix(HEADER)
        .ok_or_else(|| bad(1, format!("expected `{HEADER} W H` header")))?;
    let dims: Vec<usize> = rest
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| bad(1, format!("bad image extent `{t}`")))
        })
        .collect::<Result<_>>()?;
    let [width, height] = dims[..] else {
        return Err(bad(1, "header needs image width and height".into()));
    };
    let mut keypoints = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 3 {
            return Err(bad(i + 1, format!("expected `x y score`, got `{line}`")));
        }
        let x: usize = t[0]
            .parse()
            .map_err(|_| bad(i + 1, format!("bad x `{}`", t[0])))?;
        let y: usize = t[1]
            .parse()
            .map_err(|_| bad(i + 1, format!("bad y `{}`", t[1])))?;
        let score: f64 = t[2]
            .parse()
            .map_err(|_| bad(i + 1, format!("bad score `{}`", t[2])))?;
        if x >= width || y >= height {
            return Err(bad(
                i + 1,
                format!("keypoint ({x}, {y}) outside {width} × {height}"),
            ));
        }
        keypoints.push(Keypoint { x, y, score });
    }
    Ok(KeypointFile {
        width,
        height,
        keypoints,
    })
}

pub fn write_keypoints(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    keypoints: &[Keypoint],
) -> Result<()> {
    std::fs::write(path, format_keypoints(width, height, keypoints))?;
    Ok(())
}

pub fn read_keypoints(path: impl AsRef<Path>) -> Result<KeypointFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    parse_keypoints(&text).map_err(|e| Error::File {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}
