//! Built-in track maps. `Square-k` is a `10k x 10k` field with block
//! obstacles; `Ring-k` is an annulus around a central block. Potholes are
//! scattered with a fixed per-map seed so the maps are stable.

use rand::Rng as _;

use crate::rng::{derive_seed, rng};

use super::DomainError;

pub const BUILTIN_TRACKS: [&str; 7] = ["Square-3", "Square-4", "Square-5", "Ring-3", "Ring-4", "Ring-5", "Ring-6"];

const POTHOLE_DENSITY: f64 = 0.08;

/// ASCII text of a built-in map, e.g. `builtin_track("Square-3")`.
pub fn builtin_track(name: &str) -> Result<String, DomainError> {
    let unknown = || DomainError::UnknownInstance(name.to_string());
    let (family, k) = name.split_once('-').ok_or_else(unknown)?;
    let k: usize = k.parse().map_err(|_| unknown())?;
    let grid = match (family.to_ascii_lowercase().as_str(), k) {
        ("square", 3..=5) => square(k),
        ("ring", 3..=6) => ring(k),
        _ => return Err(unknown()),
    };
    Ok(render(grid))
}

type Grid = Vec<Vec<u8>>;

fn walled(n: usize) -> Grid {
    let mut g = vec![vec![b'.'; n]; n];
    for (y, row) in g.iter_mut().enumerate() {
        if y == 0 || y == n - 1 {
            row.fill(b'X');
        }
        row[0] = b'X';
        row[n - 1] = b'X';
    }
    g
}

fn square(k: usize) -> Grid {
    let n = 10 * k;
    let mut g = walled(n);
    for bx in 0..k {
        for by in 0..k {
            if (bx, by) == (0, k - 1) || (bx, by) == (k - 1, 0) {
                continue;
            }
            let (cx, cy) = (10 * bx + 5, 10 * by + 5);
            for row in g.iter_mut().take(cy + 2).skip(cy - 1) {
                for cell in row.iter_mut().take(cx + 2).skip(cx - 1) {
                    *cell = b'X';
                }
            }
        }
    }
    g[n - 2][1] = b'S';
    for row in g.iter_mut().take(3).skip(1) {
        row[n - 3] = b'G';
        row[n - 2] = b'G';
    }
    scatter_potholes(&mut g, 1000 + k as u64);
    g
}

fn ring(k: usize) -> Grid {
    let n = 10 * k;
    let w = n / 4;
    let mut g = walled(n);
    for row in g.iter_mut().take(n - 1 - w).skip(w + 1) {
        for cell in row.iter_mut().take(n - 1 - w).skip(w + 1) {
            *cell = b'X';
        }
    }
    let mid = n / 2;
    g[mid][w / 2 + 1] = b'S';
    g[mid][(n - 1 - w)..(n - 1)].fill(b'G');
    scatter_potholes(&mut g, 2000 + k as u64);
    g
}

fn scatter_potholes(g: &mut Grid, seed: u64) {
    let mut r = rng(derive_seed(seed, 0));
    let n = g.len();
    let (sx, sy) = (0..n)
        .flat_map(|y| (0..n).map(move |x| (x, y)))
        .find(|&(x, y)| g[y][x] == b'S')
        .expect("start placed");
    for (y, row) in g.iter_mut().enumerate() {
        for (x, cell) in row.iter_mut().enumerate() {
            let near_start = x.abs_diff(sx) <= 1 && y.abs_diff(sy) <= 1;
            if *cell == b'.' && !near_start && r.random::<f64>() < POTHOLE_DENSITY {
                *cell = b'P';
            }
        }
    }
}

fn render(g: Grid) -> String {
    let mut out = String::new();
    for row in g {
        out.push_str(std::str::from_utf8(&row).expect("ascii"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::racetrack::TrackMap;

    #[test]
    fn all_builtin_maps_parse() {
        for name in BUILTIN_TRACKS {
            let text = builtin_track(name).unwrap();
            let map: TrackMap = text.parse().unwrap();
            assert!(text.contains('P'), "{name} has potholes");
            assert_eq!(map.to_text(), text);
        }
    }

    #[test]
    fn maps_are_stable() {
        assert_eq!(builtin_track("Ring-4").unwrap(), builtin_track("ring-4").unwrap());
        assert!(builtin_track("Square-9").is_err());
        assert!(builtin_track("Oval-3").is_err());
    }
}
