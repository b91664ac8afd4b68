//! Exhaustive tic-tac-toe game-tree search without memoization.
//!
//! Boards are 9-character strings, row-major, `X`, `O` and `.` for empty.
//! Scores are from the mover's point of view: a win after `p` plies scores
//! `100 - p`, a loss `p - 100`, a draw 0, so quick wins and slow losses are
//! preferred.

use crate::{OracleError, OracleResult};

const LINES: [[usize; 3]; 8] = [
    [0, 1, 2],
    [3, 4, 5],
    [6, 7, 8],
    [0, 3, 6],
    [1, 4, 7],
    [2, 5, 8],
    [0, 4, 8],
    [2, 4, 6],
];

type Grid = [u8; 9];

fn parse(s: &str) -> Result<Grid, OracleError> {
    let chars: Vec<char> = s.chars().collect();
    if chars.len() != 9 {
        return Err(OracleError::IllegalPosition(s.to_string()));
    }
    let mut g = [0u8; 9];
    for (i, c) in chars.iter().enumerate() {
        g[i] = match c {
            '.' => 0,
            'X' => 1,
            'O' => 2,
            _ => return Err(OracleError::IllegalPosition(s.to_string())),
        };
    }
    Ok(g)
}

fn render(g: &Grid) -> String {
    g.iter().map(|c| ['.', 'X', 'O'][*c as usize]).collect()
}

fn line_winner(g: &Grid) -> Vec<u8> {
    LINES
        .iter()
        .filter(|l| g[l[0]] != 0 && g[l[0]] == g[l[1]] && g[l[1]] == g[l[2]])
        .map(|l| g[l[0]])
        .collect()
}

/// Side to move (1 = X, 2 = O) for a legal, unfinished position.
fn mover(g: &Grid) -> Result<u8, OracleError> {
    let x = g.iter().filter(|c| **c == 1).count();
    let o = g.iter().filter(|c| **c == 2).count();
    let illegal = || OracleError::IllegalPosition(render(g));
    if !(x == o || x == o + 1) {
        return Err(illegal());
    }
    if !line_winner(g).is_empty() || x + o == 9 {
        return Err(illegal());
    }
    Ok(if x == o { 1 } else { 2 })
}

fn search(g: &mut Grid, side: u8, plies: i32) -> i32 {
    let mut best = i32::MIN;
    let mut any = false;
    for i in 0..9 {
        if g[i] != 0 {
            continue;
        }
        any = true;
        g[i] = side;
        let value = if !line_winner(g).is_empty() {
            100 - (plies + 1)
        } else if g.iter().all(|c| *c != 0) {
            0
        } else {
            -search(g, 3 - side, plies + 1)
        };
        g[i] = 0;
        best = best.max(value);
    }
    if any {
        best
    } else {
        0
    }
}

/// Every move attaining the best depth-aware score.
pub fn minimax_solve(position: &str) -> Result<OracleResult<Vec<usize>>, OracleError> {
    let mut g = parse(position)?;
    let side = mover(&g)?;
    let mut scored = Vec::new();
    for i in 0..9 {
        if g[i] != 0 {
            continue;
        }
        g[i] = side;
        let value = if !line_winner(&g).is_empty() {
            99
        } else if g.iter().all(|c| *c != 0) {
            0
        } else {
            -search(&mut g, 3 - side, 1)
        };
        g[i] = 0;
        scored.push((i, value));
    }
    let best = scored.iter().map(|s| s.1).max().expect("unfinished board has a move");
    Ok(OracleResult {
        value: scored.iter().filter(|s| s.1 == best).map(|s| s.0).collect(),
        method: "exhaustive game-tree search",
    })
}

/// Game value under optimal play for the side to move: 1 win, 0 draw, -1 loss.
pub fn game_value(position: &str) -> Result<OracleResult<i32>, OracleError> {
    let mut g = parse(position)?;
    let side = mover(&g)?;
    Ok(OracleResult {
        value: search(&mut g, side, 0).signum(),
        method: "exhaustive game-tree search",
    })
}

/// The eight rotations and reflections, as index maps `new[i] = old[map[i]]`.
pub fn symmetries() -> [[usize; 9]; 8] {
    let rot = |i: usize| {
        let (r, c) = (i / 3, i % 3);
        // new (r, c) takes old (2 - c, r)
        (2 - c) * 3 + r
    };
    let flip = |i: usize| {
        let (r, c) = (i / 3, i % 3);
        r * 3 + (2 - c)
    };
    let mut out = [[0usize; 9]; 8];
    for (k, slot) in out.iter_mut().enumerate() {
        for (i, v) in slot.iter_mut().enumerate() {
            let mut j = i;
            if k >= 4 {
                j = flip(j);
            }
            for _ in 0..(k % 4) {
                j = rot(j);
            }
            *v = j;
        }
    }
    out
}

/// Applies an index map from [`symmetries`] to a board string.
pub fn transform(position: &str, map: &[usize; 9]) -> String {
    let chars: Vec<char> = position.chars().collect();
    map.iter().map(|&j| chars[j]).collect()
}

/// Where a move lands under the same index map.
pub fn transform_move(mv: usize, map: &[usize; 9]) -> usize {
    map.iter().position(|&j| j == mv).expect("maps are permutations")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_board_is_a_draw() {
        assert_eq!(game_value(".........").unwrap().value, 0);
    }

    #[test]
    fn immediate_win_is_chosen() {
        assert_eq!(minimax_solve("XX.OO....").unwrap().value, vec![2]);
    }

    #[test]
    fn illegal_counts_rejected() {
        assert!(minimax_solve("XXX......").is_err());
        assert!(minimax_solve("OO.......").is_err());
    }

    #[test]
    fn symmetries_are_distinct_permutations() {
        let s = symmetries();
        for m in &s {
            let mut sorted = m.to_vec();
            sorted.sort();
            assert_eq!(sorted, (0..9).collect::<Vec<_>>());
        }
        for a in 0..8 {
            for b in a + 1..8 {
                assert_ne!(s[a], s[b]);
            }
        }
    }
}
