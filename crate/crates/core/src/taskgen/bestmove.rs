//! Tic-tac-toe best-move task.
//!
//! Every reachable non-terminal position is solved exactly by memoized
//! negamax with a depth-aware score. One example is emitted per (position,
//! legal move) pair, labelled best iff the move attains the position's
//! score: win, and win soonest; failing that draw; failing that lose as late
//! as possible.

use std::collections::HashMap;
use std::sync::OnceLock;

use rand::Rng;

use super::{Dataset, Example};
use crate::error::{LabError, Result};
use crate::rng::{rng_for, shuffle};

pub const BESTMOVE_TASK_ID: &str = "best-move";

/// Own stones, opponent stones and the candidate move, one-hot over 9 cells each.
pub const BESTMOVE_FEATURES: usize = 27;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Empty,
    X,
    O,
}

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

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Board(pub [Cell; 9]);

impl Board {
    pub fn empty() -> Self {
        Board([Cell::Empty; 9])
    }

    /// Parses a 9-character string of `X`, `O` and `.`.
    pub fn parse(s: &str) -> Result<Self> {
        let cells: Vec<Cell> = s
            .chars()
            .map(|c| match c {
                'X' | 'x' => Ok(Cell::X),
                'O' | 'o' => Ok(Cell::O),
                '.' | '-' | ' ' => Ok(Cell::Empty),
                other => Err(LabError::InvalidArgument(format!("bad board character `{other}`"))),
            })
            .collect::<Result<_>>()?;
        let cells: [Cell; 9] = cells
            .try_into()
            .map_err(|_| LabError::InvalidArgument(format!("board `{s}` must have 9 cells")))?;
        Ok(Board(cells))
    }

    pub fn render(&self) -> String {
        self.0
            .iter()
            .map(|c| match c {
                Cell::Empty => '.',
                Cell::X => 'X',
                Cell::O => 'O',
            })
            .collect()
    }

    fn count(&self, cell: Cell) -> usize {
        self.0.iter().filter(|&&c| c == cell).count()
    }

    /// Side to move, or `None` when the stone counts are impossible.
    pub fn to_move(&self) -> Option<Cell> {
        let (x, o) = (self.count(Cell::X), self.count(Cell::O));
        match x.checked_sub(o) {
            Some(0) => Some(Cell::X),
            Some(1) => Some(Cell::O),
            _ => None,
        }
    }

    pub fn winner(&self) -> Option<Cell> {
        LINES.iter().find_map(|l| {
            let c = self.0[l[0]];
            (c != Cell::Empty && c == self.0[l[1]] && c == self.0[l[2]]).then_some(c)
        })
    }

    pub fn is_terminal(&self) -> bool {
        self.winner().is_some() || self.count(Cell::Empty) == 0
    }

    pub fn legal_moves(&self) -> Vec<usize> {
        if self.is_terminal() {
            return Vec::new();
        }
        (0..9).filter(|&i| self.0[i] == Cell::Empty).collect()
    }

    fn play(&self, mv: usize, who: Cell) -> Board {
        let mut next = *self;
        next.0[mv] = who;
        next
    }

    fn code(&self) -> u32 {
        self.0.iter().fold(0, |acc, c| {
            acc * 3
                + match c {
                    Cell::Empty => 0,
                    Cell::X => 1,
                    Cell::O => 2,
                }
        })
    }

    fn check_legal(&self) -> Result<Cell> {
        let side = self
            .to_move()
            .ok_or_else(|| LabError::InvalidArgument(format!("impossible stone counts in {}", self.render())))?;
        if self.is_terminal() {
            return Err(LabError::InvalidArgument(format!("position {} is terminal", self.render())));
        }
        Ok(side)
    }
}

fn other(side: Cell) -> Cell {
    match side {
        Cell::X => Cell::O,
        Cell::O => Cell::X,
        Cell::Empty => Cell::Empty,
    }
}

/// Depth-aware game value for the side to move: a win scores `1 + empty
/// cells left` when it lands, so faster wins (and slower losses) score higher;
/// draws score 0.
fn negamax(board: &Board, side: Cell, memo: &mut HashMap<u32, i8>) -> i8 {
    let empties = board.count(Cell::Empty) as i8;
    if let Some(w) = board.winner() {
        return if w == side { 1 + empties } else { -1 - empties };
    }
    if empties == 0 {
        return 0;
    }
    if let Some(&v) = memo.get(&board.code()) {
        return v;
    }
    let best = (0..9)
        .filter(|&i| board.0[i] == Cell::Empty)
        .map(|i| -negamax(&board.play(i, side), other(side), memo))
        .max()
        .unwrap_or(0);
    memo.insert(board.code(), best);
    best
}

struct Solved {
    positions: Vec<Board>,
    memo: HashMap<u32, i8>,
}

fn solved() -> &'static Solved {
    static TABLE: OnceLock<Solved> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut memo = HashMap::new();
        negamax(&Board::empty(), Cell::X, &mut memo);
        // Breadth-first enumeration gives a stable canonical order.
        let mut positions = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut frontier = vec![Board::empty()];
        seen.insert(Board::empty());
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for b in frontier {
                if b.is_terminal() {
                    continue;
                }
                positions.push(b);
                let side = b.to_move().expect("reachable positions are legal");
                for mv in b.legal_moves() {
                    let child = b.play(mv, side);
                    if seen.insert(child) {
                        next.push(child);
                    }
                }
            }
            frontier = next;
        }
        Solved { positions, memo }
    })
}

/// All reachable non-terminal positions in canonical order.
pub fn legal_nonterminal_positions() -> &'static [Board] {
    &solved().positions
}

/// Moves attaining the position's depth-aware minimax score.
pub fn solve_position(board: &Board) -> Result<Vec<usize>> {
    let side = board.check_legal()?;
    let mut memo = solved().memo.clone();
    let value = negamax(board, side, &mut memo);
    Ok(board
        .legal_moves()
        .into_iter()
        .filter(|&mv| -negamax(&board.play(mv, side), other(side), &mut memo) == value)
        .collect())
}

/// Feature encoding of a candidate move, from the mover's perspective.
pub fn encode_position(board: &Board, mv: usize) -> Result<Vec<f64>> {
    let side = board.check_legal()?;
    if mv >= 9 || board.0[mv] != Cell::Empty {
        return Err(LabError::InvalidArgument(format!("move {mv} is not legal in {}", board.render())));
    }
    let mut x = vec![0.0; BESTMOVE_FEATURES];
    for (i, c) in board.0.iter().enumerate() {
        if *c == side {
            x[i] = 1.0;
        } else if *c != Cell::Empty {
            x[9 + i] = 1.0;
        }
    }
    x[18 + mv] = 1.0;
    Ok(x)
}

fn completes_line(board: &Board, mv: usize, who: Cell) -> bool {
    board.play(mv, who).winner() == Some(who)
}

/// Samples `n_positions` distinct positions and emits one example per legal move.
pub fn gen_bestmove_task(seed: u64, n_positions: usize) -> Result<Dataset> {
    let table = solved();
    if n_positions == 0 {
        return Err(LabError::InvalidTaskSpec("best-move task needs at least one position".into()));
    }
    if n_positions > table.positions.len() {
        return Err(LabError::InvalidTaskSpec(format!(
            "requested {n_positions} positions but only {} legal non-terminal positions exist",
            table.positions.len()
        )));
    }
    let mut order: Vec<usize> = (0..table.positions.len()).collect();
    shuffle(&mut order, &mut rng_for(seed, BESTMOVE_TASK_ID));
    let mut examples = Vec::new();
    let mut concepts = Vec::new();
    for &pos_idx in &order[..n_positions] {
        let board = &table.positions[pos_idx];
        let side = board.check_legal()?;
        let optimal = solve_position(board)?;
        for mv in board.legal_moves() {
            let p = if optimal.contains(&mv) { 1.0 } else { 0.0 };
            let ex = Example::new(encode_position(board, mv)?, vec![1.0 - p, p], pos_idx as u64)?
                .with_meta(format!("board={};move={mv}", board.render()));
            examples.push(ex);
            concepts.push(vec![
                u8::from(completes_line(board, mv, side)),
                u8::from(completes_line(board, mv, other(side))),
            ]);
        }
    }
    Dataset::new(BESTMOVE_TASK_ID, examples)?.with_concepts(
        vec!["wins_immediately".into(), "blocks_immediate_loss".into()],
        concepts,
    )
}

/// Unlabeled (position, played move) encodings from simulated games.
///
/// Both sides play a best move with probability `skill` and a uniformly
/// random legal move otherwise. These records stand in for a corpus of
/// game transcripts and carry no labels.
pub fn gen_game_records(seed: u64, n_games: usize, skill: f64) -> Result<Vec<Vec<f64>>> {
    if !(0.0..=1.0).contains(&skill) {
        return Err(LabError::InvalidArgument(format!("skill {skill} outside [0,1]")));
    }
    let mut rng = rng_for(seed, "best-move/games");
    let mut out = Vec::new();
    for _ in 0..n_games {
        let mut board = Board::empty();
        while !board.is_terminal() {
            let side = board.check_legal()?;
            let pool = if rng.random_bool(skill) {
                solve_position(&board)?
            } else {
                board.legal_moves()
            };
            let mv = pool[rng.random_range(0..pool.len())];
            out.push(encode_position(&board, mv)?);
            board = board.play(mv, side);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn position_table_has_the_known_size() {
        // 5478 reachable positions, 958 of them terminal.
        assert_eq!(legal_nonterminal_positions().len(), 4520);
    }

    #[test]
    fn forced_win_is_labelled_optimal() {
        // X to move, X wins by playing 2.
        let board = Board::parse("XX.OO....").unwrap();
        let optimal = solve_position(&board).unwrap();
        assert!(optimal.contains(&2));
    }

    #[test]
    fn rejects_bad_requests() {
        assert!(gen_bestmove_task(0, 0).is_err());
        assert!(gen_bestmove_task(0, 4521).is_err());
        assert!(solve_position(&Board::parse("XXXOO....").unwrap()).is_err());
        assert!(solve_position(&Board::parse("XXX......").unwrap()).is_err());
    }

    #[test]
    fn empty_board_every_move_draws() {
        assert_eq!(solve_position(&Board::empty()).unwrap(), (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn immediate_win_beats_slower_win() {
        // X can win at 2 now; other moves may also win later but are not best.
        let board = Board::parse("XX.OO...." ).unwrap();
        assert_eq!(solve_position(&board).unwrap(), vec![2]);
    }

    #[test]
    fn groups_are_positions() {
        let ds = gen_bestmove_task(1, 25).unwrap();
        assert_eq!(ds.group_ids().len(), 25);
        assert_eq!(ds.dim(), BESTMOVE_FEATURES);
    }
}
