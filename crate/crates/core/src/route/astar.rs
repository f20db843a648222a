use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};

use crate::scene::{Cell, OccupancyGrid};

fn manhattan(a: Cell, b: Cell) -> usize {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
}

fn neighbors4(grid: &OccupancyGrid, c: Cell) -> impl Iterator<Item = Cell> + '_ {
    let (r, col) = (c.0 as i64, c.1 as i64);
    [(r + 1, col), (r - 1, col), (r, col + 1), (r, col - 1)]
        .into_iter()
        .filter(|&(nr, nc)| nr >= 0 && nc >= 0)
        .map(|(nr, nc)| (nr as usize, nc as usize))
        .filter(move |&n| grid.is_free(n))
}

/// A* over free cells, 4-connected, with the Manhattan distance to the
/// nearest goal as heuristic. Open-set ties go to the smaller (row, col).
/// Returns the cell path including both endpoints.
pub fn astar_path(grid: &OccupancyGrid, start: Cell, goals: &[Cell]) -> Option<Vec<Cell>> {
    if !grid.is_free(start) || goals.is_empty() {
        return None;
    }
    let goal_set: HashSet<Cell> = goals.iter().copied().collect();
    let h = |c: Cell| goals.iter().map(|g| manhattan(c, *g)).min().unwrap_or(0);

    let mut open = BinaryHeap::new();
    let mut g_score: HashMap<Cell, usize> = HashMap::new();
    let mut came_from: HashMap<Cell, Cell> = HashMap::new();
    let mut closed: HashSet<Cell> = HashSet::new();
    g_score.insert(start, 0);
    open.push(Reverse((h(start), start)));

    while let Some(Reverse((_, cell))) = open.pop() {
        if !closed.insert(cell) {
            continue;
        }
        if goal_set.contains(&cell) {
            let mut path = vec![cell];
            let mut cur = cell;
            while let Some(prev) = came_from.get(&cur) {
                path.push(*prev);
                cur = *prev;
            }
            path.reverse();
            return Some(path);
        }
        let g = g_score[&cell];
        for next in neighbors4(grid, cell) {
            if closed.contains(&next) {
                continue;
            }
            let tentative = g + 1;
            if g_score.get(&next).is_none_or(|&old| tentative < old) {
                g_score.insert(next, tentative);
                came_from.insert(next, cell);
                open.push(Reverse((tentative + h(next), next)));
            }
        }
    }
    None
}

/// Breadth-first shortest path length in moves, used as a reference.
pub fn bfs_path_len(grid: &OccupancyGrid, start: Cell, goals: &[Cell]) -> Option<usize> {
    if !grid.is_free(start) {
        return None;
    }
    let goal_set: HashSet<Cell> = goals.iter().copied().collect();
    let mut dist: HashMap<Cell, usize> = HashMap::from([(start, 0)]);
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        if goal_set.contains(&c) {
            return Some(dist[&c]);
        }
        for n in neighbors4(grid, c) {
            if !dist.contains_key(&n) {
                dist.insert(n, dist[&c] + 1);
                queue.push_back(n);
            }
        }
    }
    None
}
