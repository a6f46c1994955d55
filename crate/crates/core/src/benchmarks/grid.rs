//! Grid-world families.
//!
//! Cells are `r{row}c{col}` states with four deterministic moves; bumping
//! into a wall or the border stays put and the goal is absorbing. Each
//! family draws a layout, then perturbs the walls seen by the user's model.
//! A cell walled in only one model is still a state; in that model it is
//! never entered and self-loops.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BenchmarkInstance, CellKind, Family, GenerationError, Layout};
use crate::expectation::ExpectationSet;
use crate::formulation::{is_human_sufficient, FormulationParams};
use crate::mdp::{Domain, RewardFunction};

pub const GRID_GAMMA: f64 = 0.95;
pub const MAX_ATTEMPTS: usize = 20;

const MOVES: [(&str, isize, isize); 4] = [("up", -1, 0), ("down", 1, 0), ("left", 0, -1), ("right", 0, 1)];

struct Grid {
    w: usize,
    h: usize,
    robot_wall: Vec<bool>,
    human_wall: Vec<bool>,
    kind: Vec<CellKind>,
    start: usize,
    goal: usize,
    forbidden: Vec<usize>,
}

impl Grid {
    fn new(w: usize, h: usize) -> Self {
        Self {
            w,
            h,
            robot_wall: vec![false; w * h],
            human_wall: vec![false; w * h],
            kind: vec![CellKind::Floor; w * h],
            start: 0,
            goal: 0,
            forbidden: Vec::new(),
        }
    }

    fn idx(&self, r: usize, c: usize) -> usize {
        r * self.w + c
    }

    fn rc(&self, i: usize) -> (usize, usize) {
        (i / self.w, i % self.w)
    }

    fn set_wall(&mut self, i: usize) {
        self.robot_wall[i] = true;
        self.human_wall[i] = true;
        self.kind[i] = CellKind::Wall;
    }

    fn open_both(&self, i: usize) -> bool {
        !self.robot_wall[i] && !self.human_wall[i]
    }

    fn on_border(&self, i: usize) -> bool {
        let (r, c) = self.rc(i);
        r == 0 || c == 0 || r + 1 == self.h || c + 1 == self.w
    }

    fn step(&self, i: usize, (dr, dc): (isize, isize)) -> Option<usize> {
        let (r, c) = self.rc(i);
        let nr = r.checked_add_signed(dr)?;
        let nc = c.checked_add_signed(dc)?;
        (nr < self.h && nc < self.w).then(|| self.idx(nr, nc))
    }

    /// BFS distances from `from` through cells where `blocked` is false.
    fn distances(&self, blocked: &[bool], from: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.w * self.h];
        if blocked[from] {
            return dist;
        }
        dist[from] = Some(0);
        let mut queue = VecDeque::from([from]);
        while let Some(i) = queue.pop_front() {
            let d = dist[i].unwrap();
            for &(_, dr, dc) in &MOVES {
                if let Some(n) = self.step(i, (dr, dc)) {
                    if !blocked[n] && dist[n].is_none() {
                        dist[n] = Some(d + 1);
                        queue.push_back(n);
                    }
                }
            }
        }
        dist
    }

    fn human_connected(&self) -> bool {
        self.distances(&self.human_wall, self.start)[self.goal].is_some()
    }

    /// Cells on at least one shortest start-goal path of the user's model.
    fn human_shortest_path_cells(&self) -> Vec<bool> {
        let from_start = self.distances(&self.human_wall, self.start);
        let from_goal = self.distances(&self.human_wall, self.goal);
        let Some(total) = from_start[self.goal] else {
            return vec![false; self.w * self.h];
        };
        from_start
            .iter()
            .zip(&from_goal)
            .map(|(a, b)| matches!((a, b), (Some(a), Some(b)) if a + b == total))
            .collect()
    }

    /// Structural checks; the error string explains the rejection.
    fn check(&self) -> Result<(), String> {
        if self.start == self.goal {
            return Err("start and goal coincide".into());
        }
        if !self.open_both(self.start) || !self.open_both(self.goal) {
            return Err("start or goal is walled".into());
        }
        if !self.human_connected() {
            return Err("goal unreachable in the user's model".into());
        }
        let on_path = self.human_shortest_path_cells();
        if let Some(&f) = self
            .forbidden
            .iter()
            .find(|&&f| on_path[f] || f == self.start || f == self.goal)
        {
            return Err(format!(
                "forbidden cell {:?} lies on a shortest path of the user's model",
                self.rc(f)
            ));
        }
        let mut blocked = self.robot_wall.clone();
        for &f in &self.forbidden {
            blocked[f] = true;
        }
        if self.distances(&blocked, self.start)[self.goal].is_none() {
            return Err("goal unreachable in the agent's model without forbidden cells".into());
        }
        Ok(())
    }

    fn into_instance(self, family: Family, seed: u64) -> BenchmarkInstance {
        let cells: Vec<usize> = (0..self.w * self.h)
            .filter(|&i| !(self.robot_wall[i] && self.human_wall[i]))
            .collect();
        let mut state_of = vec![usize::MAX; self.w * self.h];
        for (s, &i) in cells.iter().enumerate() {
            state_of[i] = s;
        }
        let names: Vec<String> = cells
            .iter()
            .map(|&i| {
                let (r, c) = self.rc(i);
                format!("r{r}c{c}")
            })
            .collect();
        let actions: Vec<String> = MOVES.iter().map(|m| m.0.to_string()).collect();
        let kernel = |walls: &[bool]| {
            let mut triples = Vec::with_capacity(cells.len() * MOVES.len());
            for (s, &i) in cells.iter().enumerate() {
                for (a, &(_, dr, dc)) in MOVES.iter().enumerate() {
                    let next = if i == self.goal || walls[i] {
                        i
                    } else {
                        match self.step(i, (dr, dc)) {
                            Some(n) if !walls[n] => n,
                            _ => i,
                        }
                    };
                    triples.push((s, a, state_of[next], 1.0));
                }
            }
            triples
        };
        let start = state_of[self.start];
        let robot = Domain::new(
            names.clone(),
            actions.clone(),
            GRID_GAMMA,
            start,
            kernel(&self.robot_wall),
        )
        .expect("grid kernel is deterministic");
        let human = Domain::new(names, actions, GRID_GAMMA, start, kernel(&self.human_wall))
            .expect("grid kernel is deterministic");
        let mut per_state = vec![0.0; cells.len()];
        per_state[state_of[self.goal]] = 1.0;
        let reward = RewardFunction::state_based(MOVES.len(), &per_state).expect("finite");
        let ground_truth =
            ExpectationSet::from_sets(self.forbidden.iter().map(|&f| state_of[f]), [state_of[self.goal]]);

        let mut kinds = self.kind.clone();
        kinds[self.start] = CellKind::Start;
        kinds[self.goal] = CellKind::Goal;
        let layout = Layout {
            width: self.w,
            height: self.h,
            cells: (0..self.w * self.h)
                .map(|i| {
                    let (r, c) = self.rc(i);
                    (r, c, kinds[i])
                })
                .collect(),
        };
        BenchmarkInstance {
            name: format!("{family}-{}x{}-s{seed}", self.w, self.h),
            seed,
            robot_domain: robot,
            human_domain: human,
            reward,
            ground_truth,
            layout: Some(layout),
        }
    }
}

fn rng_for(family: Family, w: usize, h: usize, seed: u64, attempt: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8] = family as u8;
    key[9..17].copy_from_slice(&(w as u64).to_le_bytes());
    key[17..25].copy_from_slice(&(h as u64).to_le_bytes());
    key[25..29].copy_from_slice(&(attempt as u32).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[T]) -> Result<T, String> {
    items
        .choose(rng)
        .copied()
        .ok_or_else(|| "no candidate cell".to_string())
}

/// Picks a border start and a goal in a different row and column.
fn place_start_goal(g: &mut Grid, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let open: Vec<usize> = (0..g.w * g.h)
        .filter(|&i| g.open_both(i) && g.kind[i] == CellKind::Floor)
        .collect();
    let border: Vec<usize> = open.iter().copied().filter(|&i| g.on_border(i)).collect();
    g.start = pick(rng, &border)?;
    let (sr, sc) = g.rc(g.start);
    let min_dist = (g.w + g.h) / 3;
    let far: Vec<usize> = open
        .iter()
        .copied()
        .filter(|&i| {
            let (r, c) = g.rc(i);
            r != sr && c != sc && r.abs_diff(sr) + c.abs_diff(sc) >= min_dist
        })
        .collect();
    g.goal = pick(rng, &far)?;
    Ok(())
}

/// Marks up to `count` floor cells off every shortest path of the user's
/// model as forbidden.
fn place_hazards(g: &mut Grid, rng: &mut ChaCha8Rng, count: usize, kind: CellKind) -> Result<(), String> {
    for _ in 0..count {
        let on_path = g.human_shortest_path_cells();
        let candidates: Vec<usize> = (0..g.w * g.h)
            .filter(|&i| g.open_both(i) && g.kind[i] == CellKind::Floor && !on_path[i] && i != g.start && i != g.goal)
            .collect();
        let f = pick(rng, &candidates)?;
        g.kind[f] = kind;
        g.forbidden.push(f);
    }
    Ok(())
}

/// Closes up to `count` of `cells` in the user's model, skipping any whose
/// closure would disconnect start and goal there.
fn close_for_human(g: &mut Grid, rng: &mut ChaCha8Rng, cells: &mut [usize], count: usize) -> Vec<usize> {
    cells.shuffle(rng);
    let mut closed = Vec::new();
    for &i in cells.iter() {
        if closed.len() == count {
            break;
        }
        g.human_wall[i] = true;
        if g.human_connected() {
            closed.push(i);
        } else {
            g.human_wall[i] = false;
        }
    }
    closed
}

fn walkway(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Result<Grid, String> {
    let mut g = Grid::new(w, h);
    let horizontal = rng.gen_bool(0.5);
    let (len_dim, across_dim) = if horizontal { (w, h) } else { (h, w) };
    let line = rng.gen_range(1..across_dim - 1);
    let len = rng.gen_range(2..=(len_dim - 2).max(2));
    let first = rng.gen_range(0..=len_dim - len);
    for k in first..first + len {
        let i = if horizontal { g.idx(line, k) } else { g.idx(k, line) };
        g.human_wall[i] = true;
        g.kind[i] = CellKind::Walkway;
    }
    place_start_goal(&mut g, rng)?;
    let n = rng.gen_range(1..=2);
    place_hazards(&mut g, rng, n, CellKind::Forbidden)?;
    Ok(g)
}

fn obstacles(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Result<Grid, String> {
    let mut g = Grid::new(w, h);
    for i in 0..w * h {
        if rng.gen_bool(0.15) {
            g.set_wall(i);
        }
    }
    place_start_goal(&mut g, rng)?;
    let diffs = rng.gen_range(1..=3);
    let mut walls: Vec<usize> = (0..w * h).filter(|&i| g.kind[i] == CellKind::Wall).collect();
    let mut free: Vec<usize> = (0..w * h)
        .filter(|&i| g.kind[i] == CellKind::Floor && i != g.start && i != g.goal)
        .collect();
    free.shuffle(rng);
    while walls.len() < diffs {
        let i = free.pop().ok_or("grid too crowded")?;
        g.set_wall(i);
        walls.push(i);
    }
    walls.shuffle(rng);
    for &i in &walls[..diffs] {
        if rng.gen_bool(0.5) {
            // obstacle only in the user's model
            g.robot_wall[i] = false;
            g.kind[i] = CellKind::Floor;
        } else {
            // obstacle only in the agent's model
            g.human_wall[i] = false;
        }
    }
    let n = rng.gen_range(1..=2);
    place_hazards(&mut g, rng, n, CellKind::Forbidden)?;
    Ok(g)
}

fn four_rooms(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Result<Grid, String> {
    let mut g = Grid::new(w, h);
    let (cr, cc) = (h / 2, w / 2);
    for c in 0..w {
        let i = g.idx(cr, c);
        g.set_wall(i);
    }
    for r in 0..h {
        let i = g.idx(r, cc);
        g.set_wall(i);
    }
    let mut doors = vec![
        g.idx(rng.gen_range(0..cr), cc),
        g.idx(rng.gen_range(cr + 1..h), cc),
        g.idx(cr, rng.gen_range(0..cc)),
        g.idx(cr, rng.gen_range(cc + 1..w)),
    ];
    for &d in &doors {
        g.robot_wall[d] = false;
        g.human_wall[d] = false;
        g.kind[d] = CellKind::Door;
    }
    let room = |g: &Grid, i: usize| {
        let (r, c) = g.rc(i);
        (r > cr, c > cc)
    };
    let floor: Vec<usize> = (0..w * h).filter(|&i| g.kind[i] == CellKind::Floor).collect();
    g.start = pick(rng, &floor)?;
    let elsewhere: Vec<usize> = floor
        .iter()
        .copied()
        .filter(|&i| room(&g, i) != room(&g, g.start))
        .collect();
    g.goal = pick(rng, &elsewhere)?;
    let k = rng.gen_range(1..=3);
    g.forbidden = close_for_human(&mut g, rng, &mut doors, k);
    if g.forbidden.is_empty() {
        return Err("no doorway can be closed".into());
    }
    g.forbidden.sort_unstable();
    Ok(g)
}

fn puddle(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Result<Grid, String> {
    let mut g = Grid::new(w, h);
    let vertical = rng.gen_bool(0.5);
    let (across, along) = if vertical { (w, h) } else { (h, w) };
    let at = rng.gen_range(1..across - 1);
    let shifted = if at == 1 || (at + 2 < across && rng.gen_bool(0.5)) {
        at + 1
    } else {
        at - 1
    };
    let len = rng.gen_range(along / 2..along);
    let from_low = rng.gen_bool(0.5);
    let span: Vec<usize> = if from_low {
        (0..len).collect()
    } else {
        (along - len..along).collect()
    };
    for &k in &span {
        let (ri, hi) = if vertical {
            (g.idx(k, at), g.idx(k, shifted))
        } else {
            (g.idx(at, k), g.idx(shifted, k))
        };
        g.robot_wall[ri] = true;
        g.kind[ri] = CellKind::Wall;
        g.human_wall[hi] = true;
    }
    place_start_goal(&mut g, rng)?;
    let (ph, pw) = (rng.gen_range(1..=2), rng.gen_range(1..=2));
    let on_path = g.human_shortest_path_cells();
    let anchors: Vec<usize> = (0..h.saturating_sub(ph - 1))
        .flat_map(|r| (0..w.saturating_sub(pw - 1)).map(move |c| (r, c)))
        .map(|(r, c)| g.idx(r, c))
        .filter(|&i| {
            let (r, c) = g.rc(i);
            (r..r + ph).all(|rr| {
                (c..c + pw).all(|cc| {
                    let j = g.idx(rr, cc);
                    g.open_both(j) && g.kind[j] == CellKind::Floor && !on_path[j] && j != g.start && j != g.goal
                })
            })
        })
        .collect();
    let anchor = pick(rng, &anchors)?;
    let (r, c) = g.rc(anchor);
    for rr in r..r + ph {
        for cc in c..c + pw {
            let j = g.idx(rr, cc);
            g.kind[j] = CellKind::Puddle;
            g.forbidden.push(j);
        }
    }
    Ok(g)
}

fn maze(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Result<Grid, String> {
    let mut g = Grid::new(w, h);
    for i in 0..w * h {
        let (r, c) = g.rc(i);
        if r % 2 == 1 || c % 2 == 1 {
            g.set_wall(i);
        }
    }
    let rooms: Vec<usize> = (0..w * h)
        .filter(|&i| {
            let (r, c) = g.rc(i);
            r % 2 == 0 && c % 2 == 0
        })
        .collect();
    // Passage cell between two rooms two steps apart, if both exist.
    let link = |g: &Grid, i: usize, (dr, dc): (isize, isize)| -> Option<(usize, usize)> {
        let mid = g.step(i, (dr, dc))?;
        let far = g.step(mid, (dr, dc))?;
        Some((mid, far))
    };
    let open = |g: &mut Grid, i: usize| {
        g.robot_wall[i] = false;
        g.human_wall[i] = false;
        g.kind[i] = CellKind::Floor;
    };
    let mut visited = vec![false; w * h];
    let first = pick(rng, &rooms)?;
    visited[first] = true;
    let mut stack = vec![first];
    while let Some(&i) = stack.last() {
        let options: Vec<(usize, usize)> = MOVES
            .iter()
            .filter_map(|&(_, dr, dc)| link(&g, i, (dr, dc)))
            .filter(|&(_, far)| !visited[far])
            .collect();
        match options.choose(rng) {
            Some(&(mid, far)) => {
                open(&mut g, mid);
                visited[far] = true;
                stack.push(far);
            }
            None => {
                stack.pop();
            }
        }
    }
    let mut closed_links: Vec<usize> = rooms
        .iter()
        .flat_map(|&i| [(0, 1), (1, 0)].map(|d| (i, d)))
        .filter_map(|(i, d)| link(&g, i, d).map(|(mid, _)| mid))
        .filter(|&mid| g.kind[mid] == CellKind::Wall)
        .collect();
    closed_links.shuffle(rng);
    let braids = (rooms.len() / 6).max(1).min(closed_links.len());
    for &mid in &closed_links[..braids] {
        open(&mut g, mid);
    }
    g.start = pick(rng, &rooms)?;
    let others: Vec<usize> = rooms.iter().copied().filter(|&i| i != g.start).collect();
    g.goal = pick(rng, &others)?;
    let mut passages: Vec<usize> = (0..w * h)
        .filter(|&i| g.kind[i] == CellKind::Floor && !rooms.contains(&i))
        .collect();
    let k = rng.gen_range(1..=3);
    if close_for_human(&mut g, rng, &mut passages, k).is_empty() {
        return Err("no passage can be closed".into());
    }
    Ok(g)
}

/// Generates one instance with the default attempt limit.
pub fn generate(family: Family, width: usize, height: usize, seed: u64) -> Result<BenchmarkInstance, GenerationError> {
    generate_with_attempts(family, width, height, seed, MAX_ATTEMPTS)
}

/// Draws layouts until one passes every structural check and the user's
/// reward is sufficient for the ground truth in the user's model.
pub fn generate_with_attempts(
    family: Family,
    width: usize,
    height: usize,
    seed: u64,
    attempts: usize,
) -> Result<BenchmarkInstance, GenerationError> {
    let min = match family {
        Family::Maze => 3,
        Family::Walkway | Family::Obstacles => 4,
        Family::FourRooms | Family::Puddle => 5,
    };
    if width < min || height < min {
        return Err(GenerationError::TooSmall {
            family,
            width,
            height,
            min,
        });
    }
    let mut last = String::from("no attempts made");
    for attempt in 0..attempts {
        let mut rng = rng_for(family, width, height, seed, attempt);
        let grid = match family {
            Family::Walkway => walkway(width, height, &mut rng),
            Family::Obstacles => obstacles(width, height, &mut rng),
            Family::FourRooms => four_rooms(width, height, &mut rng),
            Family::Puddle => puddle(width, height, &mut rng),
            Family::Maze => maze(width, height, &mut rng),
        };
        let grid = match grid.and_then(|g| g.check().map(|_| g)) {
            Ok(g) => g,
            Err(reason) => {
                last = reason;
                continue;
            }
        };
        let inst = grid.into_instance(family, seed);
        if is_human_sufficient(
            &inst.human_domain,
            &inst.reward,
            &inst.ground_truth,
            &FormulationParams::default(),
        )? {
            return Ok(inst);
        }
        last = "reward is not sufficient for the ground truth in the user's model".into();
    }
    Err(GenerationError::GenerationFailed {
        family,
        width,
        height,
        seed,
        attempts,
        last,
    })
}
