//! Per-cluster visit ordering: hybrid time-energy edge weights over a
//! directed graph, solved as an open-path TSP from the shared start to
//! the shared finish point.
//!
//! Edge weights follow W(i->j) = Q_i * E_ij / Q_ij: the energy of the
//! traversal scaled by how much of point i's data the edge can offload.
//! Legs leaving data-heavy points are steered through well-covered sky.

use crate::channel::best_rate_bps;
use crate::energy::{flight_power_w, max_range_speed};
use crate::scenario::{Point2, Scenario};

/// Simulation time step for edge estimation, seconds.
pub const EDGE_SIM_DT_S: f64 = 0.5;

/// Penalty constant for edges with zero offload capacity, bits.
pub const EPSILON_Q_BITS: f64 = 1.0;

/// Estimated cost of flying one directed edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeEstimate {
    /// Local node ids: 0 = start, 1..=K_i = cluster points, K_i+1 = finish.
    pub from: usize,
    pub to: usize,
    /// Traversal energy at the max-range speed, J.
    pub e_joules: f64,
    /// Offloadable volume along the edge, bits.
    pub q_offloadable_bits: f64,
    /// Routing weight, J.
    pub weight: f64,
}

/// Visit order for one UAV: global cruise-point indices, start and
/// finish implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub uav_id: usize,
    pub order: Vec<usize>,
}

/// Route solver selection; `Auto` picks exact search for small clusters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RouteMethod {
    Auto,
    Exact,
    Heuristic,
}

/// Cluster size up to which `Auto` uses the exact dynamic program.
pub const HELD_KARP_CUTOFF: usize = 14;

/// Estimates one directed edge: the UAV flies the straight line at the
/// max-range speed; transmit power is charged over the traversal (the
/// offload window is the whole edge) and the offloadable volume is the
/// integral of the best-station rate along the line.
pub fn estimate_edge(
    from_id: usize,
    to_id: usize,
    from: Point2,
    from_bits: f64,
    to: Point2,
    scenario: &Scenario,
) -> EdgeEstimate {
    let v_mr = max_range_speed(&scenario.uav.rotor, scenario.uav.v_max_mps);
    edge_with_speed(from_id, to_id, from, from_bits, to, scenario, v_mr, EDGE_SIM_DT_S)
}

#[allow(clippy::too_many_arguments)]
fn edge_with_speed(
    from_id: usize,
    to_id: usize,
    from: Point2,
    from_bits: f64,
    to: Point2,
    scenario: &Scenario,
    v_mr: f64,
    dt_s: f64,
) -> EdgeEstimate {
    let dist = from.dist(to);
    if dist == 0.0 {
        // Coincident endpoints: no flight, no offload window.
        return EdgeEstimate {
            from: from_id,
            to: to_id,
            e_joules: 0.0,
            q_offloadable_bits: 0.0,
            weight: 0.0,
        };
    }
    let total_t = dist / v_mr;
    let steps = (total_t / dt_s).ceil().max(1.0) as usize;
    let step_t = total_t / steps as f64;
    let dir = (to - from) * (1.0 / dist);

    let mut q_offloadable = 0.0;
    for i in 0..steps {
        let along = (i as f64 + 0.5) * step_t * v_mr;
        let pos = from + dir * along;
        q_offloadable +=
            best_rate_bps(pos, &scenario.stations, &scenario.uav, &scenario.channel) * step_t;
    }

    let e_joules =
        (flight_power_w(v_mr, &scenario.uav.rotor) + scenario.uav.tx_power_w) * total_t;
    let weight = if from_bits == 0.0 {
        0.0
    } else if q_offloadable == 0.0 {
        e_joules * (1.0 + from_bits / EPSILON_Q_BITS)
    } else {
        from_bits * e_joules / q_offloadable
    };
    EdgeEstimate {
        from: from_id,
        to: to_id,
        e_joules,
        q_offloadable_bits: q_offloadable,
        weight,
    }
}

/// Dense weight table for one cluster.
///
/// Node 0 is the start, nodes 1..=n the cluster points in the order
/// given, node n+1 the finish.
pub struct EdgeTable {
    pub n: usize,
    pub edges: Vec<Vec<EdgeEstimate>>,
}

impl EdgeTable {
    pub fn weight(&self, a: usize, b: usize) -> f64 {
        self.edges[a][b].weight
    }

    /// Total weight of start -> seq -> finish, with `seq` holding local
    /// point ids (1..=n).
    pub fn path_weight(&self, seq: &[usize]) -> f64 {
        let mut prev = 0;
        let mut total = 0.0;
        for &node in seq {
            total += self.weight(prev, node);
            prev = node;
        }
        total + self.weight(prev, self.n + 1)
    }
}

/// Builds all directed edges among {start} ∪ cluster ∪ {finish}.
///
/// `cluster` holds global cruise-point indices.
pub fn build_edge_table(scenario: &Scenario, cluster: &[usize]) -> EdgeTable {
    let v_mr = max_range_speed(&scenario.uav.rotor, scenario.uav.v_max_mps);
    let n = cluster.len();
    let node_pos = |id: usize| -> Point2 {
        match id {
            0 => scenario.start,
            id if id == n + 1 => scenario.finish,
            id => scenario.cruise_points[cluster[id - 1]].position,
        }
    };
    let node_bits = |id: usize| -> f64 {
        match id {
            0 => 0.0,
            id if id == n + 1 => 0.0,
            id => scenario.cruise_points[cluster[id - 1]].data_bits,
        }
    };
    let edges = (0..n + 2)
        .map(|a| {
            (0..n + 2)
                .map(|b| {
                    edge_with_speed(
                        a,
                        b,
                        node_pos(a),
                        node_bits(a),
                        node_pos(b),
                        scenario,
                        v_mr,
                        EDGE_SIM_DT_S,
                    )
                })
                .collect()
        })
        .collect();
    EdgeTable { n, edges }
}

/// Orders a cluster into the minimum-weight open path.
pub fn solve_route(scenario: &Scenario, uav_id: usize, cluster: &[usize]) -> Route {
    solve_route_with_method(scenario, uav_id, cluster, RouteMethod::Auto)
}

pub fn solve_route_with_method(
    scenario: &Scenario,
    uav_id: usize,
    cluster: &[usize],
    method: RouteMethod,
) -> Route {
    if cluster.is_empty() {
        return Route {
            uav_id,
            order: Vec::new(),
        };
    }
    let table = build_edge_table(scenario, cluster);
    let local = match method {
        RouteMethod::Exact => held_karp(&table),
        RouteMethod::Heuristic => local_search(&table),
        RouteMethod::Auto => {
            if cluster.len() <= HELD_KARP_CUTOFF {
                held_karp(&table)
            } else {
                local_search(&table)
            }
        }
    };
    Route {
        uav_id,
        order: local.into_iter().map(|id| cluster[id - 1]).collect(),
    }
}

/// Total routing weight of an existing route.
pub fn route_weight(scenario: &Scenario, route: &Route) -> f64 {
    let cluster = route.order.clone();
    if cluster.is_empty() {
        let table = build_edge_table(scenario, &[]);
        return table.path_weight(&[]);
    }
    let table = build_edge_table(scenario, &cluster);
    let seq: Vec<usize> = (1..=cluster.len()).collect();
    table.path_weight(&seq)
}

/// Exact open-path solver: dynamic program over visited subsets.
fn held_karp(table: &EdgeTable) -> Vec<usize> {
    let n = table.n;
    assert!(n >= 1 && n <= HELD_KARP_CUTOFF + 2, "exact solver size cap");
    let full = (1usize << n) - 1;
    // cost[mask][j]: best weight of start -> (mask) ending at point j+1.
    let mut cost = vec![vec![f64::INFINITY; n]; full + 1];
    let mut parent = vec![vec![usize::MAX; n]; full + 1];
    for j in 0..n {
        cost[1 << j][j] = table.weight(0, j + 1);
    }
    for mask in 1..=full {
        for j in 0..n {
            if mask & (1 << j) == 0 || cost[mask][j].is_infinite() {
                continue;
            }
            for k in 0..n {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let next = mask | (1 << k);
                let c = cost[mask][j] + table.weight(j + 1, k + 1);
                if c < cost[next][k] {
                    cost[next][k] = c;
                    parent[next][k] = j;
                }
            }
        }
    }
    let mut best_j = 0;
    let mut best = f64::INFINITY;
    for j in 0..n {
        let c = cost[full][j] + table.weight(j + 1, n + 1);
        if c < best {
            best = c;
            best_j = j;
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut mask = full;
    let mut j = best_j;
    loop {
        order.push(j + 1);
        let p = parent[mask][j];
        mask &= !(1 << j);
        if mask == 0 {
            break;
        }
        j = p;
    }
    order.reverse();
    order
}

/// Nearest-neighbor construction followed by 2-opt and Or-opt passes to
/// a local optimum; deterministic first-improvement scans.
fn local_search(table: &EdgeTable) -> Vec<usize> {
    let n = table.n;
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let mut cur = 0usize;
    for _ in 0..n {
        let mut best = f64::INFINITY;
        let mut pick = usize::MAX;
        for j in 0..n {
            if used[j] {
                continue;
            }
            let w = table.weight(cur, j + 1);
            if w < best {
                best = w;
                pick = j;
            }
        }
        used[pick] = true;
        order.push(pick + 1);
        cur = pick + 1;
    }

    let mut best_cost = table.path_weight(&order);
    let eps = 1e-12 * best_cost.abs().max(1.0);
    loop {
        let mut improved = false;

        // 2-opt: reverse order[i..=j]; weights are directed, so recompute.
        'two_opt: for i in 0..n {
            for j in i + 1..n {
                let mut cand = order.clone();
                cand[i..=j].reverse();
                let c = table.path_weight(&cand);
                if c < best_cost - eps {
                    order = cand;
                    best_cost = c;
                    improved = true;
                    continue 'two_opt;
                }
            }
        }

        // Or-opt: relocate blocks of 1..=3 consecutive points.
        'or_opt: for len in 1..=3usize.min(n) {
            for i in 0..=n - len {
                for dest in 0..=n - len {
                    if dest == i {
                        continue;
                    }
                    let mut cand = order.clone();
                    let block: Vec<usize> = cand.drain(i..i + len).collect();
                    cand.splice(dest..dest, block);
                    let c = table.path_weight(&cand);
                    if c < best_cost - eps {
                        order = cand;
                        best_cost = c;
                        improved = true;
                        continue 'or_opt;
                    }
                }
            }
        }

        if !improved {
            return order;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, CruisePoint};

    fn scenario_with_points(coords: &[(f64, f64, f64)]) -> Scenario {
        let mut s = generate_scenario(1, coords.len().max(1), 1, 1000.0, (1e8, 1e8)).unwrap();
        s.cruise_points = coords
            .iter()
            .enumerate()
            .map(|(i, &(x, y, q))| CruisePoint {
                id: i as u32 + 1,
                position: Point2::new(x, y),
                data_bits: q,
            })
            .collect();
        s.validate().unwrap();
        s
    }

    #[test]
    fn zero_data_edge_has_zero_weight() {
        let s = generate_scenario(2, 4, 2, 1000.0, (1e8, 1e8)).unwrap();
        let e = estimate_edge(
            0,
            1,
            Point2::new(0.0, 0.0),
            0.0,
            Point2::new(400.0, 300.0),
            &s,
        );
        assert_eq!(e.weight, 0.0);
        assert!(e.e_joules > 0.0);
        assert!(e.q_offloadable_bits > 0.0);
    }

    #[test]
    fn weight_is_linear_in_origin_bits() {
        let s = generate_scenario(2, 4, 2, 1000.0, (1e8, 1e8)).unwrap();
        let a = Point2::new(50.0, 100.0);
        let b = Point2::new(700.0, 500.0);
        let e1 = estimate_edge(0, 1, a, 1e8, b, &s);
        let e2 = estimate_edge(0, 1, a, 2e8, b, &s);
        assert!((e2.weight - 2.0 * e1.weight).abs() <= 1e-9 * e1.weight.abs());
    }

    #[test]
    fn weight_direction_sensitivity_is_only_data() {
        let s = generate_scenario(3, 4, 2, 1000.0, (1e8, 1e8)).unwrap();
        let a = Point2::new(120.0, 80.0);
        let b = Point2::new(620.0, 440.0);
        let (qa, qb) = (3.2e8, 0.7e8);
        let fwd = estimate_edge(0, 1, a, qa, b, &s);
        let rev = estimate_edge(1, 0, b, qb, a, &s);
        let na = fwd.weight / qa;
        let nb = rev.weight / qb;
        assert!((na - nb).abs() <= 1e-9 * na.abs(), "{na} vs {nb}");
    }

    #[test]
    fn edge_over_station_beats_equal_length_far_edge() {
        let s = generate_scenario(4, 4, 2, 1000.0, (1e8, 1e8)).unwrap();
        let g = s.stations[0].position; // lattice corner at (0, 0)
        let near = estimate_edge(
            0,
            1,
            Point2::new(g.x - 150.0, g.y),
            1e8,
            Point2::new(g.x + 150.0, g.y),
            &s,
        );
        // Same length, far from every station (lattice pitch 500).
        let far = estimate_edge(
            0,
            1,
            Point2::new(g.x + 100.0, g.y + 216.0),
            1e8,
            Point2::new(g.x + 400.0, g.y + 216.0),
            &s,
        );
        assert!(
            near.weight < far.weight,
            "near {} !< far {}",
            near.weight,
            far.weight
        );
        assert!((near.e_joules - far.e_joules).abs() < 1e-9 * near.e_joules);
    }

    #[test]
    fn zero_coverage_edge_uses_penalty_form() {
        // Unvalidated scenario with zero transmit power: rates vanish.
        let mut s = generate_scenario(5, 4, 2, 1000.0, (1e8, 1e8)).unwrap();
        s.uav.tx_power_w = 0.0;
        let e = estimate_edge(0, 1, Point2::new(0.0, 0.0), 1e8, Point2::new(100.0, 0.0), &s);
        assert_eq!(e.q_offloadable_bits, 0.0);
        assert!(e.weight.is_finite());
        assert!(e.weight > e.e_joules * 1e7, "penalty must dominate");
    }

    #[test]
    fn single_point_route_is_the_only_ordering() {
        let s = scenario_with_points(&[(300.0, 300.0, 1e8)]);
        let r = solve_route(&s, 1, &[0]);
        assert_eq!(r.order, vec![0]);
    }

    #[test]
    fn empty_cluster_gives_trivial_route() {
        let s = scenario_with_points(&[(300.0, 300.0, 1e8)]);
        let r = solve_route(&s, 2, &[]);
        assert!(r.order.is_empty());
    }

    #[test]
    fn three_points_match_permutation_brute_force() {
        for seed in 0..10u64 {
            let s = generate_scenario(seed, 3, 1, 1000.0, (5e7, 5e8)).unwrap();
            let cluster = vec![0, 1, 2];
            let table = build_edge_table(&s, &cluster);
            let perms: [[usize; 3]; 6] = [
                [1, 2, 3],
                [1, 3, 2],
                [2, 1, 3],
                [2, 3, 1],
                [3, 1, 2],
                [3, 2, 1],
            ];
            let best = perms
                .iter()
                .map(|p| table.path_weight(p))
                .fold(f64::INFINITY, f64::min);
            let r = solve_route(&s, 1, &cluster);
            let got = route_weight(&s, &r);
            assert!(
                (got - best).abs() <= 1e-9 * best.abs().max(1.0),
                "seed {seed}: got {got}, brute force {best}"
            );
        }
    }

    #[test]
    fn collinear_route_matches_permutation_oracle() {
        // On a line the hybrid weight can tie across visit orders (the
        // per-edge weight is load-dependent, not pure length), so the
        // right check is equality with the 4!-permutation brute force,
        // not a specific sweep order.
        let mut s = scenario_with_points(&[
            (100.0, 500.0, 1e8),
            (300.0, 500.0, 1e8),
            (500.0, 500.0, 1e8),
            (700.0, 500.0, 1e8),
        ]);
        s.start = Point2::new(0.0, 500.0);
        s.finish = Point2::new(800.0, 500.0);
        let r = solve_route(&s, 1, &[0, 1, 2, 3]);
        let solved = route_weight(&s, &r);

        let mut best = f64::INFINITY;
        let mut perm = vec![0usize, 1, 2, 3];
        let mut stack = vec![0usize; 4];
        let mut depth = 0;
        // Heap's algorithm over the four cluster indices.
        best = best.min(route_weight(
            &s,
            &Route {
                uav_id: 1,
                order: perm.clone(),
            },
        ));
        while depth < 4 {
            if stack[depth] < depth {
                if depth % 2 == 0 {
                    perm.swap(0, depth);
                } else {
                    perm.swap(stack[depth], depth);
                }
                best = best.min(route_weight(
                    &s,
                    &Route {
                        uav_id: 1,
                        order: perm.clone(),
                    },
                ));
                stack[depth] += 1;
                depth = 0;
            } else {
                stack[depth] = 0;
                depth += 1;
            }
        }
        assert!(
            (solved - best).abs() <= 1e-9 * best.max(1.0),
            "solved {solved} vs oracle {best}"
        );
    }

    #[test]
    fn exact_never_loses_to_heuristic() {
        for seed in 20..35u64 {
            let k = 4 + (seed % 9) as usize; // 4..=12
            let s = generate_scenario(seed, k, 1, 1000.0, (5e7, 5e8)).unwrap();
            let cluster: Vec<usize> = (0..k).collect();
            let exact = solve_route_with_method(&s, 1, &cluster, RouteMethod::Exact);
            let heur = solve_route_with_method(&s, 1, &cluster, RouteMethod::Heuristic);
            let we = route_weight(&s, &exact);
            let wh = route_weight(&s, &heur);
            assert!(we <= wh + 1e-9 * we.abs().max(1.0), "seed {seed}: {we} > {wh}");
        }
    }

    #[test]
    fn heuristic_is_two_opt_stable() {
        let s = generate_scenario(77, 16, 1, 1000.0, (5e7, 5e8)).unwrap();
        let cluster: Vec<usize> = (0..16).collect();
        let table = build_edge_table(&s, &cluster);
        let order = local_search(&table);
        let base = table.path_weight(&order);
        for i in 0..order.len() {
            for j in i + 1..order.len() {
                let mut cand = order.clone();
                cand[i..=j].reverse();
                assert!(
                    table.path_weight(&cand) >= base - 1e-9 * base,
                    "2-opt move ({i},{j}) improves"
                );
            }
        }
    }

    #[test]
    fn routes_visit_each_point_once() {
        for seed in 0..6u64 {
            let s = generate_scenario(seed, 15, 1, 1000.0, (5e7, 5e8)).unwrap();
            let cluster: Vec<usize> = (0..15).collect();
            let r = solve_route_with_method(&s, 1, &cluster, RouteMethod::Heuristic);
            let mut seen = r.order.clone();
            seen.sort_unstable();
            assert_eq!(seen, cluster);
        }
    }
}
