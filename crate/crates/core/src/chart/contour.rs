//! Marching squares with segment stitching.

use std::collections::HashMap;

/// Edge of the lattice: horizontal edges join `(i, j)`–`(i + 1, j)`,
/// vertical edges join `(i, j)`–`(i, j + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

/// Level-`level` polylines of a scalar field sampled at `(xs[i], ys[j])`,
/// `values[j * xs.len() + i]`. Cells with a non-finite corner are skipped.
/// Closed loops repeat their first vertex at the end.
pub fn contour_lines(values: &[f64], xs: &[f64], ys: &[f64], level: f64) -> Vec<Vec<[f64; 2]>> {
    let (nx, ny) = (xs.len(), ys.len());
    assert_eq!(values.len(), nx * ny, "values must cover the lattice");
    let v = |i: usize, j: usize| values[j * nx + i];
    let crossing = |e: Edge| -> [f64; 2] {
        let (a, b, pa, pb) = match e {
            Edge::H(i, j) => (v(i, j), v(i + 1, j), [xs[i], ys[j]], [xs[i + 1], ys[j]]),
            Edge::V(i, j) => (v(i, j), v(i, j + 1), [xs[i], ys[j]], [xs[i], ys[j + 1]]),
        };
        let t = if b == a { 0.5 } else { ((level - a) / (b - a)).clamp(0.0, 1.0) };
        [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
    };

    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            let c = [v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)];
            if c.iter().any(|x| !x.is_finite()) {
                continue;
            }
            let above = |x: f64| x >= level;
            let case = usize::from(above(c[0]))
                | usize::from(above(c[1])) << 1
                | usize::from(above(c[2])) << 2
                | usize::from(above(c[3])) << 3;
            let (bottom, right, top, left) = (Edge::H(i, j), Edge::V(i + 1, j), Edge::H(i, j + 1), Edge::V(i, j));
            let center_above = above(0.25 * (c[0] + c[1] + c[2] + c[3]));
            match case {
                0 | 15 => {}
                1 | 14 => segments.push((left, bottom)),
                2 | 13 => segments.push((bottom, right)),
                3 | 12 => segments.push((left, right)),
                4 | 11 => segments.push((right, top)),
                6 | 9 => segments.push((bottom, top)),
                7 | 8 => segments.push((left, top)),
                5 => {
                    if center_above {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    } else {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    }
                }
                10 => {
                    if center_above {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    } else {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    let mut incident: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        incident.entry(*a).or_default().push(k);
        incident.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    let walk = |start_seg: usize, start_edge: Edge, used: &mut Vec<bool>| {
        let mut line = vec![crossing(start_edge)];
        let mut seg = start_seg;
        let mut at = start_edge;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next = if a == at { b } else { a };
            line.push(crossing(next));
            at = next;
            match incident[&at].iter().find(|&&k| !used[k]) {
                Some(&k) => seg = k,
                None => break,
            }
        }
        line
    };
    // Open lines start at an edge touched by a single segment.
    for k in 0..segments.len() {
        if used[k] {
            continue;
        }
        let (a, b) = segments[k];
        if incident[&a].len() == 1 {
            lines.push(walk(k, a, &mut used));
        } else if incident[&b].len() == 1 {
            lines.push(walk(k, b, &mut used));
        }
    }
    for k in 0..segments.len() {
        if !used[k] {
            lines.push(walk(k, segments[k].0, &mut used));
        }
    }
    lines
}
