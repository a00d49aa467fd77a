//! Test-instance generators: random point clouds, Erdős–Rényi graph
//! metrics, isometric copies, and ε-nets of the circle and hemisphere.

use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::metric::MetricSpace;

/// Default number of graph samples tried by [`er_graph_metric`].
pub const CONNECTIVITY_ATTEMPTS: usize = 10_000;

/// `n` i.i.d. uniform points in `[0,1]³` with Euclidean distances.
pub fn unit_cube_cloud<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<MetricSpace> {
    if n < 2 {
        return Err(Error::TooFewPoints { size: n });
    }
    let points: Vec<[f64; 3]> = (0..n)
        .map(|_| [rng.random(), rng.random(), rng.random()])
        .collect();
    MetricSpace::from_points(&points)
}

/// Shortest-path metric of a connected `G(n, p)` sample.
pub fn er_graph_metric<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<MetricSpace> {
    er_graph_metric_with_attempts(n, p, rng, CONNECTIVITY_ATTEMPTS)
}

/// [`er_graph_metric`] with an explicit cap on resampling.
pub fn er_graph_metric_with_attempts<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    rng: &mut R,
    max_attempts: usize,
) -> Result<MetricSpace> {
    if n < 2 {
        return Err(Error::TooFewPoints { size: n });
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "edge probability must lie in (0, 1), got {p}"
        )));
    }
    for _ in 0..max_attempts {
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random_bool(p) {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
        if let Some(dist) = graph_distances(&adjacency) {
            return MetricSpace::new(dist);
        }
    }
    Err(Error::ConnectivityTimeout {
        attempts: max_attempts,
    })
}

/// All-pairs hop distances by breadth-first search; `None` if the graph is
/// disconnected.
pub fn graph_distances(adjacency: &[Vec<usize>]) -> Option<DMatrix<f64>> {
    let n = adjacency.len();
    let mut dist = DMatrix::zeros(n, n);
    let mut hops = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for source in 0..n {
        hops.fill(usize::MAX);
        hops[source] = 0;
        queue.push_back(source);
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adjacency[v] {
                if hops[w] == usize::MAX {
                    hops[w] = hops[v] + 1;
                    reached += 1;
                    queue.push_back(w);
                }
            }
        }
        if reached < n {
            return None;
        }
        for (target, &h) in hops.iter().enumerate() {
            dist[(source, target)] = h as f64;
        }
    }
    Some(dist)
}

/// A copy of `space` with points relabeled by a uniform random permutation.
///
/// Point `i` of the copy is point `perm[i]` of the original, so the pair
/// `f = perm⁻¹`, `g = perm` has zero distortion.
pub fn isometric_copy<R: Rng + ?Sized>(space: &MetricSpace, rng: &mut R) -> (MetricSpace, Vec<usize>) {
    let mut perm: Vec<usize> = (0..space.size()).collect();
    perm.shuffle(rng);
    (space.permuted(&perm), perm)
}

/// Inverse of a permutation given as an image list.
pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// A finite subset of a continuum space together with a proven bound on
/// its covering radius.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsNet {
    pub points: Vec<Vec<f64>>,
    /// Euclidean (chordal) distances between `points`.
    pub space: MetricSpace,
    pub certified_eps: f64,
    pub delta: f64,
}

impl EpsNet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Writes the points as headerless CSV, one coordinate row per point.
    pub fn write_points_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for p in &self.points {
            out.serialize(p).map_err(|e| Error::Io(e.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `k` equally spaced points on the unit circle.
///
/// Every point of the circle is within half the angular spacing of the
/// net, so the chordal covering radius is `2 sin(π/(2k))`.
pub fn circle_net(k: usize) -> Result<EpsNet> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!(
            "circle net needs at least 3 points, got {k}"
        )));
    }
    let step = 2.0 * PI / k as f64;
    let points: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let t = step * j as f64;
            vec![t.cos(), t.sin()]
        })
        .collect();
    let space = MetricSpace::from_points(&points)?;
    Ok(EpsNet {
        points,
        space,
        certified_eps: 2.0 * (PI / (2.0 * k as f64)).sin(),
        delta: step,
    })
}

/// A ring net of the closed upper unit hemisphere.
///
/// Polar angles `θ_i = i·(π/2)/K` run from the pole to the equator with
/// spacing at most `ring_fraction·delta`. The ring at `θ_i` carries
/// `⌈2π sin θ_i / (azimuth_fraction·delta)⌉` evenly spaced points, or the
/// single pole point when `sin θ_i = 0`.
///
/// For a point at `(θ, φ)` take the nearest ring (`|θ − θ_i| ≤ a`) and the
/// nearest azimuth on it (`|φ − φ_j| ≤ b_i`). The law of cosines gives the
/// squared chord
/// `2(1 − cos(θ−θ_i)) + 2 sin θ sin θ_i (1 − cos(φ−φ_j))`
/// and `sin θ ≤ sin(min(θ_i + a, π/2))` bounds the second term, which
/// yields `certified_eps`.
pub fn hemisphere_net(delta: f64, ring_fraction: f64, azimuth_fraction: f64) -> Result<EpsNet> {
    if !(delta > 0.0 && delta < FRAC_PI_2) {
        return Err(Error::InvalidDelta(format!("delta must lie in (0, π/2), got {delta}")));
    }
    for (name, f) in [("ring", ring_fraction), ("azimuth", azimuth_fraction)] {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidDelta(format!(
                "{name} fraction must lie in (0, 1], got {f}"
            )));
        }
    }
    let rings = (FRAC_PI_2 / (ring_fraction * delta)).ceil() as usize;
    let spacing = FRAC_PI_2 / rings as f64;
    let a = 0.5 * spacing;
    let arc = azimuth_fraction * delta;

    let mut points = Vec::new();
    let mut worst_ring = 0.0f64;
    for i in 0..=rings {
        // the last ring sits exactly on the equator
        let theta = if i == rings { FRAC_PI_2 } else { spacing * i as f64 };
        let (sin_t, cos_t) = if i == 0 { (0.0, 1.0) } else { theta.sin_cos() };
        if sin_t == 0.0 {
            points.push(vec![0.0, 0.0, 1.0]);
            continue;
        }
        let count = (2.0 * PI * sin_t / arc).ceil() as usize;
        let step = 2.0 * PI / count as f64;
        for j in 0..count {
            let (sin_p, cos_p) = (step * j as f64).sin_cos();
            let z = if i == rings { 0.0 } else { cos_t };
            points.push(vec![sin_t * cos_p, sin_t * sin_p, z]);
        }
        let b = PI / count as f64;
        // largest sin θ over the band |θ − θ_i| ≤ a inside the hemisphere
        let sin_upper = if theta + a >= FRAC_PI_2 { 1.0 } else { (theta + a).sin() };
        worst_ring = worst_ring.max(2.0 * sin_t * sin_upper * (1.0 - b.cos()));
    }
    let eps_sq = 2.0 * (1.0 - a.cos()) + worst_ring;
    let space = MetricSpace::from_points(&points)?;
    Ok(EpsNet {
        points,
        space,
        certified_eps: eps_sq.sqrt(),
        delta,
    })
}

/// Upper bound on the continuum distance from a net-level distance:
/// `dgh_net + max(eps_a, eps_b)`.
pub fn covering_error_transfer(dgh_net: f64, eps_a: f64, eps_b: f64) -> Result<f64> {
    if !(dgh_net >= 0.0 && eps_a >= 0.0 && eps_b >= 0.0) {
        return Err(Error::InvalidParameter(
            "covering transfer needs nonnegative inputs".into(),
        ));
    }
    Ok(dgh_net + eps_a.max(eps_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::MappingPair;
    use crate::relaxation::build_blocks;
    use crate::solver::brute_force_dgh;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nearest(net: &EpsNet, p: &[f64]) -> f64 {
        net.points
            .iter()
            .map(|q| q.iter().zip(p).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    fn random_hemisphere_point(rng: &mut ChaCha8Rng) -> [f64; 3] {
        loop {
            let v: [f64; 3] = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..1.0),
            ];
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if r > 1e-3 && r <= 1.0 {
                return [v[0] / r, v[1] / r, v[2] / r];
            }
        }
    }

    #[test]
    fn cloud_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = unit_cube_cloud(30, &mut rng).unwrap();
        assert!(a.diameter() <= 3f64.sqrt());
        let a2 = unit_cube_cloud(30, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = unit_cube_cloud(30, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a2, b);
        assert!(MetricSpace::new_strict(a.dist().clone()).is_ok());
        assert!(unit_cube_cloud(1, &mut rng).is_err());
    }

    #[test]
    fn dense_graphs_have_small_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = er_graph_metric(12, 0.95, &mut rng).unwrap();
        for &d in g.dist().iter() {
            assert!(d == 0.0 || d == 1.0 || d == 2.0);
        }
    }

    #[test]
    fn graph_distances_are_integral_metrics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let g = er_graph_metric(20, 0.2, &mut rng).unwrap();
            assert!(MetricSpace::new_strict(g.dist().clone()).is_ok());
            for i in 0..20 {
                for j in 0..20 {
                    let d = g.get(i, j);
                    assert_eq!(d, d.round());
                    if i != j {
                        assert!((1.0..=19.0).contains(&d));
                    }
                }
            }
        }
    }

    #[test]
    fn path_graph_distances() {
        // 0 - 1 - 2 - 3 plus the chord 0 - 2
        let adjacency = vec![vec![1, 2], vec![0, 2], vec![1, 3, 0], vec![2]];
        let d = graph_distances(&adjacency).unwrap();
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[0., 1., 1., 2., 1., 0., 1., 2., 1., 1., 0., 1., 2., 2., 1., 0.],
        );
        assert_eq!(d, expected);
        assert!(graph_distances(&[vec![1], vec![0], vec![]]).is_none());
    }

    #[test]
    fn sparse_graphs_time_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(
            er_graph_metric_with_attempts(50, 0.001, &mut rng, 5),
            Err(Error::ConnectivityTimeout { attempts: 5 })
        );
        assert!(er_graph_metric(5, 1.0, &mut rng).is_err());
    }

    #[test]
    fn isometric_copies() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = unit_cube_cloud(4, &mut rng).unwrap();
        assert_eq!(a.permuted(&[0, 1, 2, 3]), a);
        let (copy, perm) = isometric_copy(&a, &mut rng);
        let pair = MappingPair::new(invert_permutation(&perm), perm).unwrap();
        let blocks = build_blocks(&a, &copy, 1.0).unwrap();
        assert_eq!(blocks.distortion(&pair).unwrap(), 0.0);
        assert_eq!(brute_force_dgh(&a, &copy).unwrap().0, 0.0);
    }

    #[test]
    fn circle_net_values() {
        let net = circle_net(37).unwrap();
        assert_eq!(net.len(), 37);
        assert!((net.certified_eps - 0.084_883).abs() < 1e-6);
        assert!(net.certified_eps <= 0.0854);
        let expected_diam = 2.0 * (18.0 * PI / 37.0).sin();
        assert!((net.space.diameter() - expected_diam).abs() < 1e-12);
        assert!((circle_net(4).unwrap().certified_eps - 2.0 * (PI / 8.0).sin()).abs() < 1e-15);
        for p in &net.points {
            assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-15);
        }
        assert!(circle_net(2).is_err());
    }

    #[test]
    fn circle_net_covers_fine_lattice() {
        let net = circle_net(37).unwrap();
        let step = 2.0 * PI / 37.0;
        let mut worst = 0.0f64;
        for s in 0..1_000_000 {
            let t = 2.0 * PI * s as f64 / 1e6;
            let k = (t / step).round();
            let gap = (t - k * step).abs();
            worst = worst.max(2.0 * (0.5 * gap).sin());
        }
        assert!(worst <= net.certified_eps + 1e-15);
        // nearest-point oracle on a coarser lattice
        for s in 0..2000 {
            let t = 2.0 * PI * s as f64 / 2000.0;
            assert!(nearest(&net, &[t.cos(), t.sin()]) <= net.certified_eps + 1e-12);
        }
    }

    #[test]
    fn hemisphere_reference_net() {
        let net = hemisphere_net(PI / 13.0, 0.5, 0.5).unwrap();
        assert!((237..=500).contains(&net.len()), "{}", net.len());
        assert!(net.certified_eps <= 0.09, "{}", net.certified_eps);
        for p in &net.points {
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((r - 1.0).abs() < 1e-14);
            assert!(p[2] >= 0.0);
        }
        assert!(net.points.iter().filter(|p| p[2] == 0.0).count() >= 3);
        assert!(MetricSpace::new_strict(net.space.dist().clone()).is_ok());
        assert_eq!(net, hemisphere_net(PI / 13.0, 0.5, 0.5).unwrap());
    }

    #[test]
    fn hemisphere_bound_covers_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (delta, rf, af) in [
            (PI / 13.0, 0.5, 0.5),
            (PI / 13.0, 1.0, 1.0),
            (PI / 6.0, 0.7, 0.3),
            (0.4, 1.0, 0.5),
        ] {
            let net = hemisphere_net(delta, rf, af).unwrap();
            let samples = if delta == PI / 13.0 && rf == 0.5 { 100_000 } else { 5_000 };
            for _ in 0..samples {
                let p = random_hemisphere_point(&mut rng);
                let d = nearest(&net, &p);
                assert!(d <= net.certified_eps, "{d} > {}", net.certified_eps);
            }
        }
    }

    #[test]
    fn hemisphere_bound_shrinks_with_delta() {
        let mut prev = f64::INFINITY;
        for k in 2..40 {
            let eps = hemisphere_net(1.5 / k as f64, 1.0, 1.0).unwrap().certified_eps;
            assert!(eps <= prev);
            prev = eps;
        }
        assert!(prev < 0.1);
    }

    #[test]
    fn hemisphere_rejects_bad_parameters() {
        for (d, r, a) in [(0.0, 0.5, 0.5), (2.0, 0.5, 0.5), (0.3, 0.0, 0.5), (0.3, 0.5, 1.5), (f64::NAN, 1.0, 1.0)] {
            assert!(matches!(hemisphere_net(d, r, a), Err(Error::InvalidDelta(_))));
        }
    }

    #[test]
    fn transfer() {
        assert!((covering_error_transfer(0.7009, 0.0854, 0.0).unwrap() - 0.7863).abs() < 1e-12);
        assert_eq!(covering_error_transfer(0.5, 0.0, 0.0).unwrap(), 0.5);
        assert_eq!(
            covering_error_transfer(0.5, 0.1, 0.2).unwrap(),
            covering_error_transfer(0.5, 0.2, 0.1).unwrap()
        );
        assert!(covering_error_transfer(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn points_csv() {
        let net = circle_net(3).unwrap();
        let mut buf = Vec::new();
        net.write_points_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("1.0,0.0\n"));
    }
}
