//! Dominance testing, non-dominated sorting, and knee-point extraction over
//! objective vectors.
//!
//! Dominance here is strict on every objective: `a` dominates `b` when `a`
//! is better on all three cost components *and* on security. Profiles
//! routinely tie on security level, and a tie must not eject a configuration
//! from the front — equal-security profiles stay mutually non-dominated.

use crate::cost::ObjectiveVector;
use crate::scalar::Scalar;

/// `a` dominates `b`: strictly lower latency, compute, and overhead, and
/// strictly higher security.
pub fn dominates<S: Scalar>(a: &ObjectiveVector<S>, b: &ObjectiveVector<S>) -> bool {
    a.t_lat_ms < b.t_lat_ms
        && a.c_comp < b.c_comp
        && a.s_comm_kb < b.s_comm_kb
        && a.sigma_sec > b.sigma_sec
}

/// Indices of the non-dominated entries, in input order.
pub fn pareto_front<S: Scalar>(objs: &[ObjectiveVector<S>]) -> Vec<usize> {
    (0..objs.len())
        .filter(|&i| !objs.iter().enumerate().any(|(j, o)| j != i && dominates(o, &objs[i])))
        .collect()
}

/// Fast non-dominated sort: ranks entries into successive fronts.
pub fn fast_nondominated_sort<S: Scalar>(objs: &[ObjectiveVector<S>]) -> Vec<Vec<usize>> {
    let n = objs.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if dominates(&objs[i], &objs[j]) {
                dominated_by[i].push(j);
            } else if dominates(&objs[j], &objs[i]) {
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::take(&mut current));
        current = next;
    }
    fronts
}

/// Crowding distance of each member of `front` (parallel to `front`).
/// Boundary members get infinite distance.
pub fn crowding_distance<S: Scalar>(objs: &[ObjectiveVector<S>], front: &[usize]) -> Vec<S> {
    let m = front.len();
    let mut dist = vec![S::zero(); m];
    if m <= 2 {
        return vec![S::infinity(); m];
    }
    for comp in 0..4 {
        let value = |i: usize| objs[front[i]].as_array()[comp];
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| value(a).partial_cmp(&value(b)).expect("finite objective"));
        let span = value(order[m - 1]) - value(order[0]);
        dist[order[0]] = S::infinity();
        dist[order[m - 1]] = S::infinity();
        if span <= S::zero() {
            continue;
        }
        for w in 1..m - 1 {
            let gain = (value(order[w + 1]) - value(order[w - 1])) / span;
            dist[order[w]] = dist[order[w]] + gain;
        }
    }
    dist
}

/// Knee point of a set: the entry of the first front closest to the ideal
/// point in normalised objective space (costs at their minima, security at
/// its maximum). Ties resolve to the lowest index.
pub fn knee_point<S: Scalar>(objs: &[ObjectiveVector<S>]) -> usize {
    let norm = crate::cost::normalize_objectives(objs);
    let front = pareto_front(objs);
    let dist_to_ideal = |o: &ObjectiveVector<S>| {
        let t = o.t_lat_ms;
        let c = o.c_comp;
        let s = o.s_comm_kb;
        let sec = S::one() - o.sigma_sec;
        (t * t + c * c + s * s + sec * sec).sqrt()
    };
    let mut best = front[0];
    let mut best_d = dist_to_ideal(&norm[best]);
    for &i in &front[1..] {
        let d = dist_to_ideal(&norm[i]);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::{ContextVector, Urgency};
    use crate::cost::{catalog, catalog_objectives, ProfileId};
    use crate::scenario::{nominal_channel, nominal_context, vehicle_hardware};

    fn vector(t: f64, c: f64, s: f64, sec: f64) -> ObjectiveVector {
        ObjectiveVector {
            t_lat_ms: t,
            c_comp: c,
            s_comm_kb: s,
            sigma_sec: sec,
        }
    }

    /// The static catalog vectors: benchmark compute/size columns combined
    /// with the static mean latencies, in fixed profile order.
    fn static_catalog_vectors() -> Vec<ObjectiveVector> {
        let lat = [9.3, 10.8, 8.7, 17.4];
        catalog::<f64>()
            .iter()
            .zip(lat)
            .map(|(p, t)| vector(t, p.compute_ms() * 1200.0, p.s_comm_kb(), p.sec_bits as f64))
            .collect()
    }

    #[test]
    fn single_entry_is_its_own_front() {
        let v = vec![vector(1.0, 1.0, 1.0, 128.0)];
        assert_eq!(pareto_front(&v), vec![0]);
    }

    #[test]
    fn static_catalog_front_excludes_only_the_hash_profile() {
        let objs = static_catalog_vectors();
        // Independent pairwise brute force.
        let mut expected = Vec::new();
        for i in 0..objs.len() {
            let mut non_dominated = true;
            for j in 0..objs.len() {
                if i != j && dominates(&objs[j], &objs[i]) {
                    non_dominated = false;
                }
            }
            if non_dominated {
                expected.push(i);
            }
        }
        assert_eq!(expected, vec![0, 1, 2]);
        assert_eq!(pareto_front(&objs), vec![0, 1, 2]);
        // The hash profile is beaten on every objective by Dilithium.
        assert!(dominates(&objs[ProfileId::Dilithium3.index()], &objs[3]));
    }

    #[test]
    fn front_of_a_front_is_itself() {
        let objs = static_catalog_vectors();
        let front = pareto_front(&objs);
        let sub: Vec<ObjectiveVector> = front.iter().map(|&i| objs[i]).collect();
        let again = pareto_front(&sub);
        assert_eq!(again, (0..sub.len()).collect::<Vec<_>>());
    }

    #[test]
    fn sort_ranks_dominated_entries_behind_the_front() {
        let objs = static_catalog_vectors();
        let fronts = fast_nondominated_sort(&objs);
        assert_eq!(fronts[0], vec![0, 1, 2]);
        assert_eq!(fronts[1], vec![3]);
    }

    #[test]
    fn crowding_distance_marks_boundaries_infinite() {
        let objs = vec![
            vector(1.0, 1.0, 1.0, 192.0),
            vector(2.0, 0.9, 0.8, 192.0),
            vector(3.0, 0.5, 0.6, 192.0),
            vector(4.0, 0.1, 0.2, 192.0),
        ];
        let front: Vec<usize> = (0..4).collect();
        let d = crowding_distance(&objs, &front);
        assert!(d[0].is_infinite());
        assert!(d[3].is_infinite());
        assert!(d[1].is_finite() && d[1] > 0.0);
        assert!(d[2].is_finite() && d[2] > 0.0);
    }

    #[test]
    fn knee_point_at_nominal_context_is_the_low_cost_lattice_profile() {
        let objs = catalog_objectives(
            &nominal_context::<f64>(),
            &nominal_channel(),
            &vehicle_hardware(),
        )
        .unwrap();
        assert_eq!(ProfileId::ALL[knee_point(&objs)], ProfileId::Kyber768);
    }

    #[test]
    fn runtime_catalog_front_never_includes_a_dominated_profile() {
        let x: ContextVector = ContextVector {
            urgency: Urgency::Safety,
            ..nominal_context()
        };
        let objs = catalog_objectives(&x, &nominal_channel(), &vehicle_hardware()).unwrap();
        let front = pareto_front(&objs);
        for &i in &front {
            for j in 0..objs.len() {
                assert!(i == j || !dominates(&objs[j], &objs[i]));
            }
        }
    }
}
