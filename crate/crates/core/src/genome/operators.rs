use super::{EvaluatedScenario, Gene, Mobility, ObstacleGenome, ScenarioGenome, ScenarioLimits, GENE_COUNT};
use crate::geometry::wrap_angle;
use crate::lane_map::LaneMap;
use crate::validity::{repair, sample_lane_point, tangent_at, ConstraintTable, ObstacleKind, ValidityError};
use rand::seq::SliceRandom;
use rand::Rng;
use std::f64::consts::PI;

fn settle_static(g: &mut ObstacleGenome) {
    if g.mobility == Mobility::Static {
        g.end = g.start;
    }
}

/// Swaps genes `[i, j)` between `a` and `b`, then repairs both children.
pub fn crossover_at<R: Rng + ?Sized>(
    a: &ObstacleGenome,
    b: &ObstacleGenome,
    i: usize,
    j: usize,
    table: &ConstraintTable,
    map: &LaneMap,
    rng: &mut R,
) -> Result<(ObstacleGenome, ObstacleGenome), ValidityError> {
    assert!(i <= j && j <= GENE_COUNT, "cut points must satisfy 0 <= i <= j <= {GENE_COUNT}");
    let mut ca = a.clone();
    let mut cb = b.clone();
    let swapped = &Gene::ALL[i..j];
    for &g in swapped {
        ca.take_gene(b, g);
        cb.take_gene(a, g);
    }
    if swapped.contains(&Gene::Start) != swapped.contains(&Gene::Heading) {
        for (child, parent) in [(&mut ca, a), (&mut cb, b)] {
            if child.start != parent.start {
                child.heading = tangent_at(map, child.start).unwrap_or(child.heading);
            }
        }
    }
    if ca.id == cb.id && a.id != b.id {
        cb.id = a.id.max(b.id) + 1;
    }
    settle_static(&mut ca);
    settle_static(&mut cb);
    Ok((repair(&ca, table, map, rng)?, repair(&cb, table, map, rng)?))
}

/// Two-point crossover with cut points drawn uniformly over all pairs
/// `0 <= i <= j <= 10`.
pub fn two_point_crossover<R: Rng + ?Sized>(
    a: &ObstacleGenome,
    b: &ObstacleGenome,
    table: &ConstraintTable,
    map: &LaneMap,
    rng: &mut R,
) -> Result<(ObstacleGenome, ObstacleGenome), ValidityError> {
    let pairs = (GENE_COUNT + 1) * (GENE_COUNT + 2) / 2;
    let mut r = rng.gen_range(0..pairs);
    let mut i = 0;
    while r > GENE_COUNT - i {
        r -= GENE_COUNT - i + 1;
        i += 1;
    }
    crossover_at(a, b, i, i + r, table, map, rng)
}

fn resample_gene<R: Rng + ?Sized>(
    g: &mut ObstacleGenome,
    gene: Gene,
    table: &ConstraintTable,
    map: &LaneMap,
    rng: &mut R,
) {
    let b = *table.bounds(g.kind);
    match gene {
        Gene::Id => {}
        Gene::Start => g.start = sample_lane_point(map, rng).0,
        Gene::End => g.end = sample_lane_point(map, rng).0,
        Gene::Heading => g.heading = wrap_angle(rng.gen_range(-PI..PI)),
        Gene::Length => g.length = b.length.sample(rng),
        Gene::Width => g.width = b.width.sample(rng),
        Gene::Height => g.height = b.height.sample(rng),
        Gene::Speed => g.speed = b.speed.sample(rng),
        Gene::Kind => g.kind = ObstacleKind::ALL[rng.gen_range(0..ObstacleKind::ALL.len())],
        Gene::Mobility => {
            g.mobility = if rng.gen_bool(table.static_probability) { Mobility::Static } else { Mobility::Dynamic }
        }
    }
}

fn finish_mutation<R: Rng + ?Sized>(
    original: &ObstacleGenome,
    mut g: ObstacleGenome,
    table: &ConstraintTable,
    map: &LaneMap,
    rng: &mut R,
) -> Result<ObstacleGenome, ValidityError> {
    if g.start != original.start {
        g.heading = tangent_at(map, g.start).unwrap_or(g.heading);
    }
    settle_static(&mut g);
    repair(&g, table, map, rng)
}

/// Resamples each gene except the id independently with probability
/// `p_gene`, then repairs.
pub fn mutate_genes<R: Rng + ?Sized>(
    ind: &ObstacleGenome,
    table: &ConstraintTable,
    map: &LaneMap,
    rng: &mut R,
    p_gene: f64,
) -> Result<ObstacleGenome, ValidityError> {
    let mut g = ind.clone();
    let mut touched = false;
    for gene in Gene::ALL.into_iter().skip(1) {
        if rng.gen_bool(p_gene) {
            resample_gene(&mut g, gene, table, map, rng);
            touched = true;
        }
    }
    if !touched {
        return Ok(g);
    }
    finish_mutation(ind, g, table, map, rng)
}

/// Resamples exactly one randomly chosen gene (never the id), then repairs.
pub fn mutate_one_gene<R: Rng + ?Sized>(
    ind: &ObstacleGenome,
    table: &ConstraintTable,
    map: &LaneMap,
    rng: &mut R,
) -> Result<ObstacleGenome, ValidityError> {
    let gene = Gene::ALL[rng.gen_range(1..GENE_COUNT)];
    let mut g = ind.clone();
    resample_gene(&mut g, gene, table, map, rng);
    finish_mutation(ind, g, table, map, rng)
}

fn min_distance(ev: &EvaluatedScenario, id: u32) -> f64 {
    ev.per_obstacle_min_distance.get(&id).copied().unwrap_or(f64::INFINITY)
}

/// Cross-scenario mutation: may drop this scenario's least threatening
/// obstacle and may copy in the donor's most threatening one, keeping the
/// obstacle count within limits.
pub fn mutate_scenario<R: Rng + ?Sized>(
    s: &EvaluatedScenario,
    donor: &EvaluatedScenario,
    rng: &mut R,
    p_add: f64,
    p_remove: f64,
    limits: &ScenarioLimits,
) -> ScenarioGenome {
    let remove = rng.gen_bool(p_remove);
    let add = rng.gen_bool(p_add);
    let mut g = s.genome.clone();
    if remove && g.obstacles.len() > limits.min_obstacles.max(1) {
        let mut worst = 0;
        for (i, o) in g.obstacles.iter().enumerate() {
            if min_distance(s, o.id) > min_distance(s, g.obstacles[worst].id) {
                worst = i;
            }
        }
        g.obstacles.remove(worst);
    }
    if add && g.obstacles.len() < limits.max_obstacles {
        let best = donor.genome.obstacles.iter().fold(None::<&ObstacleGenome>, |acc, o| match acc {
            Some(b) if min_distance(donor, b.id) <= min_distance(donor, o.id) => Some(b),
            _ => Some(o),
        });
        if let Some(o) = best {
            let mut copy = o.clone();
            copy.id = g.next_free_id();
            g.obstacles.push(copy);
        }
    }
    g
}

/// Obstacle-level crossover: one random whole obstacle moves each way
/// between `a` and `b`. Genes travel untouched; clashing ids are renumbered.
pub fn swap_whole_obstacles<R: Rng + ?Sized>(a: &mut ScenarioGenome, b: &mut ScenarioGenome, rng: &mut R) {
    if a.obstacles.is_empty() || b.obstacles.is_empty() {
        return;
    }
    let i = rng.gen_range(0..a.obstacles.len());
    let j = rng.gen_range(0..b.obstacles.len());
    std::mem::swap(&mut a.obstacles[i], &mut b.obstacles[j]);
    a.dedupe_ids();
    b.dedupe_ids();
}

/// Shuffles obstacle indices and pairs them off; an odd one out is unpaired.
pub fn mating_pairs<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks_exact(2).map(|c| (c[0], c[1])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::ObjectiveVector;
    use crate::geometry::MapPoint;
    use crate::validity::validate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn corridor() -> LaneMap {
        LaneMap::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../maps/straight_corridor.json")).unwrap()
    }

    fn pedestrian() -> ObstacleGenome {
        ObstacleGenome {
            id: 1,
            start: MapPoint::new(10.0, 1.75),
            end: MapPoint::new(80.0, 1.75),
            heading: 0.0,
            length: 0.3,
            width: 0.5,
            height: 1.5,
            speed: 2.0,
            kind: ObstacleKind::Pedestrian,
            mobility: Mobility::Dynamic,
        }
    }

    fn vehicle() -> ObstacleGenome {
        ObstacleGenome {
            id: 2,
            start: MapPoint::new(50.0, -1.75),
            end: MapPoint::new(300.0, -1.75),
            heading: 0.0,
            length: 4.5,
            width: 1.8,
            height: 1.5,
            speed: 16.67,
            kind: ObstacleKind::Vehicle,
            mobility: Mobility::Dynamic,
        }
    }

    #[test]
    fn empty_cut_is_identity() {
        let (t, m) = (ConstraintTable::default(), corridor());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 0..=GENE_COUNT {
            let (a, b) = crossover_at(&pedestrian(), &vehicle(), k, k, &t, &m, &mut rng).unwrap();
            assert_eq!((a, b), (pedestrian(), vehicle()));
        }
    }

    #[test]
    fn full_cut_swaps_everything() {
        let (t, m) = (ConstraintTable::default(), corridor());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (a, b) = crossover_at(&pedestrian(), &vehicle(), 0, GENE_COUNT, &t, &m, &mut rng).unwrap();
        assert_eq!((a, b), (vehicle(), pedestrian()));
    }

    #[test]
    fn speed_swap_repairs_pedestrian() {
        let (t, m) = (ConstraintTable::default(), corridor());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = Gene::Speed.index();
        let (a, b) = crossover_at(&pedestrian(), &vehicle(), s, s + 1, &t, &m, &mut rng).unwrap();
        assert!(t.pedestrian.speed.contains(a.speed));
        assert!(t.vehicle.speed.contains(b.speed));
        assert!(validate(&a, &t, &m).is_empty() && validate(&b, &t, &m).is_empty());
    }

    #[test]
    fn cut_pairs_cover_the_triangle() {
        let mut seen = std::collections::BTreeSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pairs = (GENE_COUNT + 1) * (GENE_COUNT + 2) / 2;
        for _ in 0..5000 {
            let mut r = rng.gen_range(0..pairs);
            let mut i = 0;
            while r > GENE_COUNT - i {
                r -= GENE_COUNT - i + 1;
                i += 1;
            }
            assert!(i + r <= GENE_COUNT);
            seen.insert((i, i + r));
        }
        assert_eq!(seen.len(), pairs);
    }

    #[test]
    fn zero_probability_mutation_is_identity() {
        let (t, m) = (ConstraintTable::default(), corridor());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(mutate_genes(&vehicle(), &t, &m, &mut rng, 0.0).unwrap(), vehicle());
    }

    #[test]
    fn mutated_vehicle_speed_stays_in_bounds() {
        let (t, m) = (ConstraintTable::default(), corridor());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let g = mutate_genes(&vehicle(), &t, &m, &mut rng, 0.5).unwrap();
            assert!(t.bounds(g.kind).speed.contains(g.speed));
            assert!(validate(&g, &t, &m).is_empty());
        }
    }

    fn evaluated(obstacles: Vec<ObstacleGenome>, dist: &[f64]) -> EvaluatedScenario {
        let per = obstacles.iter().zip(dist).map(|(o, d)| (o.id, *d)).collect::<BTreeMap<_, _>>();
        EvaluatedScenario {
            genome: ScenarioGenome {
                ego_start: MapPoint::new(5.0, 1.75),
                ego_end: MapPoint::new(200.0, 1.75),
                duration: 30.0,
                obstacles,
            },
            objectives: ObjectiveVector::new(0.0, 0.0, 0.0, 0.0, 0.0),
            per_obstacle_min_distance: per,
            violations: Vec::new(),
        }
    }

    #[test]
    fn add_copies_donors_closest_obstacle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = evaluated(vec![pedestrian()], &[5.0]);
        let donor = evaluated(vec![pedestrian(), vehicle()], &[3.0, 0.2]);
        let g = mutate_scenario(&s, &donor, &mut rng, 1.0, 0.0, &ScenarioLimits::default());
        assert_eq!(g.obstacles.len(), 2);
        assert_eq!(g.obstacles[1], ObstacleGenome { id: 2, ..vehicle() });
    }

    #[test]
    fn remove_drops_farthest_but_never_the_last() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let limits = ScenarioLimits::default();
        let single = evaluated(vec![pedestrian()], &[5.0]);
        assert_eq!(mutate_scenario(&single, &single, &mut rng, 0.0, 1.0, &limits), single.genome);
        let pair = evaluated(vec![pedestrian(), vehicle()], &[1.0, 9.0]);
        let g = mutate_scenario(&pair, &pair, &mut rng, 0.0, 1.0, &limits);
        assert_eq!(g.obstacles, vec![pedestrian()]);
    }

    #[test]
    fn add_is_clamped_at_capacity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let limits = ScenarioLimits { max_obstacles: 2, ..Default::default() };
        let full = evaluated(vec![pedestrian(), vehicle()], &[1.0, 2.0]);
        assert_eq!(mutate_scenario(&full, &full, &mut rng, 1.0, 0.0, &limits), full.genome);
    }

    #[test]
    fn whole_obstacle_swap_moves_one_each_way() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut a = evaluated(vec![pedestrian()], &[1.0]).genome;
        let mut b = evaluated(vec![vehicle()], &[1.0]).genome;
        swap_whole_obstacles(&mut a, &mut b, &mut rng);
        assert_eq!(a.obstacles, vec![vehicle()]);
        assert_eq!(b.obstacles, vec![pedestrian()]);
    }
}
