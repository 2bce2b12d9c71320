//! Exact, exponential-time reference implementations of the path-dependent
//! leaf game and the interaction indices built on it.
//!
//! Everything here is computed by literal enumeration and is meant to check
//! the quadrature engine, not to be fast. Size guards fail loudly instead of
//! running forever.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{NodeKind, TreeEnsemble};

/// Largest `|S|` accepted by [`discrete_derivative`].
pub const MAX_DERIVATIVE_ORDER: usize = 25;
/// Largest number of free players enumerated in an expectation.
pub const MAX_FREE_PLAYERS: usize = 20;
/// Largest declared feature count for the full-universe factorial sum.
pub const MAX_FULL_UNIVERSE: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("coalition sets overlap at feature {0}")]
    Overlap(usize),
    #[error("derivative order {0} exceeds oracle guard {MAX_DERIVATIVE_ORDER}")]
    OrderTooLarge(usize),
    #[error("{0} free players exceed oracle guard {MAX_FREE_PLAYERS}")]
    TooManyPlayers(usize),
    #[error("{0} declared features exceed the full-universe guard {MAX_FULL_UNIVERSE}")]
    UniverseTooLarge(usize),
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("sample has {got} entries, model expects {expected}")]
    SampleLength { expected: usize, got: usize },
}

/// The cooperative game a single leaf induces for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGame {
    pub tree: usize,
    /// Arena index of the leaf.
    pub leaf: usize,
    /// Empty prediction `val(v) · Π w_e`.
    pub r_empty: f64,
    /// Distinct path features, sorted, with their marginal multipliers.
    players: Vec<(usize, f64)>,
}

impl PathGame {
    /// Builds a game directly from `(feature, q)` pairs; duplicates are not
    /// allowed.
    pub fn new(r_empty: f64, mut players: Vec<(usize, f64)>) -> Self {
        players.sort_by_key(|&(f, _)| f);
        assert!(
            players.windows(2).all(|w| w[0].0 != w[1].0),
            "duplicate feature in path game"
        );
        PathGame { tree: 0, leaf: 0, r_empty, players }
    }

    /// `M(v)`, sorted.
    pub fn features(&self) -> Vec<usize> {
        self.players.iter().map(|&(f, _)| f).collect()
    }

    pub fn players(&self) -> &[(usize, f64)] {
        &self.players
    }

    /// Marginal multiplier; 1 for features off the path.
    pub fn q(&self, feature: usize) -> f64 {
        self.players
            .binary_search_by_key(&feature, |&(f, _)| f)
            .map_or(1.0, |i| self.players[i].1)
    }

    pub fn alpha(&self, feature: usize) -> f64 {
        self.q(feature) - 1.0
    }

    pub fn contains(&self, feature: usize) -> bool {
        self.players.binary_search_by_key(&feature, |&(f, _)| f).is_ok()
    }
}

/// One game per leaf per tree, trees in order and leaves in left-first DFS
/// order. Repeated features on a path fold into a single multiplier.
pub fn extract_path_games(ensemble: &TreeEnsemble, sample: &[f64]) -> Result<Vec<PathGame>, OracleError> {
    if sample.len() != ensemble.num_features() {
        return Err(OracleError::SampleLength { expected: ensemble.num_features(), got: sample.len() });
    }
    let mut games = Vec::new();
    for (t, tree) in ensemble.trees().iter().enumerate() {
        // Per path edge: (feature, weight, sample satisfies it).
        let mut path: Vec<(usize, f64, bool)> = Vec::new();
        collect_games(tree, t, tree.root(), sample, &mut path, &mut games);
    }
    Ok(games)
}

fn collect_games(
    tree: &crate::model::Tree,
    tree_index: usize,
    idx: usize,
    sample: &[f64],
    path: &mut Vec<(usize, f64, bool)>,
    out: &mut Vec<PathGame>,
) {
    match &tree.node(idx).kind {
        NodeKind::Leaf { value } => {
            let weight: f64 = path.iter().map(|&(_, w, _)| w).product();
            let mut players: BTreeMap<usize, f64> = BTreeMap::new();
            for &(feature, w, satisfied) in path.iter() {
                let q = players.entry(feature).or_insert(1.0);
                *q = if satisfied { *q / w } else { 0.0 };
            }
            // A violated edge anywhere zeroes the feature for good.
            for &(feature, _, satisfied) in path.iter() {
                if !satisfied {
                    players.insert(feature, 0.0);
                }
            }
            out.push(PathGame {
                tree: tree_index,
                leaf: idx,
                r_empty: value * weight,
                players: players.into_iter().collect(),
            });
        }
        NodeKind::Internal(split) => {
            let taken = split.child(split.route(sample[split.feature]));
            for child in [split.left, split.right] {
                path.push((split.feature, tree.edge_weight(idx, child), child == taken));
                collect_games(tree, tree_index, child, sample, path, out);
                path.pop();
            }
        }
    }
}

fn normalise(set: &[usize]) -> Vec<usize> {
    let mut v = set.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// `f_v(S) = R_∅ · Π_{i ∈ S} q_i`.
pub fn game_value(game: &PathGame, coalition: &[usize]) -> f64 {
    normalise(coalition)
        .into_iter()
        .fold(game.r_empty, |acc, i| acc * game.q(i))
}

/// `Δ_S f(T) = Σ_{L ⊆ S} (-1)^{|S|-|L|} f(T ∪ L)`, summed literally.
pub fn discrete_derivative(game: &PathGame, s: &[usize], t: &[usize]) -> Result<f64, OracleError> {
    let s = normalise(s);
    let t = normalise(t);
    if let Some(&x) = s.iter().find(|x| t.binary_search(x).is_ok()) {
        return Err(OracleError::Overlap(x));
    }
    if s.len() > MAX_DERIVATIVE_ORDER {
        return Err(OracleError::OrderTooLarge(s.len()));
    }
    let mut total = 0.0;
    let mut coalition = Vec::with_capacity(s.len() + t.len());
    for mask in 0u32..(1 << s.len()) {
        coalition.clear();
        coalition.extend_from_slice(&t);
        coalition.extend(s.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &x)| x));
        let sign = if (s.len() - mask.count_ones() as usize).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += sign * game_value(game, &coalition);
    }
    Ok(total)
}

/// Closed form: `R_∅ Π_{j∈S}(q_j - 1) Π_{j ∈ T ∩ (M(v)∖S)} q_j` when
/// `S ⊆ M(v)`, else 0.
pub fn discrete_derivative_closed(game: &PathGame, s: &[usize], t: &[usize]) -> Result<f64, OracleError> {
    let s = normalise(s);
    let t = normalise(t);
    if let Some(&x) = s.iter().find(|x| t.binary_search(x).is_ok()) {
        return Err(OracleError::Overlap(x));
    }
    if !s.iter().all(|&j| game.contains(j)) {
        return Ok(0.0);
    }
    let mut value = s.iter().fold(game.r_empty, |acc, &j| acc * game.alpha(j));
    for &j in &t {
        if game.contains(j) {
            value *= game.q(j);
        }
    }
    Ok(value)
}

/// `E_{T∼p}[Δ_S f(T)]` with `T` drawn from `M(v) ∖ S`.
pub fn weighted_banzhaf_exact(game: &PathGame, s: &[usize], p: f64) -> Result<f64, OracleError> {
    weighted_banzhaf_exact_in(game, s, p, &game.features())
}

/// As [`weighted_banzhaf_exact`] but with `T` drawn from an explicit
/// `universe ∖ S`, which may include null players.
pub fn weighted_banzhaf_exact_in(
    game: &PathGame,
    s: &[usize],
    p: f64,
    universe: &[usize],
) -> Result<f64, OracleError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(OracleError::Probability(p));
    }
    let s = normalise(s);
    let free: Vec<usize> = normalise(universe)
        .into_iter()
        .filter(|x| s.binary_search(x).is_err())
        .collect();
    if free.len() > MAX_FREE_PLAYERS {
        return Err(OracleError::TooManyPlayers(free.len()));
    }
    let m = free.len() as i32;
    let mut total = 0.0;
    let mut t = Vec::with_capacity(free.len());
    for mask in 0u32..(1 << free.len()) {
        t.clear();
        t.extend(free.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &x)| x));
        let k = t.len() as i32;
        let prob = p.powi(k) * (1.0 - p).powi(m - k);
        total += prob * discrete_derivative(game, &s, &t)?;
    }
    Ok(total)
}

/// Leaf-level weighted Banzhaf polynomial
/// `R_∅ Π_{j∈S} α_j Π_{j ∈ M(v)∖S} (1 + α_j p)`, zero unless `S ⊆ M(v)`.
pub fn banzhaf_poly(game: &PathGame, s: &[usize], p: f64) -> f64 {
    let s = normalise(s);
    if !s.iter().all(|&j| game.contains(j)) {
        return 0.0;
    }
    let mut value = game.r_empty;
    for &(j, q) in game.players() {
        let alpha = q - 1.0;
        if s.binary_search(&j).is_ok() {
            value *= alpha;
        } else {
            value *= 1.0 + alpha * p;
        }
    }
    value
}

/// Weight `|T|! (m - |T|)! / (m + 1)!` of a coalition of size `t` among `m`
/// free players.
fn shapley_weight(m: usize, t: usize) -> f64 {
    1.0 / ((m + 1) as f64 * binomial(m, t))
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Shapley interaction index of `S` for one leaf, by the factorial-weight sum
/// over `T ⊆ U ∖ S` with `U = M(v) ∪ S`.
pub fn leaf_sii_exact(game: &PathGame, s: &[usize]) -> Result<f64, OracleError> {
    let s = normalise(s);
    let mut universe = game.features();
    universe.extend_from_slice(&s);
    sii_over_universe(game, &s, &normalise(&universe))
}

fn sii_over_universe(game: &PathGame, s: &[usize], universe: &[usize]) -> Result<f64, OracleError> {
    let free: Vec<usize> = universe.iter().copied().filter(|x| s.binary_search(x).is_err()).collect();
    if free.len() > MAX_FREE_PLAYERS {
        return Err(OracleError::TooManyPlayers(free.len()));
    }
    let m = free.len();
    let mut total = 0.0;
    let mut t = Vec::with_capacity(m);
    for mask in 0u32..(1 << m) {
        t.clear();
        t.extend(free.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &x)| x));
        total += shapley_weight(m, t.len()) * discrete_derivative(game, s, &t)?;
    }
    Ok(total)
}

/// `SII(S)` of the whole ensemble: per-leaf indices summed over leaves.
pub fn sii_exact(games: &[PathGame], s: &[usize]) -> Result<f64, OracleError> {
    games.iter().try_fold(0.0, |acc, g| Ok(acc + leaf_sii_exact(g, s)?))
}

/// `SII(S)` with the factorial weights taken over all `num_features`
/// declared features, null players included.
pub fn sii_exact_full_universe(games: &[PathGame], s: &[usize], num_features: usize) -> Result<f64, OracleError> {
    if num_features > MAX_FULL_UNIVERSE {
        return Err(OracleError::UniverseTooLarge(num_features));
    }
    let s = normalise(s);
    let universe: Vec<usize> = (0..num_features).collect();
    games.iter().try_fold(0.0, |acc, g| Ok(acc + sii_over_universe(g, &s, &universe)?))
}

/// Shapley value of feature `i`.
pub fn shapley_exact(games: &[PathGame], i: usize) -> Result<f64, OracleError> {
    sii_exact(games, &[i])
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExactInteraction {
    pub value: f64,
    /// Σ over leaves of |leaf SII|; the cancellation-free magnitude.
    pub abs_leaf_sum: f64,
}

/// Every order-`order` index with at least one contributing leaf.
///
/// Per leaf, `f` is tabulated over all subsets of `M(v)` and the same
/// factorial-weight alternating sums as [`leaf_sii_exact`] are read off the
/// table. Keys `S ⊄ M(v)` for every leaf are omitted; they are exactly zero.
pub fn sii_exact_all(games: &[PathGame], order: usize) -> Result<BTreeMap<Vec<usize>, ExactInteraction>, OracleError> {
    let mut out: BTreeMap<Vec<usize>, ExactInteraction> = BTreeMap::new();
    for game in games {
        let m = game.players().len();
        if m < order || order == 0 {
            continue;
        }
        if m > MAX_FREE_PLAYERS {
            return Err(OracleError::TooManyPlayers(m));
        }
        let mut table = vec![0.0; 1 << m];
        table[0] = game.r_empty;
        for mask in 1usize..(1 << m) {
            let low = mask.trailing_zeros() as usize;
            table[mask] = table[mask & (mask - 1)] * game.players()[low].1;
        }
        let full = (1usize << m) - 1;
        for s_mask in 0usize..(1 << m) {
            if s_mask.count_ones() as usize != order {
                continue;
            }
            let free = full & !s_mask;
            let free_count = m - order;
            let mut leaf_value = 0.0;
            // Submasks of `free` (T), then of `s_mask` (L).
            let mut t = free;
            loop {
                let mut delta = 0.0;
                let mut l = s_mask;
                loop {
                    let sign = if (order - l.count_ones() as usize).is_multiple_of(2) { 1.0 } else { -1.0 };
                    delta += sign * table[t | l];
                    if l == 0 {
                        break;
                    }
                    l = (l - 1) & s_mask;
                }
                leaf_value += shapley_weight(free_count, t.count_ones() as usize) * delta;
                if t == 0 {
                    break;
                }
                t = (t - 1) & free;
            }
            let key: Vec<usize> = (0..m).filter(|b| s_mask >> b & 1 == 1).map(|b| game.players()[b].0).collect();
            let entry = out.entry(key).or_default();
            entry.value += leaf_value;
            entry.abs_leaf_sum += leaf_value.abs();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NodeSpec, Side, Tree, TreeEnsemble};
    use crate::quadrature::gauss_legendre;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_game(rng: &mut ChaCha8Rng, num_features: usize, sizes: std::ops::Range<usize>) -> PathGame {
        let size = rng.gen_range(sizes);
        let mut features: Vec<usize> = (0..num_features).collect();
        for i in 0..size {
            let j = rng.gen_range(i..num_features);
            features.swap(i, j);
        }
        let players = features[..size]
            .iter()
            .map(|&f| (f, if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.1..10.0) }))
            .collect();
        PathGame::new(rng.gen_range(-2.0..2.0), players)
    }

    fn random_subset(rng: &mut ChaCha8Rng, from: &[usize], prob: f64) -> Vec<usize> {
        from.iter().copied().filter(|_| rng.gen_bool(prob)).collect()
    }

    fn close(a: f64, b: f64, tol: f64, scale: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(scale)
    }

    #[test]
    fn game_value_basics() {
        let g = PathGame::new(0.5, vec![(0, 2.0)]);
        assert_eq!(game_value(&g, &[]), 0.5);
        assert_eq!(game_value(&g, &[3, 4]), 0.5);
        assert_eq!(game_value(&g, &[0]), 1.0);
    }

    #[test]
    fn stump_games() {
        let specs = vec![
            NodeSpec::split(0, 0, 5.0, Side::Left, 1, 2, 100.0),
            NodeSpec::leaf(1, 60.0, 1.0),
            NodeSpec::leaf(2, 40.0, 0.0),
        ];
        let ens = TreeEnsemble::new(vec![Tree::from_specs(0, &specs, 1).unwrap()], 1, 0.0).unwrap();
        let games = extract_path_games(&ens, &[4.0]).unwrap();
        assert_eq!(games.len(), 2);
        assert!((games[0].r_empty - 0.6).abs() < 1e-15);
        assert!((games[0].q(0) - 1.0 / 0.6).abs() < 1e-15);
        assert_eq!(games[1].r_empty, 0.0);
        assert_eq!(games[1].q(0), 0.0);
        // One-player Shapley value is the marginal f({0}) - f(∅).
        assert!((shapley_exact(&games, 0).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn single_leaf_game() {
        let tree = Tree::from_specs(0, &[NodeSpec::leaf(0, 1.0, 3.0)], 2).unwrap();
        let ens = TreeEnsemble::new(vec![tree], 2, 0.0).unwrap();
        let games = extract_path_games(&ens, &[0.0, 0.0]).unwrap();
        assert_eq!(games.len(), 1);
        assert_eq!(games[0].r_empty, 3.0);
        assert!(games[0].features().is_empty());
    }

    #[test]
    fn repeated_feature_folds() {
        let specs = vec![
            NodeSpec::split(0, 3, 5.0, Side::Left, 1, 2, 4.0),
            NodeSpec::split(1, 3, 2.0, Side::Left, 3, 4, 2.0),
            NodeSpec::leaf(2, 2.0, 0.0),
            NodeSpec::leaf(3, 1.0, 1.0),
            NodeSpec::leaf(4, 1.0, 0.0),
        ];
        let ens = TreeEnsemble::new(vec![Tree::from_specs(0, &specs, 4).unwrap()], 4, 0.0).unwrap();
        let games = extract_path_games(&ens, &[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(games[0].features(), vec![3]);
        assert_eq!(games[0].q(3), 4.0);
        // Violated the second split on 3: q folds to 0.
        let games = extract_path_games(&ens, &[0.0, 0.0, 0.0, 3.0]).unwrap();
        assert_eq!(games[0].q(3), 0.0);
        assert_eq!(games[1].q(3), 4.0);
    }

    #[test]
    fn derivative_edge_cases() {
        let g = PathGame::new(1.5, vec![(1, 3.0), (2, 1.0), (4, 0.0)]);
        assert_eq!(discrete_derivative(&g, &[7], &[]).unwrap(), 0.0);
        assert!((discrete_derivative(&g, &[1], &[]).unwrap() - 1.5 * 2.0).abs() < 1e-15);
        assert_eq!(discrete_derivative_closed(&g, &[1, 2], &[4]).unwrap(), 0.0);
        assert!((discrete_derivative_closed(&g, &[1, 4], &[]).unwrap() - 1.5 * 2.0 * -1.0).abs() < 1e-15);
        assert_eq!(discrete_derivative(&g, &[1], &[1]), Err(OracleError::Overlap(1)));
        let big: Vec<usize> = (0..26).collect();
        assert_eq!(discrete_derivative(&g, &big, &[]), Err(OracleError::OrderTooLarge(26)));
    }

    #[test]
    fn alternating_sum_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let g = random_game(&mut rng, 12, 0..9);
            let universe: Vec<usize> = (0..12).collect();
            let s = random_subset(&mut rng, &universe, 0.25);
            let rest: Vec<usize> = universe.iter().copied().filter(|x| !s.contains(x)).collect();
            let t = random_subset(&mut rng, &rest, 0.5);
            let a = discrete_derivative(&g, &s, &t).unwrap();
            let b = discrete_derivative_closed(&g, &s, &t).unwrap();
            let scale = g.r_empty.abs() * 10f64.powi(s.len() as i32 + t.len() as i32);
            assert!((a - b).abs() <= 1e-12 * scale.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn banzhaf_endpoints_and_residual() {
        let g = PathGame::new(0.7, vec![(0, 2.0), (1, 0.0), (2, 0.5)]);
        let p0 = weighted_banzhaf_exact(&g, &[0], 0.0).unwrap();
        assert!((p0 - discrete_derivative(&g, &[0], &[]).unwrap()).abs() < 1e-15);
        let p1 = weighted_banzhaf_exact(&g, &[0], 1.0).unwrap();
        assert!((p1 - discrete_derivative(&g, &[0], &[1, 2]).unwrap()).abs() < 1e-15);
        assert_eq!(banzhaf_poly(&g, &[0, 5], 0.3), 0.0);
        let full = banzhaf_poly(&g, &[0, 1, 2], 0.0);
        assert_eq!(full, banzhaf_poly(&g, &[0, 1, 2], 0.9));
        assert!((full - 0.7 * 1.0 * -1.0 * -0.5).abs() < 1e-15);
    }

    #[test]
    fn banzhaf_poly_matches_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let g = random_game(&mut rng, 10, 1..9);
            let s = random_subset(&mut rng, &g.features(), 0.3);
            let p = if rng.gen_bool(0.2) { 0.37 } else { rng.gen_range(0.0..=1.0) };
            let a = weighted_banzhaf_exact(&g, &s, p).unwrap();
            let b = banzhaf_poly(&g, &s, p);
            let scale = g.r_empty.abs() * 10f64.powi(g.features().len() as i32);
            assert!(close(a, b, 1e-12, scale * 1e-3), "{a} vs {b}");
        }
    }

    #[test]
    fn null_players_drop_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let g = random_game(&mut rng, 6, 1..6);
            let s = random_subset(&mut rng, &g.features(), 0.4);
            let p = rng.gen_range(0.0..1.0);
            let narrow = weighted_banzhaf_exact(&g, &s, p).unwrap();
            let wide: Vec<usize> = (0..11).collect();
            let broad = weighted_banzhaf_exact_in(&g, &s, p, &wide).unwrap();
            assert!(close(narrow, broad, 1e-12, 1e-6), "{narrow} vs {broad}");

            let games = vec![g];
            let a = sii_exact_full_universe(&games, &s, 6).unwrap();
            let b = sii_exact_full_universe(&games, &s, 11).unwrap();
            let c = sii_exact(&games, &s).unwrap();
            assert!(close(a, b, 1e-12, 1e-6) && close(a, c, 1e-12, 1e-6), "{a} {b} {c}");
        }
        assert_eq!(
            sii_exact_full_universe(&[PathGame::new(1.0, vec![])], &[0], 13),
            Err(OracleError::UniverseTooLarge(13))
        );
    }

    #[test]
    fn sii_of_null_feature_is_zero() {
        let g = PathGame::new(1.2, vec![(0, 2.0), (1, 0.5)]);
        assert_eq!(sii_exact(std::slice::from_ref(&g), &[0, 9]).unwrap(), 0.0);
        assert_eq!(sii_exact(&[g], &[9]).unwrap(), 0.0);
    }

    #[test]
    fn sii_is_integral_of_banzhaf_poly() {
        let rule = gauss_legendre(64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..300 {
            let g = random_game(&mut rng, 10, 1..9);
            let size = rng.gen_range(1..=g.features().len().min(3));
            let s: Vec<usize> = g.features()[..size].to_vec();
            let exact = leaf_sii_exact(&g, &s).unwrap();
            let integral = rule.integrate(|p| banzhaf_poly(&g, &s, p));
            let scale = g.r_empty.abs() * 10f64.powi(g.features().len() as i32) * 1e-3;
            assert!(close(exact, integral, 1e-11, scale), "{exact} vs {integral}");
        }
    }

    #[test]
    fn tabulated_oracle_matches_single_key_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let games: Vec<PathGame> = (0..6).map(|_| random_game(&mut rng, 8, 0..7)).collect();
        for order in 1..=3 {
            let all = sii_exact_all(&games, order).unwrap();
            for (key, exact) in &all {
                let single = sii_exact(&games, key).unwrap();
                assert!(close(exact.value, single, 1e-12, exact.abs_leaf_sum), "{key:?}");
            }
        }
    }

    #[test]
    fn integrand_degree_is_d_minus_s() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..40 {
            let games: Vec<PathGame> = (0..4).map(|_| random_game(&mut rng, 9, 2..8)).collect();
            let d = games.iter().map(|g| g.features().len()).max().unwrap();
            for order in 1..=d.min(3) {
                let s: Vec<usize> = games
                    .iter()
                    .find(|g| g.features().len() >= order)
                    .map(|g| g.features()[..order].to_vec())
                    .unwrap();
                let integrand = |p: f64| games.iter().map(|g| banzhaf_poly(g, &s, p)).sum::<f64>();
                // Interpolate at d - s + 1 Chebyshev points, then probe elsewhere.
                let degree = d - order;
                let xs: Vec<f64> = (0..=degree)
                    .map(|k| 0.5 - 0.5 * ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * degree + 2) as f64).cos())
                    .collect();
                let ys: Vec<f64> = xs.iter().map(|&x| integrand(x)).collect();
                let scale = ys.iter().fold(1e-300f64, |m, y| m.max(y.abs()));
                for _ in 0..5 {
                    let p = rng.gen_range(0.0..1.0);
                    let interp = lagrange(&xs, &ys, p);
                    assert!((interp - integrand(p)).abs() <= 1e-10 * scale, "degree {degree}");
                }
                let exact_rule = gauss_legendre(crate::quadrature::min_points(d, order).unwrap()).unwrap();
                let reference = gauss_legendre(64).unwrap().integrate(integrand);
                let quick = exact_rule.integrate(integrand);
                assert!((quick - reference).abs() <= 1e-12 * reference.abs().max(scale));
            }
        }
    }

    fn lagrange(xs: &[f64], ys: &[f64], x: f64) -> f64 {
        let mut total = 0.0;
        for (i, (&xi, &yi)) in xs.iter().zip(ys).enumerate() {
            let mut basis = 1.0;
            for (j, &xj) in xs.iter().enumerate() {
                if i != j {
                    basis *= (x - xj) / (xi - xj);
                }
            }
            total += yi * basis;
        }
        total
    }
}
