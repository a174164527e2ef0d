//! Multiplayer Kuhn poker and the shared one-bet betting engine used by the
//! Leduc generator.

use super::{GameBuilder, GameTree, Link, NodeId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Rank names, highest last. Up to 12 ranks end at the king so that four
/// ranks read `T J Q K`.
pub(crate) fn rank_name(rank: usize, ranks: usize) -> String {
    const NAMES: &[u8] = b"23456789TJQKA";
    if ranks <= 12 {
        (NAMES[12 - ranks + rank] as char).to_string()
    } else if ranks == 13 {
        (NAMES[rank] as char).to_string()
    } else {
        format!("#{rank}")
    }
}

/// Builds `n`-player Kuhn poker with `ranks` distinct cards.
///
/// Every player antes one chip and receives one private card from an ordered
/// uniform deal. One betting round with a single one-chip bet: with no bet
/// outstanding a player checks (`c`) or bets (`r`); facing a bet a player
/// calls (`c`) or folds (`f`). The highest remaining card takes the pot.
pub fn build_kuhn<T: Scalar>(n_players: usize, ranks: usize) -> Result<GameTree<T>> {
    if n_players < 3 {
        return Err(Error::InvalidParams(format!(
            "kuhn needs at least 3 players, got {n_players}"
        )));
    }
    if ranks < n_players {
        return Err(Error::InvalidParams(format!(
            "kuhn needs ranks >= players ({ranks} < {n_players})"
        )));
    }
    let deals = ordered_deals(ranks, n_players);
    let mut b = GameBuilder::with_capacity(n_players, deals.len() * 4 * (1 << n_players));
    let root = b.chance(Link::Root)?;
    let prob = T::one() / T::from_count(deals.len());
    let names: Vec<String> = (0..ranks).map(|r| rank_name(r, ranks)).collect();
    for cards in deals {
        let labels: Vec<String> = cards.iter().map(|&c| names[c].clone()).collect();
        let mut table = Table::new(n_players, 1);
        let mut round = BettingRound::new(&table, 1);
        let mut hist = String::new();
        betting(
            &mut b,
            Link::Outcome(root, prob),
            &mut table,
            &mut round,
            &mut hist,
            &|p, hist| format!("{}:/{}:", labels[p], hist),
            &mut |b, link, table, _| b.terminal(link, table.team_payoff::<T>(&cards)),
        )?;
    }
    b.build()
}

/// All ordered assignments of distinct cards `0..deck` to `players` seats,
/// in lexicographic order.
pub(crate) fn ordered_deals(deck: usize, players: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(players);
    let mut used = vec![false; deck];
    fn rec(
        deck: usize,
        players: usize,
        cur: &mut Vec<usize>,
        used: &mut [bool],
        out: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() == players {
            out.push(cur.clone());
            return;
        }
        for c in 0..deck {
            if !used[c] {
                used[c] = true;
                cur.push(c);
                rec(deck, players, cur, used, out);
                cur.pop();
                used[c] = false;
            }
        }
    }
    rec(deck, players, &mut cur, &mut used, &mut out);
    out
}

/// Chips and folds of every seat.
#[derive(Debug, Clone)]
pub(crate) struct Table {
    pub folded: Vec<bool>,
    pub contrib: Vec<u64>,
}

impl Table {
    pub fn new(players: usize, ante: u64) -> Self {
        Self {
            folded: vec![false; players],
            contrib: vec![ante; players],
        }
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.folded.len()).filter(|&p| !self.folded[p])
    }

    pub fn num_active(&self) -> usize {
        self.folded.iter().filter(|f| !**f).count()
    }

    /// Team payoff when the pot goes to the non-folded seats with maximal
    /// `strength`; ties split the pot evenly.
    pub fn team_payoff<T: Scalar>(&self, strength: &[usize]) -> T {
        let best = self.active().map(|p| strength[p]).max().expect("someone active");
        let winners: Vec<usize> = self.active().filter(|&p| strength[p] == best).collect();
        let pot: u64 = self.contrib.iter().sum();
        let share = T::from_count(pot as usize) / T::from_count(winners.len());
        let team = self.folded.len() - 1;
        let mut total = T::zero();
        for p in 0..team {
            if winners.contains(&p) {
                total += share;
            }
            total -= T::from_count(self.contrib[p] as usize);
        }
        total
    }
}

/// One betting round with at most one bet.
#[derive(Debug, Clone)]
pub(crate) struct BettingRound {
    /// Seats still to act, in order.
    pub queue: Vec<usize>,
    pub bet_open: bool,
    pub bet_size: u64,
}

impl BettingRound {
    pub fn new(table: &Table, bet_size: u64) -> Self {
        Self {
            queue: table.active().collect(),
            bet_open: false,
            bet_size,
        }
    }
}

/// Expands a betting round below `link`; `finish` is called once the round
/// is over and must create the subtree that follows.
pub(crate) fn betting<T: Scalar, L, F>(
    b: &mut GameBuilder<T>,
    link: Link<T>,
    table: &mut Table,
    round: &mut BettingRound,
    hist: &mut String,
    label: &L,
    finish: &mut F,
) -> Result<NodeId>
where
    L: Fn(usize, &str) -> String,
    F: FnMut(&mut GameBuilder<T>, Link<T>, &Table, &str) -> Result<NodeId>,
{
    if round.queue.is_empty() {
        return finish(b, link, table, hist);
    }
    let p = round.queue[0];
    let info = label(p, hist);
    if !round.bet_open {
        let node = b.decision(link, p, &info, &["c", "r"])?;
        // check
        let saved = round.queue.remove(0);
        hist.push('c');
        betting(b, Link::Action(node, 0), table, round, hist, label, finish)?;
        hist.pop();
        round.queue.insert(0, saved);
        // bet: everyone else still in responds, in seat order after the bettor
        let seats = table.folded.len();
        let saved_queue = std::mem::take(&mut round.queue);
        round.queue = (1..seats)
            .map(|k| (p + k) % seats)
            .filter(|&q| !table.folded[q])
            .collect();
        round.bet_open = true;
        table.contrib[p] += round.bet_size;
        hist.push('r');
        betting(b, Link::Action(node, 1), table, round, hist, label, finish)?;
        hist.pop();
        table.contrib[p] -= round.bet_size;
        round.bet_open = false;
        round.queue = saved_queue;
        Ok(node)
    } else {
        let node = b.decision(link, p, &info, &["c", "f"])?;
        let saved = round.queue.remove(0);
        // call
        table.contrib[p] += round.bet_size;
        hist.push('c');
        betting(b, Link::Action(node, 0), table, round, hist, label, finish)?;
        hist.pop();
        table.contrib[p] -= round.bet_size;
        // fold
        table.folded[p] = true;
        hist.push('f');
        betting(b, Link::Action(node, 1), table, round, hist, label, finish)?;
        hist.pop();
        table.folded[p] = false;
        round.queue.insert(0, saved);
        Ok(node)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::validate_game;

    #[test]
    fn rank_names() {
        let four: Vec<String> = (0..4).map(|r| rank_name(r, 4)).collect();
        assert_eq!(four, ["T", "J", "Q", "K"]);
        assert_eq!(rank_name(0, 3), "J");
    }

    #[test]
    fn deals_count() {
        assert_eq!(ordered_deals(4, 3).len(), 24);
        assert_eq!(ordered_deals(3, 3).len(), 6);
    }

    #[test]
    fn three_player_four_rank_sizes() {
        let g: GameTree<f64> = build_kuhn(3, 4).unwrap();
        assert_eq!(g.num_leaves(), 312);
        for p in 0..3 {
            assert_eq!(g.num_sequences(p), 33);
        }
        assert!(validate_game(&g).is_valid());
        assert_eq!(g.utility_range(), 6.0);
    }

    #[test]
    fn too_few_ranks() {
        assert!(matches!(
            build_kuhn::<f64>(3, 2),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn chance_reach_sums_to_one_over_a_line() {
        // Fix the all-check line: exactly one leaf per deal.
        let g: GameTree<f64> = build_kuhn(3, 3).unwrap();
        let total: f64 = g
            .leaves()
            .iter()
            .enumerate()
            .filter(|(i, _)| g.sequence_label(0, g.leaf_seq(*i, 0)).ends_with(":/:c"))
            .filter(|(i, _)| g.sequence_label(1, g.leaf_seq(*i, 1)).ends_with(":/c:c"))
            .filter(|(i, _)| g.sequence_label(2, g.leaf_seq(*i, 2)).ends_with(":/cc:c"))
            .map(|(_, l)| l.chance_reach)
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn payoffs_of_simple_lines() {
        let g: GameTree<f64> = build_kuhn(3, 3).unwrap();
        // Deal (J, Q, K): all check, adversary holds K and wins 2 chips.
        let leaf = g
            .leaves()
            .iter()
            .enumerate()
            .find(|(i, _)| {
                g.sequence_label(0, g.leaf_seq(*i, 0)) == "J:/:c"
                    && g.sequence_label(1, g.leaf_seq(*i, 1)) == "Q:/c:c"
                    && g.sequence_label(2, g.leaf_seq(*i, 2)) == "K:/cc:c"
            })
            .unwrap();
        assert_eq!(leaf.1.team_payoff, -2.0);
    }
}
